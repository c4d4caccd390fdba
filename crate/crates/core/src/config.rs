//! Run configuration, read from and written to TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coupled::{RunOptions, Switches};
use crate::error::{FeneError, Result};
use crate::params::FeneParams;

/// Initial amplitudes above this need `allow_large_amplitude`.
pub const SMALL_DATA_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub k: f64,
    #[serde(default = "yes")]
    pub advection: bool,
    #[serde(default = "yes")]
    pub coupling: bool,
    #[serde(default = "yes")]
    pub drag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisSection {
    pub degree_max: usize,
    pub quad_order: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub series_every: u64,
    #[serde(default)]
    pub checkpoint_every: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VelocityProfile {
    /// Leray-projected Gaussian jet, a localized vortex dipole.
    GaussianDipole,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfigProfile {
    /// Random degree-2 direction times a Gaussian envelope in `x`.
    Degree2Bump,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub seed: u64,
    pub amplitude: f64,
    #[serde(default = "default_u_profile")]
    pub u_profile: VelocityProfile,
    #[serde(default = "default_psi_profile")]
    pub psi_profile: ConfigProfile,
    #[serde(default)]
    pub allow_large_amplitude: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    #[serde(default = "default_c_d")]
    pub c_d: Vec<f64>,
    #[serde(default = "default_lp")]
    pub lp: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    #[serde(default = "one_usize")]
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub basis: BasisSection,
    pub time: TimeSection,
    pub initial: InitialSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    pub output: OutputSection,
}

fn yes() -> bool {
    true
}
fn one() -> u64 {
    1
}
fn one_usize() -> usize {
    1
}
fn default_u_profile() -> VelocityProfile {
    VelocityProfile::GaussianDipole
}
fn default_psi_profile() -> ConfigProfile {
    ConfigProfile::Degree2Bump
}
fn default_c_d() -> Vec<f64> {
    vec![3.0, 4.0, 6.0]
}
fn default_lp() -> Vec<f64> {
    vec![4.0]
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self { c_d: default_c_d(), lp: default_lp() }
    }
}

impl Default for RunConfig {
    /// Small-data coupled run on `L = 64π`.
    fn default() -> Self {
        Self {
            model: ModelSection { k: 2.0, advection: true, coupling: true, drag: true },
            grid: GridSection { n: 256, length: 64.0 * std::f64::consts::PI },
            basis: BasisSection { degree_max: 4, quad_order: 8 },
            time: TimeSection { dt: 0.1, t_end: 102.4, series_every: 1, checkpoint_every: 0 },
            initial: InitialSection {
                seed: 1,
                amplitude: 1e-2,
                u_profile: VelocityProfile::GaussianDipole,
                psi_profile: ConfigProfile::Degree2Bump,
                allow_large_amplitude: false,
            },
            diagnostics: DiagnosticsSection::default(),
            output: OutputSection { dir: PathBuf::from("out"), threads: 1 },
        }
    }
}

fn bad(msg: String) -> FeneError {
    FeneError::Config(msg)
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| bad(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn params(&self) -> Result<FeneParams> {
        FeneParams::new(self.model.k, 2, self.grid.length).map_err(|e| bad(e.to_string()))
    }

    pub fn switches(&self) -> Switches {
        Switches { advection: self.model.advection, coupling: self.model.coupling, drag: self.model.drag }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            dt: self.time.dt,
            t_end: self.time.t_end,
            series_every: self.time.series_every,
            checkpoint_every: self.time.checkpoint_every,
            c_d: self.diagnostics.c_d.clone(),
            lp: self.diagnostics.lp.clone(),
            growth_tol: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        let g = &self.grid;
        if g.n < 16 || !g.n.is_power_of_two() {
            return Err(bad(format!("grid.n must be a power of two >= 16, got {}", g.n)));
        }
        let b = &self.basis;
        if b.quad_order < b.degree_max + 2 {
            return Err(bad(format!(
                "basis.quad_order must be >= degree_max + 2, got {} for degree {}",
                b.quad_order, b.degree_max
            )));
        }
        if b.degree_max < 2 && self.initial.psi_profile == ConfigProfile::Degree2Bump {
            return Err(bad("degree-2 initial configuration needs basis.degree_max >= 2".into()));
        }
        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            return Err(bad(format!("time.dt must be > 0, got {}", t.dt)));
        }
        if !(t.t_end >= 0.0 && t.t_end.is_finite()) {
            return Err(bad(format!("time.t_end must be >= 0, got {}", t.t_end)));
        }
        if t.series_every == 0 {
            return Err(bad("time.series_every must be >= 1".into()));
        }
        let i = &self.initial;
        if !(i.amplitude >= 0.0 && i.amplitude.is_finite()) {
            return Err(bad(format!("initial.amplitude must be >= 0, got {}", i.amplitude)));
        }
        if i.amplitude > SMALL_DATA_LIMIT && !i.allow_large_amplitude {
            return Err(bad(format!(
                "initial.amplitude {} exceeds the small-data limit {SMALL_DATA_LIMIT}; set allow_large_amplitude = true to proceed",
                i.amplitude
            )));
        }
        let d = &self.diagnostics;
        if d.c_d.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(bad("diagnostics.c_d entries must be > 0".into()));
        }
        if d.lp.iter().any(|p| !(*p >= 2.0 && p.is_finite())) {
            return Err(bad("diagnostics.lp entries must be finite and >= 2".into()));
        }
        if self.output.threads == 0 {
            return Err(bad("output.threads must be >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[model]
k = 2.0

[grid]
n = 64
length = 50.0

[basis]
degree_max = 4
quad_order = 8

[time]
dt = 0.05
t_end = 1.0

[initial]
seed = 7
amplitude = 0.01

[output]
dir = "runs/a"
"#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.grid.n, 64);
        assert!(c.model.coupling);
        assert_eq!(c.diagnostics.c_d, vec![3.0, 4.0, 6.0]);
        assert_eq!(c.output.threads, 1);
        assert_eq!(c.initial.u_profile, VelocityProfile::GaussianDipole);
    }

    #[test]
    fn round_trip() {
        for c in [RunConfig::default(), RunConfig::from_toml_str(SAMPLE).unwrap()] {
            let back = RunConfig::from_toml_str(&c.to_toml_string().unwrap()).unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn rejections() {
        let cases = [
            SAMPLE.replace("n = 64", "n = 48"),
            SAMPLE.replace("k = 2.0", "k = -1.0"),
            SAMPLE.replace("dt = 0.05", "dt = 0.0"),
            SAMPLE.replace("amplitude = 0.01", "amplitude = 0.5"),
            SAMPLE.replace("quad_order = 8", "quad_order = 5"),
            SAMPLE.replace("seed = 7", "seed = 7\nbogus = 1"),
            SAMPLE.replace("[output]\n", ""),
        ];
        for c in cases {
            assert!(matches!(RunConfig::from_toml_str(&c), Err(FeneError::Config(_))), "{c}");
        }
        let ok = SAMPLE.replace("amplitude = 0.01", "amplitude = 0.5\nallow_large_amplitude = true");
        assert!(RunConfig::from_toml_str(&ok).is_ok());
    }
}
