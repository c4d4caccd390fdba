//! Power-law fits of norm series and the frequency-splitting diagnostic.

use serde::{Deserialize, Serialize};

use crate::error::{FeneError, Result};
use crate::series::SeriesTable;

pub const DEFAULT_C_SAT: f64 = 0.1;
/// Early times are dominated by the smooth part of the data, not the low-frequency tail.
pub const DEFAULT_T_TRANSIENT: f64 = 5.0;
pub const MIN_SAMPLES: usize = 20;
/// RMS of the log residual above which a power law is a poor description.
pub const POOR_FIT_RMS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    /// Slope of `log y` against `log(1 + t)`.
    pub p: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub r2: f64,
    pub rms_log_resid: f64,
    pub samples: usize,
    pub t1: f64,
    pub t2: f64,
    pub poor_fit: bool,
}

/// Least-squares exponent of `y ≈ C (1 + t)^p` on `t ∈ [window.0, window.1]`.
pub fn fit_exponent(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<Fit> {
    if t.len() != y.len() {
        return Err(FeneError::DimensionMismatch { expected: t.len(), got: y.len() });
    }
    let (t1, t2) = window;
    let mut xs = Vec::new();
    let mut ls = Vec::new();
    for (&ti, &yi) in t.iter().zip(y) {
        if ti < t1 || ti > t2 {
            continue;
        }
        if !(yi > 0.0) || !yi.is_finite() {
            return Err(FeneError::Fit(format!("nonpositive value {yi} at t = {ti}")));
        }
        xs.push((1.0 + ti).ln());
        ls.push(yi.ln());
    }
    let n = xs.len();
    if n < MIN_SAMPLES {
        return Err(FeneError::Fit(format!("{n} samples in [{t1}, {t2}], need {MIN_SAMPLES}")));
    }
    let nf = n as f64;
    let xm = xs.iter().sum::<f64>() / nf;
    let lm = ls.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FeneError::Fit("window contains a single time".into()));
    }
    let sxl: f64 = xs.iter().zip(&ls).map(|(x, l)| (x - xm) * (l - lm)).sum();
    let p = sxl / sxx;
    let intercept = lm - p * xm;
    let ss_res: f64 = xs.iter().zip(&ls).map(|(x, l)| (l - intercept - p * x).powi(2)).sum();
    let ss_tot: f64 = ls.iter().map(|l| (l - lm).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let rms = (ss_res / nf).sqrt();
    let stderr = (ss_res / (nf - 2.0) / sxx).sqrt();
    Ok(Fit { p, stderr, intercept, r2, rms_log_resid: rms, samples: n, t1, t2, poor_fit: rms > POOR_FIT_RMS })
}

/// `c_sat (L / 2π)²`: beyond it the periodic box no longer mimics free space.
pub fn saturation_time(length: f64, c_sat: f64) -> Result<f64> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(FeneError::InvalidParameter(format!("box length must be > 0, got {length}")));
    }
    Ok(c_sat * (length / std::f64::consts::TAU).powi(2))
}

/// Algebraic decay exponents expected for small data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub d: usize,
    pub u_l2: f64,
    pub psi_l2: f64,
    pub grad_u: f64,
    pub grad_psi: f64,
    /// Low-frequency energy from the first splitting pass.
    pub lowfreq_pre: f64,
    /// After feeding the velocity rate back in; two dimensions only.
    pub lowfreq_post: Option<f64>,
}

impl RateTable {
    /// `‖u‖_{L^p}` exponent.
    pub fn lp(&self, p: f64) -> f64 {
        -(self.d as f64) / 2.0 * (1.0 - 1.0 / p)
    }

    /// Best available low-frequency target.
    pub fn lowfreq(&self) -> f64 {
        self.lowfreq_post.unwrap_or(self.lowfreq_pre)
    }
}

pub fn theoretical_targets(d: usize) -> Result<RateTable> {
    if d != 2 && d != 3 {
        return Err(FeneError::InvalidParameter(format!("dimension must be 2 or 3, got {d}")));
    }
    let df = d as f64;
    Ok(RateTable {
        d,
        u_l2: -df / 4.0,
        psi_l2: -df / 4.0 - 0.5,
        grad_u: -df / 4.0 - 0.5,
        grad_psi: -df / 4.0 - 0.5,
        lowfreq_pre: -df / 2.0 + 1.0,
        lowfreq_post: (d == 2).then_some(-1.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityReport {
    pub name: String,
    pub fit: Fit,
    pub target: f64,
    pub tolerance: f64,
    /// `tolerance - |p - target|`; negative means outside the band.
    pub margin: f64,
    pub pass: bool,
}

impl QuantityReport {
    pub fn new(name: &str, fit: Fit, target: f64, tolerance: f64) -> Self {
        let margin = tolerance - (fit.p - target).abs();
        Self { name: name.to_string(), fit, target, tolerance, margin, pass: margin >= 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingReport {
    pub c_d: f64,
    /// `max_t [E(t) - E(t₁) + ∫ C_d/(1+s) ‖u‖² - ∫ C_d/(1+s) ∫_S |û|²] / E(t₁)`.
    pub max_violation: f64,
    /// Final left side over final right side of the integrated inequality.
    pub final_ratio: f64,
    pub holds: bool,
    pub lowfreq_fit: Fit,
    /// Fit of `sqrt(B)` where `B(t) = (1+t)^{-C_d} [E(t₀) + ∫_{t₀}^t C_d (1+s)^{C_d-1} ∫_S |û|² ds]`
    /// is the Gronwall bound on the energy, integrated from the first sample.
    pub bound_fit: Fit,
    /// Largest `E(t) / B(t)` over all samples.
    pub bound_ratio: f64,
}

/// Cumulative check of `dE/dt + C_d/(1+t) ‖u‖² <= C_d/(1+t) ∫_S |û|²` on the window.
pub fn splitting_diagnostic(
    t: &[f64],
    energy: &[f64],
    u_sq: &[f64],
    lowfreq: &[f64],
    c_d: f64,
    window: (f64, f64),
    tol: f64,
) -> Result<SplittingReport> {
    let n = t.len();
    if energy.len() != n || u_sq.len() != n || lowfreq.len() != n {
        return Err(FeneError::DimensionMismatch { expected: n, got: energy.len().min(u_sq.len()).min(lowfreq.len()) });
    }
    let idx: Vec<usize> = (0..n).filter(|&i| t[i] >= window.0 && t[i] <= window.1).collect();
    if idx.len() < 2 {
        return Err(FeneError::Fit("splitting window holds fewer than two samples".into()));
    }
    let e0 = energy[idx[0]];
    let scale = if e0 > 0.0 { e0 } else { 1.0 };
    let (mut lhs_int, mut rhs_int) = (0.0, 0.0);
    let mut max_violation = f64::NEG_INFINITY;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for w in idx.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = t[b] - t[a];
        let wa = c_d / (1.0 + t[a]);
        let wb = c_d / (1.0 + t[b]);
        lhs_int += 0.5 * h * (wa * u_sq[a] + wb * u_sq[b]);
        rhs_int += 0.5 * h * (wa * lowfreq[a] + wb * lowfreq[b]);
        lhs = energy[b] - e0 + lhs_int;
        rhs = rhs_int;
        max_violation = max_violation.max((lhs - rhs) / scale);
    }
    let lowfreq_fit = fit_exponent(t, lowfreq, window)?;
    let final_ratio = if rhs != 0.0 { lhs / rhs } else { 0.0 };

    let weight = |i: usize| c_d * (1.0 + t[i]).powf(c_d - 1.0) * lowfreq[i];
    let mut acc = energy[0];
    let mut bound = vec![energy[0]];
    for i in 1..n {
        acc += 0.5 * (t[i] - t[i - 1]) * (weight(i - 1) + weight(i));
        bound.push(acc * (1.0 + t[i]).powf(-c_d));
    }
    let bound_ratio = energy.iter().zip(&bound).map(|(e, b)| e / b).fold(0.0, f64::max);
    let root: Vec<f64> = bound.iter().map(|b| b.sqrt()).collect();
    let bound_fit = fit_exponent(t, &root, window)?;
    Ok(SplittingReport {
        c_d,
        max_violation,
        final_ratio,
        holds: max_violation <= tol,
        lowfreq_fit,
        bound_fit,
        bound_ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub d: usize,
    pub t_sat: f64,
    pub window: (f64, f64),
    pub targets: RateTable,
    pub quantities: Vec<QuantityReport>,
    pub splitting: Vec<SplittingReport>,
}

/// Tolerance bands around the targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bands {
    pub u_l2: f64,
    pub psi_l2: f64,
    pub grad_u: f64,
    pub grad_psi: f64,
    pub lowfreq: f64,
    pub lp: f64,
}

impl Default for Bands {
    fn default() -> Self {
        Self { u_l2: 0.15, psi_l2: 0.25, grad_u: 0.3, grad_psi: 0.3, lowfreq: 0.25, lp: 0.2 }
    }
}

impl DecayReport {
    /// Fit every column of a series on `[t₁, min(t_end, t_sat)]`.
    pub fn from_series(
        tab: &SeriesTable,
        d: usize,
        length: f64,
        t_transient: f64,
        bands: Bands,
    ) -> Result<Self> {
        let targets = theoretical_targets(d)?;
        let t_sat = saturation_time(length, DEFAULT_C_SAT)?;
        let t = tab.times();
        let t_last = t.last().copied().ok_or_else(|| FeneError::Fit("empty series".into()))?;
        let window = (t_transient, t_sat.min(t_last));
        if (1.0 + window.1) < 10.0 * (1.0 + window.0) {
            return Err(FeneError::Fit(format!(
                "window [{}, {}] spans less than a decade in 1 + t",
                window.0, window.1
            )));
        }
        let col = |name: &str| tab.column(name).ok_or_else(|| FeneError::Format(format!("missing column {name}")));
        let mut quantities = vec![
            QuantityReport::new("u_l2", fit_exponent(t, col("u_l2")?, window)?, targets.u_l2, bands.u_l2),
            QuantityReport::new("psi_l2", fit_exponent(t, col("psi_l2")?, window)?, targets.psi_l2, bands.psi_l2),
            QuantityReport::new("u_h1", fit_exponent(t, col("u_h1")?, window)?, targets.grad_u, bands.grad_u),
            QuantityReport::new(
                "psi_h1x",
                fit_exponent(t, col("psi_h1x")?, window)?,
                targets.grad_psi,
                bands.grad_psi,
            ),
        ];
        for (p, c) in tab.lp_columns() {
            quantities.push(QuantityReport::new(&format!("lp{p}"), fit_exponent(t, c, window)?, targets.lp(p), bands.lp));
        }
        let u: Vec<f64> = col("u_l2")?.iter().map(|v| v * v).collect();
        let e: Vec<f64> = u.iter().zip(col("psi_l2")?).map(|(a, b)| a + b * b).collect();
        let mut splitting = Vec::new();
        for (c_d, low) in tab.lowfreq_columns() {
            let rep = splitting_diagnostic(t, &e, &u, low, c_d, window, 1e-3)?;
            quantities.push(QuantityReport::new(
                &format!("lowfreq_Cd{c_d}"),
                rep.lowfreq_fit,
                targets.lowfreq(),
                bands.lowfreq,
            ));
            splitting.push(rep);
        }
        Ok(Self { d, t_sat, window, targets, quantities, splitting })
    }

    pub fn quantity(&self, name: &str) -> Option<&QuantityReport> {
        self.quantities.iter().find(|q| q.name == name)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "window [{:.3}, {:.3}]  t_sat {:.3}  d = {}\n{:<16} {:>9} {:>9} {:>8} {:>8} {:>8}  verdict\n",
            self.window.0, self.window.1, self.t_sat, self.d, "quantity", "p", "stderr", "target", "margin", "R2"
        );
        for q in &self.quantities {
            s += &format!(
                "{:<16} {:>9.4} {:>9.2e} {:>8.3} {:>8.3} {:>8.5}  {}{}\n",
                q.name,
                q.fit.p,
                q.fit.stderr,
                q.target,
                q.margin,
                q.fit.r2,
                if q.pass { "PASS" } else { "FAIL" },
                if q.fit.poor_fit { " (poor power-law fit)" } else { "" }
            );
        }
        for sp in &self.splitting {
            s += &format!(
                "splitting C_d = {:<5} max violation {:>10.3e}  lhs/rhs {:>8.4}  bound exponent {:>8.4}  {}\n",
                sp.c_d,
                sp.max_violation,
                sp.final_ratio,
                sp.bound_fit.p,
                if sp.holds { "holds" } else { "VIOLATED" }
            );
        }
        s
    }
}
