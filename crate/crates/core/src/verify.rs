//! Self-check suite: basis and operators against a dense quadrature, the
//! coupling cancellation, the linear dissipation identity and conservation
//! along a short coupled run.

use num_complex::Complex64;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::ball::{BallBasis, ConfigCoeffs};
use crate::coupled::{read_checkpoint, write_checkpoint, CoupledModel, MicroMacroState, RunOptions, Switches};
use crate::error::Result;
use crate::flow::{leray_project, FlowGrid};
use crate::modes::{random_constrained, ModeSystem, IDENTITY_TOL, PAIRING_TOL};
use crate::params::FeneParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub group: String,
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn record(&mut self, group: &str, name: String, value: f64, tol: f64) {
        let pass = value.is_finite() && value <= tol;
        self.checks.push(Check { group: group.into(), name, value, tol, pass });
    }

    fn flag(&mut self, group: &str, name: String, ok: bool) {
        self.checks.push(Check { group: group.into(), name, value: if ok { 0.0 } else { 1.0 }, tol: 0.0, pass: ok });
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn lines(&self) -> Vec<String> {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {:<12} {:<48} {:.3e} (tol {:.1e})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.group,
                    c.name,
                    c.value,
                    c.tol
                )
            })
            .collect()
    }
}

/// Tanh-sinh nodes on `[0, 1]` as `(s, 1 - s, weight)`, both ends resolved without cancellation.
fn tanh_sinh(h: f64, t_max: f64) -> Vec<(f64, f64, f64)> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let n = (t_max / h).ceil() as i64;
    (-n..=n)
        .map(|i| {
            let t = i as f64 * h;
            let u = half_pi * t.sinh();
            let s = 1.0 / (1.0 + (-2.0 * u).exp());
            let sc = 1.0 / (1.0 + (2.0 * u).exp());
            let w = h * half_pi * t.cosh() / (2.0 * u.cosh().powi(2));
            (s, sc, w)
        })
        .filter(|(s, sc, w)| *s > 0.0 && *sc > 0.0 && *w > 0.0)
        .collect()
}

/// Dense polar quadrature on the unit disk against `(1 - |R|²)^e / Z`, in the
/// variable `s = 1 - r²` so that the endpoint singularity sits at `s = 0`.
pub struct DiskOracle {
    nodes: Vec<([f64; 2], f64)>,
}

impl DiskOracle {
    pub fn new(exponent: f64, scale: f64, angles: usize) -> Self {
        let radial = tanh_sinh(1.0 / 64.0, 4.5);
        let mut nodes = Vec::with_capacity(radial.len() * angles);
        let dphi = std::f64::consts::TAU / angles as f64;
        for &(s, sc, w) in &radial {
            let r = sc.sqrt();
            // dR = r dr dφ = ½ ds dφ
            let wr = 0.5 * w * s.powf(exponent) * scale * dphi;
            for a in 0..angles {
                let phi = (a as f64 + 0.5) * dphi;
                nodes.push(([r * phi.cos(), r * phi.sin()], wr));
            }
        }
        Self { nodes }
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.nodes.iter().map(|(p, w)| w * f(p)).sum()
    }

    /// Integrate a vector-valued function evaluated once per node.
    pub fn integrate_many(&self, n: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Vec<f64> {
        let mut acc = vec![0.0; n];
        let mut buf = vec![0.0; n];
        for (p, w) in &self.nodes {
            f(p, &mut buf);
            acc.iter_mut().zip(&buf).for_each(|(a, b)| *a += w * b);
        }
        acc
    }
}

/// Largest entry of `|a - b|` over the largest `|b|`.
fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Oracle versions of `K`, the drag blocks and the stress vectors, all flattened row-major.
pub struct OperatorOracle {
    pub gram: Vec<f64>,
    pub stiffness: Vec<f64>,
    pub drag: Vec<Vec<f64>>,
    pub stress: Vec<Vec<f64>>,
}

pub fn operator_oracle(basis: &BallBasis) -> OperatorOracle {
    let m = basis.len();
    let k = basis.params().k;
    let z = std::f64::consts::PI / (k + 1.0);
    let angles = 4 * (basis.degree_max() + 8);
    let main = DiskOracle::new(k, 1.0 / z, angles);
    let sing = DiskOracle::new(k - 1.0, 1.0 / z, angles);
    let n_main = 2 * m * m + 4 * m * m;
    let flat = main.integrate_many(n_main, |p, out| {
        let (v, g) = basis.eval(p);
        let mut o = 0;
        for i in 0..m {
            for j in 0..m {
                out[o] = v[i] * v[j];
                out[m * m + o] = g[2 * i] * g[2 * j] + g[2 * i + 1] * g[2 * j + 1];
                o += 1;
            }
        }
        // drag (a, b), row j, column i: φ_i R_b ∂_a φ_j
        for a in 0..2 {
            for b in 0..2 {
                let base = 2 * m * m + (2 * a + b) * m * m;
                for j in 0..m {
                    for i in 0..m {
                        out[base + j * m + i] = v[i] * p[b] * g[2 * j + a];
                    }
                }
            }
        }
    });
    let stress_flat = sing.integrate_many(4 * m, |p, out| {
        let (v, _) = basis.eval(p);
        for a in 0..2 {
            for b in 0..2 {
                for j in 0..m {
                    out[(2 * a + b) * m + j] = 2.0 * k * p[a] * p[b] * v[j];
                }
            }
        }
    });
    OperatorOracle {
        gram: flat[..m * m].to_vec(),
        stiffness: flat[m * m..2 * m * m].to_vec(),
        drag: (0..4).map(|ab| flat[2 * m * m + ab * m * m..2 * m * m + (ab + 1) * m * m].to_vec()).collect(),
        stress: (0..4).map(|ab| stress_flat[ab * m..(ab + 1) * m].to_vec()).collect(),
    }
}

fn row_major(m: &nalgebra::DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn check_basis(rep: &mut VerifyReport) -> Result<()> {
    for &k in &[0.5, 1.0, 2.0, 4.0] {
        let basis = BallBasis::build(FeneParams::ball(k, 2)?, 6, 10)?;
        let m = basis.len();
        let o = operator_oracle(&basis);
        let id: Vec<f64> = (0..m * m).map(|ij| if ij / m == ij % m { 1.0 } else { 0.0 }).collect();
        rep.record("basis", format!("k={k} orthonormality"), rel_dev(&o.gram, &id), 1e-10);
        rep.record("operators", format!("k={k} stiffness"), rel_dev(&row_major(basis.stiffness()), &o.stiffness), 1e-8);
        let mut dd: f64 = 0.0;
        let mut ds: f64 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                dd = dd.max(rel_dev(&row_major(basis.drag_matrix(a, b)), &o.drag[2 * a + b]));
                ds = ds.max(rel_dev(basis.stress_vector(a, b), &o.stress[2 * a + b]));
            }
        }
        rep.record("operators", format!("k={k} drag"), dd, 1e-8);
        rep.record("operators", format!("k={k} stress"), ds, 1e-8);
        // source on a trace-free gradient equals the stress contraction
        let kappa = [0.3, -0.7, 0.4, -0.3];
        let src: Vec<f64> = (0..m)
            .map(|j| if j == 0 { 0.0 } else { (0..4).map(|ab| kappa[ab] * o.stress[ab][j]).sum() })
            .collect();
        let got = basis.source_coeffs(&nalgebra::DMatrix::from_row_slice(2, 2, &kappa))?;
        rep.record("operators", format!("k={k} source"), rel_dev(got.as_slice(), &src), 1e-8);
        // shear closed form
        let c = 0.37;
        let g = basis.project(|p| c * p[0] * p[1]);
        let tau = basis.stress(&ConfigCoeffs::new(g.into_vec()))?;
        let want = c / (2.0 * (k + 2.0));
        rep.record("operators", format!("k={k} shear stress closed form"), (tau[(0, 1)] - want).abs() / want, 1e-10);
        let pc = basis.poincare_constant()?;
        rep.flag("poincare", format!("k={k} lambda1 = {:.6} > 0", pc.lambda1), pc.lambda1 > 0.0);
    }
    Ok(())
}

fn check_modes(rep: &mut VerifyReport) -> Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for (d, deg) in [(2usize, 8usize), (3, 4)] {
        let basis = BallBasis::build(FeneParams::ball(2.0, d)?, deg, deg + 4)?;
        for r in [0.125, 0.5, 1.0] {
            let xi: Vec<f64> = if d == 2 { vec![0.6 * r, 0.8 * r] } else { vec![0.48 * r, 0.6 * r, 0.64 * r] };
            let sys = ModeSystem::assemble(&xi, &basis)?;
            rep.record("modes", format!("d={d} |xi|={r} pairing"), sys.pairing_residual(), PAIRING_TOL);
            let (u, g) = random_constrained(&sys, &mut rng);
            let lr = sys.lyapunov_check(&u, &g, 2.0, 0.05);
            let resid = lr.as_ref().map(|l| l.max_identity_resid).unwrap_or(f64::INFINITY);
            rep.record("modes", format!("d={d} |xi|={r} dissipation identity"), resid, IDENTITY_TOL);
            rep.flag("modes", format!("d={d} |xi|={r} energy monotone"), lr.map(|l| l.monotone).unwrap_or(false));
            let a = sys.spectral_abscissa()?;
            rep.flag("modes", format!("d={d} |xi|={r} abscissa {a:.4e} < 0"), a < 0.0);
        }
    }
    Ok(())
}

fn check_dynamics(rep: &mut VerifyReport) -> Result<()> {
    let grid = FlowGrid::new(16, 12.0)?;
    let basis = BallBasis::build(FeneParams::ball(2.0, 2)?, 4, 8)?;
    let m = basis.len();
    let model = CoupledModel::new(grid.clone(), basis, Switches::default())?;

    let mut eq = MicroMacroState::zeros(&grid, m);
    for _ in 0..100 {
        eq = model.imex_step(&eq, 0.1)?;
    }
    let zero = MicroMacroState::zeros(&grid, m);
    rep.flag("dynamics", "equilibrium stays fixed".into(), eq.u == zero.u && eq.g == zero.g);

    let mut a = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut b = a.clone();
    for (ix, iy, c) in [(1usize, 0usize, Complex64::new(2e-3, 1e-3)), (1, 2, Complex64::new(-1e-3, 5e-4)), (0, 1, Complex64::new(1.5e-3, 0.0))] {
        let idx = iy * grid.n() + ix;
        a[idx] += c;
        b[idx] -= 0.5 * c;
        let cj = grid.conjugate_index(idx);
        a[cj] += c.conj();
        b[cj] -= 0.5 * c.conj();
    }
    let u = leray_project(&grid, [a, b]);
    let mut g = vec![0.0; grid.len() * m];
    for p in 0..grid.len() {
        let (x, y) = grid.position(p);
        let s = (std::f64::consts::TAU * (x + 2.0 * y) / grid.length()).sin();
        for j in 1..m {
            g[p * m + j] = 1e-3 * s / j as f64;
        }
    }
    let init = MicroMacroState::new(0.0, 0, u, g, m)?;
    let mut opts = RunOptions::new(0.05, 5.0);
    opts.checkpoint_every = 50;
    let mut saved = Vec::new();
    let out = model.run(init.clone(), &opts, |s| {
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &grid, s)?;
        saved.push(buf);
        Ok(())
    })?;
    rep.record("dynamics", "stress/source cancellation".into(), out.ledger.max_cancel_ratio(), 1e-10);
    rep.flag("dynamics", "energy non-increasing".into(), out.ledger.is_monotone());
    rep.record("conservation", "max |coeffs[0]|".into(), out.state.max_mass(), 1e-12);
    rep.record("conservation", "divergence residual".into(), out.state.u.divergence_residual(&grid), 1e-13);
    // restart from the first checkpoint reproduces the final state bit for bit
    let restart_ok = match saved.first() {
        Some(buf) => {
            let (_, st) = read_checkpoint(&mut buf.as_slice())?;
            let again = model.run(st, &opts, |_| Ok(()))?;
            again.state == out.state
        }
        None => false,
    };
    rep.flag("conservation", "checkpoint restart bit-identical".into(), restart_ok);
    Ok(())
}

fn check_fit(rep: &mut VerifyReport) -> Result<()> {
    let t: Vec<f64> = (0..200).map(|i| 1.0 + 99.0 * i as f64 / 199.0).collect();
    let y: Vec<f64> = t.iter().map(|t| 5.0 * (1.0 + t).powf(-0.5)).collect();
    let f = crate::decay::fit_exponent(&t, &y, (1.0, 100.0))?;
    rep.record("decay", "synthetic power law exponent".into(), (f.p + 0.5).abs(), 1e-9);
    Ok(())
}

/// Run every group; errors inside a group become failed checks.
pub fn run_all() -> VerifyReport {
    let mut rep = VerifyReport::default();
    let groups: [(&str, fn(&mut VerifyReport) -> Result<()>); 4] =
        [("basis", check_basis), ("modes", check_modes), ("dynamics", check_dynamics), ("decay", check_fit)];
    for (name, f) in groups {
        if let Err(e) = f(&mut rep) {
            rep.flag(name, format!("group aborted: {e}"), false);
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_oracle_moments() {
        // ∫_B (1-r²)^k / Z = 1 and ∫ r² ψ∞ = 1/(k+2) in two dimensions
        for k in [0.5, 1.0, 3.0] {
            let z = std::f64::consts::PI / (k + 1.0);
            let o = DiskOracle::new(k, 1.0 / z, 16);
            assert!((o.integrate(|_| 1.0) - 1.0).abs() < 1e-13);
            assert!((o.integrate(|p| p[0] * p[0] + p[1] * p[1]) - 1.0 / (k + 2.0)).abs() < 1e-13);
        }
        // singular weight (1-r²)^{-1/2}: ∫ = 2π
        let o = DiskOracle::new(-0.5, 1.0, 8);
        assert!((o.integrate(|_| 1.0) - std::f64::consts::TAU).abs() < 1e-12);
    }

    #[test]
    fn suite_passes() {
        let rep = run_all();
        for l in rep.lines() {
            println!("{l}");
        }
        assert!(rep.all_pass());
    }
}
