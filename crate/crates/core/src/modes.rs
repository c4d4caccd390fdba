//! Linearized single-wavenumber dynamics of the coupled system.
//!
//! On the constrained subspace (`ξ·û = 0`, `ĝ_0 = 0`) the substitution
//! `û = i V v`, with `V` an orthonormal basis of `ξ⊥`, turns the operator into
//! a real matrix
//!
//! ```text
//! v' = -|ξ|² v + B ĝ,        B_{cj} = Σ_ab V_ac ξ_b T_ab[j]
//! ĝ' = -K ĝ - C v,           C_{jc} = Σ_ab S_ab[j] ξ_b V_ac
//! ```
//!
//! and the stress/source cancellation is the statement `C = Bᵀ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ball::BallBasis;
use crate::error::{FeneError, Result};

/// Relative tolerance of the coupling pairing identity.
pub const PAIRING_TOL: f64 = 1e-12;
/// Dissipation identity residual allowed per unit time, relative to the initial energy.
pub const IDENTITY_TOL: f64 = 1e-8;

const GRAM_NODES: usize = 12;
/// Iteration cap for the real Schur decomposition.
const SCHUR_MAX_ITER: usize = 10_000;
const SCHUR_EPS: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct ModeSystem {
    xi: Vec<f64>,
    xi2: f64,
    /// `d x (d-1)`, orthonormal columns spanning `ξ⊥`.
    tangent: DMatrix<f64>,
    k_block: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    coupled: bool,
}

/// Orthonormal basis of the complement of `xi` by Gram–Schmidt on the axes.
fn complement_basis(xi: &[f64]) -> DMatrix<f64> {
    let d = xi.len();
    let n = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut vecs: Vec<DVector<f64>> = vec![DVector::from_iterator(d, xi.iter().map(|v| v / n))];
    // try axes in order of smallest overlap with xi
    let mut axes: Vec<usize> = (0..d).collect();
    axes.sort_by(|&a, &b| xi[a].abs().total_cmp(&xi[b].abs()));
    for a in axes {
        if vecs.len() == d {
            break;
        }
        let mut e = DVector::zeros(d);
        e[a] = 1.0;
        for _ in 0..2 {
            for v in &vecs {
                let p = v.dot(&e);
                e -= v * p;
            }
        }
        let en = e.norm();
        if en > 1e-8 {
            vecs.push(e / en);
        }
    }
    DMatrix::from_columns(&vecs[1..])
}

impl ModeSystem {
    pub fn assemble(xi: &[f64], basis: &BallBasis) -> Result<Self> {
        let d = basis.dim();
        if xi.len() != d {
            return Err(FeneError::DimensionMismatch { expected: d, got: xi.len() });
        }
        let xi2: f64 = xi.iter().map(|v| v * v).sum();
        if !(xi2 > 0.0) || !xi2.is_finite() {
            return Err(FeneError::InvalidParameter(
                "wavevector must be nonzero: the mean mode carries no pressure projection".into(),
            ));
        }
        let m = basis.len();
        if m < 2 {
            return Err(FeneError::Discretization("basis has no mean-zero directions".into()));
        }
        let tangent = complement_basis(xi);
        let nt = d - 1;
        let mut b = DMatrix::zeros(nt, m - 1);
        let mut c = DMatrix::zeros(m - 1, nt);
        for a in 0..d {
            for bb in 0..d {
                let t = basis.stress_vector(a, bb);
                let s = basis.source_vector(a, bb);
                for col in 0..nt {
                    let w = tangent[(a, col)] * xi[bb];
                    if w == 0.0 {
                        continue;
                    }
                    for j in 1..m {
                        b[(col, j - 1)] += w * t[j];
                        c[(j - 1, col)] += w * s[j];
                    }
                }
            }
        }
        let k_block = basis.stiffness().view((1, 1), (m - 1, m - 1)).into_owned();
        Ok(Self { xi: xi.to_vec(), xi2, tangent, k_block, b, c, coupled: true })
    }

    /// Same system with both coupling blocks removed.
    pub fn decoupled(mut self) -> Self {
        self.coupled = false;
        self
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn xi_norm(&self) -> f64 {
        self.xi2.sqrt()
    }

    pub fn dim_u(&self) -> usize {
        self.tangent.ncols()
    }

    pub fn dim_g(&self) -> usize {
        self.k_block.nrows()
    }

    /// `max|C - Bᵀ| / (max|B| + max|C|)`: zero when stress work and source work cancel.
    pub fn pairing_residual(&self) -> f64 {
        let diff = (&self.c - self.b.transpose()).amax();
        let scale = self.b.amax() + self.c.amax();
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }

    /// Real generator in `(v, ĝ_1..)` coordinates.
    pub fn real_matrix(&self) -> DMatrix<f64> {
        let (nu, ng) = (self.dim_u(), self.dim_g());
        let mut a = DMatrix::zeros(nu + ng, nu + ng);
        for i in 0..nu {
            a[(i, i)] = -self.xi2;
        }
        a.view_mut((nu, nu), (ng, ng)).copy_from(&(-&self.k_block));
        if self.coupled {
            a.view_mut((0, nu), (nu, ng)).copy_from(&self.b);
            a.view_mut((nu, 0), (ng, nu)).copy_from(&(-&self.c));
        }
        a
    }

    /// Dissipation form: `|ξ|² I ⊕ K`.
    fn dissipation(&self) -> DMatrix<f64> {
        let (nu, ng) = (self.dim_u(), self.dim_g());
        let mut dm = DMatrix::zeros(nu + ng, nu + ng);
        for i in 0..nu {
            dm[(i, i)] = self.xi2;
        }
        dm.view_mut((nu, nu), (ng, ng)).copy_from(&self.k_block);
        dm
    }

    /// Time derivative in the original complex coordinates: `(dû, dĝ)` with `dĝ_0 = 0`.
    pub fn apply(&self, u: &[Complex64], g: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let d = self.xi.len();
        let i = Complex64::new(0.0, 1.0);
        let (v, gr) = self.to_reduced(u, g);
        let a = self.real_matrix();
        let av = a.map(|x| Complex64::new(x, 0.0)) * DVector::from_iterator(v.len() + gr.len(), v.iter().chain(&gr).copied());
        let nu = self.dim_u();
        let du: Vec<Complex64> = (0..d)
            .map(|row| i * (0..nu).map(|c| self.tangent[(row, c)] * av[c]).sum::<Complex64>())
            .collect();
        let mut dg = vec![Complex64::new(0.0, 0.0)];
        dg.extend(av.iter().skip(nu));
        (du, dg)
    }

    /// `û -> v = -i Vᵀ û`, `ĝ -> ĝ_1..`.
    fn to_reduced(&self, u: &[Complex64], g: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let i = Complex64::new(0.0, 1.0);
        let v = (0..self.dim_u())
            .map(|c| -i * u.iter().enumerate().map(|(a, ua)| self.tangent[(a, c)] * ua).sum::<Complex64>())
            .collect();
        (v, g[1..].to_vec())
    }

    /// Largest real part of the constrained spectrum.
    pub fn spectral_abscissa(&self) -> Result<f64> {
        // an orthogonal change of basis breaks the exact symmetries of the
        // isotropic system that can stall the shifted QR iteration
        let a = self.real_matrix();
        let n = a.nrows();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
        let q = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal)).qr().q();
        let eig = nalgebra::Schur::try_new(q.transpose() * a * q, SCHUR_EPS, SCHUR_MAX_ITER)
            .ok_or_else(|| FeneError::Eigen("Schur iteration did not converge".into()))?
            .complex_eigenvalues();
        let mut best = f64::NEG_INFINITY;
        for z in eig.iter() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(FeneError::Eigen("non-finite eigenvalue".into()));
            }
            best = best.max(z.re);
        }
        Ok(best)
    }

    /// Integrate from `(û₀, ĝ₀)` with the exact propagator and check
    /// `½ d/dt(|û|² + |ĝ|²) = -|ξ|²|û|² - ĝᴴ K ĝ` step by step.
    pub fn lyapunov_check(
        &self,
        u0: &[Complex64],
        g0: &[Complex64],
        t_end: f64,
        dt: f64,
    ) -> Result<LyapunovReport> {
        let d = self.xi.len();
        let m = self.dim_g() + 1;
        if u0.len() != d || g0.len() != m {
            return Err(FeneError::DimensionMismatch { expected: d + m, got: u0.len() + g0.len() });
        }
        if !(dt > 0.0) || !(t_end >= dt) {
            return Err(FeneError::InvalidParameter(format!("need 0 < dt <= t_end, got {dt}, {t_end}")));
        }
        let unorm: f64 = u0.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let div: Complex64 = u0.iter().zip(&self.xi).map(|(u, x)| u * x).sum();
        if div.norm() > 1e-12 * (unorm * self.xi_norm()).max(f64::MIN_POSITIVE) || g0[0].norm() > 1e-12 {
            return Err(FeneError::InvalidParameter("initial data violates ξ·û = 0 or ĝ_0 = 0".into()));
        }
        let (v, gr) = self.to_reduced(u0, g0);
        let n = v.len() + gr.len();
        let y0: Vec<Complex64> = v.into_iter().chain(gr).collect();
        let mut re = DVector::from_iterator(n, y0.iter().map(|z| z.re));
        let mut im = DVector::from_iterator(n, y0.iter().map(|z| z.im));

        let a = self.real_matrix();
        let dm = self.dissipation();
        // ∫_0^dt e^{Aᵀs} D e^{As} ds by Gauss–Legendre on sub-intervals short
        // enough that every propagator involved is contracting and resolved
        let nsub = (a.norm() * dt).ceil().max(1.0) as usize;
        let h = dt / nsub as f64;
        let (nodes, weights) = crate::ball::quadrature::gauss_legendre(GRAM_NODES)?;
        let mut sub_gram = DMatrix::zeros(n, n);
        for (x, w) in nodes.iter().zip(&weights) {
            let e = (&a * (0.5 * h * (x + 1.0))).exp();
            sub_gram += e.transpose() * &dm * &e * (0.5 * h * w);
        }
        let sub_prop = (&a * h).exp();
        let mut prop = DMatrix::identity(n, n);
        let mut gram = DMatrix::zeros(n, n);
        for _ in 0..nsub {
            gram += prop.transpose() * &sub_gram * &prop;
            prop = &sub_prop * prop;
        }

        let energy = |re: &DVector<f64>, im: &DVector<f64>| re.norm_squared() + im.norm_squared();
        let e0 = energy(&re, &im);
        let steps = (t_end / dt).round() as usize;
        let mut energies = Vec::with_capacity(steps + 1);
        energies.push(e0);
        let mut max_resid: f64 = 0.0;
        for _ in 0..steps {
            let diss = re.dot(&(&gram * &re)) + im.dot(&(&gram * &im));
            re = &prop * re;
            im = &prop * im;
            let e1 = energy(&re, &im);
            let e_prev = *energies.last().unwrap();
            let resid = (0.5 * (e1 - e_prev) + diss).abs() / dt;
            max_resid = max_resid.max(if e0 > 0.0 { resid / e0 } else { resid });
            energies.push(e1);
        }
        let monotone = energies.windows(2).all(|w| w[1] <= w[0]);
        let report = LyapunovReport { dt, energies, max_identity_resid: max_resid, monotone };
        if max_resid > IDENTITY_TOL {
            return Err(FeneError::Mechanism(format!(
                "dissipation identity residual {max_resid:e} per unit time exceeds {IDENTITY_TOL:e}"
            )));
        }
        Ok(report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub dt: f64,
    /// `|û|² + |ĝ|²` at every step, starting at `t = 0`.
    pub energies: Vec<f64>,
    /// Largest identity residual per unit time relative to the initial energy.
    pub max_identity_resid: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEntry {
    pub xi: Vec<f64>,
    pub xi_norm: f64,
    pub abscissa: f64,
    /// Time for the slowest mode energy to halve, `ln 2 / (2 |abscissa|)`.
    pub half_life: f64,
    pub pairing_residual: f64,
    pub identity_residual: f64,
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModesReport {
    pub k: f64,
    pub d: usize,
    pub degree_max: usize,
    pub entries: Vec<ModeEntry>,
}

/// Deterministic constrained data for one trial: `û ⊥ ξ`, `ĝ_0 = 0`, unit energy.
pub fn random_constrained(sys: &ModeSystem, rng: &mut impl rand::Rng) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut z = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    let d = sys.xi.len();
    let coeffs: Vec<Complex64> = (0..sys.dim_u()).map(|_| z()).collect();
    let mut u: Vec<Complex64> =
        (0..d).map(|a| (0..sys.dim_u()).map(|c| sys.tangent[(a, c)] * coeffs[c]).sum()).collect();
    let mut g: Vec<Complex64> = std::iter::once(Complex64::new(0.0, 0.0)).chain((0..sys.dim_g()).map(|_| z())).collect();
    let e: f64 = u.iter().chain(&g).map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    u.iter_mut().chain(g.iter_mut()).for_each(|v| *v /= e);
    (u, g)
}

/// Sweep `ξ` values: abscissa, pairing and identity residuals over `trials` random starts.
pub fn sweep(
    basis: &BallBasis,
    xis: &[Vec<f64>],
    trials: usize,
    seed: u64,
    t_end: f64,
    dt: f64,
) -> Result<ModesReport> {
    use rayon::prelude::*;
    let entries = xis
        .par_iter()
        .enumerate()
        .map(|(n, xi)| {
            let sys = ModeSystem::assemble(xi, basis)?;
            let abscissa = sys.spectral_abscissa()?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(n as u64));
            let mut identity_residual: f64 = 0.0;
            let mut monotone = true;
            for _ in 0..trials {
                let (u, g) = random_constrained(&sys, &mut rng);
                let rep = sys.lyapunov_check(&u, &g, t_end, dt)?;
                identity_residual = identity_residual.max(rep.max_identity_resid);
                monotone &= rep.monotone;
            }
            Ok(ModeEntry {
                xi: xi.clone(),
                xi_norm: sys.xi_norm(),
                abscissa,
                half_life: std::f64::consts::LN_2 / (2.0 * abscissa.abs()),
                pairing_residual: sys.pairing_residual(),
                identity_residual,
                monotone,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModesReport { k: basis.params().k, d: basis.dim(), degree_max: basis.degree_max(), entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FeneParams;
    use rand::SeedableRng;

    fn basis(k: f64, d: usize, n: usize) -> BallBasis {
        BallBasis::build(FeneParams::ball(k, d).unwrap(), n, n + 4).unwrap()
    }

    #[test]
    fn zero_wavevector_rejected() {
        assert!(ModeSystem::assemble(&[0.0, 0.0], &basis(2.0, 2, 4)).is_err());
        assert!(ModeSystem::assemble(&[1.0], &basis(2.0, 2, 4)).is_err());
    }

    #[test]
    fn pairing_holds_in_two_and_three_dimensions() {
        let s2 = ModeSystem::assemble(&[0.6, -0.8], &basis(2.0, 2, 6)).unwrap();
        assert!(s2.pairing_residual() < PAIRING_TOL);
        let s3 = ModeSystem::assemble(&[0.3, -0.5, 0.2], &basis(1.5, 3, 4)).unwrap();
        assert_eq!(s3.dim_u(), 2);
        assert!(s3.pairing_residual() < PAIRING_TOL);
    }

    #[test]
    fn tangent_basis_is_orthonormal_complement() {
        for xi in [vec![1.0, 0.0, 0.0], vec![0.2, 0.3, -0.9], vec![0.0, 0.0, 2.0]] {
            let v = complement_basis(&xi);
            let gram = v.transpose() * &v;
            assert!((gram - DMatrix::identity(2, 2)).amax() < 1e-15);
            for c in 0..2 {
                assert!((0..3).map(|a| v[(a, c)] * xi[a]).sum::<f64>().abs() < 1e-15);
            }
        }
    }

    #[test]
    fn decoupled_abscissa() {
        let b = basis(2.0, 2, 6);
        let lambda1 = b.poincare_constant().unwrap().lambda1;
        for r in [0.5, 1.0, 4.0] {
            let sys = ModeSystem::assemble(&[r, 0.0], &b).unwrap().decoupled();
            let want = (-r * r).max(-lambda1);
            assert!((sys.spectral_abscissa().unwrap() - want).abs() < 1e-10 * want.abs());
        }
    }

    #[test]
    fn heat_decay_without_configuration() {
        let sys = ModeSystem::assemble(&[0.0, 1.0], &basis(2.0, 2, 4)).unwrap().decoupled();
        let u = [Complex64::new(0.3, -0.4), Complex64::new(0.0, 0.0)];
        let g = vec![Complex64::new(0.0, 0.0); sys.dim_g() + 1];
        let rep = sys.lyapunov_check(&u, &g, 2.0, 0.25).unwrap();
        for (n, e) in rep.energies.iter().enumerate() {
            let want = 0.25 * (-2.0 * 0.25 * n as f64).exp();
            assert!((e - want).abs() < 1e-14, "{n}: {e} vs {want}");
        }
    }

    #[test]
    fn apply_matches_real_form_and_conserves_constraints() {
        let sys = ModeSystem::assemble(&[0.5, 0.5], &basis(2.0, 2, 4)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let (u, g) = random_constrained(&sys, &mut rng);
        let (du, dg) = sys.apply(&u, &g);
        assert_eq!(dg[0], Complex64::new(0.0, 0.0));
        let div: Complex64 = du.iter().zip(sys.xi()).map(|(a, b)| a * b).sum();
        assert!(div.norm() < 1e-14);
        // energy rate equals minus the dissipation
        let rate: f64 = u.iter().zip(&du).chain(g.iter().zip(&dg)).map(|(a, b)| (a.conj() * b).re).sum();
        let kg = sys.k_block.map(|x| Complex64::new(x, 0.0)) * DVector::from_column_slice(&g[1..]);
        let diss = sys.xi2 * u.iter().map(|v| v.norm_sqr()).sum::<f64>()
            + g[1..].iter().zip(kg.iter()).map(|(a, b)| (a.conj() * b).re).sum::<f64>();
        assert!((rate + diss).abs() < 1e-13 * diss);
    }

    #[test]
    fn lyapunov_identity_and_decay() {
        let sys = ModeSystem::assemble(&[1.0, 0.0], &basis(2.0, 2, 6)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let (u, g) = random_constrained(&sys, &mut rng);
            let rep = sys.lyapunov_check(&u, &g, 3.0, 0.05).unwrap();
            assert!(rep.monotone);
            assert!(rep.energies.windows(2).all(|w| w[1] < w[0]));
            assert!(rep.max_identity_resid < IDENTITY_TOL);
        }
    }

    #[test]
    fn unconstrained_data_rejected() {
        let sys = ModeSystem::assemble(&[1.0, 0.0], &basis(2.0, 2, 4)).unwrap();
        let mut g = vec![Complex64::new(0.0, 0.0); sys.dim_g() + 1];
        let u = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(sys.lyapunov_check(&u, &g, 1.0, 0.1).is_err());
        g[0] = Complex64::new(0.1, 0.0);
        assert!(sys.lyapunov_check(&[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], &g, 1.0, 0.1).is_err());
    }
}
