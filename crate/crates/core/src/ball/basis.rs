//! Orthonormal polynomial basis of the ψ∞-weighted space on the unit ball,
//! together with the assembled Fokker–Planck, drag, source and stress
//! operators acting on `g = ψ̃ / ψ∞`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::coeffs::ConfigCoeffs;
use super::quadrature::{ball_weight_integral, BallRule};
use crate::error::{FeneError, Result};
use crate::params::FeneParams;

pub const DEFAULT_GRAM_TOL: f64 = 1e-12;

/// Largest trace of a velocity gradient accepted by [`BallBasis::source_coeffs`].
pub const TRACE_TOL: f64 = 1e-12;

/// Smallest admissible spectral gap; anything below means the constant mode
/// leaked into the mean-zero block.
pub const GAP_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedNorms {
    pub l2: f64,
    pub h1dot: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poincare {
    pub lambda1: f64,
    pub c_poincare: f64,
}

/// Polynomials of total degree `<= degree_max` on `B(0,1) ⊂ R^d`,
/// orthonormal under `<g, h> = ∫_B ψ∞ g h dR`.
///
/// Immutable after construction; every operator application is a pure
/// function of its inputs.
#[derive(Debug, Clone)]
pub struct BallBasis {
    pub(crate) params: FeneParams,
    pub(crate) degree_max: usize,
    pub(crate) quad_order: usize,
    pub(crate) gram_tol: f64,
    pub(crate) exponents: Vec<[usize; 3]>,
    /// Generator-to-basis map: `φ_j = Σ_i P_i C[i, j]`, upper triangular.
    pub(crate) coeffs: DMatrix<f64>,
    pub(crate) rule: BallRule,
    pub(crate) stress_rule: BallRule,
    pub(crate) stiffness: DMatrix<f64>,
    /// `drag[a*d + b][(j, i)] = ∫ ψ∞ φ_i R_b ∂_a φ_j dR`.
    pub(crate) drag: Vec<DMatrix<f64>>,
    pub(crate) source: Vec<Vec<f64>>,
    pub(crate) stress: Vec<Vec<f64>>,
}

/// Total-degree graded multi-indices, highest first-axis power first within a degree.
pub(crate) fn graded_exponents(d: usize, degree_max: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for n in 0..=degree_max {
        match d {
            2 => {
                for a in (0..=n).rev() {
                    out.push([a, n - a, 0]);
                }
            }
            _ => {
                for a in (0..=n).rev() {
                    for b in (0..=n - a).rev() {
                        out.push([a, b, n - a - b]);
                    }
                }
            }
        }
    }
    out
}

fn chebyshev_table(x: f64, nmax: usize, vals: &mut [f64], ders: &mut [f64]) {
    // T_n and T_n' = n U_{n-1}
    let mut u_prev = 0.0;
    let mut u_cur = 1.0;
    vals[0] = 1.0;
    ders[0] = 0.0;
    if nmax == 0 {
        return;
    }
    vals[1] = x;
    for n in 1..=nmax {
        if n >= 2 {
            vals[n] = 2.0 * x * vals[n - 1] - vals[n - 2];
        }
        ders[n] = n as f64 * u_cur;
        let u_next = 2.0 * x * u_cur - u_prev;
        u_prev = u_cur;
        u_cur = u_next;
    }
}

/// Gegenbauer `C_n^λ(t)` for `n <= nmax` and their derivatives.
fn gegenbauer_table(t: f64, lambda: f64, nmax: usize, vals: &mut [f64], ders: &mut [f64]) {
    vals[0] = 1.0;
    ders[0] = 0.0;
    if nmax == 0 {
        return;
    }
    vals[1] = 2.0 * lambda * t;
    ders[1] = 2.0 * lambda;
    for n in 2..=nmax {
        let nf = n as f64;
        let a = 2.0 * (nf + lambda - 1.0);
        let b = nf + 2.0 * lambda - 2.0;
        vals[n] = (a * t * vals[n - 1] - b * vals[n - 2]) / nf;
        ders[n] = (a * (vals[n - 1] + t * ders[n - 1]) - b * ders[n - 2]) / nf;
    }
}

/// Disk polynomials orthogonal under `(1 - x² - y²)^k`:
/// `P_{a,b} = C_a^{(b+k+1)}(x) · (1-x²)^{b/2} C_b^{(k+1/2)}(y / sqrt(1-x²))`,
/// the second factor expanded through its homogeneous recurrence.
fn disk_generators_at(
    exponents: &[[usize; 3]],
    degree_max: usize,
    k: f64,
    point: &[f64],
    vals: &mut [f64],
    grads: &mut [f64],
) {
    let (x, y) = (point[0], point[1]);
    let q = 1.0 - x * x;
    let lam = k + 0.5;
    let n1 = degree_max + 1;
    let mut h = vec![0.0; n1];
    let mut hx = vec![0.0; n1];
    let mut hy = vec![0.0; n1];
    h[0] = 1.0;
    if degree_max >= 1 {
        h[1] = 2.0 * lam * y;
        hy[1] = 2.0 * lam;
    }
    for j in 2..n1 {
        let jf = j as f64;
        let a = 2.0 * (jf + lam - 1.0);
        let b = jf + 2.0 * lam - 2.0;
        h[j] = (a * y * h[j - 1] - b * q * h[j - 2]) / jf;
        hx[j] = (a * y * hx[j - 1] - b * (q * hx[j - 2] - 2.0 * x * h[j - 2])) / jf;
        hy[j] = (a * (h[j - 1] + y * hy[j - 1]) - b * q * hy[j - 2]) / jf;
    }
    // outer tables, one per inner degree
    let mut cv = vec![0.0; n1 * n1];
    let mut cd = vec![0.0; n1 * n1];
    for j in 0..n1 {
        let top = degree_max - j;
        gegenbauer_table(x, j as f64 + k + 1.0, top, &mut cv[j * n1..j * n1 + top + 1], &mut cd[j * n1..j * n1 + top + 1]);
    }
    for (i, e) in exponents.iter().enumerate() {
        let (a, b) = (e[0], e[1]);
        let (c, dc) = (cv[b * n1 + a], cd[b * n1 + a]);
        vals[i] = c * h[b];
        grads[2 * i] = dc * h[b] + c * hx[b];
        grads[2 * i + 1] = c * hy[b];
    }
}

/// Generator values `P_i(R)` and gradients, row-major `m x d`: orthogonal disk
/// polynomials in two dimensions, Chebyshev products otherwise.
pub(crate) fn generators_at(
    exponents: &[[usize; 3]],
    d: usize,
    degree_max: usize,
    k: f64,
    point: &[f64],
    vals: &mut [f64],
    grads: &mut [f64],
) {
    if d == 2 {
        disk_generators_at(exponents, degree_max, k, point, vals, grads);
        return;
    }
    let stride = degree_max + 1;
    let mut tv = vec![0.0; 3 * stride];
    let mut td = vec![0.0; 3 * stride];
    for a in 0..d {
        chebyshev_table(
            point[a],
            degree_max,
            &mut tv[a * stride..(a + 1) * stride],
            &mut td[a * stride..(a + 1) * stride],
        );
    }
    for (i, e) in exponents.iter().enumerate() {
        let mut v = 1.0;
        for a in 0..d {
            v *= tv[a * stride + e[a]];
        }
        vals[i] = v;
        for a in 0..d {
            let mut g = td[a * stride + e[a]];
            for b in 0..d {
                if b != a {
                    g *= tv[b * stride + e[b]];
                }
            }
            grads[i * d + a] = g;
        }
    }
}

fn invert_upper_with_positive_diag(r: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let m = r.nrows();
    let mut c = r.clone().solve_upper_triangular(&DMatrix::identity(m, m))?;
    for j in 0..m {
        if !c[(j, j)].is_finite() {
            return None;
        }
        if c[(j, j)] < 0.0 {
            c.column_mut(j).neg_mut();
        }
    }
    if c.iter().all(|v| v.is_finite()) {
        Some(c)
    } else {
        None
    }
}

impl BallBasis {
    pub fn build(params: FeneParams, degree_max: usize, quad_order: usize) -> Result<Self> {
        Self::build_with_tol(params, degree_max, quad_order, DEFAULT_GRAM_TOL)
    }

    pub fn build_with_tol(
        params: FeneParams,
        degree_max: usize,
        quad_order: usize,
        gram_tol: f64,
    ) -> Result<Self> {
        params.validate()?;
        if quad_order < degree_max + 2 {
            return Err(FeneError::InvalidParameter(format!(
                "quad_order {quad_order} must be >= degree_max + 2 = {}",
                degree_max + 2
            )));
        }
        if params.near_boundary_singular() {
            log::warn!(
                "k = {} <= 1: psi_inf |grad U|^2 is not integrable; stress bounds are discrete only",
                params.k
            );
        }
        let d = params.d;
        let k = params.k;
        let exponents = graded_exponents(d, degree_max);
        let m = exponents.len();
        let z = ball_weight_integral(d, k);
        let rule = BallRule::new(d, k, quad_order, 1.0 / z)?;
        let stress_rule = BallRule::new(d, k - 1.0, quad_order, 1.0 / z)?;

        let eval_all = |r: &BallRule| {
            let nq = r.len();
            let mut vals = DMatrix::<f64>::zeros(nq, m);
            let mut grads: Vec<DMatrix<f64>> = (0..d).map(|_| DMatrix::zeros(nq, m)).collect();
            let mut v = vec![0.0; m];
            let mut g = vec![0.0; m * d];
            for q in 0..nq {
                generators_at(&exponents, d, degree_max, k, r.point(q), &mut v, &mut g);
                for i in 0..m {
                    vals[(q, i)] = v[i];
                    for a in 0..d {
                        grads[a][(q, i)] = g[i * d + a];
                    }
                }
            }
            (vals, grads)
        };

        let (gen_vals, gen_grads) = eval_all(&rule);
        let sqrt_w: Vec<f64> = rule.weights.iter().map(|w| w.sqrt()).collect();
        let mut weighted = gen_vals.clone();
        for (q, sw) in sqrt_w.iter().enumerate() {
            weighted.row_mut(q).scale_mut(*sw);
        }

        // Two Householder passes: the second removes the loss of orthogonality
        // the first one incurs through cond(R).
        let ill = |dev: f64| FeneError::IllConditioned { deviation: dev, tol: gram_tol };
        let r1 = weighted.clone().qr().r();
        let c1 = invert_upper_with_positive_diag(&r1).ok_or_else(|| ill(f64::INFINITY))?;
        let w1 = &weighted * &c1;
        let r2 = w1.qr().r();
        let c2 = invert_upper_with_positive_diag(&r2).ok_or_else(|| ill(f64::INFINITY))?;
        let coeffs = &c1 * &c2;

        let phi_w = &weighted * &coeffs;
        let gram = phi_w.transpose() * &phi_w;
        let dev = (&gram - DMatrix::<f64>::identity(m, m)).amax();
        if !(dev <= gram_tol) {
            return Err(ill(dev));
        }

        let phi = &gen_vals * &coeffs;
        let dphi: Vec<DMatrix<f64>> = gen_grads.iter().map(|g| g * &coeffs).collect();

        let mut stiffness = DMatrix::<f64>::zeros(m, m);
        for da in &dphi {
            let mut scaled = da.clone();
            for (q, sw) in sqrt_w.iter().enumerate() {
                scaled.row_mut(q).scale_mut(*sw);
            }
            stiffness += scaled.transpose() * &scaled;
        }
        let stiffness_t = stiffness.transpose();
        stiffness = (stiffness + stiffness_t) * 0.5;
        for i in 0..m {
            stiffness[(0, i)] = 0.0;
            stiffness[(i, 0)] = 0.0;
        }

        let mut drag = Vec::with_capacity(d * d);
        for a in 0..d {
            for b in 0..d {
                let mut weighted_phi = phi.clone();
                for q in 0..rule.len() {
                    let s = rule.weights[q] * rule.point(q)[b];
                    weighted_phi.row_mut(q).scale_mut(s);
                }
                let mut mat = dphi[a].transpose() * weighted_phi;
                mat.row_mut(0).fill(0.0);
                drag.push(mat);
            }
        }

        let (sgen, _) = eval_all(&stress_rule);
        let phi_s = &sgen * &coeffs;
        let mut stress = vec![Vec::new(); d * d];
        for a in 0..d {
            for b in a..d {
                let t: Vec<f64> = (0..m)
                    .map(|j| {
                        (0..stress_rule.len())
                            .map(|q| {
                                let p = stress_rule.point(q);
                                stress_rule.weights[q] * p[a] * p[b] * phi_s[(q, j)]
                            })
                            .sum::<f64>()
                            * 2.0
                            * k
                    })
                    .collect();
                stress[a * d + b] = t.clone();
                stress[b * d + a] = t;
            }
        }

        // Source directions: the trace-free part of the stress vectors, with the
        // mass row pinned to zero so that no contraction can create mass.
        let mut source = stress.clone();
        let trace: Vec<f64> = (0..m).map(|j| (0..d).map(|c| stress[c * d + c][j]).sum()).collect();
        for a in 0..d {
            for j in 0..m {
                source[a * d + a][j] -= trace[j] / d as f64;
            }
        }
        for s in source.iter_mut() {
            s[0] = 0.0;
        }

        Ok(Self {
            params,
            degree_max,
            quad_order,
            gram_tol,
            exponents,
            coeffs,
            rule,
            stress_rule,
            stiffness,
            drag,
            source,
            stress,
        })
    }

    pub fn params(&self) -> &FeneParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.d
    }

    pub fn degree_max(&self) -> usize {
        self.degree_max
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    pub fn gram_tol(&self) -> f64 {
        self.gram_tol
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Total degree of the generator that introduced basis function `j`.
    pub fn degree_of(&self, j: usize) -> usize {
        let e = self.exponents[j];
        e[0] + e[1] + e[2]
    }

    /// Index range of basis functions of exactly total degree `n`.
    pub fn degree_range(&self, n: usize) -> std::ops::Range<usize> {
        let start = self.exponents.iter().position(|e| e[0] + e[1] + e[2] == n).unwrap_or(0);
        let end = self.exponents.iter().rposition(|e| e[0] + e[1] + e[2] == n).map_or(0, |i| i + 1);
        start..end
    }

    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn drag_matrix(&self, a: usize, b: usize) -> &DMatrix<f64> {
        &self.drag[a * self.dim() + b]
    }

    pub fn stress_vector(&self, a: usize, b: usize) -> &[f64] {
        &self.stress[a * self.dim() + b]
    }

    pub fn source_vector(&self, a: usize, b: usize) -> &[f64] {
        &self.source[a * self.dim() + b]
    }

    pub fn rule(&self) -> &BallRule {
        &self.rule
    }

    pub fn stress_rule(&self) -> &BallRule {
        &self.stress_rule
    }

    pub fn generator_coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    /// Basis values at `point` and their gradients (row-major `m x d`).
    pub fn eval(&self, point: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (m, d) = (self.len(), self.dim());
        let mut gv = vec![0.0; m];
        let mut gg = vec![0.0; m * d];
        generators_at(&self.exponents, d, self.degree_max, self.params.k, point, &mut gv, &mut gg);
        let mut vals = vec![0.0; m];
        let mut grads = vec![0.0; m * d];
        for j in 0..m {
            let mut v = 0.0;
            for i in 0..=j {
                let c = self.coeffs[(i, j)];
                v += gv[i] * c;
                for a in 0..d {
                    grads[j * d + a] += gg[i * d + a] * c;
                }
            }
            vals[j] = v;
        }
        (vals, grads)
    }

    /// Evaluates `g = Σ c_j φ_j` at a point.
    pub fn eval_function(&self, g: &ConfigCoeffs, point: &[f64]) -> f64 {
        let (vals, _) = self.eval(point);
        vals.iter().zip(g.as_slice()).map(|(v, c)| v * c).sum()
    }

    /// ψ∞-weighted projection of `f` onto the basis.
    pub fn project(&self, mut f: impl FnMut(&[f64]) -> f64) -> ConfigCoeffs {
        let m = self.len();
        let mut out = vec![0.0; m];
        for q in 0..self.rule.len() {
            let p = self.rule.point(q);
            let fw = f(p) * self.rule.weights[q];
            let (vals, _) = self.eval(p);
            for j in 0..m {
                out[j] += fw * vals[j];
            }
        }
        ConfigCoeffs::new(out)
    }

    /// `ψ∞(R) = (1 - |R|^2)^k / ∫_B (1 - |R|^2)^k dR`.
    pub fn psi_inf(&self, point: &[f64]) -> f64 {
        let r2: f64 = point.iter().map(|x| x * x).sum();
        (1.0 - r2).max(0.0).powf(self.params.k) / ball_weight_integral(self.dim(), self.params.k)
    }

    fn check(&self, g: &ConfigCoeffs) -> Result<()> {
        if g.len() != self.len() {
            return Err(FeneError::DimensionMismatch { expected: self.len(), got: g.len() });
        }
        Ok(())
    }

    fn check_kappa(&self, kappa: &DMatrix<f64>) -> Result<()> {
        let d = self.dim();
        if kappa.nrows() != d || kappa.ncols() != d {
            return Err(FeneError::DimensionMismatch { expected: d * d, got: kappa.len() });
        }
        Ok(())
    }

    /// Galerkin action of `L(ψ̃) = -div_R(ψ∞ ∇_R(ψ̃/ψ∞))` in `g`-coordinates, i.e. `K g`.
    pub fn apply_fokker_planck(&self, g: &ConfigCoeffs) -> Result<ConfigCoeffs> {
        self.check(g)?;
        let mut out = vec![0.0; self.len()];
        self.stiffness_apply(g.as_slice(), &mut out);
        Ok(ConfigCoeffs::new(out))
    }

    /// Drag `div_R(-κ R ψ̃)` tested against the basis:
    /// `Σ_ab κ_ab D[a,b] g`, with the mass row identically zero.
    pub fn apply_drag(&self, g: &ConfigCoeffs, kappa: &DMatrix<f64>) -> Result<ConfigCoeffs> {
        self.check(g)?;
        self.check_kappa(kappa)?;
        let d = self.dim();
        let flat: Vec<f64> = (0..d * d).map(|ab| kappa[(ab / d, ab % d)]).collect();
        let mut out = vec![0.0; self.len()];
        self.drag_apply(&flat, g.as_slice(), &mut out);
        Ok(ConfigCoeffs::new(out))
    }

    /// Projection of the forcing `κ : (R ⊗ ∇_R U)` onto the basis. Rejects `κ`
    /// whose trace exceeds [`TRACE_TOL`], which would inject mass.
    pub fn source_coeffs(&self, kappa: &DMatrix<f64>) -> Result<ConfigCoeffs> {
        self.check_kappa(kappa)?;
        let tr = kappa.trace();
        if tr.abs() > TRACE_TOL {
            return Err(FeneError::InvalidParameter(format!(
                "velocity gradient must be trace-free, trace = {tr:e}"
            )));
        }
        let d = self.dim();
        let flat: Vec<f64> = (0..d * d).map(|ab| kappa[(ab / d, ab % d)]).collect();
        let mut out = vec![0.0; self.len()];
        self.source_apply(&flat, &mut out);
        Ok(ConfigCoeffs::new(out))
    }

    /// Extra stress `τ_ij = ∫_B R_i ∂_j U ψ̃ dR`.
    pub fn stress(&self, g: &ConfigCoeffs) -> Result<DMatrix<f64>> {
        self.check(g)?;
        let d = self.dim();
        let mut flat = vec![0.0; d * d];
        self.stress_apply(g.as_slice(), &mut flat);
        Ok(DMatrix::from_row_slice(d, d, &flat))
    }

    pub fn weighted_norms(&self, g: &ConfigCoeffs) -> Result<WeightedNorms> {
        self.check(g)?;
        let mut kg = vec![0.0; self.len()];
        self.stiffness_apply(g.as_slice(), &mut kg);
        let quad: f64 = kg.iter().zip(g.as_slice()).map(|(a, b)| a * b).sum();
        Ok(WeightedNorms { l2: g.l2(), h1dot: quad.max(0.0).sqrt(), mass: g.mass() })
    }

    /// Smallest eigenvalue of `K` on the mean-zero block and its reciprocal.
    pub fn poincare_constant(&self) -> Result<Poincare> {
        let m = self.len();
        if m < 2 {
            return Err(FeneError::Discretization("mean-zero subspace is empty".into()));
        }
        let block = self.stiffness.view((1, 1), (m - 1, m - 1)).into_owned();
        let eig = SymmetricEigen::new(block);
        let lambda1 = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if !(lambda1 > GAP_FLOOR) {
            return Err(FeneError::Discretization(format!(
                "spectral gap {lambda1:e} <= {GAP_FLOOR:e}: kernel leaked into the mean-zero block"
            )));
        }
        Ok(Poincare { lambda1, c_poincare: 1.0 / lambda1 })
    }

    /// Discrete constant `C_k` with `|τ(g)|² <= C_k ‖g‖²` for mean-zero `g`.
    pub fn stress_bound_constant(&self) -> f64 {
        self.stress.iter().map(|t| t[1..].iter().map(|v| v * v).sum::<f64>()).sum()
    }

    // --- slice kernels used in the hot loops -----------------------------

    pub(crate) fn stiffness_apply(&self, g: &[f64], out: &mut [f64]) {
        let m = self.len();
        for (j, o) in out.iter_mut().enumerate().take(m) {
            let col = self.stiffness.column(j);
            *o = col.iter().zip(g).map(|(a, b)| a * b).sum();
        }
    }

    /// `out = Σ κ_ab D[a,b] g` with `kappa` row-major `d x d`.
    pub(crate) fn drag_apply(&self, kappa: &[f64], g: &[f64], out: &mut [f64]) {
        let m = self.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (ab, mat) in self.drag.iter().enumerate() {
            let kab = kappa[ab];
            if kab == 0.0 {
                continue;
            }
            for i in 0..m {
                let gi = g[i] * kab;
                if gi == 0.0 {
                    continue;
                }
                let col = mat.column(i);
                for j in 0..m {
                    out[j] += col[j] * gi;
                }
            }
        }
    }

    pub(crate) fn source_apply(&self, kappa: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (ab, s) in self.source.iter().enumerate() {
            let kab = kappa[ab];
            if kab == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(s) {
                *o += kab * v;
            }
        }
    }

    pub(crate) fn stress_apply(&self, g: &[f64], out: &mut [f64]) {
        for (ab, t) in self.stress.iter().enumerate() {
            out[ab] = t.iter().zip(g).map(|(a, b)| a * b).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn basis(k: f64, n: usize) -> BallBasis {
        BallBasis::build(FeneParams::ball(k, 2).unwrap(), n, n + 4).unwrap()
    }

    #[test]
    fn degree_zero_is_unit_constant() {
        let b = BallBasis::build(FeneParams::ball(2.0, 2).unwrap(), 0, 2).unwrap();
        assert_eq!(b.len(), 1);
        let (v, g) = b.eval(&[0.3, -0.2]);
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-14);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = FeneParams { k: -1.0, d: 2, box_length: 1.0 };
        assert!(matches!(BallBasis::build(p, 4, 8), Err(FeneError::InvalidParameter(_))));
        let p = FeneParams::ball(2.0, 2).unwrap();
        assert!(BallBasis::build(p, 6, 7).is_err());
    }

    #[test]
    fn sizes_and_degrees() {
        let b = basis(2.0, 6);
        assert_eq!(b.len(), 28);
        assert_eq!(b.degree_range(2), 3..6);
        let b3 = BallBasis::build(FeneParams::ball(2.0, 3).unwrap(), 4, 6).unwrap();
        assert_eq!(b3.len(), 35);
        assert_eq!(b3.degree_range(1), 1..4);
    }

    #[test]
    fn stiffness_psd_single_kernel() {
        let b = basis(2.0, 6);
        let eig = SymmetricEigen::new(b.stiffness().clone());
        let zeros = eig.eigenvalues.iter().filter(|l| l.abs() < 1e-10).count();
        assert_eq!(zeros, 1);
        assert!(eig.eigenvalues.iter().all(|l| *l > -1e-12));
    }

    #[test]
    fn mass_rows_identically_zero() {
        let b = basis(2.0, 5);
        for i in 0..b.len() {
            assert_eq!(b.stiffness()[(0, i)], 0.0);
        }
        for a in 0..2 {
            for bb in 0..2 {
                assert!(b.drag_matrix(a, bb).row(0).iter().all(|v| *v == 0.0));
                assert_eq!(b.source_vector(a, bb)[0], 0.0);
            }
        }
    }

    #[test]
    fn constant_in_kernel() {
        let b = basis(2.0, 4);
        let out = b.apply_fokker_planck(&ConfigCoeffs::unit(b.len(), 0)).unwrap();
        assert!(out.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn closed_form_shear_stress() {
        for k in [0.5, 1.0, 2.0, 4.0] {
            let b = basis(k, 4);
            let c = 1.7;
            let g = b.project(|r| c * r[0] * r[1]);
            assert_eq!(g.mass().abs() < 1e-15, true);
            let tau = b.stress(&g).unwrap();
            let expected = c / (2.0 * (k + 2.0));
            assert_relative_eq!(tau[(0, 1)], expected, max_relative = 1e-10);
            assert_relative_eq!(tau[(1, 0)], expected, max_relative = 1e-10);
            assert!(tau[(0, 0)].abs() < 1e-14 && tau[(1, 1)].abs() < 1e-14);
        }
    }

    #[test]
    fn source_rejects_trace() {
        let b = basis(2.0, 4);
        let kappa = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(b.source_coeffs(&kappa).is_err());
        let zero = b.source_coeffs(&DMatrix::zeros(2, 2)).unwrap();
        assert!(zero.as_slice().iter().all(|v| *v == 0.0));
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(b.source_coeffs(&rot).unwrap().l2() < 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let b = basis(2.0, 3);
        assert!(matches!(
            b.apply_fokker_planck(&ConfigCoeffs::zeros(3)),
            Err(FeneError::DimensionMismatch { .. })
        ));
        assert!(b.apply_drag(&ConfigCoeffs::zeros(b.len()), &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn poincare_positive_and_monotone() {
        let l: Vec<f64> = [4, 6, 8, 10]
            .iter()
            .map(|n| basis(2.0, *n).poincare_constant().unwrap().lambda1)
            .collect();
        for w in l.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{l:?}");
        }
    }
}
