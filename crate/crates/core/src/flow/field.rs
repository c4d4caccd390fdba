use num_complex::Complex64;

use super::grid::FlowGrid;
use crate::error::{FeneError, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Divergence-free spectral velocity on the periodic box.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub(crate) comps: [Vec<Complex64>; 2],
}

impl VelocityField {
    pub fn zeros(grid: &FlowGrid) -> Self {
        Self { comps: [vec![ZERO; grid.len()], vec![ZERO; grid.len()]] }
    }

    /// Wraps coefficients without projecting; callers guarantee the invariants.
    pub fn from_spectral_unchecked(comps: [Vec<Complex64>; 2]) -> Self {
        Self { comps }
    }

    pub fn component(&self, a: usize) -> &[Complex64] {
        &self.comps[a]
    }

    pub fn components(&self) -> &[Vec<Complex64>; 2] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<Complex64>; 2] {
        self.comps
    }

    /// `max |ξ·û| / max |ξ||û|`; zero for an exactly solenoidal field.
    pub fn divergence_residual(&self, grid: &FlowGrid) -> f64 {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for idx in 0..grid.len() {
            let (kx, ky) = grid.xi(idx);
            let (a, b) = (self.comps[0][idx], self.comps[1][idx]);
            num = num.max((a * kx + b * ky).norm());
            den = den.max(grid.xi2(idx).sqrt() * (a.norm_sqr() + b.norm_sqr()).sqrt());
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// `max |û(-ξ) - conj(û(ξ))|` relative to the largest coefficient.
    pub fn hermitian_residual(&self, grid: &FlowGrid) -> f64 {
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for c in &self.comps {
            for idx in 0..grid.len() {
                num = num.max((c[grid.conjugate_index(idx)] - c[idx].conj()).norm());
                den = den.max(c[idx].norm());
            }
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    pub fn to_physical(&self, grid: &FlowGrid) -> [Vec<f64>; 2] {
        let mut ux = vec![0.0; grid.len()];
        let mut uy = vec![0.0; grid.len()];
        grid.to_physical_pair(&self.comps[0], &self.comps[1], &mut ux, &mut uy);
        [ux, uy]
    }

    /// Velocity gradient `κ_ab = ∂_b u_a` in physical space, index `a * 2 + b`.
    pub fn gradient_physical(&self, grid: &FlowGrid) -> [Vec<f64>; 4] {
        let mut spec: [Vec<Complex64>; 4] = std::array::from_fn(|_| vec![ZERO; grid.len()]);
        for idx in 0..grid.len() {
            let (kx, ky) = grid.xi(idx);
            for a in 0..2 {
                let u = self.comps[a][idx];
                spec[2 * a][idx] = I * kx * u;
                spec[2 * a + 1][idx] = I * ky * u;
            }
        }
        let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; grid.len()]);
        let (lo, hi) = out.split_at_mut(2);
        let (o0, o1) = lo.split_at_mut(1);
        let (o2, o3) = hi.split_at_mut(1);
        grid.to_physical_pair(&spec[0], &spec[1], &mut o0[0], &mut o1[0]);
        grid.to_physical_pair(&spec[2], &spec[3], &mut o2[0], &mut o3[0]);
        out
    }

    /// `‖u‖²_{L²}` over the box.
    pub fn energy(&self, grid: &FlowGrid) -> f64 {
        let l2 = grid.length() * grid.length();
        l2 * self.comps.iter().flat_map(|c| c.iter()).map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// `‖∇u‖²_{L²}` over the box.
    pub fn gradient_energy(&self, grid: &FlowGrid) -> f64 {
        let l2 = grid.length() * grid.length();
        let s: f64 = (0..grid.len())
            .map(|idx| grid.xi2(idx) * (self.comps[0][idx].norm_sqr() + self.comps[1][idx].norm_sqr()))
            .sum();
        l2 * s
    }

    pub fn scale(&mut self, s: f64) {
        for c in self.comps.iter_mut() {
            c.iter_mut().for_each(|v| *v *= s);
        }
    }
}

/// Leray projection `û - ξ (ξ·û)/|ξ|²`; the mean mode is removed.
pub fn leray_project(grid: &FlowGrid, raw: [Vec<Complex64>; 2]) -> VelocityField {
    let [mut a, mut b] = raw;
    leray_in_place(grid, &mut a, &mut b);
    VelocityField { comps: [a, b] }
}

pub(crate) fn leray_in_place(grid: &FlowGrid, a: &mut [Complex64], b: &mut [Complex64]) {
    for idx in 0..grid.len() {
        let k2 = grid.xi2(idx);
        if k2 == 0.0 {
            a[idx] = ZERO;
            b[idx] = ZERO;
            continue;
        }
        let (kx, ky) = grid.xi(idx);
        let p = (a[idx] * kx + b[idx] * ky) / k2;
        a[idx] -= p * kx;
        b[idx] -= p * ky;
    }
}

/// Dealiased transform of `(u·∇) f` for a scalar spectral field `f`.
pub fn advect(grid: &FlowGrid, u: &VelocityField, f: &[Complex64]) -> Vec<Complex64> {
    let [ux, uy] = u.to_physical(grid);
    let mut dfx = vec![ZERO; grid.len()];
    let mut dfy = vec![ZERO; grid.len()];
    for idx in 0..grid.len() {
        let (kx, ky) = grid.xi(idx);
        dfx[idx] = I * kx * f[idx];
        dfy[idx] = I * ky * f[idx];
    }
    let mut gx = vec![0.0; grid.len()];
    let mut gy = vec![0.0; grid.len()];
    grid.to_physical_pair(&dfx, &dfy, &mut gx, &mut gy);
    let prod: Vec<f64> = (0..grid.len()).map(|i| ux[i] * gx[i] + uy[i] * gy[i]).collect();
    let mut out = grid.to_spectral(&prod);
    grid.mask(&mut out);
    out
}

/// `∫_{S(t)} |û|² dξ` with `S(t) = {|ξ|² <= C_d / (1 + t)}`, normalized so that
/// the full lattice sum equals `‖u‖²_{L²}`.
pub fn low_freq_energy(grid: &FlowGrid, u: &VelocityField, t: f64, c_d: f64) -> f64 {
    let threshold = c_d / (1.0 + t);
    let l2 = grid.length() * grid.length();
    let s: f64 = (0..grid.len())
        .filter(|&idx| grid.xi2(idx) <= threshold)
        .map(|idx| u.comps[0][idx].norm_sqr() + u.comps[1][idx].norm_sqr())
        .sum();
    l2 * s
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowNorms {
    pub l2: f64,
    pub h1dot: f64,
    /// `(p, ‖u‖_{L^p})` in the requested order.
    pub lp: Vec<(f64, f64)>,
}

/// `L^p` norm of the velocity magnitude by collocation quadrature.
pub fn lp_norm(grid: &FlowGrid, phys: &[Vec<f64>; 2], p: f64) -> Result<f64> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(FeneError::Unsupported(format!("L^p norm requires finite p >= 2, got {p}")));
    }
    let s: f64 = phys[0]
        .iter()
        .zip(&phys[1])
        .map(|(a, b)| (a * a + b * b).powf(0.5 * p))
        .sum();
    Ok((s * grid.cell_area()).powf(1.0 / p))
}

pub fn norms(grid: &FlowGrid, u: &VelocityField, ps: &[f64]) -> Result<FlowNorms> {
    let phys = u.to_physical(grid);
    let lp = ps.iter().map(|&p| Ok((p, lp_norm(grid, &phys, p)?))).collect::<Result<_>>()?;
    Ok(FlowNorms { l2: u.energy(grid).sqrt(), h1dot: u.gradient_energy(grid).sqrt(), lp })
}

/// Symmetric stress `(τ11, τ12, τ22)` in physical and spectral form.
#[derive(Debug, Clone, PartialEq)]
pub struct StressField {
    pub phys: [Vec<f64>; 3],
    pub hat: [Vec<Complex64>; 3],
}

impl StressField {
    pub fn from_physical(grid: &FlowGrid, phys: [Vec<f64>; 3]) -> Self {
        let mut h0 = vec![ZERO; grid.len()];
        let mut h1 = vec![ZERO; grid.len()];
        grid.to_spectral_pair(&phys[0], &phys[1], &mut h0, &mut h1);
        let h2 = grid.to_spectral(&phys[2]);
        Self { phys, hat: [h0, h1, h2] }
    }

    /// Spectral `div τ`: `(iξ_x τ̂11 + iξ_y τ̂12, iξ_x τ̂12 + iξ_y τ̂22)`.
    pub fn divergence(&self, grid: &FlowGrid) -> [Vec<Complex64>; 2] {
        let mut a = vec![ZERO; grid.len()];
        let mut b = vec![ZERO; grid.len()];
        for idx in 0..grid.len() {
            let (kx, ky) = grid.xi(idx);
            a[idx] = I * (kx * self.hat[0][idx] + ky * self.hat[1][idx]);
            b[idx] = I * (kx * self.hat[1][idx] + ky * self.hat[2][idx]);
        }
        [a, b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    pub(crate) fn random_field(grid: &FlowGrid, seed: u64) -> [Vec<Complex64>; 2] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut phys = [vec![0.0; grid.len()], vec![0.0; grid.len()]];
        for c in phys.iter_mut() {
            c.iter_mut().for_each(|v| *v = rng.random::<f64>() - 0.5);
        }
        let mut a = grid.to_spectral(&phys[0]);
        let mut b = grid.to_spectral(&phys[1]);
        grid.mask(&mut a);
        grid.mask(&mut b);
        [a, b]
    }

    #[test]
    fn projection_formula() {
        let g = FlowGrid::new(16, 2.0 * PI).unwrap();
        let mut raw = [vec![ZERO; g.len()], vec![ZERO; g.len()]];
        raw[0][1] = Complex64::new(0.3, 0.1);
        raw[1][1] = Complex64::new(-0.7, 0.2);
        let u = leray_project(&g, raw);
        assert_eq!(u.comps[0][1], ZERO);
        assert_eq!(u.comps[1][1], Complex64::new(-0.7, 0.2));
    }

    #[test]
    fn projection_idempotent_and_solenoidal() {
        let g = FlowGrid::new(32, 5.0).unwrap();
        let u = leray_project(&g, random_field(&g, 1));
        assert!(u.divergence_residual(&g) < 1e-15);
        let again = leray_project(&g, u.comps.clone());
        for c in 0..2 {
            for (x, y) in again.comps[c].iter().zip(&u.comps[c]) {
                assert!((x - y).norm() <= 1e-16);
            }
        }
    }

    #[test]
    fn projection_self_adjoint() {
        let g = FlowGrid::new(16, 3.0).unwrap();
        let a = random_field(&g, 2);
        let b = random_field(&g, 3);
        let pa = leray_project(&g, a.clone());
        let pb = leray_project(&g, b.clone());
        let dot = |x: &[Vec<Complex64>; 2], y: &[Vec<Complex64>; 2]| -> Complex64 {
            (0..2).flat_map(|c| x[c].iter().zip(&y[c]).map(|(p, q)| p.conj() * q)).sum()
        };
        assert!((dot(&pa.comps, &b) - dot(&a, &pb.comps)).norm() < 1e-15);
    }

    #[test]
    fn advect_constant_is_zero() {
        let g = FlowGrid::new(16, 4.0).unwrap();
        let u = leray_project(&g, random_field(&g, 4));
        let mut f = vec![ZERO; g.len()];
        f[0] = Complex64::new(2.0, 0.0);
        assert!(advect(&g, &u, &f).iter().all(|v| v.norm() < 1e-16));
    }

    #[test]
    fn advect_skew() {
        let g = FlowGrid::new(32, 7.0).unwrap();
        let u = leray_project(&g, random_field(&g, 5));
        let f = random_field(&g, 6)[0].clone();
        let af = advect(&g, &u, &f);
        let inner: f64 = af.iter().zip(&f).map(|(a, b)| (a * b.conj()).re).sum();
        let scale: f64 = af.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
            * f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(inner.abs() <= 1e-13 * scale, "{inner} vs {scale}");
    }

    #[test]
    fn low_freq_threshold() {
        let g = FlowGrid::new(16, 2.0 * PI).unwrap();
        let mut u = VelocityField::zeros(&g);
        // ξ = (0, ±1), velocity along x
        u.comps[0][16] = Complex64::new(0.5, 0.0);
        u.comps[0][15 * 16] = Complex64::new(0.5, 0.0);
        let full = u.energy(&g);
        assert!((low_freq_energy(&g, &u, 1.0, 3.0) - full).abs() < 1e-14);
        assert_eq!(low_freq_energy(&g, &u, 3.0, 3.0), 0.0);
    }

    #[test]
    fn norms_of_single_mode() {
        let l = 2.0 * PI;
        let g = FlowGrid::new(16, l).unwrap();
        let a = 0.3;
        let mut u = VelocityField::zeros(&g);
        // u = (a cos y, 0)
        u.comps[0][16] = Complex64::new(a / 2.0, 0.0);
        u.comps[0][15 * 16] = Complex64::new(a / 2.0, 0.0);
        let n = norms(&g, &u, &[2.0, 4.0]).unwrap();
        let l2 = a * l / 2f64.sqrt();
        assert!((n.l2 - l2).abs() < 1e-14);
        assert!((n.h1dot - l2).abs() < 1e-14);
        assert!((n.lp[0].1 - l2).abs() < 1e-13);
        // ∫ cos^4 = 3/8 L²
        let l4 = (a.powi(4) * 3.0 / 8.0 * l * l).powf(0.25);
        assert!((n.lp[1].1 - l4).abs() < 1e-13);
        assert!(norms(&g, &u, &[1.5]).is_err());
    }
}
