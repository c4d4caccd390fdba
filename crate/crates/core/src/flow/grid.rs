use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{FeneError, Result};

/// Periodic `N x N` collocation grid on `[0, L)^2` with 2/3-rule dealiasing.
///
/// Arrays are row-major with `y` as the slow index: entry `iy * N + ix`.
/// The forward transform carries the `1/N²` factor so that
/// `∫_box |u|² dx = L² Σ_ξ |û(ξ)|²`.
#[derive(Clone)]
pub struct FlowGrid {
    n: usize,
    length: f64,
    wavenumbers: Vec<f64>,
    keep: Vec<bool>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FlowGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FlowGrid").field("n", &self.n).field("length", &self.length).finish()
    }
}

impl PartialEq for FlowGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length
    }
}

const TRANSPOSE_BLOCK: usize = 16;

fn transpose_square(data: &mut [Complex64], n: usize) {
    for bi in (0..n).step_by(TRANSPOSE_BLOCK) {
        for bj in (bi..n).step_by(TRANSPOSE_BLOCK) {
            for i in bi..(bi + TRANSPOSE_BLOCK).min(n) {
                let j0 = if bi == bj { i + 1 } else { bj };
                for j in j0..(bj + TRANSPOSE_BLOCK).min(n) {
                    data.swap(i * n + j, j * n + i);
                }
            }
        }
    }
}

impl FlowGrid {
    pub fn new(n: usize, length: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(FeneError::InvalidParameter(format!(
                "grid size must be a power of two >= 16, got {n}"
            )));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(FeneError::InvalidParameter(format!("box length must be > 0, got {length}")));
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let cutoff = (n / 3) as i64;
        let base = 2.0 * std::f64::consts::PI / length;
        let ints: Vec<i64> = (0..n).map(|i| Self::signed_index_of(i, n)).collect();
        Ok(Self {
            n,
            length,
            wavenumbers: ints.iter().map(|&m| base * m as f64).collect(),
            keep: ints.iter().map(|&m| m.abs() <= cutoff).collect(),
            fwd,
            inv,
        })
    }

    fn signed_index_of(i: usize, n: usize) -> i64 {
        if i <= n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Area element of one collocation cell.
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dx()
    }

    /// Spacing of the wavenumber lattice, `2π / L`.
    pub fn lattice_gap(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.length
    }

    pub fn signed_index(&self, i: usize) -> i64 {
        Self::signed_index_of(i, self.n)
    }

    /// Wavenumber of the flat index `idx = iy * N + ix` as `(ξ_x, ξ_y)`.
    #[inline]
    pub fn xi(&self, idx: usize) -> (f64, f64) {
        (self.wavenumbers[idx % self.n], self.wavenumbers[idx / self.n])
    }

    #[inline]
    pub fn xi2(&self, idx: usize) -> f64 {
        let (a, b) = self.xi(idx);
        a * a + b * b
    }

    #[inline]
    pub fn is_kept(&self, idx: usize) -> bool {
        self.keep[idx % self.n] && self.keep[idx / self.n]
    }

    /// Flat index of `-ξ`.
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let (iy, ix) = (idx / self.n, idx % self.n);
        ((self.n - iy) % self.n) * self.n + (self.n - ix) % self.n
    }

    pub fn mask(&self, f: &mut [Complex64]) {
        for (idx, v) in f.iter_mut().enumerate() {
            if !self.is_kept(idx) {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }

    fn fft2(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(data.len(), self.len());
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        transpose_square(data, self.n);
        plan.process_with_scratch(data, &mut scratch);
        transpose_square(data, self.n);
    }

    /// Physical values to coefficients, scaled by `1/N²`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.fft2(data, &self.fwd);
        let s = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.fft2(data, &self.inv);
    }

    /// Two Hermitian spectra to two real fields with one complex transform.
    pub fn to_physical_pair(
        &self,
        a: &[Complex64],
        b: &[Complex64],
        out_a: &mut [f64],
        out_b: &mut [f64],
    ) {
        let i = Complex64::new(0.0, 1.0);
        let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + i * y).collect();
        self.inverse(&mut buf);
        for ((v, pa), pb) in buf.iter().zip(out_a.iter_mut()).zip(out_b.iter_mut()) {
            *pa = v.re;
            *pb = v.im;
        }
    }

    pub fn to_physical(&self, a: &[Complex64]) -> Vec<f64> {
        let mut buf = a.to_vec();
        self.inverse(&mut buf);
        buf.iter().map(|v| v.re).collect()
    }

    /// Two real fields to their spectra with one complex transform.
    pub fn to_spectral_pair(
        &self,
        a: &[f64],
        b: &[f64],
        out_a: &mut [Complex64],
        out_b: &mut [Complex64],
    ) {
        let mut buf: Vec<Complex64> =
            a.iter().zip(b).map(|(x, y)| Complex64::new(*x, *y)).collect();
        self.forward(&mut buf);
        for idx in 0..self.len() {
            let c = buf[idx];
            let cm = buf[self.conjugate_index(idx)].conj();
            out_a[idx] = 0.5 * (c + cm);
            out_b[idx] = Complex64::new(0.0, -0.5) * (c - cm);
        }
    }

    pub fn to_spectral(&self, a: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = a.iter().map(|x| Complex64::new(*x, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Physical coordinates of the flat index.
    pub fn position(&self, idx: usize) -> (f64, f64) {
        let dx = self.dx();
        ((idx % self.n) as f64 * dx, (idx / self.n) as f64 * dx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_sizes() {
        assert!(FlowGrid::new(8, 1.0).is_err());
        assert!(FlowGrid::new(24, 1.0).is_err());
        assert!(FlowGrid::new(16, 0.0).is_err());
    }

    #[test]
    fn mask_cutoff() {
        let g = FlowGrid::new(16, 1.0).unwrap();
        assert!(g.is_kept(5));
        assert!(!g.is_kept(6));
        assert!(!g.is_kept(16 * 10));
        assert!(g.is_kept(16 * 11 + 15));
    }

    #[test]
    fn round_trip() {
        let g = FlowGrid::new(32, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let b: Vec<f64> = (0..g.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut ha = vec![Complex64::default(); g.len()];
        let mut hb = ha.clone();
        g.to_spectral_pair(&a, &b, &mut ha, &mut hb);
        let single = g.to_spectral(&a);
        for (x, y) in ha.iter().zip(&single) {
            assert!((x - y).norm() < 1e-15);
        }
        let mut ra = vec![0.0; g.len()];
        let mut rb = ra.clone();
        g.to_physical_pair(&ha, &hb, &mut ra, &mut rb);
        let scale = a.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..g.len() {
            assert!((ra[i] - a[i]).abs() <= 1e-13 * scale);
            assert!((rb[i] - b[i]).abs() <= 1e-13 * scale);
        }
    }

    #[test]
    fn single_mode_lands_on_its_wavenumber() {
        let g = FlowGrid::new(16, 2.0 * std::f64::consts::PI).unwrap();
        let f: Vec<f64> = (0..g.len())
            .map(|idx| {
                let (x, y) = g.position(idx);
                (2.0 * x - 3.0 * y).cos()
            })
            .collect();
        let h = g.to_spectral(&f);
        let idx = 13 * 16 + 2; // (kx, ky) = (2, -3)
        assert!((h[idx].re - 0.5).abs() < 1e-14);
        assert!((h[g.conjugate_index(idx)].re - 0.5).abs() < 1e-14);
        let total: f64 = h.iter().map(|v| v.norm_sqr()).sum();
        assert!((total - 0.5).abs() < 1e-14);
    }
}
