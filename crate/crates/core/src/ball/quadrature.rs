//! Gauss–Jacobi rules and tensor-product quadrature on the unit ball.

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::gamma;

use crate::error::{FeneError, Result};

/// Gauss–Jacobi nodes and weights on `s ∈ [0, 1]` for the weight
/// `(1 - s)^alpha * s^beta`, computed by Golub–Welsch.
pub fn gauss_jacobi_unit(n: usize, alpha: f64, beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(FeneError::InvalidParameter("quadrature needs at least one node".into()));
    }
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(FeneError::InvalidParameter(format!(
            "Jacobi exponents must exceed -1, got alpha = {alpha}, beta = {beta}"
        )));
    }
    let ab = alpha + beta;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let nf = i as f64;
        jac[(i, i)] = if i == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * nf + ab) * (2.0 * nf + ab + 2.0))
        };
    }
    for i in 1..n {
        let nf = i as f64;
        let b2 = if i == 1 {
            4.0 * (alpha + 1.0) * (beta + 1.0) / ((ab + 2.0).powi(2) * (ab + 3.0))
        } else {
            4.0 * nf * (nf + alpha) * (nf + beta) * (nf + ab)
                / ((2.0 * nf + ab).powi(2) * (2.0 * nf + ab + 1.0) * (2.0 * nf + ab - 1.0))
        };
        let b = b2.sqrt();
        jac[(i, i - 1)] = b;
        jac[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mu0 = beta_fn(alpha + 1.0, beta + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (1.0 + x), mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pairs.into_iter().unzip())
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (s, w) = gauss_jacobi_unit(n, 0.0, 0.0)?;
    Ok((s.iter().map(|s| 2.0 * s - 1.0).collect(), w.iter().map(|w| 2.0 * w).collect()))
}

/// Surface area of the unit sphere `S^{d-1}`.
pub fn sphere_area(d: usize) -> f64 {
    match d {
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => unreachable!("dimension validated upstream"),
    }
}

/// `∫_B (1 - |R|^2)^k dR` over the unit ball in `d` dimensions.
pub fn ball_weight_integral(d: usize, k: f64) -> f64 {
    0.5 * sphere_area(d) * beta_fn(k + 1.0, d as f64 / 2.0)
}

/// Quadrature on the unit ball integrating `f(R) (1 - |R|^2)^exponent * scale`.
///
/// Radial nodes are Gauss–Jacobi in `s = r^2`; the angular part is the
/// trapezoid rule in 2-D and Gauss–Legendre in `cos θ` times trapezoid in `φ`
/// in 3-D.
#[derive(Debug, Clone, PartialEq)]
pub struct BallRule {
    pub d: usize,
    pub exponent: f64,
    /// Row-major `n x d` node coordinates.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl BallRule {
    pub fn new(d: usize, exponent: f64, order: usize, scale: f64) -> Result<Self> {
        let beta = (d as f64 - 2.0) / 2.0;
        let (s_nodes, s_weights) = gauss_jacobi_unit(order, exponent, beta)?;
        let n_phi = 2 * order;
        let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
        let mut points = Vec::new();
        let mut weights = Vec::new();
        match d {
            2 => {
                for (s, ws) in s_nodes.iter().zip(&s_weights) {
                    let r = s.sqrt();
                    for j in 0..n_phi {
                        let th = dphi * j as f64;
                        points.extend_from_slice(&[r * th.cos(), r * th.sin()]);
                        weights.push(scale * 0.5 * ws * dphi);
                    }
                }
            }
            3 => {
                let (z_nodes, z_weights) = gauss_legendre(order + 1)?;
                for (s, ws) in s_nodes.iter().zip(&s_weights) {
                    let r = s.sqrt();
                    for (z, wz) in z_nodes.iter().zip(&z_weights) {
                        let rho = (1.0 - z * z).sqrt();
                        for j in 0..n_phi {
                            let ph = dphi * j as f64;
                            points.extend_from_slice(&[
                                r * rho * ph.cos(),
                                r * rho * ph.sin(),
                                r * z,
                            ]);
                            weights.push(scale * 0.5 * ws * wz * dphi);
                        }
                    }
                }
            }
            _ => {
                return Err(FeneError::InvalidParameter(format!("unsupported ball dimension {d}")))
            }
        }
        Ok(Self { d, exponent, points, weights })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, q: usize) -> &[f64] {
        &self.points[q * self.d..(q + 1) * self.d]
    }

    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|q| self.weights[q] * f(self.point(q))).sum()
    }
}

/// Beta function; the gamma ratio is more accurate than `exp(ln_beta)` while it stays finite.
pub fn beta_fn(a: f64, b: f64) -> f64 {
    if a + b < 150.0 {
        gamma(a) * gamma(b) / gamma(a + b)
    } else {
        ln_beta(a, b).exp()
    }
}
