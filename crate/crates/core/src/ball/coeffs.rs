use crate::error::{FeneError, Result};

/// Coefficients of `g = ψ̃ / ψ∞` in an orthonormal [`BallBasis`](super::BallBasis).
///
/// Index 0 is the constant direction, so `coeffs[0]` is exactly the mass
/// `∫_B ψ̃ dR`. Operators accept any vector; states require mean-zero data.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigCoeffs {
    coeffs: Vec<f64>,
}

impl ConfigCoeffs {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(m: usize) -> Self {
        Self { coeffs: vec![0.0; m] }
    }

    pub fn unit(m: usize, j: usize) -> Self {
        let mut coeffs = vec![0.0; m];
        coeffs[j] = 1.0;
        Self { coeffs }
    }

    /// Builds mean-zero coefficients, rejecting any mass in index 0.
    pub fn mean_zero(coeffs: Vec<f64>) -> Result<Self> {
        match coeffs.first() {
            Some(&c) if c != 0.0 => Err(FeneError::MassViolation { point: 0, value: c }),
            _ => Ok(Self { coeffs }),
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn mass(&self) -> f64 {
        self.coeffs.first().copied().unwrap_or(0.0)
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mass() == 0.0
    }

    /// `‖ψ̃‖_{L²}` in the weighted space; Euclidean because the basis is orthonormal.
    pub fn l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
    }
}

impl From<Vec<f64>> for ConfigCoeffs {
    fn from(coeffs: Vec<f64>) -> Self {
        Self::new(coeffs)
    }
}
