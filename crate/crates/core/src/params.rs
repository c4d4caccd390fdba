use serde::{Deserialize, Serialize};

use crate::error::{FeneError, Result};

/// Physical parameters of the FENE model.
///
/// Viscosity, the diffusion coefficient `beta` and the ball radius `R0` are
/// all normalized to one; only the potential strength `k`, the dimension and
/// the periodic box length are free.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeneParams {
    pub k: f64,
    pub d: usize,
    pub box_length: f64,
}

impl FeneParams {
    pub const VISCOSITY: f64 = 1.0;
    pub const BETA: f64 = 1.0;
    pub const R0: f64 = 1.0;

    pub fn new(k: f64, d: usize, box_length: f64) -> Result<Self> {
        let p = Self { k, d, box_length };
        p.validate()?;
        Ok(p)
    }

    /// Parameters for configuration-space work only; the box length is irrelevant there.
    pub fn ball(k: f64, d: usize) -> Result<Self> {
        Self::new(k, d, 2.0 * std::f64::consts::PI)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(FeneError::InvalidParameter(format!("k must be > 0, got {}", self.k)));
        }
        if !(self.box_length > 0.0) || !self.box_length.is_finite() {
            return Err(FeneError::InvalidParameter(format!(
                "box length must be > 0, got {}",
                self.box_length
            )));
        }
        if self.d != 2 && self.d != 3 {
            return Err(FeneError::InvalidParameter(format!("d must be 2 or 3, got {}", self.d)));
        }
        Ok(())
    }

    /// For `k <= 1` the weight `psi_inf |grad U|^2` is not integrable, so the
    /// simple operator-norm stress bound is only a discrete statement.
    pub fn near_boundary_singular(&self) -> bool {
        self.k <= 1.0
    }

    /// FENE potential `U(R) = -k log(1 - |R|^2)`.
    pub fn potential(&self, r2: f64) -> f64 {
        -self.k * (1.0 - r2).ln()
    }
}
