use crate::error::{FeneError, Result};
use crate::flow::{FlowGrid, VelocityField};

/// Mass tolerance per point for `coeffs[0]`.
pub const MASS_TOL: f64 = 1e-12;

/// Velocity plus one configuration coefficient vector per collocation point.
///
/// `g` is point-major: the `M` coefficients of point `p` are `g[p*M..(p+1)*M]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroMacroState {
    pub t: f64,
    pub step: u64,
    pub u: VelocityField,
    pub g: Vec<f64>,
    m: usize,
}

impl MicroMacroState {
    pub fn new(t: f64, step: u64, u: VelocityField, g: Vec<f64>, m: usize) -> Result<Self> {
        let np = u.component(0).len();
        if m == 0 || g.len() != np * m {
            return Err(FeneError::DimensionMismatch { expected: np * m, got: g.len() });
        }
        Ok(Self { t, step, u, g, m })
    }

    pub fn zeros(grid: &FlowGrid, m: usize) -> Self {
        Self { t: 0.0, step: 0, u: VelocityField::zeros(grid), g: vec![0.0; grid.len() * m], m }
    }

    pub fn num_coeffs(&self) -> usize {
        self.m
    }

    pub fn num_points(&self) -> usize {
        self.g.len() / self.m
    }

    pub fn point(&self, p: usize) -> &[f64] {
        &self.g[p * self.m..(p + 1) * self.m]
    }

    /// Largest `|coeffs[0]|` over all points.
    pub fn max_mass(&self) -> f64 {
        self.g.iter().step_by(self.m).fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn check_mass(&self) -> Result<()> {
        for (p, v) in self.g.iter().step_by(self.m).enumerate() {
            if v.abs() > MASS_TOL {
                return Err(FeneError::MassViolation { point: p, value: *v });
            }
        }
        Ok(())
    }

    /// `‖ψ̃‖²_{L²(L²)}` by collocation.
    pub fn psi_energy(&self, grid: &FlowGrid) -> f64 {
        grid.cell_area() * self.g.iter().map(|v| v * v).sum::<f64>()
    }

    /// `E = ‖u‖² + ‖ψ̃‖²_{L²(L²)}`.
    pub fn energy(&self, grid: &FlowGrid) -> f64 {
        self.u.energy(grid) + self.psi_energy(grid)
    }
}
