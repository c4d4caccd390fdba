use serde::{Deserialize, Serialize};

/// Instantaneous energy budget of one state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// `‖u‖²`
    pub u_energy: f64,
    /// `‖ψ̃‖²_{L²(L²)}`
    pub psi_energy: f64,
    /// `‖∇u‖²`
    pub grad_u: f64,
    /// `∫∫ ψ∞ |∇_R g|²`
    pub diss_r: f64,
    /// `∫ u · div τ`
    pub w_stress: f64,
    /// `∫∫ ψ∞ g (∇u : R ⊗ ∇_R U)`
    pub w_source: f64,
    /// `∫∫ g div_R(-∇u R ψ̃)`
    pub w_drag: f64,
    /// `‖∇_x ψ̃‖²_{L²(L²)}`
    pub psi_grad_x: f64,
}

impl Rates {
    pub fn energy(&self) -> f64 {
        self.u_energy + self.psi_energy
    }

    /// Semi-discrete `dE/dt`.
    pub fn de_dt(&self) -> f64 {
        2.0 * (-self.grad_u - self.diss_r + self.w_drag + self.w_stress + self.w_source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub t: f64,
    pub u_energy: f64,
    pub psi_energy: f64,
    pub grad_u: f64,
    pub diss_r: f64,
    pub w_stress: f64,
    pub w_source: f64,
    pub w_drag: f64,
    pub cancel_resid: f64,
    /// `ΔE/Δt` minus the trapezoidal mean of `dE/dt` over the last step; 0 on the first row.
    pub de_dt_resid: f64,
}

impl LedgerRow {
    pub fn from_rates(t: f64, r: &Rates, prev: Option<(&Rates, f64)>) -> Self {
        let de_dt_resid = match prev {
            Some((p, dt)) => (r.energy() - p.energy()) / dt - 0.5 * (r.de_dt() + p.de_dt()),
            None => 0.0,
        };
        Self {
            t,
            u_energy: r.u_energy,
            psi_energy: r.psi_energy,
            grad_u: r.grad_u,
            diss_r: r.diss_r,
            w_stress: r.w_stress,
            w_source: r.w_source,
            w_drag: r.w_drag,
            cancel_resid: (r.w_stress + r.w_source).abs(),
            de_dt_resid,
        }
    }

    pub fn energy(&self) -> f64 {
        self.u_energy + self.psi_energy
    }

    /// `cancel_resid / (|W_stress| + |W_source| + ε)`.
    pub fn cancel_ratio(&self) -> f64 {
        self.cancel_resid / (self.w_stress.abs() + self.w_source.abs() + f64::EPSILON)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
}

impl EnergyLedger {
    pub fn push(&mut self, row: LedgerRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn max_cancel_ratio(&self) -> f64 {
        self.rows.iter().map(LedgerRow::cancel_ratio).fold(0.0, f64::max)
    }

    /// Largest relative one-step energy increase (negative when strictly decaying).
    pub fn max_energy_growth(&self) -> f64 {
        self.rows
            .windows(2)
            .map(|w| (w[1].energy() - w[0].energy()) / w[0].energy().max(f64::MIN_POSITIVE))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].energy() <= w[0].energy())
    }

    pub fn max_abs_resid(&self) -> f64 {
        self.rows.iter().map(|r| r.de_dt_resid.abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rates_give_zero_row() {
        let r = Rates::default();
        let row = LedgerRow::from_rates(1.0, &r, Some((&r, 0.1)));
        assert_eq!(row.cancel_resid, 0.0);
        assert_eq!(row.de_dt_resid, 0.0);
        assert_eq!(row.cancel_ratio(), 0.0);
    }

    #[test]
    fn residual_of_exact_exponential_is_second_order() {
        // E(t) = e^{-2t} realised by ‖∇u‖² = E
        let rates = |t: f64| Rates { u_energy: (-2.0 * t).exp(), grad_u: (-2.0 * t).exp(), ..Default::default() };
        let resid = |dt: f64| {
            LedgerRow::from_rates(dt, &rates(dt), Some((&rates(0.0), dt))).de_dt_resid.abs()
        };
        let ratio = resid(0.01) / resid(0.005);
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }
}
