use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ledger::{EnergyLedger, LedgerRow, Rates};
use super::state::MicroMacroState;
use crate::ball::BallBasis;
use crate::error::{FeneError, Result};
use crate::flow::{low_freq_energy, lp_norm, FlowGrid, VelocityField};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Largest admissible advective Courant number.
pub const CFL_MAX: f64 = 0.5;

/// Which explicit terms take part in the evolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Switches {
    /// `(u·∇)u` and `u·∇ψ̃`.
    pub advection: bool,
    /// Stress in the momentum equation and the matching source in the kinetic equation.
    pub coupling: bool,
    /// `div_R(-∇u R ψ̃)`.
    pub drag: bool,
}

impl Default for Switches {
    fn default() -> Self {
        Self { advection: true, coupling: true, drag: true }
    }
}

impl Switches {
    /// Linear heat flow for `u`, pure relaxation for `ψ̃`.
    pub fn decoupled() -> Self {
        Self { advection: false, coupling: false, drag: false }
    }
}

/// Right-hand side split into explicit and stiff parts.
#[derive(Debug, Clone)]
pub struct Rhs {
    pub du_explicit: [Vec<Complex64>; 2],
    pub du_stiff: [Vec<Complex64>; 2],
    /// Point-major, physical.
    pub dg_explicit: Vec<f64>,
    pub dg_stiff: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub dt: f64,
    pub t_end: f64,
    /// Emit a series row every this many steps.
    pub series_every: u64,
    /// Hand the state to the checkpoint sink every this many steps; 0 disables.
    pub checkpoint_every: u64,
    pub c_d: Vec<f64>,
    pub lp: Vec<f64>,
    /// Relative one-step energy growth that aborts the run.
    pub growth_tol: f64,
}

impl RunOptions {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            series_every: 1,
            checkpoint_every: 0,
            c_d: vec![3.0],
            lp: vec![4.0],
            growth_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub u_l2: f64,
    pub u_h1: f64,
    pub psi_l2: f64,
    pub psi_h1x: f64,
    pub diss_r: f64,
    /// One entry per `C_d`.
    pub lowfreq: Vec<f64>,
    /// One entry per `p`.
    pub lp: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ledger: EnergyLedger,
    pub series: Vec<SeriesRow>,
    pub state: MicroMacroState,
}

/// Spectral working variables: velocity and coefficient-major `ĝ_j`.
#[derive(Clone)]
struct Spec {
    u: [Vec<Complex64>; 2],
    g: Vec<Vec<Complex64>>,
}

struct Eval {
    nu: [Vec<Complex64>; 2],
    ng: Vec<Vec<Complex64>>,
    rates: Rates,
    speed_max: f64,
    uphys: [Vec<f64>; 2],
}

#[derive(Clone, Copy, Default)]
struct PointOut {
    tau: [f64; 3],
    gg: f64,
    gkg: f64,
    gdrag: f64,
    gsrc: f64,
}

/// The coupled velocity / configuration system on one grid and basis.
#[derive(Debug, Clone)]
pub struct CoupledModel {
    grid: FlowGrid,
    basis: BallBasis,
    switches: Switches,
    /// Eigenvectors and eigenvalues of `K` on the mean-zero block.
    q: DMatrix<f64>,
    lambda: Vec<f64>,
}

impl CoupledModel {
    pub fn new(grid: FlowGrid, basis: BallBasis, switches: Switches) -> Result<Self> {
        if basis.dim() != 2 {
            return Err(FeneError::Unsupported(format!(
                "coupled evolution is two-dimensional, basis has d = {}",
                basis.dim()
            )));
        }
        let m = basis.len();
        let (q, lambda) = if m > 1 {
            let eig = SymmetricEigen::new(basis.stiffness().view((1, 1), (m - 1, m - 1)).into_owned());
            (eig.eigenvectors, eig.eigenvalues.iter().copied().collect())
        } else {
            (DMatrix::zeros(0, 0), Vec::new())
        };
        Ok(Self { grid, basis, switches, q, lambda })
    }

    pub fn grid(&self) -> &FlowGrid {
        &self.grid
    }

    pub fn basis(&self) -> &BallBasis {
        &self.basis
    }

    pub fn switches(&self) -> Switches {
        self.switches
    }

    pub fn num_coeffs(&self) -> usize {
        self.basis.len()
    }

    /// `e^{-K dt}` with the mass direction left at the identity.
    pub fn relaxation_propagator(&self, dt: f64) -> DMatrix<f64> {
        let m = self.num_coeffs();
        let mut out = DMatrix::identity(m, m);
        if m > 1 {
            let decay = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                m - 1,
                self.lambda.iter().map(|l| (-l * dt).exp()),
            ));
            let block = &self.q * decay * self.q.transpose();
            out.view_mut((1, 1), (m - 1, m - 1)).copy_from(&block);
        }
        out
    }

    fn check_state(&self, st: &MicroMacroState) -> Result<()> {
        if st.num_coeffs() != self.num_coeffs() || st.num_points() != self.grid.len() {
            return Err(FeneError::DimensionMismatch {
                expected: self.grid.len() * self.num_coeffs(),
                got: st.g.len(),
            });
        }
        st.check_mass()
    }

    // --- transforms ------------------------------------------------------

    /// Point-major physical coefficients to coefficient-major spectra.
    fn g_to_spec(&self, g: &[f64]) -> Vec<Vec<Complex64>> {
        let m = self.num_coeffs();
        let np = self.grid.len();
        let fields: Vec<Vec<f64>> =
            (1..m).map(|j| (0..np).map(|p| g[p * m + j]).collect()).collect();
        let mut out = vec![vec![ZERO; np]];
        out.extend(self.fields_to_spec(&fields));
        out
    }

    fn g_to_phys(&self, gh: &[Vec<Complex64>]) -> Vec<f64> {
        let m = self.num_coeffs();
        let np = self.grid.len();
        let fields = self.spec_to_fields(&gh[1..]);
        let mut g = vec![0.0; np * m];
        for (j, f) in fields.iter().enumerate() {
            for p in 0..np {
                g[p * m + j + 1] = f[p];
            }
        }
        g
    }

    fn fields_to_spec(&self, fields: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
        let grid = &self.grid;
        let chunks: Vec<Vec<Vec<Complex64>>> = fields
            .par_chunks(2)
            .map(|c| {
                if c.len() == 2 {
                    let mut a = vec![ZERO; grid.len()];
                    let mut b = vec![ZERO; grid.len()];
                    grid.to_spectral_pair(&c[0], &c[1], &mut a, &mut b);
                    vec![a, b]
                } else {
                    vec![grid.to_spectral(&c[0])]
                }
            })
            .collect();
        chunks.into_iter().flatten().collect()
    }

    fn spec_to_fields(&self, spectra: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
        let grid = &self.grid;
        let chunks: Vec<Vec<Vec<f64>>> = spectra
            .par_chunks(2)
            .map(|c| {
                if c.len() == 2 {
                    let mut a = vec![0.0; grid.len()];
                    let mut b = vec![0.0; grid.len()];
                    grid.to_physical_pair(&c[0], &c[1], &mut a, &mut b);
                    vec![a, b]
                } else {
                    vec![grid.to_physical(&c[0])]
                }
            })
            .collect();
        chunks.into_iter().flatten().collect()
    }

    // --- explicit terms ----------------------------------------------------

    fn evaluate(&self, y: &Spec, gphys: Option<&[f64]>) -> Eval {
        let grid = &self.grid;
        let basis = &self.basis;
        let np = grid.len();
        let m = self.num_coeffs();
        let sw = self.switches;
        let l2 = grid.length() * grid.length();
        let da = grid.cell_area();

        let mut ux = vec![0.0; np];
        let mut uy = vec![0.0; np];
        grid.to_physical_pair(&y.u[0], &y.u[1], &mut ux, &mut uy);
        let speed_max = ux.iter().zip(&uy).map(|(a, b)| a.abs() + b.abs()).fold(0.0, f64::max);

        let need_kappa = sw.coupling || sw.drag;
        let kappa: Vec<Vec<f64>> = if need_kappa {
            let vel = VelocityField::from_spectral_unchecked(y.u.clone());
            vel.gradient_physical(grid).into_iter().collect()
        } else {
            Vec::new()
        };

        let owned;
        let g: &[f64] = match gphys {
            Some(g) => g,
            None => {
                owned = self.g_to_phys(&y.g);
                &owned
            }
        };

        // per-point kinetic terms
        let mut h = vec![0.0; np * m];
        let point_out: Vec<PointOut> = h
            .par_chunks_mut(m)
            .enumerate()
            .map_init(
                || vec![0.0; m],
                |scratch, (p, hp)| {
                    let gp = &g[p * m..(p + 1) * m];
                    let mut out = PointOut { gg: gp.iter().map(|v| v * v).sum(), ..Default::default() };
                    basis.stiffness_apply(gp, scratch);
                    out.gkg = dot(scratch, gp);
                    if need_kappa {
                        let kp = [kappa[0][p], kappa[1][p], kappa[2][p], kappa[3][p]];
                        if sw.drag {
                            basis.drag_apply(&kp, gp, hp);
                            out.gdrag = dot(hp, gp);
                        }
                        if sw.coupling {
                            basis.source_apply(&kp, scratch);
                            out.gsrc = dot(scratch, gp);
                            hp.iter_mut().zip(scratch.iter()).for_each(|(a, b)| *a += b);
                            let mut t = [0.0; 4];
                            basis.stress_apply(gp, &mut t);
                            out.tau = [t[0], t[1], t[3]];
                        }
                    }
                    out
                },
            )
            .collect();

        // kinetic right-hand side in spectral space, advection in divergence form
        let mut fields: Vec<Vec<f64>> = Vec::with_capacity(3 * (m - 1));
        for j in 1..m {
            fields.push((0..np).map(|p| h[p * m + j]).collect());
        }
        if sw.advection {
            for j in 1..m {
                fields.push((0..np).map(|p| ux[p] * g[p * m + j]).collect());
            }
            for j in 1..m {
                fields.push((0..np).map(|p| uy[p] * g[p * m + j]).collect());
            }
        }
        let spec = self.fields_to_spec(&fields);
        let mut ng = vec![vec![ZERO; np]];
        for j in 0..m - 1 {
            let mut f = spec[j].clone();
            if sw.advection {
                let (fx, fy) = (&spec[m - 1 + j], &spec[2 * (m - 1) + j]);
                for idx in 0..np {
                    let (kx, ky) = grid.xi(idx);
                    f[idx] -= I * (kx * fx[idx] + ky * fy[idx]);
                }
            }
            grid.mask(&mut f);
            ng.push(f);
        }

        // momentum right-hand side
        let mut nu = [vec![ZERO; np], vec![ZERO; np]];
        let mut w_stress = 0.0;
        if sw.coupling {
            let mut tau: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; np]);
            for (p, o) in point_out.iter().enumerate() {
                for c in 0..3 {
                    tau[c][p] = o.tau[c];
                }
            }
            let st = crate::flow::StressField::from_physical(grid, tau);
            let div = st.divergence(grid);
            for a in 0..2 {
                w_stress += div[a].iter().zip(&y.u[a]).map(|(d, u)| (u.conj() * d).re).sum::<f64>();
            }
            w_stress *= l2;
            nu = div;
        }
        if sw.advection {
            let prods = vec![
                ux.iter().map(|v| v * v).collect::<Vec<f64>>(),
                ux.iter().zip(&uy).map(|(a, b)| a * b).collect(),
                uy.iter().map(|v| v * v).collect(),
            ];
            let ph = self.fields_to_spec(&prods);
            for idx in 0..np {
                let (kx, ky) = grid.xi(idx);
                nu[0][idx] -= I * (kx * ph[0][idx] + ky * ph[1][idx]);
                nu[1][idx] -= I * (kx * ph[1][idx] + ky * ph[2][idx]);
            }
        }
        let [mut n0, mut n1] = nu;
        grid.mask(&mut n0);
        grid.mask(&mut n1);
        crate::flow::leray_in_place(grid, &mut n0, &mut n1);

        // budget, reduced sequentially
        let mut sums = [0.0; 4];
        for o in &point_out {
            sums[0] += o.gg;
            sums[1] += o.gkg;
            sums[2] += o.gdrag;
            sums[3] += o.gsrc;
        }
        let vel = VelocityField::from_spectral_unchecked(y.u.clone());
        let psi_grad_x = l2
            * y.g
                .iter()
                .map(|f| f.iter().enumerate().map(|(idx, v)| grid.xi2(idx) * v.norm_sqr()).sum::<f64>())
                .sum::<f64>();
        let rates = Rates {
            u_energy: vel.energy(grid),
            psi_energy: da * sums[0],
            grad_u: vel.gradient_energy(grid),
            diss_r: da * sums[1],
            w_stress,
            w_source: da * sums[3],
            w_drag: da * sums[2],
            psi_grad_x,
        };
        Eval { nu: [n0, n1], ng, rates, speed_max, uphys: [ux, uy] }
    }

    /// Right-hand side at `state`; the stiff parts are `-|ξ|² û` and `-K g`.
    pub fn rhs(&self, state: &MicroMacroState) -> Result<Rhs> {
        self.check_state(state)?;
        let y = Spec { u: state.u.components().clone(), g: self.g_to_spec(&state.g) };
        let ev = self.evaluate(&y, Some(&state.g));
        let grid = &self.grid;
        let du_stiff: [Vec<Complex64>; 2] = std::array::from_fn(|a| {
            y.u[a].iter().enumerate().map(|(idx, v)| -grid.xi2(idx) * v).collect()
        });
        let m = self.num_coeffs();
        let mut dg_stiff = vec![0.0; state.g.len()];
        for (gp, out) in state.g.chunks(m).zip(dg_stiff.chunks_mut(m)) {
            self.basis.stiffness_apply(gp, out);
            out.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(Rhs { dg_explicit: self.g_to_phys(&ev.ng), du_explicit: ev.nu, du_stiff, dg_stiff })
    }

    /// Budget terms of `state` computed with the solver's own quadratures.
    pub fn rates(&self, state: &MicroMacroState) -> Result<Rates> {
        self.check_state(state)?;
        let y = Spec { u: state.u.components().clone(), g: self.g_to_spec(&state.g) };
        Ok(self.evaluate(&y, Some(&state.g)).rates)
    }

    pub fn energy_ledger_row(
        &self,
        state: &MicroMacroState,
        prev: &MicroMacroState,
        dt: f64,
    ) -> Result<LedgerRow> {
        let r = self.rates(state)?;
        let p = self.rates(prev)?;
        Ok(LedgerRow::from_rates(state.t, &r, Some((&p, dt))))
    }

    pub fn imex_step(&self, state: &MicroMacroState, dt: f64) -> Result<MicroMacroState> {
        let stepper = Stepper::new(self, dt)?;
        Ok(stepper.advance(state)?.0)
    }

    /// Integrate to `opts.t_end`, handing checkpoints to `sink`.
    pub fn run(
        &self,
        init: MicroMacroState,
        opts: &RunOptions,
        mut sink: impl FnMut(&MicroMacroState) -> Result<()>,
    ) -> Result<RunOutput> {
        if opts.series_every == 0 {
            return Err(FeneError::InvalidParameter("series cadence must be >= 1".into()));
        }
        let stepper = Stepper::new(self, opts.dt)?;
        let n_steps = ((opts.t_end - init.t) / opts.dt - 1e-9).ceil().max(0.0) as u64;
        let mut ledger = EnergyLedger::default();
        let mut series = Vec::new();
        let mut state = init;
        let mut prev: Option<Rates> = None;
        for _ in 0..n_steps {
            let (next, ev) = stepper.advance(&state)?;
            ledger.push(LedgerRow::from_rates(state.t, &ev.rates, prev.as_ref().map(|p| (p, opts.dt))));
            if state.step % opts.series_every == 0 {
                series.push(self.series_row(&state, &ev, opts)?);
            }
            let (e0, e1) = (ev.rates.energy(), next.energy(&self.grid));
            if e1 - e0 > opts.growth_tol * e0 + f64::MIN_POSITIVE {
                return Err(FeneError::Instability { t: next.t, before: e0, after: e1 });
            }
            prev = Some(ev.rates);
            state = next;
            if opts.checkpoint_every > 0 && state.step % opts.checkpoint_every == 0 {
                sink(&state)?;
            }
        }
        let y = Spec { u: state.u.components().clone(), g: self.g_to_spec(&state.g) };
        let ev = self.evaluate(&y, Some(&state.g));
        ledger.push(LedgerRow::from_rates(state.t, &ev.rates, prev.as_ref().map(|p| (p, opts.dt))));
        if state.step % opts.series_every == 0 {
            series.push(self.series_row(&state, &ev, opts)?);
        }
        Ok(RunOutput { ledger, series, state })
    }

    fn series_row(&self, state: &MicroMacroState, ev: &Eval, opts: &RunOptions) -> Result<SeriesRow> {
        let grid = &self.grid;
        let r = &ev.rates;
        Ok(SeriesRow {
            t: state.t,
            u_l2: r.u_energy.sqrt(),
            u_h1: r.grad_u.sqrt(),
            psi_l2: r.psi_energy.sqrt(),
            psi_h1x: r.psi_grad_x.sqrt(),
            diss_r: r.diss_r,
            lowfreq: opts.c_d.iter().map(|&c| low_freq_energy(grid, &state.u, state.t, c)).collect(),
            lp: opts.lp.iter().map(|&p| lp_norm(grid, &ev.uphys, p)).collect::<Result<_>>()?,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Integrating-factor Heun step for a fixed `dt`:
/// `y' = E(y + dt/2 N(y)) + dt/2 N(E(y + dt N(y)))`, `E` the exact linear propagator.
struct Stepper<'a> {
    model: &'a CoupledModel,
    dt: f64,
    heat: Vec<f64>,
    relax: DMatrix<f64>,
}

impl<'a> Stepper<'a> {
    fn new(model: &'a CoupledModel, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(FeneError::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        let grid = &model.grid;
        let heat = (0..grid.len()).map(|idx| (-grid.xi2(idx) * dt).exp()).collect();
        Ok(Self { model, dt, heat, relax: model.relaxation_propagator(dt) })
    }

    /// `E(y + c N)`.
    fn propagate(&self, y: &Spec, c: f64, n: &Eval) -> Spec {
        let m = self.model.num_coeffs();
        let np = self.heat.len();
        let u: [Vec<Complex64>; 2] = std::array::from_fn(|a| {
            (0..np).map(|idx| (y.u[a][idx] + c * n.nu[a][idx]) * self.heat[idx]).collect()
        });
        let pre: Vec<Vec<Complex64>> = (0..m)
            .map(|j| y.g[j].iter().zip(&n.ng[j]).map(|(a, b)| a + c * b).collect())
            .collect();
        let relax = &self.relax;
        let mut g = vec![vec![ZERO; np]; m];
        g[1..].par_iter_mut().enumerate().for_each(|(jm, out)| {
            let j = jm + 1;
            for (l, src) in pre.iter().enumerate().skip(1) {
                let e = relax[(j, l)];
                if e == 0.0 {
                    continue;
                }
                out.iter_mut().zip(src).for_each(|(o, s)| *o += e * s);
            }
        });
        Spec { u, g }
    }

    fn advance(&self, state: &MicroMacroState) -> Result<(MicroMacroState, Eval)> {
        let model = self.model;
        model.check_state(state)?;
        let dt = self.dt;
        let y = Spec { u: state.u.components().clone(), g: model.g_to_spec(&state.g) };
        let e0 = model.evaluate(&y, Some(&state.g));
        let courant = dt * e0.speed_max / model.grid.dx();
        if courant > CFL_MAX {
            return Err(FeneError::Cfl { dt, suggested: CFL_MAX * model.grid.dx() / e0.speed_max });
        }
        let a = self.propagate(&y, dt, &e0);
        let e1 = model.evaluate(&a, None);
        let mut b = self.propagate(&y, 0.5 * dt, &e0);
        for c in 0..2 {
            b.u[c].iter_mut().zip(&e1.nu[c]).for_each(|(v, n)| *v += 0.5 * dt * n);
        }
        for (gj, nj) in b.g.iter_mut().zip(&e1.ng) {
            gj.iter_mut().zip(nj).for_each(|(v, n)| *v += 0.5 * dt * n);
        }
        let g = model.g_to_phys(&b.g);
        let [u0, u1] = b.u;
        let next = MicroMacroState::new(
            state.t + dt,
            state.step + 1,
            VelocityField::from_spectral_unchecked([u0, u1]),
            g,
            model.num_coeffs(),
        )?;
        Ok((next, e0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::leray_project;
    use crate::FeneParams;

    fn model(n: usize, sw: Switches) -> CoupledModel {
        let grid = FlowGrid::new(n, 8.0).unwrap();
        let basis = BallBasis::build(FeneParams::ball(2.0, 2).unwrap(), 4, 7).unwrap();
        CoupledModel::new(grid, basis, sw).unwrap()
    }

    fn small_state(md: &CoupledModel, amp: f64) -> MicroMacroState {
        let grid = md.grid();
        let m = md.num_coeffs();
        let np = grid.len();
        let mut a = vec![ZERO; np];
        let mut b = vec![ZERO; np];
        // a couple of low modes, made Hermitian by construction
        for &(ix, iy, c) in &[(1usize, 0usize, 1.0), (0, 2, 0.5), (1, 1, -0.7)] {
            let idx = iy * grid.n() + ix;
            let v = Complex64::new(0.3 * c, 0.2);
            a[idx] += v * amp;
            b[idx] += v * amp * 0.4;
            let cj = grid.conjugate_index(idx);
            a[cj] += (v * amp).conj();
            b[cj] += (v * amp * 0.4).conj();
        }
        let u = leray_project(grid, [a, b]);
        let mut g = vec![0.0; np * m];
        for p in 0..np {
            let (x, y) = grid.position(p);
            let env = (2.0 * std::f64::consts::PI * x / grid.length()).cos()
                + (2.0 * std::f64::consts::PI * y / grid.length()).sin();
            for j in 1..m {
                g[p * m + j] = amp * env / (j as f64);
            }
        }
        MicroMacroState::new(0.0, 0, u, g, m).unwrap()
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let md = model(16, Switches::default());
        let mut st = MicroMacroState::zeros(md.grid(), md.num_coeffs());
        let rhs = md.rhs(&st).unwrap();
        assert!(rhs.dg_explicit.iter().all(|v| *v == 0.0));
        assert!(rhs.du_explicit.iter().flatten().all(|v| *v == ZERO));
        for _ in 0..50 {
            st = md.imex_step(&st, 0.05).unwrap();
        }
        assert!(st.g.iter().all(|v| *v == 0.0));
        assert_eq!(st.u, VelocityField::zeros(md.grid()));
    }

    #[test]
    fn relaxation_propagator_matches_matrix_exponential() {
        let md = model(16, Switches::default());
        let m = md.num_coeffs();
        let mut k = md.basis().stiffness().clone();
        k *= -0.3;
        let oracle = k.exp();
        let e = md.relaxation_propagator(0.3);
        for i in 0..m {
            for j in 0..m {
                assert!((e[(i, j)] - oracle[(i, j)]).abs() < 1e-12, "{i} {j}");
            }
        }
    }

    #[test]
    fn stress_and_source_cancel() {
        let md = model(16, Switches::default());
        let st = small_state(&md, 1e-2);
        let r = md.rates(&st).unwrap();
        assert!(r.w_stress.abs() > 0.0);
        let ratio = (r.w_stress + r.w_source).abs() / (r.w_stress.abs() + r.w_source.abs());
        assert!(ratio < 1e-12, "{ratio}");
    }

    #[test]
    fn advection_is_energy_neutral() {
        let md = model(32, Switches { advection: true, coupling: false, drag: false });
        let st = small_state(&md, 1.0);
        let rhs = md.rhs(&st).unwrap();
        let l2 = md.grid().length().powi(2);
        let pu: f64 = (0..2)
            .map(|a| rhs.du_explicit[a].iter().zip(st.u.component(a)).map(|(n, u)| (u.conj() * n).re).sum::<f64>())
            .sum::<f64>()
            * l2;
        let pg: f64 = rhs.dg_explicit.iter().zip(&st.g).map(|(a, b)| a * b).sum::<f64>();
        let scale_u = rhs.du_explicit.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(pu.abs() < 1e-12 * scale_u * l2, "{pu}");
        assert!(pg.abs() < 1e-12 * rhs.dg_explicit.iter().map(|v| v.abs()).sum::<f64>(), "{pg}");
    }

    #[test]
    fn step_preserves_constraints() {
        let md = model(16, Switches::default());
        let mut st = small_state(&md, 1e-1);
        for _ in 0..20 {
            st = md.imex_step(&st, 0.05).unwrap();
        }
        assert_eq!(st.max_mass(), 0.0);
        assert!(st.u.divergence_residual(md.grid()) < 1e-14);
    }

    #[test]
    fn cfl_violation_rejected() {
        let md = model(16, Switches::default());
        let st = small_state(&md, 50.0);
        match md.imex_step(&st, 10.0) {
            Err(FeneError::Cfl { suggested, .. }) => assert!(suggested < 10.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mass_violation_rejected() {
        let md = model(16, Switches::default());
        let mut st = small_state(&md, 1e-2);
        st.g[5 * md.num_coeffs()] = 1e-6;
        assert!(matches!(md.rhs(&st), Err(FeneError::MassViolation { point: 5, .. })));
    }

    #[test]
    fn run_energy_decreases() {
        let md = model(16, Switches::default());
        let st = small_state(&md, 1e-2);
        let out = md.run(st, &RunOptions::new(0.05, 1.0), |_| Ok(())).unwrap();
        assert_eq!(out.ledger.len(), 21);
        assert!(out.ledger.is_monotone());
        assert!(out.ledger.max_cancel_ratio() < 1e-10);
        assert_eq!(out.series.len(), 21);
    }
}
