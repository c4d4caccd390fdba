//! Coupled evolution of velocity and configuration density.

mod checkpoint;
mod ledger;
mod model;
mod state;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use ledger::{EnergyLedger, LedgerRow, Rates};
pub use model::{CoupledModel, Rhs, RunOptions, RunOutput, SeriesRow, Switches, CFL_MAX};
pub use state::{MicroMacroState, MASS_TOL};
