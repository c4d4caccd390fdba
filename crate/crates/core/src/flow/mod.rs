//! Periodic pseudo-spectral fluid layer.

mod field;
mod grid;
mod snapshot;

pub use field::{advect, leray_project, low_freq_energy, lp_norm, norms, FlowNorms, StressField, VelocityField};
pub(crate) use field::leray_in_place;
pub use grid::FlowGrid;
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC};
