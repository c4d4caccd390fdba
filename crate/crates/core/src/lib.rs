//! Micro–macro spectral simulator for the FENE dumbbell model near equilibrium.

pub mod ball;
pub mod config;
pub mod coupled;
pub mod decay;
pub mod error;
pub mod flow;
pub mod initial;
pub mod modes;
pub mod params;
pub mod series;
pub mod verify;

pub use error::{FeneError, Result};
pub use params::FeneParams;
