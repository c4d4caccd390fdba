//! Restart file. Layout (little-endian): magic `FENECKP1`, version `u32`,
//! `t: f64`, `step: u64`, grid header `N: u32`, `L: f64`, `M: u32`, an
//! embedded `FENEFLD1` velocity snapshot, then the point-major `N² x M`
//! coefficient array as `f64`.

use std::io::{Read, Write};

use super::state::MicroMacroState;
use crate::ball::archive::{expect_magic, get_f64, get_f64s, get_u32, get_u64, put_f64, put_f64s, put_u32, put_u64};
use crate::error::{FeneError, Result};
use crate::flow::{read_snapshot, write_snapshot, FlowGrid};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FENECKP1";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(w: &mut impl Write, grid: &FlowGrid, state: &MicroMacroState) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    put_u32(w, CHECKPOINT_VERSION)?;
    put_f64(w, state.t)?;
    put_u64(w, state.step)?;
    put_u32(w, grid.n() as u32)?;
    put_f64(w, grid.length())?;
    put_u32(w, state.num_coeffs() as u32)?;
    write_snapshot(w, grid, &state.u)?;
    put_f64s(w, &state.g)
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<(FlowGrid, MicroMacroState)> {
    expect_magic(r, CHECKPOINT_MAGIC)?;
    let version = get_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(FeneError::Format(format!("unsupported checkpoint version {version}")));
    }
    let t = get_f64(r)?;
    let step = get_u64(r)?;
    let n = get_u32(r)? as usize;
    let length = get_f64(r)?;
    let m = get_u32(r)? as usize;
    let (grid, u) = read_snapshot(r)?;
    if grid.n() != n || grid.length() != length {
        return Err(FeneError::Format("checkpoint header disagrees with its velocity block".into()));
    }
    let g = get_f64s(r, grid.len() * m)?;
    let state = MicroMacroState::new(t, step, u, g, m)?;
    Ok((grid, state))
}
