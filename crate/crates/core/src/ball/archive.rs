//! Binary archive of a built basis.
//!
//! Layout (all little-endian): magic `FENEBAS1`, version `u32`, `k: f64`,
//! `N: u32` (degree_max), `M: u32`, `d: u32`, `quad_order: u32`,
//! `gram_tol: f64`; then row-major `f64` blocks `K` (`M x M`), `D`
//! (`d² x M x M`, entry `(a,b)` in row-major order), `S` (`d² x M`), `T`
//! (`d² x M`); then both quadrature tables (exponent `k`, then `k - 1`) as
//! `n: u32`, `exponent: f64`, `n x d` points, `n` weights; and finally the
//! `M x M` generator-to-basis matrix.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use super::basis::{graded_exponents, BallBasis};
use super::quadrature::BallRule;
use crate::error::{FeneError, Result};
use crate::params::FeneParams;

pub const BASIS_MAGIC: &[u8; 8] = b"FENEBAS1";
pub const BASIS_VERSION: u32 = 1;

pub(crate) fn put_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub(crate) fn put_f64s(w: &mut impl Write, vs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(vs.len() * 8);
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub(crate) fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub(crate) fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub(crate) fn get_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn get_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub(crate) fn expect_magic(r: &mut impl Read, magic: &[u8; 8]) -> Result<()> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    if &b != magic {
        return Err(FeneError::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&b),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn put_rule(w: &mut impl Write, rule: &BallRule) -> Result<()> {
    put_u32(w, rule.len() as u32)?;
    put_f64(w, rule.exponent)?;
    put_f64s(w, &rule.points)?;
    put_f64s(w, &rule.weights)
}

fn get_rule(r: &mut impl Read, d: usize) -> Result<BallRule> {
    let n = get_u32(r)? as usize;
    let exponent = get_f64(r)?;
    let points = get_f64s(r, n * d)?;
    let weights = get_f64s(r, n)?;
    Ok(BallRule { d, exponent, points, weights })
}

pub fn write_basis(w: &mut impl Write, basis: &BallBasis) -> Result<()> {
    let (m, d) = (basis.len(), basis.dim());
    w.write_all(BASIS_MAGIC)?;
    put_u32(w, BASIS_VERSION)?;
    put_f64(w, basis.params.k)?;
    put_u32(w, basis.degree_max as u32)?;
    put_u32(w, m as u32)?;
    put_u32(w, d as u32)?;
    put_u32(w, basis.quad_order as u32)?;
    put_f64(w, basis.gram_tol)?;
    put_f64s(w, &row_major(&basis.stiffness))?;
    for mat in &basis.drag {
        put_f64s(w, &row_major(mat))?;
    }
    for s in &basis.source {
        put_f64s(w, s)?;
    }
    for t in &basis.stress {
        put_f64s(w, t)?;
    }
    put_rule(w, &basis.rule)?;
    put_rule(w, &basis.stress_rule)?;
    put_f64s(w, &row_major(&basis.coeffs))?;
    Ok(())
}

pub fn read_basis(r: &mut impl Read) -> Result<BallBasis> {
    expect_magic(r, BASIS_MAGIC)?;
    let version = get_u32(r)?;
    if version != BASIS_VERSION {
        return Err(FeneError::Format(format!("unsupported basis archive version {version}")));
    }
    let k = get_f64(r)?;
    let degree_max = get_u32(r)? as usize;
    let m = get_u32(r)? as usize;
    let d = get_u32(r)? as usize;
    let quad_order = get_u32(r)? as usize;
    let gram_tol = get_f64(r)?;
    let params = FeneParams::ball(k, d)?;
    let exponents = graded_exponents(d, degree_max);
    if exponents.len() != m {
        return Err(FeneError::Format(format!(
            "basis size {m} inconsistent with degree {degree_max} in {d}-D"
        )));
    }
    let stiffness = DMatrix::from_row_slice(m, m, &get_f64s(r, m * m)?);
    let mut drag = Vec::with_capacity(d * d);
    for _ in 0..d * d {
        drag.push(DMatrix::from_row_slice(m, m, &get_f64s(r, m * m)?));
    }
    let mut source = Vec::with_capacity(d * d);
    for _ in 0..d * d {
        source.push(get_f64s(r, m)?);
    }
    let mut stress = Vec::with_capacity(d * d);
    for _ in 0..d * d {
        stress.push(get_f64s(r, m)?);
    }
    let rule = get_rule(r, d)?;
    let stress_rule = get_rule(r, d)?;
    let coeffs = DMatrix::from_row_slice(m, m, &get_f64s(r, m * m)?);
    Ok(BallBasis {
        params,
        degree_max,
        quad_order,
        gram_tol,
        exponents,
        coeffs,
        rule,
        stress_rule,
        stiffness,
        drag,
        source,
        stress,
    })
}
