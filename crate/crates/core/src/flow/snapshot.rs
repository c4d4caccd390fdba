//! Spectral velocity snapshot: magic `FENEFLD1`, `N: u32`, `L: f64`, then for
//! each wavevector in row-major order the interleaved `(re, im)` of `û_x`
//! followed by those of `û_y`.

use std::io::{Read, Write};

use num_complex::Complex64;

use super::{FlowGrid, VelocityField};
use crate::ball::archive::{expect_magic, get_f64, get_f64s, get_u32, put_f64, put_f64s, put_u32};
use crate::error::Result;

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"FENEFLD1";

pub fn write_snapshot(w: &mut impl Write, grid: &FlowGrid, u: &VelocityField) -> Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    put_u32(w, grid.n() as u32)?;
    put_f64(w, grid.length())?;
    let mut buf = Vec::with_capacity(4 * grid.len());
    for idx in 0..grid.len() {
        for c in u.components() {
            buf.push(c[idx].re);
            buf.push(c[idx].im);
        }
    }
    put_f64s(w, &buf)
}

pub fn read_snapshot(r: &mut impl Read) -> Result<(FlowGrid, VelocityField)> {
    expect_magic(r, SNAPSHOT_MAGIC)?;
    let n = get_u32(r)? as usize;
    let length = get_f64(r)?;
    let grid = FlowGrid::new(n, length)?;
    let raw = get_f64s(r, 4 * grid.len())?;
    let mut a = Vec::with_capacity(grid.len());
    let mut b = Vec::with_capacity(grid.len());
    for ch in raw.chunks_exact(4) {
        a.push(Complex64::new(ch[0], ch[1]));
        b.push(Complex64::new(ch[2], ch[3]));
    }
    Ok((grid, VelocityField::from_spectral_unchecked([a, b])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::leray_project;

    #[test]
    fn round_trip_bit_exact() {
        let g = FlowGrid::new(16, 3.5).unwrap();
        let phys: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let mut a = g.to_spectral(&phys);
        g.mask(&mut a);
        let b: Vec<Complex64> = a.iter().map(|v| v * 0.5).collect();
        let u = leray_project(&g, [a, b]);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &g, &u).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 8 + 32 * g.len());
        let (g2, u2) = read_snapshot(&mut buf.as_slice()).unwrap();
        assert_eq!(g2, g);
        assert_eq!(u2, u);
    }
}
