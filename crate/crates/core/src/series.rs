//! Norm time series in CSV form:
//! `t,u_l2,u_h1,psi_l2,psi_h1x,dissR,lowfreq_Cd<c>...,lp<p>...`.

use std::io::{Read, Write};

use crate::coupled::SeriesRow;
use crate::error::{FeneError, Result};

const FIXED: [&str; 6] = ["t", "u_l2", "u_h1", "psi_l2", "psi_h1x", "dissR"];

/// Column-oriented series as read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

fn csv_err(e: csv::Error) -> FeneError {
    FeneError::Format(e.to_string())
}

pub fn header(c_d: &[f64], lp: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    h.extend(c_d.iter().map(|c| format!("lowfreq_Cd{c}")));
    h.extend(lp.iter().map(|p| format!("lp{p}")));
    h
}

pub fn write_series(w: impl Write, c_d: &[f64], lp: &[f64], rows: &[SeriesRow]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header(c_d, lp)).map_err(csv_err)?;
    for r in rows {
        if r.lowfreq.len() != c_d.len() || r.lp.len() != lp.len() {
            return Err(FeneError::DimensionMismatch {
                expected: c_d.len() + lp.len(),
                got: r.lowfreq.len() + r.lp.len(),
            });
        }
        let mut rec = vec![r.t, r.u_l2, r.u_h1, r.psi_l2, r.psi_h1x, r.diss_r];
        rec.extend(&r.lowfreq);
        rec.extend(&r.lp);
        wr.write_record(rec.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_series(r: impl Read) -> Result<SeriesTable> {
    let mut rd = csv::Reader::from_reader(r);
    let headers: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if headers.len() < FIXED.len() || headers.iter().zip(FIXED).any(|(a, b)| a != b) {
        return Err(FeneError::Format(format!("unexpected series header {headers:?}")));
    }
    let mut columns = vec![Vec::new(); headers.len()];
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        for (c, field) in columns.iter_mut().zip(rec.iter()) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| FeneError::Format(format!("bad number {field:?}: {e}")))?;
            c.push(v);
        }
    }
    Ok(SeriesTable { headers, columns })
}

impl SeriesTable {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers.iter().position(|h| h == name).map(|i| self.columns[i].as_slice())
    }

    pub fn times(&self) -> &[f64] {
        &self.columns[0]
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(C_d, column)` for every low-frequency column.
    pub fn lowfreq_columns(&self) -> Vec<(f64, &[f64])> {
        self.suffixed("lowfreq_Cd")
    }

    /// `(p, column)` for every `L^p` column.
    pub fn lp_columns(&self) -> Vec<(f64, &[f64])> {
        self.suffixed("lp")
    }

    fn suffixed(&self, prefix: &str) -> Vec<(f64, &[f64])> {
        self.headers
            .iter()
            .enumerate()
            .filter_map(|(i, h)| {
                let v: f64 = h.strip_prefix(prefix)?.parse().ok()?;
                Some((v, self.columns[i].as_slice()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rows: Vec<SeriesRow> = (0..3)
            .map(|i| SeriesRow {
                t: 0.1 * i as f64,
                u_l2: 1.0 / 3.0,
                u_h1: 2.5e-7,
                psi_l2: 0.0,
                psi_h1x: 1e300,
                diss_r: -0.0,
                lowfreq: vec![1.5, 2.0],
                lp: vec![0.7],
            })
            .collect();
        let mut buf = Vec::new();
        write_series(&mut buf, &[3.0, 4.5], &[4.0], &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,u_l2,u_h1,psi_l2,psi_h1x,dissR,lowfreq_Cd3,lowfreq_Cd4.5,lp4\n"));
        let tab = read_series(buf.as_slice()).unwrap();
        assert_eq!(tab.len(), 3);
        assert_eq!(tab.column("u_l2").unwrap()[1], 1.0 / 3.0);
        assert_eq!(tab.column("psi_h1x").unwrap()[2], 1e300);
        assert_eq!(tab.lowfreq_columns()[1].0, 4.5);
        assert_eq!(tab.lp_columns(), vec![(4.0, &[0.7, 0.7, 0.7][..])]);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_series("a,b\n1,2\n".as_bytes()).is_err());
    }
}
