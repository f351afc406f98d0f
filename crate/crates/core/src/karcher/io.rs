//! Plain-text matrix files and residual-trace CSV export.
//!
//! Matrix format: the first non-blank, non-comment line holds the dimension
//! `d`; the next `d` lines hold whitespace-separated rows. Lines starting
//! with `#` are comments.
//!
//! ```text
//! # covariance A1
//! 2
//! 2.0 0.5
//! 0.5 1.0
//! ```

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::{KarcherSolveTrace, SpdMatrix};
use crate::error::{Error, Result};

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (line, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty matrix file".into() })?;
    let d: usize = header.parse().map_err(|_| Error::Parse {
        line,
        message: format!("expected dimension header, found `{header}`"),
    })?;
    if d == 0 {
        return Err(Error::Parse { line, message: "dimension must be at least 1".into() });
    }

    let mut entries = Vec::with_capacity(d * d);
    for row in 0..d {
        let (line, text) = lines.next().ok_or(Error::Parse {
            line,
            message: format!("expected {d} rows, found {row}"),
        })?;
        let before = entries.len();
        for tok in text.split_whitespace() {
            let x: f64 = tok.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid number `{tok}`"),
            })?;
            entries.push(x);
        }
        if entries.len() - before != d {
            return Err(Error::Parse {
                line,
                message: format!("row has {} entries, expected {d}", entries.len() - before),
            });
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(Error::Parse { line, message: "unexpected trailing content".into() });
    }
    Ok(DMatrix::from_row_slice(d, d, &entries))
}

pub fn parse_spd(text: &str) -> Result<SpdMatrix> {
    SpdMatrix::new(parse_matrix(text)?)
}

pub fn read_spd_file(path: impl AsRef<Path>) -> Result<SpdMatrix> {
    parse_spd(&std::fs::read_to_string(path)?)
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{}\n", m.nrows());
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

/// Writes `iteration,residual` rows.
pub fn write_trace_csv<W: Write>(trace: &KarcherSolveTrace, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["iteration", "residual"])?;
    for it in &trace.iterates {
        wtr.write_record([it.k.to_string(), format!("{:e}", it.residual)])?;
    }
    wtr.flush()?;
    Ok(())
}
