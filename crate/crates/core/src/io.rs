//! Flat-file formats.
//!
//! Observation files: a header line `m n`, then one line per observed entry
//! `i j value` with 1-based indices, in any order; duplicate positions are
//! an error. Dense matrix files: a header line `m n`, then m rows of n
//! whitespace-separated values. Values are written with 17 significant
//! digits so files round-trip `f64` exactly.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::objective::Observations;
use crate::scalar::Real;

fn parse_header(line: &str, line_number: usize) -> Result<(usize, usize)> {
    let mut tokens = line.split_whitespace();
    let m = parse_token::<usize>(tokens.next(), line_number, "row count")?;
    let n = parse_token::<usize>(tokens.next(), line_number, "column count")?;
    if tokens.next().is_some() {
        return Err(Error::Parse {
            line: line_number,
            message: "header must be exactly `m n`".into(),
        });
    }
    Ok((m, n))
}

fn parse_token<F: std::str::FromStr>(
    token: Option<&str>,
    line_number: usize,
    what: &str,
) -> Result<F> {
    let token = token.ok_or_else(|| Error::Parse {
        line: line_number,
        message: format!("missing {what}"),
    })?;
    token.parse().map_err(|_| Error::Parse {
        line: line_number,
        message: format!("cannot parse {what} from `{token}`"),
    })
}

/// Parses an observation file body.
pub fn parse_observations<T: Real>(text: &str) -> Result<Observations<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, line)| (k + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty());

    let (header_line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let (m, n) = parse_header(header, header_line)?;

    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut triplets = Vec::new();
    for (line_number, line) in lines {
        let mut tokens = line.split_whitespace();
        let i = parse_token::<usize>(tokens.next(), line_number, "row index")?;
        let j = parse_token::<usize>(tokens.next(), line_number, "column index")?;
        let value = parse_token::<f64>(tokens.next(), line_number, "value")?;
        if tokens.next().is_some() {
            return Err(Error::Parse {
                line: line_number,
                message: "expected exactly `i j value`".into(),
            });
        }
        if i == 0 || i > m {
            return Err(Error::Parse {
                line: line_number,
                message: format!("row index {i} outside [1, {m}]"),
            });
        }
        if j == 0 || j > n {
            return Err(Error::Parse {
                line: line_number,
                message: format!("column index {j} outside [1, {n}]"),
            });
        }
        if !seen.insert((i, j)) {
            return Err(Error::Parse {
                line: line_number,
                message: format!("duplicate entry ({i}, {j})"),
            });
        }
        triplets.push((i - 1, j - 1, T::from_f64_lossy(value)));
    }
    Observations::from_triplets(m, n, triplets)
}

/// Formats an observation set; inverse of [`parse_observations`].
pub fn format_observations<T: Real>(obs: &Observations<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", obs.m(), obs.n());
    let mut triplets = obs.triplets();
    triplets.sort_by_key(|&(i, j, _)| (i, j));
    for (i, j, value) in triplets {
        let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, value.to_f64_lossy());
    }
    out
}

pub fn read_observations<T: Real>(path: &Path) -> Result<Observations<T>> {
    parse_observations(&std::fs::read_to_string(path)?)
}

pub fn write_observations<T: Real>(path: &Path, obs: &Observations<T>) -> Result<()> {
    Ok(std::fs::write(path, format_observations(obs))?)
}

/// Parses a dense matrix file body.
pub fn parse_dense<T: Real>(text: &str) -> Result<DMatrix<T>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, line)| (k + 1, line.trim()))
        .filter(|(_, line)| !line.is_empty());
    let (header_line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file".into(),
    })?;
    let (m, n) = parse_header(header, header_line)?;

    let mut matrix = DMatrix::zeros(m, n);
    let mut row = 0;
    for (line_number, line) in lines {
        if row >= m {
            return Err(Error::Parse {
                line: line_number,
                message: format!("expected {m} rows, found more"),
            });
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != n {
            return Err(Error::Parse {
                line: line_number,
                message: format!(
                    "expected {n} values in row {}, found {}",
                    row + 1,
                    tokens.len()
                ),
            });
        }
        for (j, token) in tokens.iter().enumerate() {
            let value = parse_token::<f64>(Some(token), line_number, "matrix entry")?;
            matrix[(row, j)] = T::from_f64_lossy(value);
        }
        row += 1;
    }
    if row != m {
        return Err(Error::Parse {
            line: 0,
            message: format!("expected {m} rows, found {row}"),
        });
    }
    Ok(matrix)
}

/// Formats a dense matrix; inverse of [`parse_dense`].
pub fn format_dense<T: Real>(matrix: &DMatrix<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", matrix.nrows(), matrix.ncols());
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:.16e}", matrix[(i, j)].to_f64_lossy());
        }
        out.push('\n');
    }
    out
}

pub fn read_dense<T: Real>(path: &Path) -> Result<DMatrix<T>> {
    parse_dense(&std::fs::read_to_string(path)?)
}

pub fn write_dense<T: Real>(path: &Path, matrix: &DMatrix<T>) -> Result<()> {
    Ok(std::fs::write(path, format_dense(matrix))?)
}
