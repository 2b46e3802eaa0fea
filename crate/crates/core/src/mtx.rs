//! Matrix Market I/O.
//!
//! Sparse matrices use the `coordinate real general` format with 1-based
//! indices (duplicates are summed on read; `symmetric` files are expanded).
//! Dense vectors use the `array real general` format with one column.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

const COORD_HEADER: &str = "%%MatrixMarket matrix coordinate real general";
const ARRAY_HEADER: &str = "%%MatrixMarket matrix array real general";

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Data lines with their 1-based line numbers, comments and blanks removed.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'))
}

fn banner(text: &str, file: &str) -> Result<Vec<String>> {
    let first = text
        .lines()
        .next()
        .ok_or_else(|| parse_err(file, 1, "empty file"))?;
    let words: Vec<String> = first
        .split_whitespace()
        .map(|w| w.to_ascii_lowercase())
        .collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(file, 1, "missing %%MatrixMarket matrix banner"));
    }
    if words[3] != "real" && words[3] != "integer" {
        return Err(parse_err(
            file,
            1,
            format!("unsupported field type '{}'", words[3]),
        ));
    }
    Ok(words)
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, file: &str, line: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(file, line, "missing value"))?;
    tok.parse()
        .map_err(|_| parse_err(file, line, format!("cannot parse '{tok}'")))
}

pub fn parse_matrix(text: &str, file: &str) -> Result<CsrMatrix> {
    let words = banner(text, file)?;
    if words[2] != "coordinate" {
        return Err(parse_err(file, 1, "expected coordinate format"));
    }
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(parse_err(
                file,
                1,
                format!("unsupported symmetry '{other}'"),
            ))
        }
    };
    let mut lines = data_lines(text);
    let (ln, size) = lines
        .next()
        .ok_or_else(|| parse_err(file, 1, "missing size line"))?;
    let mut it = size.split_whitespace();
    let nrows: usize = parse_num(it.next(), file, ln)?;
    let ncols: usize = parse_num(it.next(), file, ln)?;
    let nnz: usize = parse_num(it.next(), file, ln)?;
    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    for (ln, l) in lines {
        let mut it = l.split_whitespace();
        let i: usize = parse_num(it.next(), file, ln)?;
        let j: usize = parse_num(it.next(), file, ln)?;
        let v: f64 = parse_num(it.next(), file, ln)?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(parse_err(file, ln, format!("index ({i},{j}) out of range")));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
    }
    let expected = if symmetric { triplets.len() } else { nnz };
    if triplets.len() != expected {
        return Err(parse_err(
            file,
            0,
            format!("expected {nnz} entries, found {}", triplets.len()),
        ));
    }
    CsrMatrix::from_triplets(nrows, ncols, &triplets)
}

pub fn format_matrix(a: &CsrMatrix) -> String {
    let mut s = String::with_capacity(32 * (a.nnz() + 2));
    s.push_str(COORD_HEADER);
    s.push('\n');
    let _ = writeln!(s, "{} {} {}", a.nrows(), a.ncols(), a.nnz());
    for (i, j, v) in a.triplets() {
        // `{:e}` prints the shortest representation that round-trips
        let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v);
    }
    s
}

pub fn parse_vector(text: &str, file: &str) -> Result<Vec<f64>> {
    let words = banner(text, file)?;
    let mut lines = data_lines(text);
    let (ln, size) = lines
        .next()
        .ok_or_else(|| parse_err(file, 1, "missing size line"))?;
    let mut it = size.split_whitespace();
    if words[2] == "array" {
        let nrows: usize = parse_num(it.next(), file, ln)?;
        let ncols: usize = parse_num(it.next(), file, ln)?;
        if ncols != 1 {
            return Err(parse_err(file, ln, "vector file must have one column"));
        }
        let vals = lines
            .map(|(ln, l)| parse_num::<f64>(l.split_whitespace().next(), file, ln))
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != nrows {
            return Err(parse_err(
                file,
                0,
                format!("expected {nrows} values, found {}", vals.len()),
            ));
        }
        Ok(vals)
    } else {
        let m = parse_matrix(text, file)?;
        if m.ncols() != 1 {
            return Err(parse_err(file, ln, "vector file must have one column"));
        }
        Ok((0..m.nrows()).map(|i| m.get(i, 0)).collect())
    }
}

pub fn format_vector(v: &[f64]) -> String {
    let mut s = String::with_capacity(24 * (v.len() + 2));
    s.push_str(ARRAY_HEADER);
    s.push('\n');
    let _ = writeln!(s, "{} 1", v.len());
    for x in v {
        let _ = writeln!(s, "{x:e}");
    }
    s
}

pub fn read_matrix(path: &Path) -> Result<CsrMatrix> {
    parse_matrix(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn write_matrix(path: &Path, a: &CsrMatrix) -> Result<()> {
    Ok(fs::write(path, format_matrix(a))?)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    parse_vector(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn write_vector(path: &Path, v: &[f64]) -> Result<()> {
    Ok(fs::write(path, format_vector(v))?)
}
