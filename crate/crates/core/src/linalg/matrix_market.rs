//! MatrixMarket coordinate format (1-based indices).
//!
//! Writing always emits `%%MatrixMarket matrix coordinate real general`.
//! Reading accepts `real` or `integer` fields with `general` or `symmetric`
//! storage; symmetric files are expanded to both triangles.

use std::io::{BufRead, Write};

use super::sparse::SparseMatrix;
use crate::error::{Error, Result};

pub const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

pub fn write_matrix_market<W: Write>(m: &SparseMatrix, mut out: W) -> Result<()> {
    writeln!(out, "{HEADER}")?;
    writeln!(out, "{} {} {}", m.n_rows(), m.n_cols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub fn to_matrix_market_string(m: &SparseMatrix) -> String {
    let mut buf = Vec::new();
    write_matrix_market(m, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("ascii output")
}

pub fn read_matrix_market<R: BufRead>(input: R) -> Result<SparseMatrix> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty input"))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "missing %%MatrixMarket matrix banner"));
    }
    if tokens[2] != "coordinate" {
        return Err(parse_err(1, "only coordinate format is supported"));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(parse_err(1, "field must be real or integer"));
    }
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        _ => return Err(parse_err(1, "symmetry must be general or symmetric")),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "size line needs rows, cols, nnz"));
                }
                let r = parse_usize(fields[0], lineno)?;
                let c = parse_usize(fields[1], lineno)?;
                let nnz = parse_usize(fields[2], lineno)?;
                let cap = r.checked_mul(c).ok_or_else(|| parse_err(lineno, "size overflow"))?;
                if nnz > cap {
                    return Err(parse_err(lineno, "more entries than matrix positions"));
                }
                size = Some((r, c, nnz));
                triplets.reserve(nnz.min(1 << 20));
            }
            Some((r, c, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(lineno, "entry needs row, col, value"));
                }
                let i = parse_usize(fields[0], lineno)?;
                let j = parse_usize(fields[1], lineno)?;
                if i == 0 || j == 0 || i > r || j > c {
                    return Err(parse_err(lineno, "index out of range"));
                }
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(lineno, "value is not a number"))?;
                if !v.is_finite() {
                    return Err(parse_err(lineno, "non-finite value"));
                }
                triplets.push((i - 1, j - 1, v));
                if symmetric && i != j {
                    triplets.push((j - 1, i - 1, v));
                }
            }
        }
    }
    let (r, c, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    let stored = if symmetric {
        triplets.iter().filter(|(i, j, _)| i <= j).count()
    } else {
        triplets.len()
    };
    if stored != nnz {
        return Err(parse_err(0, &format!("expected {nnz} entries, found {stored}")));
    }
    SparseMatrix::from_triplets(r, c, &triplets)
        .map_err(|e| Error::Parse { line: 0, message: e.to_string() })
}

pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix> {
    read_matrix_market(text.as_bytes())
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.parse().map_err(|_| parse_err(line, "expected a nonnegative integer"))
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse { line, message: message.to_string() }
}
