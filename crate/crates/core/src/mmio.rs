//! MatrixMarket coordinate files (`real general` only).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

const HEADER: &str = "%%MatrixMarket matrix coordinate real general";

fn mm_err(line: usize, msg: impl Into<String>) -> Error {
    Error::MatrixMarket {
        line,
        msg: msg.into(),
    }
}

/// Parses MatrixMarket text. Duplicate entries are summed.
pub fn parse_matrix_market(text: &str) -> Result<SparseMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| mm_err(1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(mm_err(1, format!("not a MatrixMarket matrix header: {header:?}")));
    }
    if fields[2] != "coordinate" {
        return Err(mm_err(1, format!("only coordinate format is supported, got {}", fields[2])));
    }
    if fields[3] != "real" {
        return Err(mm_err(1, format!("only real values are supported, got {}", fields[3])));
    }
    if fields[4] != "general" {
        return Err(mm_err(
            1,
            format!("only general storage is supported, got {} (expand the matrix first)", fields[4]),
        ));
    }

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = data.next().ok_or_else(|| mm_err(2, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| mm_err(size_line, format!("bad size field {t:?}"))))
        .collect::<Result<_>>()?;
    let [nrows, ncols, nnz] = dims[..] else {
        return Err(mm_err(size_line, "size line needs rows, columns and entry count"));
    };

    let mut triplets = Vec::with_capacity(nnz);
    for (line, entry) in data {
        if triplets.len() == nnz {
            return Err(mm_err(line, format!("more than the declared {nnz} entries")));
        }
        let tokens: Vec<&str> = entry.split_whitespace().collect();
        let [r, c, v] = tokens[..] else {
            return Err(mm_err(line, "entry needs row, column and value"));
        };
        let index = |t: &str, bound: usize, what: &str| -> Result<usize> {
            let i: usize = t
                .parse()
                .map_err(|_| mm_err(line, format!("bad {what} index {t:?}")))?;
            if i == 0 || i > bound {
                return Err(mm_err(line, format!("{what} index {i} outside 1..={bound}")));
            }
            Ok(i - 1)
        };
        let value: f64 = v
            .parse()
            .map_err(|_| mm_err(line, format!("bad value {v:?}")))?;
        triplets.push((index(r, nrows, "row")?, index(c, ncols, "column")?, value));
    }
    if triplets.len() != nnz {
        return Err(mm_err(
            size_line,
            format!("declared {nnz} entries, found {}", triplets.len()),
        ));
    }
    SparseMatrix::from_triplets(nrows, ncols, &triplets)
}

/// Renders every stored entry, 1-based, with 17 significant digits.
pub fn format_matrix_market(m: &SparseMatrix) -> String {
    let mut out = String::with_capacity(32 * m.nnz() + 64);
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "{} {} {}", m.nrows(), m.ncols(), m.nnz());
    for i in 0..m.nrows() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            let _ = writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v);
        }
    }
    out
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SparseMatrix> {
    parse_matrix_market(&fs::read_to_string(path)?)
}

pub fn write_matrix_market(m: &SparseMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_matrix_market(m))?;
    Ok(())
}
