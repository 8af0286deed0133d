use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{CsrMatrix, Triplet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

/// Reads a coordinate Matrix Market file into CSR form.
///
/// Symmetric and skew-symmetric storage is expanded to the full pattern and
/// pattern files get unit values.
pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_matrix_market(BufReader::new(file), path)
}

/// Parses Matrix Market text from any reader; `origin` is only used in
/// error messages.
pub fn parse_matrix_market<R: BufRead>(reader: R, origin: &Path) -> Result<CsrMatrix> {
    let perr = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| perr(1, "empty file".into()))?;
    let header = header?;
    let tokens: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" {
        return Err(perr(1, "missing %%MatrixMarket header".into()));
    }
    if tokens[1] != "matrix" {
        return Err(Error::UnsupportedFormat(format!("object '{}'", tokens[1])));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::UnsupportedFormat(format!("storage '{}'", tokens[2])));
    }
    let field = match tokens[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" => Field::Pattern,
        other => return Err(Error::UnsupportedFormat(format!("field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(Error::UnsupportedFormat(format!("symmetry '{other}'"))),
    };

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    let mut read = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let s = line.trim();
        if s.is_empty() || s.starts_with('%') {
            continue;
        }
        let mut it = s.split_whitespace();
        let mut next_usize = |what: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| perr(lineno, format!("missing {what}")))?
                .parse::<usize>()
                .map_err(|e| perr(lineno, format!("bad {what}: {e}")))
        };
        match size {
            None => {
                let rows = next_usize("row count")?;
                let cols = next_usize("column count")?;
                let nnz = next_usize("entry count")?;
                if rows != cols {
                    return Err(Error::NonSquare { rows, cols });
                }
                if rows == 0 {
                    return Err(Error::EmptyMatrix);
                }
                let mult = if symmetry == Symmetry::General { 1 } else { 2 };
                triplets.reserve(nnz * mult);
                size = Some((rows, cols, nnz));
            }
            Some((n, _, nnz)) => {
                let i = next_usize("row index")?;
                let j = next_usize("column index")?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(perr(lineno, format!("index ({i}, {j}) outside 1..={n}")));
                }
                let value = match field {
                    Field::Pattern => 1.0,
                    Field::Real | Field::Integer => {
                        let tok = it
                            .next()
                            .ok_or_else(|| perr(lineno, "missing value".into()))?;
                        tok.parse::<f64>()
                            .map_err(|e| perr(lineno, format!("bad value '{tok}': {e}")))?
                    }
                };
                let (r, c) = (i - 1, j - 1);
                triplets.push(Triplet::new(r, c, value));
                if r != c {
                    match symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => triplets.push(Triplet::new(c, r, value)),
                        Symmetry::SkewSymmetric => triplets.push(Triplet::new(c, r, -value)),
                    }
                }
                read += 1;
                if read > nnz {
                    return Err(perr(lineno, format!("more than the declared {nnz} entries")));
                }
            }
        }
    }
    let (n, _, nnz) = size.ok_or_else(|| perr(1, "missing size line".into()))?;
    if read != nnz {
        return Err(perr(0, format!("expected {nnz} entries, found {read}")));
    }
    CsrMatrix::from_triplets(n, &triplets)
}
