//! Matrix Market "coordinate real" reader and writer.
//!
//! Supports the `general` and `symmetric` symmetry kinds with 1-based
//! indices and `%` comment lines. Symmetric files are expanded to full
//! storage, duplicate entries are summed, and rows come out sorted.

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

pub fn read_matrix_market<P: AsRef<Path>>(path: P) -> Result<CsrMatrix<f64>> {
    let file = File::open(path.as_ref())?;
    read_matrix_market_from(BufReader::new(file))
}

pub fn read_matrix_market_from<R: BufRead>(reader: R) -> Result<CsrMatrix<f64>> {
    let mut lines = reader.lines().enumerate();

    let (line_no, header) = match lines.next() {
        Some((i, l)) => (i + 1, l?),
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty file".into(),
            })
        }
    };
    let sym = parse_header(line_no, &header)?;

    // size line: first non-comment line after the header
    let (mut n_rows, mut n_cols) = (0usize, 0usize);
    let mut size_seen = false;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        if !size_seen {
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("size line must have 3 fields, found {}", fields.len()),
                });
            }
            n_rows = parse_usize(line_no, fields[0])?;
            n_cols = parse_usize(line_no, fields[1])?;
            let n_entries = parse_usize(line_no, fields[2])?;
            triplets.reserve(if sym == Symmetry::Symmetric {
                2 * n_entries
            } else {
                n_entries
            });
            size_seen = true;
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("entry must have 3 fields, found {}", fields.len()),
            });
        }
        let r = parse_usize(line_no, fields[0])?;
        let c = parse_usize(line_no, fields[1])?;
        let v: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("cannot parse value '{}'", fields[2]),
        })?;
        if r < 1 || r > n_rows || c < 1 || c > n_cols {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("index ({r}, {c}) out of range for {n_rows}x{n_cols}"),
            });
        }
        triplets.push((r - 1, c - 1, v));
        if sym == Symmetry::Symmetric && r != c {
            triplets.push((c - 1, r - 1, v));
        }
    }
    if !size_seen {
        return Err(Error::Parse {
            line: 0,
            msg: "missing size line".into(),
        });
    }
    CsrMatrix::from_triplets(n_rows, n_cols, &triplets)
}

fn parse_header(line_no: usize, header: &str) -> Result<Symmetry> {
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" {
        return Err(Error::Parse {
            line: line_no,
            msg: "expected '%%MatrixMarket matrix coordinate real <symmetry>' header".into(),
        });
    }
    if fields[1] != "matrix" || fields[2] != "coordinate" {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("unsupported object/format '{} {}'", fields[1], fields[2]),
        });
    }
    if fields[3] != "real" {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("unsupported field type '{}', only 'real' is accepted", fields[3]),
        });
    }
    match fields[4].as_str() {
        "general" => Ok(Symmetry::General),
        "symmetric" => Ok(Symmetry::Symmetric),
        other => Err(Error::Parse {
            line: line_no,
            msg: format!("unsupported symmetry '{other}'"),
        }),
    }
}

fn parse_usize(line_no: usize, s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse {
        line: line_no,
        msg: format!("cannot parse integer '{s}'"),
    })
}

/// Write a matrix in "coordinate real general" form with full precision.
pub fn write_matrix_market<P: AsRef<Path>>(a: &CsrMatrix<f64>, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz())?;
    for i in 0..a.n_rows() {
        for k in a.row_ptr()[i]..a.row_ptr()[i + 1] {
            writeln!(w, "{} {} {:.16e}", i + 1, a.col_idx()[k] + 1, a.values()[k])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn read_str(s: &str) -> Result<CsrMatrix<f64>> {
        read_matrix_market_from(Cursor::new(s))
    }

    #[test]
    fn reads_diagonal() {
        let a = read_str(
            "%%MatrixMarket matrix coordinate real general\n% comment\n2 2 2\n1 1 2.0\n2 2 3.0\n",
        )
        .unwrap();
        assert_eq!(a.get(0, 0), 2.0);
        assert_eq!(a.get(1, 1), 3.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn expands_symmetric() {
        let a = read_str(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n2 1 5.0\n",
        )
        .unwrap();
        assert_eq!(a.get(1, 0), 5.0);
        assert_eq!(a.get(0, 1), 5.0);
    }

    #[test]
    fn sums_duplicates() {
        let a = read_str(
            "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n1 1 2.0\n",
        )
        .unwrap();
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.nnz(), 1);
    }

    #[test]
    fn rejects_pattern_field() {
        let err = read_str("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 1\n")
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn rejects_complex_and_skew() {
        assert!(read_str("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n")
            .is_err());
        assert!(
            read_str("%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 1.0\n")
                .is_err()
        );
        assert!(read_str("%%MatrixMarket matrix coordinate real hermitian\n2 2 1\n2 1 1.0\n")
            .is_err());
    }

    #[test]
    fn rejects_bad_header_with_line_number() {
        let err = read_str("%%NotMatrixMarket\n1 1 1\n1 1 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = read_str("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n")
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }
}
