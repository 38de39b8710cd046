use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::model::StateSpace;
use crate::error::{Error, Result};

/// Parses a real Matrix Market file in `coordinate` or `array` format
/// (`general` or `symmetric`).
pub fn parse_matrix_market(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let h: Vec<String> = header
        .split_whitespace()
        .map(|s| s.to_ascii_lowercase())
        .collect();
    if h.len() < 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(Error::Parse {
            line: 1,
            msg: "missing %%MatrixMarket matrix header".into(),
        });
    }
    let coordinate = match h[2].as_str() {
        "coordinate" => true,
        "array" => false,
        other => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unsupported format {other}"),
            })
        }
    };
    if !matches!(h[3].as_str(), "real" | "integer" | "double") {
        return Err(Error::Parse {
            line: 1,
            msg: format!("unsupported field {}", h[3]),
        });
    }
    let symmetric = match h[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unsupported symmetry {other}"),
            })
        }
    };

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (size_line, size) = data.next().ok_or(Error::Parse {
        line: 2,
        msg: "missing size line".into(),
    })?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|s| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                line: size_line + 1,
                msg: e.to_string(),
            })
        })
        .collect::<Result<_>>()?;
    let parse_f = |s: &str, line: usize| {
        s.parse::<f64>().map_err(|e| Error::Parse {
            line: line + 1,
            msg: format!("{s}: {e}"),
        })
    };

    if coordinate {
        if dims.len() != 3 {
            return Err(Error::Parse {
                line: size_line + 1,
                msg: "expected rows cols nnz".into(),
            });
        }
        let (m, n, nnz) = (dims[0], dims[1], dims[2]);
        let mut out = DMatrix::zeros(m, n);
        let mut count = 0;
        for (ln, l) in data {
            let t: Vec<&str> = l.split_whitespace().collect();
            if t.len() < 3 {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: "expected row col value".into(),
                });
            }
            let i: usize = t[0].parse().map_err(|_| Error::Parse {
                line: ln + 1,
                msg: "bad row index".into(),
            })?;
            let j: usize = t[1].parse().map_err(|_| Error::Parse {
                line: ln + 1,
                msg: "bad column index".into(),
            })?;
            if i == 0 || j == 0 || i > m || j > n {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: format!("index ({i}, {j}) out of range"),
                });
            }
            let v = parse_f(t[2], ln)?;
            out[(i - 1, j - 1)] += v;
            if symmetric && i != j {
                out[(j - 1, i - 1)] += v;
            }
            count += 1;
        }
        if count != nnz {
            return Err(Error::Parse {
                line: size_line + 1,
                msg: format!("expected {nnz} entries, found {count}"),
            });
        }
        Ok(out)
    } else {
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: size_line + 1,
                msg: "expected rows cols".into(),
            });
        }
        let (m, n) = (dims[0], dims[1]);
        let mut vals = Vec::new();
        let mut last_line = size_line;
        for (ln, l) in data {
            last_line = ln;
            for tok in l.split_whitespace() {
                vals.push(parse_f(tok, ln)?);
            }
        }
        let mut out = DMatrix::zeros(m, n);
        if symmetric {
            let mut it = vals.into_iter();
            for j in 0..n {
                for i in j..m {
                    let v = it.next().ok_or(Error::Parse {
                        line: last_line + 1,
                        msg: "too few entries".into(),
                    })?;
                    out[(i, j)] = v;
                    out[(j, i)] = v;
                }
            }
        } else {
            if vals.len() != m * n {
                return Err(Error::Parse {
                    line: last_line + 1,
                    msg: format!("expected {} entries, found {}", m * n, vals.len()),
                });
            }
            out = DMatrix::from_column_slice(m, n, &vals);
        }
        Ok(out)
    }
}

pub fn read_matrix_market(path: &Path) -> Result<DMatrix<f64>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_market(&text)
}

/// Column `k` of `m` if it has `n` rows, otherwise row `k` if it has `n` columns.
fn pick_vector(m: &DMatrix<f64>, n: usize, k: usize, what: &str) -> Result<DVector<f64>> {
    if m.nrows() == n && k < m.ncols() {
        Ok(m.column(k).into_owned())
    } else if m.ncols() == n && k < m.nrows() {
        Ok(m.row(k).transpose())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} is {}x{}, incompatible with state dimension {n}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Loads a SISO state-space model; `input` and `output` select one channel of
/// multi-input / multi-output `B` and `C`.
pub fn load_state_space(
    a: &Path,
    b: &Path,
    c: &Path,
    e: Option<&Path>,
    input: usize,
    output: usize,
) -> Result<StateSpace> {
    let am = read_matrix_market(a)?;
    let n = am.nrows();
    let bv = pick_vector(&read_matrix_market(b)?, n, input, "B")?;
    let cv = pick_vector(&read_matrix_market(c)?, n, output, "C")?;
    let em = e.map(read_matrix_market).transpose()?;
    StateSpace::new(am, bv, cv, em)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_general() {
        let m = parse_matrix_market("%%MatrixMarket matrix coordinate real general\n% comment\n2 2 3\n1 1 -1.0\n2 2 -2\n1 2 0.5\n").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, 0.0, -2.0]));
    }

    #[test]
    fn coordinate_symmetric_and_array() {
        let m = parse_matrix_market(
            "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n2 1 3\n",
        )
        .unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 0.0]));
        let v = parse_matrix_market("%%MatrixMarket matrix array real general\n3 1\n1\n2\n3\n")
            .unwrap();
        assert_eq!(v, DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e =
            parse_matrix_market("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 abc\n")
                .unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e:?}");
        assert!(matches!(
            parse_matrix_market("hello"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        let e = read_matrix_market(Path::new("/nonexistent/a.mtx")).unwrap_err();
        assert!(matches!(e, Error::Io(ref s) if s.contains("/nonexistent/a.mtx")));
    }
}
