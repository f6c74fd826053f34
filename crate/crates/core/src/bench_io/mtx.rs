//! Matrix Market reader and writer for real dense and coordinate matrices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::linalg::Mat;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Array,
    Coordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<Mat> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_market(&text, &path.display().to_string())
}

/// Parse Matrix Market text; `origin` labels parse errors.
pub fn parse_matrix_market(text: &str, origin: &str) -> Result<Mat> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (hline, header) = lines.next().ok_or_else(|| err(1, "empty file".into()))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(err(hline, format!("bad header `{header}`")));
    }
    let layout = match tokens[2].as_str() {
        "array" => Layout::Array,
        "coordinate" => Layout::Coordinate,
        other => return Err(err(hline, format!("unsupported format `{other}`"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(err(hline, format!("unsupported field `{other}`"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        other => return Err(err(hline, format!("unsupported symmetry `{other}`"))),
    };

    let mut data = lines.filter(|(_, l)| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('%')
    });
    let (sline, size) = data.next().ok_or_else(|| err(hline, "missing size line".into()))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| err(sline, format!("bad size line: {e}")))?;
    let expected = if layout == Layout::Array { 2 } else { 3 };
    if dims.len() != expected {
        return Err(err(sline, format!("size line needs {expected} integers")));
    }
    let (rows, cols) = (dims[0], dims[1]);
    if rows == 0 || cols == 0 {
        return Err(err(sline, "matrix dimensions must be positive".into()));
    }
    if symmetry != Symmetry::General && rows != cols {
        return Err(err(sline, "symmetric storage needs a square matrix".into()));
    }

    let parse_value = |line: usize, t: &str| -> Result<f64> {
        let v: f64 = t.parse().map_err(|_| err(line, format!("bad number `{t}`")))?;
        if !v.is_finite() {
            return Err(err(line, format!("non-finite entry `{t}`")));
        }
        Ok(v)
    };

    let mut m = Mat::zeros(rows, cols);
    match layout {
        Layout::Array => {
            // Column-major; symmetric variants store the lower triangle only.
            let positions: Vec<(usize, usize)> = match symmetry {
                Symmetry::General => (0..cols).flat_map(|j| (0..rows).map(move |i| (i, j))).collect(),
                Symmetry::Symmetric => (0..cols).flat_map(|j| (j..rows).map(move |i| (i, j))).collect(),
                Symmetry::SkewSymmetric => (0..cols).flat_map(|j| (j + 1..rows).map(move |i| (i, j))).collect(),
            };
            let mut count = 0;
            let mut last = sline;
            for (line, l) in data {
                last = line;
                for t in l.split_whitespace() {
                    let &(i, j) = positions
                        .get(count)
                        .ok_or_else(|| err(line, "more entries than the size line allows".into()))?;
                    let v = parse_value(line, t)?;
                    m[(i, j)] = v;
                    match symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => m[(j, i)] = v,
                        Symmetry::SkewSymmetric => m[(j, i)] = -v,
                    }
                    count += 1;
                }
            }
            if count != positions.len() {
                return Err(err(last, format!("expected {} entries, found {count}", positions.len())));
            }
        }
        Layout::Coordinate => {
            let nnz = dims[2];
            let mut count = 0;
            let mut last = sline;
            for (line, l) in data {
                last = line;
                let t: Vec<&str> = l.split_whitespace().collect();
                if t.len() != 3 {
                    return Err(err(line, "coordinate entry needs `row col value`".into()));
                }
                let idx = |s: &str, bound: usize| -> Result<usize> {
                    let k: usize = s.parse().map_err(|_| err(line, format!("bad index `{s}`")))?;
                    if k == 0 || k > bound {
                        return Err(err(line, format!("index {k} out of range 1..={bound}")));
                    }
                    Ok(k - 1)
                };
                let (i, j) = (idx(t[0], rows)?, idx(t[1], cols)?);
                let v = parse_value(line, t[2])?;
                m[(i, j)] += v;
                if i != j {
                    match symmetry {
                        Symmetry::General => {}
                        Symmetry::Symmetric => m[(j, i)] += v,
                        Symmetry::SkewSymmetric => m[(j, i)] -= v,
                    }
                }
                count += 1;
            }
            if count != nnz {
                return Err(err(last, format!("expected {nnz} entries, found {count}")));
            }
        }
    }
    Ok(m)
}

/// Dense `array real general` text with 17 significant digits per entry.
pub fn format_matrix_market(m: &Mat) -> String {
    let mut out = String::with_capacity(24 * m.len() + 64);
    out.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for v in m.iter() {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

pub fn write_matrix_market(path: impl AsRef<Path>, m: &Mat) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix_market(m)).map_err(|e| Error::io(path, e))
}
