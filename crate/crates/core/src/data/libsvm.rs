use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Dense features with {0, 1} labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub features: Matrix,
    pub labels: Vec<f64>,
    /// Explicit `index:value` entries read from the source.
    pub stored_entries: usize,
}

fn parse_label(token: &str, line: usize) -> Result<f64> {
    let value: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad label `{token}`"),
    })?;
    if value == 1.0 {
        Ok(1.0)
    } else if value == -1.0 || value == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::Parse {
            line,
            message: format!("unknown label value `{token}`"),
        })
    }
}

/// Parses `<label> <index>:<value> ...` lines with 1-based, strictly
/// increasing indices. Labels `-1`/`0` map to 0 and `+1`/`1` to 1. Blank
/// lines and `#` comments are skipped. The width is the largest index seen
/// unless `width` is given.
pub fn parse_libsvm<R: BufRead>(reader: R, width: Option<usize>) -> Result<LabeledData> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;
    let mut stored_entries = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = parse_label(tokens.next().expect("nonempty line"), lineno)?;
        let mut row = Vec::new();
        let mut last = 0usize;
        for token in tokens {
            let (idx, val) = token.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                message: format!("malformed token `{token}`"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad index in `{token}`"),
            })?;
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("bad value in `{token}`"),
            })?;
            if idx == 0 || idx <= last {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("index {idx} is not 1-based and strictly increasing"),
                });
            }
            last = idx;
            row.push((idx - 1, val));
        }
        max_index = max_index.max(last);
        stored_entries += row.len();
        rows.push(row);
        labels.push(label);
    }

    let d = match width {
        Some(w) if w < max_index => {
            return Err(Error::Parse {
                line: 0,
                message: format!("feature index {max_index} exceeds requested width {w}"),
            })
        }
        Some(w) => w,
        None => max_index,
    };
    let mut features = Matrix::zeros(rows.len(), d);
    for (i, row) in rows.iter().enumerate() {
        let dense = features.row_mut(i);
        for &(j, v) in row {
            dense[j] = v;
        }
    }
    Ok(LabeledData {
        features,
        labels,
        stored_entries,
    })
}

pub fn read_libsvm_file(path: &Path, width: Option<usize>) -> Result<LabeledData> {
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    parse_libsvm(std::io::BufReader::new(file), width)
}

/// LibSVM text with `+1`/`-1` labels and only the nonzero entries.
pub fn format_libsvm(data: &LabeledData) -> String {
    let mut out = String::new();
    for (row, &label) in data.features.row_iter().zip(&data.labels) {
        out.push_str(if label == 1.0 { "+1" } else { "-1" });
        for (j, v) in row.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            let _ = write!(out, " {}:{}", j + 1, v);
        }
        out.push('\n');
    }
    out
}
