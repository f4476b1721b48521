use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{contract, Error, Result};
use crate::linalg::{DenseVector, SparseMatrix};

/// Parses LIBSVM text: `label idx:val idx:val ...` with 1-based, strictly
/// increasing indices. Blank lines and `#` comments are skipped. The number of
/// columns is the largest index seen.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<(SparseMatrix, DenseVector)> {
    parse_libsvm_with_dim(reader, None)
}

/// Like [`parse_libsvm`], but widens the matrix to at least `min_cols` columns.
pub fn parse_libsvm_with_dim<R: BufRead>(
    reader: R,
    min_cols: Option<usize>,
) -> Result<(SparseMatrix, DenseVector)> {
    let mut row_ptr = vec![0usize];
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut max_col = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = content.split_ascii_whitespace();
        let Some(label) = tokens.next() else {
            continue;
        };
        let label: f64 = label.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad label {label:?}"),
        })?;
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected idx:val, got {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature index {idx:?}"),
            })?;
            let val: f64 = val.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad feature value {val:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based".into(),
                });
            }
            if idx <= prev {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("feature index {idx} not greater than previous {prev}"),
                });
            }
            prev = idx;
            max_col = max_col.max(idx);
            col_idx.push(idx - 1);
            values.push(val);
        }
        labels.push(label);
        row_ptr.push(col_idx.len());
    }

    let n_cols = max_col.max(min_cols.unwrap_or(0));
    let n_rows = labels.len();
    let a = SparseMatrix::new(n_rows, n_cols, row_ptr, col_idx, values)?;
    Ok((a, labels.into()))
}

/// Loads a LIBSVM file, transparently gunzipping it when it starts with `1f 8b`.
pub fn load_libsvm(path: &Path, min_cols: Option<usize>) -> Result<(SparseMatrix, DenseVector)> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let got = read_prefix(&mut file, &mut magic)?;
    let file = File::open(path)?;
    if got == 2 && magic == [0x1f, 0x8b] {
        parse_libsvm_with_dim(BufReader::new(GzDecoder::new(file)), min_cols)
    } else {
        parse_libsvm_with_dim(BufReader::new(file), min_cols)
    }
}

fn read_prefix(r: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        let k = r.read(&mut buf[filled..])?;
        if k == 0 {
            break;
        }
        filled += k;
    }
    Ok(filled)
}

/// Writes LIBSVM text with 17 significant digits, so parsing it back is exact.
pub fn write_libsvm<W: Write>(mut w: W, a: &SparseMatrix, b: &[f64]) -> Result<()> {
    contract!(a.n_rows() == b.len(), "label count {} != rows {}", b.len(), a.n_rows());
    for (i, label) in b.iter().enumerate() {
        write!(w, "{}", fmt17(*label))?;
        let (cols, vals) = a.row(i);
        for (c, v) in cols.iter().zip(vals) {
            write!(w, " {}:{}", c + 1, fmt17(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn serialize_libsvm(a: &SparseMatrix, b: &[f64]) -> Result<String> {
    let mut buf = Vec::new();
    write_libsvm(&mut buf, a, b)?;
    Ok(String::from_utf8(buf).expect("ascii output"))
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
