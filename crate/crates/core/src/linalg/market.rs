use std::io::{BufRead, Write};

use super::SparseMatrix;
use crate::error::{IcddError, Result};

pub fn write_matrix_market<W: Write>(a: &SparseMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for r in 0..a.nrows() {
        for (c, v) in a.row(r) {
            writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
        }
    }
    Ok(())
}

pub fn write_vector_market<W: Write>(v: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} 1", v.len())?;
    for x in v {
        writeln!(w, "{x:.17e}")?;
    }
    Ok(())
}

fn data_lines<R: BufRead>(r: R) -> Result<(String, Vec<String>)> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| IcddError::Parse("empty MatrixMarket file".into()))??;
    if !header.starts_with("%%MatrixMarket") {
        return Err(IcddError::Parse("missing %%MatrixMarket banner".into()));
    }
    let mut out = vec![];
    for l in lines {
        let l = l?;
        let t = l.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        out.push(t.to_string());
    }
    Ok((header.to_lowercase(), out))
}

fn parse<T: std::str::FromStr>(s: Option<&str>, what: &str) -> Result<T> {
    s.and_then(|x| x.parse().ok()).ok_or_else(|| IcddError::Parse(format!("bad {what}")))
}

pub fn read_matrix_market<R: BufRead>(r: R) -> Result<SparseMatrix> {
    let (header, lines) = data_lines(r)?;
    if !header.contains("coordinate") {
        return Err(IcddError::Parse("only coordinate matrices are supported".into()));
    }
    let symmetric = header.contains("symmetric");
    let mut it = lines.iter();
    let size = it.next().ok_or_else(|| IcddError::Parse("missing size line".into()))?;
    let mut f = size.split_whitespace();
    let nrows: usize = parse(f.next(), "row count")?;
    let ncols: usize = parse(f.next(), "column count")?;
    let nnz: usize = parse(f.next(), "entry count")?;
    let mut t = Vec::with_capacity(nnz);
    for l in it {
        let mut f = l.split_whitespace();
        let i: usize = parse(f.next(), "row index")?;
        let j: usize = parse(f.next(), "column index")?;
        let v: f64 = parse(f.next(), "value")?;
        if i == 0 || j == 0 {
            return Err(IcddError::Parse("indices are 1-based".into()));
        }
        t.push((i - 1, j - 1, v));
        if symmetric && i != j {
            t.push((j - 1, i - 1, v));
        }
    }
    if t.len() < nnz {
        return Err(IcddError::Parse(format!("expected {nnz} entries, found {}", t.len())));
    }
    SparseMatrix::from_triplets(nrows, ncols, &t)
}

pub fn read_vector_market<R: BufRead>(r: R) -> Result<Vec<f64>> {
    let (header, lines) = data_lines(r)?;
    if !header.contains("array") {
        return Err(IcddError::Parse("vectors use the array format".into()));
    }
    let mut it = lines.iter();
    let size = it.next().ok_or_else(|| IcddError::Parse("missing size line".into()))?;
    let mut f = size.split_whitespace();
    let n: usize = parse(f.next(), "length")?;
    let v: Result<Vec<f64>> = it.map(|l| parse(Some(l.as_str()), "value")).collect();
    let v = v?;
    if v.len() != n {
        return Err(IcddError::Parse(format!("expected {n} values, found {}", v.len())));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let a = SparseMatrix::from_dense(&[vec![1.5, 0.0], vec![-2.0, 1e-300]]);
        let mut buf = vec![];
        write_matrix_market(&a, &mut buf).unwrap();
        assert_eq!(read_matrix_market(&buf[..]).unwrap(), a);
        let v = vec![0.1, -3.0, 7e12];
        let mut buf = vec![];
        write_vector_market(&v, &mut buf).unwrap();
        assert_eq!(read_vector_market(&buf[..]).unwrap(), v);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_matrix_market(&b"hello\n1 1 1\n"[..]).is_err());
        assert!(read_matrix_market(&b"%%MatrixMarket matrix coordinate real general\n2 2 1\n0 1 1.0\n"[..]).is_err());
    }
}
