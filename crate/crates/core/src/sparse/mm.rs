//! Matrix Market coordinate format (real, general or symmetric), 1-based indices.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::csr::{SparseMatrix, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    General,
    /// Only the lower triangle is written; reading mirrors it.
    Symmetric,
}

pub fn write_matrix_market<T: Scalar, W: Write>(a: &SparseMatrix<T>, kind: MatrixKind, mut out: W) -> Result<()> {
    let label = match kind {
        MatrixKind::General => "general",
        MatrixKind::Symmetric => "symmetric",
    };
    let mut body = String::new();
    let mut count = 0usize;
    for i in 0..a.nrows() {
        let (c, v) = a.row(i);
        for (&j, &x) in c.iter().zip(v) {
            if kind == MatrixKind::Symmetric && j > i {
                continue;
            }
            writeln!(body, "{} {} {:.17e}", i + 1, j + 1, x.to_f64_lossy()).unwrap();
            count += 1;
        }
    }
    writeln!(out, "%%MatrixMarket matrix coordinate real {label}")?;
    writeln!(out, "{} {} {}", a.nrows(), a.ncols(), count)?;
    out.write_all(body.as_bytes())?;
    Ok(())
}

/// Writes a dense vector as a Matrix Market `array` (one column).
pub fn write_vector_market<T: Scalar, W: Write>(v: &[T], mut out: W) -> Result<()> {
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} 1", v.len())?;
    for x in v {
        writeln!(out, "{:.17e}", x.to_f64_lossy())?;
    }
    Ok(())
}

pub fn read_matrix_market<T: Scalar, R: BufRead>(input: R) -> Result<SparseMatrix<T>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty matrix market file".into()))??;
    let h: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if h.len() < 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" || h[2] != "coordinate" {
        return Err(Error::Parse(format!("unsupported header `{header}`")));
    }
    if h[3] != "real" && h[3] != "integer" {
        return Err(Error::Parse(format!("unsupported field `{}`", h[3])));
    }
    let symmetric = match h[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::Parse(format!("unsupported symmetry `{other}`"))),
    };
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut builder: Option<TripletBuilder<T>> = None;
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match dims {
            None => {
                if parts.len() != 3 {
                    return Err(Error::Parse(format!("bad size line `{t}`")));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(e.to_string()));
                let d = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
                builder = Some(TripletBuilder::with_capacity(d.0, d.1, d.2 * 2));
                dims = Some(d);
            }
            Some((m, n, _)) => {
                if parts.len() != 3 {
                    return Err(Error::Parse(format!("bad entry line `{t}`")));
                }
                let i: usize = parts[0].parse().map_err(|_| Error::Parse(format!("bad row `{}`", parts[0])))?;
                let j: usize = parts[1].parse().map_err(|_| Error::Parse(format!("bad column `{}`", parts[1])))?;
                let v: f64 = parts[2].parse().map_err(|_| Error::Parse(format!("bad value `{}`", parts[2])))?;
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(Error::Parse(format!("entry ({i}, {j}) outside {m}x{n}")));
                }
                let b = builder.as_mut().unwrap();
                b.push(i - 1, j - 1, T::of(v));
                if symmetric && i != j {
                    b.push(j - 1, i - 1, T::of(v));
                }
                seen += 1;
            }
        }
    }
    let (_, _, nnz) = dims.ok_or_else(|| Error::Parse("missing size line".into()))?;
    if seen != nnz {
        return Err(Error::Parse(format!("expected {nnz} entries, found {seen}")));
    }
    Ok(builder.unwrap().build())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_roundtrip() {
        let a = SparseMatrix::from_dense(3, 3, &[4.0, 1.0, 0.0, 1.0, 5.0, 2.0, 0.0, 2.0, 6.0]);
        let mut buf = Vec::new();
        write_matrix_market(&a, MatrixKind::Symmetric, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n3 3 5\n1 1 "));
        let b: SparseMatrix<f64> = read_matrix_market(&buf[..]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_out_of_range() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(read_matrix_market::<f64, _>(text.as_bytes()).is_err());
    }
}
