use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::csr::{SparseMatrix, TripletBuilder};

fn check_index_set(set: &[usize], dim: usize) -> Result<()> {
    for (k, &i) in set.iter().enumerate() {
        if i >= dim {
            return Err(Error::IndexOutOfRange { index: i, dim });
        }
        if k > 0 && set[k - 1] >= i {
            return Err(Error::InvalidArgument("index set must be sorted and unique".into()));
        }
    }
    Ok(())
}

/// Extracts `A(rows, cols)`; both index sets must be sorted and unique.
pub fn submatrix<T: Scalar>(a: &SparseMatrix<T>, rows: &[usize], cols: &[usize]) -> Result<SparseMatrix<T>> {
    check_index_set(rows, a.nrows())?;
    check_index_set(cols, a.ncols())?;
    let mut col_map = vec![usize::MAX; a.ncols()];
    for (local, &c) in cols.iter().enumerate() {
        col_map[c] = local;
    }
    let mut indptr = Vec::with_capacity(rows.len() + 1);
    indptr.push(0);
    let mut indices = Vec::new();
    let mut data = Vec::new();
    for &r in rows {
        let (c, v) = a.row(r);
        for (&j, &x) in c.iter().zip(v) {
            let lj = col_map[j];
            if lj != usize::MAX {
                indices.push(lj);
                data.push(x);
            }
        }
        indptr.push(indices.len());
    }
    // `cols` is sorted so local column indices stay sorted within each row.
    SparseMatrix::from_csr(rows.len(), cols.len(), indptr, indices, data)
}

/// Exact sparse product `R A Rt`.
pub fn triple_product<T: Scalar>(
    r: &SparseMatrix<T>,
    a: &SparseMatrix<T>,
    rt: &SparseMatrix<T>,
) -> Result<SparseMatrix<T>> {
    if r.ncols() != a.nrows() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: r.ncols() });
    }
    if a.ncols() != rt.nrows() {
        return Err(Error::DimensionMismatch { expected: a.ncols(), got: rt.nrows() });
    }
    r.matmul(a)?.matmul(rt)
}

/// Block matrix `[[a, b], [c, d]]`; `None` blocks are zero.
pub fn block2x2<T: Scalar>(
    a: &SparseMatrix<T>,
    b: Option<&SparseMatrix<T>>,
    c: Option<&SparseMatrix<T>>,
    d: Option<&SparseMatrix<T>>,
    n2: usize,
) -> SparseMatrix<T> {
    let n1 = a.nrows();
    let m1 = a.ncols();
    let m2 = b.map(|b| b.ncols()).or(d.map(|d| d.ncols())).unwrap_or(n2);
    let mut t = TripletBuilder::new(n1 + n2, m1 + m2);
    let mut put = |m: &SparseMatrix<T>, r0: usize, c0: usize| {
        for i in 0..m.nrows() {
            let (cs, vs) = m.row(i);
            for (&j, &v) in cs.iter().zip(vs) {
                t.push(r0 + i, c0 + j, v);
            }
        }
    };
    put(a, 0, 0);
    if let Some(b) = b {
        put(b, 0, m1);
    }
    if let Some(c) = c {
        put(c, n1, 0);
    }
    if let Some(d) = d {
        put(d, n1, m1);
    }
    t.build()
}

/// `D1 A D2` with diagonal scalings.
pub fn scale_rows_cols<T: Scalar>(a: &SparseMatrix<T>, left: &[T], right: &[T]) -> SparseMatrix<T> {
    let mut out = a.clone();
    let indptr = a.indptr().to_vec();
    let indices = a.indices().to_vec();
    let data = out.data_mut();
    for i in 0..a.nrows() {
        for k in indptr[i]..indptr[i + 1] {
            data[k] = left[i] * data[k] * right[indices[k]];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn submatrix_full_and_single() {
        let a = SparseMatrix::from_dense(3, 3, &[1.0, 2.0, 0.0, 0.0, 5.0, 6.0, 7.0, 0.0, 9.0]);
        let all = [0, 1, 2];
        assert_eq!(submatrix(&a, &all, &all).unwrap(), a);
        let s = submatrix(&a, &[1], &[2]).unwrap();
        assert_eq!(s.to_dense(), vec![6.0]);
        assert!(submatrix(&a, &[3], &[0]).is_err());
        assert!(submatrix(&a, &[1, 0], &[0]).is_err());
    }

    #[test]
    fn triple_product_unit_column() {
        let a = SparseMatrix::from_dense(3, 3, &[1.0, 2.0, 0.0, 0.0, 5.0, 6.0, 7.0, 0.0, 9.0]);
        let i = SparseMatrix::identity(3);
        assert_eq!(triple_product(&i, &a, &i).unwrap().to_dense(), a.to_dense());
        let e = SparseMatrix::from_dense(1, 3, &[0.0, 1.0, 0.0]);
        assert_eq!(triple_product(&e, &a, &e.transpose()).unwrap().to_dense(), vec![5.0]);
    }

    #[test]
    fn block_layout() {
        let a = SparseMatrix::from_dense(1, 1, &[2.0]);
        let b = SparseMatrix::from_dense(1, 1, &[3.0]);
        let k = block2x2(&a, Some(&b), Some(&b.transpose()), None, 1);
        assert_eq!(k.to_dense(), vec![2.0, 3.0, 3.0, 0.0]);
    }
}
