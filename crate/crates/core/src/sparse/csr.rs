use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Compressed-sparse-row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

/// Coordinate-format accumulator used by the assemblers.
///
/// Duplicate entries are summed on conversion. The merge order is the
/// `(row, col)` sort order with a stable sort, so the resulting matrix does
/// not depend on the order contributions were pushed within one entry.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder<T> {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> TripletBuilder<T> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    /// Appends the entries of another builder of the same shape.
    pub fn extend(&mut self, other: TripletBuilder<T>) {
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn build(mut self) -> SparseMatrix<T> {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut data: Vec<T> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            indptr[i + 1] += indptr[i];
        }
        SparseMatrix { nrows: self.nrows, ncols: self.ncols, indptr, indices, data }
    }
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds a matrix from raw CSR arrays, validating the structural invariants.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        data: Vec<T>,
    ) -> Result<Self> {
        if indptr.len() != nrows + 1 {
            return Err(Error::DimensionMismatch { expected: nrows + 1, got: indptr.len() });
        }
        if indices.len() != data.len() || indptr[nrows] != indices.len() || indptr[0] != 0 {
            return Err(Error::InvalidArgument("inconsistent CSR array lengths".into()));
        }
        for i in 0..nrows {
            if indptr[i] > indptr[i + 1] {
                return Err(Error::InvalidArgument(format!("row offsets decrease at row {i}")));
            }
            let row = &indices[indptr[i]..indptr[i + 1]];
            for (k, &c) in row.iter().enumerate() {
                if c >= ncols {
                    return Err(Error::IndexOutOfRange { index: c, dim: ncols });
                }
                if k > 0 && row[k - 1] >= c {
                    return Err(Error::InvalidArgument(format!(
                        "column indices of row {i} are not sorted and unique"
                    )));
                }
            }
        }
        Ok(Self { nrows, ncols, indptr, indices, data })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), data: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: vec![T::one(); n],
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: diag.to_vec(),
        }
    }

    /// Dense row-major input; exact zeros are not stored.
    pub fn from_dense(nrows: usize, ncols: usize, values: &[T]) -> Self {
        assert_eq!(values.len(), nrows * ncols);
        let mut b = TripletBuilder::new(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                let v = values[i * ncols + j];
                if v != T::zero() {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    #[inline]
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[s..e], &self.data[s..e])
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn spmv(&self, x: &[T]) -> Result<Vec<T>> {
        let mut y = vec![T::zero(); self.nrows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    /// `y = A x`
    pub fn spmv_into(&self, x: &[T], y: &mut [T]) -> Result<()> {
        if x.len() != self.ncols {
            return Err(Error::DimensionMismatch { expected: self.ncols, got: x.len() });
        }
        if y.len() != self.nrows {
            return Err(Error::DimensionMismatch { expected: self.nrows, got: y.len() });
        }
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.indptr[i], self.indptr[i + 1]);
            let mut acc = T::zero();
            for k in s..e {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yi = acc;
        }
        Ok(())
    }

    /// `y = Aᵀ x`
    pub fn spmv_transpose(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.nrows {
            return Err(Error::DimensionMismatch { expected: self.nrows, got: x.len() });
        }
        let mut y = vec![T::zero(); self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut data = vec![T::zero(); self.nnz()];
        for i in 0..self.nrows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                let c = self.indices[k];
                let dst = next[c];
                indices[dst] = i;
                data[dst] = self.data[k];
                next[c] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, indptr, indices, data }
    }

    /// Sparse product `self * other` (Gustavson's row-by-row algorithm).
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch { expected: self.ncols, got: other.nrows });
        }
        let n = other.ncols;
        let mut marker = vec![usize::MAX; n];
        let mut acc = vec![T::zero(); n];
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        let mut row_cols: Vec<usize> = Vec::new();
        for i in 0..self.nrows {
            row_cols.clear();
            let (ac, av) = self.row(i);
            for (&k, &a) in ac.iter().zip(av) {
                let (bc, bv) = other.row(k);
                for (&j, &b) in bc.iter().zip(bv) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = T::zero();
                        row_cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            row_cols.sort_unstable();
            for &j in &row_cols {
                indices.push(j);
                data.push(acc[j]);
            }
            indptr.push(indices.len());
        }
        Ok(Self { nrows: self.nrows, ncols: n, indptr, indices, data })
    }

    /// `alpha * self + beta * other`
    pub fn add_scaled(&self, alpha: T, other: &Self, beta: T) -> Result<Self> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch { expected: self.nrows, got: other.nrows });
        }
        let mut b = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                b.push(i, j, alpha * x);
            }
            let (c, v) = other.row(i);
            for (&j, &x) in c.iter().zip(v) {
                b.push(i, j, beta * x);
            }
        }
        Ok(b.build())
    }

    pub fn scale(&mut self, alpha: T) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    /// Row-major dense copy, intended for small matrices and tests.
    pub fn to_dense(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.nrows * self.ncols];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &x) in c.iter().zip(v) {
                d[i * self.ncols + j] = x;
            }
        }
        d
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    /// Largest absolute entry of `self - selfᵀ`.
    pub fn asymmetry(&self) -> T {
        let t = self.transpose();
        match self.add_scaled(T::one(), &t, -T::one()) {
            Ok(d) => d.max_abs(),
            Err(_) => T::infinity(),
        }
    }

    /// Diagonal entries (zero where not stored).
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// Converts every value to another scalar type.
    pub fn cast<U: Scalar>(&self) -> SparseMatrix<U> {
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            data: self.data.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_sums_duplicates_and_sorts() {
        let mut b = TripletBuilder::new(2, 3);
        b.push(1, 2, 1.0);
        b.push(0, 1, 2.0);
        b.push(1, 0, 3.0);
        b.push(0, 1, 0.5);
        let a = b.build();
        assert_eq!(a.indptr(), &[0, 1, 3]);
        assert_eq!(a.indices(), &[1, 0, 2]);
        assert_eq!(a.data(), &[2.5, 3.0, 1.0]);
    }

    #[test]
    fn spmv_small() {
        let a = SparseMatrix::from_dense(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.spmv(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        let i = SparseMatrix::<f64>::identity(3);
        assert_eq!(i.spmv(&[1.0, -2.0, 5.0]).unwrap(), vec![1.0, -2.0, 5.0]);
        assert!(matches!(a.spmv(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn from_csr_validates() {
        assert!(SparseMatrix::<f64>::from_csr(1, 2, vec![0, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::<f64>::from_csr(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        assert!(SparseMatrix::<f64>::from_csr(1, 2, vec![0, 2], vec![0, 1], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn transpose_and_matmul() {
        let a = SparseMatrix::from_dense(2, 3, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let at = a.transpose();
        assert_eq!(at.to_dense(), vec![1.0, 0.0, 0.0, 3.0, 2.0, 0.0]);
        let p = a.matmul(&at).unwrap();
        assert_eq!(p.to_dense(), vec![5.0, 0.0, 0.0, 9.0]);
        assert_eq!(a.spmv_transpose(&[1.0, 1.0]).unwrap(), vec![1.0, 3.0, 2.0]);
    }
}
