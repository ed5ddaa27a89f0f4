//! Left-looking sparse LU (Gilbert–Peierls) with threshold partial pivoting.
//!
//! Columns are pre-ordered by approximate minimum degree on the pattern of
//! `A + Aᵀ`; rows are permuted on the fly. The factors satisfy
//! `P A Q = L U` with `L` unit lower triangular, where `P` is given by
//! `pinv` (original row -> pivot position) and `Q` by `q` (pivot position ->
//! original column).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{norm2, Scalar};

use super::csr::SparseMatrix;

/// Relative threshold for preferring the diagonal pivot candidate.
pub const PIVOT_THRESHOLD: f64 = 0.1;
/// Pivots below this multiple of `max |a_ij|` are treated as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-13;
/// One refinement step is taken when the residual exceeds this multiple of `‖b‖`.
pub const REFINE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
struct CscFactor<T> {
    colptr: Vec<usize>,
    rowind: Vec<usize>,
    values: Vec<T>,
}

/// Sparse LU factors of a square matrix.
#[derive(Debug, Clone)]
pub struct Factorization<T> {
    n: usize,
    q: Vec<usize>,
    pinv: Vec<usize>,
    l: CscFactor<T>,
    u: CscFactor<T>,
    a: SparseMatrix<T>,
}

/// Fill-reducing column order from AMD applied to the pattern of `A + Aᵀ`.
pub fn amd_ordering<T: Scalar>(a: &SparseMatrix<T>) -> Vec<usize> {
    let n = a.nrows();
    if n == 0 {
        return Vec::new();
    }
    // AMD ignores the diagonal, but it expects at least n entries; insert it.
    let mut ap: Vec<isize> = Vec::with_capacity(n + 1);
    let mut ai: Vec<isize> = Vec::with_capacity(a.nnz() + n);
    ap.push(0);
    for i in 0..n {
        let (cols, _) = a.row(i);
        let mut diag_done = false;
        for &c in cols {
            if !diag_done && c >= i {
                if c > i {
                    ai.push(i as isize);
                }
                diag_done = true;
            }
            ai.push(c as isize);
        }
        if !diag_done {
            ai.push(i as isize);
        }
        ap.push(ai.len() as isize);
    }
    match amd::order::<isize>(n as isize, &ap, &ai, &amd::Control::default()) {
        Ok((p, _, _)) => p.into_iter().map(|x| x as usize).collect(),
        // The pattern comes from a validated CSR matrix; fall back to the
        // natural order if AMD still refuses it.
        Err(_) => (0..n).collect(),
    }
}

/// Computes `P A Q = L U`.
pub fn factorize<T: Scalar>(a: &SparseMatrix<T>) -> Result<Factorization<T>> {
    let q = amd_ordering(a);
    factorize_with_order(a, q)
}

/// Factorization with a caller-supplied column order.
pub fn factorize_with_order<T: Scalar>(a: &SparseMatrix<T>, q: Vec<usize>) -> Result<Factorization<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if q.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q.len() });
    }
    let tol = T::of(PIVOT_THRESHOLD);
    let singular = a.max_abs() * T::of(SINGULAR_TOLERANCE);

    // Column access to A.
    let at = a.transpose();
    let (ap, ai, ax) = (at.indptr(), at.indices(), at.data());

    let est = 4 * a.nnz() + n;
    let mut l = CscFactor { colptr: vec![0; n + 1], rowind: Vec::with_capacity(est), values: Vec::with_capacity(est) };
    let mut u = CscFactor { colptr: vec![0; n + 1], rowind: Vec::with_capacity(est), values: Vec::with_capacity(est) };
    let mut pinv = vec![usize::MAX; n];
    let mut x = vec![T::zero(); n];
    let mut xi = vec![0usize; 2 * n];
    let mut marked = vec![false; n];

    for k in 0..n {
        l.colptr[k] = l.rowind.len();
        u.colptr[k] = u.rowind.len();
        let col = q[k];

        // x = L \ A(:, col) restricted to the reach of the column pattern.
        let top = reach(&l, &ai[ap[col]..ap[col + 1]], &mut xi, &mut marked, &pinv);
        for &i in &xi[top..n] {
            x[i] = T::zero();
        }
        for p in ap[col]..ap[col + 1] {
            x[ai[p]] = ax[p];
        }
        for px in top..n {
            let j = xi[px];
            let jj = pinv[j];
            if jj == usize::MAX {
                continue;
            }
            let xj = x[j];
            for p in (l.colptr[jj] + 1)..l.colptr[jj + 1] {
                x[l.rowind[p]] -= l.values[p] * xj;
            }
        }

        // Choose the pivot.
        let mut ipiv = usize::MAX;
        let mut best = -T::one();
        for &i in &xi[top..n] {
            if pinv[i] == usize::MAX {
                let t = x[i].abs();
                if t > best {
                    best = t;
                    ipiv = i;
                }
            } else {
                u.rowind.push(pinv[i]);
                u.values.push(x[i]);
            }
        }
        if ipiv == usize::MAX || best <= singular {
            return Err(Error::Singular { pivot: k, magnitude: best.max(T::zero()).to_f64_lossy() });
        }
        if pinv[col] == usize::MAX && x[col].abs() >= best * tol {
            ipiv = col;
        }
        let pivot = x[ipiv];
        u.rowind.push(k);
        u.values.push(pivot);
        pinv[ipiv] = k;
        l.rowind.push(ipiv);
        l.values.push(T::one());
        for &i in &xi[top..n] {
            if pinv[i] == usize::MAX {
                l.rowind.push(i);
                l.values.push(x[i] / pivot);
            }
            x[i] = T::zero();
        }
    }
    l.colptr[n] = l.rowind.len();
    u.colptr[n] = u.rowind.len();
    for r in &mut l.rowind {
        *r = pinv[*r];
    }
    Ok(Factorization { n, q, pinv, l, u, a: a.clone() })
}

/// Nonzero pattern of `L \ b` in topological order, stored in `xi[top..n]`.
fn reach<T>(l: &CscFactor<T>, b_pattern: &[usize], xi: &mut [usize], marked: &mut [bool], pinv: &[usize]) -> usize {
    let n = marked.len();
    let mut top = n;
    for &i in b_pattern {
        if !marked[i] {
            top = dfs(i, l, top, xi, marked, pinv);
        }
    }
    for &i in &xi[top..n] {
        marked[i] = false;
    }
    top
}

fn dfs<T>(j0: usize, l: &CscFactor<T>, mut top: usize, xi: &mut [usize], marked: &mut [bool], pinv: &[usize]) -> usize {
    let n = marked.len();
    // xi[..n] is the recursion stack, xi[n..] the per-level resume positions.
    let (stack, pstack) = xi.split_at_mut(n);
    let mut head: isize = 0;
    stack[0] = j0;
    while head >= 0 {
        let h = head as usize;
        let j = stack[h];
        let jnew = pinv[j];
        if !marked[j] {
            marked[j] = true;
            pstack[h] = if jnew == usize::MAX { 0 } else { l.colptr[jnew] };
        }
        let mut done = true;
        let end = if jnew == usize::MAX { 0 } else { l.colptr[jnew + 1] };
        let mut p = pstack[h];
        while p < end {
            let i = l.rowind[p];
            if !marked[i] {
                pstack[h] = p;
                head += 1;
                stack[head as usize] = i;
                done = false;
                break;
            }
            p += 1;
        }
        if done {
            head -= 1;
            top -= 1;
            // `top` only ever decreases below positions already popped from the
            // stack, so writing into the shared buffer is safe.
            stack[top] = j;
        }
    }
    top
}

impl<T: Scalar> Factorization<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of `L` and `U` together.
    pub fn factor_nnz(&self) -> usize {
        self.l.values.len() + self.u.values.len()
    }

    pub fn column_order(&self) -> &[usize] {
        &self.q
    }

    pub fn row_pivots(&self) -> &[usize] {
        &self.pinv
    }

    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.a
    }

    fn solve_raw(&self, b: &[T], out: &mut [T]) {
        let n = self.n;
        let mut x = vec![T::zero(); n];
        for i in 0..n {
            x[self.pinv[i]] = b[i];
        }
        let l = &self.l;
        for j in 0..n {
            let xj = x[j];
            if xj == T::zero() {
                continue;
            }
            for p in (l.colptr[j] + 1)..l.colptr[j + 1] {
                x[l.rowind[p]] -= l.values[p] * xj;
            }
        }
        let u = &self.u;
        for j in (0..n).rev() {
            let d = u.colptr[j + 1] - 1;
            x[j] /= u.values[d];
            let xj = x[j];
            if xj == T::zero() {
                continue;
            }
            for p in u.colptr[j]..d {
                x[u.rowind[p]] -= u.values[p] * xj;
            }
        }
        for k in 0..n {
            out[self.q[k]] = x[k];
        }
    }

    /// Solves `A x = b`, with one step of iterative refinement when needed.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
        }
        let mut x = vec![T::zero(); self.n];
        self.solve_raw(b, &mut x);
        let bnorm = norm2(b);
        if bnorm > T::zero() {
            let ax = self.a.spmv(&x)?;
            let r: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
            if norm2(&r) > T::of(REFINE_TOLERANCE) * bnorm {
                let mut dx = vec![T::zero(); self.n];
                self.solve_raw(&r, &mut dx);
                for (xi, d) in x.iter_mut().zip(dx) {
                    *xi += d;
                }
            }
        }
        Ok(x)
    }

    /// Applies `Pᵀ L U Qᵀ` to `x`, which reproduces `A x` for exact factors.
    pub fn apply_factors(&self, x: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y: Vec<T> = (0..n).map(|k| x[self.q[k]]).collect();
        // z = U y
        let mut z = vec![T::zero(); n];
        for j in 0..n {
            for p in self.u.colptr[j]..self.u.colptr[j + 1] {
                z[self.u.rowind[p]] += self.u.values[p] * y[j];
            }
        }
        // w = L z
        y.iter_mut().for_each(|v| *v = T::zero());
        for j in 0..n {
            for p in self.l.colptr[j]..self.l.colptr[j + 1] {
                y[self.l.rowind[p]] += self.l.values[p] * z[j];
            }
        }
        (0..n).map(|i| y[self.pinv[i]]).collect()
    }

    /// Largest relative probe error `‖A x − Pᵀ L U Qᵀ x‖ / (‖A‖_max ‖x‖)` over random vectors.
    pub fn verify(&self, probes: usize, seed: u64) -> T {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = self.a.max_abs().max(T::min_positive_value());
        let mut worst = T::zero();
        for _ in 0..probes {
            let x: Vec<T> = (0..self.n).map(|_| T::of(rng.gen_range(-1.0..1.0))).collect();
            let ax = self.a.spmv(&x).expect("square factor");
            let fx = self.apply_factors(&x);
            let d: Vec<T> = ax.iter().zip(&fx).map(|(&a, &b)| a - b).collect();
            let e = norm2(&d) / (scale * norm2(&x).max(T::min_positive_value()));
            worst = worst.max(e);
        }
        worst
    }
}
