#![allow(dead_code)]

use msras_core::assembly::DiscreteSystem;
use msras_core::decomp::Decomposition;
use msras_core::sparse::SparseMatrix;
use nalgebra::{DMatrix, SymmetricEigen};

pub fn dense(m: &SparseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.nrows(), m.ncols(), &m.to_dense())
}

pub fn null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let e = SymmetricEigen::new(m.transpose() * m);
    let emax = e.eigenvalues.amax();
    let cols: Vec<_> = (0..n).filter(|&i| e.eigenvalues[i] < 1e-14 * emax).map(|i| e.eigenvectors.column(i).into_owned()).collect();
    DMatrix::from_columns(&cols)
}

/// Finite eigenvalues of `S y = λ T y` on the null space of `B_c`, largest
/// first, and whether an infinite eigenvalue is present.
pub fn dense_harmonic_eigenvalues(a_os: &DMatrix<f64>, a_chi: &DMatrix<f64>, b_c: &DMatrix<f64>) -> (Vec<f64>, bool) {
    let h = null_space(b_c);
    let mut s = h.transpose() * a_chi * &h;
    let mut t = h.transpose() * a_os * &h;
    // The kernel of T carries the infinite eigenvalue; remove it in the S inner product.
    let te = SymmetricEigen::new(t.clone());
    let tmax = te.eigenvalues.amax();
    let kernel: Vec<usize> = (0..te.eigenvalues.len()).filter(|&i| te.eigenvalues[i] < 1e-10 * tmax).collect();
    let infinite = !kernel.is_empty();
    if infinite {
        let k = DMatrix::from_columns(&kernel.iter().map(|&i| te.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
        let z = null_space(&(k.transpose() * &s));
        s = z.transpose() * &s * &z;
        t = z.transpose() * &t * &z;
    }
    let l = t.cholesky().expect("T positive definite after deflation").l();
    let li = l.try_inverse().unwrap();
    let c = &li * s * li.transpose();
    let mut ev: Vec<f64> = SymmetricEigen::new((&c + c.transpose()) * 0.5).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (ev, infinite)
}

/// Largest entrywise deviation of `Σ_j R_jᵀ Ξ_j 1` from one.
pub fn pu_sum_defect(d: &Decomposition) -> f64 {
    let mut sum = vec![0.0; d.num_dofs()];
    for (dofs, w) in d.dofs_overlap.iter().zip(&d.pu) {
        for (&i, &x) in dofs.iter().zip(w) {
            sum[i] += x;
        }
    }
    sum.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

/// Largest deviation of the extracted local matrices from dense `R_j B R_jᵀ`,
/// relative to `max |B|`.
pub fn local_block_defect(s: &DiscreteSystem<f64>, d: &Decomposition) -> f64 {
    let b = dense(&s.b);
    let scale = b.amax();
    let mut worst: f64 = 0.0;
    for dofs in &d.dofs_overlap {
        let r = restriction(dofs, s.num_dofs());
        let want = &r * &b * r.transpose();
        let got = dense(&msras_core::sparse::submatrix(&s.b, dofs, dofs).unwrap());
        worst = worst.max((want - got).amax() / scale);
    }
    worst
}

pub fn restriction(dofs: &[usize], n: usize) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(dofs.len(), n);
    for (k, &i) in dofs.iter().enumerate() {
        r[(k, i)] = 1.0;
    }
    r
}

pub fn relative_asymmetry(m: &SparseMatrix<f64>) -> f64 {
    let max = m.max_abs();
    if max == 0.0 {
        0.0
    } else {
        m.asymmetry() / max
    }
}
