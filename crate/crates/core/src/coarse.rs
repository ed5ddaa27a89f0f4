//! Spectral coarse spaces from local generalized eigenproblems on
//! operator-harmonic spaces, and the polynomial partition-of-unity baseline.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::assembly::DiscreteSystem;
use crate::decomp::Decomposition;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm2, norm_inf, Scalar};
use crate::sparse::dense::symmetric_eigen;
use crate::sparse::{
    amd_ordering, block2x2, factorize, scale_rows_cols, submatrix, triple_product, Factorization, SparseMatrix,
    TripletBuilder,
};

/// Relative tolerance used to recognise the constant function in both kernels.
const KERNEL_TOLERANCE: f64 = 1e-10;
/// Eigenpairs whose explicit pencil residual exceeds this are flagged.
const RESIDUAL_FLAG: f64 = 1e-8;
/// Columns with relative a-seminorm below this are dropped.
const DROP_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum SelectionRule {
    Fixed(usize),
    Threshold(f64),
}

impl SelectionRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SelectionRule::Threshold(t) if !(t > 0.0) || !t.is_finite() => {
                Err(Error::InvalidArgument(format!("eigenvalue threshold must be positive, got {t}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    pub tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
    /// Initial eigenvalue count for the threshold rule.
    pub initial_nev: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_restarts: 500, seed: 42, initial_nev: 10 }
    }
}

/// `K = [[A_os, B_cᵀ], [B_c, 0]]` and `Mw = diag(A_χ, 0)` on one oversampling domain.
#[derive(Debug, Clone)]
pub struct EigenPencil<T> {
    pub subdomain: usize,
    pub k: SparseMatrix<T>,
    pub mw: SparseMatrix<T>,
    pub a_os: SparseMatrix<T>,
    pub a_chi: SparseMatrix<T>,
    pub b_c: SparseMatrix<T>,
    pub n_u: usize,
    pub n_c: usize,
    /// Local positions of the constrained DOFs.
    pub constraint_rows: Vec<usize>,
}

impl<T: Scalar> EigenPencil<T> {
    pub fn from_blocks(subdomain: usize, a_os: SparseMatrix<T>, a_chi: SparseMatrix<T>, b_c: SparseMatrix<T>) -> Result<Self> {
        let n_u = a_os.nrows();
        if a_os.ncols() != n_u || a_chi.nrows() != n_u || a_chi.ncols() != n_u {
            return Err(Error::DimensionMismatch { expected: n_u, got: a_chi.nrows() });
        }
        if b_c.ncols() != n_u {
            return Err(Error::DimensionMismatch { expected: n_u, got: b_c.ncols() });
        }
        let n_c = b_c.nrows();
        let bt = b_c.transpose();
        let k = block2x2(&a_os, Some(&bt), Some(&b_c), None, n_c);
        let mw = block2x2(&a_chi, None, None, None, n_c);
        Ok(Self { subdomain, k, mw, a_os, a_chi, b_c, n_u, n_c, constraint_rows: Vec::new() })
    }
}

impl<T: Scalar> EigenPencil<T> {
    /// Swaps each constraint equation with the row of its own constrained DOF so
    /// that the diagonal carries `B(c, c)` instead of the zero block.
    fn paired_rows(&self, n: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..n).collect();
        for (k, &c) in self.constraint_rows.iter().enumerate() {
            perm.swap(c, self.n_u + k);
        }
        perm
    }
}

fn permute_rows<T: Scalar>(a: &SparseMatrix<T>, perm: &[usize]) -> SparseMatrix<T> {
    let mut t = TripletBuilder::with_capacity(a.nrows(), a.ncols(), a.nnz());
    for (new, &old) in perm.iter().enumerate() {
        let (cols, vals) = a.row(old);
        for (&j, &v) in cols.iter().zip(vals) {
            t.push(new, j, v);
        }
    }
    t.build()
}

/// Eigenpairs of one pencil, largest first; `+∞` is stored as `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainSpectrum<T> {
    pub subdomain: usize,
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<T>>,
    pub residuals: Vec<f64>,
    pub flagged: Vec<bool>,
}

impl<T> SubdomainSpectrum<T> {
    pub fn empty(subdomain: usize) -> Self {
        Self { subdomain, eigenvalues: Vec::new(), eigenvectors: Vec::new(), residuals: Vec::new(), flagged: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn num_infinite(&self) -> usize {
        self.eigenvalues.iter().filter(|l| l.is_infinite()).count()
    }
}

/// Builds the pencil of subdomain `j`.
///
/// The constraint rows are the DOFs of oversampling cells whose face
/// neighbours all lie in the oversampling domain.
pub fn assemble_pencil<T: Scalar>(system: &DiscreteSystem<T>, decomp: &Decomposition, j: usize) -> Result<EigenPencil<T>> {
    if j >= decomp.num_subdomains() {
        return Err(Error::IndexOutOfRange { index: j, dim: decomp.num_subdomains() });
    }
    let cells = &decomp.oversample[j];
    let os = &decomp.dofs_oversample[j];
    if os.is_empty() {
        return Err(Error::InvalidArgument(format!("oversampling domain {j} is empty")));
    }
    let grid = &system.grid;
    let mut inside = vec![false; grid.num_cells()];
    for &c in cells {
        inside[c] = true;
    }
    let adj = grid.cell_adjacency();
    let k = system.dofs_per_cell();
    let constraint_rows: Vec<usize> = cells
        .iter()
        .enumerate()
        .filter(|(_, &c)| adj.neighbors(c).iter().all(|&w| inside[w]))
        .flat_map(|(lc, _)| (0..k).map(move |l| lc * k + l))
        .collect();
    if constraint_rows.is_empty() {
        return Err(Error::InvalidArgument(format!("subdomain {j} has an empty constraint set")));
    }
    let a_os = system.local_inner_product(cells)?;
    let mut chi = vec![T::zero(); os.len()];
    for (pos, &w) in decomp.overlap_in_oversample(j).into_iter().zip(&decomp.pu[j]) {
        chi[pos] = T::of(w);
    }
    let a_chi = scale_rows_cols(&a_os, &chi, &chi);
    let b_os = submatrix(&system.b, os, os)?;
    let all: Vec<usize> = (0..os.len()).collect();
    let b_c = submatrix(&b_os, &constraint_rows, &all)?;
    let mut p = EigenPencil::from_blocks(j, a_os, a_chi, b_c)?;
    p.constraint_rows = constraint_rows;
    Ok(p)
}

/// Factorized pencil ready for repeated eigen-solves.
pub struct PencilSolver<'a, T: Scalar> {
    pencil: &'a EigenPencil<T>,
    lu: Factorization<T>,
    /// Row `i` of the factorized matrix is row `row_perm[i]` of `K`.
    row_perm: Vec<usize>,
    /// `(A_χ 1, 1ᵀ A_χ 1)` when the constant lies in the kernel of `K`.
    deflation: Option<(Vec<T>, T)>,
    infinite_mode: Option<Vec<T>>,
}

impl<'a, T: Scalar> PencilSolver<'a, T> {
    pub fn new(pencil: &'a EigenPencil<T>) -> Result<Self> {
        let n_u = pencil.n_u;
        let ones = vec![T::one(); n_u];
        let a1 = pencil.a_os.spmv(&ones)?;
        let b1 = pencil.b_c.spmv(&ones)?;
        let tol = T::of(KERNEL_TOLERANCE);
        let const_kernel = norm_inf(&a1) <= tol * pencil.a_os.max_abs() && norm_inf(&b1) <= tol * pencil.b_c.max_abs();
        let row_perm = pencil.paired_rows(pencil.k.nrows());
        if !const_kernel {
            let lu = factorize(&permute_rows(&pencil.k, &row_perm)).map_err(|e| Error::Eigensolver {
                subdomain: pencil.subdomain,
                reason: format!("pencil factorization failed: {e}"),
            })?;
            return Ok(Self { pencil, lu, row_perm, deflation: None, infinite_mode: None });
        }
        // (1, 0) spans the kernel of K. Grounding one unconstrained DOF gives a
        // nonsingular matrix whose solves agree with K on its range up to a
        // multiple of the constant, which is projected out afterwards.
        let mut constrained = vec![false; n_u];
        for &c in &pencil.constraint_rows {
            constrained[c] = true;
        }
        let diag = pencil.a_os.diagonal();
        let pin = (0..n_u)
            .filter(|&i| !constrained[i])
            .max_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(0);
        let alpha = if diag[pin] > T::zero() { diag[pin] } else { pencil.a_os.max_abs().max(T::one()) };
        let mut t = TripletBuilder::new(pencil.k.nrows(), pencil.k.ncols());
        t.push(pin, pin, alpha);
        let grounded = pencil.k.add_scaled(T::one(), &t.build(), T::one())?;
        let lu = factorize(&permute_rows(&grounded, &row_perm)).map_err(|e| Error::Eigensolver {
            subdomain: pencil.subdomain,
            reason: format!("pencil factorization failed after grounding: {e}"),
        })?;
        let c = pencil.a_chi.spmv(&ones)?;
        let denom = dot(&ones, &c);
        let weighted = denom > tol * pencil.a_chi.max_abs() * T::of(n_u as f64);
        let (deflation, infinite_mode) = if weighted {
            let s = T::one() / T::of(n_u as f64).sqrt();
            (Some((c, denom)), Some(vec![s; n_u]))
        } else {
            (None, None)
        };
        Ok(Self { pencil, lu, row_perm, deflation, infinite_mode })
    }

    /// Removes the A_χ-component along the constant.
    fn project(&self, x: &mut [T]) {
        if let Some((c, denom)) = &self.deflation {
            let t = dot(c, x) / *denom;
            x.iter_mut().for_each(|v| *v -= t);
        }
    }

    pub fn has_infinite_mode(&self) -> bool {
        self.infinite_mode.is_some()
    }

    /// Solves `K [x; z] = [A_χ v; 0]` and returns the full solution.
    fn apply_full(&self, v: &[T]) -> Result<Vec<T>> {
        let mut v = v.to_vec();
        self.project(&mut v);
        let mut rhs = self.pencil.a_chi.spmv(&v)?;
        rhs.resize(self.pencil.k.nrows(), T::zero());
        let permuted: Vec<T> = self.row_perm.iter().map(|&i| rhs[i]).collect();
        let mut x = self.lu.solve(&permuted)?;
        self.project(&mut x[..self.pencil.n_u]);
        Ok(x)
    }

    fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        let mut x = self.apply_full(v)?;
        x.truncate(self.pencil.n_u);
        Ok(x)
    }

    fn m_inner(&self, x: &[T], y: &[T]) -> Result<T> {
        Ok(dot(x, &self.pencil.a_chi.spmv(y)?))
    }

    /// Two-pass Gram-Schmidt in the A_χ inner product; returns coefficients and the remaining norm.
    fn orthogonalize(&self, basis: &[Vec<T>], w: &mut [T]) -> Result<(Vec<T>, T)> {
        let mut coeffs = vec![T::zero(); basis.len()];
        for _ in 0..2 {
            let z = self.pencil.a_chi.spmv(w)?;
            for (l, v) in basis.iter().enumerate() {
                let h = dot(v, &z);
                coeffs[l] += h;
                for (wi, &vi) in w.iter_mut().zip(v) {
                    *wi -= h * vi;
                }
            }
        }
        let nrm = self.m_inner(w, w)?.max(T::zero()).sqrt();
        Ok((coeffs, nrm))
    }

    /// The `nev` largest finite eigenpairs, preceded by the `+∞` mode when present.
    pub fn solve(&self, nev: usize, opts: &EigenOptions) -> Result<SubdomainSpectrum<T>> {
        let p = self.pencil;
        let mut spec = SubdomainSpectrum::empty(p.subdomain);
        if let Some(v) = &self.infinite_mode {
            spec.eigenvalues.push(f64::INFINITY);
            spec.eigenvectors.push(v.clone());
            spec.residuals.push(0.0);
            spec.flagged.push(false);
        }
        let n_u = p.n_u;
        let bound = n_u.saturating_sub(p.n_c + usize::from(self.deflation.is_some()));
        if nev == 0 || bound == 0 {
            return Ok(spec);
        }
        let maxdim = (4 * nev + 20).min(bound);
        let nev = nev.min(maxdim);
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (p.subdomain as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));

        let (ritz_vals, ritz_vecs) = match self.lanczos(nev, maxdim, opts, &mut rng)? {
            Some(r) => r,
            None => return Ok(spec),
        };
        let kmax = p.k.max_abs().to_f64_lossy();
        let amax = p.a_os.max_abs();
        for (theta, x) in ritz_vals.into_iter().zip(ritz_vecs) {
            let (mut phi, mut zeta) = if theta > T::zero() {
                let full = self.apply_full(&x)?;
                let inv = T::one() / theta;
                let phi: Vec<T> = full[..n_u].iter().map(|&v| v * inv).collect();
                let zeta: Vec<T> = full[n_u..].iter().map(|&v| v * inv).collect();
                (phi, zeta)
            } else {
                (x, vec![T::zero(); p.n_c])
            };
            let an = dot(&phi, &p.a_os.spmv(&phi)?).max(T::zero()).sqrt();
            let en = norm2(&phi);
            let scale = if an > T::of(1e-14) * en * amax.sqrt() && an > T::min_positive_value() { an } else { en };
            if scale > T::zero() {
                let s = T::one() / scale;
                phi.iter_mut().for_each(|v| *v *= s);
                zeta.iter_mut().for_each(|v| *v *= s);
            }
            let mut full = phi.clone();
            full.extend_from_slice(&zeta);
            let kx = p.k.spmv(&full)?;
            let mx = p.a_chi.spmv(&phi)?;
            let mut r: Vec<T> = kx.iter().map(|&v| -theta * v).collect();
            for (ri, &m) in r.iter_mut().zip(&mx) {
                *ri += m;
            }
            let denom = theta.to_f64_lossy() * kmax * norm2(&full).to_f64_lossy();
            let rel = if denom > 0.0 { norm2(&r).to_f64_lossy() / denom } else { f64::INFINITY };
            spec.eigenvalues.push(theta.to_f64_lossy().max(0.0));
            spec.eigenvectors.push(phi);
            spec.residuals.push(rel);
            spec.flagged.push(!(rel <= RESIDUAL_FLAG));
        }
        Ok(spec)
    }

    /// Thick-restart Lanczos on `x ↦ (K⁻¹[A_χ x; 0])_u` in the A_χ inner product.
    #[allow(clippy::type_complexity)]
    fn lanczos(&self, nev: usize, maxdim: usize, opts: &EigenOptions, rng: &mut ChaCha8Rng) -> Result<Option<(Vec<T>, Vec<Vec<T>>)>> {
        let n = self.pencil.n_u;
        let random = |rng: &mut ChaCha8Rng| -> Vec<T> { (0..n).map(|_| T::of(rng.gen_range(-1.0..1.0))).collect() };
        let r0 = random(rng);
        let r0n = self.m_inner(&r0, &r0)?.max(T::zero()).sqrt();
        let mut v0 = self.apply(&r0)?;
        let v0n = self.m_inner(&v0, &v0)?.max(T::zero()).sqrt();
        if !(v0n > T::of(1e-12) * r0n) {
            return Ok(None);
        }
        v0.iter_mut().for_each(|v| *v /= v0n);

        let mut basis: Vec<Vec<T>> = vec![v0];
        let mut h = vec![T::zero(); maxdim * maxdim];
        let mut kept = 0usize;
        let mut scale = T::zero();
        for restart in 0..=opts.max_restarts {
            let mut i = kept;
            let (exhausted, beta, m) = loop {
                let mut w = self.apply(&basis[i])?;
                let (coeffs, nrm) = self.orthogonalize(&basis, &mut w)?;
                for (l, &c) in coeffs.iter().enumerate() {
                    h[l * maxdim + i] = c;
                    h[i * maxdim + l] = c;
                }
                scale = scale.max(coeffs[i].abs());
                let breakdown = !(nrm > T::of(1e-13) * scale.max(T::min_positive_value()));
                if basis.len() == maxdim {
                    if breakdown {
                        break (true, T::zero(), maxdim);
                    }
                    let inv = T::one() / nrm;
                    w.iter_mut().for_each(|v| *v *= inv);
                    basis.push(w);
                    break (false, nrm, maxdim);
                }
                if breakdown {
                    // Invariant subspace; continue with a fresh harmonic direction.
                    let mut u = self.apply(&random(rng))?;
                    let (_, un) = self.orthogonalize(&basis, &mut u)?;
                    let (_, un2) = self.orthogonalize(&basis, &mut u)?;
                    if !(un2 > T::of(1e-10) * un) {
                        break (true, T::zero(), basis.len());
                    }
                    let inv = T::one() / un2;
                    u.iter_mut().for_each(|v| *v *= inv);
                    basis.push(u);
                } else {
                    let inv = T::one() / nrm;
                    w.iter_mut().for_each(|v| *v *= inv);
                    basis.push(w);
                    // Stop expanding once the wanted Ritz pairs have converged.
                    let dim = i + 1;
                    if dim >= nev + 10 && dim % 5 == 0 && ritz_pairs(&h, maxdim, dim, nrm, nev, opts.tol).2 {
                        break (false, nrm, dim);
                    }
                }
                i += 1;
            };
            let (theta, y, ok) = ritz_pairs(&h, maxdim, m, beta, nev, opts.tol);
            let nconv_needed = nev.min(m);
            let converged = exhausted || ok;
            if converged || restart == opts.max_restarts {
                if !converged {
                    log::warn!("eigensolver on subdomain {} stopped without full convergence", self.pencil.subdomain);
                }
                let mut vecs = Vec::with_capacity(nconv_needed);
                for j in 0..nconv_needed {
                    let mut x = vec![T::zero(); n];
                    for (l, v) in basis.iter().take(m).enumerate() {
                        let c = y[l * m + j];
                        for (xi, &vi) in x.iter_mut().zip(v) {
                            *xi += c * vi;
                        }
                    }
                    vecs.push(x);
                }
                return Ok(Some((theta[..nconv_needed].to_vec(), vecs)));
            }
            // Thick restart: keep the leading Ritz vectors and the residual direction.
            let keep = ((m + nev) / 2).max(nev).min(m - 1);
            let f = basis.pop().expect("residual vector");
            let mut new_basis = Vec::with_capacity(maxdim + 1);
            for j in 0..keep {
                let mut x = vec![T::zero(); n];
                for (l, v) in basis.iter().enumerate() {
                    let c = y[l * m + j];
                    for (xi, &vi) in x.iter_mut().zip(v) {
                        *xi += c * vi;
                    }
                }
                new_basis.push(x);
            }
            h.iter_mut().for_each(|v| *v = T::zero());
            for j in 0..keep {
                h[j * maxdim + j] = theta[j];
            }
            new_basis.push(f);
            basis = new_basis;
            kept = keep;
        }
        Err(Error::Eigensolver { subdomain: self.pencil.subdomain, reason: "no convergence".into() })
    }
}

/// Eigen-decomposition of the leading `m×m` block of `h` and whether the first
/// `nev` Ritz pairs meet the residual estimate `|β y_m| ≤ tol |θ|`.
fn ritz_pairs<T: Scalar>(h: &[T], ld: usize, m: usize, beta: T, nev: usize, tol: f64) -> (Vec<T>, Vec<T>, bool) {
    let mut hm = vec![T::zero(); m * m];
    for a in 0..m {
        hm[a * m..(a + 1) * m].copy_from_slice(&h[a * ld..a * ld + m]);
    }
    let (theta, y) = symmetric_eigen(&hm, m);
    let ok = (0..nev.min(m)).all(|j| (beta * y[(m - 1) * m + j]).abs() <= T::of(tol) * theta[j].abs().max(T::min_positive_value()));
    (theta, y, ok)
}

/// Largest `nev` eigenpairs of a pencil.
pub fn solve_pencil<T: Scalar>(pencil: &EigenPencil<T>, nev: usize, opts: &EigenOptions) -> Result<SubdomainSpectrum<T>> {
    if nev == 0 {
        return Err(Error::InvalidArgument("requested eigenvalue count must be positive".into()));
    }
    PencilSolver::new(pencil)?.solve(nev, opts)
}

/// Spectrum of subdomain `j` large enough for the selection rule.
pub fn subdomain_spectrum<T: Scalar>(
    system: &DiscreteSystem<T>,
    decomp: &Decomposition,
    j: usize,
    rule: SelectionRule,
    opts: &EigenOptions,
) -> Result<SubdomainSpectrum<T>> {
    let pencil = assemble_pencil(system, decomp, j)?;
    let solver = PencilSolver::new(&pencil)?;
    match rule {
        SelectionRule::Fixed(0) => Ok(SubdomainSpectrum::empty(j)),
        SelectionRule::Fixed(n) => solver.solve(n, opts),
        SelectionRule::Threshold(lmax) => {
            let mut nev = opts.initial_nev.max(1);
            loop {
                let spec = solver.solve(nev, opts)?;
                let finite = spec.len() - spec.num_infinite();
                let last = spec.eigenvalues.last().copied().unwrap_or(0.0);
                if finite < nev || last <= lmax || nev >= pencil.n_u {
                    return Ok(spec);
                }
                nev *= 2;
            }
        }
    }
}

/// Spectra for all subdomains, computed in parallel and returned in subdomain order.
pub fn compute_spectra<T: Scalar>(
    system: &DiscreteSystem<T>,
    decomp: &Decomposition,
    rule: SelectionRule,
    opts: &EigenOptions,
) -> Result<Vec<SubdomainSpectrum<T>>> {
    rule.validate()?;
    (0..decomp.num_subdomains())
        .into_par_iter()
        .map(|j| subdomain_spectrum(system, decomp, j, rule, opts))
        .collect()
}

/// Indices of the selected modes of a spectrum.
pub fn select_modes<T>(spectrum: &SubdomainSpectrum<T>, rule: SelectionRule) -> Vec<usize> {
    let ninf = spectrum.num_infinite();
    let count = match rule {
        SelectionRule::Fixed(n) => n.max(ninf).min(spectrum.len()),
        SelectionRule::Threshold(t) => spectrum.eigenvalues.iter().take_while(|&&l| l > t).count(),
    };
    (0..count).collect()
}

/// Global coarse basis `R_Sᵀ` with its factorized Galerkin operator `B_S`.
#[derive(Debug, Clone)]
pub struct CoarseSpace<T: Scalar> {
    pub r_st: SparseMatrix<T>,
    pub r_s: SparseMatrix<T>,
    pub b_s: SparseMatrix<T>,
    pub lu: Option<Factorization<T>>,
    pub modes_per_subdomain: Vec<usize>,
    pub column_owner: Vec<usize>,
}

impl<T: Scalar> CoarseSpace<T> {
    /// Builds the space from sparse columns `(owner, [(dof, value)])`.
    pub fn from_columns(b: &SparseMatrix<T>, num_subdomains: usize, columns: Vec<(usize, Vec<(usize, T)>)>) -> Result<Self> {
        let n = b.nrows();
        let nc = columns.len();
        let mut t = TripletBuilder::with_capacity(n, nc, columns.iter().map(|c| c.1.len()).sum());
        let mut modes = vec![0; num_subdomains];
        let mut owner = Vec::with_capacity(nc);
        for (k, (j, col)) in columns.into_iter().enumerate() {
            modes[j] += 1;
            owner.push(j);
            for (d, v) in col {
                t.push(d, k, v);
            }
        }
        let r_st = t.build();
        let r_s = r_st.transpose();
        let b_s = triple_product(&r_s, b, &r_st)?;
        let lu = if nc == 0 {
            None
        } else {
            Some(factorize(&b_s).map_err(|e| match e {
                Error::Singular { pivot, .. } => {
                    let col = amd_ordering(&b_s)[pivot];
                    Error::RankDeficientCoarse { pivot, subdomain: owner[col] }
                }
                other => other,
            })?)
        };
        Ok(Self { r_st, r_s, b_s, lu, modes_per_subdomain: modes, column_owner: owner })
    }

    pub fn empty(n: usize, num_subdomains: usize) -> Self {
        Self {
            r_st: SparseMatrix::zeros(n, 0),
            r_s: SparseMatrix::zeros(0, n),
            b_s: SparseMatrix::zeros(0, 0),
            lu: None,
            modes_per_subdomain: vec![0; num_subdomains],
            column_owner: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.r_st.ncols()
    }

    /// `R_Sᵀ B_S⁻¹ R_S r`.
    pub fn correction(&self, r: &[T]) -> Result<Vec<T>> {
        match &self.lu {
            None => Ok(vec![T::zero(); self.r_st.nrows()]),
            Some(lu) => {
                let rc = self.r_s.spmv(r)?;
                let yc = lu.solve(&rc)?;
                self.r_st.spmv(&yc)
            }
        }
    }
}

/// PU-weighted eigenvectors glued into a global coarse basis.
pub fn build_coarse_space<T: Scalar>(
    system: &DiscreteSystem<T>,
    decomp: &Decomposition,
    spectra: &[SubdomainSpectrum<T>],
    rule: SelectionRule,
) -> Result<CoarseSpace<T>> {
    if spectra.len() != decomp.num_subdomains() {
        return Err(Error::DimensionMismatch { expected: decomp.num_subdomains(), got: spectra.len() });
    }
    let amax = system.a_a.max_abs().to_f64_lossy();
    let mut columns = Vec::new();
    for (j, spec) in spectra.iter().enumerate() {
        let modes = select_modes(spec, rule);
        if modes.is_empty() {
            continue;
        }
        let ov = &decomp.dofs_overlap[j];
        let pos = decomp.overlap_in_oversample(j);
        let a_ov = submatrix(&system.a_a, ov, ov)?;
        for k in modes {
            let phi = &spec.eigenvectors[k];
            let c: Vec<T> = pos.iter().zip(&decomp.pu[j]).map(|(&p, &w)| T::of(w) * phi[p]).collect();
            let an = dot(&c, &a_ov.spmv(&c)?).to_f64_lossy().max(0.0).sqrt();
            let en = norm2(&c).to_f64_lossy();
            if !(an > DROP_TOLERANCE * amax.sqrt() * en) {
                log::warn!("dropping coarse column {k} of subdomain {j}: vanishing a-seminorm");
                continue;
            }
            let s = T::of(1.0 / an);
            columns.push((j, ov.iter().zip(c).map(|(&d, v)| (d, v * s)).collect()));
        }
    }
    CoarseSpace::from_columns(&system.b, decomp.num_subdomains(), columns)
}

/// PU-weighted constants (degree 0) or constants and linears (degree 1).
pub fn build_pou_coarse_space<T: Scalar>(system: &DiscreteSystem<T>, decomp: &Decomposition, degree: usize) -> Result<CoarseSpace<T>> {
    if degree > 1 {
        return Err(Error::InvalidArgument(format!("polynomial degree must be 0 or 1, got {degree}")));
    }
    let mut columns = Vec::new();
    for j in 0..decomp.num_subdomains() {
        let ov = &decomp.dofs_overlap[j];
        let core = &decomp.core[j];
        let mut cen = [0.0; 2];
        for &c in core {
            let p = system.grid.cell_center(c);
            cen[0] += p[0];
            cen[1] += p[1];
        }
        cen[0] /= core.len() as f64;
        cen[1] /= core.len() as f64;
        let funcs: &[fn([f64; 2], [f64; 2]) -> f64] = if degree == 0 {
            &[|_, _| 1.0]
        } else {
            &[|_, _| 1.0, |x, c| x[0] - c[0], |x, c| x[1] - c[1]]
        };
        for f in funcs {
            let col = ov
                .iter()
                .zip(&decomp.pu[j])
                .map(|(&d, &w)| (d, T::of(w * f(system.dof_coordinates(d), cen))))
                .collect();
            columns.push((j, col));
        }
    }
    CoarseSpace::from_columns(&system.b, decomp.num_subdomains(), columns)
}

/// Writes `subdomain,k,lambda,residual` rows, `k` starting at 1.
pub fn write_spectra_csv<T, W: Write>(spectra: &[SubdomainSpectrum<T>], mut out: W) -> Result<()> {
    writeln!(out, "subdomain,k,lambda,residual")?;
    for s in spectra {
        for (k, (l, r)) in s.eigenvalues.iter().zip(&s.residuals).enumerate() {
            let lam = if l.is_infinite() { "inf".to_string() } else { format!("{l:.17e}") };
            writeln!(out, "{},{},{},{:.6e}", s.subdomain, k + 1, lam, r)?;
        }
    }
    Ok(())
}

/// Parses rows written by [`write_spectra_csv`] into `(subdomain, k, lambda, residual)`.
pub fn read_spectra_csv<R: BufRead>(input: R) -> Result<Vec<(usize, usize, f64, f64)>> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Parse(format!("bad spectrum row `{line}`")));
        }
        let bad = |s: &str| Error::Parse(format!("bad field `{s}`"));
        rows.push((
            f[0].parse().map_err(|_| bad(f[0]))?,
            f[1].parse().map_err(|_| bad(f[1]))?,
            f[2].parse().map_err(|_| bad(f[2]))?,
            f[3].parse().map_err(|_| bad(f[3]))?,
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_pencil() {
        let a = SparseMatrix::from_diagonal(&[1.0, 2.0]);
        let m = SparseMatrix::from_diagonal(&[2.0, 2.0]);
        let p = EigenPencil::from_blocks(0, a, m, SparseMatrix::zeros(0, 2)).unwrap();
        let s = solve_pencil(&p, 2, &EigenOptions::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s.eigenvalues[0] - 2.0).abs() < 1e-12);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-12);
        assert!(s.flagged.iter().all(|f| !f));
    }

    #[test]
    fn selection() {
        let s: SubdomainSpectrum<f64> = SubdomainSpectrum {
            subdomain: 0,
            eigenvalues: vec![f64::INFINITY, 5.1, 1.9, 0.3],
            eigenvectors: vec![vec![]; 4],
            residuals: vec![0.0; 4],
            flagged: vec![false; 4],
        };
        assert_eq!(select_modes(&s, SelectionRule::Threshold(2.0)), vec![0, 1]);
        assert_eq!(select_modes(&s, SelectionRule::Fixed(3)), vec![0, 1, 2]);
        assert_eq!(select_modes(&s, SelectionRule::Fixed(0)), vec![0]);
        let e: SubdomainSpectrum<f64> = SubdomainSpectrum::empty(0);
        assert!(select_modes(&e, SelectionRule::Threshold(2.0)).is_empty());
        assert!(SelectionRule::Threshold(0.0).validate().is_err());
    }

    #[test]
    fn spectra_csv_roundtrip() {
        let s: Vec<SubdomainSpectrum<f64>> = (0..3)
            .map(|j| SubdomainSpectrum {
                subdomain: j,
                eigenvalues: (0..5).map(|k| 1.0 / (k + 1 + j) as f64).collect(),
                eigenvectors: vec![vec![]; 5],
                residuals: vec![1e-12; 5],
                flagged: vec![false; 5],
            })
            .collect();
        let mut buf = Vec::new();
        write_spectra_csv(&s, &mut buf).unwrap();
        let rows = read_spectra_csv(&buf[..]).unwrap();
        assert_eq!(rows.len(), 15);
        assert_eq!(rows[7].2, s[1].eigenvalues[2]);
        let mut buf = Vec::new();
        write_spectra_csv::<f64, _>(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "subdomain,k,lambda,residual\n");
    }
}
