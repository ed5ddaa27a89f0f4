//! Restricted additive Schwarz preconditioners and the outer iterations.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coarse::CoarseSpace;
use crate::decomp::Decomposition;
use crate::error::{Error, Result};
use crate::scalar::{dot, norm2, Scalar};
use crate::sparse::{factorize, submatrix, Factorization, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerMode {
    Identity,
    OneLevel,
    TwoLevelHybrid,
    CoarseOnly,
}

impl std::str::FromStr for PreconditionerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "identity" | "none" => Ok(Self::Identity),
            "one-level" | "ras" => Ok(Self::OneLevel),
            "two-level-hybrid" | "two-level" | "hybrid" => Ok(Self::TwoLevelHybrid),
            "coarse-only" => Ok(Self::CoarseOnly),
            other => Err(Error::InvalidArgument(format!("unknown preconditioner `{other}`"))),
        }
    }
}

struct LocalSolver<T: Scalar> {
    dofs: Vec<usize>,
    weights: Vec<T>,
    lu: Factorization<T>,
}

/// `M = Σ_j R_jᵀ Ξ_j B_j⁻¹ R_j`, optionally followed by a multiplicative coarse correction.
pub struct Preconditioner<T: Scalar> {
    n: usize,
    mode: PreconditionerMode,
    locals: Vec<LocalSolver<T>>,
    b: Option<SparseMatrix<T>>,
    coarse: Option<CoarseSpace<T>>,
}

impl<T: Scalar> Preconditioner<T> {
    pub fn identity(n: usize) -> Self {
        Self { n, mode: PreconditionerMode::Identity, locals: Vec::new(), b: None, coarse: None }
    }

    /// Factorizes every `B_j = R_j B R_jᵀ` (in parallel).
    pub fn new(b: &SparseMatrix<T>, decomp: &Decomposition, coarse: Option<CoarseSpace<T>>, mode: PreconditionerMode) -> Result<Self> {
        let n = b.nrows();
        if decomp.num_dofs() != n {
            return Err(Error::DimensionMismatch { expected: n, got: decomp.num_dofs() });
        }
        match mode {
            PreconditionerMode::Identity => return Ok(Self::identity(n)),
            PreconditionerMode::TwoLevelHybrid | PreconditionerMode::CoarseOnly if coarse.is_none() => {
                return Err(Error::InvalidArgument(format!("{mode:?} preconditioner needs a coarse space")));
            }
            _ => {}
        }
        if let Some(c) = &coarse {
            if c.r_st.nrows() != n {
                return Err(Error::DimensionMismatch { expected: n, got: c.r_st.nrows() });
            }
        }
        let locals = if mode == PreconditionerMode::CoarseOnly {
            Vec::new()
        } else {
            (0..decomp.num_subdomains())
                .into_par_iter()
                .map(|j| {
                    let dofs = decomp.dofs_overlap[j].clone();
                    let bj = submatrix(b, &dofs, &dofs)?;
                    let lu = factorize(&bj)?;
                    let weights = decomp.pu[j].iter().map(|&w| T::of(w)).collect();
                    Ok(LocalSolver { dofs, weights, lu })
                })
                .collect::<Result<Vec<_>>>()?
        };
        Ok(Self { n, mode, locals, b: Some(b.clone()), coarse })
    }

    pub fn mode(&self) -> PreconditionerMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn coarse_dim(&self) -> usize {
        self.coarse.as_ref().map_or(0, |c| c.dim())
    }

    pub fn coarse(&self) -> Option<&CoarseSpace<T>> {
        self.coarse.as_ref()
    }

    /// Total number of nonzeros in the local LU factors.
    pub fn factor_nnz(&self) -> usize {
        self.locals.iter().map(|l| l.lu.factor_nnz()).sum::<usize>()
            + self.coarse.as_ref().and_then(|c| c.lu.as_ref()).map_or(0, |lu| lu.factor_nnz())
    }

    /// `Σ_j R_jᵀ Ξ_j B_j⁻¹ R_j r`, summed in subdomain order.
    pub fn apply_one_level(&self, r: &[T]) -> Result<Vec<T>> {
        if r.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: r.len() });
        }
        let parts: Vec<Vec<T>> = self
            .locals
            .par_iter()
            .map(|l| {
                let rj: Vec<T> = l.dofs.iter().map(|&d| r[d]).collect();
                l.lu.solve(&rj)
            })
            .collect::<Result<_>>()?;
        let mut z = vec![T::zero(); self.n];
        for (l, x) in self.locals.iter().zip(parts) {
            for ((&d, &w), v) in l.dofs.iter().zip(&l.weights).zip(x) {
                z[d] += w * v;
            }
        }
        Ok(z)
    }

    /// `z½ + R_Sᵀ B_S⁻¹ R_S (r − B z½)` with `z½` the one-level action.
    pub fn apply_two_level(&self, r: &[T]) -> Result<Vec<T>> {
        let (coarse, b) = match (&self.coarse, &self.b) {
            (Some(c), Some(b)) => (c, b),
            _ => return Err(Error::InvalidArgument("two-level application needs a coarse space".into())),
        };
        let mut z = self.apply_one_level(r)?;
        let bz = b.spmv(&z)?;
        let res: Vec<T> = r.iter().zip(&bz).map(|(&a, &c)| a - c).collect();
        let corr = coarse.correction(&res)?;
        for (zi, c) in z.iter_mut().zip(corr) {
            *zi += c;
        }
        Ok(z)
    }

    pub fn apply(&self, r: &[T]) -> Result<Vec<T>> {
        match self.mode {
            PreconditionerMode::Identity => {
                if r.len() != self.n {
                    return Err(Error::DimensionMismatch { expected: self.n, got: r.len() });
                }
                Ok(r.to_vec())
            }
            PreconditionerMode::OneLevel => self.apply_one_level(r),
            PreconditionerMode::TwoLevelHybrid => self.apply_two_level(r),
            PreconditionerMode::CoarseOnly => self.coarse.as_ref().expect("coarse space").correction(r),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KrylovVariant {
    Gmres,
    Richardson,
}

impl std::str::FromStr for KrylovVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gmres" => Ok(Self::Gmres),
            "richardson" => Ok(Self::Richardson),
            other => Err(Error::InvalidArgument(format!("unknown iteration `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovConfig {
    pub epsilon: f64,
    pub restart: usize,
    pub max_iters: usize,
    pub variant: KrylovVariant,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        Self { epsilon: 1e-6, restart: 100, max_iters: 1000, variant: KrylovVariant::Gmres }
    }
}

impl KrylovConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if self.restart == 0 {
            return Err(Error::InvalidArgument("restart length must be at least 1".into()));
        }
        Ok(())
    }
}

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub assembly: f64,
    pub eigenproblems: f64,
    pub factorizations: f64,
    pub solve: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub variant: KrylovVariant,
    pub iterations: usize,
    pub converged: bool,
    /// Preconditioned residual norms relative to the initial one.
    pub residuals: Vec<f64>,
    /// `‖F − B u_k‖` relative to `‖F − B u_0‖`.
    pub true_residuals: Vec<f64>,
    pub reduction: f64,
    pub true_reduction: f64,
    pub coarse_dim: usize,
    pub restarts: usize,
    pub stagnation: bool,
    pub breakdown: bool,
    pub diverged: bool,
    pub timings: Timings,
}

impl SolveReport {
    fn new(variant: KrylovVariant, coarse_dim: usize) -> Self {
        Self {
            variant,
            iterations: 0,
            converged: false,
            residuals: vec![1.0],
            true_residuals: vec![1.0],
            reduction: 1.0,
            true_reduction: 1.0,
            coarse_dim,
            restarts: 0,
            stagnation: false,
            breakdown: false,
            diverged: false,
            timings: Timings::default(),
        }
    }

    /// Geometric mean of the per-iteration residual reduction.
    pub fn average_rate(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.reduction.powf(1.0 / self.iterations as f64)
        }
    }

    /// One row per iteration: `k,preconditioned_residual,true_residual`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,preconditioned_residual,true_residual")?;
        for (k, (p, t)) in self.residuals.iter().zip(&self.true_residuals).enumerate() {
            writeln!(out, "{k},{p:.12e},{t:.12e}")?;
        }
        Ok(())
    }
}

fn check_dims<T: Scalar>(b: &SparseMatrix<T>, p: &Preconditioner<T>, f: &[T], u0: &[T]) -> Result<()> {
    let n = b.nrows();
    for got in [b.ncols(), p.dim(), f.len(), u0.len()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    Ok(())
}

fn residual<T: Scalar>(b: &SparseMatrix<T>, f: &[T], u: &[T]) -> Result<Vec<T>> {
    let bu = b.spmv(u)?;
    Ok(f.iter().zip(bu).map(|(&a, c)| a - c).collect())
}

/// Left-preconditioned restarted GMRES on `M B u = M F`.
pub fn gmres<T: Scalar>(
    b: &SparseMatrix<T>,
    p: &Preconditioner<T>,
    f: &[T],
    cfg: &KrylovConfig,
    u0: &[T],
) -> Result<(Vec<T>, SolveReport)> {
    cfg.validate()?;
    check_dims(b, p, f, u0)?;
    let start = Instant::now();
    let mut report = SolveReport::new(KrylovVariant::Gmres, p.coarse_dim());
    let mut u = u0.to_vec();
    let mut rt = residual(b, f, &u)?;
    let rt0 = norm2(&rt).to_f64_lossy();
    let mut r = p.apply(&rt)?;
    let beta0 = norm2(&r).to_f64_lossy();
    if beta0 == 0.0 {
        report.converged = true;
        report.reduction = 0.0;
        report.true_reduction = if rt0 == 0.0 { 0.0 } else { 1.0 };
        report.timings.solve = start.elapsed().as_secs_f64();
        return Ok((u, report));
    }
    let rel_true = |v: f64| if rt0 > 0.0 { v / rt0 } else { 0.0 };
    let m = cfg.restart;
    'outer: loop {
        let beta = norm2(&r);
        let cycle_start = beta.to_f64_lossy() / beta0;
        let mut basis: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        let mut bbasis: Vec<Vec<T>> = Vec::with_capacity(m);
        basis.push(r.iter().map(|&v| v / beta).collect());
        let mut h = vec![vec![T::zero(); m + 1]; m];
        let mut cs = vec![T::zero(); m];
        let mut sn = vec![T::zero(); m];
        let mut g = vec![T::zero(); m + 1];
        g[0] = beta;
        let mut k = 0;
        let mut stop = false;
        while k < m {
            let bv = b.spmv(&basis[k])?;
            let mut w = p.apply(&bv)?;
            bbasis.push(bv);
            let wnorm0 = norm2(&w);
            for _ in 0..2 {
                for (i, v) in basis.iter().enumerate() {
                    let hij = dot(v, &w);
                    h[k][i] += hij;
                    for (wi, &vi) in w.iter_mut().zip(v) {
                        *wi -= hij * vi;
                    }
                }
            }
            let hn = norm2(&w);
            h[k][k + 1] = hn;
            for i in 0..k {
                let t = cs[i] * h[k][i] + sn[i] * h[k][i + 1];
                h[k][i + 1] = -sn[i] * h[k][i] + cs[i] * h[k][i + 1];
                h[k][i] = t;
            }
            let (a, c) = (h[k][k], h[k][k + 1]);
            let d = (a * a + c * c).sqrt();
            if d == T::zero() {
                cs[k] = T::one();
                sn[k] = T::zero();
            } else {
                cs[k] = a / d;
                sn[k] = c / d;
            }
            h[k][k] = d;
            h[k][k + 1] = T::zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            k += 1;
            report.iterations += 1;
            let res = g[k].abs().to_f64_lossy() / beta0;
            report.residuals.push(res);
            // True residual F − B u_k = rt − (B V) y without forming u_k.
            let y = back_substitute(&h, &g, k);
            let mut tr = rt.clone();
            for (bv, &yi) in bbasis.iter().zip(&y) {
                for (t, &x) in tr.iter_mut().zip(bv) {
                    *t -= yi * x;
                }
            }
            report.true_residuals.push(rel_true(norm2(&tr).to_f64_lossy()));
            let breakdown = !(hn > T::of(1e-14) * wnorm0);
            if breakdown {
                report.breakdown = true;
            }
            if res < cfg.epsilon || breakdown || report.iterations >= cfg.max_iters {
                stop = true;
                break;
            }
            basis.push(w.iter().map(|&v| v / hn).collect());
        }
        let y = back_substitute(&h, &g, k);
        for (v, &yi) in basis.iter().zip(&y) {
            for (ui, &vi) in u.iter_mut().zip(v) {
                *ui += yi * vi;
            }
        }
        rt = residual(b, f, &u)?;
        r = p.apply(&rt)?;
        let explicit = norm2(&r).to_f64_lossy() / beta0;
        report.reduction = explicit;
        if let Some(last) = report.true_residuals.last_mut() {
            *last = rel_true(norm2(&rt).to_f64_lossy());
        }
        if explicit < cfg.epsilon {
            report.converged = true;
            break 'outer;
        }
        if report.breakdown || report.iterations >= cfg.max_iters {
            break 'outer;
        }
        if !stop {
            if explicit > 0.99 * cycle_start {
                report.stagnation = true;
                log::warn!("GMRES stagnating after {} iterations", report.iterations);
            }
            report.restarts += 1;
        } else {
            report.restarts += 1;
        }
    }
    report.true_reduction = *report.true_residuals.last().unwrap();
    report.timings.solve = start.elapsed().as_secs_f64();
    Ok((u, report))
}

fn back_substitute<T: Scalar>(h: &[Vec<T>], g: &[T], k: usize) -> Vec<T> {
    let mut y = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[j][i] * y[j];
        }
        y[i] = if h[i][i] == T::zero() { T::zero() } else { s / h[i][i] };
    }
    y
}

/// `u_{k+1} = u_k + M (F − B u_k)`; `observe` sees every iterate including `u_0`.
pub fn richardson_observed<T: Scalar>(
    b: &SparseMatrix<T>,
    p: &Preconditioner<T>,
    f: &[T],
    cfg: &KrylovConfig,
    u0: &[T],
    mut observe: impl FnMut(usize, &[T]),
) -> Result<(Vec<T>, SolveReport)> {
    cfg.validate()?;
    check_dims(b, p, f, u0)?;
    let start = Instant::now();
    let mut report = SolveReport::new(KrylovVariant::Richardson, p.coarse_dim());
    let mut u = u0.to_vec();
    observe(0, &u);
    let mut rt = residual(b, f, &u)?;
    let rt0 = norm2(&rt).to_f64_lossy();
    let mut z = p.apply(&rt)?;
    let z0 = norm2(&z).to_f64_lossy();
    if z0 == 0.0 {
        report.converged = true;
        report.reduction = 0.0;
        report.true_reduction = if rt0 == 0.0 { 0.0 } else { 1.0 };
        return Ok((u, report));
    }
    let mut growth = 0;
    let mut prev = 1.0;
    while report.iterations < cfg.max_iters {
        for (ui, &zi) in u.iter_mut().zip(&z) {
            *ui += zi;
        }
        report.iterations += 1;
        observe(report.iterations, &u);
        rt = residual(b, f, &u)?;
        z = p.apply(&rt)?;
        let res = norm2(&z).to_f64_lossy() / z0;
        report.residuals.push(res);
        report.true_residuals.push(if rt0 > 0.0 { norm2(&rt).to_f64_lossy() / rt0 } else { 0.0 });
        if res < cfg.epsilon {
            report.converged = true;
            break;
        }
        growth = if res > prev { growth + 1 } else { 0 };
        prev = res;
        if growth >= 10 || !res.is_finite() {
            report.diverged = true;
            log::warn!("Richardson iteration diverging after {} steps", report.iterations);
            break;
        }
    }
    report.reduction = *report.residuals.last().unwrap();
    report.true_reduction = *report.true_residuals.last().unwrap();
    report.timings.solve = start.elapsed().as_secs_f64();
    Ok((u, report))
}

pub fn richardson<T: Scalar>(
    b: &SparseMatrix<T>,
    p: &Preconditioner<T>,
    f: &[T],
    cfg: &KrylovConfig,
    u0: &[T],
) -> Result<(Vec<T>, SolveReport)> {
    richardson_observed(b, p, f, cfg, u0, |_, _| {})
}

/// Dispatches on `cfg.variant`.
pub fn solve<T: Scalar>(
    b: &SparseMatrix<T>,
    p: &Preconditioner<T>,
    f: &[T],
    cfg: &KrylovConfig,
    u0: &[T],
) -> Result<(Vec<T>, SolveReport)> {
    match cfg.variant {
        KrylovVariant::Gmres => gmres(b, p, f, cfg, u0),
        KrylovVariant::Richardson => richardson(b, p, f, cfg, u0),
    }
}

/// `sqrt((u − v)ᵀ A (u − v))`, clamped at zero.
pub fn a_norm_error<T: Scalar>(u: &[T], uref: &[T], a: &SparseMatrix<T>) -> Result<f64> {
    if u.len() != uref.len() {
        return Err(Error::DimensionMismatch { expected: uref.len(), got: u.len() });
    }
    let e: Vec<T> = u.iter().zip(uref).map(|(&x, &y)| x - y).collect();
    let ae = a.spmv(&e)?;
    Ok(dot(&e, &ae).to_f64_lossy().max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system_one_iteration() {
        let b = SparseMatrix::<f64>::identity(5);
        let p = Preconditioner::identity(5);
        let f = vec![1.0, -2.0, 3.0, 0.5, 0.0];
        let (u, rep) = gmres(&b, &p, &f, &KrylovConfig::default(), &[0.0; 5]).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert!(u.iter().zip(&f).all(|(a, b)| (a - b).abs() < 1e-14));
        assert_eq!(rep.residuals.len(), rep.iterations + 1);
        assert_eq!(rep.residuals[0], 1.0);
    }

    #[test]
    fn zero_rhs_returns_immediately() {
        let b = SparseMatrix::<f64>::identity(3);
        let p = Preconditioner::identity(3);
        let (u, rep) = gmres(&b, &p, &[0.0; 3], &KrylovConfig::default(), &[0.0; 3]).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(rep.converged);
        assert_eq!(u, vec![0.0; 3]);
    }

    #[test]
    fn config_validation() {
        let mut c = KrylovConfig::default();
        assert!(c.validate().is_ok());
        c.epsilon = 1.0;
        assert!(c.validate().is_err());
        c.epsilon = 1e-6;
        c.restart = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn a_norm_with_identity_is_euclidean() {
        let a = SparseMatrix::<f64>::identity(2);
        assert!((a_norm_error(&[3.0, 4.0], &[0.0, 0.0], &a).unwrap() - 5.0).abs() < 1e-15);
        assert_eq!(a_norm_error(&[1.0, 2.0], &[1.0, 2.0], &a).unwrap(), 0.0);
    }

    #[test]
    fn modes_parse() {
        assert_eq!("two-level-hybrid".parse::<PreconditionerMode>().unwrap(), PreconditionerMode::TwoLevelHybrid);
        assert_eq!("one_level".parse::<PreconditionerMode>().unwrap(), PreconditionerMode::OneLevel);
        assert!("bogus".parse::<PreconditionerMode>().is_err());
        assert_eq!("richardson".parse::<KrylovVariant>().unwrap(), KrylovVariant::Richardson);
    }
}
