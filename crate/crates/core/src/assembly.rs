//! Weighted SIPG discontinuous Galerkin (Q1, upwind) and cell-centered
//! finite-volume discretizations.
//!
//! Both backends produce the system matrix `B`, the load vector `F` and the
//! symmetric diffusion-only matrix `A_a` used as the a-inner-product.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{BoundaryTag, Grid};
use crate::problem::ProblemSpec;
use crate::scalar::Scalar;
use crate::sparse::{SparseMatrix, TripletBuilder};

const GAUSS2: [(f64, f64); 2] = [(0.211_324_865_405_187_1, 0.5), (0.788_675_134_594_812_9, 0.5)];

const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discretization {
    Dg,
    Ccfv,
}

impl Discretization {
    pub fn dofs_per_cell(self) -> usize {
        match self {
            Discretization::Dg => 4,
            Discretization::Ccfv => 1,
        }
    }
}

impl std::str::FromStr for Discretization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dg" => Ok(Self::Dg),
            "ccfv" | "fv" => Ok(Self::Ccfv),
            other => Err(Error::InvalidArgument(format!("unknown discretization `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DgParams {
    pub alpha: f64,
    pub degree: usize,
}

impl Default for DgParams {
    fn default() -> Self {
        Self { alpha: 3.0, degree: 1 }
    }
}

impl DgParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("penalty scale must be positive, got {}", self.alpha)));
        }
        if self.degree != 1 {
            return Err(Error::InvalidArgument(format!("only degree 1 is supported, got {}", self.degree)));
        }
        Ok(())
    }

    /// `p (p + d - 1)` for d = 2.
    fn degree_factor(&self) -> f64 {
        let p = self.degree as f64;
        p * (p + 1.0)
    }
}

/// Assembled linear system plus the data needed to re-assemble local forms.
#[derive(Debug, Clone)]
pub struct DiscreteSystem<T> {
    pub b: SparseMatrix<T>,
    pub f: Vec<T>,
    pub a_a: SparseMatrix<T>,
    pub kind: Discretization,
    pub params: DgParams,
    pub grid: Arc<Grid>,
    pub problem: Arc<ProblemSpec>,
}

impl<T: Scalar> DiscreteSystem<T> {
    pub fn num_dofs(&self) -> usize {
        self.b.nrows()
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.kind.dofs_per_cell()
    }

    pub fn cell_of_dof(&self, dof: usize) -> usize {
        dof / self.dofs_per_cell()
    }

    /// DOFs of a sorted cell list, in increasing order.
    pub fn dofs_of_cells(&self, cells: &[usize]) -> Vec<usize> {
        let k = self.dofs_per_cell();
        cells.iter().flat_map(|&c| (0..k).map(move |l| c * k + l)).collect()
    }

    /// Nodal position of a DOF: cell vertex for DG, cell center for CCFV.
    pub fn dof_coordinates(&self, dof: usize) -> [f64; 2] {
        let k = self.dofs_per_cell();
        let cell = dof / k;
        match self.kind {
            Discretization::Ccfv => self.grid.cell_center(cell),
            Discretization::Dg => {
                let [xa, xb, ya, yb] = self.grid.cell_bounds(cell);
                let l = dof % k;
                [if l & 1 == 0 { xa } else { xb }, if l & 2 == 0 { ya } else { yb }]
            }
        }
    }

    /// a-inner-product restricted to a sorted cell set, with natural
    /// conditions on the cut faces and the global Dirichlet terms kept.
    pub fn local_inner_product(&self, cells: &[usize]) -> Result<SparseMatrix<T>> {
        let a = self.problem.inner_product_diffusion();
        let t = diffusion_triplets(&self.grid, &a, self.kind, &self.params, Some(cells))?;
        Ok(t.build().cast())
    }

    pub fn cast<U: Scalar>(&self) -> DiscreteSystem<U> {
        DiscreteSystem {
            b: self.b.cast(),
            f: self.f.iter().map(|x| U::of(x.to_f64_lossy())).collect(),
            a_a: self.a_a.cast(),
            kind: self.kind,
            params: self.params,
            grid: Arc::clone(&self.grid),
            problem: Arc::clone(&self.problem),
        }
    }
}

pub fn assemble<T: Scalar>(grid: &Grid, prob: &ProblemSpec, kind: Discretization, params: DgParams) -> Result<DiscreteSystem<T>> {
    match kind {
        Discretization::Dg => assemble_dg(grid, prob, params),
        Discretization::Ccfv => assemble_ccfv(grid, prob),
    }
}

pub fn assemble_dg<T: Scalar>(grid: &Grid, prob: &ProblemSpec, params: DgParams) -> Result<DiscreteSystem<T>> {
    params.validate()?;
    assemble_impl(grid, prob, Discretization::Dg, params)
}

pub fn assemble_ccfv<T: Scalar>(grid: &Grid, prob: &ProblemSpec) -> Result<DiscreteSystem<T>> {
    assemble_impl(grid, prob, Discretization::Ccfv, DgParams::default())
}

fn assemble_impl<T: Scalar>(grid: &Grid, prob: &ProblemSpec, kind: Discretization, params: DgParams) -> Result<DiscreteSystem<T>> {
    prob.validate(grid)?;
    check_faces(grid)?;
    let a_phys = &prob.diffusion;
    let a_ip = prob.inner_product_diffusion();
    let diff_phys = diffusion_triplets(grid, a_phys, kind, &params, None)?;
    let conv = match kind {
        Discretization::Dg => dg_convection_triplets(grid, prob),
        Discretization::Ccfv => fv_convection_triplets(grid, prob),
    };
    let f = match kind {
        Discretization::Dg => dg_rhs(grid, prob, &params),
        Discretization::Ccfv => fv_rhs(grid, prob),
    };
    let a_a = if a_ip == *a_phys {
        diff_phys.clone().build()
    } else {
        diffusion_triplets(grid, &a_ip, kind, &params, None)?.build()
    };
    let mut bt = diff_phys;
    bt.extend(conv);
    let b = bt.build();
    Ok(DiscreteSystem {
        b: b.cast(),
        f: f.into_iter().map(T::of).collect(),
        a_a: a_a.cast(),
        kind,
        params,
        grid: Arc::new(grid.clone()),
        problem: Arc::new(prob.clone()),
    })
}

fn check_faces(grid: &Grid) -> Result<()> {
    let faces = grid.faces();
    let bad = faces.interior.iter().map(|f| f.measure).chain(faces.boundary.iter().map(|f| f.measure)).any(|m| !(m > 0.0));
    if bad {
        return Err(Error::InvalidGrid("zero-measure face".into()));
    }
    Ok(())
}

/// Q1 shape values and physical gradients at a point of a cell.
fn q1_basis(bounds: [f64; 4], p: [f64; 2]) -> ([f64; 4], [[f64; 2]; 4]) {
    let [xa, xb, ya, yb] = bounds;
    let (hx, hy) = (xb - xa, yb - ya);
    let s = (p[0] - xa) / hx;
    let t = (p[1] - ya) / hy;
    let vals = [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t];
    let grads = [
        [-(1.0 - t) / hx, -(1.0 - s) / hy],
        [(1.0 - t) / hx, -s / hy],
        [-t / hx, (1.0 - s) / hy],
        [t / hx, s / hy],
    ];
    (vals, grads)
}

#[inline]
fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Face quadrature points and weights (weights include the face measure).
fn face_rule(a: [f64; 2], b: [f64; 2], measure: f64) -> [([f64; 2], f64); 2] {
    GAUSS2.map(|(s, w)| ([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], w * measure))
}

/// Cell quadrature points and weights.
fn cell_rule(bounds: [f64; 4]) -> impl Iterator<Item = ([f64; 2], f64)> {
    let [xa, xb, ya, yb] = bounds;
    let area = (xb - xa) * (yb - ya);
    GAUSS2.into_iter().flat_map(move |(sy, wy)| {
        GAUSS2.into_iter().map(move |(sx, wx)| ([xa + sx * (xb - xa), ya + sy * (yb - ya)], wx * wy * area))
    })
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b > 0.0 {
        2.0 * a * b / (a + b)
    } else {
        0.0
    }
}

/// Weights `(w-, w+)` of the diffusion-weighted average.
fn face_weights(dm: f64, dp: f64) -> (f64, f64) {
    if dm + dp > 0.0 {
        (dp / (dm + dp), dm / (dm + dp))
    } else {
        (0.5, 0.5)
    }
}

fn interior_penalty(params: &DgParams, dm: f64, dp: f64, measure: f64, vol_m: f64, vol_p: f64) -> f64 {
    params.alpha * harmonic(dm, dp) * params.degree_factor() * measure / vol_m.min(vol_p)
}

fn boundary_penalty(params: &DgParams, d: f64, measure: f64, vol: f64) -> f64 {
    params.alpha * d * params.degree_factor() * measure / vol
}

/// Local index map for an optional cell subset.
fn cell_map(n: usize, cells: Option<&[usize]>) -> Result<(Vec<usize>, usize)> {
    match cells {
        None => Ok(((0..n).collect(), n)),
        Some(set) => {
            let mut map = vec![usize::MAX; n];
            for (k, &c) in set.iter().enumerate() {
                if c >= n {
                    return Err(Error::IndexOutOfRange { index: c, dim: n });
                }
                if k > 0 && set[k - 1] >= c {
                    return Err(Error::InvalidArgument("cell set must be sorted and unique".into()));
                }
                map[c] = k;
            }
            Ok((map, set.len()))
        }
    }
}

/// Symmetric diffusion terms, on all cells or on a subset with natural
/// conditions on faces leaving the subset.
fn diffusion_triplets(
    grid: &Grid,
    a: &[f64],
    kind: Discretization,
    params: &DgParams,
    cells: Option<&[usize]>,
) -> Result<TripletBuilder<f64>> {
    let (map, nloc) = cell_map(grid.num_cells(), cells)?;
    Ok(match kind {
        Discretization::Dg => dg_diffusion(grid, a, params, &map, nloc),
        Discretization::Ccfv => fv_diffusion(grid, a, &map, nloc),
    })
}

fn dg_diffusion(grid: &Grid, a: &[f64], params: &DgParams, map: &[usize], nloc: usize) -> TripletBuilder<f64> {
    let n = 4 * nloc;
    let mut t = TripletBuilder::with_capacity(n, n, 16 * nloc * 5);
    for (cell, &lc) in map.iter().enumerate() {
        if lc == usize::MAX {
            continue;
        }
        let bounds = grid.cell_bounds(cell);
        let mut k = [[0.0; 4]; 4];
        for (p, w) in cell_rule(bounds) {
            let (_, g) = q1_basis(bounds, p);
            for i in 0..4 {
                for j in 0..4 {
                    k[i][j] += w * a[cell] * dot2(g[j], g[i]);
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                t.push(4 * lc + i, 4 * lc + j, k[i][j]);
            }
        }
    }
    for f in &grid.faces().interior {
        let (lm, lp) = (map[f.minus], map[f.plus]);
        if lm == usize::MAX || lp == usize::MAX {
            continue;
        }
        let (dm, dp) = (a[f.minus], a[f.plus]);
        let (wm, wp) = face_weights(dm, dp);
        let sigma = interior_penalty(params, dm, dp, f.measure, grid.cell_area(f.minus), grid.cell_area(f.plus));
        let (bm, bp) = (grid.cell_bounds(f.minus), grid.cell_bounds(f.plus));
        let mut k = [[0.0; 8]; 8];
        for (p, w) in face_rule(f.a, f.b, f.measure) {
            let (vm, gm) = q1_basis(bm, p);
            let (vp, gp) = q1_basis(bp, p);
            let mut jump = [0.0; 8];
            let mut flux = [0.0; 8];
            for l in 0..4 {
                jump[l] = vm[l];
                jump[4 + l] = -vp[l];
                flux[l] = wm * dm * dot2(gm[l], f.normal);
                flux[4 + l] = wp * dp * dot2(gp[l], f.normal);
            }
            for i in 0..8 {
                for j in 0..8 {
                    k[i][j] += w * (sigma * jump[j] * jump[i] - flux[j] * jump[i] - flux[i] * jump[j]);
                }
            }
        }
        let base = |l: usize| if l < 4 { 4 * lm + l } else { 4 * lp + l - 4 };
        for i in 0..8 {
            for j in 0..8 {
                t.push(base(i), base(j), k[i][j]);
            }
        }
    }
    for f in &grid.faces().boundary {
        let lc = map[f.cell];
        if lc == usize::MAX || f.tag != BoundaryTag::Dirichlet {
            continue;
        }
        let d = a[f.cell];
        let sigma = boundary_penalty(params, d, f.measure, grid.cell_area(f.cell));
        let bounds = grid.cell_bounds(f.cell);
        let mut k = [[0.0; 4]; 4];
        for (p, w) in face_rule(f.a, f.b, f.measure) {
            let (v, g) = q1_basis(bounds, p);
            for i in 0..4 {
                for j in 0..4 {
                    let fi = d * dot2(g[i], f.normal);
                    let fj = d * dot2(g[j], f.normal);
                    k[i][j] += w * (sigma * v[j] * v[i] - fj * v[i] - fi * v[j]);
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                t.push(4 * lc + i, 4 * lc + j, k[i][j]);
            }
        }
    }
    t
}

fn dg_convection_triplets(grid: &Grid, prob: &ProblemSpec) -> TripletBuilder<f64> {
    let n = 4 * grid.num_cells();
    let mut t = TripletBuilder::with_capacity(n, n, 16 * grid.num_cells() * 3);
    for cell in 0..grid.num_cells() {
        let bounds = grid.cell_bounds(cell);
        let mut k = [[0.0; 4]; 4];
        for (p, w) in cell_rule(bounds) {
            let (v, g) = q1_basis(bounds, p);
            let b = (prob.velocity)(p);
            for i in 0..4 {
                let bg = dot2(b, g[i]);
                for j in 0..4 {
                    k[i][j] -= w * v[j] * bg;
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                t.push(4 * cell + i, 4 * cell + j, k[i][j]);
            }
        }
    }
    for f in &grid.faces().interior {
        let (bm, bp) = (grid.cell_bounds(f.minus), grid.cell_bounds(f.plus));
        let mut k = [[0.0; 8]; 8];
        for (p, w) in face_rule(f.a, f.b, f.measure) {
            let (vm, _) = q1_basis(bm, p);
            let (vp, _) = q1_basis(bp, p);
            let beta = dot2((prob.velocity)(p), f.normal);
            let mut jump = [0.0; 8];
            let mut avg = [0.0; 8];
            for l in 0..4 {
                jump[l] = vm[l];
                jump[4 + l] = -vp[l];
                avg[l] = 0.5 * vm[l];
                avg[4 + l] = 0.5 * vp[l];
            }
            for i in 0..8 {
                for j in 0..8 {
                    k[i][j] += w * (0.5 * beta.abs() * jump[j] * jump[i] + beta * avg[j] * jump[i]);
                }
            }
        }
        let base = |l: usize| if l < 4 { 4 * f.minus + l } else { 4 * f.plus + l - 4 };
        for i in 0..8 {
            for j in 0..8 {
                t.push(base(i), base(j), k[i][j]);
            }
        }
    }
    for f in &grid.faces().boundary {
        let bounds = grid.cell_bounds(f.cell);
        let mut k = [[0.0; 4]; 4];
        for (p, w) in face_rule(f.a, f.b, f.measure) {
            let (v, _) = q1_basis(bounds, p);
            let beta = dot2((prob.velocity)(p), f.normal).max(0.0);
            for i in 0..4 {
                for j in 0..4 {
                    k[i][j] += w * beta * v[j] * v[i];
                }
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                t.push(4 * f.cell + i, 4 * f.cell + j, k[i][j]);
            }
        }
    }
    t
}

fn dg_rhs(grid: &Grid, prob: &ProblemSpec, params: &DgParams) -> Vec<f64> {
    let mut rhs = vec![0.0; 4 * grid.num_cells()];
    for cell in 0..grid.num_cells() {
        let bounds = grid.cell_bounds(cell);
        for (p, w) in cell_rule(bounds) {
            let (v, _) = q1_basis(bounds, p);
            let fv = (prob.source)(p);
            for i in 0..4 {
                rhs[4 * cell + i] += w * fv * v[i];
            }
        }
    }
    for f in &grid.faces().boundary {
        let bounds = grid.cell_bounds(f.cell);
        let d = prob.diffusion[f.cell];
        let sigma = boundary_penalty(params, d, f.measure, grid.cell_area(f.cell));
        for (p, w) in face_rule(f.a, f.b, f.measure) {
            let (v, g) = q1_basis(bounds, p);
            match f.tag {
                BoundaryTag::Dirichlet => {
                    let gv = (prob.dirichlet)(p);
                    let inflow = (-dot2((prob.velocity)(p), f.normal)).max(0.0);
                    for i in 0..4 {
                        let fi = d * dot2(g[i], f.normal);
                        rhs[4 * f.cell + i] += w * gv * (sigma * v[i] - fi + inflow * v[i]);
                    }
                }
                BoundaryTag::Outflow => {
                    let q = (prob.outflow)(p);
                    for i in 0..4 {
                        rhs[4 * f.cell + i] -= w * q * v[i];
                    }
                }
            }
        }
    }
    rhs
}

fn fv_diffusion(grid: &Grid, a: &[f64], map: &[usize], nloc: usize) -> TripletBuilder<f64> {
    let mut t = TripletBuilder::with_capacity(nloc, nloc, 5 * nloc);
    for f in &grid.faces().interior {
        let (lm, lp) = (map[f.minus], map[f.plus]);
        if lm == usize::MAX || lp == usize::MAX {
            continue;
        }
        let (cm, cp) = (grid.cell_center(f.minus), grid.cell_center(f.plus));
        let dist = (cp[0] - cm[0]).hypot(cp[1] - cm[1]);
        let tr = harmonic(a[f.minus], a[f.plus]) * f.measure / dist;
        t.push(lm, lm, tr);
        t.push(lm, lp, -tr);
        t.push(lp, lm, -tr);
        t.push(lp, lp, tr);
    }
    for f in &grid.faces().boundary {
        let lc = map[f.cell];
        if lc == usize::MAX || f.tag != BoundaryTag::Dirichlet {
            continue;
        }
        t.push(lc, lc, fv_ghost_transmissibility(grid, a, f.cell, f.normal, f.measure));
    }
    t
}

fn fv_ghost_transmissibility(grid: &Grid, a: &[f64], cell: usize, normal: [f64; 2], measure: f64) -> f64 {
    let half = if normal[0] != 0.0 { 0.5 * grid.hx() } else { 0.5 * grid.hy() };
    a[cell] * measure / half
}

fn fv_convection_triplets(grid: &Grid, prob: &ProblemSpec) -> TripletBuilder<f64> {
    let n = grid.num_cells();
    let mut t = TripletBuilder::with_capacity(n, n, 5 * n);
    for f in &grid.faces().interior {
        let mid = [0.5 * (f.a[0] + f.b[0]), 0.5 * (f.a[1] + f.b[1])];
        let flux = dot2((prob.velocity)(mid), f.normal) * f.measure;
        if flux >= 0.0 {
            t.push(f.minus, f.minus, flux);
            t.push(f.plus, f.minus, -flux);
        } else {
            t.push(f.minus, f.plus, flux);
            t.push(f.plus, f.plus, -flux);
        }
    }
    for f in &grid.faces().boundary {
        let mid = [0.5 * (f.a[0] + f.b[0]), 0.5 * (f.a[1] + f.b[1])];
        let flux = dot2((prob.velocity)(mid), f.normal) * f.measure;
        if flux > 0.0 || f.tag == BoundaryTag::Outflow {
            t.push(f.cell, f.cell, flux);
        }
    }
    t
}

fn fv_rhs(grid: &Grid, prob: &ProblemSpec) -> Vec<f64> {
    let mut rhs: Vec<f64> = (0..grid.num_cells()).map(|c| (prob.source)(grid.cell_center(c)) * grid.cell_area(c)).collect();
    for f in &grid.faces().boundary {
        let mid = [0.5 * (f.a[0] + f.b[0]), 0.5 * (f.a[1] + f.b[1])];
        match f.tag {
            BoundaryTag::Dirichlet => {
                let g = (prob.dirichlet)(mid);
                let tr = fv_ghost_transmissibility(grid, &prob.diffusion, f.cell, f.normal, f.measure);
                let flux = dot2((prob.velocity)(mid), f.normal) * f.measure;
                rhs[f.cell] += tr * g;
                if flux < 0.0 {
                    rhs[f.cell] -= flux * g;
                }
            }
            BoundaryTag::Outflow => rhs[f.cell] -= (prob.outflow)(mid) * f.measure,
        }
    }
    rhs
}

/// Evaluates a discrete solution at physical points.
pub fn evaluate_solution<T: Scalar>(system: &DiscreteSystem<T>, u: &[T], points: &[[f64; 2]]) -> Result<Vec<f64>> {
    if u.len() != system.num_dofs() {
        return Err(Error::DimensionMismatch { expected: system.num_dofs(), got: u.len() });
    }
    points
        .iter()
        .map(|&[x, y]| {
            let cell = system.grid.locate(x, y)?;
            Ok(evaluate_in_cell(system, u, cell, [x, y]))
        })
        .collect()
}

fn evaluate_in_cell<T: Scalar>(system: &DiscreteSystem<T>, u: &[T], cell: usize, p: [f64; 2]) -> f64 {
    match system.kind {
        Discretization::Ccfv => u[cell].to_f64_lossy(),
        Discretization::Dg => {
            let (v, _) = q1_basis(system.grid.cell_bounds(cell), p);
            (0..4).map(|l| v[l] * u[4 * cell + l].to_f64_lossy()).sum()
        }
    }
}

/// Per-cell mean of a discrete solution.
pub fn cell_means<T: Scalar>(system: &DiscreteSystem<T>, u: &[T]) -> Result<Vec<f64>> {
    if u.len() != system.num_dofs() {
        return Err(Error::DimensionMismatch { expected: system.num_dofs(), got: u.len() });
    }
    let k = system.dofs_per_cell();
    Ok(u.chunks(k).map(|c| c.iter().map(|x| x.to_f64_lossy()).sum::<f64>() / k as f64).collect())
}

/// L2 distance to an exact solution, by 3x3 Gauss quadrature per cell.
pub fn l2_error<T: Scalar>(system: &DiscreteSystem<T>, u: &[T], exact: impl Fn([f64; 2]) -> f64) -> Result<f64> {
    if u.len() != system.num_dofs() {
        return Err(Error::DimensionMismatch { expected: system.num_dofs(), got: u.len() });
    }
    let mut sum = 0.0;
    for cell in 0..system.grid.num_cells() {
        let [xa, xb, ya, yb] = system.grid.cell_bounds(cell);
        let area = (xb - xa) * (yb - ya);
        for (sy, wy) in GAUSS3 {
            for (sx, wx) in GAUSS3 {
                let p = [xa + sx * (xb - xa), ya + sy * (yb - ya)];
                let e = evaluate_in_cell(system, u, cell, p) - exact(p);
                sum += wx * wy * area * e * e;
            }
        }
    }
    Ok(sum.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundarySpec;
    use crate::problem::{constant_field, velocity_constant};
    use crate::sparse::factorize;

    fn zero_velocity() -> crate::problem::VectorField {
        Arc::new(|_| [0.0, 0.0])
    }

    #[test]
    fn single_cell_sipg() {
        let g = Grid::unit_square(1, &BoundarySpec::all_dirichlet()).unwrap();
        let p = ProblemSpec::new(vec![1.0], zero_velocity()).with_source(constant_field(1.0));
        let s = assemble_dg::<f64>(&g, &p, DgParams::default()).unwrap();
        assert_eq!(s.num_dofs(), 4);
        assert!(s.b.asymmetry() <= 1e-12 * s.b.max_abs());
        let u = factorize(&s.b).unwrap().solve(&s.f).unwrap();
        for l in 1..4 {
            assert!((u[l] - u[0]).abs() < 1e-12);
        }
        let c = evaluate_solution(&s, &u, &[[0.5, 0.5]]).unwrap()[0];
        assert!(c > 0.0);
    }

    #[test]
    fn interior_penalty_value() {
        let params = DgParams::default();
        let h = 0.25;
        let sigma = interior_penalty(&params, 1.0, 1.0, h, h * h, h * h);
        assert!((sigma - 6.0 / h).abs() < 1e-12);
        let (wm, wp) = face_weights(1.0, 1e-6);
        assert!((wm - 1e-6 / (1.0 + 1e-6)).abs() < 1e-18);
        assert!((wp - 1.0 / (1.0 + 1e-6)).abs() < 1e-15);
    }

    #[test]
    fn ccfv_two_cell_strip() {
        let g = Grid::new(2, 1, [0.0, 2.0, 0.0, 1.0], &BoundarySpec::all_dirichlet()).unwrap();
        let p = ProblemSpec::new(vec![1.0, 1.0], zero_velocity());
        let s = assemble_ccfv::<f64>(&g, &p).unwrap();
        assert_eq!(s.b.get(0, 1), -1.0);
        assert_eq!(s.b.get(1, 0), -1.0);
    }

    #[test]
    fn ccfv_harmonic_transmissibility() {
        let g = Grid::new(2, 1, [0.0, 2.0, 0.0, 1.0], &BoundarySpec::all_dirichlet()).unwrap();
        let p = ProblemSpec::new(vec![1.0, 1e-6], zero_velocity());
        let s = assemble_ccfv::<f64>(&g, &p).unwrap();
        assert!((s.b.get(0, 1) + 2.0 / (1.0 + 1e6)).abs() < 1e-18);
    }

    #[test]
    fn dof_coordinates_dg() {
        let g = Grid::unit_square(2, &BoundarySpec::all_dirichlet()).unwrap();
        let p = ProblemSpec::new(vec![1.0; 4], velocity_constant());
        let s = assemble_dg::<f64>(&g, &p, DgParams::default()).unwrap();
        assert_eq!(s.dof_coordinates(4 * 3), [0.5, 0.5]);
        assert_eq!(s.dof_coordinates(4 * 3 + 3), [1.0, 1.0]);
    }

    #[test]
    fn rejects_bad_params() {
        let g = Grid::unit_square(1, &BoundarySpec::all_dirichlet()).unwrap();
        let p = ProblemSpec::new(vec![1.0], zero_velocity());
        assert!(assemble_dg::<f64>(&g, &p, DgParams { alpha: -1.0, degree: 1 }).is_err());
        assert!(assemble_dg::<f64>(&g, &p, DgParams { alpha: 3.0, degree: 2 }).is_err());
    }
}
