//! Structured 2D Cartesian meshes, face enumeration and cell adjacency.
//!
//! Cells are numbered row-major, `cell = iy * nx + ix`. Interior faces are
//! oriented from the lower-index cell to the higher-index cell, boundary faces
//! carry the outward unit normal of the domain.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Dirichlet,
    Outflow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }
}

/// Optional per-face override: receives the side and the face midpoint.
pub type FaceTagOverride = Arc<dyn Fn(Side, [f64; 2]) -> Option<BoundaryTag> + Send + Sync>;

/// Assigns a boundary tag to each of the four sides.
#[derive(Clone)]
pub struct BoundarySpec {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub bottom: BoundaryTag,
    pub top: BoundaryTag,
    pub face_override: Option<FaceTagOverride>,
}

impl fmt::Debug for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundarySpec")
            .field("left", &self.left)
            .field("right", &self.right)
            .field("bottom", &self.bottom)
            .field("top", &self.top)
            .field("face_override", &self.face_override.is_some())
            .finish()
    }
}

impl BoundarySpec {
    pub fn uniform(tag: BoundaryTag) -> Self {
        Self { left: tag, right: tag, bottom: tag, top: tag, face_override: None }
    }

    pub fn all_dirichlet() -> Self {
        Self::uniform(BoundaryTag::Dirichlet)
    }

    /// Dirichlet on the left and bottom sides, outflow on the right and top.
    pub fn inflow_left_bottom() -> Self {
        Self {
            left: BoundaryTag::Dirichlet,
            bottom: BoundaryTag::Dirichlet,
            right: BoundaryTag::Outflow,
            top: BoundaryTag::Outflow,
            face_override: None,
        }
    }

    fn tag(&self, side: Side, midpoint: [f64; 2]) -> BoundaryTag {
        if let Some(f) = &self.face_override {
            if let Some(t) = f(side, midpoint) {
                return t;
            }
        }
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteriorFace {
    /// Lower-index cell.
    pub minus: usize,
    /// Higher-index cell.
    pub plus: usize,
    /// Unit normal pointing from `minus` to `plus`.
    pub normal: [f64; 2],
    pub measure: f64,
    /// Endpoints of the face segment.
    pub a: [f64; 2],
    pub b: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFace {
    pub cell: usize,
    pub side: Side,
    pub tag: BoundaryTag,
    /// Outward unit normal.
    pub normal: [f64; 2],
    pub measure: f64,
    pub a: [f64; 2],
    pub b: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FaceSet {
    pub interior: Vec<InteriorFace>,
    pub boundary: Vec<BoundaryFace>,
}

#[derive(Debug, Clone)]
pub struct Grid {
    nx: usize,
    ny: usize,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    faces: FaceSet,
}

impl Grid {
    /// Builds a uniform `nx x ny` grid of `[x0, x1] x [y0, y1]`.
    pub fn new(nx: usize, ny: usize, extents: [f64; 4], boundary: &BoundarySpec) -> Result<Self> {
        let [x0, x1, y0, y1] = extents;
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid(format!("cell counts must be positive, got {nx}x{ny}")));
        }
        if !(x1 > x0) || !(y1 > y0) || !x0.is_finite() || !x1.is_finite() || !y0.is_finite() || !y1.is_finite() {
            return Err(Error::InvalidGrid(format!("degenerate extents {extents:?}")));
        }
        let mut g = Self { nx, ny, x0, x1, y0, y1, faces: FaceSet::default() };
        g.faces = g.enumerate_faces(boundary);
        Ok(g)
    }

    /// Unit square with `n x n` cells.
    pub fn unit_square(n: usize, boundary: &BoundarySpec) -> Result<Self> {
        Self::new(n, n, [0.0, 1.0, 0.0, 1.0], boundary)
    }

    fn enumerate_faces(&self, boundary: &BoundarySpec) -> FaceSet {
        let (nx, ny) = (self.nx, self.ny);
        let (hx, hy) = (self.hx(), self.hy());
        let mut interior = Vec::with_capacity(nx * ny.saturating_sub(1) + ny * nx.saturating_sub(1));
        for iy in 0..ny {
            for ix in 0..nx.saturating_sub(1) {
                let c = iy * nx + ix;
                let x = self.xcoord(ix + 1);
                interior.push(InteriorFace {
                    minus: c,
                    plus: c + 1,
                    normal: [1.0, 0.0],
                    measure: hy,
                    a: [x, self.ycoord(iy)],
                    b: [x, self.ycoord(iy + 1)],
                });
            }
        }
        for iy in 0..ny.saturating_sub(1) {
            for ix in 0..nx {
                let c = iy * nx + ix;
                let y = self.ycoord(iy + 1);
                interior.push(InteriorFace {
                    minus: c,
                    plus: c + nx,
                    normal: [0.0, 1.0],
                    measure: hx,
                    a: [self.xcoord(ix), y],
                    b: [self.xcoord(ix + 1), y],
                });
            }
        }
        let mut bfaces = Vec::with_capacity(2 * (nx + ny));
        let mut push = |cell: usize, side: Side, a: [f64; 2], b: [f64; 2], measure: f64| {
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            bfaces.push(BoundaryFace {
                cell,
                side,
                tag: boundary.tag(side, mid),
                normal: side.outward_normal(),
                measure,
                a,
                b,
            });
        };
        for iy in 0..ny {
            let (ya, yb) = (self.ycoord(iy), self.ycoord(iy + 1));
            push(iy * nx, Side::Left, [self.x0, ya], [self.x0, yb], hy);
        }
        for iy in 0..ny {
            let (ya, yb) = (self.ycoord(iy), self.ycoord(iy + 1));
            push(iy * nx + nx - 1, Side::Right, [self.x1, ya], [self.x1, yb], hy);
        }
        for ix in 0..nx {
            let (xa, xb) = (self.xcoord(ix), self.xcoord(ix + 1));
            push(ix, Side::Bottom, [xa, self.y0], [xb, self.y0], hx);
        }
        for ix in 0..nx {
            let (xa, xb) = (self.xcoord(ix), self.xcoord(ix + 1));
            push((ny - 1) * nx + ix, Side::Top, [xa, self.y1], [xb, self.y1], hx);
        }
        FaceSet { interior, boundary: bfaces }
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn extents(&self) -> [f64; 4] {
        [self.x0, self.x1, self.y0, self.y1]
    }

    #[inline]
    pub fn hx(&self) -> f64 {
        (self.x1 - self.x0) / self.nx as f64
    }

    #[inline]
    pub fn hy(&self) -> f64 {
        (self.y1 - self.y0) / self.ny as f64
    }

    #[inline]
    fn xcoord(&self, i: usize) -> f64 {
        if i == self.nx {
            self.x1
        } else {
            self.x0 + i as f64 * self.hx()
        }
    }

    #[inline]
    fn ycoord(&self, j: usize) -> f64 {
        if j == self.ny {
            self.y1
        } else {
            self.y0 + j as f64 * self.hy()
        }
    }

    pub fn faces(&self) -> &FaceSet {
        &self.faces
    }

    #[inline]
    pub fn cell_ij(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    #[inline]
    pub fn cell_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    /// `[xa, xb, ya, yb]` of a cell.
    pub fn cell_bounds(&self, cell: usize) -> [f64; 4] {
        let (ix, iy) = self.cell_ij(cell);
        [self.xcoord(ix), self.xcoord(ix + 1), self.ycoord(iy), self.ycoord(iy + 1)]
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let [xa, xb, ya, yb] = self.cell_bounds(cell);
        [0.5 * (xa + xb), 0.5 * (ya + yb)]
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        let [xa, xb, ya, yb] = self.cell_bounds(cell);
        (xb - xa) * (yb - ya)
    }

    /// Cell containing the point; points on shared edges go to the upper/right cell.
    pub fn locate(&self, x: f64, y: f64) -> Result<usize> {
        let tol = 1e-12 * ((self.x1 - self.x0) + (self.y1 - self.y0));
        if x < self.x0 - tol || x > self.x1 + tol || y < self.y0 - tol || y > self.y1 + tol || !x.is_finite() || !y.is_finite() {
            return Err(Error::PointOutsideDomain(x, y));
        }
        let ix = (((x - self.x0) / self.hx()).floor().max(0.0) as usize).min(self.nx - 1);
        let iy = (((y - self.y0) / self.hy()).floor().max(0.0) as usize).min(self.ny - 1);
        Ok(self.cell_index(ix, iy))
    }

    /// Total measure of the domain boundary.
    pub fn perimeter(&self) -> f64 {
        2.0 * ((self.x1 - self.x0) + (self.y1 - self.y0))
    }

    /// Face-adjacency graph of the cells.
    pub fn cell_adjacency(&self) -> DofGraph {
        let mut adj = vec![Vec::with_capacity(4); self.num_cells()];
        for f in &self.faces.interior {
            adj[f.minus].push(f.plus);
            adj[f.plus].push(f.minus);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        DofGraph { adj }
    }
}

/// Undirected cell graph; vertices are cells (blocks of DOFs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofGraph {
    adj: Vec<Vec<usize>>,
}

impl DofGraph {
    pub fn from_adjacency(adj: Vec<Vec<usize>>) -> Self {
        Self { adj }
    }

    pub fn num_vertices(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_counts() {
        let g = Grid::unit_square(2, &BoundarySpec::all_dirichlet()).unwrap();
        assert_eq!(g.num_cells(), 4);
        assert_eq!(g.faces().interior.len(), 4);
        assert_eq!(g.faces().boundary.len(), 8);
        assert!(g.faces().boundary.iter().all(|f| f.tag == BoundaryTag::Dirichlet));
        let adj = g.cell_adjacency();
        assert!((0..4).all(|c| adj.degree(c) == 2));
    }

    #[test]
    fn strip_faces() {
        let g = Grid::new(3, 1, [0.0, 3.0, 0.0, 1.0], &BoundarySpec::all_dirichlet()).unwrap();
        let pairs: Vec<_> = g.faces().interior.iter().map(|f| (f.minus, f.plus, f.normal)).collect();
        assert_eq!(pairs, vec![(0, 1, [1.0, 0.0]), (1, 2, [1.0, 0.0])]);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Grid::new(0, 2, [0.0, 1.0, 0.0, 1.0], &BoundarySpec::all_dirichlet()).is_err());
        assert!(Grid::new(2, 2, [0.0, 0.0, 0.0, 1.0], &BoundarySpec::all_dirichlet()).is_err());
    }

    #[test]
    fn three_by_three_degrees() {
        let g = Grid::unit_square(3, &BoundarySpec::all_dirichlet()).unwrap();
        let adj = g.cell_adjacency();
        assert_eq!(adj.degree(4), 4);
        for c in [0, 2, 6, 8] {
            assert_eq!(adj.degree(c), 2);
        }
    }

    #[test]
    fn side_tags_and_override() {
        let mut spec = BoundarySpec::inflow_left_bottom();
        let g = Grid::unit_square(4, &spec).unwrap();
        for f in &g.faces().boundary {
            let expect = match f.side {
                Side::Left | Side::Bottom => BoundaryTag::Dirichlet,
                _ => BoundaryTag::Outflow,
            };
            assert_eq!(f.tag, expect);
        }
        spec.face_override = Some(Arc::new(|side, mid| {
            (side == Side::Top && mid[0] < 0.5).then_some(BoundaryTag::Dirichlet)
        }));
        let g = Grid::unit_square(4, &spec).unwrap();
        let top_d = g.faces().boundary.iter().filter(|f| f.side == Side::Top && f.tag == BoundaryTag::Dirichlet).count();
        assert_eq!(top_d, 2);
    }

    #[test]
    fn locate_points() {
        let g = Grid::unit_square(4, &BoundarySpec::all_dirichlet()).unwrap();
        assert_eq!(g.locate(0.1, 0.1).unwrap(), 0);
        assert_eq!(g.locate(1.0, 1.0).unwrap(), 15);
        assert!(g.locate(1.5, 0.0).is_err());
    }
}
