//! Coefficient fields, boundary data and the built-in model catalogue.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{BoundarySpec, Grid};

pub type VectorField = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
pub type ScalarField = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

/// Diffusion used for the a-inner-product when the physical diffusion vanishes.
pub const TRANSPORT_SURROGATE_DIFFUSION: f64 = 1e-6;

/// Data of a stationary convection-diffusion problem on a [`Grid`].
///
/// Diffusion is isotropic and constant per cell.
#[derive(Clone)]
pub struct ProblemSpec {
    pub diffusion: Vec<f64>,
    pub velocity: VectorField,
    pub source: ScalarField,
    pub dirichlet: ScalarField,
    pub outflow: ScalarField,
    /// Allows zero diffusion; the inner-product diffusion then falls back to
    /// [`TRANSPORT_SURROGATE_DIFFUSION`].
    pub transport_limit: bool,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("cells", &self.diffusion.len())
            .field("transport_limit", &self.transport_limit)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new(diffusion: Vec<f64>, velocity: VectorField) -> Self {
        Self {
            diffusion,
            velocity,
            source: constant_field(0.0),
            dirichlet: constant_field(0.0),
            outflow: constant_field(0.0),
            transport_limit: false,
        }
    }

    pub fn with_source(mut self, f: ScalarField) -> Self {
        self.source = f;
        self
    }

    pub fn with_dirichlet(mut self, g: ScalarField) -> Self {
        self.dirichlet = g;
        self
    }

    pub fn with_outflow(mut self, q: ScalarField) -> Self {
        self.outflow = q;
        self
    }

    pub fn with_transport_limit(mut self, on: bool) -> Self {
        self.transport_limit = on;
        self
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.diffusion.len() != grid.num_cells() {
            return Err(Error::DimensionMismatch { expected: grid.num_cells(), got: self.diffusion.len() });
        }
        for (c, &a) in self.diffusion.iter().enumerate() {
            if !a.is_finite() || a < 0.0 || (a == 0.0 && !self.transport_limit) {
                return Err(Error::InvalidArgument(format!("diffusion {a} in cell {c} is not admissible")));
            }
        }
        Ok(())
    }

    /// Per-cell diffusion used by the symmetric inner-product matrix.
    pub fn inner_product_diffusion(&self) -> Vec<f64> {
        if self.transport_limit && self.diffusion.iter().all(|&a| a == 0.0) {
            vec![TRANSPORT_SURROGATE_DIFFUSION; self.diffusion.len()]
        } else {
            self.diffusion.clone()
        }
    }

    /// Diffusion bounds and velocity sup-norm sampled at cell centers and corners.
    pub fn stats(&self, grid: &Grid) -> CoefficientStats {
        let a_min = self.diffusion.iter().copied().fold(f64::INFINITY, f64::min);
        let a_max = self.diffusion.iter().copied().fold(0.0, f64::max);
        let mut b_inf: f64 = 0.0;
        for c in 0..grid.num_cells() {
            let [xa, xb, ya, yb] = grid.cell_bounds(c);
            let pts = [grid.cell_center(c), [xa, ya], [xb, ya], [xa, yb], [xb, yb]];
            for p in pts {
                let b = (self.velocity)(p);
                b_inf = b_inf.max(b[0].hypot(b[1]));
            }
        }
        CoefficientStats { a_min, a_max, b_inf }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CoefficientStats {
    pub a_min: f64,
    pub a_max: f64,
    pub b_inf: f64,
}

impl CoefficientStats {
    pub fn peclet(&self, length: f64) -> Result<f64> {
        peclet(self, length)
    }
}

/// `L * b_inf / a_min`; infinite when `a_min` is zero and the flow is nonzero.
pub fn peclet(stats: &CoefficientStats, length: f64) -> Result<f64> {
    if !(length >= 0.0) {
        return Err(Error::InvalidArgument(format!("length scale must be nonnegative, got {length}")));
    }
    let num = length * stats.b_inf;
    if num == 0.0 {
        return Ok(0.0);
    }
    if stats.a_min == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(num / stats.a_min)
}

pub fn constant_field(v: f64) -> ScalarField {
    Arc::new(move |_| v)
}

/// Alternating `a_hi` / `a_lo` tiles, `a_hi` on tiles with even index sum.
pub fn checkerboard_diffusion(grid: &Grid, tiles_x: usize, tiles_y: usize, a_lo: f64, a_hi: f64) -> Result<Vec<f64>> {
    let (nx, ny) = (grid.nx(), grid.ny());
    if tiles_x == 0 || tiles_y == 0 || nx % tiles_x != 0 || ny % tiles_y != 0 {
        return Err(Error::InvalidArgument(format!(
            "{tiles_x}x{tiles_y} tiles do not divide the {nx}x{ny} grid"
        )));
    }
    Ok((0..grid.num_cells())
        .map(|c| {
            let (ix, iy) = grid.cell_ij(c);
            let tx = ix * tiles_x / nx;
            let ty = iy * tiles_y / ny;
            if (tx + ty) % 2 == 0 {
                a_hi
            } else {
                a_lo
            }
        })
        .collect())
}

pub fn velocity_constant() -> VectorField {
    Arc::new(|_| [2.0 / 3.0, 1.0])
}

pub fn velocity_rotating() -> VectorField {
    Arc::new(|[x, y]| {
        let (dx, dy) = (x - 0.5, y - 0.5);
        [
            20.0 * dy * (1.0 - dx * dx) - 1.5 * dx,
            20.0 * dx * (1.0 - dy * dy) - 1.5 * dy,
        ]
    })
}

/// Analytic divergence of [`velocity_rotating`].
pub fn velocity_rotating_divergence([x, y]: [f64; 2]) -> f64 {
    let (dx, dy) = (x - 0.5, y - 0.5);
    -80.0 * dx * dy - 3.0
}

pub fn gaussian_source() -> ScalarField {
    Arc::new(|[x, y]| (-((x - 0.25).powi(2) + (y - 0.5).powi(2)) / 1e-2).exp())
}

/// Dirichlet data `1` on the left side and `0` elsewhere.
pub fn inflow_left_unit() -> ScalarField {
    Arc::new(|[x, _]| if x <= 1e-12 { 1.0 } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    /// High-contrast checkerboard with constant velocity.
    Checkerboard51,
    /// Rotating velocity with a Gaussian source, homogeneous Dirichlet data.
    Rotating52,
    /// Constant diffusion, possibly zero, with the checkerboard flow and data.
    Transport54,
}

impl FromStr for ModelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "checkerboard51" => Ok(Self::Checkerboard51),
            "rotating52" => Ok(Self::Rotating52),
            "transport54" => Ok(Self::Transport54),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Checkerboard51 => "checkerboard51",
            Self::Rotating52 => "rotating52",
            Self::Transport54 => "transport54",
        })
    }
}

/// Overrides for [`model_catalogue`]; `None` keeps the model default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelParams {
    pub n: Option<usize>,
    pub a_min: Option<f64>,
    pub a_max: Option<f64>,
    pub tiles: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelDefaults {
    pub n: usize,
    pub a_min: f64,
    pub a_max: f64,
    pub tiles: usize,
}

pub fn model_defaults(name: ModelName) -> ModelDefaults {
    match name {
        ModelName::Checkerboard51 => ModelDefaults { n: 1000, a_min: 1e-6, a_max: 1.0, tiles: 8 },
        ModelName::Rotating52 => ModelDefaults { n: 5120, a_min: 1e-6, a_max: 1.0, tiles: 32 },
        ModelName::Transport54 => ModelDefaults { n: 600, a_min: 0.0, a_max: 0.0, tiles: 1 },
    }
}

/// Builds the grid and problem data of a catalogue model on the unit square.
pub fn model_catalogue(name: ModelName, params: &ModelParams) -> Result<(Grid, ProblemSpec)> {
    let d = model_defaults(name);
    let n = params.n.unwrap_or(d.n);
    let a_min = params.a_min.unwrap_or(d.a_min);
    let a_max = params.a_max.unwrap_or(d.a_max);
    let tiles = params.tiles.unwrap_or(d.tiles);
    let (grid, prob) = match name {
        ModelName::Checkerboard51 => {
            let grid = Grid::unit_square(n, &BoundarySpec::inflow_left_bottom())?;
            let a = checkerboard_diffusion(&grid, tiles, tiles, a_min, a_max)?;
            let prob = ProblemSpec::new(a, velocity_constant()).with_dirichlet(inflow_left_unit());
            (grid, prob)
        }
        ModelName::Rotating52 => {
            let grid = Grid::unit_square(n, &BoundarySpec::all_dirichlet())?;
            let a = checkerboard_diffusion(&grid, tiles, tiles, a_min, a_max)?;
            let prob = ProblemSpec::new(a, velocity_rotating()).with_source(gaussian_source());
            (grid, prob)
        }
        ModelName::Transport54 => {
            let grid = Grid::unit_square(n, &BoundarySpec::inflow_left_bottom())?;
            let a = vec![a_min; grid.num_cells()];
            let prob = ProblemSpec::new(a, velocity_constant())
                .with_dirichlet(inflow_left_unit())
                .with_transport_limit(a_min == 0.0);
            (grid, prob)
        }
    };
    prob.validate(&grid)?;
    Ok((grid, prob))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_parity() {
        let g = Grid::unit_square(2, &BoundarySpec::all_dirichlet()).unwrap();
        let a = checkerboard_diffusion(&g, 2, 2, 1e-3, 1.0).unwrap();
        assert_eq!(a, vec![1.0, 1e-3, 1e-3, 1.0]);
        let g = Grid::unit_square(10, &BoundarySpec::all_dirichlet()).unwrap();
        assert!(checkerboard_diffusion(&g, 3, 2, 1e-3, 1.0).is_err());
    }

    #[test]
    fn velocities() {
        let b = velocity_constant()([0.5, 0.5]);
        assert_eq!(b, [2.0 / 3.0, 1.0]);
        let r = velocity_rotating();
        assert_eq!(r([0.5, 0.5]), [0.0, 0.0]);
        let v = r([1.0, 0.5]);
        assert!((v[0] + 0.75).abs() < 1e-15 && (v[1] - 10.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_values() {
        let f = gaussian_source();
        assert_eq!(f([0.25, 0.5]), 1.0);
        assert!((f([0.35, 0.5]) - (-1.0f64).exp()).abs() < 1e-14);
        assert!(f([1.0, 1.0]) < 1e-24);
    }

    #[test]
    fn peclet_cases() {
        let s = CoefficientStats { a_min: 1e-6, a_max: 1.0, b_inf: 13f64.sqrt() / 3.0 };
        assert!((s.peclet(1e-3).unwrap() - 1201.850425).abs() < 1e-5);
        let z = CoefficientStats { b_inf: 0.0, ..s };
        assert_eq!(z.peclet(1.0).unwrap(), 0.0);
        let inf = CoefficientStats { a_min: 0.0, ..s };
        assert_eq!(inf.peclet(1e-3).unwrap(), f64::INFINITY);
        assert!(s.peclet(-1.0).is_err());
    }

    #[test]
    fn catalogue() {
        let (g, p) = model_catalogue(ModelName::Checkerboard51, &ModelParams { n: Some(16), ..Default::default() }).unwrap();
        assert_eq!(g.num_cells(), 256);
        assert!((p.stats(&g).b_inf - 13f64.sqrt() / 3.0).abs() < 1e-15);
        let (_, p) = model_catalogue(ModelName::Transport54, &ModelParams { n: Some(6), ..Default::default() }).unwrap();
        assert!(p.transport_limit && p.diffusion.iter().all(|&a| a == 0.0));
        assert_eq!(p.inner_product_diffusion()[0], TRANSPORT_SURROGATE_DIFFUSION);
        assert!("foo".parse::<ModelName>().is_err());
    }
}
