//! Assemble, decompose, build the coarse space and solve, with phase timings.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, DgParams, Discretization, DiscreteSystem};
use crate::coarse::{build_coarse_space, build_pou_coarse_space, compute_spectra, EigenOptions, SelectionRule, SubdomainSpectrum};
use crate::decomp::{partition_greedy, partition_structured, Decomposition, LayerConfig, PuMode};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::problem::ProblemSpec;
use crate::solver::{solve, KrylovConfig, Preconditioner, PreconditionerMode, SolveReport, Timings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum PartitionSpec {
    Structured { px: usize, py: usize },
    Greedy { m: usize, seed: u64 },
}

impl PartitionSpec {
    pub fn num_subdomains(&self) -> usize {
        match *self {
            PartitionSpec::Structured { px, py } => px * py,
            PartitionSpec::Greedy { m, .. } => m,
        }
    }

    pub fn cells(&self, grid: &Grid) -> Result<Vec<Vec<usize>>> {
        match *self {
            PartitionSpec::Structured { px, py } => partition_structured(grid, px, py),
            PartitionSpec::Greedy { m, seed } => partition_greedy(&grid.cell_adjacency(), m, seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum CoarseRule {
    None,
    Pou(usize),
    Fixed(usize),
    Threshold(f64),
}

impl CoarseRule {
    pub fn selection(&self) -> Option<SelectionRule> {
        match *self {
            CoarseRule::Fixed(n) => Some(SelectionRule::Fixed(n)),
            CoarseRule::Threshold(t) => Some(SelectionRule::Threshold(t)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CoarseRule::Pou(d) if d > 1 => Err(Error::InvalidArgument(format!("polynomial degree must be 0 or 1, got {d}"))),
            _ => self.selection().map_or(Ok(()), |s| s.validate()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSetup {
    pub discretization: Discretization,
    pub dg: DgParams,
    pub partition: PartitionSpec,
    pub layers: LayerConfig,
    pub pu_mode: PuMode,
    pub coarse: CoarseRule,
    pub krylov: KrylovConfig,
    pub eigen: EigenOptions,
}

impl SolverSetup {
    pub fn new(discretization: Discretization, partition: PartitionSpec, coarse: CoarseRule) -> Self {
        Self {
            discretization,
            dg: DgParams::default(),
            partition,
            layers: LayerConfig::default(),
            pu_mode: PuMode::default(),
            coarse,
            krylov: KrylovConfig::default(),
            eigen: EigenOptions::default(),
        }
    }

    pub fn mode(&self) -> PreconditionerMode {
        match self.coarse {
            CoarseRule::None => PreconditionerMode::OneLevel,
            _ => PreconditionerMode::TwoLevelHybrid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dg.validate()?;
        self.coarse.validate()?;
        self.krylov.validate()?;
        if self.partition.num_subdomains() == 0 {
            return Err(Error::InvalidArgument("at least one subdomain is required".into()));
        }
        Ok(())
    }
}

pub struct Outcome {
    pub system: DiscreteSystem<f64>,
    pub decomposition: Decomposition,
    pub spectra: Vec<SubdomainSpectrum<f64>>,
    pub preconditioner: Preconditioner<f64>,
    pub solution: Vec<f64>,
    pub report: SolveReport,
}

impl Outcome {
    pub fn coarse_dim(&self) -> usize {
        self.preconditioner.coarse_dim()
    }

    /// Coarse dimension in percent of the fine DOFs.
    pub fn coarse_percent(&self) -> f64 {
        100.0 * self.coarse_dim() as f64 / self.system.num_dofs() as f64
    }
}

/// Everything up to (not including) the outer iteration.
pub struct Prepared {
    pub system: DiscreteSystem<f64>,
    pub decomposition: Decomposition,
    pub spectra: Vec<SubdomainSpectrum<f64>>,
    pub preconditioner: Preconditioner<f64>,
    pub timings: Timings,
}

pub fn setup(grid: &Grid, problem: &ProblemSpec, s: &SolverSetup) -> Result<Prepared> {
    s.validate()?;
    let mut timings = Timings::default();
    let t = Instant::now();
    let system: DiscreteSystem<f64> = assemble(grid, problem, s.discretization, s.dg)?;
    timings.assembly = t.elapsed().as_secs_f64();
    let core = s.partition.cells(grid)?;
    let decomposition = Decomposition::build(&grid.cell_adjacency(), core, s.layers, s.pu_mode, system.dofs_per_cell())?;
    let t = Instant::now();
    let (spectra, coarse) = match s.coarse {
        CoarseRule::None => (Vec::new(), None),
        CoarseRule::Pou(deg) => (Vec::new(), Some(build_pou_coarse_space(&system, &decomposition, deg)?)),
        rule => {
            let sel = rule.selection().expect("spectral rule");
            let spectra = compute_spectra(&system, &decomposition, sel, &s.eigen)?;
            let cs = build_coarse_space(&system, &decomposition, &spectra, sel)?;
            (spectra, Some(cs))
        }
    };
    timings.eigenproblems = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let preconditioner = Preconditioner::new(&system.b, &decomposition, coarse, s.mode())?;
    timings.factorizations = t.elapsed().as_secs_f64();
    Ok(Prepared { system, decomposition, spectra, preconditioner, timings })
}

/// Full run from a zero initial guess.
pub fn run(grid: &Grid, problem: &ProblemSpec, s: &SolverSetup) -> Result<Outcome> {
    let p = setup(grid, problem, s)?;
    let u0 = vec![0.0; p.system.num_dofs()];
    let (solution, mut report) = solve(&p.system.b, &p.preconditioner, &p.system.f, &s.krylov, &u0)?;
    report.timings = Timings { solve: report.timings.solve, ..p.timings };
    Ok(Outcome {
        system: p.system,
        decomposition: p.decomposition,
        spectra: p.spectra,
        preconditioner: p.preconditioner,
        solution,
        report,
    })
}
