//! Sweep execution for the `run` and `spectra` commands.

use std::path::{Path, PathBuf};

use msras_core::assembly::assemble;
use msras_core::coarse::{compute_spectra, SelectionRule};
use msras_core::decomp::Decomposition;
use msras_core::pipeline::{self, CoarseRule};
use msras_core::problem::model_catalogue;

use crate::config::{ExperimentConfig, RunPoint};
use crate::output::{
    dump_system, export_spectra, export_vtk, mean_decay_slope, write_report_csv, write_summary, RunRecord, Summary,
};
use crate::Failure;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub dump_system: bool,
}

#[derive(Debug)]
pub struct RunBundle {
    pub records: Vec<RunRecord>,
    pub files: Vec<String>,
    pub assertion_failures: Vec<String>,
}

impl RunBundle {
    /// Exit status: solver failures take precedence over unmet assertions.
    pub fn status(&self) -> Result<(), Failure> {
        let failed: Vec<usize> = self.records.iter().filter(|r| !r.converged).map(|r| r.point.index).collect();
        if !failed.is_empty() {
            return Err(Failure::Solver(format!("runs {failed:?} did not reach the tolerance")));
        }
        if !self.assertion_failures.is_empty() {
            return Err(Failure::Assertion(self.assertion_failures.join("; ")));
        }
        Ok(())
    }
}

fn out_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out.clone().or_else(|| cfg.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

fn make_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))
}

/// Per-run files go to `out` for a single run and to `out/run_<i>` in a sweep.
fn run_dir(root: &Path, point: &RunPoint, sweep: bool) -> (PathBuf, String) {
    if sweep {
        let rel = format!("run_{}", point.index);
        (root.join(&rel), format!("{rel}/"))
    } else {
        (root.to_path_buf(), String::new())
    }
}

fn coarse_label(rule: CoarseRule) -> String {
    match rule {
        CoarseRule::None => "none".into(),
        CoarseRule::Pou(d) => format!("pou{d}"),
        CoarseRule::Fixed(_) => "fixed".into(),
        CoarseRule::Threshold(_) => "threshold".into(),
    }
}

pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunBundle, Failure> {
    cfg.validate()?;
    let model = cfg.model()?;
    let points = cfg.points()?;
    let sweep = points.len() > 1;
    let root = out_dir(cfg, opts);
    make_dir(&root)?;
    let mut records = Vec::new();
    let mut files = Vec::new();
    for point in &points {
        let (grid, problem) = model_catalogue(model, &cfg.model_params(point))?;
        let setup = cfg.solver_setup(point)?;
        log::info!("run {} of {}: {point:?}", point.index + 1, points.len());
        let o = pipeline::run(&grid, &problem, &setup)?;
        let (dir, prefix) = run_dir(&root, point, sweep);
        make_dir(&dir)?;
        let mut w = crate::output::create(&dir.join("history.csv"))?;
        o.report.write_csv(&mut w).map_err(|e| Failure::Io(format!("{}: {e}", dir.join("history.csv").display())))?;
        files.push(format!("{prefix}history.csv"));
        for (j, sp) in o.spectra.iter().enumerate() {
            let name = format!("spectrum_{j}.csv");
            export_spectra(std::slice::from_ref(sp), &dir.join(&name))?;
            files.push(format!("{prefix}{name}"));
        }
        if cfg.vtk {
            export_vtk(&grid, &o.system, &o.solution, &dir.join("solution.vtk"))?;
            files.push(format!("{prefix}solution.vtk"));
        }
        if opts.dump_system {
            files.extend(dump_system(&o.system, &dir)?.into_iter().map(|n| format!("{prefix}{n}")));
        }
        let r = &o.report;
        log::info!("run {}: {} iterations, coarse dimension {}", point.index, r.iterations, o.coarse_dim());
        records.push(RunRecord {
            point: point.clone(),
            model: model.to_string(),
            n: grid.nx(),
            discretization: format!("{:?}", cfg.discretization).to_lowercase(),
            coarse: coarse_label(setup.coarse),
            dofs: o.system.num_dofs(),
            iterations: r.iterations,
            converged: r.converged,
            reduction: r.reduction,
            log10_rate: if r.iterations == 0 { 0.0 } else { r.average_rate().log10() },
            coarse_dim: o.coarse_dim(),
            coarse_percent: o.coarse_percent(),
            decay_slope: mean_decay_slope(&o.spectra),
            residuals: r.residuals.clone(),
            true_residuals: r.true_residuals.clone(),
            timings: r.timings,
        });
    }
    let assertion_failures = check_assertions(cfg, &records);
    write_report_csv(&records, &root.join("report.csv"))?;
    files.insert(0, "report.csv".into());
    files.insert(1, "summary.json".into());
    let summary = Summary {
        name: &cfg.name,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        runs: &records,
        all_converged: records.iter().all(|r| r.converged),
        assertion_failures: &assertion_failures,
        files: &files,
    };
    write_summary(&summary, &root.join("summary.json"))?;
    Ok(RunBundle { records, files, assertion_failures })
}

fn check_assertions(cfg: &ExperimentConfig, records: &[RunRecord]) -> Vec<String> {
    let mut failures = Vec::new();
    if let Some(max) = cfg.assertions.max_iterations {
        for r in records.iter().filter(|r| r.iterations > max) {
            failures.push(format!("run {} needed {} iterations (limit {max})", r.point.index, r.iterations));
        }
    }
    if let Some(limit) = cfg.assertions.max_iteration_ratio {
        let hi = records.iter().map(|r| r.iterations).max().unwrap_or(0);
        let lo = records.iter().map(|r| r.iterations).min().unwrap_or(0).max(1);
        let ratio = hi as f64 / lo as f64;
        if ratio > limit {
            failures.push(format!("iteration ratio {ratio:.2} exceeds {limit}"));
        }
    }
    failures
}

/// Computes and writes the local spectra of every run point without solving.
pub fn spectra(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<String>, Failure> {
    cfg.validate()?;
    let model = cfg.model()?;
    let points = cfg.points()?;
    let sweep = points.len() > 1;
    let root = out_dir(cfg, opts);
    make_dir(&root)?;
    let mut files = Vec::new();
    for point in &points {
        let (grid, problem) = model_catalogue(model, &cfg.model_params(point))?;
        let setup = cfg.solver_setup(point)?;
        let rule = setup.coarse.selection().unwrap_or(SelectionRule::Fixed(point.n_sd));
        let system = assemble::<f64>(&grid, &problem, setup.discretization, setup.dg)?;
        let core = setup.partition.cells(&grid)?;
        let d = Decomposition::build(&grid.cell_adjacency(), core, setup.layers, setup.pu_mode, system.dofs_per_cell())?;
        let spectra = compute_spectra(&system, &d, rule, &setup.eigen)?;
        let (dir, prefix) = run_dir(&root, point, sweep);
        make_dir(&dir)?;
        for (j, sp) in spectra.iter().enumerate() {
            let name = format!("spectrum_{j}.csv");
            export_spectra(std::slice::from_ref(sp), &dir.join(&name))?;
            files.push(format!("{prefix}{name}"));
        }
        let slope = mean_decay_slope(&spectra);
        println!(
            "run {}: {} subdomains, {} eigenpairs, mean decay slope {}",
            point.index,
            spectra.len(),
            spectra.iter().map(|s| s.len()).sum::<usize>(),
            slope.map_or("n/a".into(), |s| format!("{s:.4}"))
        );
    }
    Ok(files)
}
