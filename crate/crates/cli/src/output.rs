//! File outputs: run reports, spectra, VTK fields and matrix dumps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use msras_core::assembly::{cell_means, DiscreteSystem};
use msras_core::coarse::{write_spectra_csv, SubdomainSpectrum};
use msras_core::grid::Grid;
use msras_core::sparse::{write_matrix_market, write_vector_market, MatrixKind};
use serde::Serialize;

use crate::config::RunPoint;
use crate::Failure;

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

/// Legacy VTK structured points (ASCII) holding the per-cell mean of `u`.
pub fn export_vtk(grid: &Grid, system: &DiscreteSystem<f64>, u: &[f64], path: &Path) -> Result<(), Failure> {
    let means = cell_means(system, u).map_err(|e| Failure::Validation(e.to_string()))?;
    let [x0, _, y0, _] = grid.extents();
    let mut w = create(path)?;
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "msras cell means")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET STRUCTURED_POINTS")?;
        writeln!(w, "DIMENSIONS {} {} 1", grid.nx() + 1, grid.ny() + 1)?;
        writeln!(w, "ORIGIN {x0} {y0} 0")?;
        writeln!(w, "SPACING {} {} 1", grid.hx(), grid.hy())?;
        writeln!(w, "CELL_DATA {}", grid.num_cells())?;
        writeln!(w, "SCALARS u double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for m in &means {
            writeln!(w, "{m:e}")?;
        }
        w.flush()
    };
    write(&mut w).map_err(io(path))
}

/// CSV with one row per computed eigenpair, as produced by the coarse module.
pub fn export_spectra(spectra: &[SubdomainSpectrum<f64>], path: &Path) -> Result<(), Failure> {
    let mut w = create(path)?;
    write_spectra_csv(spectra, &mut w).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    w.flush().map_err(io(path))
}

pub fn dump_system(system: &DiscreteSystem<f64>, dir: &Path) -> Result<Vec<String>, Failure> {
    let mut names = Vec::new();
    for (name, m, kind) in [("system.mtx", &system.b, MatrixKind::General), ("inner_product.mtx", &system.a_a, MatrixKind::Symmetric)] {
        let path = dir.join(name);
        let mut w = create(&path)?;
        write_matrix_market(m, kind, &mut w).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        w.flush().map_err(io(&path))?;
        names.push(name.to_string());
    }
    let path = dir.join("rhs.mtx");
    let mut w = create(&path)?;
    write_vector_market(&system.f, &mut w).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    w.flush().map_err(io(&path))?;
    names.push("rhs.mtx".into());
    Ok(names)
}

/// Slope and R² of `ln λ_k` against `sqrt(k)` over the finite eigenvalues.
pub fn decay_fit(eigenvalues: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = eigenvalues
        .iter()
        .filter(|l| l.is_finite() && **l > 0.0)
        .enumerate()
        .map(|(k, l)| (((k + 1) as f64).sqrt(), l.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((sxy / sxx, r2))
}

/// Mean decay slope over the subdomains with at least three finite eigenvalues.
pub fn mean_decay_slope(spectra: &[SubdomainSpectrum<f64>]) -> Option<f64> {
    let slopes: Vec<f64> = spectra.iter().filter_map(|s| decay_fit(&s.eigenvalues)).map(|f| f.0).collect();
    (!slopes.is_empty()).then(|| slopes.iter().sum::<f64>() / slopes.len() as f64)
}

/// One row of the sweep matrix.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    #[serde(flatten)]
    pub point: RunPoint,
    pub model: String,
    pub n: usize,
    pub discretization: String,
    pub coarse: String,
    pub dofs: usize,
    pub iterations: usize,
    pub converged: bool,
    pub reduction: f64,
    pub log10_rate: f64,
    pub coarse_dim: usize,
    pub coarse_percent: f64,
    pub decay_slope: Option<f64>,
    pub residuals: Vec<f64>,
    pub true_residuals: Vec<f64>,
    #[serde(skip)]
    pub timings: msras_core::solver::Timings,
}

pub const REPORT_HEADER: &str = "run,model,n,discretization,a_min,subdomains,oversample_layers,coarse,n_sd,lambda_max,dofs,iterations,converged,reduction,log10_rate,coarse_dim,coarse_percent,decay_slope,time_assembly,time_eigen,time_factor,time_solve";

/// Number of leading report columns that do not depend on timing.
pub const DETERMINISTIC_COLUMNS: usize = 18;

pub fn write_report_csv(records: &[RunRecord], path: &Path) -> Result<(), Failure> {
    let mut w = create(path)?;
    let write = |w: &mut BufWriter<File>| -> std::io::Result<()> {
        writeln!(w, "{REPORT_HEADER}")?;
        for r in records {
            let p = &r.point;
            let t = &r.timings;
            writeln!(
                w,
                "{},{},{},{},{:e},{},{},{},{},{},{},{},{},{:e},{:.4},{},{:.4},{},{:.3},{:.3},{:.3},{:.3}",
                p.index,
                r.model,
                r.n,
                r.discretization,
                p.a_min,
                p.subdomains,
                p.oversample_layers,
                r.coarse,
                p.n_sd,
                p.lambda_max,
                r.dofs,
                r.iterations,
                r.converged,
                r.reduction,
                r.log10_rate,
                r.coarse_dim,
                r.coarse_percent,
                r.decay_slope.map_or(String::new(), |s| format!("{s:.4}")),
                t.assembly,
                t.eigenproblems,
                t.factorizations,
                t.solve
            )?;
        }
        w.flush()
    };
    write(&mut w).map_err(io(path))
}

#[derive(Debug, Serialize)]
struct TimingRow {
    run: usize,
    assembly: f64,
    eigenproblems: f64,
    factorizations: f64,
    solve: f64,
}

#[derive(Debug, Serialize)]
pub struct Summary<'a, C: Serialize> {
    pub name: &'a str,
    pub version: &'a str,
    pub config: &'a C,
    pub runs: &'a [RunRecord],
    pub all_converged: bool,
    pub assertion_failures: &'a [String],
    pub files: &'a [String],
}

pub fn write_summary<C: Serialize>(summary: &Summary<'_, C>, path: &Path) -> Result<(), Failure> {
    let timings: Vec<TimingRow> = summary
        .runs
        .iter()
        .map(|r| TimingRow {
            run: r.point.index,
            assembly: r.timings.assembly,
            eigenproblems: r.timings.eigenproblems,
            factorizations: r.timings.factorizations,
            solve: r.timings.solve,
        })
        .collect();
    let mut value = serde_json::to_value(summary).map_err(|e| Failure::Io(e.to_string()))?;
    value["timings"] = serde_json::to_value(timings).map_err(|e| Failure::Io(e.to_string()))?;
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &value).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    writeln!(w).and_then(|_| w.flush()).map_err(io(path))
}
