//! Runs configured comparisons and writes their tables, reports and traces.

use std::fs;
use std::path::Path;

use datashare_core::pcg::*;
use datashare_core::problem::{block_grams, PartitionedDataset};
use datashare_core::reference::centralized_optimum;
use datashare_core::sharing::{build_pool, SharingPlan};
use datashare_core::solver::{Problem, SolverRegistry, SolverRun, StopReason};
use datashare_core::spectral::{bound_large_step, build_double_sweep, build_mc, build_mgd, build_mp, rp_expected_map, MAX_ENUMERATED_BLOCKS};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{load_dataset, AlgorithmSpec, ExperimentConfig, StopMode};
use crate::error::{CliError, Context, Result};

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub algorithm: String,
    pub iterations: usize,
    pub absolute_loss: Option<f64>,
    pub converged: bool,
    pub stop_reason: StopReason,
    /// Excluded from reproducibility comparisons.
    pub wall_time: f64,
    pub beta: Vec<f64>,
}

impl ReportRow {
    fn from_run(run: &SolverRun) -> Self {
        ReportRow {
            algorithm: run.method.clone(),
            iterations: run.iterations,
            absolute_loss: run.absolute_loss,
            converged: run.converged,
            stop_reason: run.stop_reason,
            wall_time: run.wall_time,
            beta: run.beta.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub n: usize,
    pub p: usize,
    pub b: usize,
    pub pool_size: Option<usize>,
    pub oracle: Option<Vec<f64>>,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    /// The report with every wall-time field zeroed.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.wall_time = 0.0;
        }
        r
    }
}

struct Prepared {
    ds: PartitionedDataset,
    plan: Option<SharingPlan>,
    oracle: Option<Vec<f64>>,
}

fn prepare(cfg: &ExperimentConfig, registry: &SolverRegistry) -> Result<Prepared> {
    cfg.validate(registry)?;
    let ds = load_dataset(cfg)?;
    let plan = match cfg.alpha_percent {
        Some(a) => Some(build_pool(&ds, a, cfg.seed).context(|| "building the shared pool".into())?),
        None => None,
    };
    let oracle = if cfg.oracle {
        Some(centralized_optimum(&ds, cfg.objective).context(|| "centralized solution".into())?)
    } else {
        None
    };
    Ok(Prepared { ds, plan, oracle })
}

fn run_one(cfg: &ExperimentConfig, registry: &SolverRegistry, prep: &Prepared, spec: &AlgorithmSpec) -> Result<SolverRun> {
    let mut problem = Problem::new(&prep.ds, cfg.objective);
    if let Some(plan) = &prep.plan {
        problem = problem.with_plan(plan);
    }
    let sc = cfg.effective_config(spec);
    info!("running {} for up to {} iterations", spec.name, sc.max_iters);
    registry.run(&spec.name, &problem, &sc, prep.oracle.as_deref()).context(|| format!("algorithm '{}'", spec.name))
}

/// Runs every configured algorithm on the same data and pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Vec<SolverRun>)> {
    let registry = SolverRegistry::with_builtins();
    let prep = prepare(cfg, &registry)?;
    let runs = cfg
        .algorithms
        .iter()
        .map(|spec| run_one(cfg, &registry, &prep, spec))
        .collect::<Result<Vec<_>>>()?;
    let report = ExperimentReport {
        config: cfg.clone(),
        n: prep.ds.n(),
        p: prep.ds.p(),
        b: prep.ds.b(),
        pool_size: prep.plan.as_ref().map(|p| p.m),
        oracle: prep.oracle.clone(),
        rows: runs.iter().map(ReportRow::from_run).collect(),
    };
    Ok((report, runs))
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.into()))?;
    w.write_record(header).map_err(|e| CliError::Io(e.into()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn write_experiment(report: &ExperimentReport, runs: &[SolverRun]) -> Result<()> {
    let out = &report.config.output;
    write_csv(
        &out.table_path(),
        &["algorithm", "iterations", "absolute_loss", "converged", "stop_reason", "wall_time"],
        report.rows.iter().map(|r| {
            vec![
                r.algorithm.clone(),
                r.iterations.to_string(),
                fmt_opt(r.absolute_loss),
                r.converged.to_string(),
                serde_json::to_value(r.stop_reason).unwrap().as_str().unwrap_or_default().to_string(),
                fmt_num(r.wall_time),
            ]
        }),
    )?;
    write_json(&out.report_path(), report)?;
    if out.traces {
        for run in runs {
            let loss = if report.oracle.is_some() { "absolute_loss" } else { "change" };
            write_csv(
                &out.dir.join(format!("trace_{}.csv", run.method)),
                &["iteration", loss],
                run.trace.iter().map(|t| vec![t.iter.to_string(), fmt_num(t.absolute_loss.unwrap_or(t.change))]),
            )?;
        }
    }
    Ok(())
}

pub fn format_table(report: &ExperimentReport) -> String {
    let mut s = format!("{:<28} {:>10} {:>14} {:>9} {:>10}\n", "algorithm", "iterations", "AL", "converged", "time (s)");
    for r in &report.rows {
        let al = r.absolute_loss.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into());
        s += &format!("{:<28} {:>10} {:>14} {:>9} {:>10.3}\n", r.algorithm, r.iterations, al, r.converged, r.wall_time);
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub algorithm: String,
    pub alpha_percent: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: f64,
}

/// Iterations to tolerance of the first configured algorithm as the shared fraction varies.
///
/// With a `baseline`, the point at zero sharing runs that method instead, so the sweep starts
/// from the purely distributed solver.
pub fn sweep_alpha(cfg: &ExperimentConfig, alphas: &[f64], baseline: Option<&str>) -> Result<Vec<SweepPoint>> {
    if !matches!(cfg.stop, StopMode::Tol(_)) {
        return Err(CliError::Config("sweep-alpha needs a tol stop mode".into()));
    }
    let registry = SolverRegistry::with_builtins();
    let spec = cfg.algorithms.first().ok_or_else(|| CliError::Config("no algorithm given".into()))?;
    let base = prepare(&ExperimentConfig { alpha_percent: Some(0.0), ..cfg.clone() }, &registry)?;
    let mut points = Vec::with_capacity(alphas.len());
    for &a in alphas {
        let plan = build_pool(&base.ds, a, cfg.seed).context(|| format!("pool at alpha = {a}"))?;
        let prep = Prepared { ds: base.ds.clone(), plan: Some(plan), oracle: base.oracle.clone() };
        let run = match baseline {
            Some(name) if a == 0.0 => {
                let base_spec = AlgorithmSpec { name: name.to_string(), config: spec.config.clone() };
                run_one(cfg, &registry, &prep, &base_spec)?
            }
            _ => run_one(cfg, &registry, &prep, spec)?,
        };
        points.push(SweepPoint { algorithm: run.method.clone(), alpha_percent: a, iterations: run.iterations, converged: run.converged, wall_time: run.wall_time });
    }
    Ok(points)
}

pub fn write_sweep(cfg: &ExperimentConfig, points: &[SweepPoint]) -> Result<()> {
    let out = &cfg.output;
    write_csv(
        &out.table_path(),
        &["alpha_percent", "algorithm", "iterations", "converged", "wall_time"],
        points.iter().map(|p| vec![fmt_num(p.alpha_percent), p.algorithm.clone(), p.iterations.to_string(), p.converged.to_string(), fmt_num(p.wall_time)]),
    )?;
    write_json(&out.report_path(), &points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcgRow {
    pub preconditioner: PrecondKind,
    pub condition_number: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub beta: Vec<f64>,
    pub relative_residual: Vec<f64>,
}

/// PCG with each preconditioner on the configured dataset; the global sketch uses the pool.
pub fn pcg_experiment(cfg: &ExperimentConfig, kinds: &[PrecondKind], opts: &PcgOptions, inline_variant: bool) -> Result<Vec<PcgRow>> {
    let ds = load_dataset(cfg)?;
    let mut rows = Vec::new();
    for &kind in kinds {
        let pre = match kind {
            PrecondKind::Identity => build_identity(&ds),
            PrecondKind::Local => build_local_precond(&ds).context(|| "local preconditioner".into())?,
            PrecondKind::GlobalSketch => {
                let alpha = cfg.alpha_percent.ok_or_else(|| CliError::Config("the global sketch needs alpha_percent".into()))?;
                let plan = build_pool(&ds, alpha, cfg.seed).context(|| "building the shared pool".into())?;
                build_global_precond(&ds, &plan, inline_variant).context(|| "global preconditioner".into())?
            }
        };
        let kappa = precond_condition_report(&ds, &pre).context(|| "condition number".into())?;
        let (beta, trace) = pcg_run(&ds, &pre, opts).context(|| format!("PCG with {kind:?}"))?;
        rows.push(PcgRow {
            preconditioner: kind,
            condition_number: kappa,
            iterations: trace.iterations,
            converged: trace.converged,
            final_residual: *trace.relative_residual.last().unwrap_or(&f64::NAN),
            beta,
            relative_residual: trace.relative_residual,
        });
    }
    Ok(rows)
}

fn kind_label(k: PrecondKind) -> String {
    serde_json::to_value(k).unwrap().as_str().unwrap_or_default().to_string()
}

pub fn write_pcg(cfg: &ExperimentConfig, rows: &[PcgRow]) -> Result<()> {
    let out = &cfg.output;
    write_csv(
        &out.table_path(),
        &["preconditioner", "condition_number", "iterations", "converged", "final_residual"],
        rows.iter().map(|r| {
            vec![kind_label(r.preconditioner), fmt_num(r.condition_number), r.iterations.to_string(), r.converged.to_string(), fmt_num(r.final_residual)]
        }),
    )?;
    write_json(&out.report_path(), &rows)?;
    if out.traces {
        for r in rows {
            write_csv(
                &out.dir.join(format!("trace_pcg_{}.csv", kind_label(r.preconditioner))),
                &["iteration", "relative_residual"],
                r.relative_residual.iter().enumerate().map(|(k, v)| vec![k.to_string(), fmt_num(*v)]),
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectraRow {
    pub rho: f64,
    pub primal: f64,
    pub gradient_descent: f64,
    pub dual_cyclic: f64,
    pub double_sweep: f64,
    /// Absent when there are too many centers to enumerate every order.
    pub rp_expected: Option<f64>,
    pub large_step_bound: f64,
}

/// Spectral radii of the iteration maps over a grid of step sizes.
pub fn spectra(cfg: &ExperimentConfig, rhos: &[f64]) -> Result<Vec<SpectraRow>> {
    let ds = load_dataset(cfg)?;
    let g = block_grams(&ds, true).context(|| "block Grams".into())?;
    let g = g.with_ridge(cfg.objective.alpha()).context(|| "ridge".into())?;
    let order: Vec<usize> = (0..g.b()).collect();
    let total = g.total();
    rhos.iter()
        .map(|&rho| {
            let ctx = || format!("rho = {rho}");
            let r = |m: datashare_core::Result<datashare_core::spectral::IterationMap>| -> Result<f64> {
                m.and_then(|m| m.spectral_radius()).context(ctx)
            };
            Ok(SpectraRow {
                rho,
                primal: r(build_mp(&g, rho))?,
                gradient_descent: build_mgd(&total, rho).spectral_radius().context(ctx)?,
                dual_cyclic: r(build_mc(&g, 1.0 / rho, &order))?,
                double_sweep: r(build_double_sweep(&g, 1.0 / rho))?,
                rp_expected: if g.b() <= MAX_ENUMERATED_BLOCKS { Some(r(rp_expected_map(&g, 1.0 / rho))?) } else { None },
                large_step_bound: bound_large_step(g.b(), rho, g.qmin),
            })
        })
        .collect()
}

pub fn write_spectra(cfg: &ExperimentConfig, rows: &[SpectraRow]) -> Result<()> {
    write_csv(
        &cfg.output.table_path(),
        &["rho", "primal", "gradient_descent", "dual_cyclic", "double_sweep", "rp_expected", "large_step_bound"],
        rows.iter().map(|r| {
            vec![
                fmt_num(r.rho),
                fmt_num(r.primal),
                fmt_num(r.gradient_descent),
                fmt_num(r.dual_cyclic),
                fmt_num(r.double_sweep),
                fmt_opt(r.rp_expected),
                fmt_num(r.large_step_bound),
            ]
        }),
    )?;
    write_json(&cfg.output.report_path(), &rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n: usize,
    pub p: usize,
    pub blocks: Vec<Vec<usize>>,
    pub truth: Option<Vec<f64>>,
}

/// Features followed by the response under a header row, plus a JSON file with the centers.
pub fn write_dataset(ds: &PartitionedDataset, csv_path: &Path, meta_path: &Path) -> Result<()> {
    let mut header: Vec<String> = (0..ds.p()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        csv_path,
        &header,
        (0..ds.n()).map(|i| {
            let mut row: Vec<String> = ds.x.row(i).iter().map(|v| fmt_num(*v)).collect();
            row.push(fmt_num(ds.y[i]));
            row
        }),
    )?;
    let meta = DatasetMeta { n: ds.n(), p: ds.p(), blocks: ds.blocks.clone(), truth: ds.truth.clone() };
    write_json(meta_path, &meta)
}
