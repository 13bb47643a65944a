//! Command-line surface. Flags override the fields of the JSON config they follow.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use datashare_core::generate::{EntryDist, GenSpec};
use datashare_core::pcg::{PcgOptions, PrecondKind};
use datashare_core::problem::Objective;
use datashare_core::theory::{verify_theory, Suite, SuiteReport};

use crate::config::*;
use crate::error::{CliError, Context, Result};
use crate::experiment::*;

#[derive(Debug, Parser)]
#[command(name = "datashare", version, about = "Distributed ADMM and PCG experiments with shared data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured algorithms and write a table, a report and per-iteration traces.
    Solve(SolveArgs),
    /// Conjugate gradients with the identity, local and global-sketch preconditioners.
    Pcg(PcgArgs),
    /// Spectral radii of the iteration maps over a grid of step sizes.
    Spectra(SpectraArgs),
    /// Check the rate theory on random instances; exits with 3 on any violation.
    VerifyTheory(VerifyArgs),
    /// Iterations to tolerance as the shared percentage varies.
    SweepAlpha(SweepArgs),
    /// Write a generated dataset as CSV.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GeneratorName {
    EqualBlocks,
    TwoDominant,
    Gaussian,
    Uniform,
    Logistic,
    PcgConstruction,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Percentage of rows placed in the shared pool.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Read observations from a CSV file instead of a generator.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
    /// Zero-based target column (default: last).
    #[arg(long)]
    pub target: Option<usize>,
    /// Divide the features by their Frobenius norm.
    #[arg(long)]
    pub normalize: bool,
    /// Multiply the features by the square root of the row count.
    #[arg(long)]
    pub sqrt_n: bool,
    /// Map {0, 1} labels to {-1, +1}.
    #[arg(long)]
    pub remap_labels: bool,
    #[arg(long, value_enum)]
    pub generator: Option<GeneratorName>,
    /// Number of centers.
    #[arg(long)]
    pub b: Option<usize>,
    /// Feature dimension (generators).
    #[arg(long)]
    pub p: Option<usize>,
    /// Rows per center (generators).
    #[arg(long)]
    pub rows: Option<usize>,
    /// Step size the two-dominant construction is built for.
    #[arg(long, default_value_t = 1.0)]
    pub rho_p: f64,
    /// Variance parameter of the PCG construction.
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// `ls`, `ridge=<alpha>` or `logistic=<alpha>`.
    #[arg(long, value_parser = parse_objective)]
    pub objective: Option<Objective>,
}

#[derive(Debug, Args)]
pub struct StopArgs {
    /// Stop after exactly this many iterations.
    #[arg(long, conflicts_with_all = ["time", "tol"])]
    pub iters: Option<usize>,
    /// Stop at the first iteration boundary past this many seconds.
    #[arg(long, conflicts_with = "tol")]
    pub time: Option<f64>,
    /// Stop once the absolute loss (or iterate change) drops below this.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration cap for the time and tolerance modes.
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub stop: StopArgs,
    /// Comma-separated method names; `all` for every registered method.
    #[arg(long, value_delimiter = ',')]
    pub algorithms: Option<Vec<String>>,
    /// Step size for every algorithm.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub no_traces: bool,
    /// List the registered methods and exit.
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PrecondArg {
    Identity,
    Local,
    Global,
}

#[derive(Debug, Args)]
pub struct PcgArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "identity,local,global")]
    pub precond: Vec<PrecondArg>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    /// Ridge added to the normal equations.
    #[arg(long, default_value_t = 0.0)]
    pub ridge: f64,
    /// Build the global sketch without the pool-size rescaling.
    #[arg(long)]
    pub inline: bool,
}

#[derive(Debug, Args)]
pub struct SpectraArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.25,0.5,1,2,4")]
    pub rhos: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite name, or `all`.
    #[arg(long, default_value = "all")]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,5,10")]
    pub alphas: Vec<f64>,
    #[arg(long, default_value = "drap")]
    pub algorithm: String,
    /// Method run at zero sharing; `none` keeps the main algorithm there too.
    #[arg(long, default_value = "primal-distributed")]
    pub baseline: String,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long)]
    pub cap: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// CSV destination; block membership and truth go next to it as JSON.
    #[arg(long)]
    pub output: PathBuf,
}

pub fn parse_objective(s: &str) -> std::result::Result<Objective, String> {
    let (kind, alpha) = match s.split_once('=') {
        Some((k, a)) => (k, Some(a.parse::<f64>().map_err(|e| format!("bad alpha '{a}': {e}"))?)),
        None => (s, None),
    };
    match (kind, alpha) {
        ("ls", None) => Ok(Objective::LeastSquares),
        ("ridge", Some(alpha)) => Ok(Objective::Ridge { alpha }),
        ("logistic", a) => Ok(Objective::Logistic { alpha: a.unwrap_or(0.0) }),
        _ => Err(format!("unknown objective '{s}'")),
    }
}

impl DataArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(out) = &self.out {
            cfg.output.dir = out.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(a) = self.alpha {
            cfg.alpha_percent = Some(a);
        }
        if let Some(o) = self.objective {
            cfg.objective = o;
        }
        if let Some(path) = &self.csv {
            let options = crate::ingest::IngestOptions {
                has_header: self.header,
                target: self.target,
                normalize: self.normalize,
                sqrt_n_scale: self.sqrt_n,
                ..Default::default()
            };
            cfg.dataset = DatasetSource::Csv(CsvSource { path: path.clone(), options, remap_labels: self.remap_labels });
        }
        if let Some(b) = self.b {
            cfg.b = Some(b);
        }
        if let DatasetSource::Generator(g) = &mut cfg.dataset {
            if let Some(name) = self.generator {
                g.generator = match name {
                    GeneratorName::EqualBlocks => Generator::EqualBlocks,
                    GeneratorName::TwoDominant => Generator::TwoDominant { rho_p: self.rho_p },
                    GeneratorName::Gaussian => Generator::Random { dist: EntryDist::Gaussian },
                    GeneratorName::Uniform => Generator::Random { dist: EntryDist::Uniform },
                    GeneratorName::Logistic => Generator::Logistic,
                    GeneratorName::PcgConstruction => Generator::PcgConstruction { epsilon: self.epsilon },
                };
            }
            let spec: &mut GenSpec = &mut g.spec;
            if let Some(b) = self.b {
                spec.b = b;
            }
            if let Some(p) = self.p {
                spec.p = p;
            }
            if let Some(r) = self.rows {
                spec.rows_per_block = r;
            }
            if let Some(s) = self.seed {
                spec.seed = s;
            }
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        self.apply(&mut cfg);
        Ok(cfg)
    }
}

impl StopArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(k) = self.iters {
            cfg.stop = StopMode::FixedIters(k);
        }
        if let Some(s) = self.time {
            cfg.stop = StopMode::FixedTime(s);
        }
        if let Some(t) = self.tol {
            cfg.stop = StopMode::Tol(t);
        }
        if let Some(c) = self.cap {
            cfg.iteration_cap = c;
        }
    }
}

fn set_algorithms(cfg: &mut ExperimentConfig, names: &[String]) {
    let registry = datashare_core::solver::SolverRegistry::with_builtins();
    let names: Vec<String> = if names.iter().any(|n| n == "all") {
        registry.iter().filter(|m| m.supports(&cfg.objective)).map(|m| m.name().to_string()).collect()
    } else {
        names.to_vec()
    };
    cfg.algorithms = names.iter().map(|n| AlgorithmSpec::named(n)).collect();
}

fn set_rho(cfg: &mut ExperimentConfig, rho: Option<f64>) {
    if let Some(r) = rho {
        for a in &mut cfg.algorithms {
            a.config.rho = r;
        }
    }
}

fn suites(name: &str) -> Result<Vec<Suite>> {
    if name == "all" {
        return Ok(Suite::ALL.to_vec());
    }
    name.split(',').map(|s| s.trim().parse::<Suite>().map_err(|e| CliError::Usage(e.to_string()))).collect()
}

/// Runs the requested suites; a violation yields `CliError::Verification` after the report is written.
pub fn run_verify(args: &VerifyArgs) -> Result<Vec<SuiteReport>> {
    let reports = suites(&args.suite)?
        .into_iter()
        .map(|s| verify_theory(s, args.seed, args.trials).context(|| format!("suite {s}")))
        .collect::<Result<Vec<_>>>()?;
    for r in &reports {
        let worst = r.records.iter().map(|x| x.report.slack).fold(f64::INFINITY, f64::min);
        println!("{:<9} {:>6} records  {:>4} failures  min slack {worst:.3e}  {}", r.suite.name(), r.records.len(), r.failures, if r.pass { "ok" } else { "FAIL" });
    }
    if let Some(path) = &args.out {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(&reports)?)?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.suite.name()).collect();
    if failed.is_empty() {
        Ok(reports)
    } else {
        Err(CliError::Verification(format!("suites with violations: {}", failed.join(", "))))
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve(a) => {
            if a.list {
                for m in datashare_core::solver::SolverRegistry::with_builtins().iter() {
                    println!("{:<28} {}", m.name(), m.description());
                }
                return Ok(());
            }
            let mut cfg = a.data.resolve()?;
            a.stop.apply(&mut cfg);
            if let Some(names) = &a.algorithms {
                set_algorithms(&mut cfg, names);
            }
            set_rho(&mut cfg, a.rho);
            if a.no_traces {
                cfg.output.traces = false;
            }
            let (report, runs) = run_experiment(&cfg)?;
            write_experiment(&report, &runs)?;
            print!("{}", format_table(&report));
        }
        Command::Pcg(a) => {
            let cfg = a.data.resolve()?;
            let kinds: Vec<PrecondKind> = a
                .precond
                .iter()
                .map(|p| match p {
                    PrecondArg::Identity => PrecondKind::Identity,
                    PrecondArg::Local => PrecondKind::Local,
                    PrecondArg::Global => PrecondKind::GlobalSketch,
                })
                .collect();
            let opts = PcgOptions { tol: a.tol, max_iters: a.max_iters, alpha: a.ridge };
            let rows = pcg_experiment(&cfg, &kinds, &opts, a.inline)?;
            write_pcg(&cfg, &rows)?;
            for r in &rows {
                println!("{:<14} kappa {:>12.4}  iterations {:>5}  converged {}", format!("{:?}", r.preconditioner), r.condition_number, r.iterations, r.converged);
            }
        }
        Command::Spectra(a) => {
            let cfg = a.data.resolve()?;
            let rows = spectra(&cfg, &a.rhos)?;
            write_spectra(&cfg, &rows)?;
            for r in &rows {
                println!("rho {:>8.4}  primal {:.6}  gd {:.6}  cyclic {:.6}  double {:.6}", r.rho, r.primal, r.gradient_descent, r.dual_cyclic, r.double_sweep);
            }
        }
        Command::VerifyTheory(a) => {
            run_verify(&a)?;
        }
        Command::SweepAlpha(a) => {
            let mut cfg = a.data.resolve()?;
            cfg.stop = StopMode::Tol(a.tol);
            if let Some(c) = a.cap {
                cfg.iteration_cap = c;
            }
            cfg.algorithms = vec![AlgorithmSpec::named(&a.algorithm)];
            set_rho(&mut cfg, a.rho);
            let baseline = (a.baseline != "none").then_some(a.baseline.as_str());
            let points = sweep_alpha(&cfg, &a.alphas, baseline)?;
            write_sweep(&cfg, &points)?;
            for p in &points {
                println!("alpha {:>6.2}%  {:<20} iterations {:>7}  converged {}", p.alpha_percent, p.algorithm, p.iterations, p.converged);
            }
        }
        Command::Gen(a) => {
            let cfg = a.data.resolve()?;
            let ds = load_dataset(&cfg)?;
            write_dataset(&ds, &a.output, &a.output.with_extension("json"))?;
            println!("wrote {} rows x {} features to {}", ds.n(), ds.p(), a.output.display());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objectives_parse() {
        assert_eq!(parse_objective("ls"), Ok(Objective::LeastSquares));
        assert_eq!(parse_objective("ridge=0.5"), Ok(Objective::Ridge { alpha: 0.5 }));
        assert_eq!(parse_objective("logistic"), Ok(Objective::Logistic { alpha: 0.0 }));
        assert!(parse_objective("ridge").is_err());
        assert!(parse_objective("lasso=1").is_err());
    }

    #[test]
    fn flags_override_the_config() {
        let cli = Cli::try_parse_from(["datashare", "solve", "--b", "3", "--p", "2", "--rows", "6", "--iters", "5", "--algorithms", "dual-cyclic,drap", "--rho", "0.5", "--alpha", "10"]).unwrap();
        let Command::Solve(a) = cli.command else { panic!() };
        let mut cfg = a.data.resolve().unwrap();
        a.stop.apply(&mut cfg);
        set_algorithms(&mut cfg, a.algorithms.as_ref().unwrap());
        set_rho(&mut cfg, a.rho);
        assert_eq!(cfg.stop, StopMode::FixedIters(5));
        assert_eq!(cfg.alpha_percent, Some(10.0));
        assert_eq!(cfg.algorithms.len(), 2);
        assert!(cfg.algorithms.iter().all(|x| x.config.rho == 0.5));
        let DatasetSource::Generator(g) = &cfg.dataset else { panic!() };
        assert_eq!((g.spec.b, g.spec.p, g.spec.rows_per_block), (3, 2, 6));
    }

    #[test]
    fn conflicting_stop_flags_are_rejected() {
        assert!(Cli::try_parse_from(["datashare", "solve", "--iters", "5", "--tol", "1e-3"]).is_err());
    }

    #[test]
    fn suite_lists() {
        assert_eq!(suites("all").unwrap().len(), 8);
        assert_eq!(suites("thm1,pcg-cond").unwrap(), vec![Suite::Thm1, Suite::PcgCond]);
        assert!(matches!(suites("thm9"), Err(CliError::Usage(_))));
    }
}
