//! Experiment description, read from JSON and then patched by command-line flags.

use std::path::{Path, PathBuf};

use datashare_core::generate::*;
use datashare_core::problem::{partition_rows, remap_zero_one_labels, Objective, PartitionStrategy, PartitionedDataset};
use datashare_core::solver::{SolverConfig, SolverRegistry};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Context, Result};
use crate::ingest::{ingest_csv, IngestOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Generator {
    EqualBlocks,
    TwoDominant { rho_p: f64 },
    Random { dist: EntryDist },
    Heterogeneous { dists: Vec<EntryDist> },
    Logistic,
    PcgConstruction { epsilon: f64 },
    PaperExample { which: PaperExample },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSource {
    #[serde(flatten)]
    pub generator: Generator,
    /// Shape and seed; `b` and `rows_per_block` double as `s` for the PCG construction.
    #[serde(default = "default_spec")]
    pub spec: GenSpec,
}

fn default_spec() -> GenSpec {
    GenSpec::new(4, 20, 100, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSource {
    pub path: PathBuf,
    #[serde(default, flatten)]
    pub options: IngestOptions,
    /// Labels given as `{0, 1}` are mapped to `{−1, +1}`.
    #[serde(default)]
    pub remap_labels: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Csv(CsvSource),
    Generator(GeneratorSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub name: String,
    #[serde(default)]
    pub config: SolverConfig,
}

impl AlgorithmSpec {
    pub fn named(name: &str) -> Self {
        AlgorithmSpec { name: name.to_string(), config: SolverConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    FixedIters(usize),
    /// Seconds of wall time, checked at iteration boundaries.
    FixedTime(f64),
    Tol(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub table: String,
    pub report: String,
    /// Write `trace_<algorithm>.csv` with `(iteration, loss)` pairs.
    pub traces: bool,
}

impl Default for OutputPaths {
    fn default() -> Self {
        OutputPaths { dir: PathBuf::from("out"), table: "table.csv".into(), report: "report.json".into(), traces: true }
    }
}

impl OutputPaths {
    pub fn table_path(&self) -> PathBuf {
        self.dir.join(&self.table)
    }

    pub fn report_path(&self) -> PathBuf {
        self.dir.join(&self.report)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub objective: Objective,
    /// Number of centers for CSV input; generators take it from their spec.
    pub b: Option<usize>,
    pub partition: PartitionStrategy,
    pub algorithms: Vec<AlgorithmSpec>,
    pub alpha_percent: Option<f64>,
    pub seed: u64,
    pub stop: StopMode,
    /// Iteration cap under the `fixed_time` and `tol` stop modes.
    pub iteration_cap: usize,
    /// Measure the absolute loss against the centralized solution.
    pub oracle: bool,
    pub output: OutputPaths,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::Generator(GeneratorSource { generator: Generator::EqualBlocks, spec: default_spec() }),
            objective: Objective::LeastSquares,
            b: None,
            partition: PartitionStrategy::Contiguous,
            algorithms: vec![AlgorithmSpec::named("primal-distributed"), AlgorithmSpec::named("drap")],
            alpha_percent: Some(5.0),
            seed: 0,
            stop: StopMode::FixedIters(200),
            iteration_cap: 100_000,
            oracle: true,
            output: OutputPaths::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self, registry: &SolverRegistry) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(CliError::Config("at least one algorithm is required".into()));
        }
        for a in &self.algorithms {
            let m = registry.get(&a.name).map_err(|e| CliError::Config(e.to_string()))?;
            if m.needs_plan() && self.alpha_percent.is_none() {
                return Err(CliError::Config(format!("'{}' shares data; alpha_percent is required", a.name)));
            }
            if !m.supports(&self.objective) {
                return Err(CliError::Config(format!("'{}' does not support the {} objective", a.name, self.objective.label())));
            }
        }
        match self.stop {
            StopMode::FixedIters(0) => return Err(CliError::Config("fixed_iters must be at least 1".into())),
            StopMode::FixedTime(s) if !(s > 0.0) => return Err(CliError::Config("fixed_time must be positive".into())),
            StopMode::Tol(t) if !(t > 0.0) => return Err(CliError::Config("tol must be positive".into())),
            _ => {}
        }
        if let DatasetSource::Csv(_) = self.dataset {
            if self.b.is_none() {
                return Err(CliError::Config("b is required for CSV input".into()));
            }
        }
        Ok(())
    }

    /// The solver settings each algorithm actually runs with.
    pub fn effective_config(&self, spec: &AlgorithmSpec) -> SolverConfig {
        let mut c = spec.config.clone();
        c.seed = self.seed;
        match self.stop {
            StopMode::FixedIters(k) => {
                c.max_iters = k;
                c.tol = None;
                c.time_budget = None;
            }
            StopMode::FixedTime(s) => {
                c.max_iters = self.iteration_cap;
                c.tol = None;
                c.time_budget = Some(s);
            }
            StopMode::Tol(t) => {
                c.max_iters = self.iteration_cap;
                c.tol = Some(t);
                c.time_budget = None;
            }
        }
        c
    }
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<PartitionedDataset> {
    match &cfg.dataset {
        DatasetSource::Csv(src) => {
            let (x, mut y) = ingest_csv(&src.path, &src.options)?;
            if src.remap_labels {
                y = remap_zero_one_labels(&y).context(|| "label remapping".into())?;
            }
            let b = cfg.b.ok_or_else(|| CliError::Config("b is required for CSV input".into()))?;
            partition_rows(x, y, b, cfg.partition).context(|| "partitioning".into())
        }
        DatasetSource::Generator(src) => generate(src).context(|| "generating the dataset".into()),
    }
}

pub fn generate(src: &GeneratorSource) -> datashare_core::Result<PartitionedDataset> {
    let spec = &src.spec;
    match &src.generator {
        Generator::EqualBlocks => gen_equal_blocks(spec),
        Generator::TwoDominant { rho_p } => gen_two_dominant(spec, *rho_p),
        Generator::Random { dist } => gen_random(spec, *dist),
        Generator::Heterogeneous { dists } => gen_heterogeneous(spec, dists),
        Generator::Logistic => gen_logistic(spec),
        Generator::PcgConstruction { epsilon } => gen_pcg_construction(*epsilon, spec.rows_per_block, spec.seed),
        Generator::PaperExample { which } => Ok(gen_paper_example(*which)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_json_fills_defaults() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"dataset": {"generator": {"name": "two_dominant", "rho_p": 1.0, "spec": {"b": 3, "p": 2, "rows_per_block": 5}}},
                "algorithms": [{"name": "drap", "config": {"rho": 0.5}}],
                "stop": {"tol": 1e-6}}"#,
        )
        .unwrap();
        assert_eq!(c.algorithms[0].config.rho, 0.5);
        assert_eq!(c.algorithms[0].config.max_iters, SolverConfig::default().max_iters);
        assert_eq!(c.stop, StopMode::Tol(1e-6));
        assert_eq!(c.alpha_percent, Some(5.0));
        match &c.dataset {
            DatasetSource::Generator(g) => assert_eq!(g.generator, Generator::TwoDominant { rho_p: 1.0 }),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation() {
        let reg = SolverRegistry::with_builtins();
        let mut c = ExperimentConfig::default();
        assert!(c.validate(&reg).is_ok());
        c.alpha_percent = None;
        assert!(matches!(c.validate(&reg), Err(CliError::Config(_))));
        c.algorithms = vec![AlgorithmSpec::named("primal-distributed")];
        assert!(c.validate(&reg).is_ok());
        c.algorithms.clear();
        assert!(c.validate(&reg).is_err());
        c.algorithms = vec![AlgorithmSpec::named("nope")];
        assert!(c.validate(&reg).is_err());
    }

    #[test]
    fn stop_modes_drive_the_solver_config() {
        let mut c = ExperimentConfig::default();
        let spec = AlgorithmSpec::named("drap");
        c.stop = StopMode::FixedIters(7);
        let e = c.effective_config(&spec);
        assert_eq!((e.max_iters, e.tol, e.time_budget), (7, None, None));
        c.stop = StopMode::FixedTime(2.0);
        assert_eq!(c.effective_config(&spec).time_budget, Some(2.0));
        c.stop = StopMode::Tol(1e-3);
        assert_eq!(c.effective_config(&spec).tol, Some(1e-3));
    }
}
