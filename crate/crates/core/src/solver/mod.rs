//! The ADMM family and baselines behind one trait, looked up by name at runtime.

mod drap;
mod dual;
mod primal;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use datashare_linalg::vector;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::problem::{Objective, PartitionedDataset};
use crate::reference::GradientDescentMethod;
use crate::reference::NewtonMethod;
use crate::sharing::SharingPlan;

pub use drap::{entropy_t_solve, DrapLogistic, DrapMethod, SharedSweepMethod, SweepPattern, TspaceLs};
pub use dual::{DualDistributed, DualDistributedMethod, DualSweep, DualSweepMethod, SweepMode};
pub use primal::{PrimalDistributedMethod, PrimalLogistic, PrimalLs, PrimalVariant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_steps: usize,
    pub armijo_c: f64,
    pub shrink: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { tol: 1e-10, max_steps: 50, armijo_c: 1e-4, shrink: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Step size; `ρ_p` for primal methods, `ρ_d` for dual ones, the fixed step for gradient descent.
    pub rho: f64,
    pub max_iters: usize,
    /// Stop once the loss to the oracle (or the iterate change without one) drops below this.
    pub tol: Option<f64>,
    /// Wall-clock budget in seconds, checked at iteration boundaries.
    pub time_budget: Option<f64>,
    pub seed: u64,
    pub record_trace: bool,
    /// Block update order for the cyclic sweep; ascending when absent.
    pub order: Option<Vec<usize>>,
    pub newton: NewtonConfig,
    /// Gradient descent with Armijo backtracking instead of the fixed step `rho`.
    pub backtracking: bool,
    /// Center that receives the whole pool in the one-center variant.
    pub target_center: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho: 1.0,
            max_iters: 200,
            tol: None,
            time_budget: None,
            seed: 0,
            record_trace: true,
            order: None,
            newton: NewtonConfig::default(),
            backtracking: false,
            target_center: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(CoreError::InvalidConfig(format!("rho must be positive, got {}", self.rho)));
        }
        if self.max_iters == 0 {
            return Err(CoreError::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_iters(mut self, k: usize) -> Self {
        self.max_iters = k;
        self
    }
}

/// What a method runs on.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub data: &'a PartitionedDataset,
    pub objective: Objective,
    pub plan: Option<&'a SharingPlan>,
}

impl<'a> Problem<'a> {
    pub fn new(data: &'a PartitionedDataset, objective: Objective) -> Self {
        Problem { data, objective, plan: None }
    }

    pub fn with_plan(mut self, plan: &'a SharingPlan) -> Self {
        self.plan = Some(plan);
        self
    }

    pub(crate) fn require_plan(&self, method: &str) -> Result<&'a SharingPlan> {
        self.plan.ok_or_else(|| CoreError::Unsupported {
            method: method.to_string(),
            what: "running without a sharing plan".into(),
        })
    }
}

/// A running solver. One call to `step` is one outer iteration.
pub trait Iterate: Send {
    fn step(&mut self) -> Result<()>;
    fn beta(&self) -> &[f64];
}

/// An algorithm that can be started on a problem.
pub trait Method: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn supports(&self, objective: &Objective) -> bool;
    fn needs_plan(&self) -> bool {
        false
    }
    fn start<'a>(&self, problem: &Problem<'a>, cfg: &SolverConfig) -> Result<Box<dyn Iterate + 'a>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    Tolerance,
    TimeBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub absolute_loss: Option<f64>,
    pub change: f64,
    pub elapsed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRun {
    pub method: String,
    pub objective: Objective,
    pub config: SolverConfig,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub beta: Vec<f64>,
    pub absolute_loss: Option<f64>,
    pub wall_time: f64,
    pub trace: Vec<TraceRow>,
}

const DIVERGENCE_NORM: f64 = 1e12;

/// Drives `method` until the iteration cap, the tolerance or the time budget.
pub fn run(method: &dyn Method, problem: &Problem<'_>, cfg: &SolverConfig, oracle: Option<&[f64]>) -> Result<SolverRun> {
    cfg.validate()?;
    problem.objective.validate()?;
    if !method.supports(&problem.objective) {
        return Err(CoreError::Unsupported {
            method: method.name().into(),
            what: format!("the {} objective", problem.objective.label()),
        });
    }
    if let Some(o) = oracle {
        if o.len() != problem.data.p() {
            return Err(CoreError::LengthMismatch(o.len(), problem.data.p()));
        }
    }
    let clock = Instant::now();
    let mut it = method.start(problem, cfg)?;
    let mut trace = Vec::new();
    let mut stop_reason = StopReason::MaxIters;
    let mut iterations = 0;
    let mut last_al = None;
    for k in 1..=cfg.max_iters {
        let prev = it.beta().to_vec();
        it.step()?;
        iterations = k;
        let beta = it.beta();
        if !beta.iter().all(|v| v.is_finite()) || vector::norm2(beta) > DIVERGENCE_NORM {
            return Err(CoreError::Divergence(k));
        }
        let change = vector::dist2(beta, &prev);
        let al = oracle.map(|o| vector::dist2(beta, o));
        last_al = al;
        let elapsed = clock.elapsed().as_secs_f64();
        if cfg.record_trace {
            trace.push(TraceRow { iter: k, absolute_loss: al, change, elapsed });
        }
        if let Some(tol) = cfg.tol {
            let measure = al.unwrap_or(change);
            if measure < tol {
                stop_reason = StopReason::Tolerance;
                break;
            }
        }
        if let Some(budget) = cfg.time_budget {
            if elapsed >= budget {
                stop_reason = StopReason::TimeBudget;
                break;
            }
        }
    }
    Ok(SolverRun {
        method: method.name().to_string(),
        objective: problem.objective,
        config: cfg.clone(),
        iterations,
        converged: stop_reason == StopReason::Tolerance,
        stop_reason,
        beta: it.beta().to_vec(),
        absolute_loss: last_al,
        wall_time: clock.elapsed().as_secs_f64(),
        trace,
    })
}

/// Name → method table.
#[derive(Clone, Default)]
pub struct SolverRegistry {
    methods: BTreeMap<&'static str, Arc<dyn Method>>,
}

impl SolverRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        r.register(Arc::new(PrimalDistributedMethod::new(PrimalVariant::Static)));
        r.register(Arc::new(PrimalDistributedMethod::new(PrimalVariant::Shared)));
        r.register(Arc::new(PrimalDistributedMethod::new(PrimalVariant::OneCenter)));
        r.register(Arc::new(DualDistributedMethod));
        r.register(Arc::new(DualSweepMethod::cyclic()));
        r.register(Arc::new(DualSweepMethod::random_permutation()));
        r.register(Arc::new(DualSweepMethod::double_sweep()));
        r.register(Arc::new(SharedSweepMethod::cyclic()));
        r.register(Arc::new(SharedSweepMethod::double_sweep()));
        r.register(Arc::new(DrapMethod));
        r.register(Arc::new(GradientDescentMethod));
        r.register(Arc::new(NewtonMethod));
        r
    }

    pub fn register(&mut self, m: Arc<dyn Method>) {
        self.methods.insert(m.name(), m);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Method>> {
        self.methods.get(name).cloned().ok_or_else(|| CoreError::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn Method>> {
        self.methods.values()
    }

    pub fn run(&self, name: &str, problem: &Problem<'_>, cfg: &SolverConfig, oracle: Option<&[f64]>) -> Result<SolverRun> {
        run(self.get(name)?.as_ref(), problem, cfg, oracle)
    }
}

/// The eight multi-block variants compared side by side in the least-squares tables.
pub const TABLE_METHODS: [&str; 8] = [
    "primal-distributed",
    "double-sweep",
    "dual-cyclic",
    "dual-rp",
    "primal-distributed-shared",
    "double-sweep-shared",
    "dual-cyclic-shared",
    "drap",
];

fn builtin(name: &str, problem: &Problem<'_>, cfg: &SolverConfig, oracle: Option<&[f64]>) -> Result<SolverRun> {
    SolverRegistry::with_builtins().run(name, problem, cfg, oracle)
}

pub fn primal_distributed_run(
    ds: &PartitionedDataset,
    objective: Objective,
    cfg: &SolverConfig,
    beta_star: Option<&[f64]>,
) -> Result<SolverRun> {
    builtin("primal-distributed", &Problem::new(ds, objective), cfg, beta_star)
}

pub fn primal_distributed_logistic_run(
    ds: &PartitionedDataset,
    alpha: f64,
    cfg: &SolverConfig,
    beta_star: Option<&[f64]>,
) -> Result<SolverRun> {
    primal_distributed_run(ds, Objective::Logistic { alpha }, cfg, beta_star)
}

pub fn dual_distributed_run(
    ds: &PartitionedDataset,
    objective: Objective,
    cfg: &SolverConfig,
    beta_star: Option<&[f64]>,
) -> Result<SolverRun> {
    builtin("dual-distributed", &Problem::new(ds, objective), cfg, beta_star)
}

pub fn dual_cyclic_run(
    ds: &PartitionedDataset,
    objective: Objective,
    cfg: &SolverConfig,
    order: &[usize],
    beta_star: Option<&[f64]>,
) -> Result<SolverRun> {
    let cfg = SolverConfig { order: Some(order.to_vec()), ..cfg.clone() };
    builtin("dual-cyclic", &Problem::new(ds, objective), &cfg, beta_star)
}

pub fn dual_rp_run(
    ds: &PartitionedDataset,
    objective: Objective,
    cfg: &SolverConfig,
    beta_star: Option<&[f64]>,
) -> Result<SolverRun> {
    builtin("dual-rp", &Problem::new(ds, objective), cfg, beta_star)
}

pub fn double_sweep_run(
    ds: &PartitionedDataset,
    objective: Objective,
    cfg: &SolverConfig,
    beta_star: Option<&[f64]>,
) -> Result<SolverRun> {
    builtin("double-sweep", &Problem::new(ds, objective), cfg, beta_star)
}

pub fn drap_admm_run(
    ds: &PartitionedDataset,
    plan: &SharingPlan,
    objective: Objective,
    cfg: &SolverConfig,
    beta_star: Option<&[f64]>,
) -> Result<SolverRun> {
    builtin("drap", &Problem::new(ds, objective).with_plan(plan), cfg, beta_star)
}

pub fn drap_logistic_run(
    ds: &PartitionedDataset,
    plan: &SharingPlan,
    alpha: f64,
    cfg: &SolverConfig,
    beta_star: Option<&[f64]>,
) -> Result<SolverRun> {
    drap_admm_run(ds, plan, Objective::Logistic { alpha }, cfg, beta_star)
}

/// Rayon pool sized by `DATASHARE_THREADS` when set.
pub fn thread_pool_from_env() -> Option<rayon::ThreadPool> {
    let n: usize = std::env::var("DATASHARE_THREADS").ok()?.parse().ok()?;
    rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_lists_builtins() {
        let r = SolverRegistry::with_builtins();
        for name in TABLE_METHODS {
            assert!(r.get(name).is_ok(), "{name}");
        }
        assert!(r.get("primal-distributed-one-center").is_ok());
        assert!(matches!(r.get("nope"), Err(CoreError::UnknownMethod(_))));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        assert!(SolverConfig::default().with_rho(0.0).validate().is_err());
        assert!(SolverConfig::default().with_iters(0).validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let c: SolverConfig = serde_json::from_str(r#"{"rho": 0.5}"#).unwrap();
        assert_eq!(c.rho, 0.5);
        assert_eq!(c.max_iters, 200);
        assert_eq!(c.newton.tol, 1e-10);
    }
}
