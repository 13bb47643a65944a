//! Dual ADMM in `μ_i = X_iᵀt_i` coordinates: distributed, cyclic, random order, double sweep.

use datashare_linalg::{vector, Cholesky, Matrix};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Iterate, Method, Problem, SolverConfig};
use crate::error::{CoreError, Result};
use crate::problem::{gram_rows, xty_rows, Objective, PartitionedDataset};

/// Per-center `(D_i, X_iᵀy_i)` with the ridge share folded into `D_i`.
fn block_data(ds: &PartitionedDataset, alpha: f64) -> (Vec<Matrix>, Vec<Vec<f64>>) {
    let share = alpha / ds.b() as f64;
    ds.blocks
        .par_iter()
        .map(|blk| {
            let mut d = gram_rows(&ds.x, blk);
            d.add_diag(share);
            (d, xty_rows(&ds.x, &ds.y, blk))
        })
        .unzip()
}

/// `I + ρ D_i`
fn factor_dual(d: &[Matrix], rho: f64) -> Result<Vec<Cholesky>> {
    d.iter()
        .map(|di| {
            let mut a = di.scaled(rho);
            a.add_diag(1.0);
            Ok(Cholesky::new(&a)?)
        })
        .collect()
}

pub struct DualDistributedMethod;

impl Method for DualDistributedMethod {
    fn name(&self) -> &'static str {
        "dual-distributed"
    }

    fn description(&self) -> &'static str {
        "dual distributed ADMM with consensus auxiliaries v_i"
    }

    fn supports(&self, objective: &Objective) -> bool {
        objective.is_quadratic()
    }

    fn start<'a>(&self, problem: &Problem<'a>, cfg: &SolverConfig) -> Result<Box<dyn Iterate + 'a>> {
        Ok(Box::new(DualDistributed::new(problem.data, problem.objective.alpha(), cfg.rho)?))
    }
}

/// State `(μ_i, v_i, β)`; `beta_prev` keeps the `β` used by the latest `μ` update.
pub struct DualDistributed {
    rho: f64,
    d: Vec<Matrix>,
    c: Vec<Vec<f64>>,
    chol: Vec<Cholesky>,
    mu: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    beta: Vec<f64>,
    beta_prev: Vec<f64>,
}

impl DualDistributed {
    pub fn new(ds: &PartitionedDataset, alpha: f64, rho: f64) -> Result<Self> {
        let (d, c) = block_data(ds, alpha);
        let chol = factor_dual(&d, rho)?;
        let (b, p) = (ds.b(), ds.p());
        Ok(DualDistributed {
            rho,
            d,
            c,
            chol,
            mu: vec![vec![0.0; p]; b],
            v: vec![vec![0.0; p]; b],
            beta: vec![0.0; p],
            beta_prev: vec![0.0; p],
        })
    }

    pub fn mu(&self) -> &[Vec<f64>] {
        &self.mu
    }

    /// `Σ_i v_i`, zero for a feasible auxiliary.
    pub fn v_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.beta.len()];
        for v in &self.v {
            vector::axpy(1.0, v, &mut s);
        }
        s
    }

    /// `η_i = ρμ_i − β` with the `β` that produced `μ`.
    pub fn eta(&self) -> Vec<f64> {
        self.mu
            .iter()
            .flat_map(|m| vector::sub(&vector::scale(self.rho, m), &self.beta_prev))
            .collect()
    }

    /// Sets `β = −mean(η)` and `v = (η − Pη)/ρ`.
    pub fn set_eta(&mut self, eta: &[f64]) {
        let (b, p) = (self.mu.len(), self.beta.len());
        assert_eq!(eta.len(), b * p, "set_eta: length mismatch");
        let mut mean = vec![0.0; p];
        for i in 0..b {
            vector::axpy(1.0 / b as f64, &eta[i * p..(i + 1) * p], &mut mean);
        }
        for i in 0..b {
            self.v[i] = vector::scale(1.0 / self.rho, &vector::sub(&eta[i * p..(i + 1) * p], &mean));
        }
        self.beta = vector::scale(-1.0, &mean);
    }
}

impl Iterate for DualDistributed {
    fn step(&mut self) -> Result<()> {
        let rho = self.rho;
        let b = self.mu.len();
        let (d, c, v, beta) = (&self.d, &self.c, &self.v, &self.beta);
        self.mu = self
            .chol
            .par_iter()
            .enumerate()
            .map(|(i, ch)| {
                let mut rhs = d[i].matvec(&vector::add(&vector::scale(rho, &v[i]), beta));
                vector::axpy(-1.0, &c[i], &mut rhs);
                ch.solve_vec(&rhs)
            })
            .collect();
        let mut mean = vec![0.0; self.beta.len()];
        for m in &self.mu {
            vector::axpy(1.0 / b as f64, m, &mut mean);
        }
        for i in 0..b {
            self.v[i] = vector::sub(&self.mu[i], &mean);
        }
        self.beta_prev = self.beta.clone();
        vector::axpy(-rho, &mean, &mut self.beta);
        Ok(())
    }

    fn beta(&self) -> &[f64] {
        &self.beta
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepMode {
    Cyclic(Vec<usize>),
    RandomPermutation { seed: u64 },
    DoubleSweep,
}

pub struct DualSweepMethod {
    name: &'static str,
    kind: u8,
}

impl DualSweepMethod {
    pub fn cyclic() -> Self {
        DualSweepMethod { name: "dual-cyclic", kind: 0 }
    }

    pub fn random_permutation() -> Self {
        DualSweepMethod { name: "dual-rp", kind: 1 }
    }

    pub fn double_sweep() -> Self {
        DualSweepMethod { name: "double-sweep", kind: 2 }
    }
}

impl Method for DualSweepMethod {
    fn name(&self) -> &'static str {
        self.name
    }

    fn description(&self) -> &'static str {
        match self.kind {
            0 => "dual ADMM, Gauss-Seidel sweep in a fixed order",
            1 => "dual ADMM, sweep order redrawn every iteration",
            _ => "dual ADMM, forward then backward sweep",
        }
    }

    fn supports(&self, objective: &Objective) -> bool {
        objective.is_quadratic()
    }

    fn start<'a>(&self, problem: &Problem<'a>, cfg: &SolverConfig) -> Result<Box<dyn Iterate + 'a>> {
        let b = problem.data.b();
        let mode = match self.kind {
            0 => SweepMode::Cyclic(cfg.order.clone().unwrap_or_else(|| (0..b).collect())),
            1 => SweepMode::RandomPermutation { seed: cfg.seed },
            _ => SweepMode::DoubleSweep,
        };
        Ok(Box::new(DualSweep::new(problem.data, problem.objective.alpha(), cfg.rho, mode)?))
    }
}

/// State `(μ_1, …, μ_b, β)`.
pub struct DualSweep {
    rho: f64,
    d: Vec<Matrix>,
    c: Vec<Vec<f64>>,
    chol: Vec<Cholesky>,
    mode: SweepMode,
    rng: ChaCha8Rng,
    mu: Vec<Vec<f64>>,
    total: Vec<f64>,
    beta: Vec<f64>,
}

impl DualSweep {
    pub fn new(ds: &PartitionedDataset, alpha: f64, rho: f64, mode: SweepMode) -> Result<Self> {
        let b = ds.b();
        if let SweepMode::Cyclic(order) = &mode {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..b).collect::<Vec<_>>() {
                return Err(CoreError::InvalidConfig(format!("order {order:?} is not a permutation of 0..{b}")));
            }
        }
        let (d, c) = block_data(ds, alpha);
        let chol = factor_dual(&d, rho)?;
        let seed = if let SweepMode::RandomPermutation { seed } = mode { seed } else { 0 };
        let p = ds.p();
        Ok(DualSweep {
            rho,
            d,
            c,
            chol,
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            mu: vec![vec![0.0; p]; b],
            total: vec![0.0; p],
            beta: vec![0.0; p],
        })
    }

    /// `(μ, β)` stacked.
    pub fn state(&self) -> Vec<f64> {
        self.mu.iter().flatten().chain(&self.beta).copied().collect()
    }

    pub fn set_state(&mut self, s: &[f64]) {
        let (b, p) = (self.mu.len(), self.beta.len());
        assert_eq!(s.len(), (b + 1) * p, "set_state: length mismatch");
        for i in 0..b {
            self.mu[i] = s[i * p..(i + 1) * p].to_vec();
        }
        self.beta = s[b * p..].to_vec();
        self.recompute_total();
    }

    fn recompute_total(&mut self) {
        self.total = vec![0.0; self.beta.len()];
        for m in &self.mu {
            vector::axpy(1.0, m, &mut self.total);
        }
    }

    /// `(I + ρD_i)μ_i = D_iβ − X_iᵀy_i − ρD_i Σ_{j≠i} μ_j`
    fn update_block(&mut self, i: usize) {
        let s = vector::sub(&self.total, &self.mu[i]);
        let mut rhs = self.d[i].matvec(&vector::sub(&self.beta, &vector::scale(self.rho, &s)));
        vector::axpy(-1.0, &self.c[i], &mut rhs);
        let m = self.chol[i].solve_vec(&rhs);
        self.total = vector::add(&s, &m);
        self.mu[i] = m;
    }
}

impl Iterate for DualSweep {
    fn step(&mut self) -> Result<()> {
        let b = self.mu.len();
        let order: Vec<usize> = match &self.mode {
            SweepMode::Cyclic(o) => o.clone(),
            SweepMode::RandomPermutation { .. } => {
                let mut o: Vec<usize> = (0..b).collect();
                o.shuffle(&mut self.rng);
                o
            }
            SweepMode::DoubleSweep => (0..b).chain((0..b).rev()).collect(),
        };
        for i in order {
            self.update_block(i);
        }
        self.recompute_total();
        vector::axpy(-self.rho, &self.total.clone(), &mut self.beta);
        Ok(())
    }

    fn beta(&self) -> &[f64] {
        &self.beta
    }
}
