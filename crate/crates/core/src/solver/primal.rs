//! Primal distributed ADMM: local solves, averaging, dual ascent.

use datashare_linalg::{vector, Cholesky, Matrix};
use rayon::prelude::*;

use super::{Iterate, Method, NewtonConfig, Problem, SolverConfig};
use crate::error::{CoreError, Result};
use crate::problem::{gram_rows, logistic_gradient, logistic_hessian, logistic_loss, xty_rows, Objective};
use crate::reference::damped_newton;
use crate::sharing::{allocate_pool_to_one_center, assemble_round, SharingPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimalVariant {
    /// Centers keep their own rows.
    Static,
    /// Pooled rows are reassembled across centers every iteration. The multipliers stay
    /// with the centers, so there is no exact fixed point and the iterates stall near it.
    Shared,
    /// The whole pool is handed to one center once, before the run.
    OneCenter,
}

pub struct PrimalDistributedMethod {
    variant: PrimalVariant,
}

impl PrimalDistributedMethod {
    pub fn new(variant: PrimalVariant) -> Self {
        PrimalDistributedMethod { variant }
    }
}

impl Method for PrimalDistributedMethod {
    fn name(&self) -> &'static str {
        match self.variant {
            PrimalVariant::Static => "primal-distributed",
            PrimalVariant::Shared => "primal-distributed-shared",
            PrimalVariant::OneCenter => "primal-distributed-one-center",
        }
    }

    fn description(&self) -> &'static str {
        match self.variant {
            PrimalVariant::Static => "primal distributed ADMM",
            PrimalVariant::Shared => "primal distributed ADMM on per-round reassembled centers",
            PrimalVariant::OneCenter => "primal distributed ADMM with the pool given to one center",
        }
    }

    fn supports(&self, objective: &Objective) -> bool {
        self.variant != PrimalVariant::Shared || objective.is_quadratic()
    }

    fn needs_plan(&self) -> bool {
        self.variant != PrimalVariant::Static
    }

    fn start<'a>(&self, problem: &Problem<'a>, cfg: &SolverConfig) -> Result<Box<dyn Iterate + 'a>> {
        let ds = problem.data;
        let alpha = problem.objective.alpha();
        let blocks = match self.variant {
            PrimalVariant::OneCenter => {
                let plan = problem.require_plan(self.name())?;
                allocate_pool_to_one_center(ds, plan, cfg.target_center)?.blocks
            }
            _ => ds.blocks.clone(),
        };
        match (self.variant, problem.objective) {
            (PrimalVariant::Shared, _) => {
                let plan = problem.require_plan(self.name())?;
                Ok(Box::new(PrimalLs::shared(&ds.x, &ds.y, plan, alpha, cfg.rho)?))
            }
            (_, Objective::Logistic { .. }) => {
                crate::problem::check_labels(&ds.y)?;
                Ok(Box::new(PrimalLogistic::new(&ds.x, &ds.y, blocks, alpha, cfg.rho, cfg.newton)))
            }
            _ => Ok(Box::new(PrimalLs::new(&ds.x, &ds.y, blocks, alpha, cfg.rho)?)),
        }
    }
}

/// Least squares / ridge. State is `(β, β_i, λ_i)`.
pub struct PrimalLs<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    plan: Option<&'a SharingPlan>,
    round: u64,
    rho: f64,
    ridge_share: f64,
    chol: Vec<Cholesky>,
    c: Vec<Vec<f64>>,
    beta: Vec<f64>,
    beta_i: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
}

impl<'a> PrimalLs<'a> {
    pub fn new(x: &'a Matrix, y: &'a [f64], blocks: Vec<Vec<usize>>, alpha: f64, rho: f64) -> Result<Self> {
        let b = blocks.len();
        let mut s = Self::empty(x, y, b, alpha, rho);
        s.factor(&blocks)?;
        Ok(s)
    }

    pub fn shared(x: &'a Matrix, y: &'a [f64], plan: &'a SharingPlan, alpha: f64, rho: f64) -> Result<Self> {
        plan.check_for_reassembly()?;
        let mut s = Self::empty(x, y, plan.b(), alpha, rho);
        s.plan = Some(plan);
        Ok(s)
    }

    fn empty(x: &'a Matrix, y: &'a [f64], b: usize, alpha: f64, rho: f64) -> Self {
        let p = x.cols();
        PrimalLs {
            x,
            y,
            plan: None,
            round: 0,
            rho,
            ridge_share: alpha / b as f64,
            chol: Vec::new(),
            c: Vec::new(),
            beta: vec![0.0; p],
            beta_i: vec![vec![0.0; p]; b],
            lambda: vec![vec![0.0; p]; b],
        }
    }

    fn factor(&mut self, blocks: &[Vec<usize>]) -> Result<()> {
        let shift = self.rho + self.ridge_share;
        let (x, y) = (self.x, self.y);
        let out: Result<Vec<(Cholesky, Vec<f64>)>> = blocks
            .par_iter()
            .map(|blk| {
                let mut a = gram_rows(x, blk);
                a.add_diag(shift);
                Ok((Cholesky::new(&a)?, xty_rows(x, y, blk)))
            })
            .collect();
        let (chol, c) = out?.into_iter().unzip();
        self.chol = chol;
        self.c = c;
        Ok(())
    }

    pub fn b(&self) -> usize {
        self.lambda.len()
    }

    /// `ξ_i = λ_i + ρβ`, stacked.
    pub fn xi(&self) -> Vec<f64> {
        self.lambda.iter().flat_map(|l| vector::add(l, &vector::scale(self.rho, &self.beta))).collect()
    }

    /// Inverse of [`xi`](Self::xi): `β = Σ ξ_i /(bρ)`, `λ_i = ξ_i − ρβ`.
    pub fn set_xi(&mut self, xi: &[f64]) {
        let (b, p) = (self.b(), self.beta.len());
        assert_eq!(xi.len(), b * p, "set_xi: length mismatch");
        let mut beta = vec![0.0; p];
        for i in 0..b {
            vector::axpy(1.0 / (b as f64 * self.rho), &xi[i * p..(i + 1) * p], &mut beta);
        }
        for i in 0..b {
            self.lambda[i] = vector::sub(&xi[i * p..(i + 1) * p], &vector::scale(self.rho, &beta));
        }
        self.beta = beta;
    }

    pub fn lambda_sum(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.beta.len()];
        for l in &self.lambda {
            vector::axpy(1.0, l, &mut s);
        }
        s
    }
}

impl Iterate for PrimalLs<'_> {
    fn step(&mut self) -> Result<()> {
        if let Some(plan) = self.plan {
            let asm = assemble_round(plan, self.round);
            self.factor(&asm.assembled)?;
        }
        self.round += 1;
        let (rho, b) = (self.rho, self.b());
        let beta = &self.beta;
        let lambda = &self.lambda;
        let c = &self.c;
        self.beta_i = self
            .chol
            .par_iter()
            .enumerate()
            .map(|(i, ch)| {
                let mut rhs = vector::scale(rho, beta);
                vector::axpy(-1.0, &lambda[i], &mut rhs);
                vector::axpy(1.0, &c[i], &mut rhs);
                ch.solve_vec(&rhs)
            })
            .collect();
        let mut nb = vec![0.0; self.beta.len()];
        for i in 0..b {
            vector::axpy(1.0 / b as f64, &self.beta_i[i], &mut nb);
            vector::axpy(1.0 / (b as f64 * rho), &self.lambda[i], &mut nb);
        }
        for i in 0..b {
            let d = vector::sub(&self.beta_i[i], &nb);
            vector::axpy(rho, &d, &mut self.lambda[i]);
        }
        self.beta = nb;
        Ok(())
    }

    fn beta(&self) -> &[f64] {
        &self.beta
    }
}

/// Logistic loss; each center solves its augmented subproblem with damped Newton.
pub struct PrimalLogistic<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    blocks: Vec<Vec<usize>>,
    rho: f64,
    ridge_share: f64,
    newton: NewtonConfig,
    beta: Vec<f64>,
    beta_i: Vec<Vec<f64>>,
    lambda: Vec<Vec<f64>>,
}

impl<'a> PrimalLogistic<'a> {
    pub fn new(
        x: &'a Matrix,
        y: &'a [f64],
        blocks: Vec<Vec<usize>>,
        alpha: f64,
        rho: f64,
        newton: NewtonConfig,
    ) -> Self {
        let (b, p) = (blocks.len(), x.cols());
        PrimalLogistic {
            x,
            y,
            rho,
            ridge_share: alpha / b as f64,
            newton,
            beta: vec![0.0; p],
            beta_i: vec![vec![0.0; p]; b],
            lambda: vec![vec![0.0; p]; b],
            blocks,
        }
    }
}

impl Iterate for PrimalLogistic<'_> {
    fn step(&mut self) -> Result<()> {
        let (x, y, rho, a) = (self.x, self.y, self.rho, self.ridge_share);
        let beta = &self.beta;
        let lambda = &self.lambda;
        let newton = &self.newton;
        let solved: Result<Vec<Vec<f64>>> = self
            .blocks
            .par_iter()
            .enumerate()
            .map(|(i, rows)| {
                let lam = &lambda[i];
                let f = |v: &[f64]| {
                    let d = vector::sub(v, beta);
                    logistic_loss(x, y, rows, a, v) + vector::dot(lam, v) + 0.5 * rho * vector::dot(&d, &d)
                };
                let g = |v: &[f64]| {
                    let mut g = logistic_gradient(x, y, rows, a, v);
                    vector::axpy(1.0, lam, &mut g);
                    vector::axpy(rho, &vector::sub(v, beta), &mut g);
                    g
                };
                let h = |v: &[f64]| logistic_hessian(x, y, rows, a + rho, v);
                damped_newton(self.beta_i[i].clone(), newton, f, g, h)
                    .map_err(|(_, grad_norm)| CoreError::InnerNoConvergence { center: i, grad_norm })
            })
            .collect();
        self.beta_i = solved?;
        let b = self.blocks.len();
        let mut nb = vec![0.0; self.beta.len()];
        for i in 0..b {
            vector::axpy(1.0 / b as f64, &self.beta_i[i], &mut nb);
            vector::axpy(1.0 / (b as f64 * rho), &self.lambda[i], &mut nb);
        }
        for i in 0..b {
            let d = vector::sub(&self.beta_i[i], &nb);
            vector::axpy(rho, &d, &mut self.lambda[i]);
        }
        self.beta = nb;
        Ok(())
    }

    fn beta(&self) -> &[f64] {
        &self.beta
    }
}
