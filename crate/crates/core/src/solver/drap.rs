//! Dual sweeps over centers reassembled from the shared pool every round.
//!
//! The dual vector `t` is indexed by global row, so each observation's dual value
//! travels with its row when the row changes center. The ridge term is carried by
//! `p` virtual rows `√(α/b)·I` per center that never enter the pool.

use datashare_linalg::{vector, Cholesky, Matrix};
use rayon::prelude::*;

use super::{Iterate, Method, Problem, SolverConfig};
use crate::error::{CoreError, Result};
use crate::problem::{check_labels, gram_rows, sigmoid, xty_rows, Objective};
use crate::sharing::{assemble_round, RoundAssembly, SharingPlan};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepPattern {
    /// Order drawn with each round's assembly.
    Permuted,
    /// The same order every round.
    Fixed(Vec<usize>),
    /// Ascending then descending, every round.
    DoubleSweep,
}

impl SweepPattern {
    fn order(&self, asm: &RoundAssembly) -> Vec<usize> {
        let b = asm.assembled.len();
        match self {
            SweepPattern::Permuted => asm.xi.clone(),
            SweepPattern::Fixed(o) => o.clone(),
            SweepPattern::DoubleSweep => (0..b).chain((0..b).rev()).collect(),
        }
    }
}

pub struct DrapMethod;

impl Method for DrapMethod {
    fn name(&self) -> &'static str {
        "drap"
    }

    fn description(&self) -> &'static str {
        "dual ADMM on randomly assembled centers with a permuted sweep order"
    }

    fn supports(&self, _objective: &Objective) -> bool {
        true
    }

    fn needs_plan(&self) -> bool {
        true
    }

    fn start<'a>(&self, problem: &Problem<'a>, cfg: &SolverConfig) -> Result<Box<dyn Iterate + 'a>> {
        let plan = problem.require_plan(self.name())?;
        let ds = problem.data;
        let alpha = problem.objective.alpha();
        match problem.objective {
            Objective::Logistic { .. } => {
                check_labels(&ds.y)?;
                Ok(Box::new(DrapLogistic::new(&ds.x, &ds.y, plan, alpha, cfg.rho, SweepPattern::Permuted)?))
            }
            _ => Ok(Box::new(TspaceLs::new(&ds.x, &ds.y, plan, alpha, cfg.rho, SweepPattern::Permuted)?)),
        }
    }
}

/// Cyclic or double sweep on reassembled centers, without order permutation.
pub struct SharedSweepMethod {
    double: bool,
}

impl SharedSweepMethod {
    pub fn cyclic() -> Self {
        SharedSweepMethod { double: false }
    }

    pub fn double_sweep() -> Self {
        SharedSweepMethod { double: true }
    }
}

impl Method for SharedSweepMethod {
    fn name(&self) -> &'static str {
        if self.double {
            "double-sweep-shared"
        } else {
            "dual-cyclic-shared"
        }
    }

    fn description(&self) -> &'static str {
        if self.double {
            "double-sweep dual ADMM on per-round reassembled centers"
        } else {
            "cyclic dual ADMM on per-round reassembled centers"
        }
    }

    fn supports(&self, objective: &Objective) -> bool {
        objective.is_quadratic()
    }

    fn needs_plan(&self) -> bool {
        true
    }

    fn start<'a>(&self, problem: &Problem<'a>, cfg: &SolverConfig) -> Result<Box<dyn Iterate + 'a>> {
        let plan = problem.require_plan(self.name())?;
        let pattern = if self.double {
            SweepPattern::DoubleSweep
        } else {
            SweepPattern::Fixed(cfg.order.clone().unwrap_or_else(|| (0..plan.b()).collect()))
        };
        let ds = problem.data;
        Ok(Box::new(TspaceLs::new(&ds.x, &ds.y, plan, problem.objective.alpha(), cfg.rho, pattern)?))
    }
}

fn check_pattern(pattern: &SweepPattern, b: usize) -> Result<()> {
    if let SweepPattern::Fixed(o) = pattern {
        let mut s = o.clone();
        s.sort_unstable();
        if s != (0..b).collect::<Vec<_>>() {
            return Err(CoreError::InvalidConfig(format!("order {o:?} is not a permutation of 0..{b}")));
        }
    }
    Ok(())
}

/// Pooled rows a center received this round.
fn received<'p>(plan: &SharingPlan, asm: &'p RoundAssembly, k: usize) -> &'p [usize] {
    &asm.assembled[k][plan.local[k].len()..]
}

fn x_dot(x: &Matrix, rows: &[usize], vals: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.cols()];
    for &r in rows {
        vector::axpy(vals[r], x.row(r), &mut out);
    }
    out
}

/// Least squares / ridge solved through the dual `min ½‖t‖² + yᵀt  s.t.  Xᵀt = 0`.
pub struct TspaceLs<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    plan: &'a SharingPlan,
    pattern: SweepPattern,
    rho: f64,
    c: f64,
    local_gram: Vec<Matrix>,
    local_xty: Vec<Vec<f64>>,
    t: Vec<f64>,
    tv: Vec<Vec<f64>>,
    g: Vec<f64>,
    beta: Vec<f64>,
    round: u64,
}

impl<'a> TspaceLs<'a> {
    pub fn new(
        x: &'a Matrix,
        y: &'a [f64],
        plan: &'a SharingPlan,
        alpha: f64,
        rho: f64,
        pattern: SweepPattern,
    ) -> Result<Self> {
        plan.check_for_reassembly()?;
        let b = plan.b();
        check_pattern(&pattern, b)?;
        let p = x.cols();
        let (local_gram, local_xty) = plan.local.par_iter().map(|l| (gram_rows(x, l), xty_rows(x, y, l))).unzip();
        Ok(TspaceLs {
            x,
            y,
            plan,
            pattern,
            rho,
            c: (alpha / b as f64).sqrt(),
            local_gram,
            local_xty,
            t: vec![0.0; x.rows()],
            tv: vec![vec![0.0; p]; b],
            g: vec![0.0; p],
            beta: vec![0.0; p],
            round: 0,
        })
    }

    /// Dual values of the real rows, by global row id.
    pub fn t(&self) -> &[f64] {
        &self.t
    }

    /// Running `Xᵀt` including the virtual ridge rows.
    pub fn g(&self) -> &[f64] {
        &self.g
    }

    /// `Xᵀt` recomputed from scratch.
    pub fn recomputed_g(&self) -> Vec<f64> {
        let mut g = self.x.tmatvec(&self.t);
        for tv in &self.tv {
            vector::axpy(self.c, tv, &mut g);
        }
        g
    }
}

impl Iterate for TspaceLs<'_> {
    fn step(&mut self) -> Result<()> {
        let asm = assemble_round(self.plan, self.round);
        self.round += 1;
        let (x, y, plan, rho, c2) = (self.x, self.y, self.plan, self.rho, self.c * self.c);
        let b = plan.b();
        let prepared: Result<Vec<(Matrix, Vec<f64>, Cholesky)>> = (0..b)
            .into_par_iter()
            .map(|k| {
                let got = received(plan, &asm, k);
                let mut d = self.local_gram[k].add(&gram_rows(x, got));
                d.add_diag(c2);
                let xty = vector::add(&self.local_xty[k], &xty_rows(x, y, got));
                let mut a = d.scaled(rho);
                a.add_diag(1.0);
                let ch = Cholesky::new(&a)?;
                Ok((d, xty, ch))
            })
            .collect();
        let prepared = prepared?;
        self.g = self.recomputed_g();
        for k in self.pattern.order(&asm) {
            let rows = &asm.assembled[k];
            let (d, xty, ch) = &prepared[k];
            let mut mu_b = x_dot(x, rows, &self.t);
            vector::axpy(self.c, &self.tv[k], &mut mu_b);
            let s = vector::sub(&self.g, &mu_b);
            let mut rhs = d.matvec(&vector::sub(&self.beta, &vector::scale(rho, &s)));
            vector::axpy(-1.0, xty, &mut rhs);
            let mu = ch.solve_vec(&rhs);
            let gnew = vector::add(&s, &mu);
            let w = vector::sub(&self.beta, &vector::scale(rho, &gnew));
            for &r in rows {
                self.t[r] = vector::dot(x.row(r), &w) - y[r];
            }
            self.tv[k] = vector::scale(self.c, &w);
            self.g = gnew;
        }
        vector::axpy(-rho, &self.g.clone(), &mut self.beta);
        Ok(())
    }

    fn beta(&self) -> &[f64] {
        &self.beta
    }
}

/// Root of `log(t/(1−t)) + ρt = a` on `(0, 1)`.
///
/// Solved in logit coordinates, `u + ρσ(u) = a` with `t = σ(u)`, whose root always lies in
/// `[a − ρ, a]`; Newton steps that leave the current bracket fall back to bisection.
pub fn entropy_t_solve(a: f64, rho: f64) -> Result<f64> {
    if !a.is_finite() || !(rho >= 0.0) {
        return Err(CoreError::LineSearchFailure(a));
    }
    let g = |u: f64| u + rho * sigmoid(u) - a;
    let (mut lo, mut hi) = (a - rho, a);
    let mut u = a - 0.5 * rho;
    for _ in 0..200 {
        let f = g(u);
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let s = sigmoid(u);
        let mut next = u - f / (1.0 + rho * s * (1.0 - s));
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let done = (next - u).abs() <= 1e-12 * u.abs().max(1.0);
        u = next;
        if done || hi - lo <= 1e-15 * u.abs().max(1.0) {
            return Ok(sigmoid(u));
        }
    }
    if g(u).abs() <= 1e-9 * a.abs().max(1.0) {
        Ok(sigmoid(u))
    } else {
        Err(CoreError::LineSearchFailure(a))
    }
}

/// Logistic regression through its entropy dual, split as `t = z` with `𝒳ᵀz + Rw = 0`.
///
/// `𝒳` has rows `y_r x_r`; `w` are the per-center ridge duals. At the fixed point
/// `t = σ(−𝒳β)` and `β` minimizes the regularized logistic loss.
pub struct DrapLogistic<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    plan: &'a SharingPlan,
    pattern: SweepPattern,
    rho: f64,
    c: f64,
    local_gram: Vec<Matrix>,
    t: Vec<f64>,
    z: Vec<f64>,
    xi: Vec<f64>,
    w: Vec<Vec<f64>>,
    g: Vec<f64>,
    beta: Vec<f64>,
    round: u64,
}

impl<'a> DrapLogistic<'a> {
    pub fn new(
        x: &'a Matrix,
        y: &'a [f64],
        plan: &'a SharingPlan,
        alpha: f64,
        rho: f64,
        pattern: SweepPattern,
    ) -> Result<Self> {
        plan.check_for_reassembly()?;
        let b = plan.b();
        check_pattern(&pattern, b)?;
        let (n, p) = (x.rows(), x.cols());
        Ok(DrapLogistic {
            x,
            y,
            plan,
            pattern,
            rho,
            c: (alpha / b as f64).sqrt(),
            local_gram: plan.local.par_iter().map(|l| gram_rows(x, l)).collect(),
            t: vec![0.5; n],
            z: vec![0.5; n],
            xi: vec![0.0; n],
            w: vec![vec![0.0; p]; b],
            g: vec![0.0; p],
            beta: vec![0.0; p],
            round: 0,
        })
    }

    /// `Σ_rows y_r x_r v_r`
    fn signed_dot(&self, rows: &[usize], v: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.x.cols()];
        for &r in rows {
            vector::axpy(self.y[r] * v(r), self.x.row(r), &mut out);
        }
        out
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }
}

impl Iterate for DrapLogistic<'_> {
    fn step(&mut self) -> Result<()> {
        let rho = self.rho;
        let (xi, z) = (&self.xi, &self.z);
        let t: Result<Vec<f64>> = (0..self.t.len())
            .into_par_iter()
            .map(|r| entropy_t_solve(xi[r] + rho * z[r], rho))
            .collect();
        self.t = t?;

        let asm = assemble_round(self.plan, self.round);
        self.round += 1;
        let (x, plan, c, c2) = (self.x, self.plan, self.c, self.c * self.c);
        let b = plan.b();
        let prepared: Result<Vec<(Matrix, Cholesky)>> = (0..b)
            .into_par_iter()
            .map(|k| {
                let d = self.local_gram[k].add(&gram_rows(x, received(plan, &asm, k)));
                let mut a = d.clone();
                a.add_diag(1.0 + rho * c2);
                Ok((d, Cholesky::new(&a)?))
            })
            .collect();
        let prepared = prepared?;

        let all: Vec<usize> = (0..self.z.len()).collect();
        let mut g = self.signed_dot(&all, |r| self.z[r]);
        for w in &self.w {
            vector::axpy(c, w, &mut g);
        }
        for k in self.pattern.order(&asm) {
            let rows = &asm.assembled[k];
            let (d, ch) = &prepared[k];
            let mut mu_old = self.signed_dot(rows, |r| self.z[r]);
            vector::axpy(c, &self.w[k], &mut mu_old);
            let s = vector::sub(&g, &mu_old);
            let h = self.signed_dot(rows, |r| self.t[r] - self.xi[r] / rho);
            let mut rhs = h;
            let db = d.matvec(&self.beta);
            vector::axpy(-1.0 / rho, &db, &mut rhs);
            vector::axpy(-c2, &self.beta, &mut rhs);
            let ds = d.matvec(&s);
            vector::axpy(-1.0, &ds, &mut rhs);
            vector::axpy(-rho * c2, &s, &mut rhs);
            let mu = ch.solve_vec(&rhs);
            let gnew = vector::add(&s, &mu);
            let mut u = vector::scale(1.0 / rho, &self.beta);
            vector::axpy(1.0, &gnew, &mut u);
            for &r in rows {
                self.z[r] = self.t[r] - self.xi[r] / rho - self.y[r] * vector::dot(x.row(r), &u);
            }
            self.w[k] = vector::scale(-c, &vector::add(&self.beta, &vector::scale(rho, &gnew)));
            g = gnew;
        }
        vector::axpy(rho, &g, &mut self.beta);
        for r in 0..self.xi.len() {
            self.xi[r] -= rho * (self.t[r] - self.z[r]);
        }
        self.g = g;
        Ok(())
    }

    fn beta(&self) -> &[f64] {
        &self.beta
    }
}
