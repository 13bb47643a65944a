//! Explicit iteration matrices of the linear solvers and the closed-form rate bounds.

use datashare_linalg::{Cholesky, Lu, Matrix};
use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::problem::BlockGrams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    Mp,
    Mgd,
    Md,
    Mc,
    RpExpected,
    DoubleSweep,
}

#[derive(Debug, Clone)]
pub struct IterationMap {
    pub kind: MapKind,
    pub matrix: Matrix,
    pub rho: f64,
    pub b: usize,
    pub p: usize,
}

impl IterationMap {
    pub fn spectral_radius(&self) -> Result<f64> {
        Ok(datashare_linalg::spectral_radius(&self.matrix)?)
    }

    pub fn spectrum(&self) -> Result<datashare_linalg::Spectrum> {
        Ok(datashare_linalg::eigenvalues_general(&self.matrix, datashare_linalg::DEFAULT_DEFLATION_TOL)?)
    }
}

/// `blockdiag(D_1, …, D_b)`
pub fn block_diag_d(grams: &BlockGrams) -> Matrix {
    Matrix::block_diag(&grams.d)
}

/// `P = (1/b) 1 1ᵀ ⊗ I_p`
pub fn averaging_p(b: usize, p: usize) -> Matrix {
    let inv = 1.0 / b as f64;
    Matrix::from_fn(b * p, b * p, |i, j| if i % p == j % p { inv } else { 0.0 })
}

/// `E = [I_p; …; I_p]`, `bp × p`.
pub fn stacking_e(b: usize, p: usize) -> Matrix {
    Matrix::from_fn(b * p, p, |i, j| if i % p == j { 1.0 } else { 0.0 })
}

/// `Φ = (I + D/ρ)⁻¹`, block diagonal.
pub fn phi(grams: &BlockGrams, rho: f64) -> Result<Matrix> {
    let blocks = grams
        .d
        .iter()
        .map(|di| {
            let mut a = di.scaled(1.0 / rho);
            a.add_diag(1.0);
            Ok(Cholesky::new(&a)?.inverse())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Matrix::block_diag(&blocks))
}

/// Lower block-triangular `L` with `L_ij = D_i` whenever `j` is updated no later than `i`.
pub fn lower_l(grams: &BlockGrams, order: &[usize]) -> Matrix {
    let (b, p) = (grams.b(), grams.p());
    let mut pos = vec![0; b];
    for (k, &c) in order.iter().enumerate() {
        pos[c] = k;
    }
    let mut l = Matrix::zeros(b * p, b * p);
    for i in 0..b {
        for j in 0..b {
            if pos[j] <= pos[i] {
                l.set_block(i * p, j * p, &grams.d[i]);
            }
        }
    }
    l
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(CoreError::OutOfRange(format!("step size must be positive, got {rho}")));
    }
    Ok(())
}

fn check_order(order: &[usize], b: usize) -> Result<()> {
    let mut seen = vec![false; b];
    if order.len() != b {
        return Err(CoreError::OutOfRange(format!("order has {} entries for {b} centers", order.len())));
    }
    for &c in order {
        if c >= b || seen[c] {
            return Err(CoreError::OutOfRange(format!("order {order:?} is not a permutation")));
        }
        seen[c] = true;
    }
    Ok(())
}

/// Primal distributed map `M_p = (I − P − Φ)(I − 2P)` on `ξ_i = λ_i + ρβ`.
pub fn build_mp(grams: &BlockGrams, rho_p: f64) -> Result<IterationMap> {
    check_rho(rho_p)?;
    let (b, p) = (grams.b(), grams.p());
    let n = b * p;
    let pm = averaging_p(b, p);
    let mut left = Matrix::identity(n).sub(&pm);
    left = left.sub(&phi(grams, rho_p)?);
    let mut right = Matrix::identity(n);
    right.add_scaled(-2.0, &pm);
    Ok(IterationMap { kind: MapKind::Mp, matrix: left.matmul(&right), rho: rho_p, b, p })
}

/// Gradient descent map `I − ρ XᵀX`.
pub fn build_mgd(global_gram: &Matrix, rho: f64) -> IterationMap {
    let p = global_gram.rows();
    let m = Matrix::identity(p).sub(&global_gram.scaled(rho));
    IterationMap { kind: MapKind::Mgd, matrix: m, rho, b: 1, p }
}

/// Dual distributed map `(D + I/ρ)⁻¹ D (I − 2P) + P` on `η = ρμ − β`.
pub fn build_md(grams: &BlockGrams, rho_d: f64) -> Result<IterationMap> {
    check_rho(rho_d)?;
    let (b, p) = (grams.b(), grams.p());
    let n = b * p;
    let pm = averaging_p(b, p);
    let blocks = grams
        .d
        .iter()
        .map(|di| {
            let mut a = di.clone();
            a.add_diag(1.0 / rho_d);
            Ok(Lu::new(&a)?.solve(di))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut right = Matrix::identity(n);
    right.add_scaled(-2.0, &pm);
    let mut m = Matrix::block_diag(&blocks).matmul(&right);
    m.add_assign(&pm);
    Ok(IterationMap { kind: MapKind::Md, matrix: m, rho: rho_d, b, p })
}

/// `(I + ρL)⁻¹`
fn inv_i_rho_l(l: &Matrix, rho: f64) -> Result<Matrix> {
    let mut a = l.scaled(rho);
    a.add_diag(1.0);
    Ok(Lu::new(&a)?.inverse())
}

/// Reduced cyclic map `M′_c = [[ρ(L − 2bDP)(I+ρL)⁻¹, DE], [−ρEᵀ(I+ρL)⁻¹, I]]`.
pub fn build_mc(grams: &BlockGrams, rho_d: f64, order: &[usize]) -> Result<IterationMap> {
    check_rho(rho_d)?;
    let (b, p) = (grams.b(), grams.p());
    check_order(order, b)?;
    let n = b * p;
    let l = lower_l(grams, order);
    let d = block_diag_d(grams);
    let pm = averaging_p(b, p);
    let e = stacking_e(b, p);
    let inv = inv_i_rho_l(&l, rho_d)?;
    let mut top = l.clone();
    top.add_scaled(-2.0 * b as f64, &d.matmul(&pm));
    let top_left = top.matmul(&inv).scaled(rho_d);
    let mut m = Matrix::zeros(n + p, n + p);
    m.set_block(0, 0, &top_left);
    m.set_block(0, n, &d.matmul(&e));
    m.set_block(n, 0, &e.transpose().matmul(&inv).scaled(-rho_d));
    m.set_block(n, n, &Matrix::identity(p));
    Ok(IterationMap { kind: MapKind::Mc, matrix: m, rho: rho_d, b, p })
}

/// Same map with the top-left block written as `I − (I + 2ρbDP)(I+ρL)⁻¹`.
pub fn build_mc_alternate(grams: &BlockGrams, rho_d: f64, order: &[usize]) -> Result<IterationMap> {
    let mut map = build_mc(grams, rho_d, order)?;
    let (b, p) = (grams.b(), grams.p());
    let n = b * p;
    let l = lower_l(grams, order);
    let inv = inv_i_rho_l(&l, rho_d)?;
    let mut k = block_diag_d(grams).matmul(&averaging_p(b, p)).scaled(2.0 * rho_d * b as f64);
    k.add_diag(1.0);
    let top_left = Matrix::identity(n).sub(&k.matmul(&inv));
    map.matrix.set_block(0, 0, &top_left);
    Ok(map)
}

/// One cyclic sweep on the full state `(μ, β)`: `A⁻¹B` with
/// `A = [[I + ρL, 0], [ρEᵀ, I]]`, `B = [[ρ(L − bDP), DE], [0, I]]`.
pub fn build_mc_transition(grams: &BlockGrams, rho_d: f64, order: &[usize]) -> Result<Matrix> {
    check_rho(rho_d)?;
    let (b, p) = (grams.b(), grams.p());
    check_order(order, b)?;
    Ok(beta_update(b, p, rho_d).matmul(&half_sweep(grams, rho_d, order)?))
}

/// Gauss–Seidel pass over the blocks in `order` with `β` held fixed, on `(μ, β)`.
fn half_sweep(grams: &BlockGrams, rho: f64, order: &[usize]) -> Result<Matrix> {
    let (b, p) = (grams.b(), grams.p());
    let n = b * p;
    let l = lower_l(grams, order);
    let d = block_diag_d(grams);
    let inv = inv_i_rho_l(&l, rho)?;
    let mut lb = l.clone();
    lb.add_scaled(-(b as f64), &d.matmul(&averaging_p(b, p)));
    let mut h = Matrix::zeros(n + p, n + p);
    h.set_block(0, 0, &inv.matmul(&lb).scaled(rho));
    h.set_block(0, n, &inv.matmul(&d.matmul(&stacking_e(b, p))));
    h.set_block(n, n, &Matrix::identity(p));
    Ok(h)
}

/// `β ← β − ρ Σ μ_i` on `(μ, β)`.
fn beta_update(b: usize, p: usize, rho: f64) -> Matrix {
    let n = b * p;
    let mut u = Matrix::identity(n + p);
    u.set_block(n, 0, &stacking_e(b, p).transpose().scaled(-rho));
    u
}

/// Forward sweep, backward sweep, then the `β` update, on `(μ, β)`.
pub fn build_double_sweep(grams: &BlockGrams, rho_d: f64) -> Result<IterationMap> {
    check_rho(rho_d)?;
    let (b, p) = (grams.b(), grams.p());
    let fwd: Vec<usize> = (0..b).collect();
    let bwd: Vec<usize> = (0..b).rev().collect();
    let m = beta_update(b, p, rho_d)
        .matmul(&half_sweep(grams, rho_d, &bwd)?)
        .matmul(&half_sweep(grams, rho_d, &fwd)?);
    Ok(IterationMap { kind: MapKind::DoubleSweep, matrix: m, rho: rho_d, b, p })
}

pub const MAX_ENUMERATED_BLOCKS: usize = 6;

/// Mean of `M′_c` over every update order.
pub fn rp_expected_map(grams: &BlockGrams, rho_d: f64) -> Result<IterationMap> {
    let (b, p) = (grams.b(), grams.p());
    if b > MAX_ENUMERATED_BLOCKS {
        return Err(CoreError::BlockCountTooLarge(b));
    }
    let mut sum = Matrix::zeros((b + 1) * p, (b + 1) * p);
    let mut count = 0usize;
    for order in (0..b).permutations(b) {
        sum.add_assign(&build_mc(grams, rho_d, &order)?.matrix);
        count += 1;
    }
    Ok(IterationMap { kind: MapKind::RpExpected, matrix: sum.scaled(1.0 / count as f64), rho: rho_d, b, p })
}

/// Large-step bound `bρ/(bρ + q̲)`.
pub fn bound_large_step(b: usize, rho_p: f64, qmin: f64) -> f64 {
    let br = b as f64 * rho_p;
    br / (br + qmin)
}

/// Two-center small-step bound `q̄/(2ρ + q̄)`.
pub fn bound_small_step_b2(rho_p: f64, qbar: f64) -> f64 {
    qbar / (2.0 * rho_p + qbar)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallStepBounds {
    /// `q̄/(ρ + q̄)`
    pub loose: f64,
    /// Rate of the two-dominant-block structure, `(q̄ − (b−2)ρ)/(2ρ + q̄ − (b−2)ρ)`.
    pub constructed: f64,
    /// Rate with equal blocks, `q̄/(bρ + q̄)`.
    pub equal_block: f64,
}

pub fn bounds_small_step_general(b: usize, rho_p: f64, qbar: f64) -> SmallStepBounds {
    let a = qbar - (b as f64 - 2.0) * rho_p;
    SmallStepBounds {
        loose: qbar / (rho_p + qbar),
        constructed: a / (2.0 * rho_p + a),
        equal_block: qbar / (b as f64 * rho_p + qbar),
    }
}

/// Step-size thresholds `(s₁, s₂)` outside of which the primal map beats gradient descent.
pub fn gd_crossover(b: usize, qbar: f64, qmin: f64, q1: f64) -> (f64, f64) {
    let bf = b as f64;
    let s1 = (1.0 / qmin - qbar).min(q1);
    let pq = qbar * qmin;
    let s2 = (2.0 * bf - pq + (4.0 * bf * bf + pq * pq).sqrt()) / (2.0 * bf * qbar);
    (s1, s2)
}

/// `f(x) = x/(1−x) · (1 − ((2x−1)/x²)^{1/b})`, decreasing on `(1/2, 1)`.
pub fn cyclic_rate_fn(b: usize, x: f64) -> f64 {
    x / (1.0 - x) * (1.0 - ((2.0 * x - 1.0) / (x * x)).powf(1.0 / b as f64))
}

/// Spectral radius of the cyclic map for equal blocks at unit step.
///
/// Solves `f(x) = q̲/b` by bisection, where `q̲/b` is the smallest eigenvalue of each
/// block Gram.
pub fn cyclic_rate_root(b: usize, qmin: f64) -> Result<f64> {
    if !(2..=4).contains(&b) {
        return Err(CoreError::OutOfRange(format!("closed form needs b in 2..=4, got {b}")));
    }
    if !(qmin > 0.0 && qmin < 1.0) {
        return Err(CoreError::OutOfRange(format!("qmin must lie in (0, 1), got {qmin}")));
    }
    let target = qmin / b as f64;
    let (mut lo, mut hi) = (0.5 + 1e-9, 1.0 - 1e-9);
    let g = |x: f64| cyclic_rate_fn(b, x) - target;
    if g(lo) < 0.0 || g(hi) > 0.0 {
        return Err(CoreError::OutOfRange(format!("no root in the bracket for qmin = {qmin}")));
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    LargeStep,
    SmallStepTwoCenters,
    SmallStepLoose,
    Constructed,
    EqualBlock,
    GradientDescent,
    CyclicRoot,
    DistributedRate,
    DualEquivalence,
    ConditionNumber,
}

/// Measured radius against a bound; `slack = bound − measured`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub measured_radius: f64,
    pub bound: f64,
    pub bound_kind: BoundKind,
    pub slack: f64,
}

impl RateReport {
    pub fn new(measured_radius: f64, bound: f64, bound_kind: BoundKind) -> Self {
        RateReport { measured_radius, bound, bound_kind, slack: bound - measured_radius }
    }
}
