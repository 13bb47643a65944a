//! Datasets split across centers, their block Grams, objectives and loss metrics.

use datashare_linalg::{symmetric_eigenvalues, vector, Matrix};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Global `(X, y)` with the rows owned by each center.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedDataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    /// Global row indices per center, 0-based, in local order.
    pub blocks: Vec<Vec<usize>>,
    /// Coefficients the data were generated from, when known.
    pub truth: Option<Vec<f64>>,
}

impl PartitionedDataset {
    pub fn new(x: Matrix, y: Vec<f64>, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let ds = PartitionedDataset { x, y, blocks, truth: None };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_truth(mut self, beta: Vec<f64>) -> Self {
        self.truth = Some(beta);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.x.rows();
        if self.y.len() != n {
            return Err(CoreError::LengthMismatch(n, self.y.len()));
        }
        if self.blocks.len() < 2 || n < self.blocks.len() {
            return Err(CoreError::TooFewRows { n, b: self.blocks.len() });
        }
        let mut seen = vec![false; n];
        for (i, blk) in self.blocks.iter().enumerate() {
            if blk.is_empty() {
                return Err(CoreError::EmptyResidualBlock(i));
            }
            for &r in blk {
                if r >= n || seen[r] {
                    return Err(CoreError::InvalidConfig(format!(
                        "row {r} is out of range or owned twice"
                    )));
                }
                seen[r] = true;
            }
        }
        if let Some(r) = seen.iter().position(|s| !s) {
            return Err(CoreError::InvalidConfig(format!("row {r} is not owned by any center")));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn b(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn block_x(&self, i: usize) -> Matrix {
        self.x.select_rows(&self.blocks[i])
    }

    pub fn block_y(&self, i: usize) -> Vec<f64> {
        self.blocks[i].iter().map(|&r| self.y[r]).collect()
    }

    /// `X_iᵀ y_i`
    pub fn block_xty(&self, i: usize) -> Vec<f64> {
        xty_rows(&self.x, &self.y, &self.blocks[i])
    }

    pub fn xty(&self) -> Vec<f64> {
        self.x.tmatvec(&self.y)
    }

    /// Same rows, different ownership.
    pub fn repartition(&self, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let ds = PartitionedDataset { x: self.x.clone(), y: self.y.clone(), blocks, truth: self.truth.clone() };
        ds.validate()?;
        Ok(ds)
    }

    /// Divides `X` by its Frobenius norm, leaving `y` untouched.
    pub fn frobenius_normalized(&self) -> Result<Self> {
        let x = datashare_linalg::frobenius_normalize(&self.x)?;
        Ok(PartitionedDataset { x, ..self.clone() })
    }
}

/// `Σ_{r ∈ rows} x_r y_r`
pub fn xty_rows(x: &Matrix, y: &[f64], rows: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; x.cols()];
    for &r in rows {
        vector::axpy(y[r], x.row(r), &mut out);
    }
    out
}

/// `Σ_{r ∈ rows} x_r x_rᵀ`
pub fn gram_rows(x: &Matrix, rows: &[usize]) -> Matrix {
    let p = x.cols();
    let mut g = Matrix::zeros(p, p);
    for &r in rows {
        let row = x.row(r);
        for a in 0..p {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            for bb in a..p {
                g[(a, bb)] += ra * row[bb];
            }
        }
    }
    for a in 0..p {
        for bb in 0..a {
            g[(a, bb)] = g[(bb, a)];
        }
    }
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionStrategy {
    Contiguous,
    RoundRobin,
    SeededShuffle { seed: u64 },
}

pub fn partition_rows(
    x: Matrix,
    y: Vec<f64>,
    b: usize,
    strategy: PartitionStrategy,
) -> Result<PartitionedDataset> {
    let n = x.rows();
    if b < 2 || n < b {
        return Err(CoreError::TooFewRows { n, b });
    }
    let blocks = match strategy {
        PartitionStrategy::Contiguous => contiguous_blocks(n, b),
        PartitionStrategy::RoundRobin => {
            (0..b).map(|i| (i..n).step_by(b).collect()).collect()
        }
        PartitionStrategy::SeededShuffle { seed } => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            contiguous_blocks(n, b)
                .into_iter()
                .map(|blk| blk.into_iter().map(|k| perm[k]).collect())
                .collect()
        }
    };
    PartitionedDataset::new(x, y, blocks)
}

/// Consecutive chunks whose sizes differ by at most one, larger chunks first.
pub fn contiguous_blocks(n: usize, b: usize) -> Vec<Vec<usize>> {
    let (q, r) = (n / b, n % b);
    let mut start = 0;
    (0..b)
        .map(|i| {
            let len = q + usize::from(i < r);
            let blk = (start..start + len).collect();
            start += len;
            blk
        })
        .collect()
}

/// Per-center Grams `D_i = X_iᵀX_i` with the extreme eigenvalues used by the rate theory.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrams {
    pub d: Vec<Matrix>,
    /// Largest eigenvalue of `Σ D_i`.
    pub qbar: f64,
    /// Smallest eigenvalue of `Σ D_i`.
    pub qmin: f64,
    /// Smallest eigenvalue over all `D_i`.
    pub q1: f64,
    /// Largest eigenvalue over all `D_i`.
    pub q2: f64,
}

/// Blocks whose smallest eigenvalue is at or below this count as singular.
pub const SINGULAR_BLOCK_TOL: f64 = 1e-12;

impl BlockGrams {
    pub fn from_blocks(d: Vec<Matrix>) -> Result<Self> {
        assert!(!d.is_empty(), "BlockGrams: no blocks");
        let p = d[0].rows();
        let mut total = Matrix::zeros(p, p);
        let (mut q1, mut q2) = (f64::INFINITY, f64::NEG_INFINITY);
        for di in &d {
            total.add_assign(di);
            let ev = symmetric_eigenvalues(di)?;
            q1 = q1.min(ev[0]);
            q2 = q2.max(ev[p - 1]);
        }
        let ev = symmetric_eigenvalues(&total)?;
        Ok(BlockGrams { qbar: ev[p - 1], qmin: ev[0], q1, q2, d })
    }

    pub fn b(&self) -> usize {
        self.d.len()
    }

    pub fn p(&self) -> usize {
        self.d[0].rows()
    }

    pub fn total(&self) -> Matrix {
        let mut t = Matrix::zeros(self.p(), self.p());
        for di in &self.d {
            t.add_assign(di);
        }
        t
    }

    /// Grams of the ridge-augmented blocks, `D_i + (α/b) I`.
    pub fn with_ridge(&self, alpha: f64) -> Result<Self> {
        if alpha == 0.0 {
            return Ok(self.clone());
        }
        let s = alpha / self.b() as f64;
        let d = self
            .d
            .iter()
            .map(|di| {
                let mut m = di.clone();
                m.add_diag(s);
                m
            })
            .collect();
        Self::from_blocks(d)
    }

    /// Errors unless every block is strictly positive definite.
    pub fn require_nonsingular(&self) -> Result<()> {
        for (i, di) in self.d.iter().enumerate() {
            let lmin = symmetric_eigenvalues(di)?[0];
            if lmin <= SINGULAR_BLOCK_TOL {
                return Err(CoreError::SingularBlock { center: i, lambda_min: lmin });
            }
        }
        Ok(())
    }
}

/// Computes `D_i`; with `theorem_mode` every block must be nonsingular.
pub fn block_grams(ds: &PartitionedDataset, theorem_mode: bool) -> Result<BlockGrams> {
    let d = ds.blocks.iter().map(|blk| gram_rows(&ds.x, blk)).collect();
    let g = BlockGrams::from_blocks(d)?;
    if theorem_mode {
        g.require_nonsingular()?;
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    LeastSquares,
    Ridge { alpha: f64 },
    Logistic { alpha: f64 },
}

impl Objective {
    /// Weight of the `(α/2)‖β‖²` term.
    pub fn alpha(&self) -> f64 {
        match *self {
            Objective::LeastSquares => 0.0,
            Objective::Ridge { alpha } | Objective::Logistic { alpha } => alpha,
        }
    }

    pub fn is_quadratic(&self) -> bool {
        !matches!(self, Objective::Logistic { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.alpha();
        if !(a >= 0.0) || !a.is_finite() {
            return Err(CoreError::InvalidConfig(format!("ridge weight must be >= 0, got {a}")));
        }
        Ok(())
    }

    pub fn label(&self) -> &'static str {
        match self {
            Objective::LeastSquares => "least_squares",
            Objective::Ridge { .. } => "ridge",
            Objective::Logistic { .. } => "logistic",
        }
    }
}

/// Errors unless every label is exactly ±1.
pub fn check_labels(y: &[f64]) -> Result<()> {
    match y.iter().position(|&v| v != 1.0 && v != -1.0) {
        None => Ok(()),
        Some(k) => Err(CoreError::InvalidLabels(format!("row {k} has label {}", y[k]))),
    }
}

/// Maps {0, 1} labels to {−1, +1}; anything else is an error.
pub fn remap_zero_one_labels(y: &[f64]) -> Result<Vec<f64>> {
    y.iter()
        .enumerate()
        .map(|(k, &v)| match v {
            v if v == 0.0 => Ok(-1.0),
            v if v == 1.0 => Ok(1.0),
            _ => Err(CoreError::InvalidLabels(format!("row {k} has label {v}, expected 0 or 1"))),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub absolute_loss: f64,
    pub relative_residual: f64,
    pub iterations: usize,
    pub wall_time: f64,
}

pub fn absolute_loss(beta_hat: &[f64], beta_star: &[f64]) -> Result<f64> {
    if beta_hat.len() != beta_star.len() {
        return Err(CoreError::LengthMismatch(beta_hat.len(), beta_star.len()));
    }
    Ok(vector::dist2(beta_hat, beta_star))
}

pub fn relative_al_ratio(al_alg: f64, al_newton: f64) -> Result<f64> {
    if !(al_newton > 0.0) {
        return Err(CoreError::ZeroBaseline);
    }
    Ok((al_alg - al_newton) / al_newton)
}

/// `‖Aβ − c‖₂ / ‖c‖₂` for the normal equations `(XᵀX + αI)β = Xᵀy`.
pub fn normal_equations_residual(x: &Matrix, y: &[f64], alpha: f64, beta: &[f64]) -> f64 {
    let g = normal_equations_gap(x, y, alpha, beta);
    let c = x.tmatvec(y);
    let nc = vector::norm2(&c);
    if nc == 0.0 {
        vector::norm2(&g)
    } else {
        vector::norm2(&g) / nc
    }
}

/// `(XᵀX + αI)β − Xᵀy`
pub fn normal_equations_gap(x: &Matrix, y: &[f64], alpha: f64, beta: &[f64]) -> Vec<f64> {
    let xb = x.matvec(beta);
    let mut g = x.tmatvec(&vector::sub(&xb, y));
    vector::axpy(alpha, beta, &mut g);
    g
}

/// `log(1 + e^{−u})` without overflow.
pub fn softplus_neg(u: f64) -> f64 {
    if u > 0.0 {
        (-u).exp().ln_1p()
    } else {
        -u + u.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e^{−u})`.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `Σ_r log(1 + exp(−y_r x_rᵀβ)) + (α/2)‖β‖²` over the given rows.
pub fn logistic_loss(x: &Matrix, y: &[f64], rows: &[usize], alpha: f64, beta: &[f64]) -> f64 {
    let data: f64 = rows
        .iter()
        .map(|&r| softplus_neg(y[r] * vector::dot(x.row(r), beta)))
        .sum();
    data + 0.5 * alpha * vector::dot(beta, beta)
}

pub fn logistic_gradient(x: &Matrix, y: &[f64], rows: &[usize], alpha: f64, beta: &[f64]) -> Vec<f64> {
    let mut g = vector::scale(alpha, beta);
    for &r in rows {
        let u = y[r] * vector::dot(x.row(r), beta);
        vector::axpy(-y[r] * sigmoid(-u), x.row(r), &mut g);
    }
    g
}

pub fn logistic_hessian(x: &Matrix, y: &[f64], rows: &[usize], alpha: f64, beta: &[f64]) -> Matrix {
    let p = x.cols();
    let mut h = Matrix::scaled_identity(p, alpha);
    for &r in rows {
        let row = x.row(r);
        let s = sigmoid(y[r] * vector::dot(row, beta));
        let w = s * (1.0 - s);
        for a in 0..p {
            let wa = w * row[a];
            for bb in a..p {
                h[(a, bb)] += wa * row[bb];
            }
        }
    }
    for a in 0..p {
        for bb in 0..a {
            h[(a, bb)] = h[(bb, a)];
        }
    }
    h
}
