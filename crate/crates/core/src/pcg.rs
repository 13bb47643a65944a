//! Distributed conjugate gradient on the normal equations with per-center preconditioners.

use datashare_linalg::{spd_condition_number, symmetric_eigenvalues, vector, Cholesky, Matrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::problem::{gram_rows, PartitionedDataset};
use crate::sharing::SharingPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecondKind {
    Identity,
    Local,
    GlobalSketch,
}

#[derive(Debug, Clone)]
pub struct Preconditioner {
    pub kind: PrecondKind,
    /// `H_i`, one per center.
    pub h: Vec<Matrix>,
    /// `H = Σ H_i`.
    pub total: Matrix,
}

impl Preconditioner {
    fn from_parts(kind: PrecondKind, h: Vec<Matrix>) -> Self {
        let p = h[0].rows();
        let mut total = Matrix::zeros(p, p);
        for hi in &h {
            total.add_assign(hi);
        }
        Preconditioner { kind, h, total }
    }
}

fn spd_inverse(a: &Matrix, center: usize) -> Result<Matrix> {
    match Cholesky::new(a) {
        Ok(ch) => Ok(ch.inverse()),
        Err(_) => {
            let lambda_min = symmetric_eigenvalues(a).map(|e| e[0]).unwrap_or(f64::NAN);
            Err(CoreError::SingularBlock { center, lambda_min })
        }
    }
}

/// `H_i = I/b`, so that `H = I`.
pub fn build_identity(ds: &PartitionedDataset) -> Preconditioner {
    let b = ds.b();
    let h = vec![Matrix::scaled_identity(ds.p(), 1.0 / b as f64); b];
    Preconditioner::from_parts(PrecondKind::Identity, h)
}

/// `H_i = D_i⁻¹`
pub fn build_local_precond(ds: &PartitionedDataset) -> Result<Preconditioner> {
    let h: Result<Vec<Matrix>> = ds
        .blocks
        .par_iter()
        .enumerate()
        .map(|(i, blk)| spd_inverse(&gram_rows(&ds.x, blk), i))
        .collect();
    Ok(Preconditioner::from_parts(PrecondKind::Local, h?))
}

/// Each center adds the pooled rows of every other center, rescaled by `s_j/|r_j|`,
/// to its own Gram: `H_i = (1/b)[D_i + Σ_{j≠i} (s_j/|r_j|) X_{r_j}ᵀX_{r_j}]⁻¹`.
///
/// With `inline_variant` the `1/b` moves onto `D_i` alone:
/// `H_i = [(1/b)D_i + Σ_{j≠i} (s_j/|r_j|) X_{r_j}ᵀX_{r_j}]⁻¹`.
pub fn build_global_precond(ds: &PartitionedDataset, plan: &SharingPlan, inline_variant: bool) -> Result<Preconditioner> {
    let b = ds.b();
    if plan.b() != b {
        return Err(CoreError::LengthMismatch(plan.b(), b));
    }
    if b > 1 {
        if let Some(j) = plan.pool.iter().position(|r| r.is_empty()) {
            return Err(CoreError::EmptyContribution(j));
        }
    }
    let sizes = ds.block_sizes();
    let sketch: Vec<Matrix> = plan
        .pool
        .par_iter()
        .enumerate()
        .map(|(j, r)| gram_rows(&ds.x, r).scaled(sizes[j] as f64 / r.len().max(1) as f64))
        .collect();
    let inv_b = 1.0 / b as f64;
    let h: Result<Vec<Matrix>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let own = gram_rows(&ds.x, &ds.blocks[i]);
            let mut others = Matrix::zeros(ds.p(), ds.p());
            for (j, sk) in sketch.iter().enumerate() {
                if j != i {
                    others.add_assign(sk);
                }
            }
            if inline_variant {
                let a = own.scaled(inv_b).add(&others);
                spd_inverse(&a, i)
            } else {
                Ok(spd_inverse(&own.add(&others), i)?.scaled(inv_b))
            }
        })
        .collect();
    Ok(Preconditioner::from_parts(PrecondKind::GlobalSketch, h?))
}

/// `κ(HA)` with `H = Σ H_i`, `A = Σ D_i`.
pub fn precond_condition_report(ds: &PartitionedDataset, precond: &Preconditioner) -> Result<f64> {
    Ok(spd_condition_number(&precond.total, &ds.x.gram())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcgOptions {
    /// Stop once `‖b − Ax‖/‖b‖` is at or below this.
    pub tol: f64,
    pub max_iters: usize,
    /// Ridge added to the system matrix, split evenly over the centers.
    pub alpha: f64,
}

impl Default for PcgOptions {
    fn default() -> Self {
        PcgOptions { tol: 1e-8, max_iters: 1000, alpha: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcgTrace {
    /// True relative residual `‖b − Ax_k‖/‖b‖`, starting at `k = 0`.
    pub relative_residual: Vec<f64>,
    /// `‖r_k‖/‖b‖` from the recursive update.
    pub recursive_residual: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const STAGNATION_WINDOW: usize = 20;

/// Solves `Σ (D_i + α/b I) β = Σ X_iᵀy_i`. Every inner product and matrix product is formed
/// per center and summed in center order, as the centers would send them.
pub fn pcg_run(ds: &PartitionedDataset, precond: &Preconditioner, opts: &PcgOptions) -> Result<(Vec<f64>, PcgTrace)> {
    if !(opts.tol > 0.0) {
        return Err(CoreError::InvalidConfig(format!("tol must be positive, got {}", opts.tol)));
    }
    if precond.h.len() != ds.b() {
        return Err(CoreError::LengthMismatch(precond.h.len(), ds.b()));
    }
    let b = ds.b();
    let ridge = opts.alpha / b as f64;
    let d: Vec<Matrix> = ds
        .blocks
        .par_iter()
        .map(|blk| {
            let mut g = gram_rows(&ds.x, blk);
            g.add_diag(ridge);
            g
        })
        .collect();
    let apply_a = |v: &[f64]| -> Vec<f64> {
        let parts: Vec<Vec<f64>> = d.par_iter().map(|di| di.matvec(v)).collect();
        sum_in_order(parts, v.len())
    };
    let h_dot = |r: &[f64]| -> (f64, Vec<f64>) {
        let parts: Vec<Vec<f64>> = precond.h.par_iter().map(|hi| hi.matvec(r)).collect();
        let quad: f64 = parts.iter().map(|hr| vector::dot(r, hr)).sum();
        (quad, sum_in_order(parts, r.len()))
    };

    let rhs = sum_in_order((0..b).map(|i| ds.block_xty(i)).collect(), ds.p());
    let bnorm = vector::norm2(&rhs);
    if bnorm == 0.0 {
        return Err(CoreError::ZeroBaseline);
    }
    let mut x = vec![0.0; ds.p()];
    let mut r = rhs.clone();
    let (mut rho, hr) = h_dot(&r);
    let mut dir = hr;
    let mut trace = PcgTrace {
        relative_residual: vec![1.0],
        recursive_residual: vec![1.0],
        iterations: 0,
        converged: false,
    };
    let mut best = 1.0;
    let mut since_best = 0;
    for k in 1..=opts.max_iters {
        let ad = apply_a(&dir);
        let curv: f64 = d.iter().map(|di| vector::dot(&dir, &di.matvec(&dir))).sum();
        if !(curv > 0.0) {
            break;
        }
        let step = rho / curv;
        vector::axpy(step, &dir, &mut x);
        vector::axpy(-step, &ad, &mut r);
        let true_res = vector::norm2(&vector::sub(&rhs, &apply_a(&x))) / bnorm;
        trace.relative_residual.push(true_res);
        trace.recursive_residual.push(vector::norm2(&r) / bnorm);
        trace.iterations = k;
        if true_res <= opts.tol {
            trace.converged = true;
            break;
        }
        if true_res < best {
            best = true_res;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= STAGNATION_WINDOW {
                return Err(CoreError::Stagnation { iteration: k, best });
            }
        }
        let (rho_next, hr) = h_dot(&r);
        let t = rho_next / rho;
        rho = rho_next;
        dir = hr.iter().zip(&dir).map(|(h, p)| h + t * p).collect();
    }
    Ok((x, trace))
}

fn sum_in_order(parts: Vec<Vec<f64>>, p: usize) -> Vec<f64> {
    let mut s = vec![0.0; p];
    for v in &parts {
        vector::axpy(1.0, v, &mut s);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::contiguous_blocks;

    fn orthonormal_ds() -> PartitionedDataset {
        PartitionedDataset::new(Matrix::identity(4), vec![1.0, -2.0, 0.5, 3.0], contiguous_blocks(4, 2)).unwrap()
    }

    #[test]
    fn identity_system_one_iteration() {
        let ds = orthonormal_ds();
        let (x, tr) = pcg_run(&ds, &build_identity(&ds), &PcgOptions::default()).unwrap();
        assert_eq!(tr.iterations, 1);
        assert!(tr.converged);
        assert!(vector::dist2(&x, &ds.y) < 1e-15);
    }

    #[test]
    fn single_feature_local_is_reciprocal() {
        let x = Matrix::column(&[1.0, 2.0, 3.0, 1.0]);
        let ds = PartitionedDataset::new(x, vec![1.0; 4], contiguous_blocks(4, 2)).unwrap();
        let pc = build_local_precond(&ds).unwrap();
        assert!((pc.h[0][(0, 0)] - 1.0 / 5.0).abs() < 1e-15);
        assert!((pc.h[1][(0, 0)] - 1.0 / 10.0).abs() < 1e-15);
    }

    #[test]
    fn singular_block_rejected() {
        let x = Matrix::from_rows(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let ds = PartitionedDataset::new(x, vec![1.0; 4], contiguous_blocks(4, 2)).unwrap();
        assert!(matches!(build_local_precond(&ds), Err(CoreError::SingularBlock { center: 0, .. })));
    }

    #[test]
    fn identity_condition_is_that_of_a() {
        let x = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let ds = PartitionedDataset::new(x, vec![1.0; 4], contiguous_blocks(4, 2)).unwrap();
        let k = precond_condition_report(&ds, &build_identity(&ds)).unwrap();
        assert!((k - 2.5).abs() < 1e-12);
    }
}
