//! Centralized oracles: direct normal equations, gradient descent, Newton.

use datashare_linalg::{vector, Cholesky, Matrix};

use crate::error::{CoreError, Result};
use crate::problem::{check_labels, logistic_gradient, logistic_hessian, logistic_loss, Objective, PartitionedDataset};
use crate::solver::{run, Iterate, Method, NewtonConfig, Problem, SolverConfig, SolverRun};

/// Solves `(XᵀX + αI)β = Xᵀy`.
pub fn direct_ls(x: &Matrix, y: &[f64], alpha: f64) -> Result<Vec<f64>> {
    let mut a = x.gram();
    a.add_diag(alpha);
    Ok(Cholesky::new(&a)?.solve_vec(&x.tmatvec(y)))
}

/// Minimizer of the objective on the full data.
pub fn centralized_optimum(ds: &PartitionedDataset, objective: Objective) -> Result<Vec<f64>> {
    match objective {
        Objective::Logistic { alpha } => newton_logistic(&ds.x, &ds.y, alpha, NewtonConfig::default().tol),
        _ => direct_ls(&ds.x, &ds.y, objective.alpha()),
    }
}

/// Damped Newton with Armijo backtracking. On failure returns the last point and its gradient norm.
pub(crate) fn damped_newton(
    mut x: Vec<f64>,
    cfg: &NewtonConfig,
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    hess: impl Fn(&[f64]) -> Matrix,
) -> std::result::Result<Vec<f64>, (Vec<f64>, f64)> {
    let mut g = grad(&x);
    for _ in 0..cfg.max_steps {
        let gn = vector::norm2(&g);
        if gn <= cfg.tol {
            return Ok(x);
        }
        let dir = match Cholesky::new(&hess(&x)) {
            Ok(ch) => vector::scale(-1.0, &ch.solve_vec(&g)),
            Err(_) => return Err((x, gn)),
        };
        let slope = vector::dot(&g, &dir);
        let fx = f(&x);
        let mut step = 1.0;
        let mut accepted = false;
        // Predicted decrease below roundoff in f: take the full step and let the gradient decide.
        if -slope > 1e-12 * fx.abs().max(1.0) {
            for _ in 0..60 {
                let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                if f(&trial) <= fx + cfg.armijo_c * step * slope {
                    accepted = true;
                    break;
                }
                step *= cfg.shrink;
            }
            if !accepted {
                return Err((x, gn));
            }
        }
        vector::axpy(step, &dir, &mut x);
        g = grad(&x);
    }
    let gn = vector::norm2(&g);
    if gn <= cfg.tol {
        Ok(x)
    } else {
        Err((x, gn))
    }
}

/// Centralized damped Newton for `Σ log(1 + exp(−y xᵀβ)) + (α/2)‖β‖²`.
pub fn newton_logistic(x: &Matrix, y: &[f64], alpha: f64, tol: f64) -> Result<Vec<f64>> {
    check_labels(y)?;
    let rows: Vec<usize> = (0..x.rows()).collect();
    let cfg = NewtonConfig { tol, ..NewtonConfig::default() };
    let h0 = logistic_hessian(x, y, &rows, alpha, &vec![0.0; x.cols()]);
    if Cholesky::new(&h0).is_err() {
        return Err(CoreError::SingularHessian);
    }
    damped_newton(
        vec![0.0; x.cols()],
        &cfg,
        |b| logistic_loss(x, y, &rows, alpha, b),
        |b| logistic_gradient(x, y, &rows, alpha, b),
        |b| logistic_hessian(x, y, &rows, alpha, b),
    )
    .map_err(|_| CoreError::NoConvergence(cfg.max_steps))
}

pub struct GradientDescentMethod;

impl Method for GradientDescentMethod {
    fn name(&self) -> &'static str {
        "gradient-descent"
    }

    fn description(&self) -> &'static str {
        "full gradient descent, fixed step or Armijo backtracking"
    }

    fn supports(&self, _objective: &Objective) -> bool {
        true
    }

    fn start<'a>(&self, problem: &Problem<'a>, cfg: &SolverConfig) -> Result<Box<dyn Iterate + 'a>> {
        if matches!(problem.objective, Objective::Logistic { .. }) {
            check_labels(&problem.data.y)?;
        }
        Ok(Box::new(GradientDescent::new(problem.data, problem.objective, cfg)))
    }
}

pub struct GradientDescent<'a> {
    ds: &'a PartitionedDataset,
    objective: Objective,
    rho: f64,
    backtracking: bool,
    armijo_c: f64,
    shrink: f64,
    beta: Vec<f64>,
}

impl<'a> GradientDescent<'a> {
    pub fn new(ds: &'a PartitionedDataset, objective: Objective, cfg: &SolverConfig) -> Self {
        GradientDescent {
            ds,
            objective,
            rho: cfg.rho,
            backtracking: cfg.backtracking,
            armijo_c: cfg.newton.armijo_c,
            shrink: cfg.newton.shrink,
            beta: vec![0.0; ds.p()],
        }
    }

    fn loss(&self, beta: &[f64]) -> f64 {
        let ds = self.ds;
        let a = self.objective.alpha();
        match self.objective {
            Objective::Logistic { .. } => ds
                .blocks
                .iter()
                .map(|blk| logistic_loss(&ds.x, &ds.y, blk, 0.0, beta))
                .sum::<f64>()
                + 0.5 * a * vector::dot(beta, beta),
            _ => {
                let r = vector::sub(&ds.x.matvec(beta), &ds.y);
                0.5 * vector::dot(&r, &r) + 0.5 * a * vector::dot(beta, beta)
            }
        }
    }

    /// Sum of the per-center gradients in center order.
    fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let ds = self.ds;
        let mut g = vector::scale(self.objective.alpha(), beta);
        for blk in &ds.blocks {
            let gi = match self.objective {
                Objective::Logistic { .. } => logistic_gradient(&ds.x, &ds.y, blk, 0.0, beta),
                _ => {
                    let mut gi = vec![0.0; ds.p()];
                    for &r in blk {
                        let res = vector::dot(ds.x.row(r), beta) - ds.y[r];
                        vector::axpy(res, ds.x.row(r), &mut gi);
                    }
                    gi
                }
            };
            vector::axpy(1.0, &gi, &mut g);
        }
        g
    }
}

impl Iterate for GradientDescent<'_> {
    fn step(&mut self) -> Result<()> {
        let g = self.gradient(&self.beta);
        let mut step = self.rho;
        if self.backtracking {
            step = 1.0;
            let f0 = self.loss(&self.beta);
            let gg = vector::dot(&g, &g);
            for _ in 0..60 {
                let trial: Vec<f64> = self.beta.iter().zip(&g).map(|(b, gi)| b - step * gi).collect();
                let decrease = self.armijo_c * step * gg;
                // Once the decrease is lost in the roundoff of f, judge by the gradient norm.
                let ok = if decrease < 1e-12 * f0.abs().max(1.0) {
                    let gt = self.gradient(&trial);
                    vector::dot(&gt, &gt) < gg
                } else {
                    self.loss(&trial) <= f0 - decrease
                };
                if ok {
                    break;
                }
                step *= self.shrink;
            }
        }
        vector::axpy(-step, &g, &mut self.beta);
        Ok(())
    }

    fn beta(&self) -> &[f64] {
        &self.beta
    }
}

pub fn gradient_descent(
    ds: &PartitionedDataset,
    objective: Objective,
    cfg: &SolverConfig,
    beta_star: Option<&[f64]>,
) -> Result<SolverRun> {
    run(&GradientDescentMethod, &Problem::new(ds, objective), cfg, beta_star)
}

pub struct NewtonMethod;

impl Method for NewtonMethod {
    fn name(&self) -> &'static str {
        "newton"
    }

    fn description(&self) -> &'static str {
        "centralized damped Newton, one Newton step per iteration"
    }

    fn supports(&self, _objective: &Objective) -> bool {
        true
    }

    fn start<'a>(&self, problem: &Problem<'a>, cfg: &SolverConfig) -> Result<Box<dyn Iterate + 'a>> {
        if matches!(problem.objective, Objective::Logistic { .. }) {
            check_labels(&problem.data.y)?;
        }
        Ok(Box::new(NewtonIter { ds: problem.data, objective: problem.objective, cfg: cfg.newton, beta: vec![0.0; problem.data.p()] }))
    }
}

struct NewtonIter<'a> {
    ds: &'a PartitionedDataset,
    objective: Objective,
    cfg: NewtonConfig,
    beta: Vec<f64>,
}

impl Iterate for NewtonIter<'_> {
    fn step(&mut self) -> Result<()> {
        let ds = self.ds;
        let a = self.objective.alpha();
        let rows: Vec<usize> = (0..ds.n()).collect();
        let one = NewtonConfig { max_steps: 1, tol: 0.0, ..self.cfg };
        self.beta = match self.objective {
            Objective::Logistic { .. } => damped_newton(
                self.beta.clone(),
                &one,
                |b| logistic_loss(&ds.x, &ds.y, &rows, a, b),
                |b| logistic_gradient(&ds.x, &ds.y, &rows, a, b),
                |b| logistic_hessian(&ds.x, &ds.y, &rows, a, b),
            )
            .unwrap_or_else(|(b, _)| b),
            _ => direct_ls(&ds.x, &ds.y, a)?,
        };
        Ok(())
    }

    fn beta(&self) -> &[f64] {
        &self.beta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{partition_rows, PartitionStrategy};

    #[test]
    fn direct_orthonormal() {
        let x = Matrix::identity(3);
        let y = [1.0, 2.0, 3.0];
        assert_eq!(direct_ls(&x, &y, 0.0).unwrap(), y.to_vec());
    }

    #[test]
    fn direct_consistent_system() {
        let x = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 1.0], &[0.5, -1.0]]);
        let beta = [0.3, -1.2];
        let y = x.matvec(&beta);
        let got = direct_ls(&x, &y, 0.0).unwrap();
        assert!(vector::dist2(&got, &beta) < 1e-13);
        let n1 = vector::norm2(&direct_ls(&x, &y, 1.0).unwrap());
        let n2 = vector::norm2(&direct_ls(&x, &y, 10.0).unwrap());
        assert!(n2 < n1 && n1 < vector::norm2(&got));
    }

    #[test]
    fn newton_symmetric_data_gives_zero() {
        let x = Matrix::from_rows(&[&[1.0, 2.0], &[-1.0, -2.0], &[0.5, -1.0], &[-0.5, 1.0]]);
        let y = [1.0, 1.0, -1.0, -1.0];
        let b = newton_logistic(&x, &y, 0.1, 1e-10).unwrap();
        assert!(vector::norm2(&b) < 1e-12);
    }

    #[test]
    fn newton_separable_one_dimensional() {
        let x = Matrix::column(&[1.0, 2.0, -1.5, -0.5]);
        let y = [1.0, 1.0, -1.0, -1.0];
        let alpha = 0.5;
        let b = newton_logistic(&x, &y, alpha, 1e-10).unwrap()[0];
        // Bisection on g(β) = αβ − Σ y x σ(−y x β).
        let g = |beta: f64| {
            alpha * beta
                - (0..4).map(|i| y[i] * x[(i, 0)] * crate::problem::sigmoid(-y[i] * x[(i, 0)] * beta)).sum::<f64>()
        };
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        assert!(b.is_finite() && (b - lo).abs() < 1e-9);
        assert!(g(b).abs() <= 1e-10);
    }

    #[test]
    fn gd_identity_one_step() {
        let x = Matrix::identity(4);
        let ds = partition_rows(x, vec![1.0, 2.0, 3.0, 4.0], 2, PartitionStrategy::Contiguous).unwrap();
        let run = gradient_descent(&ds, Objective::LeastSquares, &SolverConfig::default().with_iters(1), None).unwrap();
        assert!(vector::dist2(&run.beta, &[1.0, 2.0, 3.0, 4.0]) < 1e-15);
    }

    #[test]
    fn gd_diverges_outside_step_range() {
        let x = Matrix::diag(&[1.0, 1.0, 2.0, 2.0]);
        let ds = partition_rows(x, vec![1.0; 4], 2, PartitionStrategy::Contiguous).unwrap();
        let cfg = SolverConfig::default().with_rho(0.6).with_iters(500);
        assert!(matches!(gradient_descent(&ds, Objective::LeastSquares, &cfg, None), Err(CoreError::Divergence(_))));
    }
}
