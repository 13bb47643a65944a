use crate::error::{LinalgError, Result};
use crate::matrix::Matrix;

/// Symmetry tolerance, relative to the largest entry.
const SYM_TOL: f64 = 1e-12;

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        assert!(a.is_square(), "cholesky: matrix not square");
        let asym = a.asymmetry();
        if asym > SYM_TOL {
            return Err(LinalgError::NotSymmetric(asym));
        }
        let n = a.rows();
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) {
                return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `L z = b` in place.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = b[i];
            for k in 0..i {
                s -= row[k] * b[k];
            }
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = z` in place.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }

    pub fn solve_vec_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.dim(), "cholesky solve: length mismatch");
        self.forward(b);
        self.backward(b);
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_vec_in_place(&mut x);
        x
    }

    pub fn solve(&self, b: &Matrix) -> Matrix {
        assert_eq!(b.rows(), self.dim(), "cholesky solve: row mismatch");
        let bt = b.transpose();
        let mut out = Matrix::zeros(bt.rows(), bt.cols());
        for j in 0..bt.rows() {
            let mut col = bt.row(j).to_vec();
            self.solve_vec_in_place(&mut col);
            out.row_mut(j).copy_from_slice(&col);
        }
        out.transpose()
    }

    pub fn inverse(&self) -> Matrix {
        let mut inv = self.solve(&Matrix::identity(self.dim()));
        inv.symmetrize();
        inv
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }
}

pub fn cholesky_solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    Ok(Cholesky::new(a)?.solve(b))
}
