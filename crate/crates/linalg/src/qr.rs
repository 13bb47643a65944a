use rand::Rng;
use rand_distr::StandardNormal;

use crate::matrix::Matrix;

/// Orthonormal basis for the column space of a full-column-rank `a` (m ≥ n),
/// via Householder reflections. Column signs follow `diag(R) > 0`.
pub fn thin_q(a: &Matrix) -> Matrix {
    let (m, n) = (a.rows(), a.cols());
    assert!(m >= n, "thin_q: needs rows >= cols");
    let mut r = a.clone();
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut signs = vec![1.0; n];
    for k in 0..n {
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            vs.push(vec![0.0; m - k]);
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        // R[k,k] ends up equal to alpha.
        signs[k] = alpha.signum();
        v[0] -= alpha;
        let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vn > 0.0 {
            for x in v.iter_mut() {
                *x /= vn;
            }
        }
        for j in k..n {
            let d: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
            for i in k..m {
                r[(i, j)] -= 2.0 * v[i - k] * d;
            }
        }
        vs.push(v);
    }
    let mut q = Matrix::zeros(m, n);
    for j in 0..n {
        q[(j, j)] = 1.0;
    }
    for k in (0..n).rev() {
        let v = &vs[k];
        for j in 0..n {
            let d: f64 = (k..m).map(|i| v[i - k] * q[(i, j)]).sum();
            for i in k..m {
                q[(i, j)] -= 2.0 * v[i - k] * d;
            }
        }
    }
    for j in 0..n {
        if signs[j] < 0.0 {
            for i in 0..m {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Haar-distributed `m × n` matrix with orthonormal columns.
pub fn random_orthonormal_columns<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Matrix {
    loop {
        let g = Matrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let q = thin_q(&g);
        if q.is_finite() && q.gram().sub(&Matrix::identity(n)).max_abs() < 1e-10 {
            return q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn q_is_orthonormal_and_spans() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 7.0], &[0.0, 1.0]]);
        let q = thin_q(&a);
        assert!(q.gram().sub(&Matrix::identity(2)).max_abs() < 1e-14);
        // Projection of a onto span(q) reproduces a.
        let proj = q.matmul(&q.transpose().matmul(&a));
        assert!(proj.sub(&a).max_abs() < 1e-13);
        // First column is the normalized first column of a.
        let n0 = (1.0f64 + 9.0 + 25.0).sqrt();
        assert!((q[(1, 0)] - 3.0 / n0).abs() < 1e-14);
    }

    #[test]
    fn random_columns_orthonormal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let q = random_orthonormal_columns(6, 4, &mut rng);
        assert!(q.gram().sub(&Matrix::identity(4)).max_abs() < 1e-13);
    }
}
