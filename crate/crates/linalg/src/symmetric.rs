use crate::cholesky::Cholesky;
use crate::error::{LinalgError, Result};
use crate::matrix::Matrix;

const SYM_TOL: f64 = 1e-10;

/// Eigenvalues of a symmetric matrix in ascending order.
///
/// Householder reduction to tridiagonal form followed by implicit QL with
/// Wilkinson shifts.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    assert!(a.is_square(), "symmetric_eigenvalues: not square");
    let asym = a.asymmetry();
    if asym > SYM_TOL {
        return Err(LinalgError::NotSymmetric(asym));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (mut d, mut e) = tridiagonalize(a);
    tql(&mut d, &mut e)?;
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(d)
}

/// Returns diagonal `d` and subdiagonal `e` (with `e[0] = 0`, `e[i]` coupling `i-1, i`).
fn tridiagonalize(a: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    let mut e = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let x: Vec<f64> = (k + 1..n).map(|i| m[(i, k)]).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = x;
        v[0] -= alpha;
        let vn2: f64 = v.iter().map(|t| t * t).sum();
        if vn2 == 0.0 {
            continue;
        }
        // Apply H = I - 2vvᵀ/vᵀv on both sides of the trailing block.
        let len = n - k - 1;
        let mut pvec = vec![0.0; len];
        for i in 0..len {
            let mut s = 0.0;
            for j in 0..len {
                s += m[(k + 1 + i, k + 1 + j)] * v[j];
            }
            pvec[i] = 2.0 * s / vn2;
        }
        let kcoef: f64 = v.iter().zip(&pvec).map(|(a, b)| a * b).sum::<f64>() / vn2;
        let w: Vec<f64> = pvec.iter().zip(&v).map(|(p, vi)| p - kcoef * vi).collect();
        for i in 0..len {
            for j in 0..len {
                m[(k + 1 + i, k + 1 + j)] -= v[i] * w[j] + w[i] * v[j];
            }
        }
        m[(k + 1, k)] = alpha;
        m[(k, k + 1)] = alpha;
        for i in k + 2..n {
            m[(i, k)] = 0.0;
            m[(k, i)] = 0.0;
        }
    }
    let d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    for i in 1..n {
        e[i] = m[(i, i - 1)];
    }
    (d, e)
}

/// Implicit QL on a symmetric tridiagonal matrix; eigenvalues land in `d`.
fn tql(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let cap = 100 * n.max(1);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > cap {
                return Err(LinalgError::NoConvergence(cap));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// `λ_max / λ_min` of `H A` for SPD `H` and `A`.
///
/// With `H = L Lᵀ`, `H A` is similar to the symmetric `Lᵀ A L`.
pub fn spd_condition_number(h: &Matrix, a: &Matrix) -> Result<f64> {
    assert_eq!(h.rows(), a.rows(), "spd_condition_number: dimension mismatch");
    let lh = Cholesky::new(h)?;
    Cholesky::new(a)?;
    let l = lh.factor();
    let mut s = l.transpose().matmul(&a.matmul(l));
    s.symmetrize();
    let ev = symmetric_eigenvalues(&s)?;
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if !(lo > 0.0) {
        return Err(LinalgError::NotPositiveDefinite { pivot: 0, value: lo });
    }
    Ok(hi / lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_known_spectrum() {
        // Second-difference matrix: eigenvalues 2 - 2cos(kπ/(n+1)).
        let n = 6;
        let a = Matrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let ev = symmetric_eigenvalues(&a).unwrap();
        for (k, v) in ev.iter().enumerate() {
            let e = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - e).abs() < 1e-13, "{v} vs {e}");
        }
    }

    #[test]
    fn dense_known_spectrum() {
        let a = Matrix::from_rows(&[&[2.0, 1.0, 1.0], &[1.0, 2.0, 1.0], &[1.0, 1.0, 2.0]]);
        let ev = symmetric_eigenvalues(&a).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14);
        assert!((ev[1] - 1.0).abs() < 1e-14);
        assert!((ev[2] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn kappa_perfect_preconditioner() {
        let a = Matrix::from_rows(&[&[3.0, 1.0], &[1.0, 2.0]]);
        let h = Cholesky::new(&a).unwrap().inverse();
        assert!((spd_condition_number(&h, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_identity() {
        let a = Matrix::diag(&[1.0, 4.0]);
        assert!((spd_condition_number(&Matrix::identity(2), &a).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn kappa_two_center_limits() {
        let eps: f64 = 0.1;
        let a1 = Matrix::diag(&[1.0, eps]);
        let a2 = Matrix::diag(&[1.0, 1.0 / eps]);
        let a = a1.add(&a2);
        let h1 = Cholesky::new(&a1).unwrap().inverse();
        let h2 = Cholesky::new(&a2).unwrap().inverse();
        let k1 = spd_condition_number(&h1, &a).unwrap();
        let k2 = spd_condition_number(&h2, &a).unwrap();
        let kl = spd_condition_number(&h1.add(&h2), &a).unwrap();
        let e2 = eps * eps;
        assert!((k1 - (e2 + 1.0) / (2.0 * e2)).abs() < 1e-9);
        assert!((k2 - 2.0 / (1.0 + e2)).abs() < 1e-12);
        assert!((kl - (e2 + 1.0).powi(2) / (4.0 * e2)).abs() < 1e-9);
        assert!((k1 - 50.5).abs() < 1e-9);
        assert!((kl - 25.5025).abs() < 1e-9);
    }

    #[test]
    fn kappa_rejects_indefinite() {
        let a = Matrix::diag(&[1.0, -1.0]);
        assert!(spd_condition_number(&Matrix::identity(2), &a).is_err());
    }
}
