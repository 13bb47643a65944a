use num_complex::Complex64;

use crate::error::{LinalgError, Result};
use crate::matrix::Matrix;

/// Relative subdiagonal size below which the QR iteration deflates.
pub const DEFAULT_DEFLATION_TOL: f64 = 1e-12;

/// Eigenvalues of a square matrix together with their largest modulus.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<Complex64>,
    pub radius: f64,
}

impl Spectrum {
    fn new(values: Vec<Complex64>) -> Self {
        let radius = values.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        Spectrum { values, radius }
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()))
    }

    /// Values sorted by descending modulus, ties by real part then imaginary part.
    pub fn sorted_by_modulus(&self) -> Vec<Complex64> {
        let mut v = self.values.clone();
        v.sort_by(|a, b| {
            b.norm()
                .partial_cmp(&a.norm())
                .unwrap()
                .then(b.re.partial_cmp(&a.re).unwrap())
                .then(b.im.partial_cmp(&a.im).unwrap())
        });
        v
    }
}

/// Eigenvalues via Householder reduction to Hessenberg form and Francis
/// double-shift QR. `tol` is the relative deflation threshold on subdiagonals.
pub fn eigenvalues_general(m: &Matrix, tol: f64) -> Result<Spectrum> {
    assert!(m.is_square(), "eigenvalues_general: matrix not square");
    assert!(m.rows() >= 1, "eigenvalues_general: empty matrix");
    let n = m.rows();
    let h = hessenberg(m);
    // 1-based working copy keeps the index arithmetic of the classical algorithm readable.
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i + 1][j + 1] = h[(i, j)];
        }
    }
    let (wr, wi) = hqr(&mut a, n, tol.max(f64::EPSILON))?;
    let values = (1..=n).map(|i| Complex64::new(wr[i], wi[i])).collect();
    Ok(Spectrum::new(values))
}

pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigenvalues_general(m, DEFAULT_DEFLATION_TOL)?.radius)
}

fn hessenberg(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut a = m.clone();
    for k in 0..n.saturating_sub(2) {
        let mut v: Vec<f64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if v[0] >= 0.0 { -norm } else { norm };
        v[0] -= alpha;
        let vn2: f64 = v.iter().map(|x| x * x).sum();
        if vn2 == 0.0 {
            continue;
        }
        // Left: rows k+1.., all columns from k.
        for j in k..n {
            let d: f64 = (0..v.len()).map(|t| v[t] * a[(k + 1 + t, j)]).sum::<f64>() * 2.0 / vn2;
            for t in 0..v.len() {
                a[(k + 1 + t, j)] -= d * v[t];
            }
        }
        // Right: all rows, columns k+1..
        for i in 0..n {
            let d: f64 = (0..v.len()).map(|t| a[(i, k + 1 + t)] * v[t]).sum::<f64>() * 2.0 / vn2;
            for t in 0..v.len() {
                a[(i, k + 1 + t)] -= d * v[t];
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
    a
}

#[allow(clippy::many_single_char_names)]
fn hqr(a: &mut [Vec<f64>], n: usize, tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let cap = 100 * n;
    let mut total = 0usize;

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    if anorm == 0.0 {
        return Ok((wr, wi));
    }

    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r, mut s, mut w, mut x, mut y, mut z);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= tol * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            y = a[nn - 1][nn - 1];
            w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + z.copysign(p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = z;
                    wi[nn] = -z;
                }
                if nn < 2 {
                    nn = 0;
                } else {
                    nn -= 2;
                }
                break;
            }
            total += 1;
            if total > cap {
                return Err(LinalgError::NoConvergence(cap));
            }
            if its == 10 || its == 20 {
                // Exceptional shift.
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            loop {
                z = a[m][m];
                r = x - z;
                s = y - z;
                p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s;
                r = a[m + 2][m + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= f64::EPSILON * v {
                    break;
                }
                m -= 1;
            }
            for i in m + 2..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                s = (p * p + q * q + r * r).sqrt().copysign(p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = nn.min(k + 3);
                    for i in l..=mmin {
                        p = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            p += z * a[i][k + 2];
                            a[i][k + 2] -= p * r;
                        }
                        a[i][k + 1] -= p * q;
                        a[i][k] -= p;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((wr, wi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(s: &Spectrum) -> Vec<f64> {
        let mut v: Vec<f64> = s.values.iter().map(|z| z.re).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn diagonal() {
        let s = eigenvalues_general(&Matrix::diag(&[3.0, 1.0, -2.0]), 1e-12).unwrap();
        assert_eq!(sorted_re(&s), vec![-2.0, 1.0, 3.0]);
        assert_eq!(s.radius, 3.0);
    }

    #[test]
    fn rotation_pair() {
        let m = Matrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let s = eigenvalues_general(&m, 1e-12).unwrap();
        let mut im: Vec<f64> = s.values.iter().map(|z| z.im).collect();
        im.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((im[0] + 1.0).abs() < 1e-15 && (im[1] - 1.0).abs() < 1e-15);
        assert!(s.values.iter().all(|z| z.re.abs() < 1e-15));
        assert!((s.radius - 1.0).abs() < 1e-15);
    }

    #[test]
    fn radius_trivial_cases() {
        assert!((spectral_radius(&Matrix::identity(4)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(spectral_radius(&Matrix::zeros(3, 3)).unwrap(), 0.0);
        let nil = Matrix::from_rows(&[&[0.0, 2.0], &[0.0, 0.0]]);
        assert_eq!(spectral_radius(&nil).unwrap(), 0.0);
        assert_eq!(spectral_radius(&Matrix::from_rows(&[&[-0.5]])).unwrap(), 0.5);
    }

    #[test]
    fn companion_matrix_roots() {
        // x^4 - 10x^3 + 35x^2 - 50x + 24 = (x-1)(x-2)(x-3)(x-4)
        let m = Matrix::from_rows(&[
            &[10.0, -35.0, 50.0, -24.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let s = eigenvalues_general(&m, 1e-12).unwrap();
        for (got, e) in sorted_re(&s).iter().zip([1.0, 2.0, 3.0, 4.0]) {
            assert!((got - e).abs() < 1e-9, "{got} vs {e}");
        }
    }

    #[test]
    fn mixed_real_and_complex() {
        // Block diag of a rotation-scaling and a real 2x2.
        let m = Matrix::from_rows(&[
            &[0.5, -0.5, 0.0, 0.0],
            &[0.5, 0.5, 0.0, 0.0],
            &[0.0, 0.0, 2.0, 1.0],
            &[0.0, 0.0, 0.0, -3.0],
        ]);
        let q = crate::qr::thin_q(&Matrix::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 + if i == j { 4.0 } else { 0.0 }));
        let mm = q.transpose().matmul(&m.matmul(&q));
        let s = eigenvalues_general(&mm, 1e-12).unwrap();
        assert!((s.radius - 3.0).abs() < 1e-12);
        let complex: Vec<_> = s.values.iter().filter(|z| z.im.abs() > 1e-8).collect();
        assert_eq!(complex.len(), 2);
        for z in complex {
            assert!((z.norm() - 0.5f64.sqrt()).abs() < 1e-12);
        }
    }
}
