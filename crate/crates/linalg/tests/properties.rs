use datashare_linalg::{
    cholesky_solve, eigenvalues_general, spd_condition_number, spectral_radius,
    symmetric_eigenvalues, Matrix, DEFAULT_DEFLATION_TOL,
};
use proptest::prelude::*;

/// Cyclic Jacobi rotations; slow but independent of the production eigensolvers.
fn jacobi_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d
}

fn square(max_n: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_n).prop_flat_map(|n| {
        prop::collection::vec(-1.0f64..1.0, n * n)
            .prop_map(move |v| Matrix::from_vec(n, n, v).unwrap())
    })
}

fn symmetric(max_n: usize) -> impl Strategy<Value = Matrix> {
    square(max_n).prop_map(|m| m.add(&m.transpose()).scaled(0.5))
}

fn spd(max_n: usize) -> impl Strategy<Value = Matrix> {
    square(max_n).prop_map(|m| {
        let mut a = m.transpose().matmul(&m);
        a.add_diag(0.1);
        a.symmetrize();
        a
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn cholesky_residual_small(a in spd(12), seed in 0u64..1000) {
        let n = a.rows();
        let b = Matrix::from_fn(n, 3, |i, j| ((i * 31 + j * 17 + seed as usize) % 11) as f64 - 5.0);
        let x = cholesky_solve(&a, &b).unwrap();
        let res = a.matmul(&x).sub(&b).max_abs();
        prop_assert!(res <= 1e-9, "residual {res}");
    }

    #[test]
    fn general_eigensolver_matches_jacobi(m in symmetric(10)) {
        let s = eigenvalues_general(&m, DEFAULT_DEFLATION_TOL).unwrap();
        prop_assert_eq!(s.values.len(), m.rows());
        let mut re: Vec<f64> = s.values.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let oracle = jacobi_eigenvalues(&m);
        for (a, b) in re.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-8, "{} vs {}", a, b);
        }
        prop_assert!(s.max_imag() <= 1e-8);
    }

    #[test]
    fn symmetric_eigensolver_matches_jacobi(m in symmetric(12)) {
        let ev = symmetric_eigenvalues(&m).unwrap();
        let oracle = jacobi_eigenvalues(&m);
        for (a, b) in ev.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
        }
    }

    #[test]
    fn radius_transpose_invariant(m in square(10)) {
        let r1 = spectral_radius(&m).unwrap();
        let r2 = spectral_radius(&m.transpose()).unwrap();
        prop_assert!((r1 - r2).abs() <= 1e-9, "{} vs {}", r1, r2);
    }

    #[test]
    fn radius_is_max_modulus(m in square(8)) {
        let s = eigenvalues_general(&m, DEFAULT_DEFLATION_TOL).unwrap();
        let mx = s.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert_eq!(s.radius, mx);
        // Sum of eigenvalues equals the trace.
        let tr: f64 = s.values.iter().map(|z| z.re).sum();
        prop_assert!((tr - m.trace()).abs() <= 1e-9);
    }

    #[test]
    fn kappa_scale_invariant(h in spd(6), a in spd(6), c in 0.01f64..100.0) {
        prop_assume!(h.rows() == a.rows());
        let k1 = spd_condition_number(&h, &a).unwrap();
        let k2 = spd_condition_number(&h.scaled(c), &a).unwrap();
        prop_assert!((k1 - k2).abs() <= 1e-8 * k1, "{} vs {}", k1, k2);
        prop_assert!(k1 >= 1.0 - 1e-12);
    }
}
