//! Seeded generators for the block structures the rate theory talks about.

use datashare_linalg::{random_orthonormal_columns, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::problem::{contiguous_blocks, sigmoid, PartitionedDataset};

fn default_noise() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub b: usize,
    pub p: usize,
    pub rows_per_block: usize,
    #[serde(default)]
    pub seed: u64,
    /// Eigenvalues of the global Gram `XᵀX`; isotropic `1/p` each when absent.
    #[serde(default)]
    pub target_spectrum: Option<Vec<f64>>,
    /// Standard deviation of the additive response noise.
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    /// Divide `X` by its Frobenius norm before drawing responses.
    #[serde(default)]
    pub normalize: bool,
}

impl GenSpec {
    pub fn new(b: usize, p: usize, rows_per_block: usize, seed: u64) -> Self {
        GenSpec { b, p, rows_per_block, seed, target_spectrum: None, noise_std: default_noise(), normalize: false }
    }

    pub fn with_spectrum(mut self, spectrum: Vec<f64>) -> Self {
        self.target_spectrum = Some(spectrum);
        self
    }

    fn spectrum(&self) -> Result<Vec<f64>> {
        let s = match &self.target_spectrum {
            Some(s) => s.clone(),
            None => vec![1.0 / self.p as f64; self.p],
        };
        if s.len() != self.p {
            return Err(CoreError::InfeasibleSpectrum(format!(
                "{} eigenvalues given for p = {}",
                s.len(),
                self.p
            )));
        }
        if let Some(v) = s.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(CoreError::InfeasibleSpectrum(format!("eigenvalue {v} is not positive")));
        }
        Ok(s)
    }

    fn check_shape(&self) -> Result<()> {
        if self.b < 2 {
            return Err(CoreError::TooFewRows { n: self.b * self.rows_per_block, b: self.b });
        }
        if self.p == 0 || self.rows_per_block == 0 {
            return Err(CoreError::InfeasibleParameters("p and rows_per_block must be positive".into()));
        }
        Ok(())
    }
}

fn stacked_blocks(b: usize, rows: usize) -> Vec<Vec<usize>> {
    (0..b).map(|i| (i * rows..(i + 1) * rows).collect()).collect()
}

/// `y = Xβ + noise` with `β ~ N(0, I)`.
fn linear_response(x: &Matrix, rng: &mut ChaCha8Rng, noise: f64) -> (Vec<f64>, Vec<f64>) {
    let beta: Vec<f64> = (0..x.cols()).map(|_| rng.sample(StandardNormal)).collect();
    let mut y = x.matvec(&beta);
    for v in y.iter_mut() {
        *v += noise * rng.sample::<f64, _>(StandardNormal);
    }
    (y, beta)
}

/// Stacks per-block factors `Q_i R_i` where `Q_i` has random orthonormal columns.
fn from_factors(factors: &[Matrix], rows: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let parts: Vec<Matrix> = factors
        .iter()
        .map(|r| random_orthonormal_columns(rows, r.rows(), rng).matmul(r))
        .collect();
    Matrix::vstack(&parts.iter().collect::<Vec<_>>())
}

/// `diag(√w) Vᵀ`, a square root of `V diag(w) Vᵀ`.
fn sqrt_factor(v: &Matrix, w: &[f64]) -> Matrix {
    Matrix::from_fn(w.len(), w.len(), |i, j| w[i].sqrt() * v[(j, i)])
}

/// Every center has the same Gram `X̃ᵀX̃ / b`, where `X̃ᵀX̃` has the target spectrum.
pub fn gen_equal_blocks(spec: &GenSpec) -> Result<PartitionedDataset> {
    spec.check_shape()?;
    let lam = spec.spectrum()?;
    if spec.rows_per_block < spec.p {
        return Err(CoreError::InfeasibleSpectrum(format!(
            "{} rows per block cannot carry a rank-{} Gram",
            spec.rows_per_block, spec.p
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let v = random_orthonormal_columns(spec.p, spec.p, &mut rng);
    let w: Vec<f64> = lam.iter().map(|l| l / spec.b as f64).collect();
    let r = sqrt_factor(&v, &w);
    let x = from_factors(&vec![r; spec.b], spec.rows_per_block, &mut rng);
    let (y, beta) = linear_response(&x, &mut rng, spec.noise_std);
    Ok(PartitionedDataset::new(x, y, stacked_blocks(spec.b, spec.rows_per_block))?.with_truth(beta))
}

/// Two dominant blocks `D₁ = D₂ = ½(G − (b−2)ρI)` and padding blocks `D_j = ρI`.
///
/// The padding blocks sit exactly at `rho_p`; the dominant blocks must stay above it,
/// which needs `λ_min(G) > b·rho_p`. Below that the padding blocks set the rate at ½.
pub fn gen_two_dominant(spec: &GenSpec, rho_p: f64) -> Result<PartitionedDataset> {
    spec.check_shape()?;
    if spec.b < 3 {
        return Err(CoreError::InfeasibleParameters(
            "need b >= 3; with two centers use the equal-block generator".into(),
        ));
    }
    if !(rho_p > 0.0) {
        return Err(CoreError::InfeasibleParameters(format!("rho must be positive, got {rho_p}")));
    }
    let lam = spec.spectrum()?;
    let shift = (spec.b - 2) as f64 * rho_p;
    let lmin = lam.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin - spec.b as f64 * rho_p <= 0.0 {
        return Err(CoreError::InfeasibleParameters(format!(
            "dominant blocks need smallest eigenvalue {lmin} > b·rho = {}",
            spec.b as f64 * rho_p
        )));
    }
    if spec.rows_per_block < spec.p {
        return Err(CoreError::InfeasibleParameters("rows_per_block < p".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let v = random_orthonormal_columns(spec.p, spec.p, &mut rng);
    let w: Vec<f64> = lam.iter().map(|l| 0.5 * (l - shift)).collect();
    let dominant = sqrt_factor(&v, &w);
    let pad = Matrix::scaled_identity(spec.p, rho_p.sqrt());
    let mut factors = vec![dominant.clone(), dominant];
    factors.extend(std::iter::repeat(pad).take(spec.b - 2));
    let x = from_factors(&factors, spec.rows_per_block, &mut rng);
    let (y, beta) = linear_response(&x, &mut rng, spec.noise_std);
    Ok(PartitionedDataset::new(x, y, stacked_blocks(spec.b, spec.rows_per_block))?.with_truth(beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PaperExample {
    ScenarioOne,
    ScenarioTwo,
}

/// The two-center, single-feature examples with the normalized entries printed to four digits.
pub fn gen_paper_example(which: PaperExample) -> PartitionedDataset {
    let col = match which {
        PaperExample::ScenarioOne => [0.7379, 0.0075, 0.6708, 0.0745],
        PaperExample::ScenarioTwo => [0.7379, 0.6708, 0.0075, 0.0745],
    };
    let x = Matrix::column(&col);
    PartitionedDataset::new(x, vec![1.0; 4], vec![vec![0, 1], vec![2, 3]])
        .expect("fixed example is valid")
}

/// Two centers of `s` rows `(1, ξ)/√s`. Center 1 draws `ξ` with variance `epsilon`,
/// center 2 with variance `1/epsilon`, so `A₁ → diag(1, ε)` and `A₂ → diag(1, 1/ε)`.
pub fn gen_pcg_construction(epsilon: f64, s: usize, seed: u64) -> Result<PartitionedDataset> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(CoreError::BadEpsilon(epsilon));
    }
    if s < 2 {
        return Err(CoreError::InfeasibleParameters(format!("s must be >= 2, got {s}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (s as f64).sqrt();
    let sd = [epsilon.sqrt(), 1.0 / epsilon.sqrt()];
    let mut data = Vec::with_capacity(4 * s);
    for sdi in sd {
        for _ in 0..s {
            let xi: f64 = rng.sample(StandardNormal);
            data.push(scale);
            data.push(scale * sdi * xi);
        }
    }
    let x = Matrix::from_vec(2 * s, 2, data)?;
    let beta = vec![1.0, -1.0];
    let mut y = x.matvec(&beta);
    for v in y.iter_mut() {
        *v += 0.1 * scale * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(PartitionedDataset::new(x, y, stacked_blocks(2, s))?.with_truth(beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntryDist {
    /// Standard normal entries.
    Gaussian,
    /// Entries uniform on `[0, 1)`.
    Uniform,
    /// Uniform entries plus a constant offset.
    Shifted { offset: f64 },
}

impl EntryDist {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            EntryDist::Gaussian => rng.sample(StandardNormal),
            EntryDist::Uniform => rng.random::<f64>(),
            EntryDist::Shifted { offset } => rng.random::<f64>() + offset,
        }
    }
}

/// I.i.d. entries, same distribution in every center.
pub fn gen_random(spec: &GenSpec, dist: EntryDist) -> Result<PartitionedDataset> {
    gen_heterogeneous(spec, &vec![dist; spec.b])
}

/// I.i.d. entries with one distribution per center.
pub fn gen_heterogeneous(spec: &GenSpec, dists: &[EntryDist]) -> Result<PartitionedDataset> {
    spec.check_shape()?;
    if dists.len() != spec.b {
        return Err(CoreError::LengthMismatch(dists.len(), spec.b));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (s, p) = (spec.rows_per_block, spec.p);
    let mut data = Vec::with_capacity(spec.b * s * p);
    for d in dists {
        for _ in 0..s * p {
            data.push(d.draw(&mut rng));
        }
    }
    let mut x = Matrix::from_vec(spec.b * s, p, data)?;
    if spec.normalize {
        x = datashare_linalg::frobenius_normalize(&x)?;
    }
    let (y, beta) = linear_response(&x, &mut rng, spec.noise_std);
    Ok(PartitionedDataset::new(x, y, stacked_blocks(spec.b, s))?.with_truth(beta))
}

/// Gaussian features with ±1 labels drawn from the logistic model at `β ~ N(0, I/p)`.
pub fn gen_logistic(spec: &GenSpec) -> Result<PartitionedDataset> {
    spec.check_shape()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.b * spec.rows_per_block;
    let p = spec.p;
    let data: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    let x = Matrix::from_vec(n, p, data)?;
    let sd = 1.0 / (p as f64).sqrt();
    let beta: Vec<f64> = (0..p).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
    let u = x.matvec(&beta);
    let y = u
        .iter()
        .map(|&ui| {
            let coin = Bernoulli::new(sigmoid(ui)).expect("probability in [0, 1]");
            if coin.sample(&mut rng) {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Ok(PartitionedDataset::new(x, y, contiguous_blocks(n, spec.b))?.with_truth(beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::block_grams;

    #[test]
    fn equal_blocks_have_equal_grams() {
        let spec = GenSpec::new(3, 3, 5, 1).with_spectrum(vec![0.5, 0.3, 0.2]);
        let ds = gen_equal_blocks(&spec).unwrap();
        let g = block_grams(&ds, true).unwrap();
        for i in 1..3 {
            assert!(g.d[i].sub(&g.d[0]).max_abs() <= 1e-12);
        }
        assert!((g.qbar - 0.5).abs() < 1e-12 && (g.qmin - 0.2).abs() < 1e-12);
        assert!(ds.block_x(0).sub(&ds.block_x(1)).max_abs() > 1e-3);
    }

    #[test]
    fn equal_blocks_scalar_case() {
        let ds = gen_equal_blocks(&GenSpec::new(2, 1, 3, 4).with_spectrum(vec![1.0])).unwrap();
        let g = block_grams(&ds, true).unwrap();
        assert!((g.d[0][(0, 0)] - 0.5).abs() < 1e-12);
        assert!((g.d[1][(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn equal_blocks_isotropic() {
        let ds = gen_equal_blocks(&GenSpec::new(2, 2, 4, 4).with_spectrum(vec![0.5, 0.5])).unwrap();
        let g = block_grams(&ds, true).unwrap();
        assert!(g.d[0].sub(&Matrix::scaled_identity(2, 0.25)).max_abs() < 1e-12);
    }

    #[test]
    fn equal_blocks_infeasible() {
        assert!(gen_equal_blocks(&GenSpec::new(2, 3, 2, 0)).is_err());
        assert!(gen_equal_blocks(&GenSpec::new(2, 2, 4, 0).with_spectrum(vec![0.5])).is_err());
        assert!(gen_equal_blocks(&GenSpec::new(2, 2, 4, 0).with_spectrum(vec![0.5, -0.1])).is_err());
    }

    #[test]
    fn two_dominant_scalar() {
        let ds = gen_two_dominant(&GenSpec::new(3, 1, 2, 0).with_spectrum(vec![0.9]), 0.05).unwrap();
        let g = block_grams(&ds, true).unwrap();
        assert!((g.d[0][(0, 0)] - 0.425).abs() < 1e-12);
        assert!((g.d[1][(0, 0)] - 0.425).abs() < 1e-12);
        assert!((g.d[2][(0, 0)] - 0.05).abs() < 1e-12);
        assert!((g.q1 - 0.05).abs() < 1e-10);
    }

    #[test]
    fn two_dominant_rejects_two_centers() {
        let r = gen_two_dominant(&GenSpec::new(2, 1, 2, 0).with_spectrum(vec![0.9]), 0.05);
        assert!(matches!(r, Err(CoreError::InfeasibleParameters(_))));
        let r = gen_two_dominant(&GenSpec::new(4, 1, 2, 0).with_spectrum(vec![0.9]), 0.5);
        assert!(matches!(r, Err(CoreError::InfeasibleParameters(_))));
    }

    #[test]
    fn paper_examples_share_global_gram() {
        let a = gen_paper_example(PaperExample::ScenarioOne);
        let b = gen_paper_example(PaperExample::ScenarioTwo);
        assert!((a.x.gram()[(0, 0)] - b.x.gram()[(0, 0)]).abs() < 1e-12);
        assert_eq!(b.block_x(1).col(0), vec![0.0075, 0.0745]);
    }

    #[test]
    fn pcg_construction_limits() {
        let ds = gen_pcg_construction(0.1, 20000, 5).unwrap();
        let g = block_grams(&ds, true).unwrap();
        assert!((g.d[0][(0, 0)] - 1.0).abs() < 1e-12);
        assert!((g.d[0][(1, 1)] - 0.1).abs() < 0.01);
        assert!((g.d[1][(1, 1)] - 10.0).abs() < 0.5);
        assert!(matches!(gen_pcg_construction(0.0, 10, 0), Err(CoreError::BadEpsilon(_))));
        assert!(matches!(gen_pcg_construction(1.5, 10, 0), Err(CoreError::BadEpsilon(_))));
    }

    #[test]
    fn pcg_construction_symmetric_at_one() {
        let ds = gen_pcg_construction(1.0, 50000, 2).unwrap();
        let g = block_grams(&ds, true).unwrap();
        assert!(g.d[0].sub(&g.d[1]).max_abs() < 0.03);
    }

    #[test]
    fn random_is_reproducible_and_shifted() {
        let spec = GenSpec::new(2, 3, 4, 11);
        let a = gen_random(&spec, EntryDist::Gaussian).unwrap();
        let b = gen_random(&spec, EntryDist::Gaussian).unwrap();
        assert_eq!(a, b);
        let u = gen_random(&spec, EntryDist::Uniform).unwrap();
        let s = gen_random(&spec, EntryDist::Shifted { offset: 10.0 }).unwrap();
        assert!(s.x.sub(&u.x).as_slice().iter().all(|d| (d - 10.0).abs() < 1e-12));
    }

    #[test]
    fn logistic_labels_are_signs() {
        let ds = gen_logistic(&GenSpec::new(2, 3, 20, 3)).unwrap();
        assert!(crate::problem::check_labels(&ds.y).is_ok());
        assert!(ds.y.iter().any(|v| *v > 0.0) && ds.y.iter().any(|v| *v < 0.0));
    }
}
