//! Seeded sweeps that check the rate formulas against measured spectral radii.

use std::fmt;
use std::str::FromStr;

use datashare_linalg::{spd_condition_number, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::generate::{gen_equal_blocks, gen_pcg_construction, gen_random, gen_two_dominant, EntryDist, GenSpec};
use crate::pcg::{build_global_precond, build_local_precond, precond_condition_report};
use crate::problem::{block_grams, contiguous_blocks, BlockGrams, PartitionedDataset};
use crate::sharing::build_pool;
use crate::spectral::*;

/// Additive slack absorbing eigensolver error in bound checks.
pub const BOUND_SLACK: f64 = 1e-9;
/// Agreement required where a bound is attained.
pub const EQUALITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Thm1,
    Thm2,
    Prop1,
    Prop2,
    Prop5,
    Cyclic,
    Rp,
    PcgCond,
}

impl Suite {
    pub const ALL: [Suite; 8] =
        [Suite::Thm1, Suite::Thm2, Suite::Prop1, Suite::Prop2, Suite::Prop5, Suite::Cyclic, Suite::Rp, Suite::PcgCond];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Thm1 => "thm1",
            Suite::Thm2 => "thm2",
            Suite::Prop1 => "prop1",
            Suite::Prop2 => "prop2",
            Suite::Prop5 => "prop5",
            Suite::Cyclic => "cyclic",
            Suite::Rp => "rp",
            Suite::PcgCond => "pcg_cond",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s || x.name().replace('_', "-") == s)
            .ok_or_else(|| CoreError::UnknownMethod(format!("suite {s}")))
    }
}

/// How a record is judged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Check {
    /// `measured ≤ bound + tol`
    AtMost { tol: f64 },
    /// `measured < bound`
    Below,
    /// `|measured − bound| ≤ tol`
    Equal { tol: f64 },
}

impl Check {
    fn holds(self, measured: f64, bound: f64) -> bool {
        match self {
            Check::AtMost { tol } => measured <= bound + tol,
            Check::Below => measured < bound,
            Check::Equal { tol } => (measured - bound).abs() <= tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub case: String,
    pub report: RateReport,
    pub check: Check,
    pub pass: bool,
}

impl TrialRecord {
    fn new(case: String, measured: f64, bound: f64, kind: BoundKind, check: Check) -> Self {
        let pass = measured.is_finite() && check.holds(measured, bound);
        TrialRecord { case, report: RateReport::new(measured, bound, kind), check, pass }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub trials: usize,
    pub records: Vec<TrialRecord>,
    pub failures: usize,
    pub pass: bool,
}

impl SuiteReport {
    fn new(suite: Suite, seed: u64, trials: usize, records: Vec<TrialRecord>) -> Self {
        let failures = records.iter().filter(|r| !r.pass).count();
        SuiteReport { suite, seed, trials, records, failures, pass: failures == 0 }
    }

    /// Smallest slack among records of `kind`.
    pub fn min_slack(&self, kind: BoundKind) -> Option<f64> {
        self.records.iter().filter(|r| r.report.bound_kind == kind).map(|r| r.report.slack).reduce(f64::min)
    }
}

/// Runs one suite with `trials` instances per case.
pub fn verify_theory(suite: Suite, seed: u64, trials: usize) -> Result<SuiteReport> {
    let records = match suite {
        Suite::Thm1 => thm1(seed, trials)?,
        Suite::Thm2 => thm2(seed, trials)?,
        Suite::Prop1 => prop1(seed, trials)?,
        Suite::Prop2 => prop2(seed, trials)?,
        Suite::Prop5 => prop5(seed, trials)?,
        Suite::Cyclic => cyclic(seed, trials)?,
        Suite::Rp => rp(seed, trials)?,
        Suite::PcgCond => pcg_cond(seed)?,
    };
    Ok(SuiteReport::new(suite, seed, trials, records))
}

fn trial_rng(seed: u64, tag: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(k as u64);
    rng
}

/// Random spectrum for `XᵀX` with entries in `(0, 1)` and total below one.
fn normalized_spectrum(p: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..p).map(|_| rng.random_range(0.05..1.0)).collect();
    let total = rng.random_range(0.5..0.99) / raw.iter().sum::<f64>();
    raw.iter().map(|v| v * total).collect()
}

/// Normalized Gaussian data with nonsingular blocks.
fn random_instance(b: usize, p: usize, rng: &mut ChaCha8Rng) -> Result<BlockGrams> {
    random_instance_rows(b, p, p + rng.random_range(1..=4), rng)
}

fn random_instance_rows(b: usize, p: usize, rows: usize, rng: &mut ChaCha8Rng) -> Result<BlockGrams> {
    let mut spec = GenSpec::new(b, p, rows, rng.random());
    spec.normalize = true;
    let ds = gen_random(&spec, EntryDist::Gaussian)?;
    block_grams(&ds, true)
}

fn equal_instance(b: usize, p: usize, rng: &mut ChaCha8Rng) -> Result<BlockGrams> {
    let spec = GenSpec::new(b, p, p + 2, rng.random()).with_spectrum(normalized_spectrum(p, rng));
    block_grams(&gen_equal_blocks(&spec)?, true)
}

fn radius_mp(g: &BlockGrams, rho: f64) -> Result<f64> {
    build_mp(g, rho)?.spectral_radius()
}

/// Runs `f` over `(case, k)` pairs in parallel, keeping case order.
fn sweep<C: Sync, F>(cases: &[C], trials: usize, f: F) -> Result<Vec<TrialRecord>>
where
    F: Fn(&C, usize) -> Result<Vec<TrialRecord>> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..cases.len()).flat_map(|c| (0..trials).map(move |k| (c, k))).collect();
    let out: Result<Vec<Vec<TrialRecord>>> = jobs.par_iter().map(|&(c, k)| f(&cases[c], k)).collect();
    Ok(out?.into_iter().flatten().collect())
}

fn bp_cases(bs: &[usize], ps: &[usize]) -> Vec<(usize, usize)> {
    bs.iter().flat_map(|&b| ps.iter().map(move |&p| (b, p))).collect()
}

fn thm1(seed: u64, trials: usize) -> Result<Vec<TrialRecord>> {
    let cases = bp_cases(&[2, 3, 4, 5], &[1, 2, 3]);
    let mut out = sweep(&cases, trials, |&(b, p), k| {
        let mut rng = trial_rng(seed, 1, k * 64 + b * 8 + p);
        let g = random_instance(b, p, &mut rng)?;
        let rho = g.qbar * rng.random_range(1.01..4.0);
        let bound = bound_large_step(b, rho, g.qmin);
        let r = radius_mp(&g, rho)?;
        Ok(vec![TrialRecord::new(format!("b={b} p={p} k={k}"), r, bound, BoundKind::LargeStep, Check::AtMost { tol: BOUND_SLACK })])
    })?;
    out.extend(sweep(&cases, 1, |&(b, p), k| {
        let mut rng = trial_rng(seed, 2, k * 64 + b * 8 + p);
        let g = equal_instance(b, p, &mut rng)?;
        let rho = g.qbar * rng.random_range(1.01..4.0);
        let r = radius_mp(&g, rho)?;
        let bound = bound_large_step(b, rho, g.qmin);
        Ok(vec![TrialRecord::new(format!("equal b={b} p={p}"), r, bound, BoundKind::LargeStep, Check::Equal { tol: EQUALITY_TOL })])
    })?);
    Ok(out)
}

fn thm2(seed: u64, trials: usize) -> Result<Vec<TrialRecord>> {
    let ps = [1usize, 2, 3];
    let mut out = sweep(&ps, trials, |&p, k| {
        let mut rng = trial_rng(seed, 3, k * 8 + p);
        let g = random_instance(2, p, &mut rng)?;
        let rho = g.q1 * rng.random_range(0.05..0.95);
        let r = radius_mp(&g, rho)?;
        let bound = bound_small_step_b2(rho, g.qbar);
        Ok(vec![TrialRecord::new(format!("p={p} k={k}"), r, bound, BoundKind::SmallStepTwoCenters, Check::AtMost { tol: BOUND_SLACK })])
    })?;
    out.extend(sweep(&ps, 1, |&p, _| {
        let mut rng = trial_rng(seed, 4, p);
        let g = equal_instance(2, p, &mut rng)?;
        let rho = g.q1 * rng.random_range(0.05..0.95);
        let r = radius_mp(&g, rho)?;
        let bound = bound_small_step_b2(rho, g.qbar);
        Ok(vec![TrialRecord::new(format!("equal p={p}"), r, bound, BoundKind::SmallStepTwoCenters, Check::Equal { tol: EQUALITY_TOL })])
    })?);
    Ok(out)
}

fn prop1(seed: u64, trials: usize) -> Result<Vec<TrialRecord>> {
    let cases = bp_cases(&[3, 4, 5], &[1, 2, 3]);
    sweep(&cases, trials, |&(b, p), k| {
        let mut rng = trial_rng(seed, 5, k * 64 + b * 8 + p);
        let lam = normalized_spectrum(p, &mut rng);
        let lmin = lam.iter().cloned().fold(f64::INFINITY, f64::min);
        let rho = rng.random_range(0.05..0.95) * lmin / b as f64;
        let spec = GenSpec::new(b, p, p + 1, rng.random()).with_spectrum(lam);
        let g = block_grams(&gen_two_dominant(&spec, rho)?, true)?;
        let r = radius_mp(&g, rho)?;
        let bounds = bounds_small_step_general(b, rho, g.qbar);
        let case = format!("b={b} p={p} k={k}");
        Ok(vec![
            TrialRecord::new(case.clone(), r, bounds.constructed, BoundKind::Constructed, Check::Equal { tol: EQUALITY_TOL }),
            TrialRecord::new(case.clone(), r, bounds.loose, BoundKind::SmallStepLoose, Check::AtMost { tol: BOUND_SLACK }),
            TrialRecord::new(case, bounds.equal_block, bounds.constructed, BoundKind::EqualBlock, Check::AtMost { tol: 1e-15 }),
        ])
    })
}

fn prop2(seed: u64, trials: usize) -> Result<Vec<TrialRecord>> {
    let bs = [2usize, 3, 4];
    let per = trials.div_ceil(bs.len());
    sweep(&bs, per, |&b, k| {
        let mut rng = trial_rng(seed, 6, k * 8 + b);
        let p = rng.random_range(1..=3);
        // Tall blocks keep q_min away from zero, where both radii round to one.
        let rows = p + rng.random_range(8..=16);
        let g = random_instance_rows(b, p, rows, &mut rng)?;
        let (s1, s2) = gd_crossover(b, g.qbar, g.qmin, g.q1);
        let rho = if s1 > 0.0 && rng.random_bool(0.5) {
            s1 * rng.random_range(0.01..0.99)
        } else {
            s2 * rng.random_range(1.01..2.99)
        };
        let r = radius_mp(&g, rho)?;
        let gd = build_mgd(&g.total(), rho).spectral_radius()?;
        Ok(vec![TrialRecord::new(format!("b={b} p={p} rho={rho:.6} k={k}"), r, gd, BoundKind::GradientDescent, Check::Below)])
    })
}

fn prop5(seed: u64, trials: usize) -> Result<Vec<TrialRecord>> {
    sweep(&[()], trials, |_, k| {
        let mut rng = trial_rng(seed, 7, k);
        let (b, p) = (rng.random_range(2..=4), rng.random_range(1..=3));
        let g = random_instance(b, p, &mut rng)?;
        let rho = rng.random_range(0.1..5.0);
        let diff = build_mp(&g, rho)?.matrix.sub(&build_md(&g, 1.0 / rho)?.matrix).max_abs();
        Ok(vec![TrialRecord::new(format!("b={b} p={p} rho={rho:.6}"), diff, 1e-12, BoundKind::DualEquivalence, Check::AtMost { tol: 0.0 })])
    })
}

fn cyclic(seed: u64, trials: usize) -> Result<Vec<TrialRecord>> {
    let cases = bp_cases(&[2, 3, 4], &[1, 2, 3]);
    sweep(&cases, trials, |&(b, p), k| {
        let mut rng = trial_rng(seed, 8, k * 64 + b * 8 + p);
        let g = equal_instance(b, p, &mut rng)?;
        let order: Vec<usize> = (0..b).collect();
        let r = build_mc(&g, 1.0, &order)?.spectral_radius()?;
        let root = cyclic_rate_root(b, g.qmin)?;
        let dist = b as f64 / (b as f64 + g.qmin);
        let case = format!("b={b} p={p} k={k}");
        Ok(vec![
            TrialRecord::new(case.clone(), r, root, BoundKind::CyclicRoot, Check::Equal { tol: 1e-6 }),
            TrialRecord::new(case, r, dist, BoundKind::DistributedRate, Check::Below),
        ])
    })
}

fn rp(seed: u64, trials: usize) -> Result<Vec<TrialRecord>> {
    let cases = bp_cases(&[2, 3, 4], &[1, 2]);
    sweep(&cases, trials, |&(b, p), k| {
        let mut rng = trial_rng(seed, 9, k * 64 + b * 8 + p);
        let g = equal_instance(b, p, &mut rng)?;
        let r = rp_expected_map(&g, 1.0)?.spectral_radius()?;
        let dist = b as f64 / (b as f64 + g.qmin);
        let worst = itertools::Itertools::permutations(0..b, b)
            .map(|o| build_mc(&g, 1.0, &o).and_then(|m| m.spectral_radius()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let case = format!("b={b} p={p} k={k}");
        Ok(vec![
            TrialRecord::new(case.clone(), r, dist, BoundKind::DistributedRate, Check::Below),
            TrialRecord::new(case, r, worst, BoundKind::CyclicRoot, Check::AtMost { tol: 1e-12 }),
        ])
    })
}

/// Limit matrices `A₁ = diag(1, ε)`, `A₂ = diag(1, 1/ε)` as a two-center dataset.
pub fn pcg_limit_dataset(epsilon: f64) -> Result<PartitionedDataset> {
    let x = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, epsilon.sqrt()], &[1.0, 0.0], &[0.0, 1.0 / epsilon.sqrt()]]);
    PartitionedDataset::new(x, vec![1.0; 4], contiguous_blocks(4, 2))
}

/// Analytic `(κ(H₁A), κ(H₂A), κ(H_local A))` for the limit matrices.
pub fn pcg_analytic_triple(epsilon: f64) -> (f64, f64, f64) {
    let e2 = epsilon * epsilon;
    ((e2 + 1.0) / (2.0 * e2), 2.0 / (1.0 + e2), (e2 + 1.0).powi(2) / (4.0 * e2))
}

fn pcg_cond(seed: u64) -> Result<Vec<TrialRecord>> {
    let eps = 0.1;
    let lim = pcg_limit_dataset(eps)?;
    let a = lim.x.gram();
    let local = build_local_precond(&lim)?;
    let (k1, k2, kl) = pcg_analytic_triple(eps);
    let mut out = vec![
        TrialRecord::new("H1 limit".into(), spd_condition_number(&local.h[0], &a)?, k1, BoundKind::ConditionNumber, Check::Equal { tol: 1e-6 }),
        TrialRecord::new("H2 limit".into(), spd_condition_number(&local.h[1], &a)?, k2, BoundKind::ConditionNumber, Check::Equal { tol: 1e-6 }),
        TrialRecord::new("Hlocal limit".into(), precond_condition_report(&lim, &local)?, kl, BoundKind::ConditionNumber, Check::Equal { tol: 1e-6 }),
    ];
    let ds = gen_pcg_construction(eps, 10_000, seed)?;
    let plan = build_pool(&ds, 5.0, seed)?;
    let k_local = precond_condition_report(&ds, &build_local_precond(&ds)?)?;
    let k_global = precond_condition_report(&ds, &build_global_precond(&ds, &plan, false)?)?;
    out.push(TrialRecord::new("sampled global vs local".into(), k_global, k_local, BoundKind::ConditionNumber, Check::Below));
    out.push(TrialRecord::new("sampled global".into(), k_global, 1.2, BoundKind::ConditionNumber, Check::AtMost { tol: 0.0 }));
    Ok(out)
}
