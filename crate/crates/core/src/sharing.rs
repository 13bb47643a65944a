//! Shared data pool and the per-round reassembly of centers around it.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::problem::PartitionedDataset;

/// Rows sampled into the global pool, grouped by the center they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharingPlan {
    pub alpha_percent: f64,
    /// `r_i`: pooled global rows contributed by center `i`.
    pub pool: Vec<Vec<usize>>,
    /// `l_i`: rows center `i` keeps to itself.
    pub local: Vec<Vec<usize>>,
    pub m: usize,
    /// Master seed for per-round assemblies.
    pub seed: u64,
}

/// Samples `⌊α n / 100⌋` rows uniformly without replacement.
pub fn build_pool(ds: &PartitionedDataset, alpha_percent: f64, seed: u64) -> Result<SharingPlan> {
    if !(0.0..=100.0).contains(&alpha_percent) {
        return Err(CoreError::OutOfRange(format!("alpha must be in [0, 100], got {alpha_percent}")));
    }
    let n = ds.n();
    let m = ((alpha_percent * n as f64 / 100.0) + 1e-9).floor() as usize;
    let m = m.min(n);
    let mut pooled = vec![false; n];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for r in index::sample(&mut rng, n, m) {
        pooled[r] = true;
    }
    let (pool, local) = ds
        .blocks
        .iter()
        .map(|blk| blk.iter().partition::<Vec<usize>, _>(|&&r| pooled[r]))
        .unzip();
    Ok(SharingPlan { alpha_percent, pool, local, m, seed })
}

impl SharingPlan {
    pub fn b(&self) -> usize {
        self.pool.len()
    }

    /// All pooled rows in center order.
    pub fn pooled_rows(&self) -> Vec<usize> {
        self.pool.iter().flatten().copied().collect()
    }

    /// Errors when the pool is nonempty but smaller than the number of centers.
    ///
    /// An empty pool is accepted; the rounds then only permute the sweep order.
    pub fn check_for_reassembly(&self) -> Result<()> {
        if self.m > 0 && self.m < self.b() {
            return Err(CoreError::PoolTooSmall { m: self.m, b: self.b() });
        }
        Ok(())
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.pool.iter().zip(&self.local).map(|(r, l)| r.len() + l.len()).collect()
    }
}

/// One round's reshuffled pool and block update order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundAssembly {
    pub round: u64,
    /// Permuted pool rows, consumed in order by centers `0..b` in chunks of `|r_i|`.
    pub sigma: Vec<usize>,
    /// Block update order.
    pub xi: Vec<usize>,
    /// Rows held by each center this round, `l_i ∪ σ(r)_i`.
    pub assembled: Vec<Vec<usize>>,
}

impl RoundAssembly {
    /// The assembly that leaves every row where it started.
    pub fn identity(plan: &SharingPlan) -> Self {
        let assembled = plan
            .local
            .iter()
            .zip(&plan.pool)
            .map(|(l, r)| l.iter().chain(r).copied().collect())
            .collect();
        RoundAssembly { round: 0, sigma: plan.pooled_rows(), xi: (0..plan.b()).collect(), assembled }
    }
}

/// Per-round randomness comes from an independent stream of the master seed.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

pub fn assemble_round(plan: &SharingPlan, round: u64) -> RoundAssembly {
    let mut rng = round_rng(plan.seed, round);
    let mut sigma = plan.pooled_rows();
    sigma.shuffle(&mut rng);
    let mut xi: Vec<usize> = (0..plan.b()).collect();
    xi.shuffle(&mut rng);
    let mut offset = 0;
    let assembled = plan
        .local
        .iter()
        .zip(&plan.pool)
        .map(|(l, r)| {
            let got = &sigma[offset..offset + r.len()];
            offset += r.len();
            l.iter().chain(got).copied().collect()
        })
        .collect();
    RoundAssembly { round, sigma, xi, assembled }
}

/// Moves the whole pool to `target`; every other center keeps only its local rows.
pub fn allocate_pool_to_one_center(
    ds: &PartitionedDataset,
    plan: &SharingPlan,
    target: usize,
) -> Result<PartitionedDataset> {
    if target >= plan.b() {
        return Err(CoreError::OutOfRange(format!("center {target} does not exist")));
    }
    let mut blocks = plan.local.clone();
    for (i, blk) in blocks.iter().enumerate() {
        if i != target && blk.is_empty() {
            return Err(CoreError::EmptyResidualBlock(i));
        }
    }
    blocks[target].extend(plan.pooled_rows());
    ds.repartition(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{partition_rows, PartitionStrategy};
    use datashare_linalg::Matrix;
    use std::collections::HashMap;

    fn dataset(n: usize, b: usize) -> PartitionedDataset {
        let x = Matrix::from_fn(n, 2, |i, j| (i + j) as f64);
        partition_rows(x, vec![0.0; n], b, PartitionStrategy::Contiguous).unwrap()
    }

    #[test]
    fn pool_size_is_floor() {
        let plan = build_pool(&dataset(100, 4), 5.0, 1).unwrap();
        assert_eq!(plan.m, 5);
        assert_eq!(plan.pooled_rows().len(), 5);
        let plan = build_pool(&dataset(99, 4), 5.0, 1).unwrap();
        assert_eq!(plan.m, 4);
    }

    #[test]
    fn pool_extremes() {
        let ds = dataset(10, 2);
        let none = build_pool(&ds, 0.0, 3).unwrap();
        assert_eq!(none.m, 0);
        assert_eq!(none.local, ds.blocks);
        let all = build_pool(&ds, 100.0, 3).unwrap();
        assert!(all.local.iter().all(Vec::is_empty));
        assert_eq!(all.pool, ds.blocks);
        assert!(build_pool(&ds, 101.0, 3).is_err());
    }

    #[test]
    fn small_pool_rejected_for_reassembly() {
        let plan = build_pool(&dataset(20, 4), 10.0, 0).unwrap();
        assert_eq!(plan.m, 2);
        assert!(matches!(plan.check_for_reassembly(), Err(CoreError::PoolTooSmall { m: 2, b: 4 })));
        assert!(build_pool(&dataset(20, 4), 0.0, 0).unwrap().check_for_reassembly().is_ok());
    }

    #[test]
    fn two_row_pool_keeps_or_swaps() {
        let ds = dataset(10, 2);
        let plan = SharingPlan {
            alpha_percent: 20.0,
            pool: vec![vec![3], vec![7]],
            local: vec![vec![0, 1, 2, 4], vec![5, 6, 8, 9]],
            m: 2,
            seed: 42,
        };
        let _ = ds;
        let (mut kept, mut swapped) = (0, 0);
        for round in 0..64 {
            let a = assemble_round(&plan, round);
            match a.assembled[0].last() {
                Some(3) => kept += 1,
                Some(7) => swapped += 1,
                other => panic!("unexpected {other:?}"),
            }
        }
        assert!(kept > 0 && swapped > 0);
    }

    #[test]
    fn identity_assembly_matches_blocks() {
        let ds = dataset(40, 3);
        let plan = build_pool(&ds, 25.0, 5).unwrap();
        let id = RoundAssembly::identity(&plan);
        for (a, blk) in id.assembled.iter().zip(&ds.blocks) {
            let mut a = a.clone();
            a.sort_unstable();
            assert_eq!(&a, blk);
        }
    }

    #[test]
    fn order_frequencies_are_uniform() {
        let plan = build_pool(&dataset(30, 3), 20.0, 8).unwrap();
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for round in 0..1000 {
            *counts.entry(assemble_round(&plan, round).xi).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for c in counts.values() {
            let f = *c as f64 / 1000.0;
            assert!((f - 1.0 / 6.0).abs() < 0.05, "{f}");
        }
    }

    #[test]
    fn one_center_allocation() {
        let ds = dataset(10, 2);
        let none = build_pool(&ds, 0.0, 1).unwrap();
        assert_eq!(allocate_pool_to_one_center(&ds, &none, 0).unwrap().blocks, ds.blocks);
        let plan = SharingPlan {
            alpha_percent: 50.0,
            pool: vec![vec![0], vec![5, 6, 7, 8, 9]],
            local: vec![vec![1, 2, 3, 4], vec![]],
            m: 6,
            seed: 0,
        };
        assert!(matches!(
            allocate_pool_to_one_center(&ds, &plan, 0),
            Err(CoreError::EmptyResidualBlock(1))
        ));
    }

    #[test]
    fn plan_json_roundtrip() {
        let plan = build_pool(&dataset(20, 2), 30.0, 2).unwrap();
        let s = serde_json::to_string(&plan).unwrap();
        let back: SharingPlan = serde_json::from_str(&s).unwrap();
        assert_eq!(plan, back);
    }
}
