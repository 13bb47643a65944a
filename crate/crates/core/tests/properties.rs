use datashare_core::generate::{gen_random, EntryDist, GenSpec};
use datashare_core::pcg::*;
use datashare_core::problem::*;
use datashare_core::reference::direct_ls;
use datashare_core::sharing::{assemble_round, build_pool};
use datashare_core::solver::*;
use datashare_core::spectral::{build_md, build_mp, cyclic_rate_fn, cyclic_rate_root};
use datashare_linalg::vector;
use proptest::prelude::*;

fn dataset(b: usize, p: usize, rows: usize, seed: u64) -> PartitionedDataset {
    let mut spec = GenSpec::new(b, p, rows, seed);
    spec.normalize = true;
    gen_random(&spec, EntryDist::Gaussian).unwrap()
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pool_splits_each_center(b in 2usize..5, rows in 4usize..20, alpha in 0.0f64..60.0, seed in any::<u64>()) {
        let ds = dataset(b, 2, rows, seed);
        let plan = build_pool(&ds, alpha, seed).unwrap();
        prop_assert_eq!(plan.m, (alpha * ds.n() as f64 / 100.0 + 1e-9).floor() as usize);
        prop_assert_eq!(plan.pooled_rows().len(), plan.m);
        for i in 0..b {
            let both = sorted(plan.pool[i].iter().chain(&plan.local[i]).copied().collect());
            prop_assert_eq!(both, sorted(ds.blocks[i].clone()));
        }
    }

    #[test]
    fn every_round_keeps_rows_and_block_sizes(b in 2usize..5, rows in 4usize..15, seed in any::<u64>(), round in 0u64..1000) {
        let ds = dataset(b, 2, rows, seed);
        let plan = build_pool(&ds, 30.0, seed).unwrap();
        let a = assemble_round(&plan, round);
        let all = sorted(a.assembled.iter().flatten().copied().collect());
        prop_assert_eq!(all, (0..ds.n()).collect::<Vec<_>>());
        prop_assert_eq!(a.assembled.iter().map(Vec::len).collect::<Vec<_>>(), plan.block_sizes());
        prop_assert_eq!(sorted(a.xi.clone()), (0..b).collect::<Vec<_>>());
        prop_assert_eq!(a, assemble_round(&plan, round));
    }

    #[test]
    fn primal_rate_ignores_center_labels(b in 2usize..5, p in 1usize..4, rho in 0.1f64..4.0, seed in any::<u64>(), shift in 1usize..4) {
        let ds = dataset(b, p, p + 3, seed);
        let g = block_grams(&ds, true).unwrap();
        let mut d = g.d.clone();
        d.rotate_left(shift % b);
        let rotated = BlockGrams::from_blocks(d).unwrap();
        let r1 = build_mp(&g, rho).unwrap().spectral_radius().unwrap();
        let r2 = build_mp(&rotated, rho).unwrap().spectral_radius().unwrap();
        prop_assert!((r1 - r2).abs() <= 1e-9, "{} vs {}", r1, r2);
    }

    #[test]
    fn dual_map_is_primal_map_at_reciprocal_step(b in 2usize..5, p in 1usize..4, rho in 0.1f64..5.0, seed in any::<u64>()) {
        let g = block_grams(&dataset(b, p, p + 2, seed), true).unwrap();
        let diff = build_mp(&g, rho).unwrap().matrix.sub(&build_md(&g, 1.0 / rho).unwrap().matrix).max_abs();
        prop_assert!(diff <= 1e-11, "{}", diff);
    }

    #[test]
    fn cyclic_root_solves_rate_equation(b in 2usize..5, q in 0.01f64..0.99) {
        let x = cyclic_rate_root(b, q).unwrap();
        prop_assert!(x > 0.5 && x < 1.0);
        prop_assert!((cyclic_rate_fn(b, x) - q / b as f64).abs() <= 1e-9);
    }

    #[test]
    fn preconditioners_agree_on_the_solution(b in 2usize..4, p in 1usize..6, seed in any::<u64>()) {
        let ds = dataset(b, p, 3 * p + 4, seed);
        let star = direct_ls(&ds.x, &ds.y, 0.0).unwrap();
        let plan = build_pool(&ds, 25.0, seed).unwrap();
        prop_assume!(plan.pool.iter().all(|r| !r.is_empty()));
        let opts = PcgOptions::default();
        for pre in [build_identity(&ds), build_local_precond(&ds).unwrap(), build_global_precond(&ds, &plan, false).unwrap()] {
            let (beta, trace) = pcg_run(&ds, &pre, &opts).unwrap();
            prop_assert!(trace.converged);
            prop_assert!(trace.iterations <= p + 2, "{} iterations for p = {}", trace.iterations, p);
            let last = trace.relative_residual.len() - 1;
            prop_assert!((trace.relative_residual[last] - trace.recursive_residual[last]).abs() <= 1e-7);
            let scale = 1.0f64.max(vector::norm2(&star));
            prop_assert!(vector::dist2(&beta, &star) <= 1e-6 * scale);
        }
    }

    #[test]
    fn tspace_running_sum_matches_rows(b in 2usize..5, p in 1usize..4, seed in any::<u64>(), alpha in 0.0f64..0.5) {
        let ds = dataset(b, p, p + 4, seed);
        let plan = build_pool(&ds, 40.0, seed).unwrap();
        let mut it = TspaceLs::new(&ds.x, &ds.y, &plan, alpha, 1.0, SweepPattern::Permuted).unwrap();
        for _ in 0..5 {
            it.step().unwrap();
            let err = vector::dist2(it.g(), &it.recomputed_g());
            prop_assert!(err <= 1e-10 * 1.0f64.max(vector::norm2(it.g())), "{}", err);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dual_feasibility_drift_vanishes(b in 2usize..4, p in 1usize..3, seed in any::<u64>()) {
        let ds = dataset(b, p, p + 6, seed);
        let mut it = DualDistributed::new(&ds, 0.0, 1.0).unwrap();
        for _ in 0..4000 {
            it.step().unwrap();
        }
        let drift = vector::norm_inf(&it.v_sum());
        prop_assert!(drift <= 1e-8, "{:e}", drift);
    }
}
