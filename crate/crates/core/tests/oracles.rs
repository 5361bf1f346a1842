use ghforecast::rf::{fit_tree, ForestConfig, RegressionTree};
use ghforecast::svr::{self, SvrConfig};
use ghforecast_testkit::{cart, svr as dual};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_svr_problem(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>, SvrConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=6);
    let d = rng.random_range(1..=3);
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let y = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
    let cfg = SvrConfig {
        c: [0.5, 1.0, 10.0][rng.random_range(0..3)],
        gamma: [0.1, 0.5, 2.0][rng.random_range(0..3)],
        epsilon: [0.0, 0.05, 0.2][rng.random_range(0..3)],
        ..SvrConfig::default()
    };
    (x, y, cfg)
}

#[test]
fn smo_matches_projected_gradient_dual() {
    for seed in 0..50 {
        let (x, y, cfg) = random_svr_problem(seed);
        let m = svr::fit_smo(&x, &y, &cfg).unwrap();
        assert!(m.converged, "seed {seed}");
        let reference = dual::solve(&x, &y, cfg.c, cfg.gamma, cfg.epsilon, 20_000);
        assert!(
            (m.dual_objective - reference.objective).abs() < 1e-3,
            "seed {seed}: {} vs {}",
            m.dual_objective,
            reference.objective
        );
        let mut probe = x.clone();
        probe.push(vec![0.3; x[0].len()]);
        for q in &probe {
            let a = m.predict(q).unwrap();
            let b = dual::predict(&x, &reference, cfg.gamma, q);
            assert!((a - b).abs() < 1e-3, "seed {seed}: f = {a} vs {b}");
        }
    }
}

#[test]
fn smo_kkt_and_balance() {
    for seed in 0..50 {
        let (x, y, cfg) = random_svr_problem(seed);
        let m = svr::fit_smo(&x, &y, &cfg).unwrap();
        assert!(svr::kkt_violation(&m, &x, &y).unwrap() <= cfg.tolerance);
        assert!(m.coefficients.iter().sum::<f64>().abs() < 1e-9);
        assert!(m.coefficients.iter().all(|b| b.abs() <= cfg.c));
    }
}

/// Training rows grouped by the leaf they reach.
fn leaf_partition(tree: &RegressionTree, x: &[Vec<f64>]) -> cart::Partition {
    let mut groups = std::collections::BTreeMap::<usize, Vec<usize>>::new();
    for (i, row) in x.iter().enumerate() {
        let mut id = 0;
        loop {
            let n = &tree.nodes[id];
            match (n.feature, n.threshold, n.left, n.right) {
                (Some(f), Some(t), Some(l), Some(r)) => id = if row[f] <= t { l } else { r },
                _ => break,
            }
        }
        groups.entry(id).or_default().push(i);
    }
    cart::canonical(groups.into_values().collect())
}

fn full_tree(x: &[Vec<f64>], y: &[f64], depth: usize) -> RegressionTree {
    let cfg = ForestConfig {
        n_trees: 1,
        max_depth: Some(depth),
        features_per_split: Some(x[0].len()),
        bootstrap: false,
        ..ForestConfig::default()
    };
    fit_tree(x, y, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
}

fn small_dataset(grid: bool) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, usize)> {
    (1usize..=2, 1usize..=8, 1usize..=2).prop_flat_map(move |(d, n, depth)| {
        let value = if grid {
            (0i32..4).prop_map(|v| v as f64 * 0.25).boxed()
        } else {
            (-1.0f64..1.0).boxed()
        };
        let target = if grid {
            (-2i32..3).prop_map(f64::from).boxed()
        } else {
            (-1.0f64..1.0).boxed()
        };
        (
            prop::collection::vec(prop::collection::vec(value, d), n),
            prop::collection::vec(target, n),
            Just(depth),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn tree_matches_exhaustive_cart_with_ties((x, y, depth) in small_dataset(true)) {
        let tree = full_tree(&x, &y, depth);
        let ours = leaf_partition(&tree, &x);
        let oracle = cart::canonical(cart::greedy(&x, &y, depth, ghforecast::rf::SPLIT_TIE_TOLERANCE));
        prop_assert_eq!(cart::partition_loss(&y, &ours), cart::partition_loss(&y, &oracle));
        prop_assert_eq!(ours, oracle);
    }

    #[test]
    fn tree_matches_exhaustive_cart_continuous((x, y, depth) in small_dataset(false)) {
        let tree = full_tree(&x, &y, depth);
        let ours = leaf_partition(&tree, &x);
        let oracle = cart::canonical(cart::greedy(&x, &y, depth, ghforecast::rf::SPLIT_TIE_TOLERANCE));
        prop_assert_eq!(cart::partition_loss(&y, &ours), cart::partition_loss(&y, &oracle));
        prop_assert_eq!(ours, oracle);
    }

    #[test]
    fn greedy_loss_never_beats_the_optimum((x, y, depth) in small_dataset(false)) {
        let tree = full_tree(&x, &y, depth);
        let rows: Vec<usize> = (0..y.len()).collect();
        let greedy = cart::partition_loss(&y, &leaf_partition(&tree, &x));
        prop_assert!(greedy >= cart::optimal_loss(&x, &y, &rows, depth) - 1e-12);
        prop_assert!(tree.depth() <= depth);
    }
}
