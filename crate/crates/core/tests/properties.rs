//! Randomised invariants of the design, simulation and experiment layers.

use graphfilt::design::{
    design_mse_node_invariant, design_mse_node_variant, design_wce_node_invariant, Coefficients,
    LinearTarget, WceOptions,
};
use graphfilt::experiments::{
    best_constant_weights, perturbed_basis, run, shared_basis, ExperimentConfig, ExperimentKind,
};
use graphfilt::filters::{
    Filter, NodeInvariantFilter, NodeVariantFilter, NodeVariantMode, ProductFormFilter,
};
use graphfilt::graph::{generate, shift_from_graph, GeneratorConfig, GraphModel, ShiftKind};
use graphfilt::linalg::{spectral_norm, sym_eigen_desc, CVec, RMat, RVec, C64};
use graphfilt::netsim::{simulate, SimMode};
use graphfilt::shift_design::{build_rank_one_shift, RankOneTarget, Subgraph};
use graphfilt::spectral::{apply_in_frequency, decompose, GraphSignal, ShiftOperator};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn connected_er(n: usize, p: f64, seed: u64) -> graphfilt::graph::Graph {
    generate(
        &GeneratorConfig::new(GraphModel::ErdosRenyi { p_edge: p }, n)
            .seed(seed)
            .connected(true),
    )
    .expect("connected ER graph")
}

fn shift(n: usize, p: f64, seed: u64, kind: ShiftKind) -> ShiftOperator {
    shift_from_graph(&connected_er(n, p, seed), kind).expect("shift")
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize) -> RVec {
    RVec::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn uniform_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> RMat {
    RMat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn rel(a: &RVec, b: &RVec) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn simulation_matches_dense_in_every_mode(n in 3usize..12, order in 1usize..6, p in 0.3f64..0.8, seed: u64) {
        let s = shift(n, p, seed, ShiftKind::Adjacency);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = uniform_vec(&mut rng, n);
        let filters: Vec<(Filter, SimMode)> = vec![
            (NodeInvariantFilter::new((0..order).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap().into(), SimMode::ShiftAccumulate),
            (NodeVariantFilter::new(uniform_mat(&mut rng, order, n), NodeVariantMode::TypeI).unwrap().into(), SimMode::ShiftAccumulate),
            (NodeVariantFilter::new(uniform_mat(&mut rng, order, n), NodeVariantMode::TypeII).unwrap().into(), SimMode::TypeII),
            (ProductFormFilter::new(rng.random_range(0.5..2.0), (1..order).map(|_| rng.random_range(-1.0..1.0)).collect()).into(), SimMode::ProductForm),
        ];
        for (filter, mode) in filters {
            let dense = filter.eval_dense(&s, &x).unwrap();
            let sim = simulate(&s, &filter, &x, mode).unwrap().output();
            prop_assert!(rel(&sim, &dense) < 1e-10, "{mode:?}: {}", rel(&sim, &dense));
        }
    }

    #[test]
    fn frequency_application_matches_dense(n in 3usize..12, p in 0.3f64..0.8, seed: u64) {
        let s = shift(n, p, seed, ShiftKind::Adjacency);
        let spec = decompose(&s, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let c: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = uniform_vec(&mut rng, n);
        let dense = NodeInvariantFilter::new(c.clone()).unwrap().dense(s.matrix()) * &x;
        let cc = CVec::from_iterator(4, c.iter().map(|&v| C64::new(v, 0.0)));
        let freq = apply_in_frequency(&spec, &cc, &GraphSignal::from_real(&x)).to_real().unwrap();
        prop_assert!(rel(&freq, &dense) < 1e-10);
    }

    #[test]
    fn node_variant_nests_node_invariant_and_both_improve_with_order(n in 3usize..10, p in 0.3f64..0.8, seed: u64) {
        let s = shift(n, p, seed, ShiftKind::Laplacian);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let target = LinearTarget::new(uniform_mat(&mut rng, n, n)).unwrap();
        let (mut prev_ni, mut prev_nv) = (f64::INFINITY, f64::INFINITY);
        for order in 1..=n {
            let ni = design_mse_node_invariant(&s, &target, order).unwrap().residuals.frob_rel;
            let nv = design_mse_node_variant(&s, &target, order).unwrap().residuals.frob_rel;
            prop_assert!(nv <= ni + 1e-10, "order {order}: nv {nv} > ni {ni}");
            prop_assert!(ni <= prev_ni + 1e-10, "order {order}: ni {prev_ni} -> {ni}");
            prop_assert!(nv <= prev_nv + 1e-10, "order {order}: nv {prev_nv} -> {nv}");
            prev_ni = ni;
            prev_nv = nv;
        }
    }

    #[test]
    fn mse_design_is_locally_optimal(n in 3usize..10, p in 0.3f64..0.8, seed: u64) {
        let s = shift(n, p, seed, ShiftKind::Adjacency);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let target = LinearTarget::new(uniform_mat(&mut rng, n, n)).unwrap();
        let order = rng.random_range(1..n);
        let report = design_mse_node_invariant(&s, &target, order).unwrap();
        let Coefficients::NodeInvariant { c } = &report.coefficients else { unreachable!() };
        for j in 0..order {
            for eps in [1e-4, -1e-4] {
                let mut perturbed = c.clone();
                perturbed[j] += eps;
                let h = NodeInvariantFilter::new(perturbed).unwrap().dense(s.matrix());
                prop_assert!((h - target.b()).norm_squared() >= report.residuals.trace_rd * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn rank_one_shifts_are_certified(n in 5usize..12, seed: u64, tree in any::<bool>()) {
        let g = connected_er(n, 0.5, seed);
        let target = RankOneTarget::random_positive(n, seed).unwrap();
        let subgraph = if tree { Subgraph::BfsTree { root: 0 } } else { Subgraph::FullGraph };
        prop_assert!(build_rank_one_shift(&g, &target, 0.0, subgraph).is_ok());
    }

    #[test]
    fn best_constant_weights_preserve_average_and_contract(n in 3usize..15, p in 0.2f64..0.8, seed: u64) {
        let g = connected_er(n, p, seed);
        let w = best_constant_weights(&g).unwrap();
        let ones = RVec::from_element(n, 1.0);
        prop_assert!((&w * &ones - &ones).norm() < 1e-12);
        let b_con = RMat::from_element(n, n, 1.0 / n as f64);
        let radius = sym_eigen_desc(&(&w - &b_con)).0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(radius < 1.0);
    }

    #[test]
    fn perturbed_bases_have_unit_columns_and_bounded_condition(n in 3usize..12, sigma in 0.0f64..0.5, q in 0usize..12, seed: u64) {
        let s = shift(n, 0.5, seed, ShiftKind::Adjacency);
        let (_, v) = sym_eigen_desc(s.matrix());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 4);
        for basis in [perturbed_basis(&v, sigma, &mut rng).unwrap(), shared_basis(&v, q.min(n), &mut rng).unwrap()] {
            for col in basis.column_iter() {
                prop_assert!((col.norm() - 1.0).abs() < 1e-12);
            }
            let inv = basis.clone().try_inverse().expect("invertible basis");
            prop_assert!(spectral_norm(&basis) * spectral_norm(&inv) <= 1e12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn wce_certificate_brackets_the_value(n in 3usize..8, order in 1usize..4, seed: u64) {
        let s = shift(n, 0.5, seed, ShiftKind::Laplacian);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 5);
        let target = LinearTarget::new(uniform_mat(&mut rng, n, n)).unwrap();
        let report = match design_wce_node_invariant(&s, &target, order, &WceOptions::default()) {
            Ok(r) => r,
            Err(graphfilt::Error::Convergence { best, .. }) => *best,
            Err(e) => panic!("{e}"),
        };
        let cert = report.wce.expect("certificate");
        prop_assert!(cert.lower_bound <= cert.value * (1.0 + 1e-12));
        prop_assert!(cert.value <= report.residuals.lambda_max_rd * (1.0 + 1e-9));
    }

    #[test]
    fn consensus_curves_are_reproducible_and_non_increasing_per_trial(seed: u64) {
        let cfg = ExperimentConfig { seed, trials: 6, k_max: 9, ..ExperimentConfig::defaults(ExperimentKind::Consensus) };
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        prop_assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
        for method in ["node-invariant", "node-variant"] {
            for t in 0..cfg.trials {
                let mut prev = f64::INFINITY;
                for k in cfg.degrees() {
                    let e = a.series("frobenius", method, k).unwrap().values[t];
                    prop_assert!(e <= prev + 1e-10, "{method} trial {t} K={k}: {prev} -> {e}");
                    prev = e;
                }
            }
        }
    }
}
