//! End-to-end behaviour of the experiment runners and their outputs.

use graphfilt::experiments::{
    content_hash, draw_rank_one_target, run, EnsembleSpec, ExperimentConfig, ExperimentKind,
    Manifest, ShiftChoice,
};
use graphfilt::graph::{generate_with, GeneratorConfig, GraphModel};

fn config(kind: ExperimentKind, trials: usize, k_min: usize, k_max: usize) -> ExperimentConfig {
    ExperimentConfig {
        trials,
        k_min,
        k_max,
        ..ExperimentConfig::defaults(kind)
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

#[test]
fn csv_is_byte_identical_across_runs_and_thread_counts() {
    for kind in ExperimentKind::ALL {
        let mut cfg = config(kind, 3, 0, 2);
        cfg.ensemble.signals = cfg.ensemble.signals.min(50);
        let one = in_pool(1, || run(&cfg).unwrap().to_csv_string().unwrap());
        let four = in_pool(4, || run(&cfg).unwrap().to_csv_string().unwrap());
        let again = run(&cfg).unwrap().to_csv_string().unwrap();
        assert_eq!(one, four, "{}", kind.name());
        assert_eq!(one, again, "{}", kind.name());
        assert!(one.starts_with("experiment,trial_group,method,K,stat,value\n"));
    }
}

#[test]
fn different_seeds_give_different_curves() {
    let a = run(&config(ExperimentKind::Consensus, 3, 0, 2))
        .unwrap()
        .to_csv_string()
        .unwrap();
    let b = run(&ExperimentConfig {
        seed: 2,
        ..config(ExperimentKind::Consensus, 3, 0, 2)
    })
    .unwrap();
    assert_ne!(a, b.to_csv_string().unwrap());
}

#[test]
fn manifest_echoes_config_and_hash() {
    let cfg = config(ExperimentKind::Consensus, 2, 0, 1);
    let out = run(&cfg).unwrap();
    let manifest = Manifest::new(&cfg, &out).unwrap();
    let echo = cfg.to_toml().unwrap();
    assert_eq!(manifest.config_hash, content_hash(echo.as_bytes()));
    assert_eq!(manifest.seed, cfg.seed);
    let json: serde_json::Value = serde_json::from_str(&manifest.to_json().unwrap()).unwrap();
    assert_eq!(json["config_hash"].as_str().unwrap().len(), 64);
    assert!(json["notes"].to_string().contains("FDLA"));
}

#[test]
fn two_node_consensus_is_exact_after_one_exchange() {
    let mut cfg = config(ExperimentKind::Consensus, 3, 1, 1);
    cfg.graph = GeneratorConfig::new(GraphModel::ErdosRenyi { p_edge: 1.0 }, 2);
    let out = run(&cfg).unwrap();
    for method in ["node-invariant", "node-variant"] {
        assert!(
            out.stat("signal", method, 1, "max").unwrap() < 1e-12,
            "{method}"
        );
    }
}

#[test]
fn small_world_consensus_is_perfect_at_degree_nine_and_beats_baseline() {
    let out = run(&config(ExperimentKind::Consensus, 20, 0, 9)).unwrap();
    for method in ["node-invariant", "node-variant"] {
        assert!(
            out.stat("signal", method, 9, "mean").unwrap() < 1e-6,
            "{method}"
        );
        for k in 0..=9 {
            assert!(
                out.stat("signal", method, k, "mean").unwrap()
                    <= out.stat("signal", "baseline", k, "mean").unwrap() + 1e-12
            );
        }
    }
}

#[test]
fn star_family_reaches_consensus_in_two_exchanges() {
    let mut cfg = config(ExperimentKind::GraphFamilies, 2, 0, 3);
    cfg.families.retain(|f| matches!(f.model, GraphModel::Star));
    let out = run(&cfg).unwrap();
    assert!(out.stat("star", "node-invariant", 2, "max").unwrap() < 1e-8);
    assert!(out.stat("star", "node-invariant", 1, "mean").unwrap() > 1e-3);
}

#[test]
fn anc_correlation_helps_and_node_invariant_b_r_stays_poor() {
    let mut cfg = config(ExperimentKind::Anc, 5, 0, 9);
    cfg.ensemble = EnsembleSpec {
        signals: 20,
        rhos: vec![0.0, 1.0],
    };
    let out = run(&cfg).unwrap();
    for k in 0..=9 {
        assert!(
            out.stat("rho=0", "node-invariant/B_R", k, "mean").unwrap() > 0.5,
            "K={k}"
        );
        for method in [
            "node-invariant/B_SR",
            "node-variant/B_SR",
            "node-variant/B_R",
        ] {
            let (r1, r0) = (
                out.stat("rho=1", method, k, "mean").unwrap(),
                out.stat("rho=0", method, k, "mean").unwrap(),
            );
            assert!(r1 <= r0 + 1e-9, "{method} K={k}: {r1} > {r0}");
        }
    }
}

#[test]
fn shift_design_degree_zero_matches_scalar_least_squares() {
    let cfg = config(ExperimentKind::ShiftDesign, 5, 0, 0);
    let out = run(&cfg).unwrap();
    for t in 0..cfg.trials {
        let mut rng = cfg.trial_rng(t);
        let g = generate_with(&cfg.graph, &mut rng).unwrap();
        let b = draw_rank_one_target(g.n(), &mut rng).unwrap().matrix();
        let c0 = b.trace() / g.n() as f64;
        let oracle = (&b - graphfilt::linalg::RMat::identity(g.n(), g.n()) * c0).norm() / b.norm();
        for method in ["S1", "S2", "S3"] {
            let e = out.series("error", method, 0).unwrap().values[t];
            assert!(
                (e - oracle).abs() < 1e-10,
                "trial {t} {method}: {e} vs {oracle}"
            );
        }
    }
}

#[test]
fn random_weight_shift_cannot_implement_rank_one_targets() {
    let out = run(&config(ExperimentKind::ShiftDesign, 10, 9, 9)).unwrap();
    assert!(out.stat("error", "S1", 9, "mean").unwrap() > 0.5);
    assert!(out.stat("error", "S3", 9, "median").unwrap() < 1e-8);
}

#[test]
fn robustness_is_exact_when_eigenvectors_are_shared() {
    let mut cfg = config(ExperimentKind::Robustness, 10, 9, 9);
    cfg.perturbation.sigmas = vec![0.0];
    cfg.perturbation.qs = vec![10];
    let out = run(&cfg).unwrap();
    assert!(out.stat("sigma=0", "node-invariant", 9, "median").unwrap() < 1e-8);
    assert!(out.stat("Q=10", "node-invariant", 9, "median").unwrap() < 1e-8);
}

#[test]
fn mse_design_has_lower_mean_error_than_wce() {
    let mut cfg = config(ExperimentKind::MseVsWce, 1, 0, 4);
    cfg.graph = GeneratorConfig::new(
        GraphModel::ScaleFree {
            m_init: 3,
            m_attach: 2,
        },
        12,
    )
    .connected(true);
    cfg.ensemble.signals = 2000;
    let out = run(&cfg).unwrap();
    for k in 0..=4 {
        let (mse, wce) = (
            out.stat("signals", "mse", k, "mean").unwrap(),
            out.stat("signals", "wce", k, "mean").unwrap(),
        );
        assert!(mse <= wce * (1.0 + 1e-9), "K={k}: {mse} > {wce}");
    }
}

#[test]
fn toml_round_trip_reproduces_the_run() {
    let cfg = ExperimentConfig {
        shift: ShiftChoice::Laplacian,
        ..config(ExperimentKind::Consensus, 2, 0, 3)
    };
    let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap(), None).unwrap();
    assert_eq!(
        run(&cfg).unwrap().to_csv_string().unwrap(),
        run(&back).unwrap().to_csv_string().unwrap()
    );
}
