//! Consensus curves, graph-family comparison and MSE-vs-WCE ensembles.

use crate::design::{
    signal_errors, Criterion, ErrorNorm, FilterKind, LinearTarget, SignalEnsemble,
};
use crate::error::Result;
use crate::experiments::{
    best_constant_weights, design_degree, gaussian_mat, kind_label, model_label, run_trials,
    ExperimentConfig, ExperimentKind, ExperimentOutput, Record,
};
use crate::graph::generate_with;
use crate::linalg::{rel_frobenius, RMat};

const KINDS: [FilterKind; 2] = [FilterKind::NodeInvariant, FilterKind::NodeVariant];

/// Mean per-signal error `‖Hx − Bx‖` over the columns of `x`.
fn signal_error(h: &RMat, b: &RMat, x: &RMat) -> f64 {
    let d = (h - b) * x;
    d.column_iter().map(|c| c.norm()).sum::<f64>() / x.ncols() as f64
}

/// Node-invariant and node-variant redesign per degree against the
/// best-constant baseline `W^K`. Group `signal` holds `‖x̂ − B_con x‖`,
/// group `frobenius` holds `‖H − B_con‖_F / ‖B_con‖_F`.
pub fn run_consensus(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let trials = run_trials(config, |_, rng| {
        let g = generate_with(&config.graph, rng)?;
        let shift = config.shift.build(&g)?;
        let n = g.n();
        let target = LinearTarget::consensus(n);
        let b = target.b().clone();
        let x = gaussian_mat(n, config.ensemble.signals, rng);
        let w = best_constant_weights(&g)?;
        let mut records = Vec::new();
        let mut w_pow = RMat::identity(n, n);
        for _ in 0..config.k_min {
            w_pow = &w * w_pow;
        }
        for k in config.degrees() {
            for kind in KINDS {
                let h = design_degree(config, kind, &shift, &target, k)?.dense(&shift);
                records.push(Record::new(
                    "signal",
                    kind_label(kind),
                    k,
                    signal_error(&h, &b, &x),
                ));
                records.push(Record::new(
                    "frobenius",
                    kind_label(kind),
                    k,
                    rel_frobenius(&h, &b),
                ));
            }
            records.push(Record::new(
                "signal",
                "baseline",
                k,
                signal_error(&w_pow, &b, &x),
            ));
            records.push(Record::new(
                "frobenius",
                "baseline",
                k,
                rel_frobenius(&w_pow, &b),
            ));
            w_pow = &w * w_pow;
        }
        Ok(records)
    })?;
    let notes = vec![
        "baseline: best-constant weights W = I - alpha L stand in for the FDLA matrix".to_string(),
    ];
    Ok(ExperimentOutput::from_trials(
        ExperimentKind::Consensus,
        trials,
        notes,
    ))
}

/// Consensus error per graph family, one group per family.
pub fn run_graph_families(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let trials = run_trials(config, |_, rng| {
        let mut records = Vec::new();
        for family in &config.families {
            let g = generate_with(family, rng)?;
            let shift = config.shift.build(&g)?;
            let n = g.n();
            let target = LinearTarget::consensus(n);
            let x = gaussian_mat(n, config.ensemble.signals, rng);
            for k in config.degrees() {
                for kind in KINDS {
                    let h = design_degree(config, kind, &shift, &target, k)?.dense(&shift);
                    records.push(Record::new(
                        model_label(&family.model),
                        kind_label(kind),
                        k,
                        signal_error(&h, target.b(), &x),
                    ));
                }
            }
        }
        Ok(records)
    })?;
    Ok(ExperimentOutput::from_trials(
        ExperimentKind::GraphFamilies,
        trials,
        Vec::new(),
    ))
}

/// Node-invariant MSE and WCE designs evaluated on one large ensemble per
/// trial. Each trial contributes its per-signal errors, so the `mean` and
/// `max` statistics are taken over all signals. Group `certified` holds 1
/// for WCE designs whose duality gap met the tolerance and 0 otherwise.
pub fn run_mse_vs_wce(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    use rand::RngCore;
    let trials = run_trials(config, |_, rng| {
        let g = generate_with(&config.graph, rng)?;
        let shift = config.shift.build(&g)?;
        let n = g.n();
        let target = LinearTarget::consensus(n);
        let ensemble = SignalEnsemble::white(n, config.ensemble.signals, rng.next_u64());
        let mut records = Vec::new();
        for k in config.degrees() {
            for (label, criterion) in [("mse", Criterion::Mse), ("wce", Criterion::Wce)] {
                let cfg = ExperimentConfig {
                    criterion,
                    ..config.clone()
                };
                let report = design_degree(&cfg, FilterKind::NodeInvariant, &shift, &target, k)?;
                if let Some(cert) = &report.wce {
                    records.push(Record::new(
                        "certified",
                        label,
                        k,
                        f64::from(u8::from(cert.certified)),
                    ));
                }
                let errors = signal_errors(
                    &report.dense(&shift),
                    target.b(),
                    &ensemble,
                    ErrorNorm::Absolute,
                )?;
                records.extend(
                    errors
                        .into_iter()
                        .map(|e| Record::new("signals", label, k, e)),
                );
            }
        }
        Ok(records)
    })?;
    let notes = vec![
        "statistics of group `signals` are taken over every signal of every trial".to_string(),
    ];
    Ok(ExperimentOutput::from_trials(
        ExperimentKind::MseVsWce,
        trials,
        notes,
    ))
}
