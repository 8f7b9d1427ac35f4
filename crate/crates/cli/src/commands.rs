//! Subcommand bodies.

use std::fs;
use std::io::{self, Write};

use serde_json::json;

use graphfilt::design::{
    design_anc, design_mse_node_invariant, design_mse_node_variant, design_perfect_node_invariant,
    design_perfect_node_variant, design_wce_node_invariant, design_wce_node_variant, Criterion,
    DesignReport, FilterKind, WceOptions,
};
use graphfilt::experiments::{run, ExperimentConfig, ExperimentKind, Manifest};
use graphfilt::filters::Filter;
use graphfilt::netsim::{simulate_with, SimMode, SimOptions};
use graphfilt::shift_design::{build_rank_one_shift, RankOneTarget, Subgraph};
use graphfilt::spectral::decompose;
use graphfilt::{Error, Result};

use crate::{
    inputs, DesignArgs, ExpArgs, ShiftDesignArgs, SimulateArgs, SpectrumArgs, SubgraphArg,
};

/// Writes `text` to `path`, or to stdout when absent; a closed pipe ends output quietly.
fn emit(path: Option<&str>, text: &str) -> Result<()> {
    let Some(p) = path else {
        let mut out = io::stdout().lock();
        return match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        };
    };
    fs::write(p, text)?;
    Ok(())
}

fn with_newline(mut text: String) -> String {
    if !text.ends_with('\n') {
        text.push('\n');
    }
    text
}

fn solve(args: &DesignArgs, order: usize) -> Result<DesignReport> {
    let shift = inputs::shift(&args.shift.shift, args.shift.shift_kind)?;
    let target = inputs::with_covariance(inputs::target(&args.target, shift.n())?, &args.rx)?;
    let kind = FilterKind::from(args.mode);
    let criterion = Criterion::from(args.criterion);
    if criterion == Criterion::Frobenius && args.rx != "identity" {
        return Err(Error::Parameter(
            "the frobenius criterion takes no input covariance".into(),
        ));
    }
    if target.anc_map().is_some() {
        return match criterion {
            Criterion::Mse | Criterion::Frobenius => {
                design_anc(&shift, &target, order, kind, args.reduction.into())
            }
            _ => Err(Error::Parameter(
                "ANC targets support the mse and frobenius criteria".into(),
            )),
        };
    }
    let report = match (criterion, kind) {
        (Criterion::Perfect, FilterKind::NodeInvariant) => {
            design_perfect_node_invariant(&shift, &decompose(&shift, None)?, &target, order)
        }
        (Criterion::Perfect, FilterKind::NodeVariant) => {
            design_perfect_node_variant(&shift, &decompose(&shift, None)?, &target, Some(order))
        }
        (Criterion::Mse | Criterion::Frobenius, FilterKind::NodeInvariant) => {
            design_mse_node_invariant(&shift, &target, order)
        }
        (Criterion::Mse | Criterion::Frobenius, FilterKind::NodeVariant) => {
            design_mse_node_variant(&shift, &target, order)
        }
        (Criterion::Wce, FilterKind::NodeInvariant) => {
            design_wce_node_invariant(&shift, &target, order, &WceOptions::default())
        }
        (Criterion::Wce, FilterKind::NodeVariant) => {
            design_wce_node_variant(&shift, &target, order, &WceOptions::default())
        }
    }?;
    Ok(DesignReport {
        criterion,
        ..report
    })
}

pub fn design(args: &DesignArgs) -> Result<()> {
    let report = match solve(args, args.order + 1) {
        Err(Error::Convergence {
            iterations,
            gap,
            best,
        }) => {
            emit(args.out.as_deref(), &with_newline(best.to_json()?))?;
            return Err(Error::Convergence {
                iterations,
                gap,
                best,
            });
        }
        other => other?,
    };
    if let Some(path) = &args.filter_out {
        fs::write(
            path,
            report.filter().to_json(Some(args.shift.shift.clone()))?,
        )?;
    }
    emit(args.out.as_deref(), &with_newline(report.to_json()?))
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let shift = inputs::shift(&args.shift.shift, args.shift.shift_kind)?;
    let filter = Filter::from_json(&fs::read_to_string(&args.filter)?)?;
    let x = inputs::signal(&args.signal, shift.n())?;
    let mode = args
        .mode
        .map_or_else(|| SimMode::for_filter(&filter), SimMode::from);
    let trace = simulate_with(
        &shift,
        &filter,
        &x,
        mode,
        SimOptions {
            record_history: args.trace.is_some(),
        },
    )?;
    if let Some(path) = &args.trace {
        fs::write(path, serde_json::to_string_pretty(&trace)?)?;
    }
    let summary = json!({ "mode": trace.mode, "rounds": trace.rounds, "output": trace.outputs });
    emit(None, &with_newline(serde_json::to_string_pretty(&summary)?))
}

pub fn spectrum(args: &SpectrumArgs) -> Result<()> {
    let shift = inputs::shift(&args.shift.shift, args.shift.shift_kind)?;
    let spec = decompose(&shift, args.tol)?;
    let lambda: Vec<[f64; 2]> = spec.lambda.iter().map(|z| [z.re, z.im]).collect();
    let doc = json!({
        "n": spec.n(),
        "distinct": spec.distinct(),
        "tol": spec.tol,
        "orthogonal": spec.orthogonal,
        "reconstruction_error": spec.reconstruction_error(shift.matrix()),
        "lambda": lambda,
        "classes": spec.classes,
    });
    emit(None, &with_newline(serde_json::to_string_pretty(&doc)?))
}

pub fn shift_design(args: &ShiftDesignArgs) -> Result<()> {
    let g = inputs::graph(&args.graph)?;
    let n = g.n();
    let target = RankOneTarget::new(
        inputs::eigenvector(&args.a_vec, n)?,
        inputs::eigenvector(&args.b_vec, n)?,
    )?;
    let subgraph = match args.subgraph {
        SubgraphArg::Full => Subgraph::FullGraph,
        SubgraphArg::Tree => Subgraph::BfsTree { root: args.root },
    };
    let built = build_rank_one_shift(&g, &target, args.mu, subgraph)?;
    emit(args.out.as_deref(), &built.shift.to_edge_list())?;
    emit(
        args.certificate.as_deref(),
        &with_newline(serde_json::to_string_pretty(&built.certificate)?),
    )
}

fn config(kind: ExperimentKind, args: &ExpArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_toml(&fs::read_to_string(path)?, Some(kind))?,
        None => ExperimentConfig::defaults(kind),
    };
    config.seed = args.seed.unwrap_or(config.seed);
    config.trials = args.trials.unwrap_or(config.trials);
    config.k_min = args.k_min.unwrap_or(config.k_min);
    config.k_max = args.k_max.unwrap_or(config.k_max);
    if let Some(out) = &args.out {
        config.output.csv = Some(out.clone());
    }
    if let Some(manifest) = &args.manifest {
        config.output.manifest = Some(manifest.clone());
    }
    config.validate()?;
    Ok(config)
}

pub fn experiment(kind: ExperimentKind, args: &ExpArgs) -> Result<()> {
    let config = config(kind, args)?;
    let output = run(&config)?;
    let csv = output.to_csv_string()?;
    let manifest_path = config.output.manifest.clone().or_else(|| {
        config
            .output
            .csv
            .as_ref()
            .map(|p| format!("{p}.manifest.json"))
    });
    emit(config.output.csv.as_deref(), &csv)?;
    if let Some(path) = manifest_path {
        fs::write(path, Manifest::new(&config, &output)?.to_json()?)?;
    }
    Ok(())
}
