//! Parsing of shift, target, covariance, vector and graph arguments.

use graphfilt::design::{draw_signals, LinearTarget, SignalEnsemble};
use graphfilt::experiments::correlated_root;
use graphfilt::graph::{generate, shift_from_graph, GeneratorConfig, Graph, GraphModel, ShiftKind};
use graphfilt::linalg::{RMat, RVec};
use graphfilt::shift_design::RankOneTarget;
use graphfilt::spectral::ShiftOperator;
use graphfilt::{Error, Result};

use crate::ShiftKindArg;

fn field<T: std::str::FromStr>(parts: &[&str], i: usize, spec: &str) -> Result<T> {
    parts
        .get(i)
        .ok_or_else(|| Error::Parameter(format!("generator `{spec}` is missing field {i}")))?
        .parse()
        .map_err(|_| Error::Parameter(format!("generator `{spec}` has a malformed field {i}")))
}

/// Generator specs `er:N:P[:SEED]`, `sw:N:K:P[:SEED]`, `sf:N:M0:M[:SEED]`,
/// `star:N`, `cycle:N`, `dcycle:N`; anything else is read as an edge-list file.
pub fn graph(spec: &str) -> Result<Graph> {
    let parts: Vec<&str> = spec.split(':').collect();
    let seed = |i: usize| -> Result<u64> {
        if parts.len() > i {
            field(&parts, i, spec)
        } else {
            Ok(0)
        }
    };
    let config = match parts[0] {
        "er" => GeneratorConfig::new(
            GraphModel::ErdosRenyi {
                p_edge: field(&parts, 2, spec)?,
            },
            field(&parts, 1, spec)?,
        )
        .seed(seed(3)?)
        .connected(true),
        "sw" => GeneratorConfig::new(
            GraphModel::SmallWorld {
                mean_degree: field(&parts, 2, spec)?,
                p_rewire: field(&parts, 3, spec)?,
            },
            field(&parts, 1, spec)?,
        )
        .seed(seed(4)?)
        .connected(true),
        "sf" => GeneratorConfig::new(
            GraphModel::ScaleFree {
                m_init: field(&parts, 2, spec)?,
                m_attach: field(&parts, 3, spec)?,
            },
            field(&parts, 1, spec)?,
        )
        .seed(seed(4)?)
        .connected(true),
        "star" => GeneratorConfig::new(GraphModel::Star, field(&parts, 1, spec)?),
        "cycle" => GeneratorConfig::new(GraphModel::Cycle, field(&parts, 1, spec)?),
        "dcycle" => GeneratorConfig::new(GraphModel::DirectedCycle, field(&parts, 1, spec)?),
        _ => return Graph::read(spec),
    };
    generate(&config)
}

pub fn shift(spec: &str, kind: ShiftKindArg) -> Result<ShiftOperator> {
    let kind = match kind {
        ShiftKindArg::Raw => return ShiftOperator::read(spec),
        ShiftKindArg::Adjacency => ShiftKind::Adjacency,
        ShiftKindArg::Laplacian => ShiftKind::Laplacian,
        ShiftKindArg::ConsensusCorollary => ShiftKind::ConsensusCorollary,
    };
    shift_from_graph(&graph(spec)?, kind)
}

fn numbers(text: &str, path: &str) -> Result<Vec<Vec<f64>>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.parse()
                        .map_err(|_| Error::Format(format!("`{t}` in {path} is not a number")))
                })
                .collect()
        })
        .collect()
}

/// Whitespace- or comma-separated rows.
pub fn matrix_file(path: &str) -> Result<RMat> {
    let rows = numbers(&std::fs::read_to_string(path)?, path)?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Format(format!(
            "rows of {path} have different lengths"
        )));
    }
    Ok(RMat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Numbers separated by whitespace, commas or newlines.
pub fn vector_file(path: &str) -> Result<RVec> {
    let values: Vec<f64> = numbers(&std::fs::read_to_string(path)?, path)?.concat();
    Ok(RVec::from_vec(values))
}

fn check_len(v: RVec, n: usize, what: &str) -> Result<RVec> {
    if v.len() != n {
        return Err(Error::Dimension(format!(
            "{what} has {} entries, the graph has {n} nodes",
            v.len()
        )));
    }
    Ok(v)
}

/// `random:SEED` draws a standard-normal signal; anything else is a vector file.
pub fn signal(spec: &str, n: usize) -> Result<RVec> {
    let v = match spec.strip_prefix("random:") {
        Some(seed) => {
            let seed = seed
                .parse()
                .map_err(|_| Error::Parameter(format!("bad seed in `{spec}`")))?;
            draw_signals(&SignalEnsemble::white(n, 1, seed))
                .column(0)
                .into_owned()
        }
        None => vector_file(spec)?,
    };
    check_len(v, n, "signal")
}

/// `random-positive:SEED` or a vector file.
pub fn eigenvector(spec: &str, n: usize) -> Result<RVec> {
    let v = match spec.strip_prefix("random-positive:") {
        Some(seed) => {
            let seed = seed
                .parse()
                .map_err(|_| Error::Parameter(format!("bad seed in `{spec}`")))?;
            RankOneTarget::random_positive(n, seed)?.a().clone()
        }
        None => vector_file(spec)?,
    };
    check_len(v, n, "eigenvector")
}

/// `SRC>SINK` pairs separated by commas.
fn anc_target(n: usize, pairs: &str) -> Result<LinearTarget> {
    let mut sources = Vec::new();
    let mut links = Vec::new();
    for pair in pairs.split(',') {
        let (src, sink) = pair
            .split_once('>')
            .ok_or_else(|| Error::Parameter(format!("ANC pair `{pair}` is not SRC>SINK")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parameter(format!("bad node `{t}`")))
        };
        let (src, sink) = (parse(src)?, parse(sink)?);
        if !sources.contains(&src) {
            sources.push(src);
        }
        links.push((sink, src));
    }
    LinearTarget::anc(n, sources, &links)
}

pub fn target(spec: &str, n: usize) -> Result<LinearTarget> {
    match spec {
        "builtin:consensus" => Ok(LinearTarget::consensus(n)),
        _ => match spec.strip_prefix("builtin:anc:") {
            Some(pairs) => anc_target(n, pairs),
            None if spec.starts_with("builtin:") => {
                Err(Error::Parameter(format!("unknown builtin target `{spec}`")))
            }
            None => LinearTarget::new(matrix_file(spec)?),
        },
    }
}

/// Applies `identity`, `rho:VALUE` (`R^{1/2} = I + ρ(11ᵀ − I)`) or a
/// covariance matrix file.
pub fn with_covariance(target: LinearTarget, spec: &str) -> Result<LinearTarget> {
    let n = target.n();
    if spec == "identity" {
        return Ok(target);
    }
    if let Some(rho) = spec.strip_prefix("rho:") {
        let rho: f64 = rho
            .parse()
            .map_err(|_| Error::Parameter(format!("bad correlation in `{spec}`")))?;
        let root = correlated_root(rho, &RMat::zeros(n, n));
        return target.with_covariance_sqrt(root);
    }
    target.with_covariance(&matrix_file(spec)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generator_specs_build_graphs() {
        assert_eq!(graph("star:7").unwrap().n(), 7);
        assert_eq!(graph("er:12:0.4:3").unwrap().n(), 12);
        assert_eq!(graph("sw:10:4:0.2").unwrap().n(), 10);
        assert!(graph("er:12").is_err());
        assert!(graph("sw:10:x:0.2").is_err());
    }

    #[test]
    fn anc_pairs_map_sinks_to_sources() {
        let t = target("builtin:anc:0>3,1>4", 6).unwrap();
        let map = t.anc_map().unwrap();
        assert_eq!(map.sources(), &[0, 1]);
        assert_eq!(map.sinks(), &[3, 4]);
        assert!(target("builtin:anc:0-3", 6).is_err());
        assert!(target("builtin:other", 6).is_err());
    }

    #[test]
    fn correlated_covariance_has_unit_diagonal_root() {
        let t = with_covariance(LinearTarget::consensus(4), "rho:0.5").unwrap();
        assert!((t.rx_sqrt()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((t.rx_sqrt()[(0, 1)] - 0.5).abs() < 1e-15);
        assert!(with_covariance(LinearTarget::consensus(4), "rho:x").is_err());
    }

    #[test]
    fn random_signals_are_seeded() {
        assert_eq!(
            signal("random:3", 5).unwrap(),
            signal("random:3", 5).unwrap()
        );
        assert_ne!(
            signal("random:3", 5).unwrap(),
            signal("random:4", 5).unwrap()
        );
    }
}
