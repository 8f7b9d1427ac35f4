//! Shared fixtures for the graphfilt benchmarks.

use graphfilt::design::LinearTarget;
use graphfilt::graph::{generate, shift_from_graph, GeneratorConfig, GraphModel, ShiftKind};
use graphfilt::linalg::{RMat, RVec};
use graphfilt::spectral::ShiftOperator;

/// Connected Erdős–Rényi shift of the given kind.
pub fn er_shift(n: usize, p: f64, kind: ShiftKind) -> ShiftOperator {
    let g = generate(
        &GeneratorConfig::new(GraphModel::ErdosRenyi { p_edge: p }, n)
            .seed(11)
            .connected(true),
    )
    .expect("connected graph");
    shift_from_graph(&g, kind).expect("shift")
}

/// Deterministic dense target with entries in `[-1, 1]`.
pub fn dense_target(n: usize) -> LinearTarget {
    LinearTarget::new(RMat::from_fn(n, n, |i, j| {
        ((i * n + j) as f64 * 0.37).sin()
    }))
    .expect("target")
}

/// Deterministic signal with entries in `[-1, 1]`.
pub fn signal(n: usize) -> RVec {
    RVec::from_fn(n, |i, _| (i as f64 * 0.61).cos())
}
