//! Synchronous message-passing execution of graph filters.
//!
//! Each round every node sends one scalar along each outgoing edge of the
//! shift pattern and then updates its state from its own value, its inbox
//! and its row of `S`. The round kernel sees nothing else, and every read
//! is recorded so that locality can be audited after the run.

use serde::{Deserialize, Serialize};

use crate::design::{design_mse_node_invariant, LinearTarget};
use crate::error::{Error, Result};
use crate::filters::{Filter, NodeVariantMode};
use crate::linalg::RVec;
use crate::spectral::ShiftOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimMode {
    /// `z⁽ˡ⁾ = S z⁽ˡ⁻¹⁾`, accumulating `c_l z⁽ˡ⁾` (node-invariant and type I).
    ShiftAccumulate,
    /// `w ← (S − a_l I) w` per root, then scale by the gain.
    ProductForm,
    /// `t⁽ˡ⁾ = S t⁽ˡ⁻¹⁾ + diag(c⁽ᴸ⁻ˡ⁾) x`.
    TypeII,
}

impl SimMode {
    /// Natural recursion of a filter.
    pub fn for_filter(filter: &Filter) -> Self {
        match filter {
            Filter::NodeInvariant(_) => SimMode::ShiftAccumulate,
            Filter::NodeVariant(f) if f.mode == NodeVariantMode::TypeII => SimMode::TypeII,
            Filter::NodeVariant(_) => SimMode::ShiftAccumulate,
            Filter::ProductForm(_) => SimMode::ProductForm,
        }
    }
}

/// One read of a neighbour value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Access {
    pub round: usize,
    pub reader: usize,
    pub source: usize,
}

/// What a node holds: the exchanged values it has seen, `[z_i]_l = [z⁽ˡ⁾]_i`
/// in shift-accumulate mode, and its running output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: usize,
    pub memory: Vec<f64>,
    pub output: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub mode: SimMode,
    pub rounds: usize,
    pub messages_per_round: Vec<usize>,
    pub outputs: Vec<f64>,
    pub nodes: Vec<NodeState>,
    pub access_log: Vec<Access>,
    /// Exchanged values after each round, when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<Vec<Vec<f64>>>,
}

impl SimTrace {
    pub fn output(&self) -> RVec {
        RVec::from_column_slice(&self.outputs)
    }

    /// Reads that do not follow an edge of the shift pattern.
    pub fn non_local_reads(&self, shift: &ShiftOperator) -> Vec<Access> {
        self.access_log
            .iter()
            .copied()
            .filter(|a| a.reader == a.source || !shift.pattern().allows(a.reader, a.source))
            .collect()
    }
}

/// The only view a node has of the network during a round.
struct NodeView<'a> {
    own: f64,
    self_weight: f64,
    /// `(sender, value)` for every in-neighbour.
    inbox: &'a [(usize, f64)],
    /// `(sender, S_ij)` for the same senders.
    row: &'a [(usize, f64)],
}

/// `Σ_j S_ij v_j` from purely local data.
fn shift_kernel(view: &NodeView) -> f64 {
    let mut acc = view.self_weight * view.own;
    for (&(from, value), &(w_from, weight)) in view.inbox.iter().zip(view.row) {
        debug_assert_eq!(from, w_from);
        acc += weight * value;
    }
    acc
}

struct Network<'a> {
    shift: &'a ShiftOperator,
    senders: Vec<Vec<usize>>,
    rows: Vec<Vec<(usize, f64)>>,
    log: Vec<Access>,
    messages: Vec<usize>,
    history: Option<Vec<Vec<f64>>>,
}

impl<'a> Network<'a> {
    fn new(shift: &'a ShiftOperator, record: bool) -> Self {
        let n = shift.n();
        let s = shift.matrix();
        let senders: Vec<Vec<usize>> = (0..n).map(|i| shift.pattern().in_neighbors(i)).collect();
        let rows = senders
            .iter()
            .enumerate()
            .map(|(i, from)| from.iter().map(|&j| (j, s[(i, j)])).collect())
            .collect();
        Self {
            shift,
            senders,
            rows,
            log: Vec::new(),
            messages: Vec::new(),
            history: record.then(Vec::new),
        }
    }

    /// One synchronous exchange: every node applies its row of `S` to the
    /// values broadcast at the end of the previous round.
    fn exchange(&mut self, values: &[f64]) -> Vec<f64> {
        let round = self.messages.len() + 1;
        let s = self.shift.matrix();
        let mut sent = 0;
        let next: Vec<f64> = (0..values.len())
            .map(|i| {
                let inbox: Vec<(usize, f64)> = self.senders[i]
                    .iter()
                    .map(|&j| {
                        self.log.push(Access {
                            round,
                            reader: i,
                            source: j,
                        });
                        (j, values[j])
                    })
                    .collect();
                sent += inbox.len();
                shift_kernel(&NodeView {
                    own: values[i],
                    self_weight: s[(i, i)],
                    inbox: &inbox,
                    row: &self.rows[i],
                })
            })
            .collect();
        self.messages.push(sent);
        if let Some(h) = self.history.as_mut() {
            h.push(next.clone());
        }
        next
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimOptions {
    pub record_history: bool,
}

pub fn simulate(
    shift: &ShiftOperator,
    filter: &Filter,
    x: &RVec,
    mode: SimMode,
) -> Result<SimTrace> {
    simulate_with(shift, filter, x, mode, SimOptions::default())
}

pub fn simulate_with(
    shift: &ShiftOperator,
    filter: &Filter,
    x: &RVec,
    mode: SimMode,
    opts: SimOptions,
) -> Result<SimTrace> {
    let n = shift.n();
    filter.check_shift(shift)?;
    if x.len() != n {
        return Err(Error::Topology(format!(
            "signal has {} entries, network has {n} nodes",
            x.len()
        )));
    }
    // Per-node coefficient of tap l.
    let tap = |l: usize, i: usize| -> f64 {
        match filter {
            Filter::NodeInvariant(f) => f.coeffs[l],
            Filter::NodeVariant(f) => f.coeffs[(l, i)],
            Filter::ProductForm(_) => unreachable!("product form has no taps"),
        }
    };
    let mut net = Network::new(shift, opts.record_history);
    let mut nodes: Vec<NodeState> = (0..n)
        .map(|id| NodeState {
            id,
            memory: vec![x[id]],
            output: 0.0,
        })
        .collect();
    match (mode, filter) {
        (SimMode::ShiftAccumulate, Filter::NodeInvariant(_))
        | (SimMode::ShiftAccumulate, Filter::NodeVariant(_)) => {
            if let Filter::NodeVariant(f) = filter {
                if f.mode != NodeVariantMode::TypeI {
                    return Err(Error::Parameter(
                        "shift-accumulate runs type-I node-variant filters".into(),
                    ));
                }
            }
            let order = filter.order();
            let mut z: Vec<f64> = x.iter().copied().collect();
            for node in nodes.iter_mut() {
                node.output = tap(0, node.id) * z[node.id];
            }
            for l in 1..order {
                z = net.exchange(&z);
                for node in nodes.iter_mut() {
                    node.memory.push(z[node.id]);
                    node.output += tap(l, node.id) * z[node.id];
                }
            }
        }
        (SimMode::TypeII, Filter::NodeInvariant(_)) | (SimMode::TypeII, Filter::NodeVariant(_)) => {
            if let Filter::NodeVariant(f) = filter {
                if f.mode != NodeVariantMode::TypeII {
                    return Err(Error::Parameter(
                        "type-II mode runs type-II node-variant filters".into(),
                    ));
                }
            }
            let order = filter.order();
            let mut t: Vec<f64> = (0..n).map(|i| tap(order - 1, i) * x[i]).collect();
            for l in 2..=order {
                t = net.exchange(&t);
                for (i, ti) in t.iter_mut().enumerate() {
                    *ti += tap(order - l, i) * x[i];
                    nodes[i].memory.push(*ti);
                }
            }
            for (node, ti) in nodes.iter_mut().zip(&t) {
                node.output = *ti;
            }
        }
        (SimMode::ProductForm, Filter::ProductForm(f)) => {
            let mut w: Vec<f64> = x.iter().copied().collect();
            for &a in &f.roots {
                let sw = net.exchange(&w);
                for (i, wi) in w.iter_mut().enumerate() {
                    *wi = sw[i] - a * *wi;
                    nodes[i].memory.push(*wi);
                }
            }
            for &(sum, prod) in &f.quadratics {
                let u = net.exchange(&w);
                let su = net.exchange(&u);
                for (i, wi) in w.iter_mut().enumerate() {
                    nodes[i].memory.push(u[i]);
                    *wi = su[i] - sum * u[i] + prod * *wi;
                    nodes[i].memory.push(*wi);
                }
            }
            for (node, wi) in nodes.iter_mut().zip(&w) {
                node.output = f.gain * wi;
            }
        }
        (mode, _) => {
            return Err(Error::Parameter(format!(
                "mode {mode:?} cannot run this filter"
            )));
        }
    }
    Ok(SimTrace {
        mode,
        rounds: net.messages.len(),
        messages_per_round: net.messages,
        outputs: nodes.iter().map(|s| s.output).collect(),
        nodes,
        access_log: net.log,
        history: net.history,
    })
}

/// Smallest `K ≤ max_rounds` whose degree-`K` design has error below `tol`.
/// `error_at(K)` designs and evaluates the filter for that degree.
pub fn rounds_to_exactness<F>(max_rounds: usize, tol: f64, mut error_at: F) -> Result<Option<usize>>
where
    F: FnMut(usize) -> Result<f64>,
{
    for k in 0..=max_rounds {
        if error_at(k)? < tol {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// Rounds needed by the least-squares node-invariant design of `B = 11ᵀ/N`,
/// measured as `‖H − B‖_F / ‖B‖_F`.
pub fn consensus_rounds(
    shift: &ShiftOperator,
    max_rounds: usize,
    tol: f64,
) -> Result<Option<usize>> {
    let target = LinearTarget::consensus(shift.n());
    rounds_to_exactness(max_rounds, tol, |k| {
        Ok(design_mse_node_invariant(shift, &target, k + 1)?
            .residuals
            .frob_rel)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{NodeInvariantFilter, NodeVariantFilter, ProductFormFilter};
    use crate::graph::{
        generate, shift_from_graph, Edge, GeneratorConfig, Graph, GraphModel, ShiftKind,
    };
    use crate::linalg::RMat;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn er_shift(n: usize, seed: u64, kind: ShiftKind) -> ShiftOperator {
        let cfg = GeneratorConfig::new(GraphModel::ErdosRenyi { p_edge: 0.3 }, n)
            .seed(seed)
            .connected(true);
        shift_from_graph(&generate(&cfg).unwrap(), kind).unwrap()
    }

    fn rel(a: &RVec, b: &RVec) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn node_invariant_matches_dense() {
        let s = er_shift(9, 1, ShiftKind::Adjacency);
        let f = Filter::from(NodeInvariantFilter::new(vec![0.5, -1.0, 0.25, 0.1]).unwrap());
        let x = RVec::from_fn(9, |i, _| i as f64 - 3.0);
        let trace = simulate(&s, &f, &x, SimMode::ShiftAccumulate).unwrap();
        assert!(rel(&trace.output(), &f.eval_dense(&s, &x).unwrap()) < 1e-12);
        assert_eq!(trace.rounds, 3);
        assert!(trace.non_local_reads(&s).is_empty());
    }

    #[test]
    fn type_one_output_is_local_inner_product() {
        let s = er_shift(7, 2, ShiftKind::Adjacency);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = RMat::from_fn(4, 7, |_, _| rng.random_range(-1.0..1.0));
        let f = Filter::from(NodeVariantFilter::new(c.clone(), NodeVariantMode::TypeI).unwrap());
        let x = RVec::from_fn(7, |_, _| rng.random_range(-1.0..1.0));
        let trace = simulate(&s, &f, &x, SimMode::ShiftAccumulate).unwrap();
        for node in &trace.nodes {
            assert_eq!(node.memory.len(), 4);
            let local: f64 = (0..4).map(|l| c[(l, node.id)] * node.memory[l]).sum();
            assert!((local - node.output).abs() < 1e-14);
        }
        assert!(rel(&trace.output(), &f.eval_dense(&s, &x).unwrap()) < 1e-12);
    }

    #[test]
    fn type_two_matches_dense() {
        let s = er_shift(8, 3, ShiftKind::Laplacian);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = RMat::from_fn(5, 8, |_, _| rng.random_range(-1.0..1.0));
        let f = Filter::from(NodeVariantFilter::new(c, NodeVariantMode::TypeII).unwrap());
        let x = RVec::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let trace = simulate(&s, &f, &x, SimMode::TypeII).unwrap();
        assert_eq!(trace.rounds, 4);
        assert!(rel(&trace.output(), &f.eval_dense(&s, &x).unwrap()) < 1e-12);
    }

    #[test]
    fn quadratic_factor_takes_two_rounds() {
        let s = er_shift(7, 6, ShiftKind::Adjacency);
        let f = Filter::from(ProductFormFilter {
            gain: 1.5,
            roots: vec![0.2],
            quadratics: vec![(0.4, 1.1)],
        });
        let x = RVec::from_fn(7, |i, _| (i as f64).cos());
        let trace = simulate(&s, &f, &x, SimMode::ProductForm).unwrap();
        assert_eq!(trace.rounds, 3);
        assert!(rel(&trace.output(), &f.eval_dense(&s, &x).unwrap()) < 1e-12);
    }

    #[test]
    fn annihilating_root_removes_eigenvector() {
        let s = er_shift(8, 4, ShiftKind::Laplacian);
        let (values, vectors) = crate::linalg::sym_eigen_desc(s.matrix());
        let f = Filter::from(ProductFormFilter::new(2.0, vec![values[2], 0.3]));
        let x = RVec::from_fn(8, |i, _| (i as f64).sin() + 1.0);
        let trace = simulate(&s, &f, &x, SimMode::ProductForm).unwrap();
        assert!(trace.output().dot(&vectors.column(2)).abs() < 1e-9 * x.norm());
        assert!(rel(&trace.output(), &f.eval_dense(&s, &x).unwrap()) < 1e-12);
    }

    #[test]
    fn messages_follow_directed_edges() {
        let s = er_shift(10, 5, ShiftKind::Adjacency);
        let f = Filter::from(NodeInvariantFilter::new(vec![1.0; 4]).unwrap());
        let trace = simulate(
            &s,
            &f,
            &RVec::from_element(10, 1.0),
            SimMode::ShiftAccumulate,
        )
        .unwrap();
        let edges = s.pattern().off_diagonal().len();
        assert!(trace.messages_per_round.iter().all(|&m| m == edges));
        assert_eq!(trace.access_log.len(), 3 * edges);
    }

    #[test]
    fn mismatched_sizes_are_topology_errors() {
        let s = er_shift(5, 6, ShiftKind::Adjacency);
        let f = Filter::from(
            NodeVariantFilter::new(RMat::zeros(2, 6), NodeVariantMode::TypeI).unwrap(),
        );
        assert!(matches!(
            simulate(&s, &f, &RVec::zeros(5), SimMode::ShiftAccumulate),
            Err(Error::Topology(_))
        ));
        let g = Filter::from(NodeInvariantFilter::new(vec![1.0]).unwrap());
        assert!(matches!(
            simulate(&s, &g, &RVec::zeros(4), SimMode::ShiftAccumulate),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn infinite_tolerance_needs_no_rounds() {
        let s = er_shift(6, 7, ShiftKind::ConsensusCorollary);
        assert_eq!(consensus_rounds(&s, 5, f64::INFINITY).unwrap(), Some(0));
    }

    #[test]
    fn two_node_path_averages_in_one_round() {
        let g = Graph::new(
            2,
            false,
            vec![Edge {
                from: 0,
                to: 1,
                weight: 1.0,
            }],
        )
        .unwrap();
        let s = shift_from_graph(&g, ShiftKind::ConsensusCorollary).unwrap();
        assert_eq!(consensus_rounds(&s, 3, 1e-8).unwrap(), Some(1));
    }

    #[test]
    fn consensus_within_n_minus_one_rounds() {
        for seed in 0..5 {
            let s = er_shift(9, seed, ShiftKind::ConsensusCorollary);
            let k = consensus_rounds(&s, 8, 1e-8).unwrap();
            assert!(k.is_some_and(|k| k <= 8));
        }
    }
}
