//! Graphs, seeded random generators, spanning trees and standard shifts.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RMat;
use crate::spectral::{Pattern, ShiftOperator};

/// Retry cap when resampling random graphs until connected.
pub const CONNECT_RETRIES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// A weighted graph on nodes `0..n`.
///
/// Undirected edges are stored once with `from < to`. Directed edge
/// `(from, to)` lets `to` read the value held by `from`.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    directed: bool,
    edges: Vec<Edge>,
}

impl Graph {
    pub fn new(n: usize, directed: bool, edges: Vec<Edge>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut stored = Vec::with_capacity(edges.len());
        for e in edges {
            if e.from >= n || e.to >= n {
                return Err(Error::Parameter(format!(
                    "edge ({}, {}) out of range for n = {n}",
                    e.from, e.to
                )));
            }
            if e.from == e.to {
                return Err(Error::Parameter(format!("self-loop at node {}", e.from)));
            }
            if !e.weight.is_finite() {
                return Err(Error::Parameter("non-finite edge weight".into()));
            }
            let e = if directed || e.from < e.to {
                e
            } else {
                Edge {
                    from: e.to,
                    to: e.from,
                    weight: e.weight,
                }
            };
            if !seen.insert((e.from, e.to)) {
                return Err(Error::Parameter(format!(
                    "duplicate edge ({}, {})",
                    e.from, e.to
                )));
            }
            stored.push(e);
        }
        Ok(Self {
            n,
            directed,
            edges: stored,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Weighted adjacency with `A[to][from] = w`; symmetric when undirected.
    pub fn adjacency(&self) -> RMat {
        let mut a = RMat::zeros(self.n, self.n);
        for e in &self.edges {
            a[(e.to, e.from)] = e.weight;
            if !self.directed {
                a[(e.from, e.to)] = e.weight;
            }
        }
        a
    }

    /// Neighbours ignoring direction, ascending.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: BTreeSet<usize> = BTreeSet::new();
        for e in &self.edges {
            if e.from == i {
                out.insert(e.to);
            } else if e.to == i {
                out.insert(e.from);
            }
        }
        out.into_iter().collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).len()
    }

    fn undirected_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![BTreeSet::new(); self.n];
        for e in &self.edges {
            lists[e.from].insert(e.to);
            lists[e.to].insert(e.from);
        }
        lists.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    fn bfs_distances(lists: &[Vec<usize>], root: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; lists.len()];
        let mut queue = VecDeque::from([root]);
        dist[root] = Some(0);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0);
            for &v in &lists[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Connectivity by breadth-first reachability: of the underlying
    /// undirected graph when undirected, strong connectivity when directed.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        if !self.directed {
            let lists = self.undirected_lists();
            return Self::bfs_distances(&lists, 0).iter().all(Option::is_some);
        }
        let mut fwd = vec![Vec::new(); self.n];
        let mut bwd = vec![Vec::new(); self.n];
        for e in &self.edges {
            fwd[e.from].push(e.to);
            bwd[e.to].push(e.from);
        }
        Self::bfs_distances(&fwd, 0).iter().all(Option::is_some)
            && Self::bfs_distances(&bwd, 0).iter().all(Option::is_some)
    }

    /// Hop diameter of the underlying undirected graph; `None` if disconnected.
    pub fn diameter(&self) -> Option<usize> {
        let lists = self.undirected_lists();
        let mut best = 0;
        for root in 0..self.n {
            for d in Self::bfs_distances(&lists, root) {
                best = best.max(d?);
            }
        }
        Some(best)
    }

    /// Plain-text edge list: header `n <count> directed <0|1>`, then `i j w`.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {} directed {}\n", self.n, u8::from(self.directed));
        for e in &self.edges {
            let _ = writeln!(out, "{} {} {}", e.from, e.to, e.weight);
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let (n, directed, triples) = parse_triples(text)?;
        let edges = triples
            .into_iter()
            .map(|(from, to, weight)| Edge { from, to, weight })
            .collect();
        Self::new(n, directed, edges)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

/// Node count, directedness and `(i, j, w)` entries of an edge list.
pub(crate) type EdgeList = (usize, bool, Vec<(usize, usize, f64)>);

/// Parses the shared edge-list layout.
pub(crate) fn parse_triples(text: &str) -> Result<EdgeList> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty edge list".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let (n, directed) = match tokens.as_slice() {
        ["n", count, "directed", flag] => {
            let n = count
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("bad node count `{count}`")))?;
            let directed = match *flag {
                "0" => false,
                "1" => true,
                other => return Err(Error::Format(format!("bad directed flag `{other}`"))),
            };
            (n, directed)
        }
        _ => return Err(Error::Format(format!("bad header `{header}`"))),
    };
    let mut triples = Vec::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [i, j, w] = parts.as_slice() else {
            return Err(Error::Format(format!("expected `i j w`, got `{line}`")));
        };
        let bad = |t: &str| Error::Format(format!("bad token `{t}` in `{line}`"));
        triples.push((
            i.parse().map_err(|_| bad(i))?,
            j.parse().map_err(|_| bad(j))?,
            w.parse().map_err(|_| bad(w))?,
        ));
    }
    Ok((n, directed, triples))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum GraphModel {
    ErdosRenyi { p_edge: f64 },
    SmallWorld { mean_degree: usize, p_rewire: f64 },
    ScaleFree { m_init: usize, m_attach: usize },
    Star,
    Cycle,
    DirectedCycle,
}

impl GraphModel {
    pub fn is_random(&self) -> bool {
        matches!(
            self,
            GraphModel::ErdosRenyi { .. }
                | GraphModel::SmallWorld { .. }
                | GraphModel::ScaleFree { .. }
        )
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum WeightLaw {
    #[default]
    Unit,
    Uniform {
        lo: f64,
        hi: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    #[serde(flatten)]
    pub model: GraphModel,
    pub n: usize,
    #[serde(default)]
    pub weights: WeightLaw,
    #[serde(default)]
    pub seed: u64,
    /// Resample random models until connected.
    #[serde(default)]
    pub connected: bool,
}

impl GeneratorConfig {
    pub fn new(model: GraphModel, n: usize) -> Self {
        Self {
            model,
            n,
            weights: WeightLaw::Unit,
            seed: 0,
            connected: false,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn connected(mut self, connected: bool) -> Self {
        self.connected = connected;
        self
    }

    pub fn weights(mut self, weights: WeightLaw) -> Self {
        self.weights = weights;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.n;
        if n < 2 {
            return Err(Error::Parameter(format!("n = {n}, need n >= 2")));
        }
        let prob = |p: f64, name: &str| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} = {p} outside [0, 1]")))
            }
        };
        match self.model {
            GraphModel::ErdosRenyi { p_edge } => prob(p_edge, "p_edge")?,
            GraphModel::SmallWorld {
                mean_degree,
                p_rewire,
            } => {
                prob(p_rewire, "p_rewire")?;
                if mean_degree < 2 || mean_degree % 2 != 0 || mean_degree >= n {
                    return Err(Error::Parameter(format!(
                        "mean_degree = {mean_degree} must be even, >= 2 and < n"
                    )));
                }
            }
            GraphModel::ScaleFree { m_init, m_attach } => {
                if m_attach < 1 || m_init < m_attach.max(2) || m_init > n {
                    return Err(Error::Parameter(format!(
                        "scale-free needs 1 <= m_attach <= m_init, 2 <= m_init <= n (got {m_init}, {m_attach})"
                    )));
                }
            }
            GraphModel::Cycle if n < 3 => {
                return Err(Error::Parameter("cycle needs n >= 3".into()));
            }
            _ => {}
        }
        if let WeightLaw::Uniform { lo, hi } = self.weights {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Parameter(format!(
                    "uniform weights need lo <= hi (got {lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Generates a graph from `config`, seeding a fresh RNG with `config.seed`.
pub fn generate(config: &GeneratorConfig) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    generate_with(config, &mut rng)
}

/// Generates a graph drawing randomness from `rng` (`config.seed` is ignored).
pub fn generate_with<R: Rng + ?Sized>(config: &GeneratorConfig, rng: &mut R) -> Result<Graph> {
    config.validate()?;
    let attempts = if config.connected && config.model.is_random() {
        CONNECT_RETRIES
    } else {
        1
    };
    for _ in 0..attempts {
        let g = sample_once(config, rng)?;
        if !config.connected || g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Generation {
        attempts,
        reason: "no connected sample".into(),
    })
}

fn sample_once<R: Rng + ?Sized>(config: &GeneratorConfig, rng: &mut R) -> Result<Graph> {
    let n = config.n;
    let (pairs, directed): (Vec<(usize, usize)>, bool) = match config.model {
        GraphModel::ErdosRenyi { p_edge } => {
            let mut pairs = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < p_edge {
                        pairs.push((i, j));
                    }
                }
            }
            (pairs, false)
        }
        GraphModel::SmallWorld {
            mean_degree,
            p_rewire,
        } => (watts_strogatz(n, mean_degree, p_rewire, rng), false),
        GraphModel::ScaleFree { m_init, m_attach } => {
            (barabasi_albert(n, m_init, m_attach, rng), false)
        }
        GraphModel::Star => ((1..n).map(|i| (0, i)).collect(), false),
        GraphModel::Cycle => ((0..n).map(|i| (i, (i + 1) % n)).collect(), false),
        GraphModel::DirectedCycle => ((0..n).map(|i| (i, (i + 1) % n)).collect(), true),
    };
    let edges = pairs
        .into_iter()
        .map(|(from, to)| Edge {
            from,
            to,
            weight: match config.weights {
                WeightLaw::Unit => 1.0,
                WeightLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            },
        })
        .collect();
    Graph::new(n, directed, edges)
}

/// Ring lattice with `k/2` neighbours per side, each lattice edge rewired
/// independently with probability `p` to a uniform non-neighbour.
fn watts_strogatz<R: Rng + ?Sized>(n: usize, k: usize, p: f64, rng: &mut R) -> Vec<(usize, usize)> {
    let mut adj = vec![BTreeSet::new(); n];
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if rng.random::<f64>() >= p || !adj[u].contains(&v) || adj[u].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.random_range(0..n);
                if w != u && !adj[u].contains(&w) {
                    break w;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    sorted_pairs(&adj)
}

/// Preferential attachment grown from a complete graph on `m0` nodes.
fn barabasi_albert<R: Rng + ?Sized>(
    n: usize,
    m0: usize,
    m: usize,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let mut adj = vec![BTreeSet::new(); n];
    let mut pool = Vec::new();
    for i in 0..m0 {
        for j in i + 1..m0 {
            adj[i].insert(j);
            adj[j].insert(i);
            pool.push(i);
            pool.push(j);
        }
    }
    for t in m0..n {
        let mut targets = BTreeSet::new();
        while targets.len() < m {
            targets.insert(pool[rng.random_range(0..pool.len())]);
        }
        for &v in &targets {
            adj[t].insert(v);
            adj[v].insert(t);
            pool.push(t);
            pool.push(v);
        }
    }
    sorted_pairs(&adj)
}

fn sorted_pairs(adj: &[BTreeSet<usize>]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for (u, nbrs) in adj.iter().enumerate() {
        for &v in nbrs.range(u + 1..) {
            pairs.push((u, v));
        }
    }
    pairs
}

/// BFS spanning tree visiting neighbours in ascending order.
pub fn spanning_tree(g: &Graph, root: usize) -> Result<Graph> {
    if g.is_directed() {
        return Err(Error::Parameter(
            "spanning_tree needs an undirected graph".into(),
        ));
    }
    if root >= g.n() {
        return Err(Error::Parameter(format!("root {root} out of range")));
    }
    let weights: std::collections::BTreeMap<(usize, usize), f64> = g
        .edges()
        .iter()
        .map(|e| ((e.from, e.to), e.weight))
        .collect();
    let lists = g.undirected_lists();
    let mut seen = vec![false; g.n()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    let mut edges = Vec::with_capacity(g.n().saturating_sub(1));
    while let Some(u) = queue.pop_front() {
        for &v in &lists[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
                let key = (u.min(v), u.max(v));
                edges.push(Edge {
                    from: key.0,
                    to: key.1,
                    weight: weights[&key],
                });
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Disconnected);
    }
    Graph::new(g.n(), false, edges)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftKind {
    Adjacency,
    Laplacian,
    ConsensusCorollary,
}

pub fn laplacian(g: &Graph) -> Result<RMat> {
    if g.is_directed() {
        return Err(Error::ShiftKind("laplacian"));
    }
    let a = g.adjacency();
    let mut l = -a.clone();
    for i in 0..g.n() {
        l[(i, i)] = a.row(i).sum();
    }
    Ok(l)
}

pub fn shift_from_graph(g: &Graph, kind: ShiftKind) -> Result<ShiftOperator> {
    let matrix = match kind {
        ShiftKind::Adjacency => g.adjacency(),
        ShiftKind::Laplacian => laplacian(g)?,
        ShiftKind::ConsensusCorollary => {
            let l = laplacian(g).map_err(|_| Error::ShiftKind("consensus-corollary"))?;
            (RMat::identity(g.n(), g.n()) + l) / g.n() as f64
        }
    };
    ShiftOperator::new(matrix, Pattern::from_graph(g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(g: &Graph) -> Vec<(usize, usize)> {
        g.edges().iter().map(|e| (e.from, e.to)).collect()
    }

    #[test]
    fn star_shape() {
        let g = generate(&GeneratorConfig::new(GraphModel::Star, 5)).unwrap();
        assert_eq!(g.edge_count(), 4);
        assert!(g.edges().iter().all(|e| e.from == 0));
        assert_eq!(g.diameter(), Some(2));
    }

    #[test]
    fn cycle_degrees() {
        let g = generate(&GeneratorConfig::new(GraphModel::Cycle, 20)).unwrap();
        assert_eq!(g.edge_count(), 20);
        assert!((0..20).all(|i| g.degree(i) == 2));
    }

    #[test]
    fn spanning_tree_of_cycle_follows_bfs_order() {
        let g = generate(&GeneratorConfig::new(GraphModel::Cycle, 4)).unwrap();
        let t = spanning_tree(&g, 0).unwrap();
        assert_eq!(pairs(&t), vec![(0, 1), (0, 3), (1, 2)]);
    }

    #[test]
    fn spanning_tree_of_star_is_star() {
        let g = generate(&GeneratorConfig::new(GraphModel::Star, 5)).unwrap();
        assert_eq!(spanning_tree(&g, 0).unwrap(), g);
    }

    #[test]
    fn spanning_tree_rejects_disconnected() {
        let g = Graph::new(
            4,
            false,
            vec![Edge {
                from: 0,
                to: 1,
                weight: 1.0,
            }],
        )
        .unwrap();
        assert!(matches!(spanning_tree(&g, 0), Err(Error::Disconnected)));
    }

    #[test]
    fn path_laplacian_and_consensus_shift() {
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
        let l = shift_from_graph(&g, ShiftKind::Laplacian).unwrap();
        assert_eq!(
            l.matrix(),
            &RMat::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
        );
        let c = shift_from_graph(&g, ShiftKind::ConsensusCorollary).unwrap();
        assert_eq!(
            c.matrix(),
            &RMat::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0])
        );
    }

    #[test]
    fn directed_cycle_adjacency_shifts_forward() {
        let g = generate(&GeneratorConfig::new(GraphModel::DirectedCycle, 3)).unwrap();
        let s = shift_from_graph(&g, ShiftKind::Adjacency).unwrap();
        let x = crate::linalg::RVec::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!((s.matrix() * x).as_slice(), &[3.0, 1.0, 2.0]);
        assert!(matches!(
            shift_from_graph(&g, ShiftKind::Laplacian),
            Err(Error::ShiftKind(_))
        ));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let bad = [
            GeneratorConfig::new(GraphModel::ErdosRenyi { p_edge: 1.5 }, 10),
            GeneratorConfig::new(
                GraphModel::SmallWorld {
                    mean_degree: 3,
                    p_rewire: 0.1,
                },
                10,
            ),
            GeneratorConfig::new(
                GraphModel::ScaleFree {
                    m_init: 4,
                    m_attach: 0,
                },
                10,
            ),
            GeneratorConfig::new(GraphModel::Star, 1),
        ];
        for cfg in bad {
            assert!(
                matches!(generate(&cfg), Err(Error::Parameter(_))),
                "{cfg:?}"
            );
        }
    }

    #[test]
    fn resampling_cap_is_an_error() {
        let cfg = GeneratorConfig::new(GraphModel::ErdosRenyi { p_edge: 0.0 }, 5).connected(true);
        assert!(matches!(
            generate(&cfg),
            Err(Error::Generation { attempts: 1000, .. })
        ));
    }

    #[test]
    fn edge_list_round_trip() {
        let cfg = GeneratorConfig::new(GraphModel::ErdosRenyi { p_edge: 0.4 }, 8)
            .weights(WeightLaw::Uniform { lo: 0.5, hi: 1.5 })
            .seed(3);
        let g = generate(&cfg).unwrap();
        assert_eq!(Graph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
    }

    #[test]
    fn scale_free_edge_count() {
        let cfg = GeneratorConfig::new(
            GraphModel::ScaleFree {
                m_init: 4,
                m_attach: 2,
            },
            40,
        )
        .seed(1);
        let g = generate(&cfg).unwrap();
        assert_eq!(g.edge_count(), 6 + 2 * 36);
        assert!(g.is_connected());
    }

    #[test]
    fn small_world_keeps_edge_count() {
        let cfg = GeneratorConfig::new(
            GraphModel::SmallWorld {
                mean_degree: 4,
                p_rewire: 0.2,
            },
            10,
        )
        .seed(9);
        assert_eq!(generate(&cfg).unwrap().edge_count(), 20);
    }
}
