//! Seeded batch experiments emitting CSV curves and JSON manifests.

mod anc;
mod consensus;
mod output;
mod perturbation;
mod robustness;
mod shift;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{
    design_mse_node_invariant, design_mse_node_variant, design_perfect_node_invariant,
    design_perfect_node_variant, design_wce_node_invariant, design_wce_node_variant, Criterion,
    DesignReport, FilterKind, LinearTarget, WceOptions,
};
use crate::error::{Error, Result};
use crate::graph::{laplacian, shift_from_graph, GeneratorConfig, Graph, GraphModel, ShiftKind};
use crate::linalg::{sym_eigen_desc, RMat, RVec};
use crate::spectral::{decompose, Pattern, ShiftOperator};

pub use anc::{correlated_root, run_anc};
pub use consensus::{run_consensus, run_graph_families, run_mse_vs_wce};
pub use output::{
    content_hash, percentile, CsvRow, ExperimentOutput, Manifest, Record, Series, STATS,
};
pub use perturbation::{perturbed_basis, shared_basis, PerturbationSpec, MAX_BASIS_COND};
pub use robustness::run_robustness;
pub use shift::{draw_rank_one_target, run_shift_design};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Consensus,
    GraphFamilies,
    MseVsWce,
    Anc,
    ShiftDesign,
    Robustness,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Consensus,
        ExperimentKind::GraphFamilies,
        ExperimentKind::MseVsWce,
        ExperimentKind::Anc,
        ExperimentKind::ShiftDesign,
        ExperimentKind::Robustness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Consensus => "consensus",
            ExperimentKind::GraphFamilies => "graph-families",
            ExperimentKind::MseVsWce => "mse-vs-wce",
            ExperimentKind::Anc => "anc",
            ExperimentKind::ShiftDesign => "shift-design",
            ExperimentKind::Robustness => "robustness",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == name)
            .ok_or_else(|| Error::Parameter(format!("unknown experiment `{name}`")))
    }
}

/// Shift operator built from each generated graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftChoice {
    Adjacency,
    Laplacian,
    /// `(I + L) / N`.
    ConsensusCorollary,
    /// `W = I − αL` with `α = 2 / (λ_max(L) + λ₂(L))`.
    BestConstant,
}

impl ShiftChoice {
    pub fn build(self, g: &Graph) -> Result<ShiftOperator> {
        match self {
            ShiftChoice::Adjacency => shift_from_graph(g, ShiftKind::Adjacency),
            ShiftChoice::Laplacian => shift_from_graph(g, ShiftKind::Laplacian),
            ShiftChoice::ConsensusCorollary => shift_from_graph(g, ShiftKind::ConsensusCorollary),
            ShiftChoice::BestConstant => best_constant_shift(g),
        }
    }
}

/// Best-constant-weight averaging matrix of a connected undirected graph.
pub fn best_constant_weights(g: &Graph) -> Result<RMat> {
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let l = laplacian(g)?;
    let (vals, _) = sym_eigen_desc(&l);
    let n = g.n();
    let alpha = 2.0 / (vals[0] + vals[n - 2]);
    Ok(RMat::identity(n, n) - l * alpha)
}

pub fn best_constant_shift(g: &Graph) -> Result<ShiftOperator> {
    let w = best_constant_weights(g)?;
    let mut pattern = Pattern::from_graph(g);
    for i in 0..g.n() {
        pattern.allow(i, i);
    }
    ShiftOperator::new(w, pattern)
}

/// Signals per trial and the correlation levels of the ANC sources.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub signals: usize,
    pub rhos: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub trials: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub criterion: Criterion,
    pub shift: ShiftChoice,
    /// Number of ANC source/sink pairs.
    pub pairs: usize,
    pub graph: GeneratorConfig,
    /// Graph models compared by the graph-family experiment.
    pub families: Vec<GeneratorConfig>,
    pub ensemble: EnsembleSpec,
    pub perturbation: PerturbationSpec,
    pub wce: WceOptions,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    /// Built-in configuration of each experiment.
    pub fn defaults(kind: ExperimentKind) -> Self {
        let small_world = GeneratorConfig::new(
            GraphModel::SmallWorld {
                mean_degree: 4,
                p_rewire: 0.2,
            },
            10,
        )
        .connected(true);
        let base = Self {
            experiment: kind,
            seed: 1,
            trials: 1000,
            k_min: 0,
            k_max: 9,
            criterion: Criterion::Mse,
            shift: ShiftChoice::BestConstant,
            pairs: 5,
            graph: small_world,
            families: Vec::new(),
            ensemble: EnsembleSpec {
                signals: 1,
                rhos: vec![0.0],
            },
            perturbation: PerturbationSpec {
                sigmas: vec![0.0, 0.05, 0.1, 0.2],
                qs: (1..=10).collect(),
            },
            wce: WceOptions::default(),
            output: OutputSpec::default(),
        };
        match kind {
            ExperimentKind::Consensus => base,
            ExperimentKind::GraphFamilies => {
                let n = 20;
                let model = |m| GeneratorConfig::new(m, n).connected(true);
                Self {
                    trials: 100,
                    k_max: 19,
                    shift: ShiftChoice::Laplacian,
                    families: vec![
                        model(GraphModel::ErdosRenyi { p_edge: 0.1 }),
                        model(GraphModel::SmallWorld {
                            mean_degree: 2,
                            p_rewire: 0.2,
                        }),
                        model(GraphModel::ScaleFree {
                            m_init: 2,
                            m_attach: 1,
                        }),
                        model(GraphModel::Star),
                        model(GraphModel::Cycle),
                    ],
                    ..base
                }
            }
            ExperimentKind::MseVsWce => Self {
                trials: 1,
                k_max: 12,
                graph: GeneratorConfig::new(
                    GraphModel::ScaleFree {
                        m_init: 4,
                        m_attach: 2,
                    },
                    40,
                )
                .connected(true),
                ensemble: EnsembleSpec {
                    signals: 100_000,
                    rhos: vec![0.0],
                },
                ..base
            },
            ExperimentKind::Anc => Self {
                trials: 100,
                shift: ShiftChoice::Adjacency,
                criterion: Criterion::Frobenius,
                graph: GeneratorConfig::new(GraphModel::ErdosRenyi { p_edge: 0.1 }, 100)
                    .connected(true)
                    .weights(crate::graph::WeightLaw::Uniform { lo: 0.5, hi: 1.5 }),
                ensemble: EnsembleSpec {
                    signals: 1,
                    rhos: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
                },
                ..base
            },
            ExperimentKind::ShiftDesign => Self {
                trials: 100,
                shift: ShiftChoice::Adjacency,
                graph: GeneratorConfig::new(GraphModel::ErdosRenyi { p_edge: 0.3 }, 10)
                    .connected(true),
                ..base
            },
            ExperimentKind::Robustness => Self {
                shift: ShiftChoice::Adjacency,
                ..base
            },
        }
    }

    /// Parses a TOML document and overlays it on the defaults of its
    /// `experiment` (or of `kind` when the document has none).
    pub fn from_toml(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        let user: toml::Table = text.parse()?;
        let named = match user.get("experiment") {
            Some(toml::Value::String(s)) => Some(ExperimentKind::parse(s)?),
            Some(_) => return Err(Error::Parameter("`experiment` must be a string".into())),
            None => None,
        };
        let kind = match (named, kind) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Parameter(format!(
                    "config is for `{}`, not `{}`",
                    a.name(),
                    b.name()
                )))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => {
                return Err(Error::Parameter(
                    "config does not name an experiment".into(),
                ))
            }
        };
        let mut merged = toml::Table::try_from(Self::defaults(kind))
            .map_err(|e| Error::Format(format!("cannot encode defaults: {e}")))?;
        merge(&mut merged, user);
        let config: Self = merged.try_into()?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("cannot encode config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Parameter("trials must be at least 1".into()));
        }
        if self.k_min > self.k_max {
            return Err(Error::Parameter(format!(
                "k_min = {} exceeds k_max = {}",
                self.k_min, self.k_max
            )));
        }
        if self.ensemble.signals == 0 {
            return Err(Error::Parameter(
                "ensemble.signals must be at least 1".into(),
            ));
        }
        if self.experiment == ExperimentKind::Anc
            && (self.pairs == 0 || 2 * self.pairs > self.graph.n)
        {
            return Err(Error::Parameter(format!(
                "{} pairs do not fit {} nodes",
                self.pairs, self.graph.n
            )));
        }
        Ok(())
    }

    /// Independent stream for one trial.
    pub fn trial_rng(&self, trial: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial as u64);
        rng
    }

    pub fn degrees(&self) -> std::ops::RangeInclusive<usize> {
        self.k_min..=self.k_max
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Runs the configured experiment.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    match config.experiment {
        ExperimentKind::Consensus => run_consensus(config),
        ExperimentKind::GraphFamilies => run_graph_families(config),
        ExperimentKind::MseVsWce => run_mse_vs_wce(config),
        ExperimentKind::Anc => run_anc(config),
        ExperimentKind::ShiftDesign => run_shift_design(config),
        ExperimentKind::Robustness => run_robustness(config),
    }
}

/// Runs `trial` for every trial index in parallel, keeping trial order.
pub(crate) fn run_trials<F>(config: &ExperimentConfig, trial: F) -> Result<Vec<Vec<Record>>>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<Vec<Record>> + Sync,
{
    (0..config.trials)
        .into_par_iter()
        .map(|t| trial(t, &mut config.trial_rng(t)))
        .collect()
}

/// Degree-`k` design (`L = k + 1`) under the configured criterion.
pub(crate) fn design_degree(
    config: &ExperimentConfig,
    kind: FilterKind,
    shift: &ShiftOperator,
    target: &LinearTarget,
    k: usize,
) -> Result<DesignReport> {
    let order = k + 1;
    match (config.criterion, kind) {
        (Criterion::Mse | Criterion::Frobenius, FilterKind::NodeInvariant) => {
            design_mse_node_invariant(shift, target, order)
        }
        (Criterion::Mse | Criterion::Frobenius, FilterKind::NodeVariant) => {
            design_mse_node_variant(shift, target, order)
        }
        (Criterion::Wce, kind) => {
            let result = match kind {
                FilterKind::NodeInvariant => {
                    design_wce_node_invariant(shift, target, order, &config.wce)
                }
                FilterKind::NodeVariant => {
                    design_wce_node_variant(shift, target, order, &config.wce)
                }
            };
            match result {
                Err(Error::Convergence { best, .. }) => Ok(*best),
                other => other,
            }
        }
        (Criterion::Perfect, kind) => match perfect_design(shift, target, order, kind)? {
            Some(report) => Ok(report),
            None => design_degree(
                &ExperimentConfig {
                    criterion: Criterion::Mse,
                    ..config.clone()
                },
                kind,
                shift,
                target,
                k,
            ),
        },
    }
}

/// Perfect design of order `order`, or `None` when the target is not implementable.
pub(crate) fn perfect_design(
    shift: &ShiftOperator,
    target: &LinearTarget,
    order: usize,
    kind: FilterKind,
) -> Result<Option<DesignReport>> {
    let spec = decompose(shift, None)?;
    let result = match kind {
        FilterKind::NodeInvariant => design_perfect_node_invariant(shift, &spec, target, order),
        FilterKind::NodeVariant => design_perfect_node_variant(shift, &spec, target, Some(order)),
    };
    match result {
        Ok(report) => Ok(Some(report)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub(crate) fn gaussian_vec<R: rand::Rng>(n: usize, rng: &mut R) -> RVec {
    RVec::from_fn(n, |_, _| StandardNormal.sample(rng))
}

pub(crate) fn gaussian_mat<R: rand::Rng>(rows: usize, cols: usize, rng: &mut R) -> RMat {
    RMat::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub(crate) fn kind_label(kind: FilterKind) -> &'static str {
    match kind {
        FilterKind::NodeInvariant => "node-invariant",
        FilterKind::NodeVariant => "node-variant",
    }
}

pub(crate) fn model_label(model: &GraphModel) -> &'static str {
    match model {
        GraphModel::ErdosRenyi { .. } => "erdos-renyi",
        GraphModel::SmallWorld { .. } => "small-world",
        GraphModel::ScaleFree { .. } => "scale-free",
        GraphModel::Star => "star",
        GraphModel::Cycle => "cycle",
        GraphModel::DirectedCycle => "directed-cycle",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate;

    #[test]
    fn toml_overrides_merge_onto_defaults() {
        let text = "experiment = \"anc\"\ntrials = 3\n[graph]\nn = 30\n[ensemble]\nrhos = [0.5]\n";
        let cfg = ExperimentConfig::from_toml(text, None).unwrap();
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.graph.n, 30);
        assert_eq!(cfg.graph.model, GraphModel::ErdosRenyi { p_edge: 0.1 });
        assert_eq!(cfg.ensemble.rhos, vec![0.5]);
        assert_eq!(cfg.ensemble.signals, 1);
        assert_eq!(cfg.shift, ShiftChoice::Adjacency);
    }

    #[test]
    fn config_round_trips_through_toml() {
        for kind in ExperimentKind::ALL {
            let cfg = ExperimentConfig::defaults(kind);
            let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap(), None).unwrap();
            assert_eq!(cfg, back);
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(ExperimentConfig::from_toml("trials = 3", None).is_err());
        assert!(ExperimentConfig::from_toml("experiment = \"nope\"", None).is_err());
        assert!(ExperimentConfig::from_toml(
            "experiment = \"anc\"",
            Some(ExperimentKind::Consensus)
        )
        .is_err());
        assert!(ExperimentConfig::from_toml(
            "k_min = 5\nk_max = 2",
            Some(ExperimentKind::Consensus)
        )
        .is_err());
        assert!(
            ExperimentConfig::from_toml("trials = \"x\"", Some(ExperimentKind::Consensus)).is_err()
        );
    }

    #[test]
    fn best_constant_weights_average() {
        let g = generate(
            &GeneratorConfig::new(
                GraphModel::SmallWorld {
                    mean_degree: 4,
                    p_rewire: 0.2,
                },
                10,
            )
            .seed(3)
            .connected(true),
        )
        .unwrap();
        let w = best_constant_weights(&g).unwrap();
        let ones = RVec::from_element(10, 1.0);
        assert!((&w * &ones - &ones).norm() < 1e-12);
        let b = RMat::from_element(10, 10, 0.1);
        let (vals, _) = sym_eigen_desc(&(&w - b));
        assert!(vals.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn trial_streams_differ_and_repeat() {
        use rand::RngCore;
        let cfg = ExperimentConfig::defaults(ExperimentKind::Consensus);
        assert_eq!(cfg.trial_rng(4).next_u64(), cfg.trial_rng(4).next_u64());
        assert_ne!(cfg.trial_rng(4).next_u64(), cfg.trial_rng(5).next_u64());
    }
}
