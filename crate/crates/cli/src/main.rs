//! `graphfilt`: design, simulate and analyse graph filters from the command line.

mod commands;
mod inputs;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use graphfilt::design::{AncReduction, Criterion, FilterKind};
use graphfilt::experiments::ExperimentKind;
use graphfilt::netsim::SimMode;
use graphfilt::Error;

/// Exit status for malformed arguments, configs and inputs.
const EXIT_CONFIG: u8 = 2;
/// Exit status for numerical failures.
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "graphfilt",
    version,
    about = "Graph-filter design, simulation and experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design filter coefficients for a target operator and print the report as JSON.
    Design(DesignArgs),
    /// Run a filter as synchronous message passing and print the output signal as JSON.
    Simulate(SimulateArgs),
    /// Print eigenvalues and eigenvalue classes of a shift as JSON.
    Spectrum(SpectrumArgs),
    /// Build a shift whose filters implement a rank-one operator.
    ShiftDesign(ShiftDesignArgs),
    /// Consensus curves against the best-constant baseline.
    #[command(name = "exp:consensus")]
    ExpConsensus(ExpArgs),
    /// Consensus curves per graph family.
    #[command(name = "exp:graph-families")]
    ExpGraphFamilies(ExpArgs),
    /// Mean and maximum errors of MSE and WCE designs.
    #[command(name = "exp:mse-vs-wce")]
    ExpMseVsWce(ExpArgs),
    /// Analog network coding recovery per source correlation.
    #[command(name = "exp:anc")]
    ExpAnc(ExpArgs),
    /// Rank-one targets on random, tree and full-graph shifts.
    #[command(name = "exp:shift-design")]
    ExpShiftDesign(ExpArgs),
    /// Targets whose eigenvectors drift from the shift's.
    #[command(name = "exp:robustness")]
    ExpRobustness(ExpArgs),
}

/// Shift source: an edge-list file or a generator such as `er:20:0.3:7`,
/// `sw:10:4:0.2:7`, `sf:40:4:2:7`, `star:20` or `cycle:20`.
#[derive(Args, Debug)]
struct ShiftArgs {
    #[arg(long)]
    shift: String,
    /// How graph weights become the shift; `raw` uses a file's entries as-is.
    #[arg(long, value_enum, default_value_t = ShiftKindArg::Adjacency)]
    shift_kind: ShiftKindArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ShiftKindArg {
    Raw,
    Adjacency,
    Laplacian,
    ConsensusCorollary,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ModeArg {
    NodeInvariant,
    NodeVariant,
}

impl From<ModeArg> for FilterKind {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::NodeInvariant => FilterKind::NodeInvariant,
            ModeArg::NodeVariant => FilterKind::NodeVariant,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum CriterionArg {
    Perfect,
    Mse,
    Wce,
    Frobenius,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Self {
        match c {
            CriterionArg::Perfect => Criterion::Perfect,
            CriterionArg::Mse => Criterion::Mse,
            CriterionArg::Wce => Criterion::Wce,
            CriterionArg::Frobenius => Criterion::Frobenius,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ReductionArg {
    BR,
    BSr,
}

impl From<ReductionArg> for AncReduction {
    fn from(r: ReductionArg) -> Self {
        match r {
            ReductionArg::BR => AncReduction::BR,
            ReductionArg::BSr => AncReduction::BSR,
        }
    }
}

#[derive(Args, Debug)]
struct DesignArgs {
    #[command(flatten)]
    shift: ShiftArgs,
    /// Matrix file, `builtin:consensus` or `builtin:anc:SRC>SINK,SRC>SINK,...`.
    #[arg(long)]
    target: String,
    #[arg(long, value_enum, default_value_t = ModeArg::NodeInvariant)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = CriterionArg::Mse)]
    criterion: CriterionArg,
    /// Polynomial degree K: the filter uses K + 1 coefficients and K exchanges.
    #[arg(long)]
    order: usize,
    /// Input covariance: a matrix file, `identity` or `rho:VALUE`.
    #[arg(long, default_value = "identity")]
    rx: String,
    /// Reduction used for ANC targets.
    #[arg(long, value_enum, default_value_t = ReductionArg::BSr)]
    reduction: ReductionArg,
    /// Also write the designed filter as JSON.
    #[arg(long)]
    filter_out: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<String>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SimModeArg {
    ShiftAccumulate,
    ProductForm,
    TypeII,
}

impl From<SimModeArg> for SimMode {
    fn from(m: SimModeArg) -> Self {
        match m {
            SimModeArg::ShiftAccumulate => SimMode::ShiftAccumulate,
            SimModeArg::ProductForm => SimMode::ProductForm,
            SimModeArg::TypeII => SimMode::TypeII,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    shift: ShiftArgs,
    /// Filter JSON file.
    #[arg(long)]
    filter: String,
    /// Vector file or `random:SEED` for a standard-normal signal.
    #[arg(long)]
    signal: String,
    /// Recursion to run; defaults to the filter's natural one.
    #[arg(long, value_enum)]
    mode: Option<SimModeArg>,
    /// Write the per-round trace as JSON.
    #[arg(long)]
    trace: Option<String>,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[command(flatten)]
    shift: ShiftArgs,
    /// Eigenvalue grouping tolerance; defaults to a scale-aware value.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SubgraphArg {
    Full,
    Tree,
}

#[derive(Args, Debug)]
struct ShiftDesignArgs {
    /// Edge-list file or generator (see `--shift` of `design`).
    #[arg(long)]
    graph: String,
    /// Right eigenvector: vector file or `random-positive:SEED`.
    #[arg(long)]
    a_vec: String,
    /// Left eigenvector: vector file or `random-positive:SEED`.
    #[arg(long)]
    b_vec: String,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, value_enum, default_value_t = SubgraphArg::Full)]
    subgraph: SubgraphArg,
    /// Root of the BFS tree.
    #[arg(long, default_value_t = 0)]
    root: usize,
    /// Write the shift edge list here instead of stdout.
    #[arg(long)]
    out: Option<String>,
    /// Write the certificate JSON here instead of stdout.
    #[arg(long)]
    certificate: Option<String>,
}

#[derive(Args, Debug)]
struct ExpArgs {
    /// TOML file overlaid on the experiment's defaults.
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// CSV path; stdout when neither this nor the config names one.
    #[arg(long)]
    out: Option<String>,
    /// Manifest path; defaults to `<csv>.manifest.json` when the CSV goes to a file.
    #[arg(long)]
    manifest: Option<String>,
}

fn run(cli: Cli) -> graphfilt::Result<()> {
    match cli.command {
        Command::Design(a) => commands::design(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Spectrum(a) => commands::spectrum(&a),
        Command::ShiftDesign(a) => commands::shift_design(&a),
        Command::ExpConsensus(a) => commands::experiment(ExperimentKind::Consensus, &a),
        Command::ExpGraphFamilies(a) => commands::experiment(ExperimentKind::GraphFamilies, &a),
        Command::ExpMseVsWce(a) => commands::experiment(ExperimentKind::MseVsWce, &a),
        Command::ExpAnc(a) => commands::experiment(ExperimentKind::Anc, &a),
        Command::ExpShiftDesign(a) => commands::experiment(ExperimentKind::ShiftDesign, &a),
        Command::ExpRobustness(a) => commands::experiment(ExperimentKind::Robustness, &a),
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
