//! Graph filters: spectral analysis, coefficient design, shift design and
//! synchronous message-passing simulation.

pub mod design;
pub mod error;
pub mod experiments;
pub mod filters;
pub mod graph;
pub mod linalg;
pub mod netsim;
pub mod shift_design;
pub mod spectral;

pub use design::{
    AncReduction, Coefficients, Criterion, DesignReport, ErrorNorm, Feasibility, FilterKind,
    LinearTarget, Residuals, SignalEnsemble, WceCertificate, WceOptions,
};
pub use error::{Error, Result};
pub use filters::{
    Filter, NodeInvariantFilter, NodeVariantFilter, NodeVariantMode, ProductFormFilter,
};
pub use graph::{Edge, GeneratorConfig, Graph, GraphModel, ShiftKind, WeightLaw};
pub use netsim::{SimMode, SimTrace};
pub use shift_design::{FittedShift, RankOneShift, RankOneTarget, Subgraph};
pub use spectral::{GraphSignal, Pattern, ShiftOperator, SpectralData};
