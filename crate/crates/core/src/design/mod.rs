//! Feasibility checks and optimal coefficient designs.

mod anc;
mod mse;
mod perfect;
mod sampling;
mod wce;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{Filter, NodeInvariantFilter, NodeVariantFilter, NodeVariantMode};
use crate::linalg::{
    psd_sqrt, rel_frobenius, spectral_norm, sym_eigen_desc, to_complex, CVec, RMat,
};
use crate::spectral::{ShiftOperator, SpectralData};

pub use anc::{design_anc, AncReduction, FilterKind};
pub use mse::{design_mse_node_invariant, design_mse_node_variant, phi_power, phi_spectral, theta};
pub use perfect::{
    check_perfect_node_invariant, check_perfect_node_variant, design_perfect_node_invariant,
    design_perfect_node_variant, FEASIBILITY_TOL,
};
pub use sampling::{
    draw_signals, sample_error, signal_errors, ErrorNorm, SampleStats, SignalEnsemble,
};
pub use wce::{design_wce_node_invariant, design_wce_node_variant, WceCertificate, WceOptions};

/// Sources, sinks and the sink-to-source assignment of an ANC target.
#[derive(Clone, Debug, PartialEq)]
pub struct AncMap {
    sources: Vec<usize>,
    sinks: Vec<usize>,
    /// For each sink, the position in `sources` of the signal it wants.
    assignment: Vec<usize>,
    /// Symmetric square root of the source covariance (`S × S`).
    source_rx_sqrt: RMat,
}

impl AncMap {
    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn sinks(&self) -> &[usize] {
        &self.sinks
    }

    /// Source node delivered to each sink.
    pub fn source_of(&self, sink_pos: usize) -> usize {
        self.sources[self.assignment[sink_pos]]
    }

    pub fn source_rx_sqrt(&self) -> &RMat {
        &self.source_rx_sqrt
    }

    fn selection(n: usize, nodes: &[usize]) -> RMat {
        let mut e = RMat::zeros(n, nodes.len());
        for (col, &node) in nodes.iter().enumerate() {
            e[(node, col)] = 1.0;
        }
        e
    }

    /// `E_S`, the `N × S` source selection.
    pub fn e_s(&self, n: usize) -> RMat {
        Self::selection(n, &self.sources)
    }

    /// `E_R`, the `N × R` sink selection.
    pub fn e_r(&self, n: usize) -> RMat {
        Self::selection(n, &self.sinks)
    }

    /// `B_SR = E_Rᵀ B E_S`.
    pub fn b_sr(&self) -> RMat {
        let mut b = RMat::zeros(self.sinks.len(), self.sources.len());
        for (i, &j) in self.assignment.iter().enumerate() {
            b[(i, j)] = 1.0;
        }
        b
    }
}

/// Desired operator `B` with input covariance and optional ANC structure.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearTarget {
    b: RMat,
    rx_sqrt: RMat,
    anc: Option<AncMap>,
}

impl LinearTarget {
    pub fn new(b: RMat) -> Result<Self> {
        let n = b.nrows();
        if b.ncols() != n || n == 0 {
            return Err(Error::Dimension(format!(
                "target must be square, got {}x{}",
                n,
                b.ncols()
            )));
        }
        Ok(Self {
            b,
            rx_sqrt: RMat::identity(n, n),
            anc: None,
        })
    }

    /// `B_con = 11ᵀ/N`.
    pub fn consensus(n: usize) -> Self {
        Self {
            b: RMat::from_element(n, n, 1.0 / n as f64),
            rx_sqrt: RMat::identity(n, n),
            anc: None,
        }
    }

    /// ANC target: each `(sink, source)` pair asks `sink` to recover the
    /// signal injected at `source`. Rows of non-sinks are zero.
    pub fn anc(n: usize, sources: Vec<usize>, pairs: &[(usize, usize)]) -> Result<Self> {
        if sources.is_empty() || pairs.is_empty() {
            return Err(Error::Precondition(
                "ANC needs at least one source and one sink".into(),
            ));
        }
        let mut uniq = sources.clone();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.len() != sources.len() || sources.iter().any(|&s| s >= n) {
            return Err(Error::Parameter(
                "sources must be distinct nodes in range".into(),
            ));
        }
        let mut sinks = Vec::with_capacity(pairs.len());
        let mut assignment = Vec::with_capacity(pairs.len());
        let mut b = RMat::zeros(n, n);
        for &(sink, source) in pairs {
            if sink >= n || sinks.contains(&sink) {
                return Err(Error::Parameter(format!(
                    "sink {sink} repeated or out of range"
                )));
            }
            let pos = sources.iter().position(|&s| s == source).ok_or_else(|| {
                Error::Parameter(format!("sink {sink} maps to non-source {source}"))
            })?;
            sinks.push(sink);
            assignment.push(pos);
            b[(sink, source)] = 1.0;
        }
        let s = sources.len();
        Ok(Self {
            b,
            rx_sqrt: RMat::identity(n, n),
            anc: Some(AncMap {
                sources,
                sinks,
                assignment,
                source_rx_sqrt: RMat::identity(s, s),
            }),
        })
    }

    pub fn with_covariance(mut self, rx: &RMat) -> Result<Self> {
        if rx.nrows() != self.n() {
            return Err(Error::Dimension(
                "covariance size differs from target".into(),
            ));
        }
        self.rx_sqrt = psd_sqrt(rx)?;
        Ok(self)
    }

    /// Uses a given symmetric square root directly; only `sqrt²` matters.
    pub fn with_covariance_sqrt(mut self, sqrt: RMat) -> Result<Self> {
        check_symmetric_sqrt(&sqrt, self.n())?;
        self.rx_sqrt = sqrt;
        Ok(self)
    }

    /// Square root of the source covariance for the `B_SR` reduction.
    pub fn with_source_covariance_sqrt(mut self, sqrt: RMat) -> Result<Self> {
        let map = self
            .anc
            .as_mut()
            .ok_or_else(|| Error::Precondition("target has no ANC structure".into()))?;
        check_symmetric_sqrt(&sqrt, map.sources.len())?;
        map.source_rx_sqrt = sqrt;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    pub fn b(&self) -> &RMat {
        &self.b
    }

    pub fn rx_sqrt(&self) -> &RMat {
        &self.rx_sqrt
    }

    pub fn rx(&self) -> RMat {
        &self.rx_sqrt * &self.rx_sqrt
    }

    pub fn anc_map(&self) -> Option<&AncMap> {
        self.anc.as_ref()
    }

    /// `β = diag(V⁻¹ B V)`.
    pub fn beta(&self, spec: &SpectralData) -> CVec {
        (&spec.v_inv * to_complex(&self.b) * &spec.v).diagonal()
    }

    fn check_shift(&self, shift: &ShiftOperator) -> Result<()> {
        if shift.n() != self.n() {
            return Err(Error::Dimension(format!(
                "target is {}x{}, shift has {} nodes",
                self.n(),
                self.n(),
                shift.n()
            )));
        }
        Ok(())
    }
}

fn check_symmetric_sqrt(sqrt: &RMat, n: usize) -> Result<()> {
    if sqrt.nrows() != n || sqrt.ncols() != n {
        return Err(Error::Dimension(format!("covariance root must be {n}x{n}")));
    }
    if (sqrt - sqrt.transpose()).norm() > 1e-12 * sqrt.norm().max(1.0) {
        return Err(Error::Parameter("covariance root must be symmetric".into()));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    Perfect,
    Mse,
    Wce,
    Frobenius,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Coefficients {
    NodeInvariant {
        c: Vec<f64>,
    },
    /// Row-major `L × N`.
    NodeVariant {
        order: usize,
        nodes: usize,
        c: Vec<f64>,
    },
}

impl Coefficients {
    pub fn node_variant(m: &RMat) -> Self {
        Coefficients::NodeVariant {
            order: m.nrows(),
            nodes: m.ncols(),
            c: m.transpose().as_slice().to_vec(),
        }
    }

    pub fn filter(&self) -> Filter {
        match self {
            Coefficients::NodeInvariant { c } => {
                Filter::NodeInvariant(NodeInvariantFilter { coeffs: c.clone() })
            }
            Coefficients::NodeVariant { order, nodes, c } => {
                Filter::NodeVariant(NodeVariantFilter {
                    coeffs: RMat::from_row_slice(*order, *nodes, c),
                    mode: NodeVariantMode::TypeI,
                })
            }
        }
    }

    pub fn dense(&self, s: &RMat) -> RMat {
        match self.filter() {
            Filter::NodeInvariant(f) => f.dense(s),
            Filter::NodeVariant(f) => f.dense(s),
            Filter::ProductForm(f) => f.dense(s),
        }
    }
}

/// Error metrics of `D = (H − B)` with `R_d = D Rx Dᵀ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖H − B‖_F / ‖B‖_F` (absolute when `B = 0`).
    pub frob_rel: f64,
    /// `‖H − B‖_2`.
    pub spectral: f64,
    /// `Tr(R_d) = ‖(H − B) Rx^{1/2}‖_F²`.
    pub trace_rd: f64,
    /// `λ_max(R_d) = ‖(H − B) Rx^{1/2}‖_2²`.
    pub lambda_max_rd: f64,
}

impl Residuals {
    pub fn of(h: &RMat, b: &RMat, rx_sqrt: &RMat) -> Self {
        let d = h - b;
        let weighted = &d * rx_sqrt;
        Self {
            frob_rel: rel_frobenius(h, b),
            spectral: spectral_norm(&d),
            trace_rd: weighted.norm_squared(),
            lambda_max_rd: spectral_norm(&weighted).powi(2),
        }
    }

    /// Largest relative difference between two residual sets.
    pub fn max_rel_diff(&self, other: &Residuals) -> f64 {
        let pairs = [
            (self.frob_rel, other.frob_rel),
            (self.spectral, other.spectral),
            (self.trace_rd, other.trace_rd),
            (self.lambda_max_rd, other.lambda_max_rd),
        ];
        pairs
            .iter()
            .map(|&(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1.0))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// Shared eigenvectors (node-invariant) or zero pattern of `u_i` (node-variant).
    A,
    /// Consistent values within each eigenvalue class.
    B,
    /// Order at least the number of distinct eigenvalues.
    C,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
    /// Offending eigen-indices.
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub cond_a: bool,
    pub cond_b: bool,
    pub cond_c: bool,
    pub order: usize,
    pub distinct: usize,
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn feasible(&self) -> bool {
        self.cond_a && self.cond_b && self.cond_c
    }

    pub fn describe(&self) -> String {
        if self.feasible() {
            return "all conditions hold".into();
        }
        let mut parts = Vec::new();
        for v in self.violations.iter().take(4) {
            let what = match v.condition {
                Condition::A => "condition a",
                Condition::B => "condition b",
                Condition::C => "condition c",
            };
            match v.node {
                Some(node) => parts.push(format!(
                    "{what} fails at node {node} (eigen-indices {:?})",
                    v.indices
                )),
                None if v.condition == Condition::C => parts.push(format!(
                    "{what} fails: order {} < {} distinct eigenvalues",
                    self.order, self.distinct
                )),
                None => parts.push(format!("{what} fails (eigen-indices {:?})", v.indices)),
            }
        }
        parts.join("; ")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub criterion: Criterion,
    pub order: usize,
    pub coefficients: Coefficients,
    pub residuals: Residuals,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<Feasibility>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anc: Option<AncReduction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wce: Option<WceCertificate>,
}

impl DesignReport {
    pub(crate) fn build(
        criterion: Criterion,
        coefficients: Coefficients,
        shift: &ShiftOperator,
        target: &LinearTarget,
    ) -> Self {
        let order = match &coefficients {
            Coefficients::NodeInvariant { c } => c.len(),
            Coefficients::NodeVariant { order, .. } => *order,
        };
        let mut report = Self {
            criterion,
            order,
            coefficients,
            residuals: Residuals {
                frob_rel: 0.0,
                spectral: 0.0,
                trace_rd: 0.0,
                lambda_max_rd: 0.0,
            },
            feasibility: None,
            anc: None,
            wce: None,
        };
        report.residuals = report.recompute(shift, target);
        report
    }

    pub fn filter(&self) -> Filter {
        self.coefficients.filter()
    }

    pub fn dense(&self, shift: &ShiftOperator) -> RMat {
        self.coefficients.dense(shift.matrix())
    }

    /// Residuals recomputed from the stored coefficients.
    pub fn recompute(&self, shift: &ShiftOperator, target: &LinearTarget) -> Residuals {
        let h = self.dense(shift);
        match (self.anc, target.anc_map()) {
            (Some(reduction), Some(map)) => {
                let n = target.n();
                let e_r = map.e_r(n);
                match reduction {
                    AncReduction::BSR => {
                        let reduced = e_r.transpose() * h * map.e_s(n);
                        Residuals::of(&reduced, &map.b_sr(), map.source_rx_sqrt())
                    }
                    AncReduction::BR => {
                        let b_r = e_r.transpose() * target.b();
                        Residuals::of(&(e_r.transpose() * h), &b_r, target.rx_sqrt())
                    }
                }
            }
            _ => Residuals::of(&h, target.b(), target.rx_sqrt()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Requires `sqrt²` to be positive definite.
pub(crate) fn require_positive_definite(sqrt: &RMat) -> Result<()> {
    let (values, _) = sym_eigen_desc(&(sqrt * sqrt));
    let top = values.iter().cloned().fold(0.0, f64::max);
    let bottom = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(top > 0.0 && bottom > 1e-12 * top) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anc_rows_are_canonical_vectors() {
        let t = LinearTarget::anc(6, vec![1, 4], &[(0, 4), (3, 1), (5, 4)]).unwrap();
        let map = t.anc_map().unwrap();
        for (pos, &sink) in map.sinks().iter().enumerate() {
            let src = map.source_of(pos);
            for j in 0..6 {
                assert_eq!(t.b()[(sink, j)], if j == src { 1.0 } else { 0.0 });
            }
        }
        let b_sr = map.e_r(6).transpose() * t.b() * map.e_s(6);
        assert_eq!(b_sr, map.b_sr());
    }

    #[test]
    fn anc_rejects_bad_maps() {
        assert!(LinearTarget::anc(4, vec![], &[(0, 1)]).is_err());
        assert!(LinearTarget::anc(4, vec![1], &[(0, 2)]).is_err());
        assert!(LinearTarget::anc(4, vec![1], &[(0, 1), (0, 1)]).is_err());
    }

    #[test]
    fn covariance_root_squares_back() {
        let rx = RMat::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.2, 0.0, 0.2, 1.5]);
        let t = LinearTarget::consensus(3).with_covariance(&rx).unwrap();
        assert!((t.rx() - rx).norm() < 1e-9);
    }

    #[test]
    fn singular_covariance_is_rejected_for_wce_only() {
        let rx = RMat::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let t = LinearTarget::consensus(2).with_covariance(&rx).unwrap();
        assert!(matches!(
            require_positive_definite(t.rx_sqrt()),
            Err(Error::NotPositiveDefinite)
        ));
    }
}
