//! Analog network coding designs on the reduced targets `B_R` and `B_SR`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::mse::theta;
use crate::design::{Coefficients, Criterion, DesignReport, LinearTarget};
use crate::error::{Error, Result};
use crate::linalg::{lstsq_nested, powers, vec_of, RMat, RVec, PINV_RCOND};
use crate::spectral::ShiftOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AncReduction {
    /// Sink rows only, every node may carry input.
    #[serde(rename = "B_R")]
    BR,
    /// Sink rows and source columns.
    #[serde(rename = "B_SR")]
    BSR,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    NodeInvariant,
    NodeVariant,
}

/// Least-squares design of `E_Rᵀ H E_S ≈ B_SR` (or `E_Rᵀ H ≈ B_R`), weighted
/// by the matching covariance root. Coefficient columns of non-sink nodes are
/// zero in the node-variant case.
pub fn design_anc(
    shift: &ShiftOperator,
    target: &LinearTarget,
    order: usize,
    kind: FilterKind,
    reduction: AncReduction,
) -> Result<DesignReport> {
    target.check_shift(shift)?;
    if order == 0 {
        return Err(Error::Parameter("order must be at least 1".into()));
    }
    let map = target
        .anc_map()
        .ok_or_else(|| Error::Precondition("target has no source/sink structure".into()))?;
    let n = shift.n();
    let e_r = map.e_r(n);
    let (e_s, rsqrt, reduced) = match reduction {
        AncReduction::BSR => (map.e_s(n), map.source_rx_sqrt().clone(), map.b_sr()),
        AncReduction::BR => (
            RMat::identity(n, n),
            target.rx_sqrt().clone(),
            e_r.transpose() * target.b(),
        ),
    };
    let criterion = if rsqrt == RMat::identity(rsqrt.nrows(), rsqrt.nrows()) {
        Criterion::Frobenius
    } else {
        Criterion::Mse
    };
    let pw = powers(shift.matrix(), order);
    let coefficients = match kind {
        FilterKind::NodeInvariant => {
            let blocks: Vec<RMat> = pw.iter().map(|p| e_r.transpose() * p * &e_s).collect();
            let th = theta(&blocks, &rsqrt);
            let c = lstsq_nested(&th, &vec_of(&(&reduced * &rsqrt)), PINV_RCOND);
            Coefficients::NodeInvariant {
                c: c.as_slice().to_vec(),
            }
        }
        FilterKind::NodeVariant => {
            let sinks = map.sinks();
            let solved: Vec<RVec> = sinks
                .par_iter()
                .enumerate()
                .map(|(pos, &r)| {
                    // Row j of Φ holds the powers [S^l]_{r, col_j} over the input columns.
                    let phi = RMat::from_fn(e_s.ncols(), order, |j, l| {
                        (pw[l].row(r) * e_s.column(j))[(0, 0)]
                    });
                    let rhs: RVec = reduced.row(pos).transpose();
                    lstsq_nested(&(&rsqrt * phi), &(&rsqrt * rhs), PINV_RCOND)
                })
                .collect();
            let mut c = RMat::zeros(order, n);
            for (&r, col) in sinks.iter().zip(&solved) {
                c.set_column(r, col);
            }
            Coefficients::node_variant(&c)
        }
    };
    let mut report = DesignReport::build(criterion, coefficients, shift, target);
    report.anc = Some(reduction);
    report.residuals = report.recompute(shift, target);
    Ok(report)
}
