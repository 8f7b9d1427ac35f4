//! Approximation of operators whose eigenvectors drift away from the shift's.

use crate::design::{FilterKind, LinearTarget};
use crate::error::{Error, Result};
use crate::experiments::{
    design_degree, gaussian_vec, kind_label, perturbed_basis, run_trials, shared_basis,
    ExperimentConfig, ExperimentKind, ExperimentOutput, Record,
};
use crate::graph::generate_with;
use crate::linalg::{sym_eigen_desc, RMat, RVec};

/// `V_B diag(β) V_B⁻¹`.
fn operator_from_basis(v_b: &RMat, beta: &RVec) -> Result<RMat> {
    let inv = v_b
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Precondition("target basis is singular".into()))?;
    Ok(v_b * RMat::from_diagonal(beta) * inv)
}

/// Groups `sigma=<σ>` and `Q=<q>`, methods node-invariant and node-variant;
/// values are `‖Hx − Bx‖ / ‖Bx‖` for one standard-normal `x` per trial and
/// target.
pub fn run_robustness(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let trials = run_trials(config, |_, rng| {
        let g = generate_with(&config.graph, rng)?;
        let shift = config.shift.build(&g)?;
        if !shift.is_symmetric() {
            return Err(Error::Precondition(
                "robustness study needs a symmetric shift".into(),
            ));
        }
        let n = g.n();
        let (_, v) = sym_eigen_desc(shift.matrix());
        let x = gaussian_vec(n, rng);
        let mut targets = Vec::new();
        for &sigma in &config.perturbation.sigmas {
            targets.push((format!("sigma={sigma}"), perturbed_basis(&v, sigma, rng)?));
        }
        for &q in &config.perturbation.qs {
            targets.push((format!("Q={q}"), shared_basis(&v, q, rng)?));
        }
        let mut records = Vec::new();
        for (group, v_b) in targets {
            let beta = gaussian_vec(n, rng);
            let target = LinearTarget::new(operator_from_basis(&v_b, &beta)?)?;
            let bx = target.b() * &x;
            for k in config.degrees() {
                for kind in [FilterKind::NodeInvariant, FilterKind::NodeVariant] {
                    let h = design_degree(config, kind, &shift, &target, k)?.dense(&shift);
                    records.push(Record::new(
                        group.clone(),
                        kind_label(kind),
                        k,
                        (&h * &x - &bx).norm() / bx.norm(),
                    ));
                }
            }
        }
        Ok(records)
    })?;
    Ok(ExperimentOutput::from_trials(
        ExperimentKind::Robustness,
        trials,
        Vec::new(),
    ))
}
