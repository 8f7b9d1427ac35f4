//! Least-squares (minimum `Tr(R_d)`) designs.

use rayon::prelude::*;

use crate::design::{Coefficients, Criterion, DesignReport, LinearTarget};
use crate::error::{Error, Result};
use crate::linalg::{lstsq_nested, powers, vec_of, CMat, RMat, RVec, PINV_RCOND};
use crate::spectral::{ShiftOperator, SpectralData};

/// `Θ = [vec(S^l R)]_{l < L}` for a right factor `R`.
pub fn theta(powers: &[RMat], right: &RMat) -> RMat {
    let cols: Vec<RVec> = powers.iter().map(|p| vec_of(&(p * right))).collect();
    RMat::from_columns(&cols)
}

/// `Φ_i` built from powers: column `l` is `(S^l)ᵀ e_i`.
pub fn phi_power(powers: &[RMat], i: usize) -> RMat {
    let n = powers.first().map_or(0, |p| p.nrows());
    RMat::from_fn(n, powers.len(), |j, l| powers[l][(i, j)])
}

/// `Φ_i = (V⁻¹)ᵀ diag(u_i) Ψ`, the spectral form of [`phi_power`].
pub fn phi_spectral(spec: &SpectralData, i: usize, order: usize) -> CMat {
    spec.v_inv.transpose() * CMat::from_diagonal(&spec.u(i)) * spec.vandermonde(order)
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::Parameter("order must be at least 1".into()));
    }
    Ok(())
}

/// `c_Tr = Θ_Rx† vec(B Rx^{1/2})`.
pub fn design_mse_node_invariant(
    shift: &ShiftOperator,
    target: &LinearTarget,
    order: usize,
) -> Result<DesignReport> {
    target.check_shift(shift)?;
    check_order(order)?;
    let pw = powers(shift.matrix(), order);
    let th = theta(&pw, target.rx_sqrt());
    let rhs = vec_of(&(target.b() * target.rx_sqrt()));
    let c = lstsq_nested(&th, &rhs, PINV_RCOND);
    Ok(DesignReport::build(
        Criterion::Mse,
        Coefficients::NodeInvariant {
            c: c.as_slice().to_vec(),
        },
        shift,
        target,
    ))
}

/// Independent per-node solves `c_i = (Rx^{1/2} Φ_i)† Rx^{1/2} b_i`.
pub fn design_mse_node_variant(
    shift: &ShiftOperator,
    target: &LinearTarget,
    order: usize,
) -> Result<DesignReport> {
    target.check_shift(shift)?;
    check_order(order)?;
    let n = shift.n();
    let pw = powers(shift.matrix(), order);
    let r = target.rx_sqrt();
    let columns: Vec<RVec> = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = r * phi_power(&pw, i);
            let b_i: RVec = target.b().row(i).transpose();
            lstsq_nested(&a, &(r * b_i), PINV_RCOND)
        })
        .collect();
    let c = RMat::from_columns(&columns);
    Ok(DesignReport::build(
        Criterion::Mse,
        Coefficients::node_variant(&c),
        shift,
        target,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, shift_from_graph, GeneratorConfig, GraphModel, ShiftKind};
    use crate::linalg::to_complex;
    use crate::spectral::decompose;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn er_shift(n: usize, seed: u64) -> ShiftOperator {
        let cfg = GeneratorConfig::new(GraphModel::ErdosRenyi { p_edge: 0.4 }, n)
            .seed(seed)
            .connected(true);
        shift_from_graph(&generate(&cfg).unwrap(), ShiftKind::Adjacency).unwrap()
    }

    fn random_target(n: usize, seed: u64) -> LinearTarget {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LinearTarget::new(RMat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))).unwrap()
    }

    /// Householder QR least squares, independent of the SVD path.
    fn qr_lstsq(a: &RMat, b: &RVec) -> RVec {
        let qr = a.clone().qr();
        let rhs = qr.q().transpose() * b;
        qr.r().solve_upper_triangular(&rhs).unwrap()
    }

    #[test]
    fn order_one_is_trace_average() {
        let s = er_shift(7, 1);
        let t = random_target(7, 1);
        let r = design_mse_node_invariant(&s, &t, 1).unwrap();
        let Coefficients::NodeInvariant { c } = r.coefficients else {
            panic!()
        };
        assert!((c[0] - t.b().trace() / 7.0).abs() < 1e-13);
    }

    #[test]
    fn matches_qr_oracle() {
        let s = er_shift(8, 2);
        let t = random_target(8, 2);
        let r = design_mse_node_invariant(&s, &t, 3).unwrap();
        let pw = powers(s.matrix(), 3);
        let a = RMat::from_columns(&pw.iter().map(vec_of).collect::<Vec<_>>());
        let c = qr_lstsq(&a, &vec_of(t.b()));
        let oracle = (&a * &c - vec_of(t.b())).norm_squared();
        assert!((r.residuals.trace_rd - oracle).abs() < 1e-10 * oracle.max(1.0));
    }

    #[test]
    fn feasible_target_reaches_zero() {
        let s = er_shift(6, 3);
        let t = LinearTarget::new(s.matrix() * s.matrix() - s.matrix() * 2.0).unwrap();
        let r = design_mse_node_invariant(&s, &t, 4).unwrap();
        assert!(r.residuals.frob_rel < 1e-10);
    }

    #[test]
    fn node_variant_per_node_matches_qr_oracle() {
        let s = er_shift(8, 4);
        let t = random_target(8, 4);
        let r = design_mse_node_variant(&s, &t, 3).unwrap();
        let pw = powers(s.matrix(), 3);
        let mut total = 0.0;
        for i in 0..8 {
            let phi = phi_power(&pw, i);
            let b_i: RVec = t.b().row(i).transpose();
            let c = qr_lstsq(&phi, &b_i);
            total += (&phi * c - b_i).norm_squared();
        }
        assert!((r.residuals.trace_rd - total).abs() < 1e-10 * total.max(1.0));
    }

    #[test]
    fn node_variant_not_worse_than_node_invariant() {
        let s = er_shift(8, 5);
        let t = random_target(8, 5);
        for order in 1..=5 {
            let ni = design_mse_node_invariant(&s, &t, order).unwrap();
            let nv = design_mse_node_variant(&s, &t, order).unwrap();
            assert!(nv.residuals.trace_rd <= ni.residuals.trace_rd + 1e-10);
        }
    }

    #[test]
    fn phi_routes_agree() {
        let s = er_shift(6, 6);
        let spec = decompose(&s, None).unwrap();
        let pw = powers(s.matrix(), 4);
        for i in 0..6 {
            let diff = phi_spectral(&spec, i, 4) - to_complex(&phi_power(&pw, i));
            assert!(diff.norm() < 1e-9);
        }
    }

    #[test]
    fn weighted_design_uses_covariance() {
        let s = er_shift(6, 7);
        let t = random_target(6, 7);
        let rx = RMat::from_fn(6, 6, |i, j| 0.5f64.powi((i as i32 - j as i32).abs()));
        let tw = t.clone().with_covariance(&rx).unwrap();
        let r = design_mse_node_invariant(&s, &tw, 3).unwrap();
        let direct = (r.dense(&s) - t.b()) * tw.rx_sqrt();
        assert!((r.residuals.trace_rd - direct.norm_squared()).abs() < 1e-12);
        let plain = design_mse_node_invariant(&s, &t, 3).unwrap();
        let plain_weighted = ((plain.dense(&s) - t.b()) * tw.rx_sqrt()).norm_squared();
        assert!(r.residuals.trace_rd <= plain_weighted + 1e-12);
    }
}
