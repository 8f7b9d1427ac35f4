//! Worst-case-error designs: minimise `λ_max((H − B) Rx (H − B)ᵀ)`.
//!
//! The objective is the squared spectral norm of an affine matrix function
//! `M(y) = Σ_j y_j Q_j − B_w`. It is minimised in an orthonormal basis of
//! the filter subspace through log-sum-exp smoothing with continuation and
//! BFGS. Every stage produces a dual lower bound from weights on the top
//! eigenvectors, so the returned value carries a certified relative gap.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::design::mse::theta;
use crate::design::{
    require_positive_definite, Coefficients, Criterion, DesignReport, LinearTarget,
};
use crate::error::{Error, Result};
use crate::linalg::{powers, robust_svd, vec_of, RMat, RVec, PINV_RCOND};
use crate::spectral::ShiftOperator;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WceOptions {
    /// Cap on accepted quasi-Newton steps over all stages.
    pub max_iter: usize,
    pub rel_gap: f64,
    pub max_stages: usize,
}

impl Default for WceOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            rel_gap: 1e-4,
            max_stages: 12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WceCertificate {
    /// Best `λ_max(R_d)` found by the solver.
    pub value: f64,
    pub lower_bound: f64,
    pub rel_gap: f64,
    pub target_gap: f64,
    pub iterations: usize,
    pub certified: bool,
}

/// `M(y) = mat(Q y) − B_w` with orthonormal columns `Q` spanning the filter
/// subspace; coefficients are recovered as `c = map · y`.
struct Affine {
    n: usize,
    q: RMat,
    map: RMat,
    target: RMat,
}

impl Affine {
    fn new(basis: &RMat, target: &RMat) -> Self {
        let n = target.nrows();
        let p = basis.ncols();
        let mut scaled = basis.clone();
        let mut inv = vec![0.0; p];
        for (j, inv_j) in inv.iter_mut().enumerate() {
            let norm = basis.column(j).norm();
            if norm > 0.0 {
                *inv_j = 1.0 / norm;
                scaled.column_mut(j).scale_mut(1.0 / norm);
            }
        }
        let svd = robust_svd(&scaled);
        let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
        let sigma = svd.singular_values;
        let top = sigma.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..sigma.len())
            .filter(|&k| top > 0.0 && sigma[k] > PINV_RCOND * top)
            .collect();
        let mut q = RMat::zeros(basis.nrows(), keep.len());
        let mut map = RMat::zeros(p, keep.len());
        for (col, &k) in keep.iter().enumerate() {
            q.set_column(col, &u.column(k));
            for j in 0..p {
                map[(j, col)] = v_t[(k, j)] * inv[j] / sigma[k];
            }
        }
        Self {
            n,
            q,
            map,
            target: target.clone(),
        }
    }

    fn dim(&self) -> usize {
        self.q.ncols()
    }

    fn residual(&self, y: &RVec) -> RMat {
        RMat::from_column_slice(self.n, self.n, (&self.q * y).as_slice()) - &self.target
    }

    fn basis_matrix(&self, j: usize) -> RMat {
        RMat::from_column_slice(self.n, self.n, self.q.column(j).as_slice())
    }
}

struct Eval {
    smooth: f64,
    grad: RVec,
    top: f64,
    vectors: RMat,
    weights: Vec<f64>,
}

fn evaluate(prob: &Affine, y: &RVec, beta: f64) -> Eval {
    let m = prob.residual(y);
    let eig = SymmetricEigen::new(&m * m.transpose());
    let top = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&ev| (beta * (ev - top)).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= z);
    let u = &eig.eigenvectors;
    let mut p = RMat::zeros(prob.n, prob.n);
    for (k, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            p.ger(w, &u.column(k), &u.column(k), 1.0);
        }
    }
    let grad_mat = (p * &m) * 2.0;
    let grad = prob.q.transpose() * vec_of(&grad_mat);
    Eval {
        smooth: top + z.ln() / beta,
        grad,
        top,
        vectors: eig.eigenvectors,
        weights,
    }
}

/// Lower bound `max_w min_y Σ_i w_i ‖M(y)ᵀ u_i‖²` over the simplex on the
/// given atoms, by Frank-Wolfe ascent from `w0`.
fn dual_bound(prob: &Affine, atoms: &RMat, w0: &[f64], stop_at: f64, tol: f64) -> f64 {
    let (n, r) = (prob.n, prob.dim());
    let k = atoms.ncols();
    let mut a = vec![RMat::zeros(n, r); k];
    for j in 0..r {
        let prod = prob.basis_matrix(j).transpose() * atoms;
        for (i, ai) in a.iter_mut().enumerate() {
            ai.set_column(j, &prod.column(i));
        }
    }
    let bt = prob.target.transpose() * atoms;
    let b: Vec<RVec> = (0..k).map(|i| bt.column(i).into_owned()).collect();
    let grams: Vec<RMat> = a.iter().map(|ai| ai.transpose() * ai).collect();
    let hs: Vec<RVec> = a
        .iter()
        .zip(&b)
        .map(|(ai, bi)| ai.transpose() * bi)
        .collect();

    let phi = |w: &[f64]| -> (f64, Vec<f64>) {
        let mut g = RMat::zeros(r, r);
        let mut h = RVec::zeros(r);
        for i in 0..k {
            if w[i] > 0.0 {
                g += &grams[i] * w[i];
                h += &hs[i] * w[i];
            }
        }
        let z = sym_pinv_apply(&g, &h);
        let d: Vec<f64> = (0..k)
            .map(|i| (&a[i] * &z - &b[i]).norm_squared())
            .collect();
        let value = w.iter().zip(&d).map(|(wi, di)| wi * di).sum();
        (value, d)
    };

    let mut w = w0.to_vec();
    let (mut value, mut d) = phi(&w);
    let mut best = value;
    for _ in 0..60 {
        if best >= stop_at {
            break;
        }
        let (star, &dmax) = d
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1))
            .expect("at least one atom");
        if dmax - value <= tol {
            break;
        }
        let mix = |t: f64| -> Vec<f64> {
            let mut v: Vec<f64> = w.iter().map(|wi| wi * (1.0 - t)).collect();
            v[star] += t;
            v
        };
        // Golden-section search of the concave segment.
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (0.0, 1.0);
        let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        let (mut f1, mut f2) = (phi(&mix(x1)).0, phi(&mix(x2)).0);
        for _ in 0..24 {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = phi(&mix(x2)).0;
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = phi(&mix(x1)).0;
            }
        }
        let t = 0.5 * (lo + hi);
        let next = mix(t);
        let (v, dn) = phi(&next);
        if v <= value {
            break;
        }
        w = next;
        value = v;
        d = dn;
        best = best.max(value);
    }
    best
}

/// `G⁺ h` for symmetric positive semidefinite `G`.
fn sym_pinv_apply(g: &RMat, h: &RVec) -> RVec {
    let eig = SymmetricEigen::new(g.clone());
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cut = f64::EPSILON * g.nrows() as f64 * top;
    let mut z = RVec::zeros(g.nrows());
    for (k, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > cut {
            let v = eig.eigenvectors.column(k);
            z += v * (v.dot(h) / ev);
        }
    }
    z
}

struct Solution {
    y: RVec,
    certificate: WceCertificate,
}

fn minimize(prob: &Affine, opts: &WceOptions) -> Solution {
    let r = prob.dim();
    let mut y = prob.q.transpose() * vec_of(&prob.target);
    let start = evaluate(prob, &y, 1.0).top;
    let mut best_y = y.clone();
    let mut best = start;
    let mut lower: f64 = 0.0;
    let mut iterations = 0;
    let floor = 1e-28 * prob.target.norm_squared().max(1.0);
    let done = |best: f64, lower: f64| best <= floor || best - lower <= opts.rel_gap * best;
    if r == 0 || done(best, lower) {
        return finish(
            best_y,
            best,
            lower,
            iterations,
            opts,
            best <= floor || r == 0,
        );
    }
    let mut beta = 10.0 / start.max(f64::MIN_POSITIVE);
    let mut evals = 0usize;
    for _ in 0..opts.max_stages {
        let mut inv_h = RMat::identity(r, r);
        let mut cur = evaluate(prob, &y, beta);
        for _ in 0..400 {
            if iterations >= opts.max_iter {
                break;
            }
            let mut dir = -(&inv_h * &cur.grad);
            let mut slope = cur.grad.dot(&dir);
            if slope >= 0.0 {
                inv_h = RMat::identity(r, r);
                dir = -cur.grad.clone();
                slope = -cur.grad.norm_squared();
            }
            let mut t = 1.0;
            let next = loop {
                let cand = &y + &dir * t;
                let e = evaluate(prob, &cand, beta);
                evals += 1;
                if e.smooth <= cur.smooth + 1e-4 * t * slope || t < 1e-12 {
                    break (cand, e);
                }
                t *= 0.5;
            };
            if t < 1e-12 && next.1.smooth >= cur.smooth {
                break;
            }
            let s = &next.0 - &y;
            let dg = &next.1.grad - &cur.grad;
            let sy = s.dot(&dg);
            if sy > 1e-300 {
                let rho = 1.0 / sy;
                let hy = &inv_h * &dg;
                let yhy = dg.dot(&hy);
                // Sherman-Morrison form of the inverse BFGS update.
                inv_h += (&s * s.transpose()) * (rho * (1.0 + rho * yhy))
                    - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            }
            y = next.0;
            cur = next.1;
            iterations += 1;
            if cur.top < best {
                best = cur.top;
                best_y = y.clone();
            }
            if cur.grad.norm() <= 1e-13 * cur.smooth.abs().max(1e-300) || evals > 50 * opts.max_iter
            {
                break;
            }
        }
        if cur.top < best {
            best = cur.top;
            best_y = y.clone();
        }
        let atoms_eval = evaluate(prob, &best_y, beta);
        let stop_at = best * (1.0 - opts.rel_gap);
        lower = lower.max(dual_bound(
            prob,
            &atoms_eval.vectors,
            &atoms_eval.weights,
            stop_at,
            0.1 * opts.rel_gap * best,
        ));
        if done(best, lower) || iterations >= opts.max_iter || evals > 50 * opts.max_iter {
            break;
        }
        beta *= 10.0;
    }
    let certified = done(best, lower);
    finish(best_y, best, lower, iterations, opts, certified)
}

fn finish(
    y: RVec,
    value: f64,
    lower: f64,
    iterations: usize,
    opts: &WceOptions,
    certified: bool,
) -> Solution {
    let gap = if value > 0.0 {
        ((value - lower) / value).max(0.0)
    } else {
        0.0
    };
    Solution {
        y,
        certificate: WceCertificate {
            value,
            lower_bound: lower.min(value),
            rel_gap: gap,
            target_gap: opts.rel_gap,
            iterations,
            certified,
        },
    }
}

/// Runs the solver and falls back to the MSE coefficients when they score
/// better after rounding to the monomial basis.
fn solve(
    basis: &RMat,
    weighted_target: &RMat,
    shift: &ShiftOperator,
    target: &LinearTarget,
    wrap: impl Fn(Vec<f64>) -> Coefficients,
    mse: DesignReport,
    opts: &WceOptions,
) -> Result<DesignReport> {
    let prob = Affine::new(basis, weighted_target);
    let sol = minimize(&prob, opts);
    let c = &prob.map * &sol.y;
    let mut report =
        DesignReport::build(Criterion::Wce, wrap(c.as_slice().to_vec()), shift, target);
    if mse.residuals.lambda_max_rd < report.residuals.lambda_max_rd {
        report = DesignReport {
            criterion: Criterion::Wce,
            ..mse
        };
    }
    report.wce = Some(sol.certificate);
    if !sol.certificate.certified {
        return Err(Error::Convergence {
            iterations: sol.certificate.iterations,
            gap: sol.certificate.rel_gap,
            best: Box::new(report),
        });
    }
    Ok(report)
}

pub fn design_wce_node_invariant(
    shift: &ShiftOperator,
    target: &LinearTarget,
    order: usize,
    opts: &WceOptions,
) -> Result<DesignReport> {
    require_positive_definite(target.rx_sqrt())?;
    let mse = crate::design::design_mse_node_invariant(shift, target, order)?;
    let pw = powers(shift.matrix(), order);
    let basis = theta(&pw, target.rx_sqrt());
    let bw = target.b() * target.rx_sqrt();
    solve(
        &basis,
        &bw,
        shift,
        target,
        |c| Coefficients::NodeInvariant { c },
        mse,
        opts,
    )
}

/// Joint design over all `L × N` coefficients.
pub fn design_wce_node_variant(
    shift: &ShiftOperator,
    target: &LinearTarget,
    order: usize,
    opts: &WceOptions,
) -> Result<DesignReport> {
    require_positive_definite(target.rx_sqrt())?;
    let mse = crate::design::design_mse_node_variant(shift, target, order)?;
    let n = shift.n();
    let pw = powers(shift.matrix(), order);
    let weighted: Vec<RMat> = pw.iter().map(|p| p * target.rx_sqrt()).collect();
    // Column i * L + l holds vec(e_i e_iᵀ S^l Rx^{1/2}).
    let mut basis = RMat::zeros(n * n, n * order);
    for i in 0..n {
        for (l, w) in weighted.iter().enumerate() {
            let col = i * order + l;
            for j in 0..n {
                basis[(j * n + i, col)] = w[(i, j)];
            }
        }
    }
    let bw = target.b() * target.rx_sqrt();
    let wrap = move |c: Vec<f64>| {
        let m = RMat::from_fn(order, n, |l, i| c[i * order + l]);
        Coefficients::node_variant(&m)
    };
    solve(&basis, &bw, shift, target, wrap, mse, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::design_mse_node_invariant;
    use crate::graph::{generate, shift_from_graph, GeneratorConfig, GraphModel, ShiftKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn er_shift(n: usize, seed: u64) -> ShiftOperator {
        let cfg = GeneratorConfig::new(GraphModel::ErdosRenyi { p_edge: 0.4 }, n)
            .seed(seed)
            .connected(true);
        shift_from_graph(&generate(&cfg).unwrap(), ShiftKind::Adjacency).unwrap()
    }

    #[test]
    fn scalar_minimax_on_identity_shift() {
        let s = ShiftOperator::from_matrix(RMat::identity(2, 2)).unwrap();
        let t = LinearTarget::new(RMat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])).unwrap();
        let r = design_wce_node_invariant(&s, &t, 1, &WceOptions::default()).unwrap();
        let Coefficients::NodeInvariant { c } = &r.coefficients else {
            panic!()
        };
        // max(c0², (c0 − 1)²) is minimised at c0 = 1/2.
        assert!((c[0] - 0.5).abs() < 1e-4);
        assert!((r.residuals.lambda_max_rd - 0.25).abs() < 1e-4 * 0.25);
    }

    #[test]
    fn feasible_target_reaches_zero() {
        let s = er_shift(6, 1);
        let t = LinearTarget::new(s.matrix() * 0.5 + RMat::identity(6, 6)).unwrap();
        let r = design_wce_node_invariant(&s, &t, 3, &WceOptions::default()).unwrap();
        assert!(r.residuals.lambda_max_rd < 1e-8);
    }

    #[test]
    fn certificate_pair_on_random_instance() {
        let s = er_shift(8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = LinearTarget::new(RMat::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let mse = design_mse_node_invariant(&s, &t, 3).unwrap();
        let wce = design_wce_node_invariant(&s, &t, 3, &WceOptions::default()).unwrap();
        assert!(wce.residuals.lambda_max_rd <= mse.residuals.lambda_max_rd + 1e-6);
        assert!(mse.residuals.trace_rd <= wce.residuals.trace_rd + 1e-10);
        let cert = wce.wce.unwrap();
        assert!(cert.certified && cert.rel_gap <= 1e-4);
        assert!(cert.lower_bound <= wce.residuals.lambda_max_rd * (1.0 + 1e-9));
    }

    #[test]
    fn node_variant_diagonal_minimax() {
        // Diagonal S makes every node-variant filter diagonal; the best
        // diagonal approximation of [[1, 1], [0, 3]] leaves ‖[[0, -1], [0, 0]]‖ = 1.
        let s =
            ShiftOperator::from_matrix(RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0])).unwrap();
        let t = LinearTarget::new(RMat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 3.0])).unwrap();
        let r = design_wce_node_variant(&s, &t, 1, &WceOptions::default()).unwrap();
        assert!((r.residuals.lambda_max_rd - 1.0).abs() < 1e-4);
    }

    #[test]
    fn node_variant_not_worse_than_node_invariant() {
        let s = er_shift(5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = LinearTarget::new(RMat::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let opts = WceOptions::default();
        let ni = design_wce_node_invariant(&s, &t, 2, &opts).unwrap();
        let nv = design_wce_node_variant(&s, &t, 2, &opts).unwrap();
        assert!(nv.residuals.lambda_max_rd <= ni.residuals.lambda_max_rd * (1.0 + 1e-4) + 1e-12);
    }

    #[test]
    fn singular_covariance_is_rejected() {
        let s = er_shift(3, 4);
        let rx = RMat::from_element(3, 3, 1.0);
        let t = LinearTarget::consensus(3).with_covariance(&rx).unwrap();
        assert!(matches!(
            design_wce_node_invariant(&s, &t, 2, &WceOptions::default()),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn exhausted_budget_returns_best_iterate() {
        let s = er_shift(8, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = LinearTarget::new(RMat::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0))).unwrap();
        let opts = WceOptions {
            max_iter: 1,
            max_stages: 1,
            ..WceOptions::default()
        };
        match design_wce_node_invariant(&s, &t, 4, &opts) {
            Err(Error::Convergence { best, .. }) => {
                let mse = design_mse_node_invariant(&s, &t, 4).unwrap();
                assert!(best.residuals.lambda_max_rd <= mse.residuals.lambda_max_rd + 1e-12);
            }
            Ok(r) => assert!(r.wce.unwrap().certified),
            Err(e) => panic!("{e}"),
        }
    }
}
