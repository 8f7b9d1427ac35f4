//! Perfect-implementation checks and exact designs.

use crate::design::{
    Coefficients, Condition, Criterion, DesignReport, Feasibility, LinearTarget, Violation,
};
use crate::error::{Error, Result};
use crate::filters::{realize, realize_node_variant};
use crate::linalg::{lstsq, to_complex, CMat, CVec, C64};
use crate::spectral::{vandermonde_of, ShiftOperator, SpectralData};

/// Relative tolerance of the feasibility conditions.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Entries of `V` below this magnitude count as zero.
const ZERO_ENTRY: f64 = 1e-10;

/// Cutoff for the consistent per-class systems, which are square or
/// underdetermined but can be badly conditioned for clustered spectra.
const EXACT_RCOND: f64 = 1e-15;

/// Solves `ψ(λ̄_j)ᵀ c = r_j` over the eigenvalue classes with weights
/// `w_k`, where `r_j` is the weighted mean of `rhs_k / w_k` over class `j`.
/// Classes with zero total weight impose nothing.
fn solve_per_class(spec: &SpectralData, order: usize, weights: &CVec, rhs: &CVec) -> CVec {
    let mut nodes = Vec::new();
    let mut values = Vec::new();
    for class in &spec.classes {
        let mass: f64 = class.iter().map(|&k| weights[k].norm_sqr()).sum();
        if mass == 0.0 {
            continue;
        }
        let mean =
            class.iter().map(|&k| spec.lambda[k]).sum::<C64>() / C64::new(class.len() as f64, 0.0);
        let value = class
            .iter()
            .map(|&k| weights[k].conj() * rhs[k])
            .sum::<C64>()
            / C64::new(mass, 0.0);
        nodes.push(mean);
        values.push(value);
    }
    let psi = vandermonde_of(&CVec::from_vec(nodes), order);
    lstsq(&psi, &CVec::from_vec(values), EXACT_RCOND)
}

pub fn check_perfect_node_invariant(
    spec: &SpectralData,
    target: &LinearTarget,
    order: usize,
) -> Feasibility {
    let n = spec.n();
    let scale = target.b().norm();
    let m = &spec.v_inv * to_complex(target.b()) * &spec.v;
    let mut violations = Vec::new();

    let mut off = 0.0;
    let mut worst = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                off += m[(i, j)].norm_sqr();
                if m[(i, j)].norm() > FEASIBILITY_TOL * scale && worst.len() < 8 {
                    worst.push(i);
                }
            }
        }
    }
    let cond_a = off.sqrt() <= FEASIBILITY_TOL * scale;
    if !cond_a {
        worst.dedup();
        violations.push(Violation {
            condition: Condition::A,
            node: None,
            indices: worst,
        });
    }

    let beta = m.diagonal();
    let mut cond_b = true;
    for class in &spec.classes {
        let spread = class
            .iter()
            .flat_map(|&a| class.iter().map(move |&b| (a, b)))
            .map(|(a, b)| (beta[a] - beta[b]).norm())
            .fold(0.0, f64::max);
        if spread > FEASIBILITY_TOL * scale {
            cond_b = false;
            violations.push(Violation {
                condition: Condition::B,
                node: None,
                indices: class.clone(),
            });
        }
    }

    let cond_c = order >= spec.distinct();
    if !cond_c {
        violations.push(Violation {
            condition: Condition::C,
            node: None,
            indices: vec![],
        });
    }
    Feasibility {
        cond_a,
        cond_b,
        cond_c,
        order,
        distinct: spec.distinct(),
        violations,
    }
}

/// `c* = Ψ† β` with `β = diag(V⁻¹ B V)`.
pub fn design_perfect_node_invariant(
    shift: &ShiftOperator,
    spec: &SpectralData,
    target: &LinearTarget,
    order: usize,
) -> Result<DesignReport> {
    target.check_shift(shift)?;
    if order == 0 {
        return Err(Error::Parameter("order must be at least 1".into()));
    }
    let feasibility = check_perfect_node_invariant(spec, target, order);
    require_structure(&feasibility)?;
    let psi = spec.vandermonde(order);
    let beta = target.beta(spec);
    let c = solve_per_class(
        spec,
        order,
        &CVec::from_element(spec.n(), C64::new(1.0, 0.0)),
        &beta,
    );
    require_solved(&feasibility, (&psi * &c - &beta).norm(), beta.norm())?;
    let c = realize(&c, shift.matrix())?;
    let mut report = DesignReport::build(
        Criterion::Perfect,
        Coefficients::NodeInvariant { c },
        shift,
        target,
    );
    report.feasibility = Some(feasibility);
    Ok(report)
}

/// Conditions a and b are required; condition c is only sufficient.
fn require_structure(feasibility: &Feasibility) -> Result<()> {
    if feasibility.cond_a && feasibility.cond_b {
        Ok(())
    } else {
        Err(Error::Infeasible(feasibility.describe()))
    }
}

/// Below the distinct-eigenvalue count the frequency system may still be
/// consistent (e.g. a constant response); accept it only when solved exactly.
fn require_solved(feasibility: &Feasibility, misfit: f64, scale: f64) -> Result<()> {
    if feasibility.cond_c || misfit <= FEASIBILITY_TOL * scale.max(1.0) {
        Ok(())
    } else {
        Err(Error::Infeasible(feasibility.describe()))
    }
}

/// `b̃_i = Vᵀ b_i` with `b_i = Bᵀ e_i` for every node.
fn b_tilde(spec: &SpectralData, target: &LinearTarget) -> CMat {
    spec.v.transpose() * to_complex(&target.b().transpose())
}

pub fn check_perfect_node_variant(
    spec: &SpectralData,
    target: &LinearTarget,
    order: usize,
) -> Feasibility {
    let n = spec.n();
    let scale = target.b().norm();
    let bt = b_tilde(spec, target);
    let mut violations = Vec::new();
    let (mut cond_a, mut cond_b) = (true, true);
    for i in 0..n {
        let zero: Vec<usize> = (0..n)
            .filter(|&k| spec.v[(i, k)].norm() < ZERO_ENTRY)
            .collect();
        let bad: Vec<usize> = zero
            .iter()
            .copied()
            .filter(|&k| bt[(k, i)].norm() > FEASIBILITY_TOL * scale)
            .collect();
        if !bad.is_empty() {
            cond_a = false;
            violations.push(Violation {
                condition: Condition::A,
                node: Some(i),
                indices: bad,
            });
        }
        for class in &spec.classes {
            // Equal ratios b̃_k / u_k, tested as vanishing cross products.
            let mut mismatch = Vec::new();
            for (x, &k1) in class.iter().enumerate() {
                for &k2 in &class[x + 1..] {
                    let cross = bt[(k1, i)] * spec.v[(i, k2)] - bt[(k2, i)] * spec.v[(i, k1)];
                    if cross.norm() > FEASIBILITY_TOL * scale {
                        mismatch.push(k1);
                        mismatch.push(k2);
                    }
                }
            }
            if !mismatch.is_empty() {
                mismatch.sort_unstable();
                mismatch.dedup();
                cond_b = false;
                violations.push(Violation {
                    condition: Condition::B,
                    node: Some(i),
                    indices: mismatch,
                });
            }
        }
    }
    let cond_c = order >= spec.distinct();
    if !cond_c {
        violations.push(Violation {
            condition: Condition::C,
            node: None,
            indices: vec![],
        });
    }
    Feasibility {
        cond_a,
        cond_b,
        cond_c,
        order,
        distinct: spec.distinct(),
        violations,
    }
}

/// Per-node solve of `diag(u_i) Ψ c_i = b̃_i`; `order` defaults to `n`.
pub fn design_perfect_node_variant(
    shift: &ShiftOperator,
    spec: &SpectralData,
    target: &LinearTarget,
    order: Option<usize>,
) -> Result<DesignReport> {
    target.check_shift(shift)?;
    let n = spec.n();
    let order = order.unwrap_or(n);
    if order == 0 {
        return Err(Error::Parameter("order must be at least 1".into()));
    }
    let feasibility = check_perfect_node_variant(spec, target, order);
    require_structure(&feasibility)?;
    let psi = spec.vandermonde(order);
    let bt = b_tilde(spec, target);
    let mut c = CMat::zeros(order, n);
    let mut misfit: f64 = 0.0;
    for i in 0..n {
        let u = CVec::from_iterator(
            n,
            spec.u(i).iter().map(|&z| {
                if z.norm() < ZERO_ENTRY {
                    C64::new(0.0, 0.0)
                } else {
                    z
                }
            }),
        );
        let a = CMat::from_diagonal(&u) * &psi;
        let rhs: CVec = bt.column(i).into_owned();
        let ci = solve_per_class(spec, order, &u, &rhs);
        misfit = misfit.hypot((&a * &ci - rhs).norm());
        c.set_column(i, &ci);
    }
    require_solved(&feasibility, misfit, bt.norm())?;
    let c = realize_node_variant(&c, shift.matrix())?;
    let mut report = DesignReport::build(
        Criterion::Perfect,
        Coefficients::node_variant(&c),
        shift,
        target,
    );
    report.feasibility = Some(feasibility);
    Ok(report)
}
