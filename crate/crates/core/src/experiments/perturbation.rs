//! Eigenbases at controlled distance from the eigenvectors of a shift.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::gaussian_mat;
use crate::linalg::{robust_svd, RMat};

/// Bases with condition number above this are redrawn.
pub const MAX_BASIS_COND: f64 = 1e12;

const MAX_REDRAWS: usize = 100;

/// Noise levels `σ` and shared-eigenvector counts `Q` of the robustness study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub sigmas: Vec<f64>,
    pub qs: Vec<usize>,
}

fn normalize_columns(m: &mut RMat) {
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
}

fn condition(m: &RMat) -> f64 {
    let sv = robust_svd(m).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn redraw<R: Rng + ?Sized, F: FnMut(&mut R) -> RMat>(rng: &mut R, mut draw: F) -> Result<RMat> {
    for _ in 0..MAX_REDRAWS {
        let m = draw(rng);
        if condition(&m) <= MAX_BASIS_COND {
            return Ok(m);
        }
    }
    Err(Error::Generation {
        attempts: MAX_REDRAWS,
        reason: "perturbed basis stayed near-singular".into(),
    })
}

/// Columns of `V + σ Z∘V` normalised to unit norm, `Z` standard normal.
pub fn perturbed_basis<R: Rng>(v: &RMat, sigma: f64, rng: &mut R) -> Result<RMat> {
    redraw(rng, |rng| {
        let z = gaussian_mat(v.nrows(), v.ncols(), rng);
        let mut m = v + z.component_mul(v) * sigma;
        normalize_columns(&mut m);
        m
    })
}

/// `q` columns of `V` kept in place, the rest replaced by unit-norm
/// standard-normal vectors.
pub fn shared_basis<R: Rng>(v: &RMat, q: usize, rng: &mut R) -> Result<RMat> {
    let n = v.ncols();
    if q > n {
        return Err(Error::Parameter(format!(
            "Q = {q} exceeds the {n} available eigenvectors"
        )));
    }
    redraw(rng, |rng| {
        let kept = sample(rng, n, q).into_vec();
        let mut m = gaussian_mat(v.nrows(), n, rng);
        normalize_columns(&mut m);
        for &j in &kept {
            m.set_column(j, &v.column(j));
        }
        m
    })
}
