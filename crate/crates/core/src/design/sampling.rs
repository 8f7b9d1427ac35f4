//! Monte-Carlo error estimates over Gaussian signal ensembles.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::RMat;

/// Signals drawn per RNG stream.
const CHUNK: usize = 4096;

/// `count` signals `x = Rx^{1/2} z` with `z` standard normal.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalEnsemble {
    pub count: usize,
    pub rx_sqrt: RMat,
    pub seed: u64,
}

impl SignalEnsemble {
    pub fn white(n: usize, count: usize, seed: u64) -> Self {
        Self {
            count,
            rx_sqrt: RMat::identity(n, n),
            seed,
        }
    }

    pub fn n(&self) -> usize {
        self.rx_sqrt.nrows()
    }

    /// Signals `[start, start + len)` of chunk `chunk`, as columns.
    fn chunk(&self, chunk: usize) -> RMat {
        let start = chunk * CHUNK;
        let len = CHUNK.min(self.count - start);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chunk as u64);
        let z = RMat::from_fn(self.n(), len, |_, _| StandardNormal.sample(&mut rng));
        &self.rx_sqrt * z
    }

    fn chunks(&self) -> usize {
        self.count.div_ceil(CHUNK)
    }
}

/// All signals of the ensemble as columns of an `N × count` matrix.
pub fn draw_signals(ensemble: &SignalEnsemble) -> RMat {
    let parts: Vec<RMat> = (0..ensemble.chunks())
        .into_par_iter()
        .map(|k| ensemble.chunk(k))
        .collect();
    let mut out = RMat::zeros(ensemble.n(), ensemble.count);
    for (k, part) in parts.iter().enumerate() {
        out.columns_mut(k * CHUNK, part.ncols()).copy_from(part);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorNorm {
    /// `‖Hx − Bx‖`.
    Absolute,
    /// `‖Hx − Bx‖ / ‖Bx‖`.
    RelativeToTarget,
    /// `‖Hx − Bx‖ / ‖x‖`.
    RelativeToInput,
}

/// Per-signal errors in ensemble order.
pub fn signal_errors(
    h: &RMat,
    b: &RMat,
    ensemble: &SignalEnsemble,
    norm: ErrorNorm,
) -> Result<Vec<f64>> {
    let n = ensemble.n();
    if h.shape() != (n, n) || b.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "operators must be {n}x{n} to match the ensemble"
        )));
    }
    let d = h - b;
    let parts: Vec<Vec<f64>> = (0..ensemble.chunks())
        .into_par_iter()
        .map(|k| {
            let x = ensemble.chunk(k);
            let err = &d * &x;
            let scale = match norm {
                ErrorNorm::Absolute => None,
                ErrorNorm::RelativeToTarget => Some(b * &x),
                ErrorNorm::RelativeToInput => Some(x.clone()),
            };
            (0..x.ncols())
                .map(|j| {
                    let e = err.column(j).norm();
                    match &scale {
                        None => e,
                        Some(s) => e / s.column(j).norm(),
                    }
                })
                .collect()
        })
        .collect();
    Ok(parts.concat())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean: f64,
    pub max: f64,
    pub count: usize,
}

impl SampleStats {
    pub fn of(errors: &[f64]) -> Self {
        let count = errors.len();
        let mean = if count == 0 {
            0.0
        } else {
            errors.iter().sum::<f64>() / count as f64
        };
        Self {
            mean,
            max: errors.iter().cloned().fold(0.0, f64::max),
            count,
        }
    }
}

/// Mean and maximum of the per-signal errors of `h` against `b`.
pub fn sample_error(
    h: &RMat,
    b: &RMat,
    ensemble: &SignalEnsemble,
    norm: ErrorNorm,
) -> Result<SampleStats> {
    Ok(SampleStats::of(&signal_errors(h, b, ensemble, norm)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_operator_has_zero_error() {
        let b = RMat::from_fn(4, 4, |i, j| (i + 2 * j) as f64);
        let stats = sample_error(
            &b,
            &b,
            &SignalEnsemble::white(4, 100, 1),
            ErrorNorm::Absolute,
        )
        .unwrap();
        assert_eq!((stats.mean, stats.max), (0.0, 0.0));
    }

    #[test]
    fn single_signal_matches_direct_norm() {
        let ens = SignalEnsemble::white(3, 1, 7);
        let x = draw_signals(&ens);
        let h = RMat::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 0.0, 3.0, 0.0, 1.0]);
        let b = RMat::identity(3, 3);
        let direct = ((&h - &b) * &x).norm();
        let stats = sample_error(&h, &b, &ens, ErrorNorm::Absolute).unwrap();
        assert!((stats.mean - direct).abs() < 1e-14 && (stats.max - direct).abs() < 1e-14);
        let rel = sample_error(&h, &b, &ens, ErrorNorm::RelativeToInput).unwrap();
        assert!((rel.mean - direct / x.norm()).abs() < 1e-14);
    }

    #[test]
    fn draws_are_deterministic_and_chunk_aligned() {
        let ens = SignalEnsemble::white(2, CHUNK + 10, 3);
        let a = draw_signals(&ens);
        assert_eq!(a, draw_signals(&ens));
        assert_eq!(a.ncols(), CHUNK + 10);
        assert_ne!(a.column(0), a.column(CHUNK));
    }

    #[test]
    fn covariance_shapes_the_draws() {
        let sqrt = RMat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let ens = SignalEnsemble {
            count: 20000,
            rx_sqrt: sqrt,
            seed: 5,
        };
        let x = draw_signals(&ens);
        let var0 = x.row(0).norm_squared() / 20000.0;
        let var1 = x.row(1).norm_squared() / 20000.0;
        assert!((var0 - 4.0).abs() < 0.2 && (var1 - 0.25).abs() < 0.02);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let ens = SignalEnsemble::white(3, 5, 1);
        assert!(sample_error(
            &RMat::identity(2, 2),
            &RMat::identity(2, 2),
            &ens,
            ErrorNorm::Absolute
        )
        .is_err());
    }
}
