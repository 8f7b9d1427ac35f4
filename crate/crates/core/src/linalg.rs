//! Dense linear-algebra helpers shared by the spectral and design modules.

use nalgebra::{ComplexField, DMatrix, DVector, Dyn, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type C64 = nalgebra::Complex<f64>;
pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<C64>;
pub type RVec = DVector<f64>;
pub type CVec = DVector<C64>;

/// Relative singular-value cutoff used by every pseudoinverse.
pub const PINV_RCOND: f64 = 1e-10;

const SVD_MAX_ITER: usize = 10_000;

/// Thin SVD with bounded iterations. When the direct iteration stalls, the
/// decomposition is taken from the adjoint, then from the triangular factor
/// of a QR, then from that factor's adjoint, with a relaxed tolerance last.
pub fn robust_svd<T>(a: &DMatrix<T>) -> SVD<T, Dyn, Dyn>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let adjoint_of = |svd: SVD<T, Dyn, Dyn>| SVD {
        u: svd.v_t.map(|v| v.adjoint()),
        v_t: svd.u.map(|u| u.adjoint()),
        singular_values: svd.singular_values,
    };
    for eps in [f64::EPSILON, 1e-14] {
        if let Some(svd) = a.clone().try_svd(true, true, eps, SVD_MAX_ITER) {
            return svd;
        }
        if let Some(svd) = a.adjoint().try_svd(true, true, eps, SVD_MAX_ITER) {
            return adjoint_of(svd);
        }
        let qr = a.clone().qr();
        let (q, r) = (qr.q(), qr.r());
        let from_r = r
            .clone()
            .try_svd(true, true, eps, SVD_MAX_ITER)
            .or_else(|| {
                r.adjoint()
                    .try_svd(true, true, eps, SVD_MAX_ITER)
                    .map(adjoint_of)
            });
        if let Some(svd) = from_r {
            return SVD {
                u: svd.u.map(|u| &q * u),
                ..svd
            };
        }
    }
    panic!(
        "SVD failed to converge on a {}x{} matrix",
        a.nrows(),
        a.ncols()
    );
}

/// Relative residual improvement below which a longer prefix counts as a tie.
const PREFIX_TIE_RTOL: f64 = 1e-8;

/// [`lstsq`] over the nested column prefixes `a[:, ..ℓ]`, returning the
/// zero-padded prefix solution with the smallest residual, ties going to the
/// shorter prefix. Truncation in an ill-conditioned basis can otherwise make
/// a larger prefix fit worse.
pub fn lstsq_nested<T>(a: &DMatrix<T>, b: &DVector<T>, rcond: f64) -> DVector<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = a.ncols();
    let mut best = DVector::<T>::zeros(n);
    if n == 0 || a.nrows() == 0 {
        return best;
    }
    let qr = a.clone().qr();
    let (q, r) = (qr.q(), qr.r());
    let y = q.adjoint() * b;
    let mut best_res = b.norm_squared();
    for l in 1..=n {
        let x = lstsq(&r.columns(0, l).into_owned(), &y, rcond);
        let res = (a.columns(0, l) * &x - b).norm_squared();
        if res < best_res * (1.0 - PREFIX_TIE_RTOL) {
            best_res = res;
            best.fill(T::zero());
            best.rows_mut(0, l).copy_from(&x);
        }
    }
    best
}

/// Minimum-norm least-squares solution of `a x ≈ b`.
///
/// Columns are equilibrated to unit norm before the SVD so that the
/// cutoff `rcond * sigma_max` acts on directions rather than on scale;
/// all-zero columns receive a zero coefficient.
pub fn lstsq<T>(a: &DMatrix<T>, b: &DVector<T>, rcond: f64) -> DVector<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = a.ncols();
    assert_eq!(a.nrows(), b.len(), "lstsq: row mismatch");
    if n == 0 || a.nrows() == 0 {
        return DVector::zeros(n);
    }
    let mut scaled = a.clone();
    let mut inv_norms = vec![0.0; n];
    for (j, inv_j) in inv_norms.iter_mut().enumerate() {
        let norm = a.column(j).norm();
        if norm > 0.0 {
            *inv_j = 1.0 / norm;
            let mut col = scaled.column_mut(j);
            col *= T::from_real(1.0 / norm);
        }
    }
    let svd = robust_svd(&scaled);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
    let mut x = DVector::<T>::zeros(n);
    if sigma_max == 0.0 {
        return x;
    }
    let cut = rcond * sigma_max;
    for (i, &s) in sigma.iter().enumerate() {
        if s <= cut {
            continue;
        }
        let coef = u.column(i).dotc(b) * T::from_real(1.0 / s);
        for j in 0..n {
            x[j] += v_t[(i, j)].conjugate() * coef;
        }
    }
    for j in 0..n {
        x[j] *= T::from_real(inv_norms[j]);
    }
    x
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|v| C64::new(v, 0.0))
}

pub fn max_abs_imag(m: &CMat) -> f64 {
    m.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

/// `[I, S, S², …]` with `count` terms.
pub fn powers(s: &RMat, count: usize) -> Vec<RMat> {
    let n = s.nrows();
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return out;
    }
    out.push(RMat::identity(n, n));
    for l in 1..count {
        let next = s * &out[l - 1];
        out.push(next);
    }
    out
}

/// Column-major vectorisation.
pub fn vec_of(m: &RMat) -> RVec {
    RVec::from_column_slice(m.as_slice())
}

pub fn spectral_norm(m: &RMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    robust_svd(m)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
pub fn sym_eigen_desc(m: &RMat) -> (RVec, RMat) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = RVec::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = RMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Symmetric square root of a positive semidefinite matrix.
///
/// Eigenvalues down to `-1e-10 * max(1, λ_max)` are clipped to zero; anything
/// more negative is rejected.
pub fn psd_sqrt(rx: &RMat) -> Result<RMat> {
    let n = rx.nrows();
    if rx.ncols() != n {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let sym = (rx + rx.transpose()) * 0.5;
    let (values, vectors) = sym_eigen_desc(&sym);
    let top = values.iter().cloned().fold(0.0, f64::max).max(1.0);
    let mut roots = RVec::zeros(n);
    for k in 0..n {
        let v = values[k];
        if v < -1e-10 * top {
            return Err(Error::NotPsd(v));
        }
        roots[k] = v.max(0.0).sqrt();
    }
    Ok(&vectors * RMat::from_diagonal(&roots) * vectors.transpose())
}

/// Eigenvalues and unit-norm eigenvectors of a general complex matrix.
///
/// Uses the complex Schur form `Q T Qᴴ` and back-substitution on the
/// triangular factor. Near-equal diagonal entries are perturbed to
/// `eps * ‖T‖`, so defective inputs return nearly parallel vectors that the
/// caller's reconstruction check rejects.
pub fn eigen_general(m: &CMat) -> Result<(CVec, CMat)> {
    let n = m.nrows();
    let schur = m
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(Error::NonDiagonalizable {
            residual: f64::INFINITY,
        })?;
    let (q, t) = schur.unpack();
    let smin = f64::EPSILON * t.norm().max(f64::MIN_POSITIVE);
    let mut y = CMat::zeros(n, n);
    for k in 0..n {
        y[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = C64::new(0.0, 0.0);
            for j in i + 1..=k {
                acc += t[(i, j)] * y[(j, k)];
            }
            let mut d = t[(i, i)] - t[(k, k)];
            if d.norm() < smin {
                d = C64::new(smin, 0.0);
            }
            y[(i, k)] = -acc / d;
        }
    }
    let mut v = q * y;
    for k in 0..n {
        let norm = v.column(k).norm();
        if norm > 0.0 {
            let mut col = v.column_mut(k);
            col /= C64::new(norm, 0.0);
        }
    }
    Ok((t.diagonal(), v))
}

pub fn frobenius(m: &RMat) -> f64 {
    m.norm()
}

/// `‖a - b‖_F / ‖b‖_F`, falling back to the absolute error when `b = 0`.
pub fn rel_frobenius(a: &RMat, b: &RMat) -> f64 {
    let diff = (a - b).norm();
    let base = b.norm();
    if base > 0.0 {
        diff / base
    } else {
        diff
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn robust_svd_reconstructs_tall_wide_and_complex() {
        for (m, n) in [(7, 3), (3, 7), (5, 5)] {
            let a = RMat::from_fn(m, n, |i, j| ((i * 5 + j * 3) as f64).sin());
            let svd = robust_svd(&a);
            let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
            let back = &u * RMat::from_diagonal(&svd.singular_values) * &v_t;
            assert!((back - &a).norm() < 1e-12);
        }
        let c = CMat::from_fn(4, 6, |i, j| {
            C64::new((i + j) as f64, (i as f64 - j as f64).cos())
        });
        let svd = robust_svd(&c);
        let s = svd.singular_values.map(|x| C64::new(x, 0.0));
        let back = svd.u.unwrap() * CMat::from_diagonal(&s) * svd.v_t.unwrap();
        assert!((back - &c).norm() < 1e-12);
    }

    #[test]
    fn nested_lstsq_matches_plain_on_full_rank() {
        let a = RMat::from_fn(7, 3, |i, j| {
            ((i * 3 + j) as f64).sin() + if i == j { 2.0 } else { 0.0 }
        });
        let b = RVec::from_fn(7, |i, _| (i as f64).cos());
        let plain = lstsq(&a, &b, PINV_RCOND);
        let nested = lstsq_nested(&a, &b, PINV_RCOND);
        assert!((plain - nested).norm() < 1e-12);
    }

    #[test]
    fn nested_lstsq_residual_never_grows_with_columns() {
        let t = RVec::from_fn(12, |i, _| i as f64);
        let a = RMat::from_fn(12, 12, |i, j| t[i].powi(j as i32));
        let b = RVec::from_fn(12, |i, _| (0.7 * i as f64).sin());
        let mut prev = f64::INFINITY;
        for l in 1..=12 {
            let p = a.columns(0, l).into_owned();
            let res = (&p * lstsq_nested(&p, &b, PINV_RCOND) - &b).norm();
            assert!(res <= prev + 1e-10, "order {l}: {res} > {prev}");
            prev = res;
        }
    }

    #[test]
    fn lstsq_matches_normal_equations_on_full_rank() {
        let a = RMat::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = RVec::from_vec(vec![1.0, 2.0, 2.0, 4.0]);
        let x = lstsq(&a, &b, PINV_RCOND);
        let normal = (a.transpose() * &a).try_inverse().unwrap() * a.transpose() * &b;
        assert!((x - normal).norm() < 1e-12);
    }

    #[test]
    fn lstsq_zero_column_gets_zero_coefficient() {
        let a = RMat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = RVec::from_vec(vec![3.0, 1.0]);
        let x = lstsq(&a, &b, PINV_RCOND);
        assert!(close(x[0], 3.0, 1e-14) && x[1] == 0.0);
    }

    #[test]
    fn lstsq_handles_badly_scaled_columns() {
        // Columns differ by 1e12 in scale; an unscaled cutoff would drop one.
        let a = RMat::from_row_slice(3, 2, &[1.0, 1e12, 1.0, 2e12, 1.0, 4e12]);
        let truth = RVec::from_vec(vec![2.0, 3e-12]);
        let x = lstsq(&a, &(&a * &truth), PINV_RCOND);
        assert!(close(x[0], 2.0, 1e-9) && close(x[1] * 1e12, 3.0, 1e-9));
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let r = RMat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let s = psd_sqrt(&r).unwrap();
        assert!((&s * &s - r).norm() < 1e-12);
    }

    #[test]
    fn psd_sqrt_rejects_indefinite() {
        let r = RMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(matches!(psd_sqrt(&r), Err(Error::NotPsd(_))));
    }

    #[test]
    fn eigen_general_rotation() {
        // 90-degree rotation has eigenvalues ±i.
        let m = to_complex(&RMat::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        let (lambda, v) = eigen_general(&m).unwrap();
        for k in 0..2 {
            let lhs = &m * v.column(k);
            let rhs = v.column(k) * lambda[k];
            assert!((lhs - rhs).norm() < 1e-12);
            assert!(close(lambda[k].im.abs(), 1.0, 1e-12));
        }
    }

    #[test]
    fn powers_start_at_identity() {
        let s = RMat::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = powers(&s, 3);
        assert_eq!(p[0], RMat::identity(2, 2));
        assert_eq!(p[2], RMat::identity(2, 2));
    }
}
