//! Shift operators built so that a given target becomes a graph filter.
//!
//! The rank-one construction yields `S = μI + M_b M_aᵀ` from weighted
//! incidence matrices of a spanning tree or of the whole graph, so that
//! `a` and `b` are the right and left eigenvectors of a simple eigenvalue
//! `μ`. The eigenbasis fit picks eigenvalues for a prescribed basis that
//! keep the operator inside a sparsity pattern.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::ProductFormFilter;
use crate::graph::{spanning_tree, Graph};
use crate::linalg::{robust_svd, CMat, CVec, RMat, RVec, C64};
#[cfg(test)]
use crate::spectral::decompose;
use crate::spectral::{decompose_matrix, Pattern, ShiftOperator};

/// Entries at or below this fraction of the largest magnitude count as zero.
const ZERO_ENTRY: f64 = 1e-14;
/// Singular values below this fraction of `max(1, ‖S − μI‖)` span the kernel.
const KERNEL_TOL: f64 = 1e-9;
/// Off-pattern magnitude under which an eigenbasis fit is declared exact.
pub const FIT_TOL: f64 = 1e-8;
pub const FIT_RIDGE: f64 = 1e-12;

/// Unit-norm vectors `a`, `b` of a target `B = a bᵀ` with no zero entries.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOneTarget {
    a: RVec,
    b: RVec,
}

impl RankOneTarget {
    pub fn new(a: RVec, b: RVec) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::Dimension(format!(
                "a has {} entries, b has {}",
                a.len(),
                b.len()
            )));
        }
        Ok(Self {
            a: normalized(a, "a")?,
            b: normalized(b, "b")?,
        })
    }

    /// `a = b` with entries uniform in `[0.5, 1.5)`.
    pub fn random_positive(n: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = RVec::from_fn(n, |_, _| rng.random_range(0.5..1.5));
        Self::new(a.clone(), a)
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &RVec {
        &self.a
    }

    pub fn b(&self) -> &RVec {
        &self.b
    }

    /// `B = a bᵀ`.
    pub fn matrix(&self) -> RMat {
        &self.a * self.b.transpose()
    }
}

fn normalized(v: RVec, name: &str) -> Result<RVec> {
    let top = v.amax();
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::Parameter(format!("{name} has non-finite entries")));
    }
    if let Some(i) = v.iter().position(|x| x.abs() <= ZERO_ENTRY * top) {
        return Err(Error::Precondition(format!("{name}[{i}] is zero")));
    }
    let norm = v.norm();
    Ok(v / norm)
}

/// Signed incidence matrix weighted by `a`: column `l` of link `(i, j)`,
/// `i < j`, holds `a_j` at row `i` and `−a_i` at row `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedIncidence {
    links: Vec<(usize, usize)>,
    matrix: RMat,
}

impl WeightedIncidence {
    pub fn new(n: usize, links: &[(usize, usize)], a: &RVec) -> Result<Self> {
        if a.len() != n {
            return Err(Error::Dimension(format!(
                "weight vector has {} entries for {n} nodes",
                a.len()
            )));
        }
        let mut matrix = RMat::zeros(n, links.len());
        let mut sorted = Vec::with_capacity(links.len());
        for (l, &(u, v)) in links.iter().enumerate() {
            let (i, j) = (u.min(v), u.max(v));
            if j >= n || i == j {
                return Err(Error::Parameter(format!("invalid link ({u}, {v})")));
            }
            matrix[(i, l)] = a[j];
            matrix[(j, l)] = -a[i];
            sorted.push((i, j));
        }
        Ok(Self {
            links: sorted,
            matrix,
        })
    }

    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    pub fn matrix(&self) -> &RMat {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        self.matrix
            .rank(1e-10 * self.matrix.amax().max(f64::MIN_POSITIVE))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Subgraph {
    /// BFS spanning tree from `root`, neighbours in ascending order.
    BfsTree {
        root: usize,
    },
    FullGraph,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneCertificate {
    pub mu: f64,
    /// `‖S a − μ a‖`.
    pub right_residual: f64,
    /// `‖Sᵀ b − μ b‖`.
    pub left_residual: f64,
    /// The two smallest singular values of `S − μI`, ascending.
    pub smallest_singular_values: Vec<f64>,
    /// `|⟨v, a⟩|` for the right singular vector `v` of the smallest one.
    pub kernel_alignment: f64,
    /// Size of the eigenvalue class containing `μ`.
    pub mu_multiplicity: usize,
    /// Distance from `μ` to the nearest other eigenvalue.
    pub eigen_gap: f64,
}

/// Degree `N − 1` product-form filter equal to `a bᵀ` on a rank-one shift:
/// one factor per eigenvalue other than `μ`, taken individually from the real
/// Schur form so that near-coincident eigenvalues are each annihilated, and
/// scaled to `bᵀa` at `μ`. Conjugate pairs become quadratic factors.
pub fn rank_one_product_filter(
    shift: &ShiftOperator,
    target: &RankOneTarget,
    mu: f64,
) -> Result<ProductFormFilter> {
    let s = shift.matrix();
    let eigenvalues = s
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(Error::NonDiagonalizable {
            residual: f64::INFINITY,
        })?
        .complex_eigenvalues();
    let nearest = (0..eigenvalues.len())
        .min_by(|&i, &j| {
            let d = |k: usize| (eigenvalues[k] - C64::new(mu, 0.0)).norm();
            d(i).total_cmp(&d(j))
        })
        .ok_or_else(|| Error::Dimension("empty shift".into()))?;
    let mut roots = Vec::new();
    let mut quadratics = Vec::new();
    for (k, z) in eigenvalues.iter().enumerate() {
        if k == nearest || z.im < 0.0 {
            continue;
        }
        if z.im == 0.0 {
            roots.push(z.re);
        } else {
            quadratics.push((2.0 * z.re, z.norm_sqr()));
        }
    }
    let at_mu = roots.iter().map(|r| mu - r).product::<f64>()
        * quadratics
            .iter()
            .map(|&(sum, prod)| mu * mu - sum * mu + prod)
            .product::<f64>();
    if at_mu == 0.0 || !at_mu.is_finite() {
        return Err(Error::Certificate(
            "filter cannot be normalised at mu".into(),
        ));
    }
    Ok(ProductFormFilter {
        gain: target.b().dot(target.a()) / at_mu,
        roots,
        quadratics,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankOneShift {
    pub shift: ShiftOperator,
    pub certificate: RankOneCertificate,
}

/// `S = μI + M_b M_aᵀ` over the links of the chosen subgraph, certified.
pub fn build_rank_one_shift(
    g: &Graph,
    target: &RankOneTarget,
    mu: f64,
    subgraph: Subgraph,
) -> Result<RankOneShift> {
    let shift = rank_one_shift(g, target, mu, subgraph)?;
    let certificate = certify(&shift, target, mu)?;
    Ok(RankOneShift { shift, certificate })
}

/// `S = μI + M_b M_aᵀ` without the eigenvalue certificate.
pub fn rank_one_shift(
    g: &Graph,
    target: &RankOneTarget,
    mu: f64,
    subgraph: Subgraph,
) -> Result<ShiftOperator> {
    let n = g.n();
    if target.n() != n {
        return Err(Error::Dimension(format!(
            "target has {} nodes, graph {}",
            target.n(),
            n
        )));
    }
    if !mu.is_finite() {
        return Err(Error::Parameter("mu must be finite".into()));
    }
    if g.is_directed() {
        return Err(Error::Parameter(
            "rank-one shifts need an undirected graph".into(),
        ));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let support = match subgraph {
        Subgraph::BfsTree { root } => spanning_tree(g, root)?,
        Subgraph::FullGraph => g.clone(),
    };
    let links: Vec<(usize, usize)> = support.edges().iter().map(|e| (e.from, e.to)).collect();
    let m_a = WeightedIncidence::new(n, &links, target.a())?;
    let m_b = WeightedIncidence::new(n, &links, target.b())?;
    let matrix = RMat::identity(n, n) * mu + m_b.matrix() * m_a.matrix().transpose();
    ShiftOperator::new(matrix, Pattern::from_graph(&support))
}

/// Verifies the eigenvector identities and that `μ` is simple.
pub fn certify(
    shift: &ShiftOperator,
    target: &RankOneTarget,
    mu: f64,
) -> Result<RankOneCertificate> {
    let s = shift.matrix();
    let n = s.nrows();
    let (a, b) = (target.a(), target.b());
    let right_residual = (s * a - a * mu).norm();
    let left_residual = (s.transpose() * b - b * mu).norm();
    let centred = s - RMat::identity(n, n) * mu;
    let scale = centred.norm().max(1.0);
    let svd = robust_svd(&centred);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let smallest: Vec<f64> = order
        .iter()
        .take(2)
        .map(|&k| svd.singular_values[k])
        .collect();
    let v_t = svd.v_t.expect("v_t requested");
    let kernel: RVec = v_t.row(order[0]).transpose();
    let kernel_alignment = kernel.dot(a).abs();
    let spec = decompose_matrix(s, None)?;
    let distance = |k: usize| (spec.lambda[k] - C64::new(mu, 0.0)).norm();
    let home = (0..n)
        .min_by(|&x, &y| distance(x).total_cmp(&distance(y)))
        .expect("non-empty");
    let class = spec
        .classes
        .iter()
        .find(|c| c.contains(&home))
        .expect("every index has a class");
    let eigen_gap = (0..n)
        .filter(|&k| k != home)
        .map(distance)
        .fold(f64::INFINITY, f64::min);
    let cert = RankOneCertificate {
        mu,
        right_residual,
        left_residual,
        smallest_singular_values: smallest.clone(),
        kernel_alignment,
        mu_multiplicity: class.len(),
        eigen_gap,
    };
    let tol = 1e-10 * scale;
    if right_residual > tol || left_residual > tol {
        return Err(Error::Certificate(format!(
            "eigenvector residuals {right_residual:.3e}, {left_residual:.3e} exceed {tol:.1e}"
        )));
    }
    let below = smallest
        .iter()
        .filter(|&&sv| sv < KERNEL_TOL * scale)
        .count();
    if below != 1 {
        return Err(Error::Certificate(format!(
            "S - mu I has {below} singular values below tolerance, expected 1"
        )));
    }
    if (1.0 - kernel_alignment).abs() > 1e-8 {
        return Err(Error::Certificate(format!(
            "kernel is not spanned by a (alignment {kernel_alignment:.3e})"
        )));
    }
    if cert.mu_multiplicity != 1 || distance(home) >= spec.tol.max(1e-9 * scale) {
        return Err(Error::Certificate(format!(
            "mu is not a simple eigenvalue (class size {})",
            class.len()
        )));
    }
    Ok(cert)
}

/// Outcome of fitting eigenvalues to a fixed eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct FittedShift {
    /// Eigenvalues, unit norm with zero sum.
    pub lambda: CVec,
    /// `V diag(λ) V⁻¹`, before any rounding.
    pub matrix: CMat,
    /// Largest magnitude outside the pattern.
    pub off_pattern_max: f64,
    pub exact: bool,
    pub ridge: f64,
    /// Real shift with off-pattern entries cleared, when the fit is exact and real.
    pub shift: Option<ShiftOperator>,
}

/// Minimises the off-pattern energy of `V diag(λ) V⁻¹` plus `ridge‖λ‖²` over
/// unit `λ` orthogonal to the all-ones vector, which excludes the identity.
pub fn fit_shift_to_eigenbasis(v: &CMat, pattern: &Pattern) -> Result<FittedShift> {
    let n = v.nrows();
    if v.ncols() != n || pattern.n() != n {
        return Err(Error::Dimension(format!(
            "basis is {}x{}, pattern for {}",
            n,
            v.ncols(),
            pattern.n()
        )));
    }
    if n < 2 {
        return Err(Error::Parameter(
            "eigenbasis fit needs at least two nodes".into(),
        ));
    }
    if (0..n).any(|i| !pattern.allows(i, i)) {
        return Err(Error::Precondition(
            "pattern must include the diagonal".into(),
        ));
    }
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Precondition("eigenbasis is singular".into()))?;
    // Row (i, j) of A holds [W_k]_ij = V_ik [V⁻¹]_kj over k.
    let off: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !pattern.allows(i, j))
        .collect();
    let a = CMat::from_fn(off.len(), n, |r, k| v[(off[r].0, k)] * v_inv[(k, off[r].1)]);
    let q = ones_complement(n);
    let normal =
        q.adjoint() * (a.adjoint() * &a + CMat::identity(n, n) * C64::new(FIT_RIDGE, 0.0)) * &q;
    let normal = (&normal + normal.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(normal);
    let k = (0..n - 1)
        .min_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]))
        .expect("n >= 2");
    let lambda: CVec = &q * eig.eigenvectors.column(k);
    let matrix = v * CMat::from_diagonal(&lambda) * &v_inv;
    let (lambda, matrix) = realign(lambda, matrix);
    let off_pattern_max = off
        .iter()
        .map(|&(i, j)| matrix[(i, j)].norm())
        .fold(0.0, f64::max);
    let exact = off_pattern_max < FIT_TOL;
    let imag = matrix.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let shift = if exact && imag <= 1e-9 * matrix.norm().max(1.0) {
        let real = RMat::from_fn(n, n, |i, j| {
            if pattern.allows(i, j) {
                matrix[(i, j)].re
            } else {
                0.0
            }
        });
        Some(ShiftOperator::new(real, pattern.clone())?)
    } else {
        None
    };
    Ok(FittedShift {
        lambda,
        matrix,
        off_pattern_max,
        exact,
        ridge: FIT_RIDGE,
        shift,
    })
}

/// Orthonormal basis of the complement of the all-ones vector.
fn ones_complement(n: usize) -> CMat {
    let mut basis = RMat::zeros(n, n);
    basis.column_mut(0).fill(1.0 / (n as f64).sqrt());
    for k in 1..n {
        basis[(k, k)] = 1.0;
    }
    let q = basis.qr().q();
    q.columns(1, n - 1).map(|x| C64::new(x, 0.0))
}

/// Rotates the global phase so that the fitted matrix is as real as possible.
fn realign(lambda: CVec, matrix: CMat) -> (CVec, CMat) {
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for z in matrix.iter() {
        sxx += z.re * z.re;
        sxy += z.re * z.im;
        syy += z.im * z.im;
    }
    // Im(e^{iθ} z) = x sinθ + y cosθ; minimise its energy over θ.
    let form = nalgebra::Matrix2::new(sxx, sxy, sxy, syy);
    let eig = form.symmetric_eigen();
    let k = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
        0
    } else {
        1
    };
    let (sin, cos) = (eig.eigenvectors[(0, k)], eig.eigenvectors[(1, k)]);
    let mut phase = C64::new(cos, sin);
    let rotated = matrix.map(|z| z * phase);
    if rotated.trace().re < 0.0
        || (rotated.trace().re == 0.0 && rotated.iter().map(|z| z.re).sum::<f64>() < 0.0)
    {
        phase = -phase;
    }
    (lambda.map(|z| z * phase), matrix.map(|z| z * phase))
}
