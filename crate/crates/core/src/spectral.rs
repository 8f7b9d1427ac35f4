//! Shift operators, their eigendecomposition and frequency-domain tools.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{parse_triples, Graph};
use crate::linalg::{eigen_general, sym_eigen_desc, to_complex, CMat, CVec, RMat, RVec, C64};

/// Relative reconstruction error above which a decomposition is rejected.
pub const DIAGONALIZABLE_TOL: f64 = 1e-9;

/// Entries `(i, j)` where a shift may be non-zero: the diagonal plus every
/// `j` that node `i` can hear from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    n: usize,
    mask: Vec<bool>,
}

impl Pattern {
    pub fn diagonal(n: usize) -> Self {
        let mut mask = vec![false; n * n];
        for i in 0..n {
            mask[i * n + i] = true;
        }
        Self { n, mask }
    }

    pub fn full(n: usize) -> Self {
        Self {
            n,
            mask: vec![true; n * n],
        }
    }

    pub fn from_graph(g: &Graph) -> Self {
        let mut p = Self::diagonal(g.n());
        for e in g.edges() {
            p.allow(e.to, e.from);
            if !g.is_directed() {
                p.allow(e.from, e.to);
            }
        }
        p
    }

    /// Support of `m` plus the diagonal.
    pub fn from_support(m: &RMat) -> Self {
        let mut p = Self::diagonal(m.nrows());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    p.allow(i, j);
                }
            }
        }
        p
    }

    pub fn allow(&mut self, i: usize, j: usize) {
        self.mask[i * self.n + j] = true;
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.n + j]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Nodes `j != i` whose values node `i` may read.
    pub fn in_neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&j| j != i && self.allows(i, j))
            .collect()
    }

    /// Off-diagonal allowed entries as `(i, j)` pairs, row-major.
    pub fn off_diagonal(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.allows(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| self.allows(i, j) == self.allows(j, i)))
    }
}

/// A real graph-shift operator together with the pattern it must respect.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftOperator {
    matrix: RMat,
    pattern: Pattern,
}

impl ShiftOperator {
    pub fn new(matrix: RMat, pattern: Pattern) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || pattern.n() != n {
            return Err(Error::Dimension(format!(
                "shift is {}x{}, pattern is for n = {}",
                n,
                matrix.ncols(),
                pattern.n()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let v = matrix[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Parameter("non-finite shift entry".into()));
                }
                if v != 0.0 && !pattern.allows(i, j) {
                    return Err(Error::Pattern { row: i, col: j });
                }
            }
        }
        Ok(Self { matrix, pattern })
    }

    /// Shift whose pattern is its own support plus the diagonal.
    pub fn from_matrix(matrix: RMat) -> Result<Self> {
        let pattern = Pattern::from_support(&matrix);
        Self::new(matrix, pattern)
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &RMat {
        &self.matrix
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn is_symmetric(&self) -> bool {
        self.matrix == self.matrix.transpose()
    }

    /// Edge-list form: `i j w` means node `j` reads node `i` with weight `w`
    /// (so `S[j][i] = w`); `i i w` carries the diagonal.
    pub fn to_edge_list(&self) -> String {
        let n = self.n();
        let undirected = self.is_symmetric() && self.pattern.is_symmetric();
        let mut out = format!("n {} directed {}\n", n, u8::from(!undirected));
        for i in 0..n {
            if self.matrix[(i, i)] != 0.0 {
                let _ = writeln!(out, "{i} {i} {}", self.matrix[(i, i)]);
            }
        }
        for (row, col) in self.pattern.off_diagonal() {
            if undirected && col < row {
                continue;
            }
            let _ = writeln!(out, "{col} {row} {}", self.matrix[(row, col)]);
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let (n, directed, triples) = parse_triples(text)?;
        let mut m = RMat::zeros(n, n);
        let mut pattern = Pattern::diagonal(n);
        for (i, j, w) in triples {
            if i >= n || j >= n {
                return Err(Error::Format(format!("entry ({i}, {j}) out of range")));
            }
            m[(j, i)] = w;
            pattern.allow(j, i);
            if !directed {
                m[(i, j)] = w;
                pattern.allow(i, j);
            }
        }
        Self::new(m, pattern)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

/// Eigendecomposition `S = V diag(λ) V⁻¹` with the distinct-eigenvalue
/// partition.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub lambda: CVec,
    pub v: CMat,
    pub v_inv: CMat,
    pub classes: Vec<Vec<usize>>,
    pub tol: f64,
    /// True when `V` is real orthogonal (symmetric shifts).
    pub orthogonal: bool,
}

impl SpectralData {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// Number of distinct eigenvalues `D`.
    pub fn distinct(&self) -> usize {
        self.classes.len()
    }

    /// `u_i = Vᵀ e_i`, the i-th row of `V` as a column.
    pub fn u(&self, i: usize) -> CVec {
        self.v.row(i).transpose()
    }

    pub fn vandermonde(&self, order: usize) -> CMat {
        vandermonde_of(&self.lambda, order)
    }

    /// Eigenclass index of every eigenvalue.
    pub fn class_index(&self) -> Vec<usize> {
        let mut idx = vec![0; self.n()];
        for (c, members) in self.classes.iter().enumerate() {
            for &k in members {
                idx[k] = c;
            }
        }
        idx
    }

    /// `V diag(Ψc) V⁻¹`.
    pub fn diag_form(&self, c: &CVec) -> CMat {
        let response = frequency_response(self, c);
        &self.v * CMat::from_diagonal(&response) * &self.v_inv
    }

    /// Relative reconstruction error of the decomposition against `s`.
    pub fn reconstruction_error(&self, s: &RMat) -> f64 {
        let rebuilt = &self.v * CMat::from_diagonal(&self.lambda) * &self.v_inv;
        let diff = (rebuilt - to_complex(s)).norm();
        let base = s.norm();
        if base > 0.0 {
            diff / base
        } else {
            diff
        }
    }

    /// Regroups eigenvalues at a different tolerance.
    pub fn with_tolerance(&self, tol: f64) -> Self {
        Self {
            classes: eigclasses(&self.lambda, tol),
            tol,
            ..self.clone()
        }
    }
}

pub fn default_tolerance(lambda: &CVec) -> f64 {
    let top = lambda.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if top > 0.0 {
        1e-8 * top
    } else {
        1e-12
    }
}

pub fn decompose(shift: &ShiftOperator, tol: Option<f64>) -> Result<SpectralData> {
    decompose_matrix(shift.matrix(), tol)
}

/// Decomposes any square real matrix; symmetric inputs take the orthogonal path.
pub fn decompose_matrix(s: &RMat, tol: Option<f64>) -> Result<SpectralData> {
    let n = s.nrows();
    if s.ncols() != n {
        return Err(Error::Dimension("shift must be square".into()));
    }
    if let Some(t) = tol {
        if t.is_nan() || t <= 0.0 {
            return Err(Error::Parameter(format!(
                "eigenvalue tolerance {t} must be positive"
            )));
        }
    }
    let (lambda, v, v_inv, orthogonal) = if *s == s.transpose() {
        let (values, vectors) = sym_eigen_desc(s);
        let gram = &vectors * vectors.transpose() - RMat::identity(n, n);
        if gram.norm() >= 1e-8 {
            return Err(Error::NonDiagonalizable {
                residual: gram.norm(),
            });
        }
        let lambda = values.map(|x| C64::new(x, 0.0));
        (
            lambda,
            to_complex(&vectors),
            to_complex(&vectors.transpose()),
            true,
        )
    } else {
        let (values, vectors) = eigen_general(&to_complex(s))?;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let (x, y) = (values[a], values[b]);
            y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im))
        });
        let lambda = CVec::from_iterator(n, order.iter().map(|&k| values[k]));
        let mut v = CMat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            v.set_column(dst, &vectors.column(src));
        }
        let v_inv = v.clone().try_inverse().ok_or(Error::NonDiagonalizable {
            residual: f64::INFINITY,
        })?;
        (lambda, v, v_inv, false)
    };
    let tol = tol.unwrap_or_else(|| default_tolerance(&lambda));
    let data = SpectralData {
        classes: eigclasses(&lambda, tol),
        lambda,
        v,
        v_inv,
        tol,
        orthogonal,
    };
    let residual = data.reconstruction_error(s);
    if residual.is_nan() || residual >= DIAGONALIZABLE_TOL {
        return Err(Error::NonDiagonalizable { residual });
    }
    Ok(data)
}

/// Single-linkage clusters of eigenvalues closer than `tol`.
pub fn eigclasses(lambda: &CVec, tol: f64) -> Vec<Vec<usize>> {
    let n = lambda.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in i + 1..n {
            if (lambda[i] - lambda[j]).norm() < tol {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for k in 0..n {
        let root = find(&mut parent, k);
        if slot[root] == usize::MAX {
            slot[root] = classes.len();
            classes.push(Vec::new());
        }
        classes[slot[root]].push(k);
    }
    classes
}

/// `Ψ[k][l] = λ_k^l`, `l = 0..order`.
pub fn vandermonde_of(lambda: &CVec, order: usize) -> CMat {
    let n = lambda.len();
    let mut psi = CMat::zeros(n, order);
    for k in 0..n {
        let mut p = C64::new(1.0, 0.0);
        for l in 0..order {
            psi[(k, l)] = p;
            p *= lambda[k];
        }
    }
    psi
}

pub fn vandermonde(spec: &SpectralData, order: usize) -> CMat {
    spec.vandermonde(order)
}

/// `ĉ = Ψ c` with `Ψ` of order `c.len()`.
pub fn frequency_response(spec: &SpectralData, c: &CVec) -> CVec {
    spec.vandermonde(c.len()) * c
}

/// A graph signal held in complex arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphSignal {
    pub values: CVec,
}

impl GraphSignal {
    pub fn from_real(x: &RVec) -> Self {
        Self {
            values: x.map(|v| C64::new(v, 0.0)),
        }
    }

    /// `x̂ = V⁻¹ x`.
    pub fn frequency(&self, spec: &SpectralData) -> CVec {
        &spec.v_inv * &self.values
    }

    pub fn from_frequency(spec: &SpectralData, xhat: &CVec) -> Self {
        Self {
            values: &spec.v * xhat,
        }
    }

    /// Real part, provided every imaginary part is below `1e-9`.
    pub fn to_real(&self) -> Result<RVec> {
        let worst = self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if worst >= 1e-9 {
            return Err(Error::NotReal(worst));
        }
        Ok(self.values.map(|z| z.re))
    }
}

/// `y` with `ŷ = ĉ ∘ x̂`.
pub fn apply_in_frequency(spec: &SpectralData, c: &CVec, x: &GraphSignal) -> GraphSignal {
    let response = frequency_response(spec, c);
    let yhat = x.frequency(spec).component_mul(&response);
    GraphSignal::from_frequency(spec, &yhat)
}
