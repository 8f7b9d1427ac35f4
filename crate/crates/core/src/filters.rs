//! Node-invariant, node-variant and product-form graph filters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs_imag, to_complex, CMat, CVec, RMat, RVec, C64};
use crate::spectral::{ShiftOperator, SpectralData};

/// `H = Σ_l c_l S^l`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeInvariantFilter {
    pub coeffs: Vec<f64>,
}

impl NodeInvariantFilter {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Parameter(
                "filter needs at least one coefficient".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn dense(&self, s: &RMat) -> RMat {
        let n = s.nrows();
        let mut power = RMat::identity(n, n);
        let mut h = RMat::zeros(n, n);
        for (l, &c) in self.coeffs.iter().enumerate() {
            if l > 0 {
                power = s * &power;
            }
            h += &power * c;
        }
        h
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeVariantMode {
    /// `Σ diag(c^(l)) S^l`
    #[serde(rename = "type-I")]
    TypeI,
    /// `Σ S^l diag(c^(l))`
    #[serde(rename = "type-II")]
    TypeII,
}

/// Node-variant filter with an `L × N` coefficient matrix; column `i` holds
/// the coefficients of node `i`, row `l` is `c^(l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeVariantFilter {
    pub coeffs: RMat,
    pub mode: NodeVariantMode,
}

impl NodeVariantFilter {
    pub fn new(coeffs: RMat, mode: NodeVariantMode) -> Result<Self> {
        if coeffs.nrows() == 0 || coeffs.ncols() == 0 {
            return Err(Error::Parameter(
                "empty node-variant coefficient matrix".into(),
            ));
        }
        Ok(Self { coeffs, mode })
    }

    pub fn order(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn nodes(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn dense(&self, s: &RMat) -> RMat {
        let n = s.nrows();
        let mut power = RMat::identity(n, n);
        let mut h = RMat::zeros(n, n);
        for l in 0..self.order() {
            if l > 0 {
                power = s * &power;
            }
            let d = RMat::from_diagonal(&self.coeffs.row(l).transpose());
            match self.mode {
                NodeVariantMode::TypeI => h += &d * &power,
                NodeVariantMode::TypeII => h += &power * &d,
            }
        }
        h
    }
}

/// `H = a_0 Π_l (S − a_l I) Π_m (S² − s_m S + p_m I)`; each quadratic factor
/// carries a conjugate root pair with `s_m = 2 Re γ_m`, `p_m = |γ_m|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductFormFilter {
    pub gain: f64,
    pub roots: Vec<f64>,
    pub quadratics: Vec<(f64, f64)>,
}

impl ProductFormFilter {
    /// Real roots only.
    pub fn new(gain: f64, roots: Vec<f64>) -> Self {
        Self {
            gain,
            roots,
            quadratics: Vec::new(),
        }
    }

    pub fn order(&self) -> usize {
        self.roots.len() + 2 * self.quadratics.len() + 1
    }

    pub fn dense(&self, s: &RMat) -> RMat {
        let n = s.nrows();
        let eye = RMat::identity(n, n);
        let mut h = &eye * self.gain;
        for &a in &self.roots {
            h = (s - &eye * a) * h;
        }
        for &(sum, prod) in &self.quadratics {
            h = (s * s - s * sum + &eye * prod) * h;
        }
        h
    }

    /// Monomial coefficients of the same polynomial.
    pub fn expand(&self) -> NodeInvariantFilter {
        let mut poly = vec![self.gain];
        let mut times = |factor: &[f64]| {
            let mut next = vec![0.0; poly.len() + factor.len() - 1];
            for (l, &p) in poly.iter().enumerate() {
                for (m, &f) in factor.iter().enumerate() {
                    next[l + m] += p * f;
                }
            }
            poly = next;
        };
        for &a in &self.roots {
            times(&[-a, 1.0]);
        }
        for &(sum, prod) in &self.quadratics {
            times(&[prod, -sum, 1.0]);
        }
        NodeInvariantFilter { coeffs: poly }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Filter {
    NodeInvariant(NodeInvariantFilter),
    NodeVariant(NodeVariantFilter),
    ProductForm(ProductFormFilter),
}

impl From<NodeInvariantFilter> for Filter {
    fn from(f: NodeInvariantFilter) -> Self {
        Filter::NodeInvariant(f)
    }
}

impl From<NodeVariantFilter> for Filter {
    fn from(f: NodeVariantFilter) -> Self {
        Filter::NodeVariant(f)
    }
}

impl From<ProductFormFilter> for Filter {
    fn from(f: ProductFormFilter) -> Self {
        Filter::ProductForm(f)
    }
}

impl Filter {
    pub fn order(&self) -> usize {
        match self {
            Filter::NodeInvariant(f) => f.order(),
            Filter::NodeVariant(f) => f.order(),
            Filter::ProductForm(f) => f.order(),
        }
    }

    /// Checks that the filter can run on `shift`.
    pub fn check_shift(&self, shift: &ShiftOperator) -> Result<()> {
        if let Filter::NodeVariant(f) = self {
            if f.nodes() != shift.n() {
                return Err(Error::Topology(format!(
                    "filter has {} node columns, shift has {} nodes",
                    f.nodes(),
                    shift.n()
                )));
            }
        }
        Ok(())
    }

    pub fn to_dense(&self, shift: &ShiftOperator) -> Result<RMat> {
        self.check_shift(shift)?;
        let s = shift.matrix();
        Ok(match self {
            Filter::NodeInvariant(f) => f.dense(s),
            Filter::NodeVariant(f) => f.dense(s),
            Filter::ProductForm(f) => f.dense(s),
        })
    }

    pub fn eval_dense(&self, shift: &ShiftOperator, x: &RVec) -> Result<RVec> {
        check_signal(shift, x)?;
        Ok(self.to_dense(shift)? * x)
    }

    /// Evaluates through the shift recursions without materialising `H`.
    pub fn eval_recursive(&self, shift: &ShiftOperator, x: &RVec) -> Result<RVec> {
        self.check_shift(shift)?;
        check_signal(shift, x)?;
        let s = shift.matrix();
        Ok(match self {
            Filter::NodeInvariant(f) => {
                let mut z = x.clone();
                let mut y = &z * f.coeffs[0];
                for &c in &f.coeffs[1..] {
                    z = s * &z;
                    y += &z * c;
                }
                y
            }
            Filter::NodeVariant(f) => match f.mode {
                NodeVariantMode::TypeI => {
                    let mut z = x.clone();
                    let mut y = z.component_mul(&f.coeffs.row(0).transpose());
                    for l in 1..f.order() {
                        z = s * &z;
                        y += z.component_mul(&f.coeffs.row(l).transpose());
                    }
                    y
                }
                NodeVariantMode::TypeII => {
                    let order = f.order();
                    let mut t = RVec::zeros(x.len());
                    for l in 1..=order {
                        t = s * &t + x.component_mul(&f.coeffs.row(order - l).transpose());
                    }
                    t
                }
            },
            Filter::ProductForm(f) => {
                let mut w = x.clone();
                for &a in &f.roots {
                    w = s * &w - &w * a;
                }
                for &(sum, prod) in &f.quadratics {
                    let u = s * &w;
                    w = s * &u - u * sum + &w * prod;
                }
                w * f.gain
            }
        })
    }
}

fn check_signal(shift: &ShiftOperator, x: &RVec) -> Result<()> {
    if x.len() != shift.n() {
        return Err(Error::Dimension(format!(
            "signal has {} entries, shift has {} nodes",
            x.len(),
            shift.n()
        )));
    }
    Ok(())
}

/// Type-I rows in spectral form: `h_iᵀ = u_iᵀ diag(Ψ c_i) V⁻¹`.
pub fn row_form(spec: &SpectralData, coeffs: &RMat) -> CMat {
    let n = spec.n();
    let psi = spec.vandermonde(coeffs.nrows());
    let mut h = CMat::zeros(n, n);
    for i in 0..n {
        let response = &psi * coeffs.column(i).map(|v| C64::new(v, 0.0));
        let row = spec.u(i).component_mul(&response).transpose() * &spec.v_inv;
        h.set_row(i, &row);
    }
    h
}

/// Type-I operator as `(I ⊙ ΨC)ᵀ Ũ V⁻¹` with `Ũ = [diag(u_1) … diag(u_N)]ᵀ`.
pub fn khatri_rao_form(spec: &SpectralData, coeffs: &RMat) -> CMat {
    let n = spec.n();
    let psi_c = spec.vandermonde(coeffs.nrows()) * to_complex(coeffs);
    let mut kr = CMat::zeros(n * n, n);
    for i in 0..n {
        for k in 0..n {
            kr[(i * n + k, i)] = psi_c[(k, i)];
        }
    }
    let mut u_tilde = CMat::zeros(n * n, n);
    for i in 0..n {
        for k in 0..n {
            u_tilde[(i * n + k, k)] = spec.v[(i, k)];
        }
    }
    kr.transpose() * u_tilde * &spec.v_inv
}

/// Absolute threshold on imaginary parts when realising complex designs.
pub const REALIZE_TOL: f64 = 1e-9;

/// Dense `Σ c_l S^l` for complex coefficients.
pub fn complex_dense(c: &CVec, s: &RMat) -> CMat {
    let n = s.nrows();
    let sc = to_complex(s);
    let mut power = CMat::identity(n, n);
    let mut h = CMat::zeros(n, n);
    for (l, &cl) in c.iter().enumerate() {
        if l > 0 {
            power = &sc * &power;
        }
        h += &power * cl;
    }
    h
}

/// Real coefficients of a complex design whose operator is real.
pub fn realize(c: &CVec, s: &RMat) -> Result<Vec<f64>> {
    let worst = max_abs_imag(&complex_dense(c, s));
    if worst >= REALIZE_TOL {
        return Err(Error::NotReal(worst));
    }
    Ok(c.iter().map(|z| z.re).collect())
}

/// Column-wise [`realize`] for type-I node-variant coefficients.
pub fn realize_node_variant(c: &CMat, s: &RMat) -> Result<RMat> {
    let n = s.nrows();
    let sc = to_complex(s);
    let mut power = CMat::identity(n, n);
    let mut h = CMat::zeros(n, n);
    for l in 0..c.nrows() {
        if l > 0 {
            power = &sc * &power;
        }
        h += CMat::from_diagonal(&c.row(l).transpose()) * &power;
    }
    let worst = max_abs_imag(&h);
    if worst >= REALIZE_TOL {
        return Err(Error::NotReal(worst));
    }
    Ok(c.map(|z| z.re))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterMode {
    #[serde(rename = "node-invariant")]
    NodeInvariant,
    #[serde(rename = "type-I")]
    TypeI,
    #[serde(rename = "type-II")]
    TypeII,
    #[serde(rename = "product-form")]
    ProductForm,
}

/// Serialised filter; node-variant coefficients are row-major `L × N`,
/// product form stores `[a_0, a_1, …, s_1, p_1, …]` with `quadratics` pairs
/// at the end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterDocument {
    #[serde(rename = "shift-ref", default, skip_serializing_if = "Option::is_none")]
    pub shift_ref: Option<String>,
    pub mode: FilterMode,
    pub shape: [usize; 2],
    pub coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub quadratics: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

impl Filter {
    pub fn to_document(&self, shift_ref: Option<String>) -> FilterDocument {
        let (mode, shape, coefficients) = match self {
            Filter::NodeInvariant(f) => {
                (FilterMode::NodeInvariant, [f.order(), 1], f.coeffs.clone())
            }
            Filter::NodeVariant(f) => {
                let mode = match f.mode {
                    NodeVariantMode::TypeI => FilterMode::TypeI,
                    NodeVariantMode::TypeII => FilterMode::TypeII,
                };
                let row_major = f.coeffs.transpose().as_slice().to_vec();
                (mode, [f.order(), f.nodes()], row_major)
            }
            Filter::ProductForm(f) => {
                let mut c = vec![f.gain];
                c.extend_from_slice(&f.roots);
                c.extend(f.quadratics.iter().flat_map(|&(sum, prod)| [sum, prod]));
                (FilterMode::ProductForm, [c.len(), 1], c)
            }
        };
        let quadratics = match self {
            Filter::ProductForm(f) => f.quadratics.len(),
            _ => 0,
        };
        FilterDocument {
            shift_ref,
            mode,
            shape,
            coefficients,
            quadratics,
        }
    }

    pub fn from_document(doc: &FilterDocument) -> Result<Self> {
        let [rows, cols] = doc.shape;
        if rows * cols != doc.coefficients.len() {
            return Err(Error::Format(format!(
                "shape {rows}x{cols} does not match {} coefficients",
                doc.coefficients.len()
            )));
        }
        let nv = |mode| {
            let m = RMat::from_row_slice(rows, cols, &doc.coefficients);
            NodeVariantFilter::new(m, mode).map(Filter::NodeVariant)
        };
        match doc.mode {
            FilterMode::NodeInvariant => {
                NodeInvariantFilter::new(doc.coefficients.clone()).map(Filter::NodeInvariant)
            }
            FilterMode::TypeI => nv(NodeVariantMode::TypeI),
            FilterMode::TypeII => nv(NodeVariantMode::TypeII),
            FilterMode::ProductForm => {
                let (&gain, rest) = doc
                    .coefficients
                    .split_first()
                    .ok_or_else(|| Error::Format("product form needs a gain".into()))?;
                let paired = 2 * doc.quadratics;
                if paired > rest.len() {
                    return Err(Error::Format(format!(
                        "{} quadratic factors need {paired} values",
                        doc.quadratics
                    )));
                }
                let (roots, pairs) = rest.split_at(rest.len() - paired);
                Ok(Filter::ProductForm(ProductFormFilter {
                    gain,
                    roots: roots.to_vec(),
                    quadratics: pairs.chunks(2).map(|p| (p[0], p[1])).collect(),
                }))
            }
        }
    }

    pub fn to_json(&self, shift_ref: Option<String>) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document(shift_ref))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}
