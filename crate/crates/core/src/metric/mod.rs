//! Smooth metric fields on the closed unit ball.
//!
//! A [`MetricField`] is compiled from a JSON [`MetricSpec`]:
//!
//! ```json
//! {"family": "conformal2d", "n": 2, "k": 0.0,
//!  "params": {"terms": [{"type": "poly", "coeffs": [0.0, 0.0, 0.0, 0.01, 0.0, 0.01]}]}}
//! ```
//!
//! Families:
//!
//! * `euclidean`: `g = δ`. No params.
//! * `constant_curvature`: `g(x) = R² δᵏ(R x)`, the constant-curvature-`k`
//!   metric in normal coordinates about the origin, pulled back by the
//!   rescaling `x ↦ R x`. Params: `{"radius": R}` (default 1).
//! * `conformal2d`: `g = e^{2u} δ` in dimension 2, `u` a sum of terms.
//!   Params: `{"terms": [term, ...]}`.
//! * `perturbation3d`: `g = δ^{k₀} + ε H`, with `H` a symmetric tensor whose
//!   `(i, j)` entries are sums of terms. Params:
//!   `{"base_k": k₀, "epsilon": ε, "terms": [{"i": 0, "j": 1, ...term}]}`.
//!
//! A term is `{"type": "poly", "coeffs": [...]}` with coefficients over the
//! graded monomial basis `1, x, y, x², xy, y², …` (see
//! [`families::graded_monomials`]), or `{"type": "bump", "coeffs": [amplitude,
//! c₁, …, c_n, width]}` for a Gaussian bump.
//!
//! The top-level `k` is the curvature ceiling the family claims (for
//! `constant_curvature` it is the curvature itself). Optional top-level keys:
//! `margin` (collar beyond |x| = 1, default 0.01), `rotation` (orthogonal
//! matrix `Q`, giving `Qᵀ g(Q x) Q`), and `derivatives` (`"analytic"` or
//! `"finite_difference"`).

pub mod curvature;
pub mod families;
pub mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector, MAX_DIM};
use families::{curvature_profile, sum_jets, Bump, Polynomial, ScalarTerm};

pub const DEFAULT_MARGIN: f64 = 0.01;
/// Central-difference step for first derivatives.
pub const FD_STEP_FIRST: f64 = 1e-4;
/// Central-difference step for second derivatives.
pub const FD_STEP_SECOND: f64 = 1e-3;
/// Condition number above which Christoffel symbols are refused.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Euclidean,
    ConstantCurvature,
    Conformal2d,
    Perturbation3d,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeMode {
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    Poly,
    Bump,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(rename = "type")]
    pub kind: TermKind,
    pub coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
}

impl TermSpec {
    pub fn poly(coeffs: Vec<f64>) -> Self {
        TermSpec {
            kind: TermKind::Poly,
            coeffs,
            i: None,
            j: None,
        }
    }

    pub fn bump(amplitude: f64, center: &[f64], width: f64) -> Self {
        let mut coeffs = vec![amplitude];
        coeffs.extend_from_slice(center);
        coeffs.push(width);
        TermSpec {
            kind: TermKind::Bump,
            coeffs,
            i: None,
            j: None,
        }
    }

    pub fn at(mut self, i: usize, j: usize) -> Self {
        self.i = Some(i);
        self.j = Some(j);
        self
    }

    fn compile(&self, n: usize) -> Result<ScalarTerm> {
        match self.kind {
            TermKind::Poly => Ok(ScalarTerm::Poly(Polynomial::from_graded(n, &self.coeffs))),
            TermKind::Bump => {
                if self.coeffs.len() != n + 2 {
                    return Err(Error::InvalidSpec(format!(
                        "bump term needs {} coeffs [amplitude, center..., width], got {}",
                        n + 2,
                        self.coeffs.len()
                    )));
                }
                let width = self.coeffs[n + 1];
                if !(width > 0.0) {
                    return Err(Error::InvalidSpec("bump width must be positive".into()));
                }
                let mut center = [0.0; MAX_DIM];
                center[..n].copy_from_slice(&self.coeffs[1..=n]);
                Ok(ScalarTerm::Bump(Bump {
                    n,
                    amplitude: self.coeffs[0],
                    center,
                    width,
                }))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantCurvatureParams {
    #[serde(default)]
    radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConformalParams {
    terms: Vec<TermSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbationParams {
    #[serde(default)]
    base_k: Option<f64>,
    epsilon: f64,
    terms: Vec<TermSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyParams {}

/// JSON description of a metric field; kept verbatim for provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub family: FamilyKind,
    pub n: usize,
    #[serde(default)]
    pub k: f64,
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivatives: Option<DerivativeMode>,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl MetricSpec {
    pub fn euclidean(n: usize) -> Self {
        MetricSpec {
            family: FamilyKind::Euclidean,
            n,
            k: 0.0,
            params: empty_object(),
            margin: None,
            rotation: None,
            derivatives: None,
        }
    }

    pub fn constant_curvature(n: usize, k: f64) -> Self {
        MetricSpec {
            family: FamilyKind::ConstantCurvature,
            k,
            ..Self::euclidean(n)
        }
    }

    pub fn constant_curvature_ball(n: usize, k: f64, radius: f64) -> Self {
        MetricSpec {
            params: serde_json::json!({ "radius": radius }),
            ..Self::constant_curvature(n, k)
        }
    }

    pub fn conformal2d(terms: Vec<TermSpec>) -> Self {
        MetricSpec {
            family: FamilyKind::Conformal2d,
            params: serde_json::json!({ "terms": terms }),
            ..Self::euclidean(2)
        }
    }

    pub fn perturbation(n: usize, base_k: f64, epsilon: f64, terms: Vec<TermSpec>) -> Self {
        MetricSpec {
            family: FamilyKind::Perturbation3d,
            k: base_k,
            params: serde_json::json!({ "base_k": base_k, "epsilon": epsilon, "terms": terms }),
            ..Self::euclidean(n)
        }
    }

    pub fn with_ceiling(mut self, k: f64) -> Self {
        self.k = k;
        self
    }

    pub fn with_rotation(mut self, q: &Mat) -> Self {
        self.rotation = Some(q.to_rows());
        self
    }

    pub fn with_derivatives(mut self, mode: DerivativeMode) -> Self {
        self.derivatives = Some(mode);
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Debug)]
enum Family {
    Euclidean,
    ConstantCurvature {
        k: f64,
        radius: f64,
    },
    Conformal {
        terms: Vec<ScalarTerm>,
    },
    Perturbation {
        base_k: f64,
        epsilon: f64,
        terms: Vec<(usize, usize, ScalarTerm)>,
    },
}

/// Metric value with first and second partial derivatives at a point:
/// `dg[a] = ∂_a g`, `ddg[a][b] = ∂_a ∂_b g`.
#[derive(Clone, Copy, Debug)]
pub struct MetricJet {
    pub g: Mat,
    pub dg: [Mat; MAX_DIM],
    pub ddg: [[Mat; MAX_DIM]; MAX_DIM],
}

impl MetricJet {
    fn zero(n: usize) -> Self {
        MetricJet {
            g: Mat::zeros(n),
            dg: [Mat::zeros(n); MAX_DIM],
            ddg: [[Mat::zeros(n); MAX_DIM]; MAX_DIM],
        }
    }
}

/// A compiled, immutable metric field. Evaluation is pure and deterministic.
#[derive(Clone, Debug)]
pub struct MetricField {
    spec: MetricSpec,
    n: usize,
    family: Family,
    margin: f64,
    rotation: Option<Mat>,
    mode: DerivativeMode,
}

impl MetricField {
    pub fn from_spec(spec: MetricSpec) -> Result<Self> {
        let n = spec.n;
        if !(2..=3).contains(&n) {
            return Err(Error::InvalidSpec(format!("dimension must be 2 or 3, got {n}")));
        }
        if !(spec.k <= 0.0) || !spec.k.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "curvature ceiling k must be <= 0, got {}",
                spec.k
            )));
        }
        let margin = spec.margin.unwrap_or(DEFAULT_MARGIN);
        if !(margin >= DEFAULT_MARGIN) {
            return Err(Error::InvalidSpec(format!(
                "margin must be >= {DEFAULT_MARGIN}, got {margin}"
            )));
        }
        let params = if spec.params.is_null() {
            empty_object()
        } else {
            spec.params.clone()
        };
        let family = match spec.family {
            FamilyKind::Euclidean => {
                let _: EmptyParams = parse_params(&params)?;
                Family::Euclidean
            }
            FamilyKind::ConstantCurvature => {
                let p: ConstantCurvatureParams = parse_params(&params)?;
                let radius = p.radius.unwrap_or(1.0);
                if !(radius > 0.0) {
                    return Err(Error::InvalidSpec("radius must be positive".into()));
                }
                Family::ConstantCurvature { k: spec.k, radius }
            }
            FamilyKind::Conformal2d => {
                if n != 2 {
                    return Err(Error::InvalidSpec("conformal2d requires n = 2".into()));
                }
                let p: ConformalParams = parse_params(&params)?;
                let terms = p
                    .terms
                    .iter()
                    .map(|t| {
                        if t.i.is_some() || t.j.is_some() {
                            return Err(Error::InvalidSpec("conformal2d terms take no i/j".into()));
                        }
                        t.compile(n)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Family::Conformal { terms }
            }
            FamilyKind::Perturbation3d => {
                let p: PerturbationParams = parse_params(&params)?;
                let base_k = p.base_k.unwrap_or(0.0);
                if !(base_k <= 0.0) {
                    return Err(Error::InvalidSpec("base_k must be <= 0".into()));
                }
                let terms = p
                    .terms
                    .iter()
                    .map(|t| {
                        let (i, j) = match (t.i, t.j) {
                            (Some(i), Some(j)) if i < n && j < n => (i, j),
                            _ => {
                                return Err(Error::InvalidSpec(
                                    "perturbation terms need component indices i, j < n".into(),
                                ))
                            }
                        };
                        Ok((i, j, t.compile(n)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Family::Perturbation {
                    base_k,
                    epsilon: p.epsilon,
                    terms,
                }
            }
        };
        let rotation = match &spec.rotation {
            None => None,
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidSpec("rotation must be n x n".into()));
                }
                let q = Mat::from_rows(rows);
                let err = q.transpose().mul(&q).sub(&Mat::identity(n)).max_abs();
                if err > 1e-12 {
                    return Err(Error::InvalidSpec(format!(
                        "rotation is not orthogonal (error {err:e})"
                    )));
                }
                Some(q)
            }
        };
        Ok(MetricField {
            n,
            family,
            margin,
            rotation,
            mode: spec.derivatives.unwrap_or_default(),
            spec,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_spec(MetricSpec::from_json(text)?)
    }

    pub fn euclidean(n: usize) -> Self {
        Self::from_spec(MetricSpec::euclidean(n)).expect("valid euclidean spec")
    }

    pub fn constant_curvature(n: usize, k: f64) -> Result<Self> {
        Self::from_spec(MetricSpec::constant_curvature(n, k))
    }

    pub fn conformal2d(terms: Vec<TermSpec>) -> Result<Self> {
        Self::from_spec(MetricSpec::conformal2d(terms))
    }

    pub fn spec(&self) -> &MetricSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    /// Curvature upper bound claimed by the family.
    pub fn curvature_ceiling(&self) -> f64 {
        self.spec.k
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn derivative_mode(&self) -> DerivativeMode {
        self.mode
    }

    /// Same field, forcing the given derivative route.
    pub fn with_derivative_mode(&self, mode: DerivativeMode) -> Self {
        let mut out = self.clone();
        out.mode = mode;
        out.spec.derivatives = Some(mode);
        out
    }

    /// True when the metric is constant in the chart, so every Christoffel
    /// symbol vanishes identically.
    pub fn is_constant(&self) -> bool {
        matches!(self.family, Family::Euclidean)
    }

    fn check_domain(&self, x: &Vector) -> Result<()> {
        let r2: f64 = (0..self.n).map(|i| x[i] * x[i]).sum();
        let limit = 1.0 + self.margin;
        if !(r2 <= limit * limit) {
            return Err(Error::PointOutsideDomain {
                point: x[..self.n].to_vec(),
                limit,
            });
        }
        Ok(())
    }

    /// `g_x` as a symmetric positive definite matrix.
    pub fn metric_at(&self, x: &Vector) -> Result<Mat> {
        self.check_domain(x)?;
        let g = self.value(x);
        self.check_spd(&g, x)?;
        Ok(g)
    }

    /// Value, first and second derivatives at `x`, using the field's
    /// derivative mode.
    pub fn jet(&self, x: &Vector) -> Result<MetricJet> {
        self.check_domain(x)?;
        let jet = match self.mode {
            DerivativeMode::Analytic => self.analytic_jet(x),
            DerivativeMode::FiniteDifference => self.fd_jet(x),
        };
        self.check_spd(&jet.g, x)?;
        Ok(jet)
    }

    fn check_spd(&self, g: &Mat, x: &Vector) -> Result<()> {
        // Sylvester's criterion on the leading minors.
        let m = &g.m;
        let ok = match self.n {
            2 => m[0][0] > 0.0 && g.det() > 0.0,
            _ => m[0][0] > 0.0 && m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0 && g.det() > 0.0,
        };
        if ok && g.det().is_finite() {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite {
                point: x[..self.n].to_vec(),
                min_eigenvalue: g.min_eigenvalue(),
            })
        }
    }

    fn value(&self, x: &Vector) -> Mat {
        match &self.rotation {
            None => self.raw_value(x),
            Some(q) => {
                let y = q.mul_vec(x);
                self.raw_value(&y).congruence(q).symmetrized()
            }
        }
    }

    fn analytic_jet(&self, x: &Vector) -> MetricJet {
        match &self.rotation {
            None => self.raw_jet(x),
            Some(q) => {
                let n = self.n;
                let y = q.mul_vec(x);
                let raw = self.raw_jet(&y);
                let mut out = MetricJet::zero(n);
                out.g = raw.g.congruence(q).symmetrized();
                // ∂_a g'(x) = Σ_b Q_ba Qᵀ (∂_b G)(Qx) Q
                let rotated_d: Vec<Mat> = (0..n).map(|b| raw.dg[b].congruence(q)).collect();
                for a in 0..n {
                    let mut acc = Mat::zeros(n);
                    for (b, m) in rotated_d.iter().enumerate() {
                        acc = acc.add(&m.scale(q.m[b][a]));
                    }
                    out.dg[a] = acc.symmetrized();
                }
                let mut rotated_dd = [[Mat::zeros(n); MAX_DIM]; MAX_DIM];
                for b in 0..n {
                    for d in 0..n {
                        rotated_dd[b][d] = raw.ddg[b][d].congruence(q);
                    }
                }
                for a in 0..n {
                    for c in 0..n {
                        let mut acc = Mat::zeros(n);
                        for b in 0..n {
                            for d in 0..n {
                                acc = acc.add(&rotated_dd[b][d].scale(q.m[b][a] * q.m[d][c]));
                            }
                        }
                        out.ddg[a][c] = acc.symmetrized();
                    }
                }
                out
            }
        }
    }

    fn fd_jet(&self, x: &Vector) -> MetricJet {
        let n = self.n;
        let mut out = MetricJet::zero(n);
        out.g = self.value(x);
        let shifted = |offsets: &[(usize, f64)]| -> Mat {
            let mut y = *x;
            for &(i, s) in offsets {
                y[i] += s;
            }
            self.value(&y)
        };
        let h1 = FD_STEP_FIRST;
        for a in 0..n {
            out.dg[a] = shifted(&[(a, h1)]).sub(&shifted(&[(a, -h1)])).scale(0.5 / h1);
        }
        let h2 = FD_STEP_SECOND;
        for a in 0..n {
            let second = shifted(&[(a, h2)])
                .add(&shifted(&[(a, -h2)]))
                .sub(&out.g.scale(2.0))
                .scale(1.0 / (h2 * h2));
            out.ddg[a][a] = second;
            for b in (a + 1)..n {
                let mixed = shifted(&[(a, h2), (b, h2)])
                    .sub(&shifted(&[(a, h2), (b, -h2)]))
                    .sub(&shifted(&[(a, -h2), (b, h2)]))
                    .add(&shifted(&[(a, -h2), (b, -h2)]))
                    .scale(0.25 / (h2 * h2));
                out.ddg[a][b] = mixed;
                out.ddg[b][a] = mixed;
            }
        }
        out
    }

    fn raw_value(&self, x: &Vector) -> Mat {
        let n = self.n;
        match &self.family {
            Family::Euclidean => Mat::identity(n),
            Family::ConstantCurvature { k, radius } => {
                let y: Vector = std::array::from_fn(|i| x[i] * radius);
                delta_k_value(n, *k, &y).scale(radius * radius)
            }
            Family::Conformal { terms } => {
                let u = sum_jets(terms, x).value;
                Mat::identity(n).scale((2.0 * u).exp())
            }
            Family::Perturbation { base_k, epsilon, terms } => {
                let mut g = delta_k_value(n, *base_k, x);
                for (i, j, t) in terms {
                    add_symmetric(&mut g, *i, *j, epsilon * t.jet(x).value);
                }
                g
            }
        }
    }

    fn raw_jet(&self, x: &Vector) -> MetricJet {
        let n = self.n;
        match &self.family {
            Family::Euclidean => {
                let mut out = MetricJet::zero(n);
                out.g = Mat::identity(n);
                out
            }
            Family::ConstantCurvature { k, radius } => {
                let y: Vector = std::array::from_fn(|i| x[i] * radius);
                let mut out = delta_k_jet(n, *k, &y);
                let (s0, s1, s2) = (radius * radius, radius.powi(3), radius.powi(4));
                out.g = out.g.scale(s0);
                for a in 0..n {
                    out.dg[a] = out.dg[a].scale(s1);
                    for b in 0..n {
                        out.ddg[a][b] = out.ddg[a][b].scale(s2);
                    }
                }
                out
            }
            Family::Conformal { terms } => {
                let u = sum_jets(terms, x);
                let e = (2.0 * u.value).exp();
                let mut out = MetricJet::zero(n);
                out.g = Mat::identity(n).scale(e);
                for a in 0..n {
                    out.dg[a] = Mat::identity(n).scale(2.0 * u.grad[a] * e);
                    for b in 0..n {
                        let s = (4.0 * u.grad[a] * u.grad[b] + 2.0 * u.hess[a][b]) * e;
                        out.ddg[a][b] = Mat::identity(n).scale(s);
                    }
                }
                out
            }
            Family::Perturbation { base_k, epsilon, terms } => {
                let mut out = delta_k_jet(n, *base_k, x);
                for (i, j, t) in terms {
                    let s = t.jet(x);
                    add_symmetric(&mut out.g, *i, *j, epsilon * s.value);
                    for a in 0..n {
                        add_symmetric(&mut out.dg[a], *i, *j, epsilon * s.grad[a]);
                        for b in 0..n {
                            add_symmetric(&mut out.ddg[a][b], *i, *j, epsilon * s.hess[a][b]);
                        }
                    }
                }
                out
            }
        }
    }
}

fn parse_params<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::InvalidSpec(format!("params: {e}")))
}

fn add_symmetric(m: &mut Mat, i: usize, j: usize, v: f64) {
    m.m[i][j] += v;
    if i != j {
        m.m[j][i] += v;
    }
}

/// The constant-curvature-`k` tensor in normal coordinates at `x`.
pub fn delta_k_value(n: usize, k: f64, x: &Vector) -> Mat {
    let rho: f64 = (0..n).map(|i| x[i] * x[i]).sum();
    let p = curvature_profile(k, rho);
    let mut g = Mat::identity(n).scale(p.a);
    for i in 0..n {
        for j in 0..n {
            g.m[i][j] += p.q * x[i] * x[j];
        }
    }
    g
}

/// Value and two derivatives of `a(ρ) I + q(ρ) x xᵀ`.
pub fn delta_k_jet(n: usize, k: f64, x: &Vector) -> MetricJet {
    let rho: f64 = (0..n).map(|i| x[i] * x[i]).sum();
    let p = curvature_profile(k, rho);
    let mut out = MetricJet::zero(n);
    let xx = Mat::outer(n, x, x);
    let id = Mat::identity(n);
    out.g = id.scale(p.a).add(&xx.scale(p.q));
    if k == 0.0 {
        return out;
    }
    // e_i xᵀ + x e_iᵀ
    let sym_e = |i: usize| -> Mat {
        let mut m = Mat::zeros(n);
        for j in 0..n {
            m.m[i][j] += x[j];
            m.m[j][i] += x[j];
        }
        m
    };
    for i in 0..n {
        out.dg[i] = id
            .scale(2.0 * x[i] * p.da)
            .add(&xx.scale(2.0 * x[i] * p.dq))
            .add(&sym_e(i).scale(p.q));
    }
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            let mut eij = Mat::zeros(n);
            eij.m[i][j] += 1.0;
            eij.m[j][i] += 1.0;
            out.ddg[i][j] = id
                .scale(4.0 * x[i] * x[j] * p.dda + 2.0 * delta * p.da)
                .add(&xx.scale(4.0 * x[i] * x[j] * p.ddq + 2.0 * delta * p.dq))
                .add(&sym_e(j).scale(2.0 * x[i] * p.dq))
                .add(&sym_e(i).scale(2.0 * x[j] * p.dq))
                .add(&eij.scale(p.q));
        }
    }
    out
}
