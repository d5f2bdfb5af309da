//! Hinge-spline surrogates.
//!
//! A [`MarsSurrogate`] is an intercept plus a sum of coefficient-weighted
//! products of hinge functions `max(s (x_i - t), 0)`. Each basis term holds at
//! most one factor per input; an input missing from a term contributes a
//! factor of one.

mod ensemble;
mod fit;

pub use ensemble::{fit_ensemble, Ensemble};
pub use fit::{cross_validate, fit, CvReport, FitConfig, FitOutcome, FitReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Direction of a hinge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Pos => 1.0,
            Sign::Neg => -1.0,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Pos),
            -1 => Ok(Sign::Neg),
            other => Err(format!("hinge sign must be +1 or -1, got {other}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }
}

/// Axis-aligned input box, one `[lo, hi]` per input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Domain {
    bounds: Vec<[f64; 2]>,
}

impl Domain {
    pub fn new(bounds: Vec<[f64; 2]>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidArgument("domain needs at least one input".into()));
        }
        for (i, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "domain bound {i} must satisfy lo < hi (got [{lo}, {hi}])"
                )));
            }
        }
        Ok(Self { bounds })
    }

    /// The unit cube `[0, 1]^p`.
    pub fn unit(p: usize) -> Self {
        Self { bounds: vec![[0.0, 1.0]; p] }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn lo(&self, i: usize) -> f64 {
        self.bounds[i][0]
    }

    pub fn hi(&self, i: usize) -> f64 {
        self.bounds[i][1]
    }

    pub fn width(&self, i: usize) -> f64 {
        self.bounds[i][1] - self.bounds[i][0]
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn contains(&self, i: usize, v: f64) -> bool {
        v >= self.bounds[i][0] && v <= self.bounds[i][1]
    }

    /// Map a point of the unit cube into this box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.bounds)
            .map(|(&ui, [lo, hi])| lo + ui * (hi - lo))
            .collect()
    }
}

impl TryFrom<Vec<[f64; 2]>> for Domain {
    type Error = String;

    fn try_from(bounds: Vec<[f64; 2]>) -> std::result::Result<Self, String> {
        Domain::new(bounds).map_err(|e| e.to_string())
    }
}

impl From<Domain> for Vec<[f64; 2]> {
    fn from(d: Domain) -> Self {
        d.bounds
    }
}

/// One hinge factor `max(sign * (x[var] - knot), 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HingeFactor {
    pub var: usize,
    pub sign: Sign,
    pub knot: f64,
}

impl HingeFactor {
    pub fn new(var: usize, sign: Sign, knot: f64) -> Self {
        Self { var, sign, knot }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        (self.sign.value() * (x - self.knot)).max(0.0)
    }

    /// Right derivative: at the knot a `+` hinge has slope 1 and a `-` hinge
    /// slope 0.
    #[inline]
    pub fn slope(&self, x: f64) -> f64 {
        match self.sign {
            Sign::Pos if x >= self.knot => 1.0,
            Sign::Neg if x < self.knot => -1.0,
            _ => 0.0,
        }
    }
}

/// A coefficient times a product of hinge factors on distinct inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisTerm {
    pub coef: f64,
    pub factors: Vec<HingeFactor>,
}

impl BasisTerm {
    pub fn new(coef: f64, factors: Vec<HingeFactor>) -> Self {
        Self { coef, factors }
    }

    pub fn degree(&self) -> usize {
        self.factors.len()
    }

    /// The factor acting on input `var`, if any.
    pub fn factor_on(&self, var: usize) -> Option<&HingeFactor> {
        self.factors.iter().find(|f| f.var == var)
    }

    /// Product of hinge values, without the coefficient.
    #[inline]
    pub fn basis_value(&self, x: &[f64]) -> f64 {
        self.factors.iter().map(|f| f.value(x[f.var])).product()
    }
}

#[derive(Deserialize)]
struct RawSurrogate {
    #[serde(default)]
    label: String,
    p: usize,
    domain: Domain,
    intercept: f64,
    terms: Vec<BasisTerm>,
}

/// Intercept plus hinge-product basis terms over a declared input box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSurrogate")]
pub struct MarsSurrogate {
    label: String,
    p: usize,
    domain: Domain,
    intercept: f64,
    terms: Vec<BasisTerm>,
}

impl TryFrom<RawSurrogate> for MarsSurrogate {
    type Error = String;

    fn try_from(raw: RawSurrogate) -> std::result::Result<Self, String> {
        MarsSurrogate::new(raw.p, raw.domain, raw.intercept, raw.terms)
            .map(|m| m.with_label(raw.label))
            .map_err(|e| e.to_string())
    }
}

impl MarsSurrogate {
    /// Validate and build a surrogate. Terms without factors are folded into
    /// the intercept.
    pub fn new(p: usize, domain: Domain, intercept: f64, terms: Vec<BasisTerm>) -> Result<Self> {
        if domain.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, got: domain.dim() });
        }
        if !intercept.is_finite() {
            return Err(Error::InvalidModel("intercept is not finite".into()));
        }
        let mut intercept = intercept;
        let mut kept = Vec::with_capacity(terms.len());
        for (m, term) in terms.into_iter().enumerate() {
            if !term.coef.is_finite() {
                return Err(Error::InvalidModel(format!("term {m} has a non-finite coefficient")));
            }
            if term.factors.is_empty() {
                intercept += term.coef;
                continue;
            }
            for (a, f) in term.factors.iter().enumerate() {
                if f.var >= p {
                    return Err(Error::InvalidModel(format!(
                        "term {m} references input {} but p = {p}",
                        f.var
                    )));
                }
                if !f.knot.is_finite() || !domain.contains(f.var, f.knot) {
                    return Err(Error::InvalidModel(format!(
                        "term {m}: knot {} outside the domain of input {}",
                        f.knot, f.var
                    )));
                }
                if term.factors[..a].iter().any(|g| g.var == f.var) {
                    return Err(Error::InvalidModel(format!(
                        "term {m} has two factors on input {}",
                        f.var
                    )));
                }
            }
            kept.push(term);
        }
        Ok(Self { label: String::new(), p, domain, intercept, terms: kept })
    }

    /// A model that is constant everywhere.
    pub fn constant(domain: Domain, value: f64) -> Self {
        Self { label: String::new(), p: domain.dim(), domain, intercept: value, terms: Vec::new() }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn terms(&self) -> &[BasisTerm] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.coef == 0.0)
    }

    /// Every term coefficient multiplied by `c`; the intercept is unchanged.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.coef *= c;
        }
        out
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: x.len() });
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.intercept, |acc, t| acc + t.coef * t.basis_value(x))
    }

    /// Analytic gradient. On a knot the right derivative is used.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let mut g = vec![0.0; self.p];
        self.gradient_into(x, &mut g);
        Ok(g)
    }

    pub(crate) fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut vals = [0.0f64; 8];
        for term in &self.terms {
            let k = term.factors.len();
            if k <= vals.len() {
                for (v, f) in vals.iter_mut().zip(&term.factors) {
                    *v = f.value(x[f.var]);
                }
                for (a, f) in term.factors.iter().enumerate() {
                    let slope = f.slope(x[f.var]);
                    if slope == 0.0 {
                        continue;
                    }
                    let others: f64 = (0..k).filter(|&b| b != a).map(|b| vals[b]).product();
                    g[f.var] += term.coef * slope * others;
                }
            } else {
                for (a, f) in term.factors.iter().enumerate() {
                    let slope = f.slope(x[f.var]);
                    if slope == 0.0 {
                        continue;
                    }
                    let others: f64 = term
                        .factors
                        .iter()
                        .enumerate()
                        .filter(|&(b, _)| b != a)
                        .map(|(_, h)| h.value(x[h.var]))
                        .product();
                    g[f.var] += term.coef * slope * others;
                }
            }
        }
    }

    /// Evaluate every row of `x`.
    pub fn predict(&self, x: &nalgebra::DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: x.ncols() });
        }
        let mut row = vec![0.0; self.p];
        Ok((0..x.nrows())
            .map(|r| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = x[(r, j)];
                }
                self.eval_unchecked(&row)
            })
            .collect())
    }

    /// Table `[term][var]` of the factor each term places on each input.
    pub(crate) fn factor_table(&self) -> Vec<Vec<Option<HingeFactor>>> {
        self.terms
            .iter()
            .map(|t| (0..self.p).map(|i| t.factor_on(i).copied()).collect())
            .collect()
    }
}
