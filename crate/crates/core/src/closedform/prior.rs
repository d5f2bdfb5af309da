use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::model::Domain;

/// Marginal distribution of one input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Marginal {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Normal, optionally truncated to `[trunc_lo, trunc_hi]`.
    Normal {
        mean: f64,
        sd: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trunc_lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trunc_hi: Option<f64>,
    },
}

pub(crate) fn std_pdf(z: f64) -> f64 {
    if z.is_infinite() {
        0.0
    } else {
        (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
    }
}

pub(crate) fn std_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `Phi(zb) - Phi(za)` without cancellation in the upper tail.
pub(crate) fn std_mass(za: f64, zb: f64) -> f64 {
    if zb <= za {
        return 0.0;
    }
    if za >= 0.0 {
        0.5 * (erfc(za / SQRT_2) - erfc(zb / SQRT_2))
    } else {
        std_cdf(zb) - std_cdf(za)
    }
}

impl Marginal {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Marginal::Uniform { lo, hi }
    }

    pub fn normal(mean: f64, sd: f64) -> Self {
        Marginal::Normal { mean, sd, trunc_lo: None, trunc_hi: None }
    }

    pub fn truncated_normal(mean: f64, sd: f64, lo: f64, hi: f64) -> Self {
        Marginal::Normal { mean, sd, trunc_lo: Some(lo), trunc_hi: Some(hi) }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Marginal::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidPrior(format!("uniform needs lo < hi, got [{lo}, {hi}]")));
                }
            }
            Marginal::Normal { mean, sd, .. } => {
                if !(mean.is_finite() && sd.is_finite() && sd > 0.0) {
                    return Err(Error::InvalidPrior(format!("normal needs sd > 0, got {sd}")));
                }
                let (lo, hi) = self.support();
                if lo.is_nan() || hi.is_nan() || lo >= hi {
                    return Err(Error::InvalidPrior(format!("empty truncation [{lo}, {hi}]")));
                }
                let (za, zb) = ((lo - mean) / sd, (hi - mean) / sd);
                if std_mass(za, zb) <= 0.0 {
                    return Err(Error::InvalidPrior("truncation interval has no mass".into()));
                }
            }
        }
        Ok(())
    }

    /// Support `[lo, hi]`, possibly infinite.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { lo, hi } => (lo, hi),
            Marginal::Normal { trunc_lo, trunc_hi, .. } => {
                (trunc_lo.unwrap_or(f64::NEG_INFINITY), trunc_hi.unwrap_or(f64::INFINITY))
            }
        }
    }

    /// Probability density at `x`.
    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match *self {
            Marginal::Uniform { lo, hi } => 1.0 / (hi - lo),
            Marginal::Normal { mean, sd, .. } => {
                let z = (x - mean) / sd;
                std_pdf(z) / sd / std_mass((lo - mean) / sd, (hi - mean) / sd)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        super::truncated_moment(self, 1, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
            Marginal::Normal { mean, sd, .. } => {
                let (lo, hi) = self.support();
                let (za, zb) = ((lo - mean) / sd, (hi - mean) / sd);
                let z = std_mass(za, zb);
                let (pa, pb) = (std_pdf(za), std_pdf(zb));
                let ta = if za.is_finite() { za * pa } else { 0.0 };
                let tb = if zb.is_finite() { zb * pb } else { 0.0 };
                let shift = (pa - pb) / z;
                sd * sd * (1.0 + (ta - tb) / z - shift * shift)
            }
        }
    }

    /// Inverse CDF transform of a uniform draw.
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => lo + u * (hi - lo),
            Marginal::Normal { mean, sd, .. } => {
                let (lo, hi) = self.support();
                let ca = std_cdf((lo - mean) / sd);
                let cb = std_cdf((hi - mean) / sd);
                let c = (ca + u * (cb - ca)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                let z = -SQRT_2 * erfc_inv(2.0 * c);
                (mean + sd * z).clamp(lo, hi)
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

#[derive(Serialize, Deserialize)]
struct RawPrior {
    p: usize,
    dims: Vec<Marginal>,
}

/// Independent product distribution over the inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrior", into = "RawPrior")]
pub struct InputPrior {
    dims: Vec<Marginal>,
}

impl TryFrom<RawPrior> for InputPrior {
    type Error = String;

    fn try_from(raw: RawPrior) -> std::result::Result<Self, String> {
        if raw.p != raw.dims.len() {
            return Err(format!("prior declares p = {} but lists {} dims", raw.p, raw.dims.len()));
        }
        InputPrior::new(raw.dims).map_err(|e| e.to_string())
    }
}

impl From<InputPrior> for RawPrior {
    fn from(p: InputPrior) -> Self {
        RawPrior { p: p.dims.len(), dims: p.dims }
    }
}

impl InputPrior {
    pub fn new(dims: Vec<Marginal>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidPrior("prior needs at least one dimension".into()));
        }
        for d in &dims {
            d.validate()?;
        }
        Ok(Self { dims })
    }

    /// Uniform on every side of a box.
    pub fn uniform_box(domain: &Domain) -> Self {
        Self { dims: domain.bounds().iter().map(|[lo, hi]| Marginal::uniform(*lo, *hi)).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn marginal(&self, i: usize) -> &Marginal {
        &self.dims[i]
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.dims
    }

    /// Diagonal covariance of the product distribution.
    pub fn covariance(&self) -> nalgebra::DMatrix<f64> {
        let v: Vec<f64> = self.dims.iter().map(Marginal::variance).collect();
        nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v))
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (o, d) in out.iter_mut().zip(&self.dims) {
            *o = d.sample(rng);
        }
    }
}
