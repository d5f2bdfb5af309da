use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Domain, MarsSurrogate};

/// Native ranges of the five piston inputs, in the order M, S, V0, k, T0.
pub const PISTON_RANGES: [[f64; 2]; 5] =
    [[30.0, 60.0], [0.005, 0.020], [0.002, 0.010], [1000.0, 5000.0], [340.0, 360.0]];

/// Analytic test functions reachable from the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum Fixture {
    /// `x1² + x1·x2 + β·x2³` on `[0,1]²`; `β = 0` gives the reference function.
    Poly { beta: f64 },
    /// Piston cycle time with ambient pressure `p0` and temperature `ta`.
    /// Inputs live on `[0,1]⁵` and are mapped to the native ranges.
    Piston { p0: f64, ta: f64 },
    /// `aᵀx` on the unit cube.
    Linear { a: Vec<f64> },
}

impl Fixture {
    pub fn dim(&self) -> usize {
        match self {
            Fixture::Poly { .. } => 2,
            Fixture::Piston { .. } => 5,
            Fixture::Linear { a } => a.len(),
        }
    }

    pub fn domain(&self) -> Domain {
        Domain::unit(self.dim())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            Fixture::Poly { beta } => x[0] * x[0] + x[0] * x[1] + beta * x[1].powi(3),
            Fixture::Piston { p0, ta } => {
                let v: Vec<f64> =
                    PISTON_RANGES.iter().zip(x).map(|([lo, hi], u)| lo + u * (hi - lo)).collect();
                piston_native(&v, *p0, *ta)
            }
            Fixture::Linear { a } => a.iter().zip(x).map(|(a, x)| a * x).sum(),
        }
    }
}

/// Piston function on native inputs `[M, S, V0, k, T0]`.
pub fn piston_native(v: &[f64], p0: f64, ta: f64) -> f64 {
    let [m, s, v0, k, t0] = [v[0], v[1], v[2], v[3], v[4]];
    let a = p0 * s + 19.62 * m - k * v0 / s;
    let g = p0 * v0 * ta / t0;
    let vol = s / (2.0 * k) * ((a * a + 4.0 * k * g).sqrt() - a);
    120.0 * PI * (m / (k + s * s * g / (vol * vol))).sqrt()
}

fn parse_num(key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| Error::UnknownFixture(format!("bad value for {key}: {v}")))
}

impl FromStr for Fixture {
    type Err = Error;

    /// `builtin:poly?beta=3`, `builtin:piston?p0=90000&ta=284`, `builtin:linear?a=1,2`.
    fn from_str(s: &str) -> Result<Self> {
        let body = s.strip_prefix("builtin:").ok_or_else(|| Error::UnknownFixture(s.into()))?;
        let (name, query) = body.split_once('?').unwrap_or((body, ""));
        let mut params = Vec::new();
        for kv in query.split('&').filter(|q| !q.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::UnknownFixture(format!("bad parameter {kv}")))?;
            params.push((k, v));
        }
        let get = |key: &str| params.iter().find(|(k, _)| *k == key).map(|(_, v)| *v);
        let allow = |keys: &[&str]| -> Result<()> {
            match params.iter().find(|(k, _)| !keys.contains(k)) {
                Some((k, _)) => Err(Error::UnknownFixture(format!("{name} takes no parameter {k}"))),
                None => Ok(()),
            }
        };
        match name {
            "poly" => {
                allow(&["beta"])?;
                let beta = get("beta").map(|v| parse_num("beta", v)).transpose()?.unwrap_or(0.0);
                Ok(Fixture::Poly { beta })
            }
            "piston" => {
                allow(&["p0", "ta"])?;
                let p0 = get("p0").map(|v| parse_num("p0", v)).transpose()?.unwrap_or(90000.0);
                let ta = get("ta").map(|v| parse_num("ta", v)).transpose()?.unwrap_or(284.0);
                Ok(Fixture::Piston { p0, ta })
            }
            "linear" => {
                allow(&["a"])?;
                let a = get("a").ok_or_else(|| Error::UnknownFixture("linear needs a=...".into()))?;
                let a = a.split(',').map(|v| parse_num("a", v)).collect::<Result<Vec<_>>>()?;
                Ok(Fixture::Linear { a })
            }
            _ => Err(Error::UnknownFixture(s.into())),
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fixture::Poly { beta } => write!(f, "builtin:poly?beta={beta}"),
            Fixture::Piston { p0, ta } => write!(f, "builtin:piston?p0={p0}&ta={ta}"),
            Fixture::Linear { a } => {
                let a: Vec<String> = a.iter().map(f64::to_string).collect();
                write!(f, "builtin:linear?a={}", a.join(","))
            }
        }
    }
}

/// How gradients are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GradientMode {
    Analytic,
    /// Central differences with step `h` times the width of each input range.
    CentralDifference { h: f64 },
}

/// Default relative step for finite differences.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// A function that can be sampled with gradients.
#[derive(Clone, Debug)]
pub enum SampledFunction {
    Fixture(Fixture, GradientMode),
    Surrogate(MarsSurrogate),
}

impl SampledFunction {
    pub fn fixture(f: Fixture) -> Self {
        SampledFunction::Fixture(f, GradientMode::CentralDifference { h: DEFAULT_FD_STEP })
    }

    pub fn surrogate(m: MarsSurrogate) -> Self {
        SampledFunction::Surrogate(m)
    }

    pub fn dim(&self) -> usize {
        match self {
            SampledFunction::Fixture(f, _) => f.dim(),
            SampledFunction::Surrogate(m) => m.dim(),
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            SampledFunction::Fixture(f, _) => f.domain(),
            SampledFunction::Surrogate(m) => m.domain().clone(),
        }
    }

    pub fn mode(&self) -> GradientMode {
        match self {
            SampledFunction::Fixture(_, m) => *m,
            SampledFunction::Surrogate(_) => GradientMode::Analytic,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            SampledFunction::Fixture(f, _) => f.evaluate(x),
            SampledFunction::Surrogate(m) => m.eval_unchecked(x),
        }
    }

    /// Gradient at `x`; returns the number of coordinates that fell back to
    /// one-sided differences.
    pub fn gradient_into(&self, x: &[f64], g: &mut [f64]) -> usize {
        match (self, self.mode()) {
            (SampledFunction::Surrogate(m), _) => {
                m.gradient_into(x, g);
                0
            }
            (_, GradientMode::CentralDifference { h }) => {
                let r = fd_gradient(self, x, h);
                g.copy_from_slice(&r.gradient);
                r.one_sided.len()
            }
            (SampledFunction::Fixture(..), GradientMode::Analytic) => {
                let r = fd_gradient(self, x, DEFAULT_FD_STEP);
                g.copy_from_slice(&r.gradient);
                r.one_sided.len()
            }
        }
    }
}

/// Finite-difference gradient and the coordinates where the domain boundary
/// forced a one-sided stencil.
#[derive(Clone, Debug, PartialEq)]
pub struct FdGradient {
    pub gradient: Vec<f64>,
    pub one_sided: Vec<usize>,
}

/// Central differences with step `h·width_i` on coordinate `i`, falling back
/// to a one-sided second-order stencil within `h` of the boundary.
pub fn fd_gradient(f: &SampledFunction, x: &[f64], h: f64) -> FdGradient {
    let domain = f.domain();
    let mut xp = x.to_vec();
    let mut gradient = vec![0.0; x.len()];
    let mut one_sided = Vec::new();
    let f0 = std::cell::OnceCell::new();
    for i in 0..x.len() {
        let step = h * domain.width(i);
        let eval = |xp: &mut Vec<f64>, v: f64| {
            xp[i] = v;
            let y = f.evaluate(xp);
            xp[i] = x[i];
            y
        };
        gradient[i] = if x[i] - step >= domain.lo(i) && x[i] + step <= domain.hi(i) {
            (eval(&mut xp, x[i] + step) - eval(&mut xp, x[i] - step)) / (2.0 * step)
        } else {
            one_sided.push(i);
            let y0 = *f0.get_or_init(|| f.evaluate(x));
            let d = if x[i] + step <= domain.hi(i) { step } else { -step };
            let y1 = eval(&mut xp, x[i] + d);
            let y2 = eval(&mut xp, x[i] + 2.0 * d);
            (-3.0 * y0 + 4.0 * y1 - y2) / (2.0 * d)
        };
    }
    FdGradient { gradient, one_sided }
}
