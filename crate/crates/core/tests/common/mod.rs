//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use coactive::closedform::{InputPrior, Marginal};
use coactive::model::{FitConfig, HingeFactor, MarsSurrogate};
use nalgebra::DMatrix;

/// Legendre polynomial `P_n(z)` and its derivative.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    (0..n)
        .map(|i| {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(n, z);
                let dz = p / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(n, z);
            (z, 2.0 / ((1.0 - z * z) * dp * dp))
        })
        .unzip()
}

fn fixed_rule(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0.iter().zip(&rule.1).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, lo: &(Vec<f64>, Vec<f64>), hi: &(Vec<f64>, Vec<f64>), depth: u32) -> f64 {
    let coarse = fixed_rule(f, a, b, lo);
    let fine = fixed_rule(f, a, b, hi);
    if depth == 0 || (fine - coarse).abs() <= 1e-14 * fine.abs() + 1e-300 {
        return fine;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, lo, hi, depth - 1) + adaptive(f, m, b, lo, hi, depth - 1)
}

/// Adaptive Gauss–Legendre integral of `f` over `[a, b]`, split at `breaks`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let lo = gauss_legendre(7);
    let hi = gauss_legendre(15);
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|&t| t > a && t < b).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2).map(|w| adaptive(f, w[0], w[1], &lo, &hi, 12)).sum()
}

/// Finite integration window for a marginal: the support, with infinite ends
/// cut twelve standard deviations from the mean.
pub fn window(m: &Marginal) -> (f64, f64) {
    let (lo, hi) = m.support();
    match *m {
        Marginal::Normal { mean, sd, .. } => (lo.max(mean - 12.0 * sd), hi.min(mean + 12.0 * sd)),
        Marginal::Uniform { .. } => (lo, hi),
    }
}

/// `E[g(x)]` for one marginal, with extra breakpoints.
pub fn expect_1d(m: &Marginal, g: &dyn Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    let (a, b) = window(m);
    let mut br = breaks.to_vec();
    if let Marginal::Normal { mean, sd, .. } = *m {
        // keep cells narrow relative to the density scale
        for k in -24..=24 {
            br.push(mean + 0.5 * sd * k as f64);
        }
    }
    integrate(&|x| g(x) * m.density(x), a, b, &br)
}

fn factor_on(m: &MarsSurrogate, term: usize, var: usize) -> Option<&HingeFactor> {
    m.terms()[term].factors.iter().find(|f| f.var == var)
}

/// Value (or slope when `diff`) of one term's factor on `var`; an absent
/// factor is the constant 1.
fn factor_fn(f: Option<&HingeFactor>, diff: bool) -> impl Fn(f64) -> f64 + '_ {
    move |x| match (f, diff) {
        (None, false) => 1.0,
        (None, true) => 0.0,
        (Some(h), false) => h.value(x),
        (Some(h), true) => h.slope(x),
    }
}

/// `E[∂_i f_k ∂_j f_l]` for all `i, j`, from one-dimensional quadratures of
/// hinge values and slopes. Relies only on independence of the prior.
pub fn oracle_cmat(mk: &MarsSurrogate, ml: &MarsSurrogate, prior: &InputPrior) -> DMatrix<f64> {
    let p = prior.dim();
    let mut c = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let mut total = 0.0;
            for a in 0..mk.terms().len() {
                for b in 0..ml.terms().len() {
                    let mut prod = mk.terms()[a].coef * ml.terms()[b].coef;
                    for v in 0..p {
                        if prod == 0.0 {
                            break;
                        }
                        let fa = factor_on(mk, a, v);
                        let fb = factor_on(ml, b, v);
                        let ga = factor_fn(fa, v == i);
                        let gb = factor_fn(fb, v == j);
                        let breaks: Vec<f64> = fa.iter().chain(fb.iter()).map(|h| h.knot).collect();
                        prod *= expect_1d(prior.marginal(v), &|x| ga(x) * gb(x), &breaks);
                    }
                    total += prod;
                }
            }
            c[(i, j)] = total;
        }
    }
    c
}

/// Brute-force tensor-product quadrature of `∇f_k ∇f_lᵀ` for two inputs,
/// using the model's own gradient. Uniform marginals only.
pub fn tensor_cmat_2d(mk: &MarsSurrogate, ml: &MarsSurrogate, prior: &InputPrior) -> DMatrix<f64> {
    assert_eq!(prior.dim(), 2);
    let rule = gauss_legendre(4);
    let cells: Vec<Vec<f64>> = (0..2)
        .map(|v| {
            let (a, b) = window(prior.marginal(v));
            let mut pts = vec![a, b];
            for m in [mk, ml] {
                for t in m.terms() {
                    pts.extend(t.factors.iter().filter(|f| f.var == v && f.knot > a && f.knot < b).map(|f| f.knot));
                }
            }
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            pts
        })
        .collect();
    let nodes = |pts: &[f64]| -> Vec<(f64, f64)> {
        pts.windows(2)
            .flat_map(|w| {
                let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                rule.0.iter().zip(&rule.1).map(move |(x, wt)| (c + h * x, wt * h)).collect::<Vec<_>>()
            })
            .collect()
    };
    let (n0, n1) = (nodes(&cells[0]), nodes(&cells[1]));
    let mut c = DMatrix::zeros(2, 2);
    for &(x0, w0) in &n0 {
        for &(x1, w1) in &n1 {
            let x = [x0, x1];
            let gk = mk.gradient(&x).unwrap();
            let gl = ml.gradient(&x).unwrap();
            let w = w0 * w1 * prior.marginal(0).density(x0) * prior.marginal(1).density(x1);
            for i in 0..2 {
                for j in 0..2 {
                    c[(i, j)] += w * gk[i] * gl[j];
                }
            }
        }
    }
    c
}

/// Central difference of `m` along every input.
pub fn central_difference(m: &MarsSurrogate, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (m.evaluate(&up).unwrap() - m.evaluate(&dn).unwrap()) / (2.0 * h)
        })
        .collect()
}

/// Small surrogates keep the quadrature oracle fast.
pub fn small_config() -> FitConfig {
    FitConfig { max_terms: 15, ..FitConfig::default() }
}

pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}
