//! Self-checks behind `coas verify`, each reporting the measured value.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{concordance, decompose, discordance, symmetrize};
use crate::closedform::{cmat, cmat_trace, InputPrior};
use crate::error::{Error, Result};
use crate::model::{fit, Domain, FitConfig, MarsSurrogate};
use crate::montecarlo::{lhs_design, mc_cmat, Fixture, SampledFunction};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: Vec<f64>,
    pub expected: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub fixture: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Fixture {
    /// Evaluate the fixture on an `n`-point Latin hypercube.
    pub fn design(&self, n: usize, seed: u64) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let x = lhs_design(n, self.dim(), &self.domain(), seed)?;
        let y = (0..n).map(|r| self.evaluate(x.row(r).clone_owned().as_slice())).collect();
        Ok((x, y))
    }

    /// Fit a surrogate to an `n`-point design.
    pub fn surrogate(&self, n: usize, seed: u64, cfg: &FitConfig) -> Result<MarsSurrogate> {
        let (x, y) = self.design(n, seed)?;
        Ok(fit(&x, &y, &self.domain(), cfg)?.model.with_label(self.to_string()))
    }
}

/// Exact `(C_1, C_2, C_12)` for the polynomial pair under `Uniform(0,1)²`.
pub fn poly_exact(beta: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let b = beta;
    let c1 = DMatrix::from_row_slice(2, 2, &[480.0, 165.0, 165.0, 60.0]) / 180.0;
    let c2 =
        DMatrix::from_row_slice(2, 2, &[480.0, 165.0 + 315.0 * b, 165.0 + 315.0 * b, 60.0 + b * (324.0 * b + 180.0)])
            / 180.0;
    let c12 = DMatrix::from_row_slice(2, 2, &[480.0, 165.0 + 315.0 * b, 165.0, 60.0 + 90.0 * b]) / 180.0;
    (c1, c2, c12)
}

fn check(name: &str, measured: Vec<f64>, expected: Vec<f64>, tolerance: f64, pass: bool, t0: Instant) -> Check {
    Check { name: name.into(), measured, expected, tolerance, pass, seconds: t0.elapsed().as_secs_f64() }
}

fn elementwise(name: &str, measured: Vec<f64>, expected: Vec<f64>, tol: f64, t0: Instant) -> Check {
    let pass = measured.iter().zip(&expected).all(|(m, e)| (m - e).abs() < tol);
    check(name, measured, expected, tol, pass, t0)
}

/// Concordance of the exact polynomial pair.
pub fn poly_concordance(beta: f64) -> Result<f64> {
    let (c1, c2, c12) = poly_exact(beta);
    Ok(decompose(&symmetrize(&c12, None)?, c1.trace(), c2.trace())?.concordance)
}

fn unit_prior(p: usize) -> InputPrior {
    InputPrior::uniform_box(&Domain::unit(p))
}

fn poly_checks(seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (beta, want, name) in
        [(0.5, 0.944, "kappa_beta_0.5"), (3.0, 0.551, "kappa_beta_3"), (-12.0, -0.131, "kappa_beta_-12")]
    {
        let t0 = Instant::now();
        out.push(elementwise(name, vec![poly_concordance(beta)?], vec![want], 5e-4, t0));
    }

    let t0 = Instant::now();
    let cfg = FitConfig::default();
    let f1 = Fixture::Poly { beta: 0.0 }.surrogate(1000, seed, &cfg)?;
    let f2 = Fixture::Poly { beta: 3.0 }.surrogate(1000, seed.wrapping_add(1), &cfg)?;
    let c12 = cmat(&f1, &f2, &unit_prior(2))?;
    let truth = DMatrix::from_row_slice(2, 2, &[2.667, 6.167, 0.917, 1.833]);
    let dist = (c12.entries() - &truth).norm();
    out.push(check("surrogate_c12_frobenius", vec![dist], vec![0.0], 0.1, dist <= 0.1, t0));

    let t0 = Instant::now();
    let g2 = Fixture::Poly { beta: 0.5 }.surrogate(1000, seed.wrapping_add(2), &cfg)?;
    let prior = unit_prior(2);
    let c = cmat(&f1, &g2, &prior)?;
    let dec = decompose(&symmetrize(c.entries(), None)?, cmat_trace(&f1, &f1, &prior)?, cmat_trace(&g2, &g2, &prior)?)?;
    let w = dec.direction(0);
    out.push(elementwise("direction_beta_0.5", vec![w[0], w[1]], vec![0.907, 0.422], 0.03, t0));
    let pi = &dec.contributions;
    let pass = (pi[0] - 0.9518).abs() <= 0.01 && (pi[1] + 0.0077).abs() <= 0.005;
    out.push(check("contributions_beta_0.5", vec![pi[0], pi[1]], vec![0.9518, -0.0077], 0.01, pass, t0));
    Ok(out)
}

/// Relative Frobenius gap between the closed-form piston `C_12` from fitted
/// surrogates and a Monte Carlo estimate on the raw functions.
pub fn piston_gap(n: usize, samples: usize, seed: u64) -> Result<(f64, DMatrix<f64>, DMatrix<f64>)> {
    let a = Fixture::Piston { p0: 90000.0, ta: 284.0 };
    let b = Fixture::Piston { p0: 110000.0, ta: 302.0 };
    let cfg = FitConfig::default();
    let prior = unit_prior(5);
    let fa = a.surrogate(n, seed, &cfg)?;
    let fb = b.surrogate(n, seed.wrapping_add(1), &cfg)?;
    let cf = cmat(&fa, &fb, &prior)?.entries().clone();
    let mc = mc_cmat(&SampledFunction::fixture(a), &SampledFunction::fixture(b), &prior, samples, seed, ("f1", "f2"))?;
    let mc = mc.matrix.entries().clone();
    Ok(((&cf - &mc).norm() / mc.norm(), cf, mc))
}

fn piston_checks(seed: u64) -> Result<Vec<Check>> {
    let t0 = Instant::now();
    let (gap, _, _) = piston_gap(1000, 100_000, seed)?;
    Ok(vec![check("piston_closed_form_vs_mc", vec![gap], vec![0.0], 0.05, gap <= 0.05, t0)])
}

/// A random polynomial of degree ≤ 3 in `p` inputs.
pub fn random_polynomial(p: usize, rng: &mut impl Rng) -> impl Fn(&[f64]) -> f64 {
    let lin: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
    let quad: Vec<(usize, usize, f64)> =
        (0..3).map(|_| (rng.random_range(0..p), rng.random_range(0..p), rng.random_range(-2.0..2.0))).collect();
    let cube = (rng.random_range(0..p), rng.random_range(-1.0..1.0));
    move |x: &[f64]| {
        lin.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
            + quad.iter().map(|&(i, j, c)| c * x[i] * x[j]).sum::<f64>()
            + cube.1 * x[cube.0].powi(3)
    }
}

/// `count` surrogates fitted to random polynomials on `[0,1]^p`.
pub fn random_corpus(count: usize, p: usize, n: usize, seed: u64) -> Result<Vec<MarsSurrogate>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = Domain::unit(p);
    let cfg = FitConfig { max_terms: 21, ..FitConfig::default() };
    (0..count)
        .map(|k| {
            let f = random_polynomial(p, &mut rng);
            let x = lhs_design(n, p, &domain, rng.random())?;
            let y: Vec<f64> = (0..n).map(|r| f(x.row(r).clone_owned().as_slice())).collect();
            Ok(fit(&x, &y, &domain, &cfg)?.model.with_label(format!("r{k}")))
        })
        .collect()
}

/// Discordance matrix of a corpus via closed-form traces.
pub fn corpus_discordance(models: &[MarsSurrogate], prior: &InputPrior) -> Result<DMatrix<f64>> {
    let n = models.len();
    let t: Vec<f64> = models.iter().map(|m| cmat_trace(m, m, prior)).collect::<Result<_>>()?;
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let k = concordance(cmat_trace(&models[i], &models[j], prior)?, t[i], t[j])?;
            d[(i, j)] = discordance(k);
        }
    }
    Ok(d)
}

fn metric_checks(seed: u64) -> Result<Vec<Check>> {
    let t0 = Instant::now();
    let models = random_corpus(50, 3, 150, seed)?;
    let d = corpus_discordance(&models, &unit_prior(3))?;
    let n = d.nrows();
    let min = d.min();
    let asym = (&d - d.transpose()).amax();
    let diag = d.diagonal().amax();
    let mut slack = f64::INFINITY;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for (x, y, z) in [(a, b, c), (b, c, a), (c, a, b)] {
                    slack = slack.min(d[(x, y)] + d[(y, z)] - d[(x, z)]);
                }
            }
        }
    }
    Ok(vec![
        check("non_negative", vec![min], vec![0.0], 0.0, min >= 0.0, t0),
        check("symmetric", vec![asym], vec![0.0], 1e-10, asym <= 1e-10, t0),
        check("zero_self_distance", vec![diag], vec![0.0], 1e-10, diag <= 1e-10, t0),
        check("triangle_inequality", vec![slack], vec![0.0], 1e-9, slack >= -1e-9, t0),
    ])
}

pub const VERIFY_FIXTURES: [&str; 3] = ["poly", "piston", "metric"];

pub fn run(fixture: &str, seed: u64) -> Result<VerifyReport> {
    let checks = match fixture {
        "poly" => poly_checks(seed)?,
        "piston" => piston_checks(seed)?,
        "metric" => metric_checks(seed)?,
        other => return Err(Error::UnknownFixture(other.into())),
    };
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { fixture: fixture.into(), seed, checks, pass })
}
