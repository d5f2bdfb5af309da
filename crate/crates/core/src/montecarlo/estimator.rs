use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GradientMode, SampledFunction};
use crate::closedform::{CoActiveMatrix, InputPrior, MatrixKind};
use crate::error::{Error, Result};

/// Samples drawn from one RNG stream.
const SHARD: usize = 4096;

/// Running mean and sum of squared deviations for every matrix entry.
#[derive(Clone)]
struct Moments {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(len: usize) -> Self {
        Self { n: 0, mean: vec![0.0; len], m2: vec![0.0; len] }
    }

    fn push(&mut self, x: impl Iterator<Item = f64>) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        if other.n == 0 {
            return self;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let d = other.mean[i] - self.mean[i];
            self.mean[i] += d * nb / n;
            self.m2[i] += other.m2[i] + d * d * na * nb / n;
        }
        self.n += other.n;
        self
    }
}

/// Monte Carlo estimate of `C_kl` with per-entry standard errors.
#[derive(Clone, Debug)]
pub struct McEstimate {
    pub matrix: CoActiveMatrix,
    /// Standard error of each entry, `sd/√B`. Zero when `B = 1`.
    pub se: DMatrix<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Relative finite-difference step, when one was used.
    pub h: Option<f64>,
    /// Gradient evaluations that needed a one-sided stencil.
    pub one_sided: usize,
}

#[derive(Serialize, Deserialize)]
pub struct McReport {
    pub entries: Vec<Vec<f64>>,
    pub se_entries: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
    pub h: Option<f64>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl McEstimate {
    pub fn report(&self) -> McReport {
        McReport {
            entries: rows(self.matrix.entries()),
            se_entries: rows(&self.se),
            b: self.samples,
            seed: self.seed,
            h: self.h,
        }
    }
}

fn step(f: &SampledFunction) -> Option<f64> {
    match f.mode() {
        GradientMode::CentralDifference { h } => Some(h),
        GradientMode::Analytic => None,
    }
}

/// Average of `∇f_k(x)∇f_l(x)ᵀ` over `b` prior draws. Shard `s` of 4096
/// draws uses stream `s` of a generator seeded with `seed`; shards are merged
/// in order, so the result does not depend on the thread count.
pub fn mc_cmat(
    fk: &SampledFunction,
    fl: &SampledFunction,
    prior: &InputPrior,
    b: usize,
    seed: u64,
    labels: (&str, &str),
) -> Result<McEstimate> {
    if b == 0 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least one sample".into()));
    }
    let p = prior.dim();
    for f in [fk, fl] {
        if f.dim() != p {
            return Err(Error::DimensionMismatch { expected: p, got: f.dim() });
        }
    }
    let same = std::ptr::eq(fk, fl);
    let shards = b.div_ceil(SHARD);
    let parts: Vec<(Moments, usize)> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            let count = SHARD.min(b - s * SHARD);
            let mut acc = Moments::new(p * p);
            let (mut x, mut gk, mut gl) = (vec![0.0; p], vec![0.0; p], vec![0.0; p]);
            let mut one_sided = 0;
            for _ in 0..count {
                prior.sample_into(&mut rng, &mut x);
                one_sided += fk.gradient_into(&x, &mut gk);
                if same {
                    gl.copy_from_slice(&gk);
                } else {
                    one_sided += fl.gradient_into(&x, &mut gl);
                }
                acc.push((0..p * p).map(|e| gk[e / p] * gl[e % p]));
            }
            (acc, one_sided)
        })
        .collect();
    let mut total = Moments::new(p * p);
    let mut one_sided = 0;
    for (m, o) in &parts {
        total = total.merge(m);
        one_sided += o;
    }
    let mean = DMatrix::from_fn(p, p, |i, j| total.mean[i * p + j]);
    let se = DMatrix::from_fn(p, p, |i, j| {
        if b < 2 {
            0.0
        } else {
            (total.m2[i * p + j] / (b as f64 - 1.0)).sqrt() / (b as f64).sqrt()
        }
    });
    Ok(McEstimate {
        matrix: CoActiveMatrix::new(mean, labels, MatrixKind::Plain),
        se,
        samples: b,
        seed,
        h: step(fk).or(step(fl)),
        one_sided,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Domain;
    use crate::montecarlo::Fixture;

    fn unit_prior(p: usize) -> InputPrior {
        InputPrior::uniform_box(&Domain::unit(p))
    }

    #[test]
    fn linear_pair_is_exact() {
        let f = SampledFunction::fixture(Fixture::Linear { a: vec![2.0, -1.0] });
        for b in [1, 7, 5000] {
            let est = mc_cmat(&f, &f, &unit_prior(2), b, 3, ("a", "a")).unwrap();
            let want = DMatrix::from_row_slice(2, 2, &[4.0, -2.0, -2.0, 1.0]);
            assert!((est.matrix.entries() - want).norm() < 1e-8);
            assert!(est.se.norm() < 1e-6);
        }
    }

    #[test]
    fn polynomial_pair_within_three_standard_errors() {
        let f1 = SampledFunction::fixture(Fixture::Poly { beta: 0.0 });
        let f2 = SampledFunction::fixture(Fixture::Poly { beta: 3.0 });
        let est = mc_cmat(&f1, &f2, &unit_prior(2), 100_000, 11, ("f1", "f2")).unwrap();
        // exact: E[(2x1+x2)(2x1+x2)], E[(2x1+x2)(x1+9x2²)], E[x1(2x1+x2)], E[x1(x1+9x2²)]
        let want = [8.0 / 3.0, 6.0 + 1.0 / 6.0, 11.0 / 12.0, 11.0 / 6.0];
        for (e, w) in want.iter().enumerate() {
            let (i, j) = (e / 2, e % 2);
            let got = est.matrix.entries()[(i, j)];
            assert!((got - w).abs() < 3.0 * est.se[(i, j)], "[{i},{j}] {got} vs {w}");
        }
        assert_eq!(est.report().b, 100_000);
    }

    #[test]
    fn standard_error_halves_with_four_times_the_samples() {
        let f1 = SampledFunction::fixture(Fixture::Poly { beta: 0.0 });
        let f2 = SampledFunction::fixture(Fixture::Poly { beta: 1.0 });
        let a = mc_cmat(&f1, &f2, &unit_prior(2), 20_000, 1, ("", "")).unwrap();
        let b = mc_cmat(&f1, &f2, &unit_prior(2), 80_000, 1, ("", "")).unwrap();
        let ratio = a.se.norm() / b.se.norm();
        assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn self_estimate_is_symmetric_psd_and_reproducible() {
        let f = SampledFunction::fixture(Fixture::Poly { beta: -2.0 });
        let a = mc_cmat(&f, &f, &unit_prior(2), 9000, 4, ("", "")).unwrap();
        let b = mc_cmat(&f, &f, &unit_prior(2), 9000, 4, ("", "")).unwrap();
        assert_eq!(a.matrix, b.matrix);
        let c = a.matrix.entries();
        assert_eq!(c[(0, 1)], c[(1, 0)]);
        assert!(c.clone().symmetric_eigenvalues().min() >= -1e-12);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let f = SampledFunction::fixture(Fixture::Poly { beta: 0.0 });
        assert!(mc_cmat(&f, &f, &unit_prior(3), 10, 0, ("", "")).is_err());
        assert!(mc_cmat(&f, &f, &unit_prior(2), 0, 0, ("", "")).is_err());
    }
}
