use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::Domain;

/// Exponent of the Morris–Mitchell criterion. Large values approach maximin.
const PHI_Q: f64 = 15.0;
/// Candidate swaps tried during refinement.
const SWAP_BUDGET: usize = 5000;
/// Above this size the pairwise distance table is too large to keep.
const REFINE_MAX_N: usize = 2000;

/// Latin hypercube of `n` points in `domain`, refined towards maximin by
/// greedy within-column swaps. Every column keeps exactly one point per
/// stratum of width `1/n`.
pub fn lhs_design(n: usize, p: usize, domain: &Domain, seed: u64) -> Result<DMatrix<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("a design needs n >= 2, got {n}")));
    }
    if p != domain.dim() {
        return Err(Error::DimensionMismatch { expected: domain.dim(), got: p });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = DMatrix::zeros(n, p);
    let mut perm: Vec<usize> = (0..n).collect();
    for c in 0..p {
        perm.shuffle(&mut rng);
        for r in 0..n {
            u[(r, c)] = (perm[r] as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    if p > 1 && n <= REFINE_MAX_N {
        refine(&mut u, &mut rng);
    }
    Ok(DMatrix::from_fn(n, p, |r, c| {
        let v = domain.lo(c) + u[(r, c)] * domain.width(c);
        v.min(domain.hi(c))
    }))
}

fn energy(d2: f64) -> f64 {
    d2.powf(-PHI_Q / 2.0)
}

fn refine(u: &mut DMatrix<f64>, rng: &mut ChaCha8Rng) {
    let (n, p) = u.shape();
    let mut d2 = vec![0.0; n * n];
    for a in 0..n {
        for b in a + 1..n {
            let s: f64 = (0..p).map(|c| (u[(a, c)] - u[(b, c)]).powi(2)).sum();
            d2[a * n + b] = s;
            d2[b * n + a] = s;
        }
    }
    let mut new1 = vec![0.0; n];
    let mut new2 = vec![0.0; n];
    for _ in 0..SWAP_BUDGET {
        let c = rng.random_range(0..p);
        let r1 = rng.random_range(0..n);
        let r2 = rng.random_range(0..n);
        if r1 == r2 {
            continue;
        }
        let (v1, v2) = (u[(r1, c)], u[(r2, c)]);
        let mut delta = 0.0;
        for k in 0..n {
            if k == r1 || k == r2 {
                continue;
            }
            let x = u[(k, c)];
            let a = d2[r1 * n + k] - (v1 - x).powi(2) + (v2 - x).powi(2);
            let b = d2[r2 * n + k] - (v2 - x).powi(2) + (v1 - x).powi(2);
            delta += energy(a) - energy(d2[r1 * n + k]) + energy(b) - energy(d2[r2 * n + k]);
            new1[k] = a;
            new2[k] = b;
        }
        if delta < 0.0 {
            u[(r1, c)] = v2;
            u[(r2, c)] = v1;
            for k in 0..n {
                if k == r1 || k == r2 {
                    continue;
                }
                d2[r1 * n + k] = new1[k];
                d2[k * n + r1] = new1[k];
                d2[r2 * n + k] = new2[k];
                d2[k * n + r2] = new2[k];
            }
        }
    }
}
