//! Bound on the mean squared error of approximating a function on a
//! subspace, for active directions and for random subspaces.

use coactive::analysis::{canonical_transform, poincare_bound};
use coactive::closedform::{cmat, InputPrior, Marginal};
use coactive::verify::random_corpus;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> coactive::Result<()> {
    let m = random_corpus(1, 3, 300, 5)?.remove(0);
    let prior = InputPrior::new(vec![Marginal::uniform(0.0, 1.0), Marginal::normal(0.5, 0.15), Marginal::uniform(0.2, 0.8)])?;
    let c = cmat(&m, &m, &prior)?.entries().clone();
    let sigma = prior.covariance();
    let cz = canonical_transform(&c, &sigma)?;
    let eye = DMatrix::identity(3, 3);
    let eig = SymmetricEigen::new(cz.clone());
    let mut idx: Vec<usize> = (0..3).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for r in 0..=3 {
        let basis = DMatrix::from_fn(3, r, |i, j| eig.eigenvectors[(i, idx[j])]);
        let active = poincare_bound(&cz, &eye, &basis)?;
        let random = (0..200)
            .map(|_| poincare_bound(&cz, &eye, &DMatrix::from_fn(3, r, |_, _| rng.random_range(-1.0..1.0))))
            .collect::<coactive::Result<Vec<f64>>>()?;
        let best_random = random.iter().copied().fold(f64::INFINITY, f64::min);
        println!("rank {r}: active {active:.5e}, best of 200 random {best_random:.5e}");
    }
    Ok(())
}
