//! End-to-end examples on fitted surrogates of the polynomial pair
//! `f1 = x1² + x1 x2`, `f2 = f1 + β x2³` under `Uniform(0,1)²`.

mod common;

use coactive::analysis::{activity_scores, decompose, poincare_bound, select_dim, shared_matrix, symmetrize, CoActiveDecomposition};
use coactive::closedform::{cmat, cmat_modified, cmat_trace, expected_gradient, CoActiveMatrix, InputPrior, MatrixKind};
use coactive::cluster::{mds_embed, model_centers, pairwise_concordance, GridMode};
use coactive::model::{fit_ensemble, BasisTerm, Domain, FitConfig, HingeFactor, MarsSurrogate, Sign};
use coactive::montecarlo::Fixture;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::central_difference;

fn prior() -> InputPrior {
    InputPrior::uniform_box(&Domain::unit(2))
}

fn surrogate(beta: f64, n: usize, seed: u64) -> MarsSurrogate {
    Fixture::Poly { beta }.surrogate(n, seed, &FitConfig::default()).unwrap()
}

fn exact(beta: f64) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let b = beta;
    let c1 = DMatrix::from_row_slice(2, 2, &[480.0, 165.0, 165.0, 60.0]) / 180.0;
    let c2 = DMatrix::from_row_slice(2, 2, &[480.0, 165.0 + 315.0 * b, 165.0 + 315.0 * b, 60.0 + 180.0 * b + 324.0 * b * b]) / 180.0;
    let c12 = DMatrix::from_row_slice(2, 2, &[480.0, 165.0 + 315.0 * b, 165.0, 60.0 + 90.0 * b]) / 180.0;
    (c1, c2, c12)
}

#[test]
fn fitted_gradient_at_centre() {
    let m = surrogate(0.0, 1000, 5);
    let x = [0.5, 0.5];
    let g = m.gradient(&x).unwrap();
    let fd = central_difference(&m, &x, 1e-7);
    for (a, b) in g.iter().zip(&fd) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
    assert!((g[0] - 1.5).abs() < 0.1 && (g[1] - 0.5).abs() < 0.1, "{g:?}");
}

#[test]
fn small_design_self_matrix() {
    let m = surrogate(0.0, 200, 6);
    let c = cmat(&m, &m, &prior()).unwrap();
    let d = (c.entries() - exact(0.0).0).norm();
    assert!(d < 0.1, "Frobenius {d}");
}

#[test]
fn expected_gradient_against_monte_carlo() {
    let m = surrogate(0.0, 1000, 7);
    let z = expected_gradient(&m, &prior()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mean = [0.0; 2];
    let n = 1_000_000;
    for _ in 0..n {
        let x = [rng.random::<f64>(), rng.random::<f64>()];
        let g = m.gradient(&x).unwrap();
        mean[0] += g[0] / n as f64;
        mean[1] += g[1] / n as f64;
    }
    for i in 0..2 {
        assert!((z[i] - mean[i]).abs() < 0.02, "{i}: {} vs MC {}", z[i], mean[i]);
    }
    assert!((z[0] - 1.5).abs() < 0.02 && (z[1] - 0.5).abs() < 0.02);
}

#[test]
fn modified_minus_plain_is_rank_one() {
    let m = surrogate(0.0, 500, 8);
    let p = prior();
    let diff = cmat_modified(&m, &m, &p).unwrap().entries() - cmat(&m, &m, &p).unwrap().entries();
    let z = expected_gradient(&m, &p).unwrap();
    assert!((&diff - &z * z.transpose()).amax() < 1e-12);
    let sv = diff.svd(false, false).singular_values;
    assert!(sv.min() <= 1e-12 * sv.max());
}

#[test]
fn symmetrized_off_diagonal() {
    for beta in [-2.0, 0.5, 3.0] {
        let v = symmetrize(&exact(beta).2, None).unwrap();
        let want = (165.0 + 315.0 * beta / 2.0) / 180.0;
        assert!((v[(0, 1)] - want).abs() < 1e-14 && (v[(1, 0)] - want).abs() < 1e-14);
    }
}

#[test]
fn self_decomposition_is_a_proportion() {
    let m = surrogate(1.0, 500, 9);
    let c = cmat(&m, &m, &prior()).unwrap();
    let dec = CoActiveDecomposition::from_matrix(&c, c.trace(), c.trace()).unwrap();
    assert!(dec.eigvals.iter().all(|&l| l >= -1e-12 * dec.eigvals[0]));
    assert!((dec.contributions.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!((dec.concordance - 1.0).abs() < 1e-15);
}

#[test]
fn affine_image_has_unit_concordance() {
    let m = surrogate(2.0, 300, 10);
    let p = prior();
    for b in [3.5, -0.25] {
        let mb = m.scaled(b);
        let c = cmat(&m, &mb, &p).unwrap();
        let k = CoActiveDecomposition::from_matrix(&c, cmat_trace(&m, &m, &p).unwrap(), cmat_trace(&mb, &mb, &p).unwrap())
            .unwrap()
            .concordance;
        assert!((k - b.signum()).abs() < 1e-12, "b = {b}: {k}");
    }
}

#[test]
fn q1_scores_follow_the_leading_pair() {
    let (c1, c2, c12) = exact(3.0);
    let dec = decompose(&symmetrize(&c12, None).unwrap(), c1.trace(), c2.trace()).unwrap();
    let s = activity_scores(&dec, 1).unwrap();
    for i in 0..2 {
        let direct = dec.eigvals[0] * dec.eigvecs[(i, 0)].powi(2);
        assert_eq!(s.signed[i], direct);
        assert_eq!(s.unsigned[i], direct.abs());
    }
}

#[test]
fn shared_matrix_of_the_pair() {
    let (c1, c2, _) = exact(1.0);
    let wrap = |m: DMatrix<f64>| CoActiveMatrix::new(m, ("f", "f"), MatrixKind::Plain);
    let h = shared_matrix(&[wrap(c1), wrap(c2)]).unwrap();
    assert!((h[(0, 0)] - 960.0 / 180.0).abs() < 1e-14);
}

#[test]
fn bound_for_basis_orthogonal_to_activity() {
    // f(x) = x1 on the unit square
    let m = MarsSurrogate::new(
        2,
        Domain::unit(2),
        0.0,
        vec![BasisTerm::new(1.0, vec![HingeFactor::new(0, Sign::Pos, 0.0)])],
    )
    .unwrap();
    let p = prior();
    let c = cmat(&m, &m, &p).unwrap();
    let sigma = p.covariance();
    let b = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
    let bound = poincare_bound(c.entries(), &sigma, &b).unwrap();
    assert!((bound - sigma[(0, 0)] * c.entries()[(0, 0)]).abs() < 1e-15);
    assert!((bound - 1.0 / 12.0).abs() < 1e-15);
}

#[test]
fn dimension_choice_at_beta_half() {
    let (c1, c2, c12) = exact(0.5);
    let dec = decompose(&symmetrize(&c12, None).unwrap(), c1.trace(), c2.trace()).unwrap();
    let sel = select_dim(dec.eigvals.as_slice(), 0.1 * dec.eigvals[0].abs()).unwrap();
    assert_eq!(sel.r, 1);
}

fn families(betas: &[f64], members: usize, n: usize) -> Vec<coactive::model::Ensemble> {
    betas
        .iter()
        .enumerate()
        .map(|(k, &beta)| {
            let fx = Fixture::Poly { beta };
            let (x, y) = fx.design(n, 40 + k as u64).unwrap();
            fit_ensemble(&x, &y, &fx.domain(), &FitConfig::default(), members, 50 + k as u64, &format!("beta={beta}")).unwrap()
        })
        .collect()
}

#[test]
fn between_family_concordance_is_lower() {
    let ens = families(&[0.5, 3.0], 4, 300);
    let grid = pairwise_concordance(&ens, &prior(), GridMode::Full).unwrap();
    let between = grid.summary(0, 1).mean;
    assert!(between < grid.summary(0, 0).mean && between < grid.summary(1, 1).mean);
    assert!((grid.summary(0, 1).mean - grid.summary(1, 0).mean).abs() < 1e-12);
}

#[test]
fn family_centres_are_separated() {
    let ens = families(&[0.5, 3.0], 5, 300);
    let grid = pairwise_concordance(&ens, &prior(), GridMode::Full).unwrap();
    let (d, membership) = grid.discordance_matrix();
    let emb = mds_embed(&d, 2, 3).unwrap();
    let centers = model_centers(&emb.points, &membership, 2).unwrap();
    let gap = (centers.row(0) - centers.row(1)).norm();
    let spread = membership
        .iter()
        .enumerate()
        .map(|(i, &g)| (emb.points.row(i) - centers.row(g)).norm())
        .fold(0.0f64, f64::max);
    assert!(gap > spread, "gap {gap} spread {spread}");
}

#[test]
fn trace_only_grid_is_faster_and_identical() {
    let ens = families(&[0.25, 0.5, 4.0], 8, 200);
    let p = prior();
    let time = |mode| {
        (0..3)
            .map(|_| {
                let t0 = std::time::Instant::now();
                let g = pairwise_concordance(&ens, &p, mode).unwrap();
                (t0.elapsed().as_secs_f64(), g)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
    };
    let (full_t, full) = time(GridMode::Full);
    let (trace_t, trace) = time(GridMode::TraceOnly);
    for (a, b) in full.kappa.iter().zip(trace.kappa.iter()) {
        assert!((a - b).abs() < 1e-12 || (a.is_nan() && b.is_nan()));
    }
    println!("full {full_t:.4} s, trace-only {trace_t:.4} s, ratio {:.2}", trace_t / full_t);
    assert!(trace_t < full_t);
}
