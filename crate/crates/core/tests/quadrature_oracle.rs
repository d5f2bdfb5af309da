mod common;

use coactive::closedform::{i3, truncated_moment, InputPrior, Marginal};
use coactive::model::{Domain, HingeFactor, Sign};
use coactive::verify::random_corpus;

use common::{expect_1d, gauss_legendre, integrate, oracle_cmat, tensor_cmat_2d};

#[test]
fn gauss_legendre_integrates_polynomials_exactly() {
    let (x, w) = gauss_legendre(5);
    assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    let m8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
    assert!((m8 - 2.0 / 9.0).abs() < 1e-14);
}

#[test]
fn normal_half_line_first_moment() {
    let m = Marginal::normal(0.0, 1.0);
    let want = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let quad = expect_1d(&m, &|x| if x >= 0.0 { x } else { 0.0 }, &[0.0]);
    assert!((quad - want).abs() < 1e-10);
    assert!((truncated_moment(&m, 1, 0.0, f64::INFINITY) - quad).abs() < 1e-10);
}

#[test]
fn hinge_slope_product_integral() {
    let m = Marginal::uniform(0.0, 1.0);
    let f = HingeFactor::new(0, Sign::Pos, 0.5);
    let quad = integrate(&|x| f.slope(x) * f.slope(x) * m.density(x), 0.0, 1.0, &[0.5]);
    assert!((quad - 0.5).abs() < 1e-10);
    assert!((i3(Some(&f), Some(&f), &m) - quad).abs() < 1e-10);
}

#[test]
fn separable_oracle_agrees_with_tensor_quadrature() {
    let models = random_corpus(6, 2, 120, 3).unwrap();
    for prior in [
        InputPrior::uniform_box(&Domain::unit(2)),
        InputPrior::new(vec![Marginal::uniform(0.1, 0.9), Marginal::uniform(-0.2, 1.1)]).unwrap(),
    ] {
        for w in models.windows(2) {
            let a = oracle_cmat(&w[0], &w[1], &prior);
            let b = tensor_cmat_2d(&w[0], &w[1], &prior);
            assert!((&a - &b).amax() <= 1e-10 * a.amax(), "{a} vs {b}");
        }
    }
}
