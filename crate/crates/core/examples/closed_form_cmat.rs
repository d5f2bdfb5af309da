//! Closed-form co-activity matrices for the polynomial pair
//! `f1 = x1² + x1 x2` and `f2 = f1 + 3 x2³`, compared with the exact values.

use coactive::analysis::CoActiveDecomposition;
use coactive::closedform::{cmat, InputPrior};
use coactive::model::{Domain, FitConfig};
use coactive::montecarlo::Fixture;
use nalgebra::DMatrix;

fn main() -> coactive::Result<()> {
    let cfg = FitConfig::default();
    let f1 = Fixture::Poly { beta: 0.0 }.surrogate(1000, 1, &cfg)?.with_label("f1");
    let f2 = Fixture::Poly { beta: 3.0 }.surrogate(1000, 2, &cfg)?.with_label("f2");
    let prior = InputPrior::uniform_box(&Domain::unit(2));

    let c12 = cmat(&f1, &f2, &prior)?;
    let exact = DMatrix::from_row_slice(2, 2, &[480.0, 1110.0, 165.0, 330.0]) / 180.0;
    println!("C12 = {}", c12.entries());
    println!("exact = {exact}");
    println!("Frobenius distance {:.4}", (c12.entries() - &exact).norm());

    let c1 = cmat(&f1, &f1, &prior)?;
    let c2 = cmat(&f2, &f2, &prior)?;
    let dec = CoActiveDecomposition::from_matrix(&c12, c1.trace(), c2.trace())?;
    println!("concordance {:.4}, discordance {:.4}", dec.concordance, dec.discordance());
    println!("{}", serde_json::to_string_pretty(&c12)?);
    Ok(())
}
