//! Fit a hinge-spline surrogate to a Latin hypercube design and check it on
//! fresh points.

use coactive::model::{cross_validate, fit, FitConfig};
use coactive::montecarlo::Fixture;

fn main() -> coactive::Result<()> {
    let f = Fixture::Poly { beta: 3.0 };
    let (x, y) = f.design(400, 1)?;
    let cfg = FitConfig::default();
    let out = fit(&x, &y, &f.domain(), &cfg)?;
    println!("{} terms, train RMSE {:.2e}, R² {:.6}", out.report.n_terms, out.report.train_rmse, out.report.r2);

    let (xt, yt) = f.design(400, 2)?;
    let pred = out.model.predict(&xt)?;
    let mse = pred.iter().zip(&yt).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / yt.len() as f64;
    println!("hold-out RMSE {:.2e}", mse.sqrt());

    let cv = cross_validate(&x, &y, &f.domain(), &cfg, 5, 0)?;
    println!("5-fold CV: {cv:?}");
    println!("gradient at centre {:?}", out.model.gradient(&[0.5, 0.5])?);
    Ok(())
}
