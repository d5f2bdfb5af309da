//! The modified matrix adds the outer product of expected gradients, which
//! separates functions whose gradients differ only in their mean.

use coactive::closedform::{cmat, cmat_modified, expected_gradient, InputPrior};
use coactive::model::{BasisTerm, Domain, HingeFactor, MarsSurrogate, Sign};

fn main() -> coactive::Result<()> {
    let prior = InputPrior::uniform_box(&Domain::unit(1));
    let hinge = |s, k| HingeFactor::new(0, s, k);
    // |x - 0.5| and x: the first has a zero mean gradient
    let vee = MarsSurrogate::new(
        1,
        Domain::unit(1),
        0.0,
        vec![BasisTerm::new(1.0, vec![hinge(Sign::Pos, 0.5)]), BasisTerm::new(1.0, vec![hinge(Sign::Neg, 0.5)])],
    )?;
    let line = MarsSurrogate::new(1, Domain::unit(1), 0.0, vec![BasisTerm::new(1.0, vec![hinge(Sign::Pos, 0.0)])])?;
    for (name, m) in [("vee", &vee), ("line", &line)] {
        println!(
            "{name}: Z = {:.3}, C = {:.3}, modified C = {:.3}",
            expected_gradient(m, &prior)?[0],
            cmat(m, m, &prior)?.entries()[(0, 0)],
            cmat_modified(m, m, &prior)?.entries()[(0, 0)]
        );
    }
    println!("cross: C = {:.3}, modified C = {:.3}", cmat(&vee, &line, &prior)?.trace(), cmat_modified(&vee, &line, &prior)?.trace());
    Ok(())
}
