//! Co-active directions, contributions and activity scores as β varies.

use coactive::analysis::{activity_scores, decompose, select_dim, symmetrize};
use coactive::verify::poly_exact;

fn main() -> coactive::Result<()> {
    println!("{:>6} {:>8} {:>18} {:>20} {:>20}", "beta", "kappa", "w1", "pi", "signed scores (q=1)");
    for beta in [-12.0, -1.0, 0.0, 0.5, 1.0, 3.0, 10.0] {
        let (c1, c2, c12) = poly_exact(beta);
        let dec = decompose(&symmetrize(&c12, None)?, c1.trace(), c2.trace())?;
        let w = dec.direction(0);
        let s = activity_scores(&dec, 1)?;
        println!(
            "{beta:>6} {:>8.4} [{:>7.4},{:>7.4}] [{:>8.4},{:>8.4}] [{:>8.4},{:>8.4}]",
            dec.concordance, w[0], w[1], dec.contributions[0], dec.contributions[1], s.signed[0], s.signed[1]
        );
    }
    let (c1, c2, c12) = poly_exact(0.5);
    let dec = decompose(&symmetrize(&c12, None)?, c1.trace(), c2.trace())?;
    let sel = select_dim(dec.eigvals.as_slice(), 0.1 * dec.eigvals[0].abs())?;
    println!("beta = 0.5, tau = 0.1 |lambda_1|: r = {}", sel.r);
    Ok(())
}
