//! Bootstrap ensembles of three model families, their concordance grid and a
//! nonmetric MDS map of member discordances.

use coactive::closedform::InputPrior;
use coactive::cluster::{mds_embed, model_centers, pairwise_concordance, GridMode};
use coactive::model::{fit_ensemble, Domain, FitConfig};
use coactive::montecarlo::Fixture;

fn main() -> coactive::Result<()> {
    let betas = [0.25, 0.5, 4.0];
    let ensembles = betas
        .iter()
        .enumerate()
        .map(|(k, &beta)| {
            let f = Fixture::Poly { beta };
            let (x, y) = f.design(300, k as u64)?;
            fit_ensemble(&x, &y, &f.domain(), &FitConfig::default(), 5, 10 + k as u64, &format!("beta={beta}"))
        })
        .collect::<coactive::Result<Vec<_>>>()?;
    let grid = pairwise_concordance(&ensembles, &InputPrior::uniform_box(&Domain::unit(2)), GridMode::Full)?;
    for k in 0..3 {
        let row: Vec<String> =
            (0..3).map(|l| format!("{:.4} ± {:.4}", grid.summary(k, l).mean, grid.summary(k, l).sd)).collect();
        println!("{:>9}: {}", grid.model_labels[k], row.join("   "));
    }
    let (d, membership) = grid.discordance_matrix();
    let emb = mds_embed(&d, 2, 0)?;
    let centers = model_centers(&emb.points, &membership, 3)?;
    println!("stress {:.2e} after {} iterations", emb.stress, emb.stress_history.len() - 1);
    for (k, label) in grid.model_labels.iter().enumerate() {
        println!("{label:>9} centre ({:+.4}, {:+.4})", centers[(k, 0)], centers[(k, 1)]);
    }
    Ok(())
}
