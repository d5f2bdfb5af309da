//! Maximin Latin hypercube on a native-scale box.

use coactive::model::Domain;
use coactive::montecarlo::lhs_design;

fn main() -> coactive::Result<()> {
    let domain = Domain::new(vec![[30.0, 60.0], [0.005, 0.020], [1000.0, 5000.0]])?;
    let x = lhs_design(8, 3, &domain, 42)?;
    for row in x.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>10.4}")).collect();
        println!("{}", cells.join(" "));
    }
    // every column hits each of the 8 strata exactly once
    for j in 0..3 {
        let mut strata: Vec<usize> =
            x.column(j).iter().map(|v| ((v - domain.lo(j)) / domain.width(j) * 8.0) as usize).collect();
        strata.sort_unstable();
        assert_eq!(strata, (0..8).collect::<Vec<_>>());
    }
    Ok(())
}
