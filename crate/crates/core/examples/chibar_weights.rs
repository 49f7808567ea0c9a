//! Simulated chi-bar weights, p-values and Kodde-Palm bounds.

use mtp2::inference::{chibar_pvalue, chibar_weights, decide, kodde_palm_bounds};
use nalgebra::DMatrix;

fn main() -> mtp2::Result<()> {
    let pi0 = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.1, 0.4, 1.0, 0.4, 0.1, 0.4, 1.0]);
    let w = chibar_weights(&pi0, 100_000, 1)?;
    println!("weights {:.4?}", w.weights);
    for stat in [0.5, 2.0, 6.0] {
        let (lo, hi) = kodde_palm_bounds(3, 0.05)?;
        println!(
            "stat {stat}: p-value {:.4}, bounds [{lo:.3}, {hi:.3}], {}",
            chibar_pvalue(stat, &w.weights),
            decide(stat, lo, hi)
        );
    }
    Ok(())
}
