//! Compare the unconstrained, symmetric, independent and affiliated fits.

use mtp2::affiliation::{generate, ConstraintMode};
use mtp2::estimate::{mle_affiliated, mle_independent_symmetric, mle_symmetric, mle_unconstrained, SolverOptions};
use mtp2::grid::{CellArray, GridSpec};

fn main() -> mtp2::Result<()> {
    let grid = GridSpec::equispaced(3, 2)?;
    let counts = CellArray::from_counts(grid, &[30, 4, 9, 6, 12, 3, 8, 5, 23])?;
    let cs = generate(3, 2, ConstraintMode::Adjacent, true)?;

    let unc = mle_unconstrained(&counts)?;
    let sym = mle_symmetric(&counts)?;
    let ind = mle_independent_symmetric(&counts)?;
    let aff = mle_affiliated(&counts, &cs, &SolverOptions::default())?;
    println!("unconstrained {:.4}", unc.loglik);
    println!("symmetric     {:.4}", sym.loglik);
    println!("affiliated    {:.4}  active {:?}  kkt {:.1e}", aff.loglik, aff.active_constraints, aff.kkt_residual);
    println!("independent   {:.4}", ind.loglik);
    println!("masses {:.4?}", aff.masses.values());
    Ok(())
}
