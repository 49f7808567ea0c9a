//! Generate adjacent and full TP2 constraint sets and check an array.

use mtp2::affiliation::{check, generate, ConstraintMode, DEFAULT_CHECK_TOL};
use mtp2::simulate::{affiliated_gaussian, violating_2x2};

fn main() -> mtp2::Result<()> {
    let adjacent = generate(3, 3, ConstraintMode::Adjacent, true)?;
    let full = generate(3, 3, ConstraintMode::Full, true)?;
    println!("k = 3, N = 3: {} adjacent, {} full", adjacent.len(), full.len());
    print!("{}", adjacent.dump());

    let gaussian = affiliated_gaussian(3, 3, 0.5)?;
    println!("affiliated gaussian violations: {}", check(&gaussian.masses, &full, DEFAULT_CHECK_TOL)?.len());
    let bad = violating_2x2(0.1)?;
    let cs = generate(2, 2, ConstraintMode::Adjacent, true)?;
    for v in check(&bad.masses, &cs, DEFAULT_CHECK_TOL)? {
        println!("violating 2x2: constraint {} residual {:.4}", v.constraint, v.residual);
    }
    Ok(())
}
