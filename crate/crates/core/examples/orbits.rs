//! Enumerate the symmetric orbits of a grid with their ranks and sizes.

use mtp2::symmetry::{enumerate_orbits, lex_rank, num};

fn main() -> mtp2::Result<()> {
    let (k, n) = (4, 3);
    let model = enumerate_orbits(k, n)?;
    println!("k = {k}, N = {n}: {} orbits (formula {})", model.len(), num(k, n)?);
    for (rep, size) in model.representatives().iter().zip(model.sizes()) {
        println!("{:>3}  {:?}  size {size}", lex_rank(rep), rep.coords());
    }
    Ok(())
}
