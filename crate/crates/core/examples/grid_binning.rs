//! Bin signal tuples on an uneven grid and convert between masses and heights.

use mtp2::grid::{count_cells, CellArray, CellKind, GridSpec};

fn main() -> mtp2::Result<()> {
    let grid = GridSpec::new(vec![0.0, 0.4, 0.6, 1.0], 2)?;
    let tuples = vec![vec![0.0, 0.1], vec![0.4, 0.41], vec![0.55, 0.9], vec![1.0, 1.0], vec![0.7, 0.2]];
    let counts = count_cells(&tuples, &grid)?;
    for (cell, c) in grid.cells().zip(counts.values()) {
        println!("cell {:?}: {c}", cell.coords());
    }

    let masses = CellArray::mass_from_weights(grid.clone(), counts.values().iter().map(|c| c + 0.5).collect())?;
    let heights = masses.height_from_mass()?;
    assert_eq!(heights.kind(), CellKind::Height);
    println!("heights {:.3?}", heights.values());
    println!("equispaced: {}", grid.is_equispaced());
    Ok(())
}
