//! TP2 determinantal inequalities on grid arrays.
//!
//! For cells `i` and `i'` that are incomparable (neither dominates the other),
//! affiliation requires `P(i v i') P(i ^ i') >= P(i) P(i')`, where `v` and `^`
//! are the componentwise maximum (join) and minimum (meet). In log space
//! every such inequality is linear with coefficients `+1` on the join and
//! meet and `-1` on `i` and `i'`.
//!
//! Two constraint sets are generated:
//!
//! - [`ConstraintMode::Adjacent`]: only the minors `i = m + e_a`, `i' = m + e_b`
//!   for distinct axes `a`, `b`. On a product of chains these imply all the
//!   others for strictly positive arrays.
//! - [`ConstraintMode::Full`]: one inequality per incomparable unordered pair.
//!
//! With `symmetric = true`, constraints that coincide once cells are mapped
//! to their permutation orbits are kept only once.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellArray, CellIndex, GridSpec};
use crate::symmetry::{enumerate_orbits, OrbitModel};

/// Default tolerance for [`check`].
pub const DEFAULT_CHECK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    #[default]
    Adjacent,
    Full,
}

impl std::str::FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adjacent" => Ok(Self::Adjacent),
            "full" => Ok(Self::Full),
            other => {
                Err(Error::InvalidArgument(format!("unknown constraint mode {other:?} (expected adjacent or full)")))
            }
        }
    }
}

impl std::fmt::Display for ConstraintMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Adjacent => "adjacent",
            Self::Full => "full",
        })
    }
}

/// One TP2 inequality `P(join) P(meet) >= P(i) P(i_prime)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tp2Constraint {
    pub i: CellIndex,
    pub i_prime: CellIndex,
    pub join: CellIndex,
    pub meet: CellIndex,
    /// Log-space coefficients over flat cell ids.
    pub log_row: Vec<(usize, f64)>,
    /// The same row with cells merged into orbit ids.
    pub orbit_row: Vec<(usize, f64)>,
}

/// Componentwise maximum and minimum of two indices.
pub fn join_meet(i: &CellIndex, i_prime: &CellIndex) -> Result<(CellIndex, CellIndex)> {
    if i.0.len() != i_prime.0.len() {
        return Err(Error::DimensionMismatch { expected: i.0.len(), got: i_prime.0.len() });
    }
    let join = i.0.iter().zip(&i_prime.0).map(|(a, b)| *a.max(b)).collect();
    let meet = i.0.iter().zip(&i_prime.0).map(|(a, b)| *a.min(b)).collect();
    Ok((CellIndex(join), CellIndex(meet)))
}

/// True when neither index dominates the other componentwise.
pub fn incomparable(i: &CellIndex, i_prime: &CellIndex) -> bool {
    let up = i.0.iter().zip(&i_prime.0).any(|(a, b)| a > b);
    let down = i.0.iter().zip(&i_prime.0).any(|(a, b)| a < b);
    up && down
}

/// A generated family of TP2 constraints for a `k^N` grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub constraints: Vec<Tp2Constraint>,
    pub mode: ConstraintMode,
    pub symmetric: bool,
    k: usize,
    n: usize,
}

impl ConstraintSet {
    /// Number of inequalities, `J`.
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dense `J x M` matrix of orbit rows.
    pub fn orbit_matrix(&self, num_orbits: usize) -> Vec<Vec<f64>> {
        self.constraints
            .iter()
            .map(|c| {
                let mut row = vec![0.0; num_orbits];
                for &(o, v) in &c.orbit_row {
                    row[o] += v;
                }
                row
            })
            .collect()
    }

    /// Tab-separated audit dump, one constraint per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# mode={} symmetric={} k={} n={} j={}",
            self.mode,
            self.symmetric,
            self.k,
            self.n,
            self.len()
        );
        out.push_str("id\ti\ti_prime\tjoin\tmeet\tcells\torbits\n");
        for (id, c) in self.constraints.iter().enumerate() {
            let fmt_row =
                |row: &[(usize, f64)]| row.iter().map(|(i, v)| format!("{i}:{v:+}")).collect::<Vec<_>>().join(" ");
            let _ = writeln!(
                out,
                "{id}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.i,
                c.i_prime,
                c.join,
                c.meet,
                fmt_row(&c.log_row),
                fmt_row(&c.orbit_row)
            );
        }
        out
    }

    fn ensure_grid(&self, grid: &GridSpec) -> Result<()> {
        if grid.k() != self.k || grid.n() != self.n {
            return Err(Error::InvalidArgument(format!(
                "constraint set is for k={}, N={} but the array has k={}, N={}",
                self.k,
                self.n,
                grid.k(),
                grid.n()
            )));
        }
        Ok(())
    }
}

fn make_constraint(grid: &GridSpec, orbits: &OrbitModel, i: CellIndex, i_prime: CellIndex) -> Result<Tp2Constraint> {
    let (join, meet) = join_meet(&i, &i_prime)?;
    let log_row =
        vec![(grid.flat(&join), 1.0), (grid.flat(&meet), 1.0), (grid.flat(&i), -1.0), (grid.flat(&i_prime), -1.0)];
    let mut orbit_row: Vec<(usize, f64)> = Vec::with_capacity(4);
    for &(cell, v) in &log_row {
        let o = orbits.orbit_of_flat(cell);
        match orbit_row.iter_mut().find(|(id, _)| *id == o) {
            Some(e) => e.1 += v,
            None => orbit_row.push((o, v)),
        }
    }
    orbit_row.retain(|(_, v)| *v != 0.0);
    orbit_row.sort_by_key(|(o, _)| *o);
    Ok(Tp2Constraint { i, i_prime, join, meet, log_row, orbit_row })
}

/// Generates the TP2 inequalities of a `k^N` grid.
pub fn generate(k: usize, n: usize, mode: ConstraintMode, symmetric: bool) -> Result<ConstraintSet> {
    let grid = GridSpec::equispaced(k.max(1), n)?;
    let orbits = enumerate_orbits(k.max(1), n)?;
    let mut constraints = Vec::new();
    let mut seen: HashSet<Vec<(usize, i64)>> = HashSet::new();

    let mut push = |i: CellIndex, ip: CellIndex| -> Result<()> {
        let c = make_constraint(&grid, &orbits, i, ip)?;
        if symmetric {
            let key = c.orbit_row.iter().map(|&(o, v)| (o, v as i64)).collect();
            if !seen.insert(key) {
                return Ok(());
            }
        }
        constraints.push(c);
        Ok(())
    };

    if k >= 2 {
        match mode {
            ConstraintMode::Full => {
                let cells: Vec<CellIndex> = grid.cells().collect();
                for a in 0..cells.len() {
                    for b in a + 1..cells.len() {
                        if incomparable(&cells[a], &cells[b]) {
                            push(cells[a].clone(), cells[b].clone())?;
                        }
                    }
                }
            }
            ConstraintMode::Adjacent => {
                for m in grid.cells() {
                    for a in 0..n {
                        for b in a + 1..n {
                            if m.0[a] < k && m.0[b] < k {
                                let mut i = m.clone();
                                i.0[a] += 1;
                                let mut ip = m.clone();
                                ip.0[b] += 1;
                                push(i, ip)?;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(ConstraintSet { constraints, mode, symmetric, k, n })
}

/// A constraint failing [`check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Position in the constraint set.
    pub constraint: usize,
    pub residual: f64,
}

/// Residual of one constraint on a nonnegative array: the log form when
/// all four cells are positive, the product-form gap otherwise.
pub fn residual(values: &[f64], c: &Tp2Constraint) -> f64 {
    let cells: [f64; 4] = std::array::from_fn(|t| values[c.log_row[t].0]);
    if cells.iter().all(|&v| v > 0.0) {
        cells[0].ln() + cells[1].ln() - cells[2].ln() - cells[3].ln()
    } else {
        cells[0] * cells[1] - cells[2] * cells[3]
    }
}

/// Residuals of every constraint, in order.
pub fn residuals(p: &CellArray, cs: &ConstraintSet) -> Result<Vec<f64>> {
    cs.ensure_grid(p.grid())?;
    Ok(cs.constraints.iter().map(|c| residual(p.values(), c)).collect())
}

/// Constraints with residual below `-tol`.
pub fn check(p: &CellArray, cs: &ConstraintSet, tol: f64) -> Result<Vec<Violation>> {
    Ok(residuals(p, cs)?
        .into_iter()
        .enumerate()
        .filter(|(_, r)| *r < -tol)
        .map(|(constraint, residual)| Violation { constraint, residual })
        .collect())
}
