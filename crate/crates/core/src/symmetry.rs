//! Symmetric parameterization of grid distributions.
//!
//! A symmetric array is constant on permutation orbits of cell indices, so it
//! is determined by its values on sorted (nonincreasing) indices. Sorted
//! indices of length `N` are ranked in ascending lexicographic order:
//! `(1,1,1) -> 1`, `(2,1,1) -> 2`, `(2,2,1) -> 3`, `(2,2,2) -> 4`,
//! `(3,1,1) -> 5`, ... The ranking does not depend on `k`, and the sorted
//! indices with entries at most `k` are exactly ranks `1..=num(k, N)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellArray, CellIndex, CellKind, GridSpec};

/// A cell index sorted in nonincreasing order; the canonical member of its orbit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SortedIndex(Vec<usize>);

impl SortedIndex {
    /// Wraps `coords` if they are nonincreasing and positive.
    pub fn new(coords: Vec<usize>) -> Result<Self> {
        if coords.is_empty() || coords.contains(&0) || coords.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(format!("{coords:?} is not a nonincreasing positive index")));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[usize] {
        &self.0
    }

    pub fn as_cell(&self) -> CellIndex {
        CellIndex(self.0.clone())
    }
}

impl std::fmt::Display for SortedIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.as_cell().fmt(f)
    }
}

/// Sorts the coordinates of `index` in nonincreasing order.
pub fn canonicalize(index: &CellIndex) -> SortedIndex {
    let mut c = index.coords().to_vec();
    c.sort_unstable_by(|a, b| b.cmp(a));
    SortedIndex(c)
}

/// Number of distinct permutations of `s`: `N! / (r_1! ... r_l!)`.
pub fn orbit_size(s: &SortedIndex) -> u128 {
    // Multinomial as a product of binomials over runs of equal values.
    let mut size = 1u128;
    let mut placed = 0u64;
    for run in s.0.chunk_by(|a, b| a == b) {
        let r = run.len() as u64;
        placed += r;
        size *= binomial(placed, r);
    }
    size
}

/// `C(n, r)` without intermediate overflow for results that fit in `u128`.
pub fn binomial(n: u64, r: u64) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut c: u128 = 1;
    for i in 0..r {
        // c = C(n, i); C(n, i + 1) = c * (n - i) / (i + 1), exact.
        let num = (n - i) as u128;
        let den = (i + 1) as u128;
        let g = gcd(c, den);
        c = (c / g) * (num / (den / g));
    }
    c
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Number of sorted indices of length `n` weakly below `(j, ..., j)`:
/// `C(n + j - 1, j - 1)`.
pub fn num(j: usize, n: usize) -> Result<u128> {
    if j == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("num({j}, {n}) needs positive arguments")));
    }
    Ok(count_bounded(j, n))
}

/// Sorted sequences of length `len` with entries in `1..=max` (`len = 0` counts the empty one).
fn count_bounded(max: usize, len: usize) -> u128 {
    if max == 0 {
        return u128::from(len == 0);
    }
    binomial((len + max - 1) as u64, (max - 1) as u64)
}

/// 1-based position of `s` among all sorted indices of the same length.
pub fn lex_rank(s: &SortedIndex) -> u128 {
    let n = s.0.len();
    let mut rank = 1u128;
    for (p, &v) in s.0.iter().enumerate() {
        let rest = n - p - 1;
        rank += (1..v).map(|w| count_bounded(w, rest)).sum::<u128>();
    }
    rank
}

/// Inverse of [`lex_rank`] for indices of length `n`.
pub fn lex_unrank(rank: u128, n: usize) -> Result<SortedIndex> {
    if rank == 0 || n == 0 {
        return Err(Error::InvalidArgument(format!("lex_unrank({rank}, {n}) needs positive arguments")));
    }
    let mut remaining = rank - 1;
    let mut coords = Vec::with_capacity(n);
    let mut bound = usize::MAX;
    for p in 0..n {
        let rest = n - p - 1;
        let mut v = 1;
        loop {
            let block = count_bounded(v, rest);
            if remaining < block || v == bound {
                break;
            }
            remaining -= block;
            v += 1;
        }
        coords.push(v);
        bound = v;
    }
    debug_assert_eq!(remaining, 0);
    Ok(SortedIndex(coords))
}

/// Orbit representatives of the symmetric parameterization of a `k^N` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitModel {
    k: usize,
    n: usize,
    representatives: Vec<SortedIndex>,
    sizes: Vec<u128>,
    /// Orbit id of every cell, in the grid's row-major order.
    cell_orbit: Vec<usize>,
}

impl OrbitModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of orbits, `M = num(k, N)`.
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn representatives(&self) -> &[SortedIndex] {
        &self.representatives
    }

    pub fn sizes(&self) -> &[u128] {
        &self.sizes
    }

    /// Orbit sizes as floating-point multiplicities.
    pub fn weights(&self) -> Vec<f64> {
        self.sizes.iter().map(|&s| s as f64).collect()
    }

    /// Orbit id (0-based lexicographic position) of a sorted index.
    pub fn id(&self, s: &SortedIndex) -> usize {
        (lex_rank(s) - 1) as usize
    }

    /// Orbit id of a flat cell position.
    pub fn orbit_of_flat(&self, flat: usize) -> usize {
        self.cell_orbit[flat]
    }

    pub fn orbit_of(&self, index: &CellIndex) -> usize {
        self.id(&canonicalize(index))
    }

    /// Sum of `cells` over each orbit.
    pub fn orbit_totals(&self, cells: &[f64]) -> Vec<f64> {
        let mut totals = vec![0.0; self.len()];
        for (flat, v) in cells.iter().enumerate() {
            totals[self.cell_orbit[flat]] += v;
        }
        totals
    }

    /// Expands per-orbit cell values to all `k^N` cells.
    pub fn expand(&self, per_orbit: &[f64]) -> Vec<f64> {
        self.cell_orbit.iter().map(|&o| per_orbit[o]).collect()
    }
}

/// Lists the `num(k, N)` sorted indices in lexicographic order with their orbit sizes.
pub fn enumerate_orbits(k: usize, n: usize) -> Result<OrbitModel> {
    if k == 0 || n < 2 {
        return Err(Error::InvalidArgument(format!("enumerate_orbits needs k >= 1 and N >= 2 (got {k}, {n})")));
    }
    let m = count_bounded(k, n) as usize;
    let representatives: Vec<SortedIndex> = (1..=m as u128).map(|r| lex_unrank(r, n)).collect::<Result<_>>()?;
    let sizes = representatives.iter().map(orbit_size).collect();
    let grid = GridSpec::equispaced(k, n)?;
    let cell_orbit = grid.cells().map(|c| (lex_rank(&canonicalize(&c)) - 1) as usize).collect();
    Ok(OrbitModel { k, n, representatives, sizes, cell_orbit })
}

/// Orbit totals of a count array, keyed by sorted index.
pub fn symmetrize(counts: &CellArray) -> Result<BTreeMap<SortedIndex, u64>> {
    if counts.kind() != CellKind::Counts {
        return Err(Error::InvalidArgument(format!("expected counts, got {:?}", counts.kind())));
    }
    let grid = counts.grid();
    let model = enumerate_orbits(grid.k(), grid.n())?;
    let totals = model.orbit_totals(counts.values());
    Ok(model.representatives.iter().cloned().zip(totals.into_iter().map(|t| t as u64)).collect())
}
