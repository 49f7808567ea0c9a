//! Rectangular grids over `[0,1]^N`, binning of normalized bids, and the
//! discretization transform that turns a density into a grid distribution.
//!
//! Each coordinate axis is cut by the same breakpoints `0 = r_0 < ... < r_k = 1`.
//! Interval `j` is `(r_{j-1}, r_j]`, with the point `0` attached to interval 1.
//! Cells are addressed by 1-based [`CellIndex`] coordinates and stored densely
//! in row-major order (first coordinate most significant).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the adding-up identities of mass and height arrays.
pub const ADDING_UP_TOL: f64 = 1e-12;

/// Default number of midpoint-rule points per axis inside each cell.
pub const DEFAULT_SUBGRID: usize = 32;

/// Breakpoints shared by every coordinate, plus the dimension `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    breakpoints: Vec<f64>,
    n: usize,
}

impl GridSpec {
    /// Builds a grid from explicit breakpoints `0 = r_0 < ... < r_k = 1`.
    pub fn new(breakpoints: Vec<f64>, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("need at least two bidders, got N = {n}")));
        }
        if breakpoints.len() < 2 {
            return Err(Error::InvalidGrid("need at least the breakpoints 0 and 1".into()));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidGrid(format!("breakpoints must start at 0 and end at 1, got {breakpoints:?}")));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidGrid(format!(
                "breakpoints must be strictly increasing ({} is followed by {})",
                w[0], w[1]
            )));
        }
        Ok(Self { breakpoints, n })
    }

    /// `k` equal-width intervals per axis.
    pub fn equispaced(k: usize, n: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidGrid("k must be at least 1".into()));
        }
        let mut breakpoints: Vec<f64> = (0..=k).map(|j| j as f64 / k as f64).collect();
        breakpoints[k] = 1.0;
        Self::new(breakpoints, n)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Number of intervals per coordinate.
    pub fn k(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Number of coordinates (bidders).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of cells, `k^N`.
    pub fn num_cells(&self) -> usize {
        self.k().pow(self.n as u32)
    }

    pub fn is_equispaced(&self) -> bool {
        let k = self.k() as f64;
        self.breakpoints.iter().enumerate().all(|(j, &r)| (r - j as f64 / k).abs() <= 1e-15)
    }

    /// Width of interval `j` (1-based).
    pub fn width(&self, j: usize) -> f64 {
        self.breakpoints[j] - self.breakpoints[j - 1]
    }

    /// Interval containing `u`: the `j` with `u` in `(r_{j-1}, r_j]`, and 1 for `u = 0`.
    pub fn bin(&self, u: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::OutOfRange { value: u });
        }
        Ok(self.breakpoints[1..].partition_point(|&r| r < u) + 1)
    }

    /// Product of interval widths along the coordinates of `index`.
    pub fn cell_volume(&self, index: &CellIndex) -> f64 {
        index.coords().iter().map(|&j| self.width(j)).product()
    }

    /// Row-major position of `index`.
    pub fn flat(&self, index: &CellIndex) -> usize {
        self.flat_coords(index.coords())
    }

    pub(crate) fn flat_coords(&self, coords: &[usize]) -> usize {
        let k = self.k();
        coords.iter().fold(0, |acc, &c| acc * k + (c - 1))
    }

    /// Inverse of [`GridSpec::flat`].
    pub fn cell(&self, mut flat: usize) -> CellIndex {
        let k = self.k();
        let mut coords = vec![0; self.n];
        for c in coords.iter_mut().rev() {
            *c = flat % k + 1;
            flat /= k;
        }
        CellIndex(coords)
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (0..self.num_cells()).map(move |f| self.cell(f))
    }

    /// Checks that `index` has `N` coordinates, each in `1..=k`.
    pub fn validate(&self, index: &CellIndex) -> Result<()> {
        if index.0.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: index.0.len() });
        }
        if let Some(&c) = index.0.iter().find(|&&c| c == 0 || c > self.k()) {
            return Err(Error::InvalidArgument(format!("cell coordinate {c} outside 1..={}", self.k())));
        }
        Ok(())
    }
}

/// A cell of the grid, one 1-based interval index per coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellIndex(pub Vec<usize>);

impl CellIndex {
    pub fn new(coords: Vec<usize>) -> Self {
        Self(coords)
    }

    pub fn coords(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for CellIndex {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl std::fmt::Display for CellIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// What the values of a [`CellArray`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    /// Number of observed tuples per cell.
    Counts,
    /// Probability mass per cell; sums to one.
    Mass,
    /// Density height per cell; `sum(height * volume)` is one.
    Height,
}

/// Dense array over the `k^N` cells of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellArray {
    kind: CellKind,
    grid: GridSpec,
    values: Vec<f64>,
}

impl CellArray {
    /// Validates shape, sign and the adding-up identity of `kind`.
    pub fn new(kind: CellKind, grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::DimensionMismatch { expected: grid.num_cells(), got: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidArgument(format!("cell value {v} is not a nonnegative number")));
        }
        let out = Self { kind, grid, values };
        match kind {
            CellKind::Counts => {
                if out.values.iter().any(|v| v.fract() != 0.0) {
                    return Err(Error::InvalidArgument("counts must be integers".into()));
                }
            }
            CellKind::Mass | CellKind::Height => {
                let total = out.probability_total();
                if (total - 1.0).abs() > ADDING_UP_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "{kind:?} array does not add up to one (total {total})"
                    )));
                }
            }
        }
        Ok(out)
    }

    /// Count array from integer counts in row-major order.
    pub fn from_counts(grid: GridSpec, counts: &[u64]) -> Result<Self> {
        Self::new(CellKind::Counts, grid, counts.iter().map(|&c| c as f64).collect())
    }

    /// Normalizes arbitrary nonnegative weights into a mass array.
    pub fn mass_from_weights(grid: GridSpec, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("weights must have positive total".into()));
        }
        Self::new(CellKind::Mass, grid, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn kind(&self) -> CellKind {
        self.kind
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, index: &CellIndex) -> f64 {
        self.values[self.grid.flat(index)]
    }

    /// Plain sum of the values (the sample size `T` for counts).
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    fn probability_total(&self) -> f64 {
        match self.kind {
            CellKind::Height => self.grid.cells().zip(&self.values).map(|(c, h)| h * self.grid.cell_volume(&c)).sum(),
            _ => self.total(),
        }
    }

    /// `mass(i) = height(i) * volume(i)`.
    pub fn mass_from_height(&self) -> Result<CellArray> {
        if self.kind != CellKind::Height {
            return Err(Error::InvalidArgument(format!("expected a height array, got {:?}", self.kind)));
        }
        let values = self.grid.cells().zip(&self.values).map(|(c, h)| h * self.grid.cell_volume(&c)).collect();
        Ok(CellArray { kind: CellKind::Mass, grid: self.grid.clone(), values })
    }

    /// `height(i) = mass(i) / volume(i)`.
    pub fn height_from_mass(&self) -> Result<CellArray> {
        if self.kind != CellKind::Mass {
            return Err(Error::InvalidArgument(format!("expected a mass array, got {:?}", self.kind)));
        }
        let values = self.grid.cells().zip(&self.values).map(|(c, m)| m / self.grid.cell_volume(&c)).collect();
        Ok(CellArray { kind: CellKind::Height, grid: self.grid.clone(), values })
    }
}

/// Min-max normalization onto `[0, 1]`.
pub fn normalize(values: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if values.is_empty() || !(hi > lo) {
        return Err(Error::DegenerateSample(format!(
            "need at least two distinct values to normalize ({} values)",
            values.len()
        )));
    }
    let range = hi - lo;
    Ok(values.iter().map(|&v| (v - lo) / range).collect())
}

/// Counts how many tuples fall in each cell.
pub fn count_cells(tuples: &[Vec<f64>], grid: &GridSpec) -> Result<CellArray> {
    if tuples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut counts = vec![0.0; grid.num_cells()];
    let mut coords = vec![0; grid.n()];
    for t in tuples {
        if t.len() != grid.n() {
            return Err(Error::DimensionMismatch { expected: grid.n(), got: t.len() });
        }
        for (c, &u) in coords.iter_mut().zip(t) {
            *c = grid.bin(u)?;
        }
        counts[grid.flat_coords(&coords)] += 1.0;
    }
    CellArray::new(CellKind::Counts, grid.clone(), counts)
}

/// Replaces a density by its cell averages (a grid distribution).
///
/// Each cell average is computed with a midpoint rule on a
/// `subgrid^N` lattice inside the cell. The result is rescaled so that the
/// weighted adding-up identity holds exactly; the raw quadrature total must
/// be within `1e-3` of one.
pub fn discretize_density<F>(f: F, grid: &GridSpec, subgrid: usize) -> Result<CellArray>
where
    F: Fn(&[f64]) -> f64,
{
    if subgrid == 0 {
        return Err(Error::InvalidArgument("subgrid resolution must be positive".into()));
    }
    let n = grid.n();
    let k = grid.k();

    // Quadrature nodes along one axis: (point, weight, interval).
    let mut nodes = Vec::with_capacity(k * subgrid);
    for j in 1..=k {
        let lo = grid.breakpoints()[j - 1];
        let h = grid.width(j) / subgrid as f64;
        for m in 0..subgrid {
            nodes.push((lo + (m as f64 + 0.5) * h, h, j));
        }
    }

    let mut mass = vec![0.0; grid.num_cells()];
    let mut odometer = vec![0usize; n];
    let mut point = vec![0.0; n];
    let mut coords = vec![0usize; n];
    loop {
        let mut weight = 1.0;
        for d in 0..n {
            let (x, w, j) = nodes[odometer[d]];
            point[d] = x;
            coords[d] = j;
            weight *= w;
        }
        let value = f(&point);
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidDensity(format!("density value {value} at {point:?}")));
        }
        mass[grid.flat_coords(&coords)] += value * weight;

        // advance odometer
        let mut d = n;
        loop {
            if d == 0 {
                return finish_discretization(grid, mass);
            }
            d -= 1;
            odometer[d] += 1;
            if odometer[d] < nodes.len() {
                break;
            }
            odometer[d] = 0;
        }
    }
}

fn finish_discretization(grid: &GridSpec, mass: Vec<f64>) -> Result<CellArray> {
    let total: f64 = mass.iter().sum();
    if (total - 1.0).abs() > 1e-3 {
        return Err(Error::InvalidDensity(format!("density integrates to {total}, not 1")));
    }
    let mass = CellArray::mass_from_weights(grid.clone(), mass)?;
    mass.height_from_mass()
}
