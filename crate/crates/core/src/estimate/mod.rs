//! Maximum-likelihood estimates of grid distributions.
//!
//! All estimators take a count array and return an [`EstimateResult`] whose
//! log-likelihood omits the multinomial constant. The symmetric-affiliated
//! estimator works in orbit log-masses, where every TP2 inequality is linear.

mod barrier;

use serde::{Deserialize, Serialize};

use crate::affiliation::{self, ConstraintSet};
use crate::error::{Error, Result};
use crate::grid::{CellArray, CellKind};
use crate::symmetry::{enumerate_orbits, OrbitModel};

/// Tuning knobs of [`mle_affiliated`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Target KKT residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Lower bound on every cell mass.
    pub epsilon_floor: f64,
    /// Constraints with residual at most this, or certificate multiplier
    /// above it, are reported as binding.
    pub activity_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 500, epsilon_floor: 1e-10, activity_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub masses: CellArray,
    pub loglik: f64,
    /// Positions in the constraint set of the binding inequalities.
    pub active_constraints: Vec<usize>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

impl EstimateResult {
    fn closed_form(counts: &CellArray, masses: CellArray) -> Result<Self> {
        let loglik = loglik(counts, &masses)?;
        Ok(Self { masses, loglik, active_constraints: Vec::new(), kkt_residual: 0.0, iterations: 0 })
    }
}

fn require_counts(counts: &CellArray) -> Result<f64> {
    if counts.kind() != CellKind::Counts {
        return Err(Error::InvalidArgument(format!("expected counts, got {:?}", counts.kind())));
    }
    let t = counts.total();
    if t < 1.0 {
        return Err(Error::EmptySample);
    }
    Ok(t)
}

/// `sum y log(pi)` over cells, skipping empty cells.
///
/// Returns negative infinity when a cell with positive count has zero mass.
pub fn loglik(counts: &CellArray, masses: &CellArray) -> Result<f64> {
    if counts.grid().num_cells() != masses.grid().num_cells() {
        return Err(Error::DimensionMismatch { expected: counts.grid().num_cells(), got: masses.grid().num_cells() });
    }
    let mut total = 0.0;
    for (&y, &p) in counts.values().iter().zip(masses.values()) {
        if y > 0.0 {
            if p <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            total += y * p.ln();
        }
    }
    Ok(total)
}

/// Log-likelihood at the center of the simplex, `T log(1/L)`.
pub fn loglik_center(counts: &CellArray) -> Result<f64> {
    let t = require_counts(counts)?;
    Ok(-t * (counts.grid().num_cells() as f64).ln())
}

/// Cell frequencies `y / T`.
pub fn mle_unconstrained(counts: &CellArray) -> Result<EstimateResult> {
    let t = require_counts(counts)?;
    let values = counts.values().iter().map(|y| y / t).collect();
    let masses = CellArray::new(CellKind::Mass, counts.grid().clone(), values)?;
    EstimateResult::closed_form(counts, masses)
}

fn orbit_model(counts: &CellArray) -> Result<OrbitModel> {
    enumerate_orbits(counts.grid().k(), counts.grid().n())
}

/// Orbit averages: each cell gets its orbit's count total over `T` times the orbit size.
pub fn mle_symmetric(counts: &CellArray) -> Result<EstimateResult> {
    let t = require_counts(counts)?;
    let model = orbit_model(counts)?;
    let per_orbit: Vec<f64> =
        model.orbit_totals(counts.values()).iter().zip(model.weights()).map(|(y, s)| y / (t * s)).collect();
    let masses = CellArray::new(CellKind::Mass, counts.grid().clone(), model.expand(&per_orbit))?;
    EstimateResult::closed_form(counts, masses)
}

/// One-dimensional marginal pooled over all slots.
pub fn pooled_marginal(counts: &CellArray) -> Result<Vec<f64>> {
    let t = require_counts(counts)?;
    let grid = counts.grid();
    let mut q = vec![0.0; grid.k()];
    for (cell, &y) in grid.cells().zip(counts.values()) {
        for &c in cell.coords() {
            q[c - 1] += y;
        }
    }
    let denom = t * grid.n() as f64;
    Ok(q.into_iter().map(|v| v / denom).collect())
}

/// Product of the pooled marginal over slots.
pub fn mle_independent_symmetric(counts: &CellArray) -> Result<EstimateResult> {
    let q = pooled_marginal(counts)?;
    let grid = counts.grid();
    let values: Vec<f64> = grid.cells().map(|c| c.coords().iter().map(|&j| q[j - 1]).product()).collect();
    let masses = CellArray::mass_from_weights(grid.clone(), values)?;
    EstimateResult::closed_form(counts, masses)
}

fn orbit_rows(cs: &ConstraintSet) -> Vec<Vec<(usize, f64)>> {
    cs.constraints.iter().map(|c| c.orbit_row.clone()).collect()
}

fn row_value(row: &[(usize, f64)], theta: &[f64]) -> f64 {
    row.iter().map(|&(o, v)| v * theta[o]).sum()
}

/// Strictly feasible starting point: the smoothed symmetric estimate, pulled
/// toward a strictly supermodular profile until every TP2 row is positive.
fn interior_start(model: &OrbitModel, pi_sym: &[f64], rows: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let cells: f64 = model.weights().iter().sum();
    let data: Vec<f64> = pi_sym.iter().map(|p| (0.9 * p + 0.1 / cells).ln()).collect();

    let raw: Vec<f64> = model
        .representatives()
        .iter()
        .map(|r| {
            let c = r.coords();
            let mut acc = 0.0;
            for a in 0..c.len() {
                for b in a + 1..c.len() {
                    acc += (c[a] * c[b]) as f64;
                }
            }
            acc
        })
        .collect();
    let lo = raw.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let profile: Vec<f64> = raw.iter().map(|v| (v - lo) / span).collect();

    let mut beta_min: f64 = 0.0;
    for row in rows {
        let d = row_value(row, &data);
        let c = row_value(row, &profile);
        if d <= 0.0 {
            beta_min = beta_min.max(-d / (c - d));
        }
    }
    let beta = beta_min + 0.5 * (1.0 - beta_min);
    let mut theta: Vec<f64> = data.iter().zip(&profile).map(|(d, c)| (1.0 - beta) * d + beta * c).collect();

    let weights = model.weights();
    let s: f64 = weights.iter().zip(&theta).map(|(w, t)| w * t.exp()).sum();
    let shift = (0.9 / s).ln();
    theta.iter_mut().for_each(|t| *t += shift);
    theta
}

/// Symmetric maximum-likelihood estimate subject to the TP2 inequalities of `cs`.
///
/// If the symmetric estimate already satisfies every inequality it is
/// returned unchanged. Otherwise the problem is solved by a log-barrier
/// method over orbit log-masses, each mass floored at `opts.epsilon_floor`.
pub fn mle_affiliated(counts: &CellArray, cs: &ConstraintSet, opts: &SolverOptions) -> Result<EstimateResult> {
    let t = require_counts(counts)?;
    if !cs.symmetric {
        return Err(Error::InvalidArgument("affiliated estimation needs a symmetric constraint set".into()));
    }
    let grid = counts.grid();
    if cs.k() != grid.k() || cs.n() != grid.n() {
        return Err(Error::InvalidArgument(format!(
            "constraint set is for k={}, N={} but counts are on k={}, N={}",
            cs.k(),
            cs.n(),
            grid.k(),
            grid.n()
        )));
    }
    if !(opts.epsilon_floor > 0.0 && opts.epsilon_floor < 1.0) || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("epsilon floor must lie in (0, 1) and tol must be positive".into()));
    }

    let sym = mle_symmetric(counts)?;
    let active = |values: &[f64]| -> Vec<usize> {
        cs.constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| affiliation::residual(values, c).abs() <= opts.activity_tol)
            .map(|(j, _)| j)
            .collect()
    };
    if affiliation::check(&sym.masses, cs, affiliation::DEFAULT_CHECK_TOL)?.is_empty() {
        let active_constraints = active(sym.masses.values());
        return Ok(EstimateResult { active_constraints, ..sym });
    }

    let model = orbit_model(counts)?;
    let sizes = model.weights();
    let y = model.orbit_totals(counts.values());
    let w: Vec<f64> = y.iter().map(|v| v / t).collect();
    let pi_sym: Vec<f64> = y.iter().zip(&sizes).map(|(v, s)| v / (t * s)).collect();
    let rows = orbit_rows(cs);

    let problem = barrier::Problem { w: &w, s: &sizes, rows: &rows, floor: opts.epsilon_floor.ln() };
    let settings = barrier::Settings { tol: opts.tol, max_iter: opts.max_iter, mu0: 1.0, mu_factor: 10.0 };
    let start = interior_start(&model, &pi_sym, &rows);
    let solution = barrier::solve(&problem, start, &settings)?;

    let per_orbit: Vec<f64> = solution.theta.iter().map(|th| th.exp()).collect();
    let masses = CellArray::new(CellKind::Mass, grid.clone(), model.expand(&per_orbit))?;
    let loglik = loglik(counts, &masses)?;
    if loglik > sym.loglik + 1e-8 * t.max(1.0) {
        return Err(Error::SolverInconsistency(format!(
            "constrained loglik {loglik} exceeds symmetric loglik {}",
            sym.loglik
        )));
    }
    // A row binds if it is tight or carries a positive multiplier; the
    // barrier leaves binding rows with residual of order tol / multiplier.
    let mut active_constraints = active(masses.values());
    active_constraints
        .extend(solution.multipliers.iter().enumerate().filter(|(_, &l)| l > opts.activity_tol).map(|(j, _)| j));
    active_constraints.sort_unstable();
    active_constraints.dedup();
    Ok(EstimateResult {
        masses,
        loglik,
        active_constraints,
        kkt_residual: solution.kkt_residual,
        iterations: solution.iterations,
    })
}
