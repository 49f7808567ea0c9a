//! Likelihood-ratio test of symmetric affiliation.
//!
//! Under the null the LR statistic is asymptotically a chi-bar-squared
//! mixture whose weights depend on the covariance `Pi0` of the evaluated
//! constraint functions. Weights are simulated by projecting Gaussian draws
//! onto the nonnegative orthant; the Kodde-Palm bounds give critical values
//! that need no weights at all.

mod special;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affiliation::{self, ConstraintMode, ConstraintSet};
use crate::error::{Error, Result};
use crate::estimate::{self, SolverOptions};
use crate::grid::{CellArray, CellKind};
use crate::nnls::nnls;
use crate::seed;
use crate::symmetry::enumerate_orbits;

pub use special::{chi2_sf, gamma_q, ln_gamma};

/// Slack allowed when the constrained maximum exceeds the unconstrained one.
pub const LR_TOL: f64 = 1e-8;
pub const DEFAULT_WEIGHT_DRAWS: usize = 100_000;
pub const DEFAULT_SIZES: [f64; 3] = [0.10, 0.05, 0.01];
const BISECTION_HI: f64 = 1e3;
const BISECTION_TOL: f64 = 1e-8;

/// `2 (l_hat - l_tilde)`, clamped at zero.
pub fn lr_statistic(l_hat: f64, l_tilde: f64) -> Result<f64> {
    if l_hat < l_tilde - LR_TOL {
        return Err(Error::SolverInconsistency(format!(
            "unconstrained maximum {l_hat} is below constrained maximum {l_tilde}"
        )));
    }
    Ok((2.0 * (l_hat - l_tilde)).max(0.0))
}

/// Asymptotic covariance of the log-form TP2 constraint functions.
#[derive(Debug, Clone)]
pub struct ConstraintCovariance {
    /// `J x M` gradients in orbit-mass coordinates.
    pub h: DMatrix<f64>,
    /// `M x M` covariance of the orbit-mass estimator.
    pub sigma: DMatrix<f64>,
    /// `J x J`, `H Sigma H^T`.
    pub pi0: DMatrix<f64>,
}

/// Builds `H`, `Sigma` and `Pi0` at a symmetric mass array for sample size `t`.
pub fn constraint_covariance(masses: &CellArray, cs: &ConstraintSet, t: f64) -> Result<ConstraintCovariance> {
    if masses.kind() != CellKind::Mass {
        return Err(Error::InvalidArgument(format!("expected masses, got {:?}", masses.kind())));
    }
    if !cs.symmetric || cs.k() != masses.grid().k() || cs.n() != masses.grid().n() {
        return Err(Error::InvalidArgument("constraint set must be symmetric and match the grid".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("sample size must be positive, got {t}")));
    }
    let grid = masses.grid();
    let model = enumerate_orbits(grid.k(), grid.n())?;
    let m = model.len();
    let sizes = model.weights();
    let p: Vec<f64> = model.representatives().iter().map(|r| masses.values()[grid.flat(&r.as_cell())]).collect();

    let mut h = DMatrix::zeros(cs.len(), m);
    for (j, c) in cs.constraints.iter().enumerate() {
        for &(o, v) in &c.orbit_row {
            if p[o] <= 0.0 {
                return Err(Error::DegenerateCovariance { cell: model.representatives()[o].coords().to_vec() });
            }
            h[(j, o)] = v / p[o];
        }
    }

    // Orbit totals are multinomial with probabilities q = s p; p = q / s.
    let q: Vec<f64> = p.iter().zip(&sizes).map(|(p, s)| p * s).collect();
    let sigma = DMatrix::from_fn(m, m, |a, b| {
        let cov = if a == b { q[a] - q[a] * q[b] } else { -q[a] * q[b] };
        cov / (sizes[a] * sizes[b]) / t
    });
    let pi0 = &h * &sigma * h.transpose();
    let pi0 = (&pi0 + pi0.transpose()) * 0.5;
    Ok(ConstraintCovariance { h, sigma, pi0 })
}

/// Simulated chi-bar-squared weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChibarWeights {
    /// `omega_0 .. omega_J`.
    pub weights: Vec<f64>,
    /// Number of draws with exactly `j` binding components.
    pub counts: Vec<u64>,
    /// Whether a ridge was added to make `Pi0` positive definite.
    pub regularized: bool,
}

fn lower_cholesky(pi0: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let j = pi0.nrows();
    // Weights are invariant to positive rescaling of each constraint, so
    // work with the correlation matrix for conditioning.
    let scale: Vec<f64> = (0..j).map(|i| pi0[(i, i)]).collect();
    let mut corr = if scale.iter().all(|&d| d > 0.0) {
        DMatrix::from_fn(j, j, |a, b| pi0[(a, b)] / (scale[a] * scale[b]).sqrt())
    } else {
        pi0.clone()
    };
    if let Some(ch) = corr.clone().cholesky() {
        return Ok((ch.l(), false));
    }
    let ridge = 1e-10 * corr.trace() / j as f64;
    let ridge = if ridge > 0.0 { ridge } else { 1e-10 };
    for i in 0..j {
        corr[(i, i)] += ridge;
    }
    corr.cholesky()
        .map(|ch| (ch.l(), true))
        .ok_or_else(|| Error::InvalidArgument("Pi0 is not positive semidefinite".into()))
}

/// Monte Carlo chi-bar weights from `r` draws of `N(0, Pi0)`.
///
/// Each draw `z = L e` is projected onto the nonnegative orthant in the
/// `Pi0^{-1}` metric, i.e. `min_{b >= 0} |L^{-1} b - e|`. Draw `i` uses its
/// own generator derived from `(seed, i)`, so the result does not depend on
/// the thread count.
pub fn chibar_weights(pi0: &DMatrix<f64>, r: usize, seed: u64) -> Result<ChibarWeights> {
    let j = pi0.nrows();
    if pi0.ncols() != j {
        return Err(Error::DimensionMismatch { expected: j, got: pi0.ncols() });
    }
    if r == 0 {
        return Err(Error::InvalidArgument("at least one weight draw is needed".into()));
    }
    if j == 0 {
        return Ok(ChibarWeights { weights: vec![1.0], counts: vec![r as u64], regularized: false });
    }
    let (l, regularized) = lower_cholesky(pi0)?;
    let l_inv = l
        .solve_lower_triangular(&DMatrix::identity(j, j))
        .ok_or_else(|| Error::InvalidArgument("singular Cholesky factor".into()))?;

    let counts = (0..r)
        .into_par_iter()
        .fold(
            || vec![0u64; j + 1],
            |mut acc, i| {
                let mut rng = seed::rng_for(seed, i as u64);
                let e = DVector::from_fn(j, |_, _| StandardNormal.sample(&mut rng));
                let b = nnls(&l_inv, &e);
                acc[b.iter().filter(|&&v| v == 0.0).count()] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; j + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let weights = counts.iter().map(|&c| c as f64 / r as f64).collect();
    Ok(ChibarWeights { weights, counts, regularized })
}

/// `sum_j omega_j P(chi2_j >= stat)`.
pub fn chibar_pvalue(stat: f64, weights: &[f64]) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    weights.iter().enumerate().map(|(j, w)| w * chi2_sf(j, stat)).sum::<f64>().clamp(0.0, 1.0)
}

fn bisect(f: impl Fn(f64) -> f64, target: f64) -> f64 {
    // `f` is a decreasing tail probability.
    let (mut lo, mut hi) = (0.0, BISECTION_HI);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Kodde-Palm lower and upper critical values for `j` constraints at `size`.
pub fn kodde_palm_bounds(j: usize, size: f64) -> Result<(f64, f64)> {
    if j == 0 {
        return Err(Error::InvalidArgument("Kodde-Palm bounds need at least one constraint".into()));
    }
    if !(size > 0.0 && size < 1.0) {
        return Err(Error::InvalidArgument(format!("size {size} is not in (0, 1)")));
    }
    let lower = bisect(|c| 0.5 * chi2_sf(1, c), size);
    let upper = bisect(|c| 0.5 * (chi2_sf(j - 1, c) + chi2_sf(j, c)), size);
    Ok((lower, upper.max(lower)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    Inconclusive,
    FailToReject,
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Decision::Reject => "reject",
            Decision::Inconclusive => "inconclusive",
            Decision::FailToReject => "fail_to_reject",
        })
    }
}

/// Three-way decision from the Kodde-Palm bounds.
pub fn decide(stat: f64, lower: f64, upper: f64) -> Decision {
    if stat < lower {
        Decision::FailToReject
    } else if stat > upper {
        Decision::Reject
    } else {
        Decision::Inconclusive
    }
}

/// Settings of [`run_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TestOptions {
    pub constraint_mode: ConstraintMode,
    pub solver: SolverOptions,
    pub weight_draws: usize,
    pub seed: u64,
    pub sizes: Vec<f64>,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            constraint_mode: ConstraintMode::Adjacent,
            solver: SolverOptions::default(),
            weight_draws: DEFAULT_WEIGHT_DRAWS,
            seed: 0,
            sizes: DEFAULT_SIZES.to_vec(),
        }
    }
}

impl TestOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.sizes.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
            return Err(Error::Config(format!("size {s} is not in (0, 1)")));
        }
        if self.weight_draws == 0 {
            return Err(Error::Config("weight_draws must be positive".into()));
        }
        Ok(())
    }
}

/// Grid description carried by a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub k: usize,
    pub n: usize,
    pub breakpoints: Vec<f64>,
    pub equispaced: bool,
    /// Number of cells, `k^N`.
    #[serde(rename = "L")]
    pub l: usize,
    /// Number of orbits.
    #[serde(rename = "M")]
    pub m: usize,
}

/// Diagnostics that qualify how a report was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFlags {
    /// `Pi0` is evaluated at the affiliation-constrained estimate.
    pub covariance_at_constrained_estimate: bool,
    /// Empty cells were floored before building `Pi0`.
    pub covariance_floored: bool,
    /// A ridge was added to `Pi0`.
    pub pi0_regularized: bool,
    /// The symmetric estimate already satisfied every inequality.
    pub symmetric_estimate_affiliated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub sample_size: u64,
    pub grid: GridInfo,
    pub loglik_unconstrained: f64,
    pub loglik_symmetric: f64,
    pub loglik_affiliated: f64,
    pub loglik_independent: f64,
    pub loglik_center: f64,
    /// Symmetric versus symmetric-affiliated.
    pub lr_stat: f64,
    /// Unconstrained versus symmetric-affiliated.
    pub lr_stat_unconstrained: f64,
    pub j: usize,
    pub weights: Vec<f64>,
    pub pvalue: f64,
    pub sizes: Vec<f64>,
    pub kp_lower: Vec<f64>,
    pub kp_upper: Vec<f64>,
    pub decision: Vec<Decision>,
    pub active_constraints: Vec<usize>,
    pub kkt_residual: f64,
    pub solver_iterations: usize,
    pub flags: ReportFlags,
    pub seed: u64,
    pub options: TestOptions,
}

impl TestReport {
    /// Decision at `size`, if that size was requested.
    pub fn decision_at(&self, size: f64) -> Option<Decision> {
        self.sizes.iter().position(|s| (s - size).abs() < 1e-12).map(|i| self.decision[i])
    }

    /// Plain-text account of the test.
    pub fn summary(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        let g = &self.grid;
        let _ = writeln!(s, "Test of symmetric affiliation");
        let _ = writeln!(s, "sample size T = {}, bidders N = {}, intervals k = {}", self.sample_size, g.n, g.k);
        let _ = writeln!(
            s,
            "breakpoints {:?} ({}), L = {} cells, M = {} orbits",
            g.breakpoints,
            if g.equispaced { "equispaced" } else { "non-equispaced, adding-up weighted by cell volume" },
            g.l,
            g.m
        );
        let _ = writeln!(s, "log-likelihoods:");
        let _ = writeln!(s, "  unconstrained         {:.2}", self.loglik_unconstrained);
        let _ = writeln!(s, "  symmetric             {:.2}", self.loglik_symmetric);
        let _ = writeln!(s, "  symmetric affiliated  {:.2}", self.loglik_affiliated);
        let _ = writeln!(s, "  independent           {:.2}", self.loglik_independent);
        let _ = writeln!(s, "  center of simplex     {:.2}", self.loglik_center);
        let _ = writeln!(
            s,
            "LR statistic {:.4} (against unconstrained: {:.4}), J = {} constraints, {} binding",
            self.lr_stat,
            self.lr_stat_unconstrained,
            self.j,
            self.active_constraints.len()
        );
        let w: Vec<String> = self.weights.iter().map(|w| format!("{w:.4}")).collect();
        let _ = writeln!(s, "chi-bar weights [{}], p-value {:.4}", w.join(", "), self.pvalue);
        for (i, size) in self.sizes.iter().enumerate() {
            let _ = writeln!(
                s,
                "size {:.2}: Kodde-Palm bounds [{:.4}, {:.4}] -> {}",
                size, self.kp_lower[i], self.kp_upper[i], self.decision[i]
            );
        }
        if self.flags.covariance_floored {
            let _ = writeln!(s, "note: empty cells floored when evaluating Pi0");
        }
        if self.flags.pi0_regularized {
            let _ = writeln!(s, "note: Pi0 was singular and regularized");
        }
        s
    }
}

/// Mass array with every cell at least `eps`, renormalized.
fn floor_masses(masses: &CellArray, eps: f64) -> Result<(CellArray, bool)> {
    if masses.values().iter().all(|&p| p >= eps) {
        return Ok((masses.clone(), false));
    }
    let values = masses.values().iter().map(|&p| p.max(eps)).collect();
    Ok((CellArray::mass_from_weights(masses.grid().clone(), values)?, true))
}

/// Fits every model on `counts` and tests symmetric affiliation.
pub fn run_test(counts: &CellArray, opts: &TestOptions) -> Result<TestReport> {
    opts.validate()?;
    let grid = counts.grid();
    let cs = affiliation::generate(grid.k(), grid.n(), opts.constraint_mode, true)?;
    let model = enumerate_orbits(grid.k(), grid.n())?;
    let t = counts.total();

    let unconstrained = estimate::mle_unconstrained(counts)?;
    let symmetric = estimate::mle_symmetric(counts)?;
    let independent = estimate::mle_independent_symmetric(counts)?;
    let affiliated = estimate::mle_affiliated(counts, &cs, &opts.solver)?;
    let center = estimate::loglik_center(counts)?;

    let lr_stat = lr_statistic(symmetric.loglik, affiliated.loglik)?;
    let lr_stat_unconstrained = lr_statistic(unconstrained.loglik, affiliated.loglik)?;
    let symmetric_estimate_affiliated = affiliated.iterations == 0;

    let j = cs.len();
    let (weights, pvalue, covariance_floored, pi0_regularized) = if j == 0 {
        (vec![1.0], if lr_stat > 0.0 { 0.0 } else { 1.0 }, false, false)
    } else {
        let (at, floored) = floor_masses(&affiliated.masses, opts.solver.epsilon_floor)?;
        let cov = constraint_covariance(&at, &cs, t)?;
        let w = chibar_weights(&cov.pi0, opts.weight_draws, opts.seed)?;
        let p = chibar_pvalue(lr_stat, &w.weights);
        (w.weights, p, floored, w.regularized)
    };

    let mut kp_lower = Vec::new();
    let mut kp_upper = Vec::new();
    let mut decision = Vec::new();
    for &size in &opts.sizes {
        let (lo, hi) = kodde_palm_bounds(j.max(1), size)?;
        kp_lower.push(lo);
        kp_upper.push(hi);
        decision.push(decide(lr_stat, lo, hi));
    }

    Ok(TestReport {
        sample_size: t as u64,
        grid: GridInfo {
            k: grid.k(),
            n: grid.n(),
            breakpoints: grid.breakpoints().to_vec(),
            equispaced: grid.is_equispaced(),
            l: grid.num_cells(),
            m: model.len(),
        },
        loglik_unconstrained: unconstrained.loglik,
        loglik_symmetric: symmetric.loglik,
        loglik_affiliated: affiliated.loglik,
        loglik_independent: independent.loglik,
        loglik_center: center,
        lr_stat,
        lr_stat_unconstrained,
        j,
        weights,
        pvalue,
        sizes: opts.sizes.clone(),
        kp_lower,
        kp_upper,
        decision,
        active_constraints: affiliated.active_constraints,
        kkt_residual: affiliated.kkt_residual,
        solver_iterations: affiliated.iterations,
        flags: ReportFlags {
            covariance_at_constrained_estimate: true,
            covariance_floored,
            pi0_regularized,
            symmetric_estimate_affiliated,
        },
        seed: opts.seed,
        options: opts.clone(),
    })
}
