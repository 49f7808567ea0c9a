//! Log-barrier interior-point solver for the symmetric TP2-constrained
//! multinomial likelihood.
//!
//! Variables are orbit log-masses `theta`. With `w = y / T` the normalized
//! orbit counts, `s` the orbit sizes and `a_j` the orbit rows of the TP2
//! inequalities, the program is
//!
//! ```text
//! maximize   w . theta
//! subject to a_j . theta >= 0                 (TP2)
//!            sum_m s_m exp(theta_m) <= 1       (simplex; binds at the optimum)
//!            theta_m >= log(eps)               (floor)
//! ```
//!
//! Every constraint is convex, so each centering problem
//! `t * (-w . theta) - sum log(slacks)` is solved by damped Newton steps,
//! with `t = 1 / mu` growing by a fixed factor between centerings. The
//! final iterate is shifted by `-log(sum s exp(theta))`, which puts it on the
//! simplex exactly and leaves every TP2 row unchanged (rows sum to zero).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::nnls::nnls;

pub(crate) struct Problem<'a> {
    /// Normalized orbit counts.
    pub w: &'a [f64],
    /// Orbit sizes.
    pub s: &'a [f64],
    /// Sparse TP2 rows over orbits.
    pub rows: &'a [Vec<(usize, f64)>],
    /// `log(eps)`.
    pub floor: f64,
}

/// Newton steps per centering before moving on regardless of the decrement.
const CENTERING_CAP: usize = 50;

pub(crate) struct Settings {
    pub tol: f64,
    pub max_iter: usize,
    pub mu0: f64,
    pub mu_factor: f64,
}

pub(crate) struct Solution {
    pub theta: Vec<f64>,
    pub kkt_residual: f64,
    /// Certificate multiplier of each TP2 row; zero for rows left out.
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

struct Kkt {
    residual: f64,
    multipliers: Vec<f64>,
}

struct Slacks {
    rows: Vec<f64>,
    simplex: f64,
    floor: Vec<f64>,
}

impl Problem<'_> {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn row_value(row: &[(usize, f64)], theta: &[f64]) -> f64 {
        row.iter().map(|&(o, v)| v * theta[o]).sum()
    }

    fn mass_sum(&self, theta: &[f64]) -> f64 {
        self.s.iter().zip(theta).map(|(s, t)| s * t.exp()).sum()
    }

    fn slacks(&self, theta: &[f64]) -> Option<Slacks> {
        let rows: Vec<f64> = self.rows.iter().map(|r| Self::row_value(r, theta)).collect();
        let simplex = 1.0 - self.mass_sum(theta);
        let floor: Vec<f64> = theta.iter().map(|t| t - self.floor).collect();
        let ok = rows.iter().all(|&r| r > 0.0) && simplex > 0.0 && floor.iter().all(|&f| f > 0.0);
        ok.then_some(Slacks { rows, simplex, floor })
    }

    /// Centering objective at `t`, or `None` outside the strict interior.
    fn value(&self, theta: &[f64], t: f64) -> Option<f64> {
        let sl = self.slacks(theta)?;
        let linear: f64 = self.w.iter().zip(theta).map(|(w, th)| w * th).sum();
        let barrier = sl.rows.iter().map(|r| r.ln()).sum::<f64>()
            + sl.simplex.ln()
            + sl.floor.iter().map(|f| f.ln()).sum::<f64>();
        Some(-t * linear - barrier)
    }

    fn gradient_hessian(&self, theta: &[f64], t: f64, sl: &Slacks) -> (DVector<f64>, DMatrix<f64>) {
        let m = self.dim();
        let mut g = DVector::from_iterator(m, self.w.iter().map(|w| -t * w));
        let mut h = DMatrix::zeros(m, m);

        for (row, &r) in self.rows.iter().zip(&sl.rows) {
            for &(a, va) in row {
                g[a] -= va / r;
                for &(b, vb) in row {
                    h[(a, b)] += va * vb / (r * r);
                }
            }
        }

        let q: Vec<f64> = self.s.iter().zip(theta).map(|(s, th)| s * th.exp()).collect();
        let d = sl.simplex;
        for a in 0..m {
            g[a] += q[a] / d;
            h[(a, a)] += q[a] / d;
            for b in 0..m {
                h[(a, b)] += q[a] * q[b] / (d * d);
            }
        }

        for (a, &f) in sl.floor.iter().enumerate() {
            g[a] -= 1.0 / f;
            h[(a, a)] += 1.0 / (f * f);
        }
        (g, h)
    }

    /// KKT residual of the point obtained by shifting `theta`
    /// onto the simplex.
    ///
    /// Barrier duals `1 / (t r)` lose all precision once a slack nears the
    /// rounding level of `theta`, so multipliers of the near-active rows and
    /// floors are recovered by nonnegative least squares on the stationarity
    /// equations instead.
    fn kkt(&self, theta: &[f64], t: f64) -> Kkt {
        let m = self.dim();
        let shift = self.mass_sum(theta).ln();
        let shifted: Vec<f64> = theta.iter().map(|x| x - shift).collect();
        let rows: Vec<f64> = self.rows.iter().map(|r| Self::row_value(r, &shifted)).collect();
        let gaps: Vec<f64> = shifted.iter().map(|x| x - self.floor).collect();
        let cut = t.sqrt().recip();
        let active: Vec<usize> = (0..rows.len()).filter(|&j| rows[j] <= cut).collect();
        let floored: Vec<usize> = (0..m).filter(|&a| gaps[a] <= cut).collect();
        let q: Vec<f64> = self.s.iter().zip(&shifted).map(|(s, x)| s * x.exp()).collect();

        // Columns: active rows, +q, -q (free simplex multiplier), -e for floors.
        let cols = active.len() + 2 + floored.len();
        let mut a = DMatrix::zeros(m, cols);
        for (c, &j) in active.iter().enumerate() {
            for &(o, v) in &self.rows[j] {
                a[(o, c)] += v;
            }
        }
        for o in 0..m {
            a[(o, active.len())] = -q[o];
            a[(o, active.len() + 1)] = q[o];
        }
        for (c, &o) in floored.iter().enumerate() {
            a[(o, active.len() + 2 + c)] = 1.0;
        }
        let target = DVector::from_iterator(m, self.w.iter().map(|w| -w));
        let mult = nnls(&a, &target);
        let stationarity = (&a * &mult - &target).amax();

        let mut complementarity: f64 = 0.0;
        for (c, &j) in active.iter().enumerate() {
            complementarity = complementarity.max((mult[c] * rows[j]).abs());
        }
        for (c, &o) in floored.iter().enumerate() {
            complementarity = complementarity.max((mult[active.len() + 2 + c] * gaps[o]).abs());
        }
        let infeasibility =
            rows.iter().chain(&gaps).fold(0.0f64, |acc, &r| acc.max(-r)).max((q.iter().sum::<f64>() - 1.0).abs());
        let mut multipliers = vec![0.0; rows.len()];
        for (c, &j) in active.iter().enumerate() {
            multipliers[j] = mult[c];
        }
        Kkt { residual: stationarity.max(complementarity).max(infeasibility), multipliers }
    }
}

fn solve_newton(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let mut h = h.clone();
    let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut ridge = 0.0;
    for _ in 0..8 {
        if let Some(ch) = h.clone().cholesky() {
            return Some(-ch.solve(g));
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 100.0 };
        for i in 0..h.nrows() {
            h[(i, i)] += ridge;
        }
    }
    None
}

pub(crate) fn solve(problem: &Problem<'_>, start: Vec<f64>, settings: &Settings) -> Result<Solution> {
    let mut theta = start;
    if problem.slacks(&theta).is_none() {
        return Err(Error::SolverInconsistency("starting point is not strictly feasible".into()));
    }

    let mut t = 1.0 / settings.mu0;
    let mut iterations = 0;
    let mut last_kkt = f64::INFINITY;

    loop {
        // Centering by damped Newton.
        for _ in 0..CENTERING_CAP {
            if iterations >= settings.max_iter {
                return Err(Error::NonConvergence { iterations, kkt_residual: last_kkt, best: theta });
            }
            iterations += 1;
            let sl = problem.slacks(&theta).expect("iterate stays interior");
            let (g, h) = problem.gradient_hessian(&theta, t, &sl);
            let Some(step) = solve_newton(&h, &g) else {
                return Err(Error::NonConvergence { iterations, kkt_residual: last_kkt, best: theta });
            };
            let decrement = -g.dot(&step);
            if decrement / 2.0 <= 1e-12 {
                break;
            }

            let f0 = problem.value(&theta, t).expect("interior");
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..80 {
                let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, d)| a + alpha * d).collect();
                if let Some(f) = problem.value(&trial, t) {
                    // Inside the quadratic region the objective change drops
                    // below rounding of `f`, so only interiority is checked.
                    if decrement < 0.1 || f <= f0 - 0.25 * alpha * decrement {
                        accepted = Some(trial);
                        break;
                    }
                }
                alpha *= 0.5;
            }
            match accepted {
                Some(next) => theta = next,
                // No measurable decrease left at this precision.
                None => break,
            }
        }

        let kkt = problem.kkt(&theta, t);
        last_kkt = kkt.residual;
        if kkt.residual <= settings.tol {
            let shift = problem.mass_sum(&theta).ln();
            let theta = theta.iter().map(|x| x - shift).collect();
            return Ok(Solution { theta, kkt_residual: kkt.residual, multipliers: kkt.multipliers, iterations });
        }
        t *= settings.mu_factor;
    }
}
