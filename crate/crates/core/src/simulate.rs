//! Synthetic grid DGPs and seeded Monte Carlo studies of the test.

use std::io::Write;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::affiliation::ConstraintMode;
use crate::error::{Error, Result};
use crate::estimate::SolverOptions;
use crate::grid::{count_cells, discretize_density, CellArray, CellKind, GridSpec, DEFAULT_SUBGRID};
use crate::hetero::AuctionRecord;
use crate::inference::{self, Decision, TestOptions};
use crate::seed;

/// A grid distribution to sample from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dgp {
    pub label: String,
    pub masses: CellArray,
}

impl Dgp {
    pub fn new(label: impl Into<String>, masses: CellArray) -> Result<Self> {
        if masses.kind() != CellKind::Mass {
            return Err(Error::InvalidArgument(format!("expected masses, got {:?}", masses.kind())));
        }
        Ok(Self { label: label.into(), masses })
    }

    pub fn grid(&self) -> &GridSpec {
        self.masses.grid()
    }

    /// Catalog entry by name; `param` is the dependence parameter where one applies.
    pub fn from_name(name: &str, k: usize, n: usize, param: Option<f64>) -> Result<Self> {
        match name {
            "uniform" => uniform(k, n),
            "independent-skewed" => independent_skewed(k, n),
            "affiliated-2x2" => affiliated_2x2(param.unwrap_or(0.2)),
            "violating-2x2" => violating_2x2(param.unwrap_or(0.1)),
            "affiliated-gaussian" | "affiliated-3x3" => {
                let (k, n) = if name == "affiliated-3x3" { (3, 2) } else { (k, n) };
                affiliated_gaussian(k, n, param.unwrap_or(0.5))
            }
            other => Err(Error::Config(format!("unknown dgp {other:?}"))),
        }
    }
}

/// Names accepted by [`Dgp::from_name`].
pub const DGP_NAMES: [&str; 6] =
    ["uniform", "independent-skewed", "affiliated-2x2", "violating-2x2", "affiliated-3x3", "affiliated-gaussian"];

pub fn uniform(k: usize, n: usize) -> Result<Dgp> {
    let grid = GridSpec::equispaced(k, n)?;
    let l = grid.num_cells();
    Dgp::new("uniform", CellArray::mass_from_weights(grid, vec![1.0; l])?)
}

/// Independent slots sharing the marginal `q_j` proportional to `2^{-j}`.
pub fn independent_skewed(k: usize, n: usize) -> Result<Dgp> {
    let grid = GridSpec::equispaced(k, n)?;
    let weights = grid.cells().map(|c| c.coords().iter().map(|&j| 0.5f64.powi(j as i32)).product()).collect();
    Dgp::new("independent-skewed", CellArray::mass_from_weights(grid, weights)?)
}

fn symmetric_2x2(label: String, diagonal: f64, off: f64) -> Result<Dgp> {
    let grid = GridSpec::equispaced(2, 2)?;
    Dgp::new(label, CellArray::new(CellKind::Mass, grid, vec![diagonal, off, off, diagonal])?)
}

/// Symmetric 2x2 with `a = b = 1/4 + rho`, `d = 1/4 - rho`, so `ab - d^2 = rho`.
pub fn affiliated_2x2(rho: f64) -> Result<Dgp> {
    if !(rho > 0.0 && rho < 0.25) {
        return Err(Error::InvalidArgument(format!("rho must lie in (0, 0.25), got {rho}")));
    }
    symmetric_2x2(format!("affiliated-2x2({rho})"), 0.25 + rho, 0.25 - rho)
}

/// Symmetric 2x2 with `a = b = 1/4 - m`, `d = 1/4 + m`, so `d^2 - ab = m`.
pub fn violating_2x2(margin: f64) -> Result<Dgp> {
    if !(margin > 0.0 && margin < 0.25) {
        return Err(Error::InvalidArgument(format!("margin must lie in (0, 0.25), got {margin}")));
    }
    symmetric_2x2(format!("violating-2x2({margin})"), 0.25 - margin, 0.25 + margin)
}

/// Exchangeable Gaussian with positive correlation, truncated to `[0,1]^N`.
///
/// The precision matrix has negative off-diagonal entries, so the density is
/// log-supermodular (affiliated).
#[derive(Debug, Clone)]
pub struct ExchangeableGaussian {
    n: usize,
    diag: f64,
    off: f64,
    log_norm: f64,
}

impl ExchangeableGaussian {
    pub const MEAN: f64 = 0.5;
    pub const SD: f64 = 0.3;

    pub fn new(n: usize, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) || n < 2 {
            return Err(Error::InvalidArgument(format!("need N >= 2 and rho in (0, 1), got N={n}, rho={rho}")));
        }
        let nf = n as f64;
        let scale = 1.0 / (Self::SD * Self::SD * (1.0 - rho));
        let shrink = rho / (1.0 + (nf - 1.0) * rho);
        let mut g = Self { n, diag: scale * (1.0 - shrink), off: -scale * shrink, log_norm: 0.0 };

        // Normalizing constant by a fine midpoint rule.
        let m = ((2.0e6f64).powf(1.0 / nf).floor() as usize).clamp(8, 400);
        let h = 1.0 / m as f64;
        let mut total = 0.0;
        let mut idx = vec![0usize; n];
        let mut x = vec![0.0; n];
        'outer: loop {
            for d in 0..n {
                x[d] = (idx[d] as f64 + 0.5) * h;
            }
            total += g.log_kernel(&x).exp();
            let mut d = n;
            loop {
                if d == 0 {
                    break 'outer;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < m {
                    break;
                }
                idx[d] = 0;
            }
        }
        g.log_norm = (total * h.powi(n as i32)).ln();
        Ok(g)
    }

    fn log_kernel(&self, x: &[f64]) -> f64 {
        let z: Vec<f64> = x.iter().map(|v| v - Self::MEAN).collect();
        let sum: f64 = z.iter().sum();
        let sq: f64 = z.iter().map(|v| v * v).sum();
        // z' P z with P = (diag - off) I + off 11'.
        -0.5 * ((self.diag - self.off) * sq + self.off * sum * sum)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return 0.0;
        }
        (self.log_kernel(x) - self.log_norm).exp()
    }
}

/// Cell masses of [`ExchangeableGaussian`] on an equispaced `k^N` grid.
pub fn affiliated_gaussian(k: usize, n: usize, rho: f64) -> Result<Dgp> {
    let density = ExchangeableGaussian::new(n, rho)?;
    let grid = GridSpec::equispaced(k, n)?;
    let heights = discretize_density(|x| density.density(x), &grid, DEFAULT_SUBGRID)?;
    let label = if (k, n) == (3, 2) { format!("affiliated-3x3({rho})") } else { format!("affiliated-gaussian({rho})") };
    Dgp::new(label, heights.mass_from_height()?)
}

/// The default catalog.
pub fn builtin_dgps() -> Result<Vec<Dgp>> {
    Ok(vec![
        uniform(2, 2)?,
        independent_skewed(3, 2)?,
        affiliated_2x2(0.2)?,
        violating_2x2(0.1)?,
        affiliated_gaussian(3, 2, 0.5)?,
    ])
}

/// `t` tuples drawn from `dgp`: a cell by its mass, then a uniform point in the cell.
pub fn sample(dgp: &Dgp, t: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(dgp, t, &mut rng)
}

fn sample_with(dgp: &Dgp, t: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    let grid = dgp.grid();
    let pick =
        WeightedIndex::new(dgp.masses.values()).map_err(|e| Error::InvalidArgument(format!("dgp masses: {e}")))?;
    let bps = grid.breakpoints();
    Ok((0..t)
        .map(|_| {
            let cell = grid.cell(pick.sample(rng));
            cell.coords()
                .iter()
                .map(|&j| {
                    // (0, 1], matching the right-closed bins.
                    let u = 1.0 - rng.random::<f64>();
                    bps[j - 1] + u * (bps[j] - bps[j - 1])
                })
                .collect()
        })
        .collect())
}

/// Shape of a synthetic bid dataset built by [`synthetic_auctions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionDesign {
    pub auctions: usize,
    pub intercept: f64,
    pub slope: f64,
    /// Mean and standard deviation of the log engineer's estimate.
    pub log_estimate_mean: f64,
    pub log_estimate_sd: f64,
    /// Spread of log bids around the regression line.
    pub residual_scale: f64,
}

impl Default for AuctionDesign {
    fn default() -> Self {
        Self {
            auctions: 300,
            intercept: 0.05,
            slope: 1.0,
            log_estimate_mean: 13.0,
            log_estimate_sd: 1.0,
            residual_scale: 0.3,
        }
    }
}

/// Auctions whose log bids are `intercept + slope log p + scale (u - 1/2)`,
/// with `u` one tuple drawn from `dgp` per auction.
pub fn synthetic_auctions(dgp: &Dgp, design: &AuctionDesign, seed: u64) -> Result<Vec<AuctionRecord>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tuples = sample_with(dgp, design.auctions, &mut rng)?;
    Ok(tuples
        .into_iter()
        .enumerate()
        .map(|(i, u)| {
            let z: f64 = rng.sample(StandardNormal);
            let log_p = design.log_estimate_mean + design.log_estimate_sd * z;
            let bids = u
                .iter()
                .map(|v| (design.intercept + design.slope * log_p + design.residual_scale * (v - 0.5)).exp())
                .collect();
            AuctionRecord { auction_id: format!("A{:05}", i + 1), engineer_estimate: log_p.exp(), bids }
        })
        .collect())
}

/// Settings of [`mc_study`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McOptions {
    pub replications: usize,
    pub sample_size: usize,
    pub sizes: Vec<f64>,
    pub seed: u64,
    /// Chi-bar weight draws per replication.
    pub weight_draws: usize,
    pub constraint_mode: ConstraintMode,
    pub solver: SolverOptions,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            replications: 500,
            sample_size: 500,
            sizes: inference::DEFAULT_SIZES.to_vec(),
            seed: 0,
            weight_draws: 10_000,
            constraint_mode: ConstraintMode::Adjacent,
            solver: SolverOptions::default(),
        }
    }
}

/// One replication of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub replication: usize,
    pub seed: u64,
    pub lr_stat: f64,
    pub pvalue: f64,
    /// Kodde-Palm decision per size.
    pub decisions: Vec<Decision>,
}

/// Rejection rates at one nominal size under the three decision rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRates {
    pub size: f64,
    /// `pvalue < size`.
    pub pvalue: f64,
    /// Statistic above the Kodde-Palm lower bound.
    pub kp_lower: f64,
    /// Statistic above the Kodde-Palm upper bound.
    pub kp_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub dgp: String,
    pub replications: usize,
    pub sample_size: usize,
    pub seed: u64,
    pub j: usize,
    pub rejection: Vec<RejectionRates>,
    pub mean_lr_stat: f64,
    pub median_lr_stat: f64,
    pub rows: Vec<McRow>,
}

impl McResult {
    pub fn rates_at(&self, size: f64) -> Option<&RejectionRates> {
        self.rejection.iter().find(|r| (r.size - size).abs() < 1e-12)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// One row per replication: seed, statistic, p-value and decisions.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.to_csv(file).map_err(|e| Error::io(path, e))
    }

    fn to_csv(&self, out: impl Write) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["replication".to_string(), "seed".into(), "lr_stat".into(), "pvalue".into()];
        header.extend(self.rejection.iter().map(|r| format!("decision_{}", r.size)));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![
                row.replication.to_string(),
                row.seed.to_string(),
                row.lr_stat.to_string(),
                row.pvalue.to_string(),
            ];
            rec.extend(row.decisions.iter().map(|d| d.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

/// Row, constraint count and p-value rejections of one replication.
type Outcome = (McRow, usize, Vec<bool>);

/// Runs the test on `opts.replications` independent samples from `dgp`.
///
/// Replication `r` samples with the generator derived from `(seed, r)` and
/// simulates its weights under the seed derived from the same pair, so the
/// result is identical for any number of threads.
pub fn mc_study(dgp: &Dgp, opts: &McOptions) -> Result<McResult> {
    if opts.replications == 0 || opts.sample_size == 0 {
        return Err(Error::InvalidArgument("replications and sample size must be positive".into()));
    }
    let test_opts = |s: u64| TestOptions {
        constraint_mode: opts.constraint_mode,
        solver: opts.solver.clone(),
        weight_draws: opts.weight_draws,
        seed: s,
        sizes: opts.sizes.clone(),
    };
    test_opts(0).validate()?;

    let outcomes: Vec<Outcome> = (0..opts.replications)
        .into_par_iter()
        .map(|r| {
            let rep_seed = seed::derive(opts.seed, r as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(rep_seed);
            let tuples = sample_with(dgp, opts.sample_size, &mut rng)?;
            let counts = count_cells(&tuples, dgp.grid())?;
            let report = inference::run_test(&counts, &test_opts(rep_seed))?;
            let pvalue_rejects = opts.sizes.iter().map(|&s| report.pvalue < s).collect();
            let row = McRow {
                replication: r,
                seed: rep_seed,
                lr_stat: report.lr_stat,
                pvalue: report.pvalue,
                decisions: report.decision.clone(),
            };
            Ok((row, report.j, pvalue_rejects))
        })
        .collect::<Result<_>>()?;

    let reps = opts.replications as f64;
    let rejection = opts
        .sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| {
            let rate = |f: &dyn Fn(&Outcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / reps;
            RejectionRates {
                size,
                pvalue: rate(&|o| o.2[i]),
                kp_lower: rate(&|o| o.0.decisions[i] != Decision::FailToReject),
                kp_upper: rate(&|o| o.0.decisions[i] == Decision::Reject),
            }
        })
        .collect();

    let mut stats: Vec<f64> = outcomes.iter().map(|o| o.0.lr_stat).collect();
    let mean_lr_stat = stats.iter().sum::<f64>() / reps;
    stats.sort_by(f64::total_cmp);
    let mid = stats.len() / 2;
    let median_lr_stat = if stats.len() % 2 == 1 { stats[mid] } else { 0.5 * (stats[mid - 1] + stats[mid]) };

    Ok(McResult {
        dgp: dgp.label.clone(),
        replications: opts.replications,
        sample_size: opts.sample_size,
        seed: opts.seed,
        j: outcomes.first().map_or(0, |o| o.1),
        rejection,
        mean_lr_stat,
        median_lr_stat,
        rows: outcomes.into_iter().map(|o| o.0).collect(),
    })
}
