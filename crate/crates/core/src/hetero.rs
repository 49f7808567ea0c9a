//! Removing observed auction heterogeneity.
//!
//! Log bids are regressed on the log engineer's estimate; the residuals,
//! min-max normalized over the whole sample, are the signals that get binned.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::normalize;

/// One auction: the agency's estimate and every submitted bid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionRecord {
    pub auction_id: String,
    pub engineer_estimate: f64,
    pub bids: Vec<f64>,
}

impl AuctionRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.engineer_estimate > 0.0 && self.engineer_estimate.is_finite()) {
            return Err(Error::Validation(format!(
                "auction {}: engineer's estimate {} is not positive",
                self.auction_id, self.engineer_estimate
            )));
        }
        if let Some(b) = self.bids.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
            return Err(Error::Validation(format!("auction {}: bid {b} is not positive", self.auction_id)));
        }
        Ok(())
    }

    /// Lowest bid (procurement auctions award to the low bidder).
    pub fn winning_bid(&self) -> Option<f64> {
        self.bids.iter().cloned().reduce(f64::min)
    }
}

/// `(log estimate, log bid)` for every bid, in record order.
pub fn log_design(records: &[AuctionRecord]) -> (Vec<f64>, Vec<f64>) {
    records.iter().flat_map(|r| r.bids.iter().map(move |b| (r.engineer_estimate.ln(), b.ln()))).unzip()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Ls,
    Lad,
    Kernel,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls" => Ok(Method::Ls),
            "lad" => Ok(Method::Lad),
            "kernel" => Ok(Method::Kernel),
            other => Err(Error::Config(format!("unknown regression method {other:?}"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ls => "ls",
            Method::Lad => "lad",
            Method::Kernel => "kernel",
        })
    }
}

/// A fitted regression of log bids on the log estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub method: Method,
    /// Parametric fits only.
    pub intercept: Option<f64>,
    pub slope: Option<f64>,
    /// Least squares only.
    pub r_squared: Option<f64>,
    /// Kernel fits only.
    pub bandwidth: Option<f64>,
    /// Observed covariate range.
    pub domain: (f64, f64),
    #[serde(skip)]
    sample: Vec<(f64, f64)>,
}

impl RegressionFit {
    fn parametric(method: Method, intercept: f64, slope: f64, r_squared: Option<f64>, x: &[f64]) -> Self {
        Self {
            method,
            intercept: Some(intercept),
            slope: Some(slope),
            r_squared,
            bandwidth: None,
            domain: range(x),
            sample: Vec::new(),
        }
    }

    /// Fitted value at `x`.
    pub fn predict(&self, x: f64) -> f64 {
        match (self.intercept, self.slope, self.bandwidth) {
            (Some(a), Some(b), _) => a + b * x,
            (_, _, Some(h)) => nadaraya_watson(&self.sample, h, x),
            _ => f64::NAN,
        }
    }
}

fn range(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn check_inputs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("regression data must be finite".into()));
    }
    let (lo, hi) = range(x);
    if x.len() < 2 || lo == hi {
        return Err(Error::RankDeficient("the covariate needs at least two distinct values".into()));
    }
    Ok(())
}

/// Weighted least squares line; `None` weights means ordinary least squares.
fn weighted_line(x: &[f64], y: &[f64], w: Option<&[f64]>) -> Result<(f64, f64)> {
    let weight = |i: usize| w.map_or(1.0, |w| w[i]);
    let sw: f64 = (0..x.len()).map(weight).sum();
    let mx = (0..x.len()).map(|i| weight(i) * x[i]).sum::<f64>() / sw;
    let my = (0..x.len()).map(|i| weight(i) * y[i]).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for i in 0..x.len() {
        let dx = x[i] - mx;
        sxx += weight(i) * dx * dx;
        sxy += weight(i) * dx * (y[i] - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::RankDeficient("weighted covariate has no spread".into()));
    }
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// Ordinary least squares.
pub fn fit_ls(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    check_inputs(x, y)?;
    let (a, b) = weighted_line(x, y, None)?;
    let my = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sse: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    Ok(RegressionFit::parametric(Method::Ls, a, b, Some(r2), x))
}

pub const LAD_SMOOTHING: f64 = 1e-6;
pub const LAD_TOL: f64 = 1e-9;
pub const LAD_MAX_ITER: usize = 200;

fn smoothed_l1(x: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
    x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).hypot(LAD_SMOOTHING)).sum()
}

/// Backtracked Newton step on the smoothed loss, if it makes progress.
fn newton_step(x: &[f64], y: &[f64], a: f64, b: f64) -> Option<(f64, f64)> {
    let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let eps2 = LAD_SMOOTHING * LAD_SMOOTHING;
    for (xi, yi) in x.iter().zip(y) {
        let r = yi - a - b * xi;
        let s = r.hypot(LAD_SMOOTHING);
        g0 -= r / s;
        g1 -= r / s * xi;
        let c = eps2 / (s * s * s);
        h00 += c;
        h01 += c * xi;
        h11 += c * xi * xi;
    }
    let det = h00 * h11 - h01 * h01;
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let da = -(h11 * g0 - h01 * g1) / det;
    let db = -(h00 * g1 - h01 * g0) / det;
    let base = smoothed_l1(x, y, a, b);
    let mut t = 1.0;
    for _ in 0..40 {
        let (na, nb) = (a + t * da, b + t * db);
        if smoothed_l1(x, y, na, nb) < base {
            return Some((na, nb));
        }
        t *= 0.5;
    }
    None
}

/// Least absolute deviations by iteratively reweighted least squares on the
/// smoothed loss `sum sqrt(r^2 + 1e-12)`.
///
/// Each iteration takes the reweighted least-squares update (weights
/// `1 / sqrt(r^2 + 1e-12)`, a majorize-minimize step) or a backtracked Newton
/// step on the same loss, whichever ends lower.
pub fn fit_lad(x: &[f64], y: &[f64]) -> Result<RegressionFit> {
    check_inputs(x, y)?;
    let (mut a, mut b) = weighted_line(x, y, None)?;
    let mut w = vec![0.0; x.len()];
    for iteration in 1..=LAD_MAX_ITER {
        for i in 0..x.len() {
            w[i] = 1.0 / (y[i] - a - b * x[i]).hypot(LAD_SMOOTHING);
        }
        let (mut na, mut nb) = weighted_line(x, y, Some(&w))?;
        if let Some((ta, tb)) = newton_step(x, y, a, b) {
            if smoothed_l1(x, y, ta, tb) < smoothed_l1(x, y, na, nb) {
                (na, nb) = (ta, tb);
            }
        }
        let change = (na - a).abs().max((nb - b).abs());
        a = na;
        b = nb;
        if change < LAD_TOL {
            log::debug!("LAD converged after {iteration} iterations");
            return Ok(RegressionFit::parametric(Method::Lad, a, b, None, x));
        }
        if iteration == LAD_MAX_ITER {
            return Err(Error::NonConvergence { iterations: iteration, kkt_residual: change, best: vec![a, b] });
        }
    }
    unreachable!("loop returns on its last iteration")
}

fn nadaraya_watson(sample: &[(f64, f64)], h: f64, x: f64) -> f64 {
    let z: Vec<f64> = sample.iter().map(|(xi, _)| -0.5 * ((x - xi) / h).powi(2)).collect();
    let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (zi, (_, yi)) in z.iter().zip(sample) {
        let k = (zi - top).exp();
        num += k * yi;
        den += k;
    }
    num / den
}

pub const KERNEL_MIN_POINTS: usize = 10;

/// Silverman's rule of thumb, `1.06 sd(x) n^{-1/5}`.
pub fn default_bandwidth(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    1.06 * sd * n.powf(-0.2)
}

/// Nadaraya-Watson regression with a Gaussian kernel.
pub fn fit_kernel(x: &[f64], y: &[f64], bandwidth: Option<f64>) -> Result<RegressionFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < KERNEL_MIN_POINTS {
        return Err(Error::InvalidArgument(format!(
            "kernel regression needs at least {KERNEL_MIN_POINTS} points, got {}",
            x.len()
        )));
    }
    let h = bandwidth.unwrap_or_else(|| default_bandwidth(x));
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    Ok(RegressionFit {
        method: Method::Kernel,
        intercept: None,
        slope: None,
        r_squared: None,
        bandwidth: Some(h),
        domain: range(x),
        sample: x.iter().cloned().zip(y.iter().cloned()).collect(),
    })
}

/// Fits `method` to the log design of `records`.
pub fn fit(method: Method, records: &[AuctionRecord]) -> Result<RegressionFit> {
    let (x, y) = log_design(records);
    match method {
        Method::Ls => fit_ls(&x, &y),
        Method::Lad => fit_lad(&x, &y),
        Method::Kernel => fit_kernel(&x, &y, None),
    }
}

/// Residuals of every bid, raw and normalized to `[0, 1]` over the sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub auction_ids: Vec<String>,
    pub raw: Vec<Vec<f64>>,
    pub normalized: Vec<Vec<f64>>,
}

/// `U = log B - psi(log p)` grouped per auction, then min-max normalized.
pub fn residuals(fit: &RegressionFit, records: &[AuctionRecord]) -> Result<Residuals> {
    if records.is_empty() {
        return Err(Error::EmptySample);
    }
    let raw: Vec<Vec<f64>> = records
        .iter()
        .map(|r| {
            let psi = fit.predict(r.engineer_estimate.ln());
            r.bids.iter().map(|b| b.ln() - psi).collect()
        })
        .collect();
    let flat: Vec<f64> = raw.iter().flatten().cloned().collect();
    let mut normalized_flat = normalize(&flat)?.into_iter();
    let normalized = raw.iter().map(|t| normalized_flat.by_ref().take(t.len()).collect()).collect();
    Ok(Residuals { auction_ids: records.iter().map(|r| r.auction_id.clone()).collect(), raw, normalized })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{count_cells, GridSpec};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn line(n: usize) -> (Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        let y = x.iter().map(|v| 2.0 * v + 1.0).collect();
        (x, y)
    }

    #[test]
    fn exact_line() {
        let (x, y) = line(30);
        let ls = fit_ls(&x, &y).unwrap();
        assert_abs_diff_eq!(ls.intercept.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ls.slope.unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ls.r_squared.unwrap(), 1.0, epsilon = 1e-12);
        let lad = fit_lad(&x, &y).unwrap();
        assert_abs_diff_eq!(lad.intercept.unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(lad.slope.unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn constant_covariate_is_rank_deficient() {
        assert!(matches!(fit_ls(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(Error::RankDeficient(_))));
        assert!(matches!(fit_lad(&[2.0; 4], &[1.0; 4]), Err(Error::RankDeficient(_))));
    }

    fn noisy(rng: &mut ChaCha8Rng, n: usize, contaminate: f64) -> (Vec<f64>, Vec<f64>) {
        let noise = Normal::new(0.0, 0.1).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let y = x
            .iter()
            .map(|v| {
                let base = -0.3 + 1.02 * v + noise.sample(rng);
                if rng.random::<f64>() < contaminate {
                    base + 5.0 + 5.0 * rng.random::<f64>()
                } else {
                    base
                }
            })
            .collect();
        (x, y)
    }

    #[test]
    fn ls_slope_within_three_standard_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, y) = noisy(&mut rng, 400, 0.0);
        let fit = fit_ls(&x, &y).unwrap();
        let mx = x.iter().sum::<f64>() / x.len() as f64;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        let se = 0.1 / sxx.sqrt();
        assert!((fit.slope.unwrap() - 1.02).abs() < 3.0 * se);
    }

    fn squared(x: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
        x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).powi(2)).sum()
    }

    fn absolute(x: &[f64], y: &[f64], a: f64, b: f64) -> f64 {
        x.iter().zip(y).map(|(xi, yi)| (yi - a - b * xi).abs()).sum()
    }

    #[test]
    fn ls_is_a_minimum_and_lad_beats_it_in_absolute_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let (x, y) = noisy(&mut rng, 80, 0.1);
            let ls = fit_ls(&x, &y).unwrap();
            let (a, b) = (ls.intercept.unwrap(), ls.slope.unwrap());
            let base = squared(&x, &y, a, b);
            for (da, db) in [(1e-3, 0.0), (-1e-3, 0.0), (0.0, 1e-3), (0.0, -1e-3), (1e-3, -1e-3)] {
                assert!(squared(&x, &y, a + da, b + db) >= base);
            }
            let lad = fit_lad(&x, &y).unwrap();
            let lad_loss = absolute(&x, &y, lad.intercept.unwrap(), lad.slope.unwrap());
            assert!(lad_loss <= absolute(&x, &y, a, b) + 1e-9);
        }
    }

    #[test]
    fn lad_converges_on_varied_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for trial in 0..500 {
            let n = 5 + trial % 200;
            let (x, mut y) = noisy(&mut rng, n, 0.2);
            if trial % 7 == 0 {
                // Duplicate responses produce ties in the residuals.
                for i in (0..n).step_by(3) {
                    y[i] = -0.3 + 1.02 * x[i];
                }
            }
            let fit = fit_lad(&x, &y).unwrap_or_else(|e| panic!("trial {trial}: {e}"));
            assert!(fit.slope.unwrap().is_finite());
        }
    }

    #[test]
    fn kernel_properties() {
        let x: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let flat = fit_kernel(&x, &vec![3.0; 200], None).unwrap();
        for v in [0.0, 0.3, 1.0] {
            assert_abs_diff_eq!(flat.predict(v), 3.0, epsilon = 1e-12);
        }
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let fit = fit_kernel(&x, &y, Some(0.01)).unwrap();
        for i in 0..=100 {
            let v = 0.1 + 0.8 * i as f64 / 100.0;
            assert!((fit.predict(v) - (2.0 * v + 1.0)).abs() < 0.05);
        }
        let wide = fit_kernel(&x, &y, Some(1e6)).unwrap();
        assert_abs_diff_eq!(wide.predict(0.5), 2.0, epsilon = 1e-6);
        assert!(fit_kernel(&x, &y, Some(0.0)).is_err());
        assert!(fit_kernel(&x[..5], &y[..5], None).is_err());
        assert_abs_diff_eq!(fit_kernel(&x, &y, None).unwrap().bandwidth.unwrap(), default_bandwidth(&x));
    }

    fn records(rng: &mut ChaCha8Rng, n: usize) -> Vec<AuctionRecord> {
        (0..n)
            .map(|t| {
                let p = rng.random_range(1e4..1e6f64);
                let bids = (0..3).map(|_| p * rng.random_range(0.7..1.3)).collect();
                AuctionRecord { auction_id: format!("a{t}"), engineer_estimate: p, bids }
            })
            .collect()
    }

    #[test]
    fn perfect_fit_residuals_are_degenerate() {
        let recs = vec![
            AuctionRecord { auction_id: "1".into(), engineer_estimate: 10.0, bids: vec![10.0, 10.0] },
            AuctionRecord { auction_id: "2".into(), engineer_estimate: 20.0, bids: vec![20.0, 20.0] },
        ];
        let fit = fit(Method::Ls, &recs).unwrap();
        assert!(matches!(residuals(&fit, &recs), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn residuals_ignore_intercept_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let recs = records(&mut rng, 50);
        let ls = fit(Method::Ls, &recs).unwrap();
        let mut shifted = ls.clone();
        shifted.intercept = Some(ls.intercept.unwrap() + 0.7);
        let a = residuals(&ls, &recs).unwrap();
        let b = residuals(&shifted, &recs).unwrap();
        for (ra, rb) in a.raw.iter().flatten().zip(b.raw.iter().flatten()) {
            assert_abs_diff_eq!(ra - rb, 0.7, epsilon = 1e-9);
        }
        for (na, nb) in a.normalized.iter().flatten().zip(b.normalized.iter().flatten()) {
            assert_abs_diff_eq!(na, nb, epsilon = 1e-9);
        }
        assert!(a.normalized.iter().all(|t| t.len() == 3));
    }

    #[test]
    fn near_identical_fits_bin_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let recs = records(&mut rng, 100);
        let grid = GridSpec::equispaced(3, 3).unwrap();
        let ls = fit(Method::Ls, &recs).unwrap();
        let mut close = ls.clone();
        close.slope = Some(ls.slope.unwrap() + 1e-9);
        let a = count_cells(&residuals(&ls, &recs).unwrap().normalized, &grid).unwrap();
        let b = count_cells(&residuals(&close, &recs).unwrap().normalized, &grid).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn relabeling_auctions_keeps_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let recs = records(&mut rng, 60);
        let mut rev = recs.clone();
        rev.reverse();
        let grid = GridSpec::equispaced(2, 3).unwrap();
        let count = |r: &[AuctionRecord]| {
            let f = fit(Method::Ls, r).unwrap();
            count_cells(&residuals(&f, r).unwrap().normalized, &grid).unwrap()
        };
        assert_eq!(count(&recs).values(), count(&rev).values());
    }

    #[test]
    fn record_validation_and_winner() {
        let r = AuctionRecord { auction_id: "x".into(), engineer_estimate: 5.0, bids: vec![10.0, 20.0, 30.0] };
        assert!(r.validate().is_ok());
        assert_eq!(r.winning_bid(), Some(10.0));
        let bad = AuctionRecord { bids: vec![1.0, -2.0], ..r.clone() };
        assert!(matches!(bad.validate(), Err(Error::Validation(_))));
        let bad = AuctionRecord { engineer_estimate: 0.0, ..r };
        assert!(matches!(bad.validate(), Err(Error::Validation(_))));
    }
}
