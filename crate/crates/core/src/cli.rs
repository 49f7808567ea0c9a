//! Command-line front end: configuration, bid-data ingestion and the
//! subcommands `summary`, `fit-hetero`, `test-affiliation`, `simulate`,
//! `weights` and `constraints`.
//!
//! Settings come from an optional TOML file and are overridden by flags.
//! Exit codes: 0 on success, 1 on internal or solver errors, 2 on usage,
//! configuration or input-data errors.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::affiliation::{self, ConstraintMode};
use crate::error::{Error, Result};
use crate::estimate::SolverOptions;
use crate::grid::{count_cells, GridSpec};
use crate::hetero::{self, AuctionRecord, Method, RegressionFit};
use crate::inference::{self, TestOptions, TestReport};
use crate::simulate::{self, Dgp, McOptions, McResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Points on the covariate grid of `curves.csv`.
pub const CURVE_POINTS: usize = 200;

/// Every setting a command can use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub input: Option<PathBuf>,
    /// Keep auctions with exactly this many bids.
    pub n: usize,
    pub k: usize,
    /// Overrides `k` when present.
    pub breakpoints: Option<Vec<f64>>,
    pub method: Method,
    pub constraint_mode: ConstraintMode,
    pub solver: SolverOptions,
    pub weight_draws: usize,
    pub seed: u64,
    pub sizes: Vec<f64>,
    pub output: PathBuf,
    pub dgp: String,
    pub dgp_param: Option<f64>,
    pub replications: usize,
    pub sample_size: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            input: None,
            n: 3,
            k: 3,
            breakpoints: None,
            method: Method::Ls,
            constraint_mode: ConstraintMode::Adjacent,
            solver: SolverOptions::default(),
            weight_draws: inference::DEFAULT_WEIGHT_DRAWS,
            seed: 0,
            sizes: inference::DEFAULT_SIZES.to_vec(),
            output: PathBuf::from("out"),
            dgp: "uniform".into(),
            dgp_param: None,
            replications: 100,
            sample_size: 500,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.n)));
        }
        self.grid()?;
        self.test_options().validate()?;
        if self.replications == 0 || self.sample_size == 0 {
            return Err(Error::Config("replications and sample_size must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        let grid = match &self.breakpoints {
            Some(b) => GridSpec::new(b.clone(), self.n),
            None => GridSpec::equispaced(self.k, self.n),
        };
        grid.map_err(|e| Error::Config(e.to_string()))
    }

    pub fn test_options(&self) -> TestOptions {
        TestOptions {
            constraint_mode: self.constraint_mode,
            solver: self.solver.clone(),
            weight_draws: self.weight_draws,
            seed: self.seed,
            sizes: self.sizes.clone(),
        }
    }

    pub fn mc_options(&self) -> McOptions {
        McOptions {
            replications: self.replications,
            sample_size: self.sample_size,
            sizes: self.sizes.clone(),
            seed: self.seed,
            weight_draws: self.weight_draws,
            constraint_mode: self.constraint_mode,
            solver: self.solver.clone(),
        }
    }

    fn input(&self) -> Result<&Path> {
        self.input.as_deref().ok_or_else(|| Error::Config("no input file given".into()))
    }
}

/// Parsed bid data grouped by auction.
#[derive(Debug, Clone, PartialEq)]
pub struct BidTable {
    pub records: Vec<AuctionRecord>,
    /// Auctions removed by the bidder-count filter.
    pub dropped: usize,
}

#[derive(Debug, Deserialize)]
struct BidRow {
    auction_id: String,
    bid: f64,
    engineer_estimate: f64,
}

const HEADER: [&str; 3] = ["auction_id", "bid", "engineer_estimate"];

/// Reads `auction_id,bid,engineer_estimate` rows and keeps auctions with
/// exactly `n` bids (all auctions when `n` is `None`).
pub fn ingest(path: &Path, n: Option<usize>) -> Result<BidTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file, n)
}

pub fn ingest_reader(reader: impl std::io::Read, n: Option<usize>) -> Result<BidTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Format { line: 1, message: e.to_string() })?.clone();
    for name in HEADER {
        if !header.iter().any(|h| h == name) {
            return Err(Error::Format {
                line: 1,
                message: format!("missing column {name:?}; expected header {}", HEADER.join(",")),
            });
        }
    }

    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, AuctionRecord> = HashMap::new();
    for result in rdr.deserialize::<BidRow>() {
        let row = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Format { line, message: e.to_string() }
        })?;
        if !(row.bid > 0.0 && row.bid.is_finite())
            || !(row.engineer_estimate > 0.0 && row.engineer_estimate.is_finite())
        {
            return Err(Error::Validation(format!(
                "auction {}: prices must be positive (bid {}, estimate {})",
                row.auction_id, row.bid, row.engineer_estimate
            )));
        }
        match groups.get_mut(&row.auction_id) {
            Some(rec) => {
                if rec.engineer_estimate != row.engineer_estimate {
                    return Err(Error::Validation(format!(
                        "auction {} has conflicting engineer's estimates",
                        row.auction_id
                    )));
                }
                rec.bids.push(row.bid);
            }
            None => {
                order.push(row.auction_id.clone());
                groups.insert(
                    row.auction_id.clone(),
                    AuctionRecord {
                        auction_id: row.auction_id,
                        engineer_estimate: row.engineer_estimate,
                        bids: vec![row.bid],
                    },
                );
            }
        }
    }

    let total = order.len();
    let records: Vec<AuctionRecord> =
        order.into_iter().filter_map(|id| groups.remove(&id)).filter(|r| n.is_none_or(|n| r.bids.len() == n)).collect();
    let dropped = total - records.len();
    if dropped > 0 {
        log::info!("dropped {dropped} of {total} auctions without exactly {} bids", n.unwrap_or(0));
    }
    Ok(BidTable { records, dropped })
}

/// Writes records in the layout [`ingest`] reads.
pub fn write_bids(path: &Path, records: &[AuctionRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(HEADER).map_err(&err)?;
    for r in records {
        for b in &r.bids {
            w.write_record([r.auction_id.clone(), b.to_string(), r.engineer_estimate.to_string()]).map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Mean, standard deviation, median, minimum and maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 { sorted[mid] } else { 0.5 * (sorted[mid - 1] + sorted[mid]) };
        Ok(Self { count: values.len(), mean, sd, median, min: sorted[0], max: sorted[sorted.len() - 1] })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub auctions: usize,
    pub engineer_estimate: Stats,
    pub winning_bid: Stats,
    pub all_bids: Stats,
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "T = {} auctions", self.auctions)?;
        writeln!(f, "{:<20}{:>16}{:>16}{:>16}{:>16}{:>16}", "", "mean", "sd", "median", "min", "max")?;
        for (name, s) in [
            ("engineer's estimate", &self.engineer_estimate),
            ("winning bid", &self.winning_bid),
            ("all bids", &self.all_bids),
        ] {
            writeln!(f, "{:<20}{:>16.2}{:>16.2}{:>16.2}{:>16.2}{:>16.2}", name, s.mean, s.sd, s.median, s.min, s.max)?;
        }
        Ok(())
    }
}

/// Descriptive statistics; the winning bid is the lowest bid of each auction.
pub fn cmd_summary(table: &BidTable) -> Result<Summary> {
    let records = &table.records;
    let estimates: Vec<f64> = records.iter().map(|r| r.engineer_estimate).collect();
    let winners: Vec<f64> = records.iter().filter_map(|r| r.winning_bid()).collect();
    let bids: Vec<f64> = records.iter().flat_map(|r| r.bids.iter().cloned()).collect();
    Ok(Summary {
        auctions: records.len(),
        engineer_estimate: Stats::of(&estimates)?,
        winning_bid: Stats::of(&winners)?,
        all_bids: Stats::of(&bids)?,
    })
}

/// All three regressions of one dataset.
#[derive(Debug, Clone, Serialize)]
pub struct HeteroFits {
    pub ls: RegressionFit,
    pub lad: RegressionFit,
    /// Absent with fewer points than the kernel fit needs.
    pub kernel: Option<RegressionFit>,
}

impl HeteroFits {
    pub fn fit(records: &[AuctionRecord]) -> Result<Self> {
        let (x, y) = hetero::log_design(records);
        Ok(Self {
            ls: hetero::fit_ls(&x, &y)?,
            lad: hetero::fit_lad(&x, &y)?,
            kernel: hetero::fit_kernel(&x, &y, None).ok(),
        })
    }

    fn get(&self, method: Method) -> Result<&RegressionFit> {
        match method {
            Method::Ls => Ok(&self.ls),
            Method::Lad => Ok(&self.lad),
            Method::Kernel => {
                self.kernel.as_ref().ok_or_else(|| Error::Config("kernel regression needs at least 10 bids".into()))
            }
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

/// `scatter.csv`: one row per bid.
pub fn write_scatter(path: &Path, records: &[AuctionRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["auction_id", "log_estimate", "log_bid"]).map_err(&err)?;
    for r in records {
        for b in &r.bids {
            w.write_record([r.auction_id.clone(), r.engineer_estimate.ln().to_string(), b.ln().to_string()])
                .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `curves.csv`: fitted values on an even grid over the covariate range.
pub fn write_curves(path: &Path, fits: &HeteroFits) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["log_estimate", "ls", "lad", "kernel"]).map_err(&err)?;
    let (lo, hi) = fits.ls.domain;
    for i in 0..CURVE_POINTS {
        let x = lo + (hi - lo) * i as f64 / (CURVE_POINTS - 1) as f64;
        let kernel = fits.kernel.as_ref().map_or(String::new(), |k| k.predict(x).to_string());
        w.write_record([x.to_string(), fits.ls.predict(x).to_string(), fits.lad.predict(x).to_string(), kernel])
            .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `residuals.csv`: normalized residual tuple of each auction.
pub fn write_residuals(path: &Path, res: &hetero::Residuals, n: usize) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    let mut header = vec!["auction_id".to_string()];
    header.extend((1..=n).map(|i| format!("u{i}")));
    w.write_record(&header).map_err(&err)?;
    for (id, t) in res.auction_ids.iter().zip(&res.normalized) {
        let mut rec = vec![id.clone()];
        rec.extend(t.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn load_table(config: &Config) -> Result<BidTable> {
    let table = ingest(config.input()?, Some(config.n))?;
    if table.records.is_empty() {
        return Err(Error::Validation(format!("no auctions with exactly {} bids", config.n)));
    }
    Ok(table)
}

/// Fits LS, LAD and kernel regressions and writes the plot data.
pub fn cmd_fit_hetero(config: &Config) -> Result<HeteroFits> {
    let table = load_table(config)?;
    let fits = HeteroFits::fit(&table.records)?;
    let res = hetero::residuals(fits.get(config.method)?, &table.records)?;
    create_dir(&config.output)?;
    write_text(&config.output.join("fits.json"), &(serde_json::to_string_pretty(&fits)? + "\n"))?;
    write_scatter(&config.output.join("scatter.csv"), &table.records)?;
    write_curves(&config.output.join("curves.csv"), &fits)?;
    write_residuals(&config.output.join("residuals.csv"), &res, config.n)?;
    Ok(fits)
}

/// `report.json`: the test report plus the data-side context.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffiliationReport {
    #[serde(flatten)]
    pub test: TestReport,
    pub version: String,
    pub regression: RegressionFit,
    pub auctions: usize,
    pub dropped_auctions: usize,
}

/// Full pipeline: ingest, regress, bin residuals, test.
pub fn cmd_test(config: &Config) -> Result<AffiliationReport> {
    let table = load_table(config)?;
    let grid = config.grid()?;
    let fits = HeteroFits::fit(&table.records)?;
    let fit = fits.get(config.method)?;
    let res = hetero::residuals(fit, &table.records)?;
    let counts = count_cells(&res.normalized, &grid)?;
    let test = inference::run_test(&counts, &config.test_options())?;
    log::info!("seed {} J {} constraint mode {} lr {:.4}", config.seed, test.j, config.constraint_mode, test.lr_stat);

    let report = AffiliationReport {
        test,
        version: VERSION.into(),
        regression: fit.clone(),
        auctions: table.records.len(),
        dropped_auctions: table.dropped,
    };
    create_dir(&config.output)?;
    write_text(&config.output.join("report.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    let mut summary = report.test.summary();
    if let (Some(a), Some(b)) = (fit.intercept, fit.slope) {
        summary.push_str(&format!("{} regression: intercept {a:.4}, slope {b:.4}\n", fit.method));
    }
    write_text(&config.output.join("summary.txt"), &summary)?;
    write_scatter(&config.output.join("scatter.csv"), &table.records)?;
    write_curves(&config.output.join("curves.csv"), &fits)?;
    write_residuals(&config.output.join("residuals.csv"), &res, config.n)?;
    Ok(report)
}

/// Monte Carlo study of the configured DGP; writes `mc.json` and `mc.csv`.
pub fn cmd_simulate(config: &Config) -> Result<McResult> {
    let dgp = Dgp::from_name(&config.dgp, config.k, config.n, config.dgp_param)?;
    let result = simulate::mc_study(&dgp, &config.mc_options())?;
    log::info!("seed {} J {} constraint mode {} dgp {}", config.seed, result.j, config.constraint_mode, result.dgp);
    create_dir(&config.output)?;
    result.write_json(&config.output.join("mc.json"))?;
    result.write_csv(&config.output.join("mc.csv"))?;
    Ok(result)
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightsOutput {
    pub j: usize,
    pub draws: usize,
    pub seed: u64,
    pub weights: inference::ChibarWeights,
    pub sizes: Vec<f64>,
    pub kp_lower: Vec<f64>,
    pub kp_upper: Vec<f64>,
}

/// Reads a square matrix, one row per line, entries separated by commas or spaces.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| Error::Format { line: i + 1, message: format!("{s:?}: {e}") }))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let j = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != j) {
        return Err(Error::Format { line: bad + 1, message: format!("expected {j} entries per row") });
    }
    Ok(DMatrix::from_fn(j, j, |a, b| rows[a][b]))
}

/// Chi-bar weights and Kodde-Palm bounds for a given `Pi0`.
pub fn cmd_weights(pi0: &DMatrix<f64>, config: &Config) -> Result<WeightsOutput> {
    config.test_options().validate()?;
    let j = pi0.nrows();
    let weights = inference::chibar_weights(pi0, config.weight_draws, config.seed)?;
    let mut kp_lower = Vec::new();
    let mut kp_upper = Vec::new();
    for &s in &config.sizes {
        let (lo, hi) = inference::kodde_palm_bounds(j.max(1), s)?;
        kp_lower.push(lo);
        kp_upper.push(hi);
    }
    Ok(WeightsOutput {
        j,
        draws: config.weight_draws,
        seed: config.seed,
        weights,
        sizes: config.sizes.clone(),
        kp_lower,
        kp_upper,
    })
}

/// Exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Io { .. } | Error::Format { .. } | Error::Validation(_) => 2,
        _ => 1,
    }
}

#[derive(Debug, Parser)]
#[command(name = "mtp2", version, about = "Test affiliation of bidders' signals with grid distributions")]
pub struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Descriptive statistics of the bid data.
    Summary(Overrides),
    /// LS, LAD and kernel regressions plus plot data.
    FitHetero(Overrides),
    /// Full test of symmetric affiliation.
    TestAffiliation(Overrides),
    /// Monte Carlo study of a synthetic DGP.
    Simulate(Overrides),
    /// Chi-bar weights and Kodde-Palm bounds for a covariance matrix.
    Weights(WeightsArgs),
    /// Print the TP2 constraints of a grid.
    Constraints(ConstraintsArgs),
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of bidders per auction.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of equal-width intervals.
    #[arg(long)]
    pub k: Option<usize>,
    /// Interval breakpoints, e.g. 0,0.4,0.6,1.
    #[arg(long, value_delimiter = ',')]
    pub breakpoints: Option<Vec<f64>>,
    /// ls, lad or kernel.
    #[arg(long)]
    pub method: Option<Method>,
    /// adjacent or full.
    #[arg(long)]
    pub constraint_mode: Option<ConstraintMode>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub epsilon_floor: Option<f64>,
    /// Chi-bar weight draws.
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Test sizes, e.g. 0.1,0.05,0.01.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<f64>>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub dgp: Option<String>,
    #[arg(long)]
    pub dgp_param: Option<f64>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub sample_size: Option<usize>,
}

impl Overrides {
    pub fn apply(self, mut c: Config) -> Config {
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        if self.input.is_some() {
            c.input = self.input;
        }
        if self.breakpoints.is_some() {
            c.breakpoints = self.breakpoints;
        }
        if self.dgp_param.is_some() {
            c.dgp_param = self.dgp_param;
        }
        set! {
            n => c.n,
            k => c.k,
            method => c.method,
            constraint_mode => c.constraint_mode,
            tol => c.solver.tol,
            max_iter => c.solver.max_iter,
            epsilon_floor => c.solver.epsilon_floor,
            draws => c.weight_draws,
            seed => c.seed,
            sizes => c.sizes,
            output => c.output,
            dgp => c.dgp,
            replications => c.replications,
            sample_size => c.sample_size,
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct WeightsArgs {
    /// File holding Pi0, one row per line.
    #[arg(long, conflicts_with = "identity")]
    pub pi0: Option<PathBuf>,
    /// Use the identity of this dimension as Pi0.
    #[arg(long)]
    pub identity: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct ConstraintsArgs {
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value = "adjacent")]
    pub mode: ConstraintMode,
    /// Generate cell-level constraints without symmetry.
    #[arg(long)]
    pub asymmetric: bool,
}

fn base_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

/// Runs a parsed command line, returning what it printed.
pub fn run(cli: Cli) -> Result<String> {
    let base = base_config(cli.config.as_deref())?;
    let resolve = |o: Overrides| -> Result<Config> {
        let c = o.apply(base.clone());
        c.validate()?;
        log::info!("mtp2 {VERSION} config {c:?}");
        Ok(c)
    };
    match cli.command {
        Command::Summary(o) => {
            let c = resolve(o)?;
            Ok(cmd_summary(&load_table(&c)?)?.to_string())
        }
        Command::FitHetero(o) => {
            let c = resolve(o)?;
            Ok(serde_json::to_string_pretty(&cmd_fit_hetero(&c)?)?)
        }
        Command::TestAffiliation(o) => {
            let c = resolve(o)?;
            Ok(cmd_test(&c)?.test.summary())
        }
        Command::Simulate(o) => {
            let c = resolve(o)?;
            let r = cmd_simulate(&c)?;
            Ok(serde_json::to_string_pretty(&r.rejection)?)
        }
        Command::Weights(a) => {
            let mut c = base.clone();
            if let Some(d) = a.draws {
                c.weight_draws = d;
            }
            if let Some(s) = a.seed {
                c.seed = s;
            }
            if let Some(s) = a.sizes {
                c.sizes = s;
            }
            let pi0 = match (a.pi0, a.identity) {
                (Some(p), _) => read_matrix(&p)?,
                (None, Some(j)) => DMatrix::identity(j, j),
                (None, None) => return Err(Error::Config("give --pi0 FILE or --identity J".into())),
            };
            Ok(serde_json::to_string_pretty(&cmd_weights(&pi0, &c)?)?)
        }
        Command::Constraints(a) => {
            let cs =
                affiliation::generate(a.k, a.n, a.mode, !a.asymmetric).map_err(|e| Error::Config(e.to_string()))?;
            Ok(cs.dump())
        }
    }
}
