//! Testing affiliation (multivariate total positivity of order two) of
//! bidders' private signals from first-price auction bid data.
//!
//! The pipeline normalizes bids (optionally after removing observed
//! heterogeneity), bins them on a rectangular grid over `[0,1]^N`, fits the
//! multinomial likelihood under symmetry with and without the TP2
//! determinantal inequalities, and compares the two maxima with a
//! likelihood-ratio statistic whose null law is a chi-bar-squared mixture.
//!
//! Module map:
//!
//! - [`grid`]: breakpoints, binning, cell arrays, discretization of densities.
//! - [`symmetry`]: sorted indices, orbit sizes, lexicographic ranks.
//! - [`affiliation`]: TP2 constraint generation and checking.
//! - [`estimate`]: maximum-likelihood estimators, including the constrained one.
//! - [`inference`]: LR statistic, chi-bar weights, Kodde-Palm bounds, decisions.
//! - [`hetero`]: LS / LAD / kernel regressions of log bids on log estimates.
//! - [`simulate`]: synthetic grid DGPs and seeded Monte Carlo studies.
//! - [`cli`]: ingestion, configuration and the command implementations.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affiliation;
pub mod cli;
pub mod error;
pub mod estimate;
pub mod grid;
pub mod hetero;
pub mod inference;
mod nnls;
pub mod seed;
pub mod simulate;
pub mod symmetry;

pub use error::{Error, Result};
