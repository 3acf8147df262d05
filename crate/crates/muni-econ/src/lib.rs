//! Municipal bond analytics and panel econometrics.
//!
//! The crate covers the full measurement-and-inference chain for secondary
//! market municipal bond studies:
//!
//! - [`curve`]: treasury zero curves, discount factors, and the
//!   coupon-equivalent risk-free yield of an arbitrary cashflow schedule;
//! - [`bonds`]: bond reference data, cashflow generation, price/yield/duration
//!   math, rating encoding, and duration-based impact arithmetic;
//! - [`spreads`]: tax regimes and the construction of raw and tax-adjusted
//!   yield spreads;
//! - [`trades`]: the nine-rule trade-cleaning pipeline and volume-weighted
//!   CUSIP-month aggregation;
//! - [`liquidity`]: post-issuance markup, price dispersion, and Amihud
//!   measures over the first trading month;
//! - [`fiscal`]: county fiscal ratios, jobs-multiplier exposure, county
//!   rating aggregation, and issuance-growth normalization;
//! - [`matching`]: standardized nearest-neighbor selection of control
//!   counties with balance diagnostics;
//! - [`panel`]: high-dimensional fixed-effects least squares with one- and
//!   two-way cluster-robust inference, plus DiD and event-study designs;
//! - [`synth`]: seed-reproducible synthetic data generators used as ground
//!   truth in the test suites;
//! - [`io`]: the CSV schemas shared by the library and the CLI.
//!
//! Every operation is deterministic: identical inputs produce identical
//! outputs regardless of thread count. Sums that cross observations use
//! pairwise summation over a fixed ordering.

pub mod bonds;
pub mod curve;
pub mod fiscal;
pub mod io;
pub mod liquidity;
pub mod matching;
pub mod panel;
mod solver;
pub mod spreads;
pub mod synth;
pub mod trades;
pub mod util;
