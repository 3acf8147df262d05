//! Nearest-neighbor selection of control counties for treated events, with
//! balance diagnostics.

use chrono::NaiveDate;
use std::collections::HashSet;
use thiserror::Error;

use crate::util::{months_between, pairwise_sum_by};

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("candidate pool is empty after exclusions")]
    EmptyPool,
    #[error("need {k} controls but only {available} candidates remain")]
    PoolTooSmall { k: usize, available: usize },
    #[error("county {fips} has a non-finite feature value")]
    NonFiniteFeature { fips: String },
    #[error("county {fips} has {got} features, expected {expected}")]
    FeatureLenMismatch {
        fips: String,
        expected: usize,
        got: usize,
    },
}

/// One deal event to be matched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub event_id: String,
    pub treated_fips: String,
    pub event_date: NaiveDate,
}

/// A county's feature vector at matching time. `region` feeds the optional
/// same-region restriction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub fips: String,
    pub region: Option<String>,
    pub features: Vec<f64>,
}

/// Matching options. Defaults: one neighbor, z-scored Euclidean distance,
/// no caliper, whole pool eligible.
#[derive(Debug, Clone, Default)]
pub struct MatchOpts {
    k: usize,
    /// Skip standardization and measure distance in raw feature units.
    pub raw_distance: bool,
    /// Drop candidates farther than this (same units as the distance).
    pub caliper: Option<f64>,
    /// Keep only candidates sharing the treated county's region.
    pub same_region: bool,
    /// Counties barred from serving as controls, e.g. those with their own
    /// event nearby in time.
    pub excluded: HashSet<String>,
}

impl MatchOpts {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn k(&self) -> usize {
        self.k.max(1)
    }
}

/// One selected control.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    pub fips: String,
    pub distance: f64,
    pub rank: usize,
}

/// The matched controls for one event plus the standardization statistics
/// used for the distance.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub event_id: String,
    pub treated_fips: String,
    pub controls: Vec<Control>,
    pub feature_means: Vec<f64>,
    pub feature_sds: Vec<f64>,
}

fn check_row(row: &FeatureRow, expected: usize) -> Result<(), MatchError> {
    if row.features.len() != expected {
        return Err(MatchError::FeatureLenMismatch {
            fips: row.fips.clone(),
            expected,
            got: row.features.len(),
        });
    }
    if row.features.iter().any(|x| !x.is_finite()) {
        return Err(MatchError::NonFiniteFeature {
            fips: row.fips.clone(),
        });
    }
    Ok(())
}

/// Select the `k` nearest controls for `treated` from `pool`.
///
/// Candidates never include the treated county, excluded counties, or (with
/// `same_region`) other regions. Features are z-scored with population
/// moments over the eligible pool plus the treated row; a constant feature
/// contributes zero distance. Ties break by ascending fips, and the
/// eligible pool is processed in fips order, so the result does not depend
/// on the input ordering of `pool`.
pub fn match_controls(
    event_id: &str,
    treated: &FeatureRow,
    pool: &[FeatureRow],
    opts: &MatchOpts,
) -> Result<MatchResult, MatchError> {
    let width = treated.features.len();
    check_row(treated, width)?;

    let mut eligible: Vec<&FeatureRow> = Vec::with_capacity(pool.len());
    for row in pool {
        if row.fips == treated.fips || opts.excluded.contains(&row.fips) {
            continue;
        }
        if opts.same_region && row.region != treated.region {
            continue;
        }
        check_row(row, width)?;
        eligible.push(row);
    }
    eligible.sort_by(|a, b| a.fips.cmp(&b.fips));
    if eligible.is_empty() {
        return Err(MatchError::EmptyPool);
    }

    let n = eligible.len() + 1;
    let value = |i: usize, j: usize| {
        if i == 0 {
            treated.features[j]
        } else {
            eligible[i - 1].features[j]
        }
    };
    let mut means = Vec::with_capacity(width);
    let mut sds = Vec::with_capacity(width);
    for j in 0..width {
        let mean = pairwise_sum_by(n, |i| value(i, j)) / n as f64;
        let var = pairwise_sum_by(n, |i| {
            let d = value(i, j) - mean;
            d * d
        }) / n as f64;
        means.push(mean);
        sds.push(var.sqrt());
    }

    let z = |x: f64, j: usize| {
        if opts.raw_distance {
            x
        } else if sds[j] == 0.0 {
            0.0
        } else {
            (x - means[j]) / sds[j]
        }
    };
    let mut scored: Vec<(f64, &FeatureRow)> = eligible
        .iter()
        .map(|row| {
            let d2 = pairwise_sum_by(width, |j| {
                let gap = z(treated.features[j], j) - z(row.features[j], j);
                gap * gap
            });
            (d2.sqrt(), *row)
        })
        .collect();
    if let Some(caliper) = opts.caliper {
        scored.retain(|(d, _)| *d <= caliper);
    }
    let k = opts.k();
    if scored.len() < k {
        return Err(MatchError::PoolTooSmall {
            k,
            available: scored.len(),
        });
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.fips.cmp(&b.1.fips)));
    let controls = scored
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, (distance, row))| Control {
            fips: row.fips.clone(),
            distance: *distance,
            rank: i + 1,
        })
        .collect();

    Ok(MatchResult {
        event_id: event_id.to_string(),
        treated_fips: treated.fips.clone(),
        controls,
        feature_means: means,
        feature_sds: sds,
    })
}

/// Counties with an event dated within `window_months` whole calendar
/// months (inclusive, either direction) of `around`. Feeding this set into
/// [`MatchOpts::excluded`] keeps contaminated counties out of the control
/// group.
pub fn own_event_exclusions(
    events: &[Event],
    around: NaiveDate,
    window_months: i32,
) -> HashSet<String> {
    events
        .iter()
        .filter(|e| months_between(around, e.event_date).abs() <= window_months)
        .map(|e| e.treated_fips.clone())
        .collect()
}

/// One feature's balance diagnostics across all matched events.
#[derive(Debug, Clone, PartialEq)]
pub struct BalanceRow {
    pub feature: String,
    pub treated_mean: f64,
    pub control_mean: f64,
    pub difference: f64,
    /// Unequal-variance t statistic; empty when either side lacks the two
    /// observations needed for a sample variance, or both variances are 0.
    pub t_stat: Option<f64>,
}

fn mean_and_var(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    let mean = pairwise_sum_by(n, |i| values[i]) / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let ss = pairwise_sum_by(n, |i| {
        let d = values[i] - mean;
        d * d
    });
    (mean, Some(ss / (n - 1) as f64))
}

/// Per-feature treated/control means, differences, and Welch t statistics
/// over matched samples. `treated[i][j]` is feature `j` of treated row `i`.
pub fn match_report(
    feature_names: &[String],
    treated: &[Vec<f64>],
    controls: &[Vec<f64>],
) -> Vec<BalanceRow> {
    let column = |rows: &[Vec<f64>], j: usize| -> Vec<f64> {
        rows.iter().map(|r| r[j]).collect()
    };
    feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let t_col = column(treated, j);
            let c_col = column(controls, j);
            let (t_mean, t_var) = mean_and_var(&t_col);
            let (c_mean, c_var) = mean_and_var(&c_col);
            let difference = t_mean - c_mean;
            let t_stat = match (t_var, c_var) {
                (Some(v1), Some(v2)) => {
                    let se2 = v1 / t_col.len() as f64 + v2 / c_col.len() as f64;
                    (se2 > 0.0).then(|| difference / se2.sqrt())
                }
                _ => None,
            };
            BalanceRow {
                feature: name.clone(),
                treated_mean: t_mean,
                control_mean: c_mean,
                difference,
                t_stat,
            }
        })
        .collect()
}
