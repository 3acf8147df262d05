//! Column builders: interaction terms for two-period designs and dynamic
//! event-time dummies.

use std::collections::BTreeSet;

use super::{PanelData, PanelError};

/// A value is a valid indicator when every finite entry is exactly 0 or 1;
/// NaN entries stay missing and drop out at fit time.
pub(crate) fn check_binary(data: &PanelData, name: &str) -> Result<(), PanelError> {
    let col = data.require_numeric(name)?;
    for v in col {
        if v.is_nan() {
            continue;
        }
        if *v != 0.0 && *v != 1.0 {
            return Err(PanelError::NonBinary(name.to_string()));
        }
    }
    Ok(())
}

/// Names created by [`build_did`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DidColumns {
    /// The plain treat-by-post interaction column.
    pub interaction: String,
    /// (group value, column name) per group split, alphabetical.
    pub group_columns: Vec<(String, String)>,
    /// Composite dimension name to absorb group-by-time effects, present
    /// when both a group split and a time key were given.
    pub group_time_dimension: Option<String>,
}

/// Add `treat x post` and, with a group split, one
/// `treat x post x 1{group=g}` column per group value. The returned
/// dimension name wires group-by-time fixed effects into a fit.
pub fn build_did(
    data: &mut PanelData,
    treat: &str,
    post: &str,
    group: Option<&str>,
    time_key: Option<&str>,
) -> Result<DidColumns, PanelError> {
    check_binary(data, treat)?;
    check_binary(data, post)?;
    let n = data.n_rows();
    let t = data.require_numeric(treat)?.to_vec();
    let p = data.require_numeric(post)?.to_vec();
    let interaction = format!("{treat}_x_{post}");
    let product: Vec<f64> = (0..n).map(|i| t[i] * p[i]).collect();
    data.add_numeric(&interaction, product.clone())?;

    let mut group_columns = Vec::new();
    let mut group_time_dimension = None;
    if let Some(group) = group {
        let keys = data.require_categorical(group)?.to_vec();
        let values: BTreeSet<&String> = keys.iter().filter(|k| !k.is_empty()).collect();
        let values: Vec<String> = values.into_iter().cloned().collect();
        for value in values {
            let name = format!("{interaction}_{value}");
            let col: Vec<f64> = (0..n)
                .map(|i| {
                    if keys[i].is_empty() {
                        f64::NAN
                    } else if keys[i] == value {
                        product[i]
                    } else {
                        0.0
                    }
                })
                .collect();
            data.add_numeric(&name, col)?;
            group_columns.push((value, name));
        }
        if let Some(time_key) = time_key {
            data.require_categorical(time_key)?;
            group_time_dimension = Some(format!("{group}#{time_key}"));
        }
    }
    Ok(DidColumns {
        interaction,
        group_columns,
        group_time_dimension,
    })
}

/// Event-time bucket width in months.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BucketWidth {
    Quarter,
    Half,
    Year,
}

impl BucketWidth {
    pub fn months(self) -> f64 {
        match self {
            BucketWidth::Quarter => 3.0,
            BucketWidth::Half => 6.0,
            BucketWidth::Year => 12.0,
        }
    }

    pub fn bucket_of(self, event_time_months: f64) -> i32 {
        (event_time_months / self.months()).floor() as i32
    }
}

/// Names created by [`build_event_study`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventStudyColumns {
    /// All dummy columns: the treated cohort's buckets ascending, then the
    /// control cohort's. The benchmark bucket appears for neither cohort.
    pub dummies: Vec<String>,
    /// Bucket ids observed in the data, ascending.
    pub buckets: Vec<i32>,
    pub benchmark: i32,
    /// One linear-trend column per trend group, when requested.
    pub trend_columns: Vec<String>,
}

fn bucket_label(bucket: i32) -> String {
    if bucket < 0 {
        format!("m{}", -bucket)
    } else {
        format!("p{bucket}")
    }
}

/// Add one dummy per cohort-and-bucket cell, omitting the benchmark bucket
/// for both cohorts. `cohort` is a 0/1 indicator (1 = treated),
/// `event_time` is in months relative to the event. With `trends_by`, one
/// `trend_{g}` column per group carries event time interacted with the
/// group indicator.
pub fn build_event_study(
    data: &mut PanelData,
    cohort: &str,
    event_time: &str,
    width: BucketWidth,
    benchmark: i32,
    trends_by: Option<&str>,
) -> Result<EventStudyColumns, PanelError> {
    check_binary(data, cohort)?;
    let n = data.n_rows();
    let coh = data.require_numeric(cohort)?.to_vec();
    let et = data.require_numeric(event_time)?.to_vec();

    let mut buckets = BTreeSet::new();
    for &t in &et {
        if t.is_finite() {
            buckets.insert(width.bucket_of(t));
        }
    }
    if !buckets.contains(&benchmark) {
        return Err(PanelError::MissingBenchmark(benchmark));
    }
    let buckets: Vec<i32> = buckets.into_iter().collect();

    let mut dummies = Vec::new();
    for (cohort_value, prefix) in [(1.0, "treat"), (0.0, "ctrl")] {
        for &bucket in &buckets {
            if bucket == benchmark {
                continue;
            }
            let name = format!("ev_{prefix}_{}", bucket_label(bucket));
            let col: Vec<f64> = (0..n)
                .map(|i| {
                    if !et[i].is_finite() || coh[i].is_nan() {
                        f64::NAN
                    } else if coh[i] == cohort_value && width.bucket_of(et[i]) == bucket {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            data.add_numeric(&name, col)?;
            dummies.push(name);
        }
    }

    let mut trend_columns = Vec::new();
    if let Some(trends_by) = trends_by {
        let keys = data.require_categorical(trends_by)?.to_vec();
        let groups: BTreeSet<&String> = keys.iter().filter(|k| !k.is_empty()).collect();
        let groups: Vec<String> = groups.into_iter().cloned().collect();
        for g in groups {
            let name = format!("trend_{g}");
            let col: Vec<f64> = (0..n)
                .map(|i| {
                    if keys[i].is_empty() {
                        f64::NAN
                    } else if keys[i] == g {
                        et[i]
                    } else {
                        0.0
                    }
                })
                .collect();
            data.add_numeric(&name, col)?;
            trend_columns.push(name);
        }
    }

    Ok(EventStudyColumns {
        dummies,
        buckets,
        benchmark,
        trend_columns,
    })
}
