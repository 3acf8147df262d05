//! Panel least squares with absorbed fixed effects, cluster-robust
//! covariance, and builders for interaction and event-time designs.

mod build;
mod demean;
mod fit;

pub use build::{build_did, build_event_study, BucketWidth, DidColumns, EventStudyColumns};
pub use demean::{demean, DemeanReport};
pub use fit::{fit, fit_lpm};

use nalgebra::DMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("column {0} not found")]
    UnknownColumn(String),
    #[error("column {0} already exists")]
    DuplicateColumn(String),
    #[error("column {column} has {got} rows, table has {expected}")]
    LengthMismatch {
        column: String,
        expected: usize,
        got: usize,
    },
    #[error("missing value in column {column} at row {row}")]
    MissingValue { column: String, row: usize },
    #[error("weight at row {row} is {value}, weights must be positive")]
    BadWeight { row: usize, value: f64 },
    #[error("demeaning did not converge after {iterations} sweeps, last change {last_change:e}")]
    NotConverged {
        iterations: usize,
        last_change: f64,
    },
    #[error("{n} usable rows cannot identify {k} parameters")]
    Underdetermined { n: usize, k: usize },
    #[error("cluster dimension {0} has only one group")]
    DegenerateCluster(String),
    #[error("at most two cluster dimensions are supported, got {0}")]
    TooManyClusters(usize),
    #[error("column {0} is not a 0/1 indicator")]
    NonBinary(String),
    #[error("benchmark bucket {0} has no observations")]
    MissingBenchmark(i32),
    #[error("coefficient {0} is not in the fitted model")]
    MissingCoefficient(String),
    #[error("covariance submatrix for the requested test is singular")]
    SingularTest,
    #[error("no usable rows after filtering")]
    NoData,
}

/// Internal separator for composite categorical keys. Keeps `a#b` built
/// from ("x", "y#z") distinct from one built from ("x#y", "z").
pub(crate) const KEY_SEP: char = '\u{1f}';

/// Column-oriented table: numeric columns hold outcomes, regressors, and
/// weights (NaN marks a missing value); categorical columns hold
/// fixed-effect and cluster keys (empty string marks a missing value).
#[derive(Debug, Clone, Default)]
pub struct PanelData {
    n_rows: usize,
    has_columns: bool,
    numeric: BTreeMap<String, Vec<f64>>,
    categorical: BTreeMap<String, Vec<String>>,
}

impl PanelData {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    fn check_new_column(&mut self, name: &str, len: usize) -> Result<(), PanelError> {
        if self.numeric.contains_key(name) || self.categorical.contains_key(name) {
            return Err(PanelError::DuplicateColumn(name.to_string()));
        }
        if self.has_columns {
            if len != self.n_rows {
                return Err(PanelError::LengthMismatch {
                    column: name.to_string(),
                    expected: self.n_rows,
                    got: len,
                });
            }
        } else {
            self.n_rows = len;
            self.has_columns = true;
        }
        Ok(())
    }

    pub fn add_numeric(&mut self, name: &str, values: Vec<f64>) -> Result<(), PanelError> {
        self.check_new_column(name, values.len())?;
        self.numeric.insert(name.to_string(), values);
        Ok(())
    }

    pub fn add_categorical(&mut self, name: &str, values: Vec<String>) -> Result<(), PanelError> {
        self.check_new_column(name, values.len())?;
        self.categorical.insert(name.to_string(), values);
        Ok(())
    }

    pub fn numeric(&self, name: &str) -> Option<&[f64]> {
        self.numeric.get(name).map(|v| v.as_slice())
    }

    pub fn categorical(&self, name: &str) -> Option<&[String]> {
        self.categorical.get(name).map(|v| v.as_slice())
    }

    pub fn numeric_names(&self) -> Vec<&str> {
        self.numeric.keys().map(|s| s.as_str()).collect()
    }

    pub fn categorical_names(&self) -> Vec<&str> {
        self.categorical.keys().map(|s| s.as_str()).collect()
    }

    pub(crate) fn require_numeric(&self, name: &str) -> Result<&[f64], PanelError> {
        self.numeric(name)
            .ok_or_else(|| PanelError::UnknownColumn(name.to_string()))
    }

    pub(crate) fn require_categorical(&self, name: &str) -> Result<&[String], PanelError> {
        self.categorical(name)
            .ok_or_else(|| PanelError::UnknownColumn(name.to_string()))
    }

    /// Resolve a dimension name like `state#year` into one key per row by
    /// joining the named categorical columns. A row missing any part gets
    /// an empty key.
    pub(crate) fn composite_values(&self, dim: &str) -> Result<Vec<String>, PanelError> {
        let parts: Vec<&[String]> = dim
            .split('#')
            .map(|p| self.require_categorical(p.trim()))
            .collect::<Result<_, _>>()?;
        let mut out = Vec::with_capacity(self.n_rows);
        for row in 0..self.n_rows {
            if parts.iter().any(|col| col[row].is_empty()) {
                out.push(String::new());
                continue;
            }
            let mut key = String::new();
            for (i, col) in parts.iter().enumerate() {
                if i > 0 {
                    key.push(KEY_SEP);
                }
                key.push_str(&col[row]);
            }
            out.push(key);
        }
        Ok(out)
    }
}

/// Ordered list of categorical dimensions to absorb; `a#b` names the
/// interaction of two key columns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FixedEffectSpec {
    dims: Vec<String>,
}

impl FixedEffectSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn new<I, S>(dims: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            dims: dims.into_iter().map(Into::into).collect(),
        }
    }

    /// Parse a comma-separated list such as `issuer,state#year`.
    pub fn parse(text: &str) -> Self {
        Self::new(
            text.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string),
        )
    }

    pub fn dims(&self) -> &[String] {
        &self.dims
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }
}

/// What to estimate: outcome, regressors, absorbed dimensions, cluster
/// dimensions (at most two), and an optional weight column. A constant is
/// added automatically when nothing is absorbed.
#[derive(Debug, Clone)]
pub struct FitSpec {
    pub outcome: String,
    pub regressors: Vec<String>,
    pub fe: FixedEffectSpec,
    pub clusters: Vec<String>,
    pub weights: Option<String>,
    pub demean_tol: f64,
    pub demean_max_iter: usize,
}

impl FitSpec {
    pub fn new(outcome: &str, regressors: &[&str]) -> Self {
        Self {
            outcome: outcome.to_string(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            fe: FixedEffectSpec::none(),
            clusters: Vec::new(),
            weights: None,
            demean_tol: 1e-10,
            demean_max_iter: 10_000,
        }
    }

    pub fn with_fe(mut self, fe: FixedEffectSpec) -> Self {
        self.fe = fe;
        self
    }

    pub fn with_clusters(mut self, clusters: &[&str]) -> Self {
        self.clusters = clusters.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn with_weights(mut self, column: &str) -> Self {
        self.weights = Some(column.to_string());
        self
    }
}

/// Estimates plus inference for one regression.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Kept regressor names, aligned with `estimates`, `se`, and the rows
    /// and columns of `cov`.
    pub terms: Vec<String>,
    pub estimates: Vec<f64>,
    pub cov: DMatrix<f64>,
    pub se: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    /// Regressors removed as collinear, in pivot order.
    pub dropped: Vec<String>,
    pub n: usize,
    /// Model degrees of freedom: kept columns plus absorbed-effect count.
    pub k_model: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub fe_iterations: usize,
    pub dropped_singletons: usize,
    /// True when the two-way covariance needed its negative eigenvalues
    /// floored at zero.
    pub psd_adjusted: bool,
    /// Residual per kept row, same order as `kept_rows`.
    pub residuals: Vec<f64>,
    /// Original row indices that survived filtering.
    pub kept_rows: Vec<usize>,
    /// Degrees of freedom used for t statistics: smallest cluster count
    /// minus one when clustered, N minus K otherwise.
    pub dof_inference: f64,
    /// Group counts per cluster dimension.
    pub cluster_groups: Vec<usize>,
}

impl FitResult {
    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }

    pub fn coef(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.estimates[i])
    }

    pub fn se_of(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.se[i])
    }

    fn require_index(&self, term: &str) -> Result<usize, PanelError> {
        self.index_of(term)
            .ok_or_else(|| PanelError::MissingCoefficient(term.to_string()))
    }

    /// Difference between two coefficients with a normal-reference Wald
    /// p-value using the fitted covariance.
    pub fn diff_test(&self, term_a: &str, term_b: &str) -> Result<(f64, f64), PanelError> {
        let a = self.require_index(term_a)?;
        let b = self.require_index(term_b)?;
        if a == b {
            return Ok((0.0, 1.0));
        }
        let diff = self.estimates[a] - self.estimates[b];
        let var = self.cov[(a, a)] + self.cov[(b, b)] - 2.0 * self.cov[(a, b)];
        if var <= 0.0 {
            return Ok((diff, if diff == 0.0 { 1.0 } else { 0.0 }));
        }
        let z = diff / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let p = 2.0 * (1.0 - normal.cdf(z.abs()));
        Ok((diff, p))
    }

    /// Joint Wald test that every listed coefficient is zero, against a
    /// chi-squared reference with one degree of freedom per term.
    pub fn wald_test(&self, terms: &[&str]) -> Result<(f64, f64), PanelError> {
        if terms.is_empty() {
            return Ok((0.0, 1.0));
        }
        let idx: Vec<usize> = terms
            .iter()
            .map(|t| self.require_index(t))
            .collect::<Result<_, _>>()?;
        let q = idx.len();
        let mut sub_cov = DMatrix::zeros(q, q);
        let mut sub_beta = DMatrix::zeros(q, 1);
        for (i, &a) in idx.iter().enumerate() {
            sub_beta[(i, 0)] = self.estimates[a];
            for (j, &b) in idx.iter().enumerate() {
                sub_cov[(i, j)] = self.cov[(a, b)];
            }
        }
        let inv = sub_cov.try_inverse().ok_or(PanelError::SingularTest)?;
        let stat = (sub_beta.transpose() * inv * &sub_beta)[(0, 0)];
        let chi = ChiSquared::new(q as f64).expect("positive dof");
        Ok((stat, 1.0 - chi.cdf(stat.max(0.0))))
    }
}
