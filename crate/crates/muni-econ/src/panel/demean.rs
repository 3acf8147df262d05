//! Alternating within-group demeaning over one or more absorbed
//! dimensions. Group means use pairwise summation over a fixed row order,
//! so results do not depend on thread count.

use rayon::prelude::*;
use std::collections::HashMap;

use super::{FixedEffectSpec, PanelData, PanelError};
use crate::util::pairwise_sum_by;

/// Convergence diagnostics from one demeaning run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemeanReport {
    /// Full sweeps over every dimension.
    pub iterations: usize,
    /// Largest group mean subtracted during the final sweep.
    pub last_change: f64,
}

/// Rows grouped by one categorical dimension.
#[derive(Debug, Clone)]
pub(crate) struct GroupLayout {
    /// Group id per row.
    pub assignment: Vec<u32>,
    /// Row indices per group, ascending.
    pub rows_by_group: Vec<Vec<u32>>,
    /// Total weight per group.
    pub weight_sums: Vec<f64>,
}

impl GroupLayout {
    pub(crate) fn build(keys: &[String], weights: Option<&[f64]>) -> Self {
        let mut ids: HashMap<&str, u32> = HashMap::new();
        let mut assignment = Vec::with_capacity(keys.len());
        let mut rows_by_group: Vec<Vec<u32>> = Vec::new();
        for (row, key) in keys.iter().enumerate() {
            let id = match ids.get(key.as_str()) {
                Some(&id) => id,
                None => {
                    let id = rows_by_group.len() as u32;
                    ids.insert(key.as_str(), id);
                    rows_by_group.push(Vec::new());
                    id
                }
            };
            assignment.push(id);
            rows_by_group[id as usize].push(row as u32);
        }
        let weight_sums = rows_by_group
            .iter()
            .map(|rows| match weights {
                Some(w) => pairwise_sum_by(rows.len(), |i| w[rows[i] as usize]),
                None => rows.len() as f64,
            })
            .collect();
        Self {
            assignment,
            rows_by_group,
            weight_sums,
        }
    }

    pub(crate) fn n_groups(&self) -> usize {
        self.rows_by_group.len()
    }
}

/// One pass over a single dimension: subtract each group's weighted mean
/// from every working column. Returns the largest absolute mean removed.
fn sweep(cols: &mut [Vec<f64>], dim: &GroupLayout, weights: Option<&[f64]>) -> f64 {
    let mut largest = 0.0f64;
    for col in cols.iter_mut() {
        let means: Vec<f64> = dim
            .rows_by_group
            .par_iter()
            .enumerate()
            .map(|(g, rows)| {
                let total = pairwise_sum_by(rows.len(), |i| {
                    let r = rows[i] as usize;
                    match weights {
                        Some(w) => w[r] * col[r],
                        None => col[r],
                    }
                });
                total / dim.weight_sums[g]
            })
            .collect();
        for (row, &g) in dim.assignment.iter().enumerate() {
            col[row] -= means[g as usize];
        }
        for m in &means {
            largest = largest.max(m.abs());
        }
    }
    largest
}

/// Cycle over the dimensions until the largest mean removed in a full
/// sweep drops below `tol`. A single dimension finishes in one pass; zero
/// dimensions are the identity.
pub(crate) fn alternating(
    cols: &mut [Vec<f64>],
    dims: &[GroupLayout],
    weights: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<DemeanReport, PanelError> {
    if dims.is_empty() || cols.iter().all(|c| c.is_empty()) {
        return Ok(DemeanReport {
            iterations: 0,
            last_change: 0.0,
        });
    }
    let mut last_change = f64::INFINITY;
    for cycle in 1..=max_iter {
        let mut cycle_max = 0.0f64;
        for dim in dims {
            cycle_max = cycle_max.max(sweep(cols, dim, weights));
        }
        last_change = cycle_max;
        if dims.len() == 1 || cycle_max < tol {
            return Ok(DemeanReport {
                iterations: cycle,
                last_change,
            });
        }
    }
    Err(PanelError::NotConverged {
        iterations: max_iter,
        last_change,
    })
}

fn gather_finite(data: &PanelData, name: &str) -> Result<Vec<f64>, PanelError> {
    let col = data.require_numeric(name)?;
    if let Some(row) = col.iter().position(|v| !v.is_finite()) {
        return Err(PanelError::MissingValue {
            column: name.to_string(),
            row,
        });
    }
    Ok(col.to_vec())
}

pub(crate) fn gather_weights(data: &PanelData, name: &str) -> Result<Vec<f64>, PanelError> {
    let col = gather_finite(data, name)?;
    if let Some(row) = col.iter().position(|w| *w <= 0.0) {
        return Err(PanelError::BadWeight {
            row,
            value: col[row],
        });
    }
    Ok(col)
}

pub(crate) fn gather_keys(data: &PanelData, dim: &str) -> Result<Vec<String>, PanelError> {
    let keys = data.composite_values(dim)?;
    if let Some(row) = keys.iter().position(|k| k.is_empty()) {
        return Err(PanelError::MissingValue {
            column: dim.to_string(),
            row,
        });
    }
    Ok(keys)
}

/// Project the named numeric columns onto the orthogonal complement of the
/// absorbed dimensions, returning the transformed columns in input order.
/// Means are weighted when a weight column is given. Every selected value
/// and every key must be present.
pub fn demean(
    data: &PanelData,
    columns: &[&str],
    fe: &FixedEffectSpec,
    weights: Option<&str>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Vec<f64>>, DemeanReport), PanelError> {
    let mut cols: Vec<Vec<f64>> = columns
        .iter()
        .map(|name| gather_finite(data, name))
        .collect::<Result<_, _>>()?;
    let w = weights.map(|name| gather_weights(data, name)).transpose()?;
    let dims: Vec<GroupLayout> = fe
        .dims()
        .iter()
        .map(|dim| Ok(GroupLayout::build(&gather_keys(data, dim)?, w.as_deref())))
        .collect::<Result<_, PanelError>>()?;
    let report = alternating(&mut cols, &dims, w.as_deref(), tol, max_iter)?;
    Ok((cols, report))
}
