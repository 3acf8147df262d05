//! The estimator: weighted least squares on demeaned columns, collinear
//! columns dropped by pivoted factorization, cluster-robust covariance.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::{HashMap, HashSet};

use super::build::check_binary;
use super::demean::{alternating, GroupLayout};
use super::{FitResult, FitSpec, PanelData, PanelError, KEY_SEP};
use crate::util::pairwise_sum_by;

const PIVOT_TOL: f64 = 1e-10;

struct Dsu(Vec<u32>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n as u32).collect())
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.0[x as usize] != x {
            self.0[x as usize] = self.0[self.0[x as usize] as usize];
            x = self.0[x as usize];
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra as usize] = rb;
        }
    }
}

/// Degrees of freedom absorbed by the fixed effects: G1 for one dimension;
/// for two, G1 + G2 minus the number of connected components of the
/// bipartite group graph; further dimensions add G_d - 1 each.
fn fe_dof(layouts: &[GroupLayout], n: usize) -> usize {
    match layouts.len() {
        0 => 0,
        1 => layouts[0].n_groups(),
        _ => {
            let g1 = layouts[0].n_groups();
            let g2 = layouts[1].n_groups();
            let mut dsu = Dsu::new(g1 + g2);
            for row in 0..n {
                dsu.union(
                    layouts[0].assignment[row],
                    g1 as u32 + layouts[1].assignment[row],
                );
            }
            let mut roots = HashSet::new();
            for node in 0..(g1 + g2) as u32 {
                roots.insert(dsu.find(node));
            }
            let mut dof = g1 + g2 - roots.len();
            for extra in &layouts[2..] {
                dof += extra.n_groups() - 1;
            }
            dof
        }
    }
}

/// Pick an independent column subset with a column-pivoted QR. Returns the
/// kept original indices in ascending order and the dropped indices in
/// pivot order. A column is dropped once its pivot falls below 1e-10
/// relative to the leading pivot.
fn select_columns(x: &DMatrix<f64>) -> (Vec<usize>, Vec<usize>) {
    let k = x.ncols();
    if k == 0 {
        return (Vec::new(), Vec::new());
    }
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let kmin = k.min(x.nrows());
    let scale = r[(0, 0)].abs();
    let rank = if scale > 0.0 {
        (0..kmin)
            .take_while(|&i| r[(i, i)].abs() > PIVOT_TOL * scale)
            .count()
    } else {
        0
    };
    let mut idx = DMatrix::<f64>::zeros(1, k);
    for j in 0..k {
        idx[(0, j)] = j as f64;
    }
    qr.p().permute_columns(&mut idx);
    let perm: Vec<usize> = (0..k).map(|j| idx[(0, j)] as usize).collect();
    let mut kept = perm[..rank].to_vec();
    kept.sort_unstable();
    (kept, perm[rank..].to_vec())
}

fn crve_factor(groups: usize, n: usize, k_model: usize) -> f64 {
    let g = groups as f64;
    g / (g - 1.0) * (n - 1) as f64 / (n - k_model) as f64
}

/// One cluster dimension's sandwich: c * (X'X)^-1 (sum_g S_g S_g') (X'X)^-1
/// with S_g the within-group score sums.
fn sandwich(
    xtx_inv: &DMatrix<f64>,
    x: &DMatrix<f64>,
    e: &DVector<f64>,
    layout: &GroupLayout,
    n: usize,
    k_model: usize,
) -> DMatrix<f64> {
    let k = x.ncols();
    let mut meat = DMatrix::zeros(k, k);
    for rows in &layout.rows_by_group {
        let s = DVector::from_fn(k, |j, _| {
            pairwise_sum_by(rows.len(), |i| {
                let r = rows[i] as usize;
                x[(r, j)] * e[r]
            })
        });
        meat += &s * s.transpose();
    }
    xtx_inv * meat * xtx_inv * crve_factor(layout.n_groups(), n, k_model)
}

fn symmetrize(v: DMatrix<f64>) -> DMatrix<f64> {
    (&v + v.transpose()) * 0.5
}

pub fn fit(data: &PanelData, spec: &FitSpec) -> Result<FitResult, PanelError> {
    if spec.clusters.len() > 2 {
        return Err(PanelError::TooManyClusters(spec.clusters.len()));
    }
    let y_full = data.require_numeric(&spec.outcome)?;
    let x_full: Vec<&[f64]> = spec
        .regressors
        .iter()
        .map(|r| data.require_numeric(r))
        .collect::<Result<_, _>>()?;
    let w_full = spec
        .weights
        .as_deref()
        .map(|w| data.require_numeric(w))
        .transpose()?;
    let fe_keys: Vec<Vec<String>> = spec
        .fe
        .dims()
        .iter()
        .map(|d| data.composite_values(d))
        .collect::<Result<_, _>>()?;
    let cl_keys: Vec<Vec<String>> = spec
        .clusters
        .iter()
        .map(|d| data.composite_values(d))
        .collect::<Result<_, _>>()?;

    let mut keep: Vec<usize> = Vec::with_capacity(data.n_rows());
    'rows: for row in 0..data.n_rows() {
        if !y_full[row].is_finite() {
            continue;
        }
        for x in &x_full {
            if !x[row].is_finite() {
                continue 'rows;
            }
        }
        if let Some(w) = w_full {
            if !w[row].is_finite() {
                continue;
            }
            if w[row] <= 0.0 {
                return Err(PanelError::BadWeight {
                    row,
                    value: w[row],
                });
            }
        }
        for keys in fe_keys.iter().chain(cl_keys.iter()) {
            if keys[row].is_empty() {
                continue 'rows;
            }
        }
        keep.push(row);
    }

    let mut dropped_singletons = 0usize;
    if !fe_keys.is_empty() {
        loop {
            let counts: Vec<HashMap<&String, usize>> = fe_keys
                .iter()
                .map(|keys| {
                    let mut m: HashMap<&String, usize> = HashMap::new();
                    for &row in &keep {
                        *m.entry(&keys[row]).or_insert(0) += 1;
                    }
                    m
                })
                .collect();
            let before = keep.len();
            keep.retain(|&row| {
                fe_keys
                    .iter()
                    .zip(&counts)
                    .all(|(keys, m)| m[&keys[row]] > 1)
            });
            dropped_singletons += before - keep.len();
            if keep.len() == before || keep.is_empty() {
                break;
            }
        }
    }
    let n = keep.len();
    if n == 0 {
        return Err(PanelError::NoData);
    }

    let intercept = spec.fe.is_empty();
    let mut names: Vec<String> = Vec::new();
    if intercept {
        names.push("const".to_string());
    }
    names.extend(spec.regressors.iter().cloned());
    let k_cols = names.len();

    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(1 + k_cols);
    cols.push(keep.iter().map(|&r| y_full[r]).collect());
    if intercept {
        cols.push(vec![1.0; n]);
    }
    for x in &x_full {
        cols.push(keep.iter().map(|&r| x[r]).collect());
    }
    let w: Option<Vec<f64>> = w_full.map(|w| keep.iter().map(|&r| w[r]).collect());

    let layouts: Vec<GroupLayout> = fe_keys
        .iter()
        .map(|keys| {
            let sub: Vec<String> = keep.iter().map(|&r| keys[r].clone()).collect();
            GroupLayout::build(&sub, w.as_deref())
        })
        .collect();
    let report = alternating(
        &mut cols,
        &layouts,
        w.as_deref(),
        spec.demean_tol,
        spec.demean_max_iter,
    )?;
    let y_dm = cols[0].clone();

    if let Some(w) = &w {
        for col in cols.iter_mut() {
            for (i, v) in col.iter_mut().enumerate() {
                *v *= w[i].sqrt();
            }
        }
    }
    let y_vec = DVector::from_vec(cols[0].clone());
    let x_mat = DMatrix::from_fn(n, k_cols, |r, c| cols[1 + c][r]);

    let (kept_idx, dropped_idx) = select_columns(&x_mat);
    let rank = kept_idx.len();
    if rank == 0 {
        return Err(PanelError::Underdetermined { n, k: k_cols });
    }
    let k_model = rank + fe_dof(&layouts, n);
    if n <= k_model {
        return Err(PanelError::Underdetermined { n, k: k_model });
    }

    let x_kept = DMatrix::from_fn(n, rank, |r, c| x_mat[(r, kept_idx[c])]);
    let qr = x_kept.clone().qr();
    let qtb = qr.q().transpose() * &y_vec;
    let under = PanelError::Underdetermined { n, k: k_model };
    let beta = qr.r().solve_upper_triangular(&qtb).ok_or(under)?;
    let r_inv = qr
        .r()
        .solve_upper_triangular(&DMatrix::identity(rank, rank))
        .ok_or(PanelError::Underdetermined { n, k: k_model })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let e_scaled = &y_vec - &x_kept * &beta;

    let ssr = pairwise_sum_by(n, |i| e_scaled[i] * e_scaled[i]);
    let ss_tot = if intercept {
        let w_at = |i: usize| w.as_ref().map_or(1.0, |w| w[i]);
        let total_w = pairwise_sum_by(n, |i| w_at(i));
        let ybar = pairwise_sum_by(n, |i| w_at(i) * y_dm[i]) / total_w;
        pairwise_sum_by(n, |i| {
            let d = y_dm[i] - ybar;
            w_at(i) * d * d
        })
    } else {
        let w_at = |i: usize| w.as_ref().map_or(1.0, |w| w[i]);
        pairwise_sum_by(n, |i| w_at(i) * y_dm[i] * y_dm[i])
    };
    let r_squared = if ss_tot > 0.0 {
        1.0 - ssr / ss_tot
    } else {
        f64::NAN
    };
    let adj_r_squared = if ss_tot > 0.0 {
        1.0 - (1.0 - r_squared) * (n - 1) as f64 / (n - k_model) as f64
    } else {
        f64::NAN
    };

    let cl_layouts: Vec<GroupLayout> = cl_keys
        .iter()
        .map(|keys| {
            let sub: Vec<String> = keep.iter().map(|&r| keys[r].clone()).collect();
            GroupLayout::build(&sub, None)
        })
        .collect();
    for (dim, layout) in spec.clusters.iter().zip(&cl_layouts) {
        if layout.n_groups() < 2 {
            return Err(PanelError::DegenerateCluster(dim.clone()));
        }
    }

    let mut psd_adjusted = false;
    let (cov, dof_inference) = match cl_layouts.len() {
        0 => {
            let dof = (n - k_model) as f64;
            let sigma2 = ssr / dof;
            (symmetrize(&xtx_inv * sigma2), dof)
        }
        1 => {
            let v = sandwich(&xtx_inv, &x_kept, &e_scaled, &cl_layouts[0], n, k_model);
            (symmetrize(v), (cl_layouts[0].n_groups() - 1) as f64)
        }
        _ => {
            let va = sandwich(&xtx_inv, &x_kept, &e_scaled, &cl_layouts[0], n, k_model);
            let vb = sandwich(&xtx_inv, &x_kept, &e_scaled, &cl_layouts[1], n, k_model);
            let inter: Vec<String> = keep
                .iter()
                .map(|&r| format!("{}{KEY_SEP}{}", cl_keys[0][r], cl_keys[1][r]))
                .collect();
            let li = GroupLayout::build(&inter, None);
            let vi = sandwich(&xtx_inv, &x_kept, &e_scaled, &li, n, k_model);
            let mut v = symmetrize(va + vb - vi);
            let eig = SymmetricEigen::new(v.clone());
            let max_eig = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
            if eig.eigenvalues.iter().any(|&l| l < -1e-12 * max_eig.max(1.0)) {
                psd_adjusted = true;
                let lam =
                    DVector::from_iterator(rank, eig.eigenvalues.iter().map(|&l| l.max(0.0)));
                v = &eig.eigenvectors * DMatrix::from_diagonal(&lam) * eig.eigenvectors.transpose();
                v = symmetrize(v);
            }
            let g_min = cl_layouts.iter().map(|l| l.n_groups()).min().unwrap();
            (v, (g_min - 1) as f64)
        }
    };

    let estimates: Vec<f64> = (0..rank).map(|j| beta[j]).collect();
    let se: Vec<f64> = (0..rank).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let tdist = StudentsT::new(0.0, 1.0, dof_inference).expect("positive dof");
    let mut t_stats = Vec::with_capacity(rank);
    let mut p_values = Vec::with_capacity(rank);
    for j in 0..rank {
        let t = estimates[j] / se[j];
        let p = if t.is_finite() {
            2.0 * (1.0 - tdist.cdf(t.abs()))
        } else {
            f64::NAN
        };
        t_stats.push(t);
        p_values.push(p);
    }

    let residuals: Vec<f64> = (0..n)
        .map(|i| match &w {
            Some(w) => e_scaled[i] / w[i].sqrt(),
            None => e_scaled[i],
        })
        .collect();

    Ok(FitResult {
        terms: kept_idx.iter().map(|&j| names[j].clone()).collect(),
        estimates,
        cov,
        se,
        t_stats,
        p_values,
        dropped: dropped_idx.iter().map(|&j| names[j].clone()).collect(),
        n,
        k_model,
        r_squared,
        adj_r_squared,
        fe_iterations: report.iterations,
        dropped_singletons,
        psd_adjusted,
        residuals,
        kept_rows: keep,
        dof_inference,
        cluster_groups: cl_layouts.iter().map(|l| l.n_groups()).collect(),
    })
}

/// Linear probability model: same estimator, with the outcome checked to
/// be a 0/1 indicator. Fitted values may leave the unit interval; they are
/// reported as-is.
pub fn fit_lpm(data: &PanelData, spec: &FitSpec) -> Result<FitResult, PanelError> {
    check_binary(data, &spec.outcome)?;
    fit(data, spec)
}

#[cfg(test)]
mod tests {
    use super::super::{FitSpec, FixedEffectSpec, PanelData};
    use super::*;
    use crate::synth::SplitMix64;

    fn textbook() -> PanelData {
        let mut data = PanelData::new();
        data.add_numeric("y", vec![2.0, 2.5, 3.8, 4.1, 5.6]).unwrap();
        data.add_numeric("x", vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        data
    }

    #[test]
    fn textbook_ols_matches_normal_equations() {
        let data = textbook();
        let fit = fit(&data, &FitSpec::new("y", &["x"])).unwrap();
        assert_eq!(fit.terms, vec!["const", "x"]);
        assert_eq!(fit.n, 5);
        assert_eq!(fit.k_model, 2);

        // Hand solve: slope = Sxy/Sxx with Sxx = 10, Sxy = 8.8.
        let slope = 8.8 / 10.0;
        let icept = 3.6 - slope * 3.0;
        assert!((fit.coef("x").unwrap() - slope).abs() < 1e-12);
        assert!((fit.coef("const").unwrap() - icept).abs() < 1e-12);

        let ssr: f64 = 0.316;
        let sigma2: f64 = ssr / 3.0;
        assert!((fit.se_of("x").unwrap() - (sigma2 / 10.0).sqrt()).abs() < 1e-12);
        let se0 = (sigma2 * (1.0 / 5.0 + 9.0 / 10.0)).sqrt();
        assert!((fit.se_of("const").unwrap() - se0).abs() < 1e-12);

        assert!((fit.r_squared - (1.0 - ssr / 8.06)).abs() < 1e-12);
        let adj = 1.0 - (1.0 - fit.r_squared) * 4.0 / 3.0;
        assert!((fit.adj_r_squared - adj).abs() < 1e-12);
        assert_eq!(fit.dof_inference, 3.0);

        let expected_resid = [0.16, -0.22, 0.20, -0.38, 0.24];
        for (got, want) in fit.residuals.iter().zip(expected_resid) {
            assert!((got - want).abs() < 1e-12);
        }
        let t = fit.t_stats[fit.index_of("x").unwrap()];
        assert!((t - slope / fit.se_of("x").unwrap()).abs() < 1e-12);
        let p = fit.p_values[fit.index_of("x").unwrap()];
        assert!(p > 0.0 && p < 0.01);
    }

    #[test]
    fn scaled_duplicate_drops_the_smaller_norm_column() {
        let mut rng = SplitMix64::new(77);
        let n = 60;
        let x1: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        let x2: Vec<f64> = x1.iter().map(|v| 2.0 * v).collect();
        let y: Vec<f64> = x1.iter().map(|v| 3.0 * v + rng.next_normal()).collect();
        let mut data = PanelData::new();
        data.add_numeric("y", y).unwrap();
        data.add_numeric("x1", x1).unwrap();
        data.add_numeric("x2", x2).unwrap();
        let fit = fit(&data, &FitSpec::new("y", &["x1", "x2"])).unwrap();
        assert_eq!(fit.dropped, vec!["x1"]);
        assert_eq!(fit.terms, vec!["const", "x2"]);
        // The slope on 2*x1 is half the slope on x1.
        assert!((fit.coef("x2").unwrap() * 2.0 - 3.0).abs() < 0.5);
    }

    #[test]
    fn exact_duplicate_drops_exactly_one() {
        let mut rng = SplitMix64::new(78);
        let n = 40;
        let x1: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        let y: Vec<f64> = x1.iter().map(|v| v + rng.next_normal()).collect();
        let mut data = PanelData::new();
        data.add_numeric("y", y).unwrap();
        data.add_numeric("x1", x1.clone()).unwrap();
        data.add_numeric("x1b", x1).unwrap();
        let fit = fit(&data, &FitSpec::new("y", &["x1", "x1b"])).unwrap();
        assert_eq!(fit.dropped.len(), 1);
        assert_eq!(fit.terms.len(), 2);
    }

    /// Deterministic crossed design: row i gets unit i % g1 and period
    /// (i / g1) % g2, guaranteeing a connected two-way graph.
    fn crossed_panel(
        rng: &mut SplitMix64,
        n: usize,
        g1: usize,
        g2: usize,
        slopes: &[f64],
    ) -> PanelData {
        let alphas: Vec<f64> = (0..g1).map(|_| rng.next_normal() * 3.0).collect();
        let gammas: Vec<f64> = (0..g2).map(|_| rng.next_normal() * 2.0).collect();
        let mut y = Vec::with_capacity(n);
        let mut xs: Vec<Vec<f64>> = vec![Vec::with_capacity(n); slopes.len()];
        let mut units = Vec::with_capacity(n);
        let mut periods = Vec::with_capacity(n);
        for i in 0..n {
            let u = i % g1;
            let p = (i / g1) % g2;
            let mut yi = alphas[u] + gammas[p] + rng.next_normal();
            for (j, b) in slopes.iter().enumerate() {
                let x = rng.next_normal();
                yi += b * x;
                xs[j].push(x);
            }
            y.push(yi);
            units.push(format!("u{u}"));
            periods.push(format!("p{p}"));
        }
        let mut data = PanelData::new();
        data.add_numeric("y", y).unwrap();
        for (j, col) in xs.into_iter().enumerate() {
            data.add_numeric(&format!("x{j}"), col).unwrap();
        }
        data.add_categorical("unit", units).unwrap();
        data.add_categorical("period", periods).unwrap();
        data
    }

    /// Dummy-variable oracle: regress on [const, unit dummies (drop u0),
    /// period dummies (drop p0), x...] by direct inversion; returns the
    /// full design, coefficient vector, and residuals.
    fn dummy_ols(
        data: &PanelData,
        g1: usize,
        g2: usize,
        k_x: usize,
    ) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let n = data.n_rows();
        let units = data.categorical("unit").unwrap();
        let periods = data.categorical("period").unwrap();
        let k_full = 1 + (g1 - 1) + (g2 - 1) + k_x;
        let mut x = DMatrix::zeros(n, k_full);
        for row in 0..n {
            x[(row, 0)] = 1.0;
            let u: usize = units[row][1..].parse().unwrap();
            let p: usize = periods[row][1..].parse().unwrap();
            if u > 0 {
                x[(row, u)] = 1.0;
            }
            if p > 0 {
                x[(row, g1 - 1 + p)] = 1.0;
            }
            for j in 0..k_x {
                x[(row, 1 + (g1 - 1) + (g2 - 1) + j)] =
                    data.numeric(&format!("x{j}")).unwrap()[row];
            }
        }
        let y = DVector::from_row_slice(data.numeric("y").unwrap());
        let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
        let beta = &xtx_inv * x.transpose() * &y;
        let resid = &y - &x * &beta;
        (x, beta, resid)
    }

    #[test]
    fn hdfe_matches_dummy_ols_with_clustered_covariance() {
        let mut rng = SplitMix64::new(0xF17);
        let (n, g1, g2) = (300, 12, 10);
        let slopes = [1.5, -0.4, 0.9];
        let data = crossed_panel(&mut rng, n, g1, g2, &slopes);
        let spec = FitSpec::new("y", &["x0", "x1", "x2"])
            .with_fe(FixedEffectSpec::parse("unit,period"))
            .with_clusters(&["unit"]);
        let fit = fit(&data, &spec).unwrap();

        let (x, beta, resid) = dummy_ols(&data, g1, g2, 3);
        let k_full = x.ncols();
        assert_eq!(fit.k_model, k_full);
        let offset = k_full - 3;
        for j in 0..3 {
            assert!(
                (fit.coef(&format!("x{j}")).unwrap() - beta[offset + j]).abs() < 1e-7,
                "slope {j}"
            );
        }

        // Oracle clustered covariance on the full dummy design.
        let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
        let units = data.categorical("unit").unwrap();
        let mut meat = DMatrix::zeros(k_full, k_full);
        for g in 0..g1 {
            let target = format!("u{g}");
            let mut s = DVector::<f64>::zeros(k_full);
            for row in 0..n {
                if units[row] == target {
                    for c in 0..k_full {
                        s[c] += x[(row, c)] * resid[row];
                    }
                }
            }
            meat += &s * s.transpose();
        }
        let c = g1 as f64 / (g1 as f64 - 1.0) * (n as f64 - 1.0) / ((n - k_full) as f64);
        let v_full = &xtx_inv * meat * &xtx_inv * c;
        for a in 0..3 {
            for b in 0..3 {
                assert!(
                    (fit.cov[(a, b)] - v_full[(offset + a, offset + b)]).abs() < 1e-8,
                    "cov ({a},{b})"
                );
            }
        }
        assert_eq!(fit.dof_inference, (g1 - 1) as f64);
        assert_eq!(fit.cluster_groups, vec![g1]);
    }

    #[test]
    fn constant_outcome_shift_leaves_slopes_unchanged() {
        let mut rng = SplitMix64::new(0x5417);
        let data = crossed_panel(&mut rng, 240, 8, 6, &[2.0, -1.0]);
        let shifted = {
            let mut d = data.clone();
            let y2: Vec<f64> = d.numeric("y").unwrap().iter().map(|v| v + 1000.0).collect();
            d.add_numeric("y_shift", y2).unwrap();
            d
        };
        let fe = FixedEffectSpec::parse("unit,period");
        let base = fit(&data, &FitSpec::new("y", &["x0", "x1"]).with_fe(fe.clone())).unwrap();
        let moved = fit(
            &shifted,
            &FitSpec::new("y_shift", &["x0", "x1"]).with_fe(fe),
        )
        .unwrap();
        for term in ["x0", "x1"] {
            assert!((base.coef(term).unwrap() - moved.coef(term).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn equal_weights_reproduce_unweighted_fit() {
        let mut rng = SplitMix64::new(0x7E16);
        let mut data = crossed_panel(&mut rng, 180, 9, 5, &[1.0, 0.5]);
        let n = data.n_rows();
        data.add_numeric("w4", vec![4.0; n]).unwrap();
        data.add_numeric("w3", vec![3.0; n]).unwrap();
        let fe = FixedEffectSpec::parse("unit,period");
        let base_spec = FitSpec::new("y", &["x0", "x1"])
            .with_fe(fe)
            .with_clusters(&["unit"]);
        let base = fit(&data, &base_spec).unwrap();

        let w4 = fit(&data, &base_spec.clone().with_weights("w4")).unwrap();
        assert_eq!(base.estimates, w4.estimates);
        assert_eq!(base.se, w4.se);

        let w3 = fit(&data, &base_spec.clone().with_weights("w3")).unwrap();
        for j in 0..base.estimates.len() {
            assert!((base.estimates[j] - w3.estimates[j]).abs() < 1e-12 * base.estimates[j].abs().max(1.0));
            assert!((base.se[j] - w3.se[j]).abs() < 1e-12 * base.se[j].max(1.0));
        }
    }

    #[test]
    fn integer_weights_equal_row_replication() {
        let mut rng = SplitMix64::new(0xAB5);
        let n = 90;
        let x: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        let unit: Vec<String> = (0..n).map(|i| format!("u{}", i % 6)).collect();
        let y: Vec<f64> = x
            .iter()
            .zip(&unit)
            .map(|(x, u)| 2.0 * x + u[1..].parse::<f64>().unwrap() + rng.next_normal())
            .collect();
        let reps: Vec<usize> = (0..n).map(|_| 1 + (rng.next_u64() % 3) as usize).collect();

        let mut weighted = PanelData::new();
        weighted.add_numeric("y", y.clone()).unwrap();
        weighted.add_numeric("x", x.clone()).unwrap();
        weighted
            .add_numeric("w", reps.iter().map(|&r| r as f64).collect())
            .unwrap();
        weighted.add_categorical("unit", unit.clone()).unwrap();

        let mut expanded = PanelData::new();
        let mut ye = Vec::new();
        let mut xe = Vec::new();
        let mut ue = Vec::new();
        for i in 0..n {
            for _ in 0..reps[i] {
                ye.push(y[i]);
                xe.push(x[i]);
                ue.push(unit[i].clone());
            }
        }
        expanded.add_numeric("y", ye).unwrap();
        expanded.add_numeric("x", xe).unwrap();
        expanded.add_categorical("unit", ue).unwrap();

        let fe = FixedEffectSpec::parse("unit");
        let a = fit(
            &weighted,
            &FitSpec::new("y", &["x"]).with_fe(fe.clone()).with_weights("w"),
        )
        .unwrap();
        let b = fit(&expanded, &FitSpec::new("y", &["x"]).with_fe(fe)).unwrap();
        assert!((a.coef("x").unwrap() - b.coef("x").unwrap()).abs() < 1e-10);
    }

    #[test]
    fn identical_cluster_dimensions_collapse_to_one_way() {
        let mut rng = SplitMix64::new(0x2C1);
        let data = crossed_panel(&mut rng, 200, 10, 5, &[1.2]);
        let fe = FixedEffectSpec::parse("unit,period");
        let one = fit(
            &data,
            &FitSpec::new("y", &["x0"])
                .with_fe(fe.clone())
                .with_clusters(&["unit"]),
        )
        .unwrap();
        let two = fit(
            &data,
            &FitSpec::new("y", &["x0"])
                .with_fe(fe)
                .with_clusters(&["unit", "unit"]),
        )
        .unwrap();
        assert_eq!(one.cov, two.cov);
        assert_eq!(one.se, two.se);
        assert!(!two.psd_adjusted);
        assert_eq!(two.dof_inference, one.dof_inference);
    }

    #[test]
    fn singleton_clusters_match_scaled_heteroskedastic_sandwich() {
        let mut rng = SplitMix64::new(0x8C2);
        let n = 50;
        let x1: Vec<f64> = (0..n).map(|_| rng.next_normal()).collect();
        let y: Vec<f64> = x1
            .iter()
            .map(|x| 1.0 + 0.5 * x + rng.next_normal() * (1.0 + x.abs()))
            .collect();
        let mut data = PanelData::new();
        data.add_numeric("y", y).unwrap();
        data.add_numeric("x", x1).unwrap();
        data.add_categorical("obs", (0..n).map(|i| format!("r{i}")).collect())
            .unwrap();
        let fit = fit(
            &data,
            &FitSpec::new("y", &["x"]).with_clusters(&["obs"]),
        )
        .unwrap();

        // Oracle: HC0 sandwich scaled by n/(n-k).
        let x = DMatrix::from_fn(n, 2, |r, c| {
            if c == 0 {
                1.0
            } else {
                data.numeric("x").unwrap()[r]
            }
        });
        let yv = DVector::from_row_slice(data.numeric("y").unwrap());
        let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
        let beta = &xtx_inv * x.transpose() * &yv;
        let e = &yv - &x * beta;
        let mut meat = DMatrix::zeros(2, 2);
        for i in 0..n {
            let xi = DVector::from_vec(vec![x[(i, 0)], x[(i, 1)]]);
            meat += &xi * xi.transpose() * (e[i] * e[i]);
        }
        let v = &xtx_inv * meat * &xtx_inv * (n as f64 / (n as f64 - 2.0));
        for a in 0..2 {
            for b in 0..2 {
                let rel = (fit.cov[(a, b)] - v[(a, b)]).abs() / v[(a, b)].abs().max(1e-12);
                assert!(rel < 1e-10, "entry ({a},{b})");
            }
        }
    }

    #[test]
    fn listwise_deletion_and_singleton_pruning() {
        let mut data = PanelData::new();
        data.add_numeric("y", vec![1.0, 2.0, 1.5, 2.5, 3.0, f64::NAN, 1.0])
            .unwrap();
        data.add_numeric("x", vec![0.3, -0.2, 0.9, 0.1, -0.5, 0.2, 0.4])
            .unwrap();
        data.add_categorical(
            "u",
            ["a", "a", "a", "a", "b", "a", "c"]
                .map(String::from)
                .to_vec(),
        )
        .unwrap();
        data.add_categorical(
            "p",
            ["x", "x", "y", "y", "y", "x", "z"]
                .map(String::from)
                .to_vec(),
        )
        .unwrap();
        // Row 5 has a missing outcome. Row 6 is a singleton in both u and
        // p. Row 4 is u-singleton "b"; dropping it leaves p-group y with
        // rows 2 and 3, so the cascade stops there.
        let fit = fit(
            &data,
            &FitSpec::new("y", &["x"]).with_fe(FixedEffectSpec::parse("u,p")),
        )
        .unwrap();
        assert_eq!(fit.n, 4);
        assert_eq!(fit.dropped_singletons, 2);
        assert_eq!(fit.kept_rows, vec![0, 1, 2, 3]);
    }

    #[test]
    fn cascading_singletons_are_counted() {
        let mut data = PanelData::new();
        data.add_numeric("y", vec![1.0, 2.0, 1.5, 2.5, 3.0]).unwrap();
        data.add_numeric("x", vec![0.3, -0.2, 0.9, 0.1, -0.5]).unwrap();
        data.add_categorical("u", ["a", "a", "a", "a", "b"].map(String::from).to_vec())
            .unwrap();
        data.add_categorical("p", ["x", "x", "x", "y", "y"].map(String::from).to_vec())
            .unwrap();
        // u-singleton row 4 drops first; that makes row 3 a p-singleton.
        let fit = fit(
            &data,
            &FitSpec::new("y", &["x"]).with_fe(FixedEffectSpec::parse("u,p")),
        )
        .unwrap();
        assert_eq!(fit.dropped_singletons, 2);
        assert_eq!(fit.n, 3);
    }

    #[test]
    fn error_paths() {
        let data = textbook();
        assert!(matches!(
            fit(&data, &FitSpec::new("z", &["x"])),
            Err(PanelError::UnknownColumn(_))
        ));
        assert!(matches!(
            fit(
                &data,
                &FitSpec::new("y", &["x"]).with_clusters(&["a", "b", "c"])
            ),
            Err(PanelError::TooManyClusters(3))
        ));

        let mut small = PanelData::new();
        small.add_numeric("y", vec![1.0, 2.0]).unwrap();
        small.add_numeric("x", vec![0.5, 1.5]).unwrap();
        assert!(matches!(
            fit(&small, &FitSpec::new("y", &["x"])),
            Err(PanelError::Underdetermined { .. })
        ));

        let mut clustered = textbook();
        clustered
            .add_categorical("all", vec!["g".into(); 5])
            .unwrap();
        assert!(matches!(
            fit(&clustered, &FitSpec::new("y", &["x"]).with_clusters(&["all"])),
            Err(PanelError::DegenerateCluster(_))
        ));

        let mut weighted = textbook();
        weighted
            .add_numeric("w", vec![1.0, 1.0, -2.0, 1.0, 1.0])
            .unwrap();
        assert!(matches!(
            fit(&weighted, &FitSpec::new("y", &["x"]).with_weights("w")),
            Err(PanelError::BadWeight { row: 2, .. })
        ));
    }

    #[test]
    fn lpm_constant_outcome_keeps_intercept_only() {
        let mut data = PanelData::new();
        data.add_numeric("won", vec![1.0; 6]).unwrap();
        data.add_numeric("d1", vec![1.0, 1.0, 0.0, 0.0, 1.0, 0.0])
            .unwrap();
        data.add_numeric("d2", vec![0.0, 0.0, 1.0, 1.0, 0.0, 1.0])
            .unwrap();
        let fit = fit_lpm(&data, &FitSpec::new("won", &["d1", "d2"])).unwrap();
        assert_eq!(fit.dropped.len(), 1);
        assert!(fit.terms.contains(&"const".to_string()));
        // All fitted values are 1: residuals vanish.
        for r in &fit.residuals {
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn lpm_separating_dummy_equals_mean_difference() {
        let mut data = PanelData::new();
        data.add_numeric("won", vec![1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        data.add_numeric("nego", vec![1.0, 1.0, 1.0, 0.0, 0.0]).unwrap();
        let fit = fit_lpm(&data, &FitSpec::new("won", &["nego"])).unwrap();
        // Group means: 2/3 under nego=1, 0 under nego=0.
        assert!((fit.coef("nego").unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(fit.coef("const").unwrap().abs() < 1e-12);

        let mut bad = PanelData::new();
        bad.add_numeric("won", vec![0.5, 1.0]).unwrap();
        bad.add_numeric("x", vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            fit_lpm(&bad, &FitSpec::new("won", &["x"])),
            Err(PanelError::NonBinary(_))
        ));
    }

    #[test]
    fn wald_and_diff_tests_follow_the_covariance() {
        let mut rng = SplitMix64::new(0xD1FF);
        let data = crossed_panel(&mut rng, 150, 6, 5, &[1.0, -0.5]);
        let fit = fit(
            &data,
            &FitSpec::new("y", &["x0", "x1"]).with_fe(FixedEffectSpec::parse("unit,period")),
        )
        .unwrap();

        let (w, p) = fit.wald_test(&["x0"]).unwrap();
        let t = fit.t_stats[fit.index_of("x0").unwrap()];
        assert!((w - t * t).abs() < 1e-10 * w.max(1.0));
        assert!((0.0..0.05).contains(&p));

        assert_eq!(fit.diff_test("x0", "x0").unwrap(), (0.0, 1.0));
        let (d_ab, p_ab) = fit.diff_test("x0", "x1").unwrap();
        let (d_ba, p_ba) = fit.diff_test("x1", "x0").unwrap();
        assert_eq!(d_ab, -d_ba);
        assert_eq!(p_ab, p_ba);

        let (ia, ib) = (fit.index_of("x0").unwrap(), fit.index_of("x1").unwrap());
        let var = fit.cov[(ia, ia)] + fit.cov[(ib, ib)] - 2.0 * fit.cov[(ia, ib)];
        let z = d_ab / var.sqrt();
        use statrs::distribution::Normal;
        let normal = Normal::new(0.0, 1.0).unwrap();
        assert!((p_ab - 2.0 * (1.0 - normal.cdf(z.abs()))).abs() < 1e-12);

        assert!(matches!(
            fit.diff_test("x0", "ghost"),
            Err(PanelError::MissingCoefficient(_))
        ));
    }
}
