//! Seed-reproducible synthetic data generators.
//!
//! Everything here is driven by [`SplitMix64`], a 64-bit counter-based
//! generator with a fixed algebraic definition, so a `(generator, seed)`
//! pair produces the same bytes on every platform and thread count.

/// SplitMix64 pseudo-random generator.
///
/// Reference implementation constants; passes the published test vectors
/// (seed 0 yields `0xE220A8397B1DCDAF`, `0x6E789E6AA1B965F4`, ...).
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in the open interval `(0, 1)`.
    pub fn next_open_f64(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via the inverse-CDF transform.
    pub fn next_normal(&mut self) -> f64 {
        normal_inverse_cdf(self.next_open_f64())
    }

    /// Uniform draw from `0..n`.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.next_u64() % n
    }

    /// Derive an independent child generator; decorrelates substreams so
    /// adding draws to one stream does not shift another.
    pub fn fork(&mut self, tag: u64) -> SplitMix64 {
        SplitMix64::new(self.next_u64() ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

/// Inverse standard-normal CDF (Acklam's rational approximation).
///
/// Absolute error below 1e-8 across `(0, 1)`; defined entirely by fixed
/// polynomial coefficients plus `ln` and `sqrt`, so it carries the
/// generator's reproducibility through to normal variates.
pub fn normal_inverse_cdf(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "inverse CDF needs p in (0,1), got {p}");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - P_LOW {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}


use chrono::NaiveDate;
use std::collections::HashMap;

use crate::bonds::Bond;
use crate::panel::PanelData;
use crate::trades::{CleanReport, DateWindow, Side, TradeRecord};
use crate::util::fmt_sig10;

/// Ground-truth data generating process for a unit-by-period panel.
///
/// The outcome is the sum of unit, period, and pair effects, known control
/// loadings, the treatment effect after `post_start`, an optional
/// differential trend for treated units, a unit-level shock redrawn once
/// per regime (the within-cluster correlation), and idiosyncratic noise.
#[derive(Debug, Clone)]
pub struct PanelDgp {
    pub seed: u64,
    pub n_units: usize,
    pub n_periods: usize,
    /// True treatment effect in basis points.
    pub beta_bps: f64,
    pub unit_fe_sd: f64,
    pub time_fe_sd: f64,
    pub pair_fe_sd: f64,
    pub noise_sd: f64,
    /// Scale of the per-regime unit shock shared within a cluster.
    pub cluster_sd: f64,
    /// Probability a unit is treated.
    pub treated_share: f64,
    /// First post-treatment period index.
    pub post_start: usize,
    /// Per-period drift added to treated units, zero for parallel trends.
    pub pre_trend_slope: f64,
    /// Observed controls with loadings 1/(j+1).
    pub n_controls: usize,
}

impl PanelDgp {
    pub fn new(seed: u64, n_units: usize, n_periods: usize) -> Self {
        Self {
            seed,
            n_units,
            n_periods,
            beta_bps: 15.25,
            unit_fe_sd: 4.0,
            time_fe_sd: 2.0,
            pair_fe_sd: 2.0,
            noise_sd: 6.0,
            cluster_sd: 4.0,
            treated_share: 0.5,
            post_start: n_periods / 2,
            pre_trend_slope: 0.0,
            n_controls: 2,
        }
    }

    pub fn control_loading(&self, j: usize) -> f64 {
        1.0 / (j + 1) as f64
    }
}

/// Simulate the panel described by `dgp`.
///
/// Numeric columns: `y`, `treat`, `post`, `treat_x_post`, `event_time`,
/// and `x0..`; categorical columns: `unit`, `period`, `pair`. The manifest
/// lists every true parameter as `key=value` lines, one per line.
pub fn gen_panel(dgp: &PanelDgp) -> (PanelData, String) {
    assert!(dgp.n_units >= 2 && dgp.n_periods >= 2);
    let mut rng = SplitMix64::new(dgp.seed);
    let unit_fe: Vec<f64> = (0..dgp.n_units)
        .map(|_| rng.next_normal() * dgp.unit_fe_sd)
        .collect();
    let time_fe: Vec<f64> = (0..dgp.n_periods)
        .map(|_| rng.next_normal() * dgp.time_fe_sd)
        .collect();
    let n_pairs = dgp.n_units.div_ceil(2);
    let pair_fe: Vec<f64> = (0..n_pairs)
        .map(|_| rng.next_normal() * dgp.pair_fe_sd)
        .collect();
    let treated: Vec<bool> = (0..dgp.n_units)
        .map(|_| rng.next_f64() < dgp.treated_share)
        .collect();
    let shocks: Vec<(f64, f64)> = (0..dgp.n_units)
        .map(|_| {
            (
                rng.next_normal() * dgp.cluster_sd,
                rng.next_normal() * dgp.cluster_sd,
            )
        })
        .collect();

    let n = dgp.n_units * dgp.n_periods;
    let mut y = Vec::with_capacity(n);
    let mut treat_col = Vec::with_capacity(n);
    let mut post_col = Vec::with_capacity(n);
    let mut inter_col = Vec::with_capacity(n);
    let mut event_time = Vec::with_capacity(n);
    let mut xs: Vec<Vec<f64>> = vec![Vec::with_capacity(n); dgp.n_controls];
    let mut unit_col = Vec::with_capacity(n);
    let mut period_col = Vec::with_capacity(n);
    let mut pair_col = Vec::with_capacity(n);
    for u in 0..dgp.n_units {
        for t in 0..dgp.n_periods {
            let is_post = t >= dgp.post_start;
            let et = t as f64 - dgp.post_start as f64;
            let mut value = unit_fe[u] + time_fe[t] + pair_fe[u / 2];
            for (j, col) in xs.iter_mut().enumerate() {
                let x = rng.next_normal();
                value += dgp.control_loading(j) * x;
                col.push(x);
            }
            if treated[u] && is_post {
                value += dgp.beta_bps;
            }
            if treated[u] {
                value += dgp.pre_trend_slope * et;
            }
            value += if is_post { shocks[u].1 } else { shocks[u].0 };
            value += rng.next_normal() * dgp.noise_sd;
            y.push(value);
            treat_col.push(if treated[u] { 1.0 } else { 0.0 });
            post_col.push(if is_post { 1.0 } else { 0.0 });
            inter_col.push(if treated[u] && is_post { 1.0 } else { 0.0 });
            event_time.push(et);
            unit_col.push(format!("u{u}"));
            period_col.push(format!("t{t}"));
            pair_col.push(format!("g{}", u / 2));
        }
    }

    let mut data = PanelData::new();
    data.add_numeric("y", y).expect("fresh table");
    data.add_numeric("treat", treat_col).expect("fresh table");
    data.add_numeric("post", post_col).expect("fresh table");
    data.add_numeric("treat_x_post", inter_col).expect("fresh table");
    data.add_numeric("event_time", event_time).expect("fresh table");
    for (j, col) in xs.into_iter().enumerate() {
        data.add_numeric(&format!("x{j}"), col).expect("fresh table");
    }
    data.add_categorical("unit", unit_col).expect("fresh table");
    data.add_categorical("period", period_col).expect("fresh table");
    data.add_categorical("pair", pair_col).expect("fresh table");

    let n_treated = treated.iter().filter(|t| **t).count();
    let mut manifest = String::new();
    manifest.push_str("generator=splitmix64\n");
    manifest.push_str(&format!("seed={}\n", dgp.seed));
    manifest.push_str(&format!("n_units={}\n", dgp.n_units));
    manifest.push_str(&format!("n_periods={}\n", dgp.n_periods));
    manifest.push_str(&format!("beta_bps={}\n", fmt_sig10(dgp.beta_bps)));
    manifest.push_str(&format!("unit_fe_sd={}\n", fmt_sig10(dgp.unit_fe_sd)));
    manifest.push_str(&format!("time_fe_sd={}\n", fmt_sig10(dgp.time_fe_sd)));
    manifest.push_str(&format!("pair_fe_sd={}\n", fmt_sig10(dgp.pair_fe_sd)));
    manifest.push_str(&format!("noise_sd={}\n", fmt_sig10(dgp.noise_sd)));
    manifest.push_str(&format!("cluster_sd={}\n", fmt_sig10(dgp.cluster_sd)));
    manifest.push_str(&format!("treated_share={}\n", fmt_sig10(dgp.treated_share)));
    manifest.push_str(&format!("post_start={}\n", dgp.post_start));
    manifest.push_str(&format!(
        "pre_trend_slope={}\n",
        fmt_sig10(dgp.pre_trend_slope)
    ));
    manifest.push_str(&format!("n_controls={}\n", dgp.n_controls));
    for j in 0..dgp.n_controls {
        manifest.push_str(&format!(
            "control_loading_{j}={}\n",
            fmt_sig10(dgp.control_loading(j))
        ));
    }
    manifest.push_str(&format!("treated_units={n_treated}\n"));
    (data, manifest)
}

/// How many otherwise-clean trades each thin cusip gets; below the
/// ten-trade survival floor by construction.
pub const THIN_CUSIP_TRADES: usize = 3;

/// Clean trades generated per ordinary bond; above the survival floor.
pub const CLEAN_TRADES_PER_BOND: usize = 12;

/// Exact counts of planted cleaning violations, one field per rule in
/// pipeline order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ViolationRecipe {
    pub unmatched_cusip: usize,
    pub bad_maturity: usize,
    pub missing_coupon: usize,
    pub bad_price: usize,
    pub primary_market: usize,
    pub near_issuance: usize,
    pub short_remaining: usize,
    pub bad_yield: usize,
    /// Number of cusips that keep [`THIN_CUSIP_TRADES`] clean trades, all
    /// of which the survival rule must drop.
    pub thin_cusips: usize,
}

/// One generated market: reference data, raw trades, the sample window,
/// and the report the cleaning pass must reproduce.
#[derive(Debug, Clone)]
pub struct SynthTrades {
    pub bonds: HashMap<String, Bond>,
    pub trades: Vec<TradeRecord>,
    pub window: DateWindow,
    pub expected: CleanReport,
}

fn synth_bond(cusip: &str, dated: NaiveDate, maturity: Option<NaiveDate>, coupon: Option<f64>) -> Bond {
    Bond {
        cusip: cusip.to_string(),
        dated_date: dated,
        maturity_date: maturity,
        coupon_rate: coupon,
        amount_issued: Some(5_000_000.0),
        offering_price: Some(100.0),
        offering_yield: Some(0.03),
        sale_method: None,
        callable: false,
        insured: false,
        general_obligation: true,
        bank_qualified: false,
        refunding: false,
        credit_enhanced: false,
        tax_exempt_federal: true,
        tax_exempt_state: true,
        state: "TX".to_string(),
        county_fips: Some("48201".to_string()),
        rating: Some(25),
    }
}

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).expect("valid date")
}

/// Plant exact violation counts on dedicated bonds next to `n_bonds` clean
/// ones and report, by construction, what cleaning must find.
///
/// Every clean trade falls inside the returned window, more than 15 days
/// after issuance, with over a year to maturity, an in-range price, and an
/// in-range yield; each violation trade fails exactly its intended rule
/// first.
pub fn gen_trades(seed: u64, n_bonds: usize, recipe: &ViolationRecipe) -> SynthTrades {
    let mut rng = SplitMix64::new(seed);
    let window = DateWindow::new(d(2012, 1, 1), d(2014, 12, 31)).expect("ordered window");
    let clean_dated = d(2011, 6, 1);
    let clean_maturity = d(2030, 6, 1);
    let mut bonds = HashMap::new();
    let mut trades = Vec::new();

    let sides = [Side::CustomerBuy, Side::CustomerSell, Side::Interdealer];
    let clean_trade = |rng: &mut SplitMix64, cusip: &str, k: usize| TradeRecord {
        cusip: cusip.to_string(),
        trade_date: d(2012, 2, 1) + chrono::Duration::days(rng.next_below(1000) as i64),
        price: 90.0 + rng.next_f64() * 20.0,
        yield_: 0.01 + rng.next_f64() * 0.04,
        par_volume: 5_000.0 * (1 + rng.next_below(100)) as f64,
        side: sides[k % 3],
    };

    for b in 0..n_bonds {
        let cusip = format!("CLEAN{b:04}");
        bonds.insert(
            cusip.clone(),
            synth_bond(&cusip, clean_dated, Some(clean_maturity), Some(0.04)),
        );
        for k in 0..CLEAN_TRADES_PER_BOND {
            trades.push(clean_trade(&mut rng, &cusip, k));
        }
    }

    for i in 0..recipe.unmatched_cusip {
        let mut t = clean_trade(&mut rng, &format!("GHOST{:03}", i % 1000), i);
        t.cusip = format!("GHOST{i:03}");
        trades.push(t);
    }

    if recipe.bad_maturity > 0 {
        let cusip = "FARMAT00".to_string();
        bonds.insert(
            cusip.clone(),
            synth_bond(&cusip, clean_dated, Some(d(2120, 1, 1)), Some(0.04)),
        );
        for k in 0..recipe.bad_maturity {
            trades.push(clean_trade(&mut rng, &cusip, k));
        }
    }

    if recipe.missing_coupon > 0 {
        let cusip = "NOCPN000".to_string();
        bonds.insert(
            cusip.clone(),
            synth_bond(&cusip, clean_dated, Some(clean_maturity), None),
        );
        for k in 0..recipe.missing_coupon {
            trades.push(clean_trade(&mut rng, &cusip, k));
        }
    }

    if recipe.bad_price > 0 {
        let cusip = "BADPX000".to_string();
        bonds.insert(
            cusip.clone(),
            synth_bond(&cusip, clean_dated, Some(clean_maturity), Some(0.04)),
        );
        for k in 0..recipe.bad_price {
            let mut t = clean_trade(&mut rng, &cusip, k);
            t.price = 30.0;
            trades.push(t);
        }
    }

    if recipe.primary_market > 0 {
        let cusip = "PRIMRY00".to_string();
        let dated = d(2012, 6, 1);
        bonds.insert(
            cusip.clone(),
            synth_bond(&cusip, dated, Some(clean_maturity), Some(0.04)),
        );
        for k in 0..recipe.primary_market {
            let mut t = clean_trade(&mut rng, &cusip, k);
            t.trade_date = dated;
            trades.push(t);
        }
    }

    if recipe.near_issuance > 0 {
        let cusip = "NEARIS00".to_string();
        let dated = d(2012, 6, 1);
        bonds.insert(
            cusip.clone(),
            synth_bond(&cusip, dated, Some(clean_maturity), Some(0.04)),
        );
        for k in 0..recipe.near_issuance {
            let mut t = clean_trade(&mut rng, &cusip, k);
            t.trade_date = dated + chrono::Duration::days(10);
            trades.push(t);
        }
    }

    if recipe.short_remaining > 0 {
        let cusip = "SHORTM00".to_string();
        bonds.insert(
            cusip.clone(),
            synth_bond(&cusip, clean_dated, Some(d(2013, 6, 1)), Some(0.04)),
        );
        for k in 0..recipe.short_remaining {
            let mut t = clean_trade(&mut rng, &cusip, k);
            t.trade_date = d(2012, 12, 1);
            trades.push(t);
        }
    }

    if recipe.bad_yield > 0 {
        let cusip = "BADYLD00".to_string();
        bonds.insert(
            cusip.clone(),
            synth_bond(&cusip, clean_dated, Some(clean_maturity), Some(0.04)),
        );
        for k in 0..recipe.bad_yield {
            let mut t = clean_trade(&mut rng, &cusip, k);
            t.yield_ = 0.75;
            trades.push(t);
        }
    }

    for i in 0..recipe.thin_cusips {
        let cusip = format!("THIN{i:04}");
        bonds.insert(
            cusip.clone(),
            synth_bond(&cusip, clean_dated, Some(clean_maturity), Some(0.04)),
        );
        for k in 0..THIN_CUSIP_TRADES {
            trades.push(clean_trade(&mut rng, &cusip, k));
        }
    }

    let expected = CleanReport {
        input: trades.len(),
        dropped: [
            recipe.unmatched_cusip,
            recipe.bad_maturity,
            recipe.missing_coupon,
            recipe.bad_price,
            recipe.primary_market,
            recipe.near_issuance,
            recipe.short_remaining,
            recipe.bad_yield,
            recipe.thin_cusips * THIN_CUSIP_TRADES,
        ],
        survivors: n_bonds * CLEAN_TRADES_PER_BOND,
        surviving_cusips: n_bonds,
    };
    SynthTrades {
        bonds,
        trades,
        window,
        expected,
    }
}

#[cfg(test)]
mod gen_tests {
    use super::*;
    use crate::panel::{
        build_event_study, demean, fit, BucketWidth, FitSpec, FixedEffectSpec,
    };
    use crate::trades::clean;

    #[test]
    fn gen_panel_is_seed_reproducible() {
        let dgp = PanelDgp::new(42, 10, 8);
        let (a, ma) = gen_panel(&dgp);
        let (b, mb) = gen_panel(&dgp);
        assert_eq!(ma, mb);
        for col in ["y", "treat", "post", "treat_x_post", "event_time", "x0", "x1"] {
            assert_eq!(a.numeric(col).unwrap(), b.numeric(col).unwrap());
        }
        let (c, _) = gen_panel(&PanelDgp::new(43, 10, 8));
        assert_ne!(a.numeric("y").unwrap(), c.numeric("y").unwrap());
        assert!(ma.contains("beta_bps=15.25000000"));
        assert!(ma.contains("generator=splitmix64"));
    }

    #[test]
    fn zero_beta_zero_noise_absorbs_to_nothing() {
        let mut dgp = PanelDgp::new(7, 12, 10);
        dgp.beta_bps = 0.0;
        dgp.noise_sd = 0.0;
        dgp.cluster_sd = 0.0;
        dgp.n_controls = 0;
        let (data, _) = gen_panel(&dgp);
        let fe = FixedEffectSpec::parse("unit,period");
        let (cols, _) = demean(&data, &["y"], &fe, None, 1e-12, 10_000).unwrap();
        for v in &cols[0] {
            assert!(v.abs() < 1e-8, "residual signal {v}");
        }
    }

    #[test]
    fn treatment_effect_recovered_across_reps() {
        let mut estimates = Vec::new();
        for rep in 0..200 {
            let dgp = PanelDgp::new(1_000 + rep, 30, 12);
            let (data, _) = gen_panel(&dgp);
            let spec = FitSpec::new("y", &["treat_x_post", "x0", "x1"])
                .with_fe(FixedEffectSpec::parse("unit,period"))
                .with_clusters(&["unit"]);
            let fit = fit(&data, &spec).unwrap();
            estimates.push(fit.coef("treat_x_post").unwrap());
        }
        let n = estimates.len() as f64;
        let mean = estimates.iter().sum::<f64>() / n;
        let var = estimates.iter().map(|b| (b - mean) * (b - mean)).sum::<f64>() / (n - 1.0);
        let mc_se = (var / n).sqrt();
        assert!(
            (mean - 15.25).abs() < 3.0 * mc_se,
            "mean {mean} mc_se {mc_se}"
        );
    }

    #[test]
    fn flat_pre_trend_rarely_rejects_the_joint_pre_test() {
        let mut rejections = 0;
        let reps = 100;
        for rep in 0..reps {
            let dgp = PanelDgp::new(50_000 + rep, 40, 24);
            let (mut data, _) = gen_panel(&dgp);
            let cols = build_event_study(
                &mut data,
                "treat",
                "event_time",
                BucketWidth::Quarter,
                -1,
                None,
            )
            .unwrap();
            // With a single common event date the control-cohort dummies
            // are spanned by period effects, so only the treated cohort's
            // path is estimable.
            let regressors: Vec<&str> = cols
                .dummies
                .iter()
                .filter(|name| name.starts_with("ev_treat_"))
                .map(String::as_str)
                .collect();
            let spec = FitSpec::new("y", &regressors)
                .with_fe(FixedEffectSpec::parse("unit,period"))
                .with_clusters(&["unit"]);
            let fit = fit(&data, &spec).unwrap();
            let pre_terms: Vec<&str> = cols
                .dummies
                .iter()
                .filter(|name| name.starts_with("ev_treat_m"))
                .map(String::as_str)
                .collect();
            assert!(!pre_terms.is_empty());
            let (_, p) = fit.wald_test(&pre_terms).unwrap();
            if p < 0.05 {
                rejections += 1;
            }
        }
        assert!(
            rejections * 10 <= reps,
            "rejected {rejections} of {reps}"
        );
    }

    #[test]
    fn zero_violations_pass_through_cleaning() {
        let market = gen_trades(11, 3, &ViolationRecipe::default());
        let (survivors, report) = clean(&market.trades, &market.bonds, &market.window);
        assert_eq!(report, market.expected);
        assert_eq!(survivors.len(), market.trades.len());
        assert_eq!(report.dropped, [0; 9]);
    }

    #[test]
    fn five_bad_prices_land_on_the_price_rule() {
        let recipe = ViolationRecipe {
            bad_price: 5,
            ..ViolationRecipe::default()
        };
        let market = gen_trades(12, 2, &recipe);
        let (_, report) = clean(&market.trades, &market.bonds, &market.window);
        assert_eq!(report.dropped[3], 5);
        assert_eq!(report, market.expected);
    }

    #[test]
    fn mixed_recipe_report_matches_construction_and_is_idempotent() {
        let recipe = ViolationRecipe {
            unmatched_cusip: 2,
            bad_maturity: 3,
            missing_coupon: 1,
            bad_price: 5,
            primary_market: 2,
            near_issuance: 4,
            short_remaining: 1,
            bad_yield: 2,
            thin_cusips: 2,
        };
        let market = gen_trades(13, 4, &recipe);
        let (survivors, report) = clean(&market.trades, &market.bonds, &market.window);
        assert_eq!(report, market.expected);
        assert_eq!(
            report.dropped,
            [2, 3, 1, 5, 2, 4, 1, 2, 2 * THIN_CUSIP_TRADES]
        );

        let (again, second) = clean(&survivors, &market.bonds, &market.window);
        assert_eq!(second.total_dropped(), 0);
        assert_eq!(again, survivors);
    }

    #[test]
    fn gen_trades_is_seed_reproducible() {
        let recipe = ViolationRecipe {
            bad_price: 2,
            thin_cusips: 1,
            ..ViolationRecipe::default()
        };
        let a = gen_trades(99, 2, &recipe);
        let b = gen_trades(99, 2, &recipe);
        assert_eq!(a.trades, b.trades);
        assert_eq!(a.expected, b.expected);
        let c = gen_trades(100, 2, &recipe);
        assert_ne!(a.trades, c.trades);
    }
}
