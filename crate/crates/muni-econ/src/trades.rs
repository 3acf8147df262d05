//! Trade ingestion: the nine-rule cleaning pipeline and volume-weighted
//! CUSIP-month aggregation.

use chrono::{Datelike, NaiveDate};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

use crate::bonds::{cashflows, Bond, BondError};
use crate::curve::ZeroCurve;
use crate::spreads::{compute_spreads, SpreadError, SpreadResult, TaxRegime};
use crate::util::{month_end, pairwise_sum_by, year_fraction};

#[derive(Debug, Error)]
pub enum TradeError {
    #[error("window start {start} is after end {end}")]
    BadWindow { start: NaiveDate, end: NaiveDate },
    #[error("trade references cusip {0} with no bond record")]
    MissingBond(String),
    #[error(transparent)]
    Bond(#[from] BondError),
    #[error(transparent)]
    Spread(#[from] SpreadError),
}

/// Transaction side as reported in the source feed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    CustomerBuy,
    CustomerSell,
    Interdealer,
}

impl Side {
    /// Parse the one-letter feed code: P buys, S sells, D interdealer.
    pub fn parse(code: &str) -> Option<Self> {
        match code.trim() {
            "P" => Some(Self::CustomerBuy),
            "S" => Some(Self::CustomerSell),
            "D" => Some(Self::Interdealer),
            _ => None,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::CustomerBuy => "P",
            Self::CustomerSell => "S",
            Self::Interdealer => "D",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::CustomerBuy => "customer_buy",
            Self::CustomerSell => "customer_sell",
            Self::Interdealer => "interdealer",
        }
    }
}

/// One raw transaction.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeRecord {
    pub cusip: String,
    pub trade_date: NaiveDate,
    /// Clean price per 100 face.
    pub price: f64,
    /// Reported yield as a decimal.
    pub yield_: f64,
    pub par_volume: f64,
    pub side: Side,
}

/// Inclusive calendar window defining the sample period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DateWindow {
    start: NaiveDate,
    end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, TradeError> {
        if start > end {
            return Err(TradeError::BadWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn end(&self) -> NaiveDate {
        self.end
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }
}

pub const CLEAN_RULE_LABELS: [&str; 9] = [
    "unmatched cusip",
    "maturity over 36500 days, negative, or missing",
    "missing coupon or maturity",
    "price below 50 or above 150",
    "primary market trade",
    "within 15 days of issuance",
    "under one year to maturity",
    "yield negative or above 50 percent",
    "cusip with fewer than 10 trades",
];

/// Per-rule accounting for one cleaning pass. Drops are attributed to the
/// first rule a record fails, in pipeline order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanReport {
    pub input: usize,
    /// Dropped counts aligned with [`CLEAN_RULE_LABELS`].
    pub dropped: [usize; 9],
    pub survivors: usize,
    pub surviving_cusips: usize,
}

impl CleanReport {
    pub fn total_dropped(&self) -> usize {
        self.dropped.iter().sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = (&'static str, usize)> + '_ {
        CLEAN_RULE_LABELS.iter().copied().zip(self.dropped)
    }
}

fn first_failing_rule(trade: &TradeRecord, bond: Option<&Bond>) -> Option<usize> {
    let Some(bond) = bond else { return Some(0) };
    let maturity_days = bond
        .maturity_date
        .map(|m| (m - trade.trade_date).num_days());
    match maturity_days {
        None => return Some(1),
        Some(d) if d > 36_500 || d < 0 => return Some(1),
        Some(_) => {}
    }
    if bond.coupon_rate.is_none() || bond.maturity_date.is_none() {
        return Some(2);
    }
    if trade.price < 50.0 || trade.price > 150.0 {
        return Some(3);
    }
    if trade.trade_date <= bond.dated_date {
        return Some(4);
    }
    let since_dated = (trade.trade_date - bond.dated_date).num_days();
    if since_dated > 0 && since_dated <= 15 {
        return Some(5);
    }
    let maturity = bond.maturity_date.expect("checked above");
    if year_fraction(trade.trade_date, maturity) < 1.0 {
        return Some(6);
    }
    if trade.yield_ < 0.0 || trade.yield_ > 0.50 {
        return Some(7);
    }
    None
}

/// Apply the nine cleaning rules in order and account for every record.
///
/// Rules 1-8 test each trade against its bond record; rule 9 then removes
/// every trade of any cusip with fewer than 10 surviving trades inside
/// `window`. Survivors keep their input order, so the pass is idempotent.
pub fn clean(
    trades: &[TradeRecord],
    bonds: &HashMap<String, Bond>,
    window: &DateWindow,
) -> (Vec<TradeRecord>, CleanReport) {
    let mut dropped = [0usize; 9];
    let mut stage_one: Vec<&TradeRecord> = Vec::with_capacity(trades.len());
    for trade in trades {
        match first_failing_rule(trade, bonds.get(&trade.cusip)) {
            Some(rule) => dropped[rule] += 1,
            None => stage_one.push(trade),
        }
    }

    let mut in_window: HashMap<&str, usize> = HashMap::new();
    for trade in &stage_one {
        if window.contains(trade.trade_date) {
            *in_window.entry(trade.cusip.as_str()).or_insert(0) += 1;
        }
    }

    let mut survivors = Vec::with_capacity(stage_one.len());
    for trade in stage_one {
        if in_window.get(trade.cusip.as_str()).copied().unwrap_or(0) >= 10 {
            survivors.push(trade.clone());
        } else {
            dropped[8] += 1;
        }
    }

    let mut cusips: Vec<&str> = survivors.iter().map(|t| t.cusip.as_str()).collect();
    cusips.sort_unstable();
    cusips.dedup();
    let report = CleanReport {
        input: trades.len(),
        dropped,
        survivors: survivors.len(),
        surviving_cusips: cusips.len(),
    };
    debug_assert_eq!(report.input, report.survivors + report.total_dropped());
    (survivors, report)
}

/// One CUSIP-month observation after aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct BondMonthObs {
    pub cusip: String,
    pub year: i32,
    pub month: u32,
    pub vw_yield: f64,
    pub vw_price: f64,
    pub total_volume: f64,
    pub n_trades: usize,
    /// Years to maturity measured at the month's last calendar day.
    pub remaining_maturity_years: f64,
    pub spread: Option<SpreadResult>,
}

impl BondMonthObs {
    /// Last calendar day of the observation month.
    pub fn obs_date(&self) -> NaiveDate {
        month_end(self.year, self.month)
    }
}

/// Aggregate cleaned trades to volume-weighted CUSIP-month observations.
///
/// Only trades whose side appears in `sides` contribute; pass
/// `&[Side::CustomerBuy]` for the default customer-purchase sample. Output
/// is sorted by cusip, then month.
pub fn aggregate_monthly(
    trades: &[TradeRecord],
    bonds: &HashMap<String, Bond>,
    sides: &[Side],
) -> Result<Vec<BondMonthObs>, TradeError> {
    let mut groups: BTreeMap<(String, i32, u32), Vec<&TradeRecord>> = BTreeMap::new();
    for trade in trades {
        if !sides.contains(&trade.side) {
            continue;
        }
        let key = (
            trade.cusip.clone(),
            trade.trade_date.year(),
            trade.trade_date.month(),
        );
        groups.entry(key).or_default().push(trade);
    }

    let mut out = Vec::with_capacity(groups.len());
    for ((cusip, year, month), members) in groups {
        let bond = bonds
            .get(&cusip)
            .ok_or_else(|| TradeError::MissingBond(cusip.clone()))?;
        let total_volume = pairwise_sum_by(members.len(), |i| members[i].par_volume);
        let vw_yield =
            pairwise_sum_by(members.len(), |i| members[i].yield_ * members[i].par_volume)
                / total_volume;
        let vw_price =
            pairwise_sum_by(members.len(), |i| members[i].price * members[i].par_volume)
                / total_volume;
        let obs_date = month_end(year, month);
        let remaining_maturity_years = bond.remaining_maturity_years(obs_date)?;
        out.push(BondMonthObs {
            cusip,
            year,
            month,
            vw_yield,
            vw_price,
            total_volume,
            n_trades: members.len(),
            remaining_maturity_years,
            spread: None,
        });
    }
    Ok(out)
}

/// Months that had no usable curve during [`attach_spreads`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AttachReport {
    pub attached: usize,
    /// (year, month) keys left without spreads, deduplicated and sorted.
    pub missing_curve_months: Vec<(i32, u32)>,
}

fn nearest_curve<'c>(curves: &'c [ZeroCurve], target: NaiveDate) -> Option<&'c ZeroCurve> {
    let mut best: Option<(&ZeroCurve, i64)> = None;
    for curve in curves {
        let gap = (curve.as_of() - target).num_days().abs();
        if gap > 31 {
            continue;
        }
        let better = match best {
            None => true,
            Some((incumbent, best_gap)) => {
                gap < best_gap || (gap == best_gap && curve.as_of() < incumbent.as_of())
            }
        };
        if better {
            best = Some((curve, gap));
        }
    }
    best.map(|(c, _)| c)
}

/// Fill each observation's spread fields from the nearest monthly curve
/// (as-of within 31 days of the month end) and the bond's tax treatment.
/// Months with no curve in range are reported, not fatal; their rows keep
/// empty spread fields.
pub fn attach_spreads(
    obs: &mut [BondMonthObs],
    curves: &[ZeroCurve],
    regime: &TaxRegime,
    bonds: &HashMap<String, Bond>,
) -> Result<AttachReport, TradeError> {
    let mut report = AttachReport::default();
    for row in obs.iter_mut() {
        let bond = bonds
            .get(&row.cusip)
            .ok_or_else(|| TradeError::MissingBond(row.cusip.clone()))?;
        let obs_date = row.obs_date();
        let Some(curve) = nearest_curve(curves, obs_date) else {
            report.missing_curve_months.push((row.year, row.month));
            continue;
        };
        let schedule = cashflows(bond, obs_date)?;
        let riskfree = curve
            .coupon_equivalent_riskfree_yield(&schedule)
            .map_err(BondError::from)?;
        let retention = regime.retention_for_bond(bond, row.year)?;
        row.spread = Some(compute_spreads(row.vw_yield, riskfree, retention));
        report.attached += 1;
    }
    report.missing_curve_months.sort_unstable();
    report.missing_curve_months.dedup();
    Ok(report)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::bonds::SaleMethod;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    pub(crate) fn test_bond(cusip: &str, dated: NaiveDate, maturity: NaiveDate) -> Bond {
        Bond {
            cusip: cusip.into(),
            dated_date: dated,
            maturity_date: Some(maturity),
            coupon_rate: Some(0.05),
            amount_issued: Some(5_000_000.0),
            offering_price: Some(100.0),
            offering_yield: Some(0.05),
            sale_method: Some(SaleMethod::Competitive),
            callable: false,
            insured: false,
            general_obligation: true,
            bank_qualified: false,
            refunding: false,
            credit_enhanced: false,
            tax_exempt_federal: true,
            tax_exempt_state: true,
            state: "TX".into(),
            county_fips: Some("48201".into()),
            rating: Some(25),
        }
    }

    fn trade(cusip: &str, date: NaiveDate, price: f64, yld: f64, vol: f64) -> TradeRecord {
        TradeRecord {
            cusip: cusip.into(),
            trade_date: date,
            price,
            yield_: yld,
            par_volume: vol,
            side: Side::CustomerBuy,
        }
    }

    fn window() -> DateWindow {
        DateWindow::new(d(2010, 1, 1), d(2019, 12, 31)).unwrap()
    }

    fn base_bonds() -> HashMap<String, Bond> {
        let mut bonds = HashMap::new();
        bonds.insert(
            "GOOD00001".to_string(),
            test_bond("GOOD00001", d(2009, 6, 1), d(2030, 6, 1)),
        );
        bonds
    }

    fn ten_good_trades() -> Vec<TradeRecord> {
        (0..10)
            .map(|i| {
                trade(
                    "GOOD00001",
                    d(2011, 3, 1 + i),
                    100.0 + i as f64 * 0.1,
                    0.03,
                    10_000.0,
                )
            })
            .collect()
    }

    #[test]
    fn side_parsing_round_trips() {
        for code in ["P", "S", "D"] {
            assert_eq!(Side::parse(code).unwrap().code(), code);
        }
        assert_eq!(Side::parse("P"), Some(Side::CustomerBuy));
        assert_eq!(Side::parse("S"), Some(Side::CustomerSell));
        assert_eq!(Side::parse("D"), Some(Side::Interdealer));
        assert_eq!(Side::parse("X"), None);
    }

    #[test]
    fn clean_attributes_each_rule_once() {
        let bonds = {
            let mut b = base_bonds();
            b.insert(
                "LONG00001".to_string(),
                test_bond("LONG00001", d(2009, 6, 1), d(2111, 7, 1)),
            );
            let mut no_coupon = test_bond("NOCPN0001", d(2009, 6, 1), d(2030, 6, 1));
            no_coupon.coupon_rate = None;
            b.insert("NOCPN0001".to_string(), no_coupon);
            let mut no_mat = test_bond("NOMAT0001", d(2009, 6, 1), d(2030, 6, 1));
            no_mat.maturity_date = None;
            b.insert("NOMAT0001".to_string(), no_mat);
            b
        };
        let mut trades = ten_good_trades();
        trades.push(trade("GHOST0001", d(2011, 5, 1), 100.0, 0.03, 1e4));
        trades.push(trade("LONG00001", d(2011, 5, 1), 100.0, 0.03, 1e4));
        trades.push(trade("NOMAT0001", d(2011, 5, 1), 100.0, 0.03, 1e4));
        trades.push(trade("NOCPN0001", d(2011, 5, 1), 100.0, 0.03, 1e4));
        trades.push(trade("GOOD00001", d(2011, 5, 1), 45.0, 0.03, 1e4));
        trades.push(trade("GOOD00001", d(2011, 5, 1), 151.0, 0.03, 1e4));
        trades.push(trade("GOOD00001", d(2009, 6, 1), 100.0, 0.03, 1e4));
        trades.push(trade("GOOD00001", d(2009, 6, 11), 100.0, 0.03, 1e4));
        trades.push(trade("GOOD00001", d(2029, 12, 1), 100.0, 0.03, 1e4));
        trades.push(trade("GOOD00001", d(2011, 5, 1), 100.0, -0.001, 1e4));
        trades.push(trade("GOOD00001", d(2011, 5, 1), 100.0, 0.51, 1e4));

        let (survivors, report) = clean(&trades, &bonds, &window());
        assert_eq!(report.input, 21);
        // Missing maturity dies at the maturity-window rule, ahead of the
        // missing-field rule; both yield outliers land on one rule.
        assert_eq!(report.dropped, [1, 2, 1, 2, 1, 1, 1, 2, 0]);
        assert_eq!(survivors.len(), 10);
        assert_eq!(report.survivors, 10);
        assert_eq!(report.surviving_cusips, 1);
        assert_eq!(report.input, report.survivors + report.total_dropped());
    }

    #[test]
    fn clean_rule_boundaries() {
        let bonds = base_bonds();
        let mut trades = ten_good_trades();
        // Boundary values that all survive rules 1-8.
        trades.push(trade("GOOD00001", d(2011, 4, 1), 50.0, 0.0, 1e4));
        trades.push(trade("GOOD00001", d(2011, 4, 2), 150.0, 0.50, 1e4));
        // Day 16 after issuance survives rule 6; day 15 does not.
        trades.push(trade("GOOD00001", d(2009, 6, 17), 100.0, 0.03, 1e4));
        trades.push(trade("GOOD00001", d(2009, 6, 16), 100.0, 0.03, 1e4));

        let (survivors, report) = clean(&trades, &bonds, &window());
        assert_eq!(report.dropped[5], 1);
        assert_eq!(survivors.len(), 13);

        // 365 days to maturity is under one year under ACT/365.25.
        let mut short = ten_good_trades();
        short.push(trade("GOOD00001", d(2029, 6, 1), 100.0, 0.03, 1e4));
        let (_, r2) = clean(&short, &bonds, &window());
        assert_eq!(r2.dropped[6], 1);
        let mut ok = ten_good_trades();
        ok.push(trade("GOOD00001", d(2029, 5, 31), 100.0, 0.03, 1e4));
        let (_, r3) = clean(&ok, &bonds, &window());
        assert_eq!(r3.dropped[6], 0);
    }

    #[test]
    fn clean_rule_nine_counts_only_the_window() {
        let bonds = base_bonds();
        // 9 in-window trades: everything goes, including the out-of-window one.
        let mut trades: Vec<_> = ten_good_trades().into_iter().take(9).collect();
        trades.push(trade("GOOD00001", d(2009, 12, 1), 100.0, 0.03, 1e4));
        let (survivors, report) = clean(&trades, &bonds, &window());
        assert!(survivors.is_empty());
        assert_eq!(report.dropped[8], 10);

        // 10 in-window trades carry the out-of-window trade with them.
        let mut trades = ten_good_trades();
        trades.push(trade("GOOD00001", d(2009, 12, 1), 100.0, 0.03, 1e4));
        let (survivors, report) = clean(&trades, &bonds, &window());
        assert_eq!(survivors.len(), 11);
        assert_eq!(report.dropped[8], 0);
    }

    #[test]
    fn clean_is_idempotent() {
        let bonds = base_bonds();
        let mut trades = ten_good_trades();
        trades.push(trade("GOOD00001", d(2011, 5, 1), 30.0, 0.03, 1e4));
        trades.push(trade("GHOST0001", d(2011, 5, 1), 100.0, 0.03, 1e4));
        let (first, r1) = clean(&trades, &bonds, &window());
        let (second, r2) = clean(&first, &bonds, &window());
        assert_eq!(first, second);
        assert_eq!(r2.dropped, [0; 9]);
        assert_eq!(r1.survivors, r2.input);
    }

    #[test]
    fn aggregate_monthly_weighted_means() {
        let bonds = base_bonds();
        let trades = vec![
            trade("GOOD00001", d(2011, 3, 2), 101.0, 0.03, 100_000.0),
            trade("GOOD00001", d(2011, 3, 20), 99.0, 0.04, 300_000.0),
            trade("GOOD00001", d(2011, 4, 5), 100.0, 0.031, 50_000.0),
        ];
        let obs = aggregate_monthly(&trades, &bonds, &[Side::CustomerBuy]).unwrap();
        assert_eq!(obs.len(), 2);
        let march = &obs[0];
        assert_eq!((march.year, march.month), (2011, 3));
        assert!((march.vw_yield - 0.0375).abs() < 1e-15);
        assert!((march.vw_price - 99.5).abs() < 1e-12);
        assert_eq!(march.n_trades, 2);
        assert_eq!(march.total_volume, 400_000.0);
        assert!(march.vw_yield >= 0.03 && march.vw_yield <= 0.04);
        let expected_remaining = year_fraction(d(2011, 3, 31), d(2030, 6, 1));
        assert!((march.remaining_maturity_years - expected_remaining).abs() < 1e-12);

        let april = &obs[1];
        assert_eq!(april.n_trades, 1);
        assert_eq!(april.vw_yield, 0.031);
    }

    #[test]
    fn aggregate_respects_side_filter() {
        let bonds = base_bonds();
        let mut sell = trade("GOOD00001", d(2011, 3, 2), 101.0, 0.05, 100_000.0);
        sell.side = Side::CustomerSell;
        let trades = vec![
            trade("GOOD00001", d(2011, 3, 9), 100.0, 0.03, 100_000.0),
            sell,
        ];
        let obs = aggregate_monthly(&trades, &bonds, &[Side::CustomerBuy]).unwrap();
        assert_eq!(obs.len(), 1);
        assert_eq!(obs[0].vw_yield, 0.03);
        let all = aggregate_monthly(
            &trades,
            &bonds,
            &[Side::CustomerBuy, Side::CustomerSell, Side::Interdealer],
        )
        .unwrap();
        assert_eq!(all[0].n_trades, 2);
        assert!(aggregate_monthly(&[], &bonds, &[Side::CustomerBuy])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn aggregate_invariant_to_volume_splits() {
        let bonds = base_bonds();
        let whole = vec![trade("GOOD00001", d(2011, 3, 2), 101.0, 0.032, 200_000.0)];
        let halves = vec![
            trade("GOOD00001", d(2011, 3, 2), 101.0, 0.032, 100_000.0),
            trade("GOOD00001", d(2011, 3, 2), 101.0, 0.032, 100_000.0),
        ];
        let a = aggregate_monthly(&whole, &bonds, &[Side::CustomerBuy]).unwrap();
        let b = aggregate_monthly(&halves, &bonds, &[Side::CustomerBuy]).unwrap();
        assert_eq!(a[0].vw_yield, b[0].vw_yield);
        assert_eq!(a[0].vw_price, b[0].vw_price);
        assert_eq!(a[0].total_volume, b[0].total_volume);

        let uneven = vec![
            trade("GOOD00001", d(2011, 3, 2), 101.0, 0.032, 137_000.0),
            trade("GOOD00001", d(2011, 3, 2), 101.0, 0.032, 63_000.0),
        ];
        let c = aggregate_monthly(&uneven, &bonds, &[Side::CustomerBuy]).unwrap();
        assert!((a[0].vw_yield - c[0].vw_yield).abs() < 1e-15);
    }

    #[test]
    fn attach_spreads_flat_zero_curve() {
        let bonds = base_bonds();
        let trades = vec![trade("GOOD00001", d(2010, 3, 2), 100.0, 0.028, 100_000.0)];
        let mut obs = aggregate_monthly(&trades, &bonds, &[Side::CustomerBuy]).unwrap();
        let curve = ZeroCurve::new(d(2010, 3, 31), vec![(0.25, 0.0), (30.0, 0.0)]).unwrap();
        let mut regime = TaxRegime::with_default_federal();
        regime.set_state("TX", 2010, 0.0).unwrap();
        let report = attach_spreads(&mut obs, &[curve], &regime, &bonds).unwrap();
        assert_eq!(report.attached, 1);
        assert!(report.missing_curve_months.is_empty());
        let s = obs[0].spread.unwrap();
        assert!(s.riskfree_yield.abs() < 1e-9);
        assert!((s.spread - 0.028).abs() < 1e-9);
        // Federal-only retention in 2010.
        assert!((s.after_tax_yield - 0.028 / 0.65).abs() < 1e-12);
    }

    #[test]
    fn attach_spreads_reports_missing_months() {
        let bonds = base_bonds();
        let trades = vec![
            trade("GOOD00001", d(2010, 3, 2), 100.0, 0.028, 1e5),
            trade("GOOD00001", d(2010, 7, 2), 100.0, 0.029, 1e5),
        ];
        let mut obs = aggregate_monthly(&trades, &bonds, &[Side::CustomerBuy]).unwrap();
        let curve = ZeroCurve::new(d(2010, 3, 31), vec![(0.25, 0.01), (30.0, 0.02)]).unwrap();
        let report = attach_spreads(&mut obs, &[curve], &regime_tx(), &bonds).unwrap();
        assert_eq!(report.attached, 1);
        assert_eq!(report.missing_curve_months, vec![(2010, 7)]);
        assert!(obs[0].spread.is_some());
        assert!(obs[1].spread.is_none());
    }

    fn regime_tx() -> TaxRegime {
        let mut regime = TaxRegime::with_default_federal();
        regime.set_state("TX", 2010, 0.0).unwrap();
        regime
    }

    #[test]
    fn attach_spreads_prefers_nearest_then_earlier_curve() {
        let bonds = base_bonds();
        let trades = vec![trade("GOOD00001", d(2010, 3, 2), 100.0, 0.028, 1e5)];
        let mut obs = aggregate_monthly(&trades, &bonds, &[Side::CustomerBuy]).unwrap();
        // Month end 2010-03-31; both curves sit 10 days away.
        let early = ZeroCurve::new(d(2010, 3, 21), vec![(0.25, 0.0), (30.0, 0.0)]).unwrap();
        let late = ZeroCurve::new(d(2010, 4, 10), vec![(0.25, 0.05), (30.0, 0.05)]).unwrap();
        attach_spreads(&mut obs, &[late.clone(), early], &regime_tx(), &bonds).unwrap();
        assert!(obs[0].spread.unwrap().riskfree_yield.abs() < 1e-9);

        let mut obs2 = aggregate_monthly(&trades, &bonds, &[Side::CustomerBuy]).unwrap();
        attach_spreads(&mut obs2, &[late], &regime_tx(), &bonds).unwrap();
        assert!(obs2[0].spread.unwrap().riskfree_yield > 0.04);
    }

    #[test]
    fn identical_trades_on_two_bonds_get_identical_spreads() {
        let mut bonds = base_bonds();
        bonds.insert(
            "GOOD00002".to_string(),
            test_bond("GOOD00002", d(2009, 6, 1), d(2030, 6, 1)),
        );
        let trades = vec![
            trade("GOOD00001", d(2010, 3, 2), 100.0, 0.028, 1e5),
            trade("GOOD00002", d(2010, 3, 2), 100.0, 0.028, 1e5),
        ];
        let mut obs = aggregate_monthly(&trades, &bonds, &[Side::CustomerBuy]).unwrap();
        let curve = ZeroCurve::new(d(2010, 3, 31), vec![(0.25, 0.01), (30.0, 0.02)]).unwrap();
        attach_spreads(&mut obs, &[curve], &regime_tx(), &bonds).unwrap();
        assert_eq!(obs[0].spread, obs[1].spread);
    }
}
