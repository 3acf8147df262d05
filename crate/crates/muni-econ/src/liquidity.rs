//! Post-issuance underpricing and liquidity: three markup variants, intraday
//! price dispersion, and the Amihud price-impact measure, all computed over
//! the first 30 calendar days after the dated date.

use chrono::NaiveDate;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::bonds::Bond;
use crate::trades::{Side, TradeRecord};
use crate::util::pairwise_sum_by;

#[derive(Debug, Error)]
pub enum LiquidityError {
    #[error("bond {0} has no offering price")]
    MissingOfferingPrice(String),
    #[error("bond {cusip} offering price {price} outside [50, 150]")]
    BadOfferingPrice { cusip: String, price: f64 },
    #[error("no customer buy trades in the issuance window")]
    NoCustomerTrades,
    #[error("no interdealer trades in the issuance window")]
    NoInterdealerTrades,
    #[error("not enough trades in the issuance window")]
    InsufficientTrades,
}

/// Trades of one cusip inside days 1..=30 after the dated date, plus the
/// offering price they are measured against.
#[derive(Debug, Clone)]
pub struct IssuanceWindowTrades {
    pub cusip: String,
    pub offering_price: f64,
    trades: Vec<TradeRecord>,
}

impl IssuanceWindowTrades {
    /// Collect `bond`'s trades with `1 <= trade_date - dated_date <= 30`,
    /// preserving input order. Requires an offering price in [50, 150].
    pub fn build(bond: &Bond, trades: &[TradeRecord]) -> Result<Self, LiquidityError> {
        let offering_price = bond
            .offering_price
            .ok_or_else(|| LiquidityError::MissingOfferingPrice(bond.cusip.clone()))?;
        if !(50.0..=150.0).contains(&offering_price) {
            return Err(LiquidityError::BadOfferingPrice {
                cusip: bond.cusip.clone(),
                price: offering_price,
            });
        }
        let window: Vec<TradeRecord> = trades
            .iter()
            .filter(|t| {
                t.cusip == bond.cusip && {
                    let day = (t.trade_date - bond.dated_date).num_days();
                    (1..=30).contains(&day)
                }
            })
            .cloned()
            .collect();
        Ok(Self {
            cusip: bond.cusip.clone(),
            offering_price,
            trades: window,
        })
    }

    pub fn trades(&self) -> &[TradeRecord] {
        &self.trades
    }

    pub fn n_trades(&self) -> usize {
        self.trades.len()
    }

    fn side(&self, side: Side) -> Vec<&TradeRecord> {
        self.trades.iter().filter(|t| t.side == side).collect()
    }
}

fn vw_price(trades: &[&TradeRecord]) -> f64 {
    let vol = pairwise_sum_by(trades.len(), |i| trades[i].par_volume);
    pairwise_sum_by(trades.len(), |i| trades[i].price * trades[i].par_volume) / vol
}

/// Trade-weighted markup of customer purchase prices over the offering
/// price, in basis points: `1e4 * sum_k vol_k (P_k - O) / (O * sum_k vol_k)`.
pub fn markup_offering(w: &IssuanceWindowTrades) -> Result<f64, LiquidityError> {
    let buys = w.side(Side::CustomerBuy);
    if buys.is_empty() {
        return Err(LiquidityError::NoCustomerTrades);
    }
    let o = w.offering_price;
    let num = pairwise_sum_by(buys.len(), |i| buys[i].par_volume * (buys[i].price - o));
    let vol = pairwise_sum_by(buys.len(), |i| buys[i].par_volume);
    Ok(1e4 * num / (o * vol))
}

/// Markup computed as the volume-weighted average customer price first,
/// then differenced against the offering price: `1e4 * (Pbar - O) / O`.
/// Algebraically identical to [`markup_offering`]; computed separately so
/// reports can assert the identity instead of assuming it.
pub fn markup_avg_po(w: &IssuanceWindowTrades) -> Result<f64, LiquidityError> {
    let buys = w.side(Side::CustomerBuy);
    if buys.is_empty() {
        return Err(LiquidityError::NoCustomerTrades);
    }
    let pbar = vw_price(&buys);
    Ok(1e4 * (pbar - w.offering_price) / w.offering_price)
}

/// Markup of the customer purchase price level over the interdealer price
/// level, in basis points: `1e4 * (Pbar - Vbar) / Vbar` with volume-weighted
/// means per side.
pub fn markup_interdealer(w: &IssuanceWindowTrades) -> Result<f64, LiquidityError> {
    let buys = w.side(Side::CustomerBuy);
    if buys.is_empty() {
        return Err(LiquidityError::NoCustomerTrades);
    }
    let dealer = w.side(Side::Interdealer);
    if dealer.is_empty() {
        return Err(LiquidityError::NoInterdealerTrades);
    }
    let pbar = vw_price(&buys);
    let vbar = vw_price(&dealer);
    Ok(1e4 * (pbar - vbar) / vbar)
}

/// Volume-weighted root mean squared deviation from the daily consensus
/// price, averaged over window days with at least two trades (all sides).
/// A day whose prices are all identical contributes exactly 0.
pub fn price_dispersion(w: &IssuanceWindowTrades) -> Result<f64, LiquidityError> {
    let mut days: BTreeMap<NaiveDate, Vec<&TradeRecord>> = BTreeMap::new();
    for t in &w.trades {
        days.entry(t.trade_date).or_default().push(t);
    }
    let mut daily: Vec<f64> = Vec::new();
    for trades in days.values() {
        if trades.len() < 2 {
            continue;
        }
        let min = trades.iter().map(|t| t.price).fold(f64::INFINITY, f64::min);
        let max = trades
            .iter()
            .map(|t| t.price)
            .fold(f64::NEG_INFINITY, f64::max);
        if min == max {
            daily.push(0.0);
            continue;
        }
        let m = vw_price(trades);
        let vol = pairwise_sum_by(trades.len(), |i| trades[i].par_volume);
        let ss = pairwise_sum_by(trades.len(), |i| {
            let d = trades[i].price - m;
            trades[i].par_volume * d * d
        });
        daily.push((ss / vol).sqrt());
    }
    if daily.is_empty() {
        return Err(LiquidityError::InsufficientTrades);
    }
    Ok(pairwise_sum_by(daily.len(), |i| daily[i]) / daily.len() as f64)
}

/// Mean absolute log return per unit volume over consecutive trades in date
/// order, scaled by 1e6. Same-day trades keep their input order.
pub fn amihud(w: &IssuanceWindowTrades) -> Result<f64, LiquidityError> {
    if w.trades.len() < 2 {
        return Err(LiquidityError::InsufficientTrades);
    }
    let mut ordered: Vec<&TradeRecord> = w.trades.iter().collect();
    ordered.sort_by_key(|t| t.trade_date);
    let n = ordered.len();
    let total = pairwise_sum_by(n - 1, |i| {
        let prev = ordered[i].price;
        let cur = ordered[i + 1];
        (cur.price / prev).ln().abs() / cur.par_volume
    });
    Ok(1e6 * total / (n - 1) as f64)
}

/// One output row of the liquidity report. Measures whose preconditions
/// fail on this cusip's window are left empty rather than failing the run.
#[derive(Debug, Clone, PartialEq)]
pub struct LiquidityRow {
    pub cusip: String,
    pub markup_bps: Option<f64>,
    pub markup_po_bps: Option<f64>,
    pub markup_pv_bps: Option<f64>,
    pub price_dispersion: Option<f64>,
    pub amihud: Option<f64>,
    pub n_trades_window: usize,
}

/// Compute every measure for one bond, mapping per-measure precondition
/// failures to empty fields.
pub fn compute(bond: &Bond, trades: &[TradeRecord]) -> Result<LiquidityRow, LiquidityError> {
    let w = IssuanceWindowTrades::build(bond, trades)?;
    Ok(LiquidityRow {
        cusip: w.cusip.clone(),
        markup_bps: markup_offering(&w).ok(),
        markup_po_bps: markup_avg_po(&w).ok(),
        markup_pv_bps: markup_interdealer(&w).ok(),
        price_dispersion: price_dispersion(&w).ok(),
        amihud: amihud(&w).ok(),
        n_trades_window: w.n_trades(),
    })
}
