//! Tax regimes and the four outcome variables: average yield, yield spread,
//! after-tax yield, and after-tax yield spread.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use thiserror::Error;

use crate::bonds::Bond;

#[derive(Debug, Error)]
pub enum SpreadError {
    #[error("no federal tax rate configured for year {0}")]
    MissingFederalRate(i32),
    #[error("tax rate {rate} for {context} is outside [0, 0.9)")]
    BadRate { context: String, rate: f64 },
}

/// Counts of silent fallbacks taken during retention lookups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TaxWarnings {
    /// State-year pairs that had no configured rate and were treated as 0.
    pub missing_state: u64,
    /// County-year pairs missing from an enabled local schedule.
    pub missing_local: u64,
}

/// Top statutory income tax rates by layer. Immutable once built; lookup
/// warnings accumulate in atomic counters so shared references stay cheap.
#[derive(Debug, Default)]
pub struct TaxRegime {
    federal: BTreeMap<i32, f64>,
    state: HashMap<(String, i32), f64>,
    local: Option<HashMap<(String, i32), f64>>,
    missing_state: AtomicU64,
    missing_local: AtomicU64,
}

fn check_rate(context: &str, rate: f64) -> Result<f64, SpreadError> {
    if !(0.0..0.9).contains(&rate) {
        return Err(SpreadError::BadRate {
            context: context.to_string(),
            rate,
        });
    }
    Ok(rate)
}

impl TaxRegime {
    pub fn new() -> Self {
        Self::default()
    }

    /// Regime preloaded with the shipped federal schedule
    /// (2005-2012 at 35%, 2013-2017 at 39.6%, 2018-2019 at 37%).
    pub fn with_default_federal() -> Self {
        let mut regime = Self::new();
        let text = include_str!("../data/federal_tax.csv");
        for (idx, line) in text.lines().enumerate() {
            if idx == 0 {
                debug_assert_eq!(line.trim(), "year,top_rate");
                continue;
            }
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (year, rate) = line.split_once(',').expect("shipped schedule is well formed");
            regime
                .set_federal(
                    year.parse().expect("shipped year parses"),
                    rate.parse().expect("shipped rate parses"),
                )
                .expect("shipped rates are in range");
        }
        regime
    }

    pub fn set_federal(&mut self, year: i32, rate: f64) -> Result<(), SpreadError> {
        self.federal
            .insert(year, check_rate(&format!("federal {year}"), rate)?);
        Ok(())
    }

    pub fn set_state(&mut self, state: &str, year: i32, rate: f64) -> Result<(), SpreadError> {
        self.state.insert(
            (state.to_string(), year),
            check_rate(&format!("state {state} {year}"), rate)?,
        );
        Ok(())
    }

    /// Turning the local layer on (even empty) makes retention lookups with
    /// a county include it.
    pub fn enable_local(&mut self) {
        self.local.get_or_insert_with(HashMap::new);
    }

    pub fn set_local(&mut self, fips: &str, year: i32, rate: f64) -> Result<(), SpreadError> {
        let rate = check_rate(&format!("local {fips} {year}"), rate)?;
        self.local
            .get_or_insert_with(HashMap::new)
            .insert((fips.to_string(), year), rate);
        Ok(())
    }

    pub fn federal_rate(&self, year: i32) -> Result<f64, SpreadError> {
        self.federal
            .get(&year)
            .copied()
            .ok_or(SpreadError::MissingFederalRate(year))
    }

    pub fn federal_years(&self) -> Option<(i32, i32)> {
        let first = self.federal.keys().next()?;
        let last = self.federal.keys().next_back()?;
        Some((*first, *last))
    }

    fn state_rate(&self, state: &str, year: i32) -> f64 {
        match self.state.get(&(state.to_string(), year)) {
            Some(&r) => r,
            None => {
                self.missing_state.fetch_add(1, Ordering::Relaxed);
                0.0
            }
        }
    }

    fn local_rate(&self, fips: &str, year: i32) -> f64 {
        let Some(local) = &self.local else { return 0.0 };
        match local.get(&(fips.to_string(), year)) {
            Some(&r) => r,
            None => {
                self.missing_local.fetch_add(1, Ordering::Relaxed);
                0.0
            }
        }
    }

    /// Combined retention `(1 - federal)(1 - state)(1 - local)`. The local
    /// factor participates only when the layer is enabled and a county is
    /// given. Missing state or local rates count as 0 and bump a warning.
    pub fn combined_retention(
        &self,
        state: &str,
        fips: Option<&str>,
        year: i32,
    ) -> Result<f64, SpreadError> {
        let fed = self.federal_rate(year)?;
        let mut retention = (1.0 - fed) * (1.0 - self.state_rate(state, year));
        if let Some(fips) = fips {
            if self.local.is_some() {
                retention *= 1.0 - self.local_rate(fips, year);
            }
        }
        Ok(retention)
    }

    /// Retention for a specific bond: each layer applies only when the
    /// bond's interest is exempt from that tax. A fully taxable bond keeps
    /// retention 1, so its after-tax yield equals its raw yield.
    pub fn retention_for_bond(&self, bond: &Bond, year: i32) -> Result<f64, SpreadError> {
        let mut retention = 1.0;
        if bond.tax_exempt_federal {
            retention *= 1.0 - self.federal_rate(year)?;
        }
        if bond.tax_exempt_state {
            retention *= 1.0 - self.state_rate(&bond.state, year);
            if self.local.is_some() {
                if let Some(fips) = bond.county_fips.as_deref() {
                    retention *= 1.0 - self.local_rate(fips, year);
                }
            }
        }
        Ok(retention)
    }

    pub fn warnings(&self) -> TaxWarnings {
        TaxWarnings {
            missing_state: self.missing_state.load(Ordering::Relaxed),
            missing_local: self.missing_local.load(Ordering::Relaxed),
        }
    }
}

/// Taxable-equivalent yield `y / retention` for `retention` in (0, 1].
pub fn after_tax_yield(y: f64, retention: f64) -> f64 {
    assert!(
        retention > 0.0 && retention <= 1.0,
        "retention {retention} outside (0, 1]"
    );
    y / retention
}

/// The outcome bundle for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadResult {
    pub raw_yield: f64,
    pub riskfree_yield: f64,
    pub spread: f64,
    pub after_tax_yield: f64,
    pub after_tax_spread: f64,
}

/// Raw and tax-adjusted spreads of yield `y` over risk-free yield `r`.
pub fn compute_spreads(y: f64, r: f64, retention: f64) -> SpreadResult {
    let at = after_tax_yield(y, retention);
    SpreadResult {
        raw_yield: y,
        riskfree_yield: r,
        spread: y - r,
        after_tax_yield: at,
        after_tax_spread: at - r,
    }
}
