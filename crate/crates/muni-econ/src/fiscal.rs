//! County fiscal ratios, jobs-multiplier exposure, county rating
//! aggregation, and issuance-growth normalization.

use chrono::NaiveDate;
use std::collections::HashMap;
use thiserror::Error;

use crate::bonds::Bond;
use crate::util::{months_between, pairwise_sum_by};

#[derive(Debug, Error)]
pub enum FiscalError {
    #[error("county {fips} year {year} is missing `{field}`")]
    MissingField {
        fips: String,
        year: i32,
        field: &'static str,
    },
    #[error("county {fips} year {year}: zero denominator `{denominator}`")]
    ZeroDenominator {
        fips: String,
        year: i32,
        denominator: &'static str,
    },
    #[error("lag rows must be consecutive years, got {later} and {earlier}")]
    YearMismatch { later: i32, earlier: i32 },
    #[error("sector {sector}: {what} {value} is invalid")]
    BadSectorValue {
        sector: String,
        what: &'static str,
        value: f64,
    },
    #[error("no rated bonds issued 12 to 24 months before the deal")]
    NoRatedBonds,
    #[error("base half-year window has no positive issuance")]
    ZeroBase,
}

/// One county-year row of the government-finance survey.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CountyYear {
    pub fips: String,
    pub year: i32,
    pub labor_force: Option<f64>,
    pub unemployment_rate: Option<f64>,
    pub total_revenue: Option<f64>,
    pub state_igr: Option<f64>,
    pub total_expenditure: Option<f64>,
    pub interest_general: Option<f64>,
    pub interest_total: Option<f64>,
    pub total_lt_debt: Option<f64>,
    pub debt_retired: Option<f64>,
    pub property_tax: Option<f64>,
    pub population: Option<f64>,
}

impl CountyYear {
    fn require(&self, field: &'static str, value: Option<f64>) -> Result<f64, FiscalError> {
        value.ok_or_else(|| FiscalError::MissingField {
            fips: self.fips.clone(),
            year: self.year,
            field,
        })
    }
}

/// The three own-revenue aggregates, differing in how interest expenditure
/// is added back.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevenueMeasures {
    pub revenue1: f64,
    pub revenue2: f64,
    pub revenue3: f64,
}

/// Own revenue net of expenditure with interest added back three ways:
/// `R1 = (TR - IGR) - (TE - interest_total)`,
/// `R2 = (TR - IGR) - (TE - interest_general)`,
/// `R3 = (TR - IGR) + interest_general`.
pub fn revenue_measures(cy: &CountyYear) -> Result<RevenueMeasures, FiscalError> {
    let tr = cy.require("total_revenue", cy.total_revenue)?;
    let igr = cy.require("state_igr", cy.state_igr)?;
    let te = cy.require("total_expenditure", cy.total_expenditure)?;
    let int_general = cy.require("interest_general", cy.interest_general)?;
    let int_total = cy.require("interest_total", cy.interest_total)?;
    let own = tr - igr;
    Ok(RevenueMeasures {
        revenue1: own - (te - int_total),
        revenue2: own - (te - int_general),
        revenue3: own + int_general,
    })
}

/// Interest-burden ratios for year `t`, built from the two preceding rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterestRatios {
    pub int_rev1: f64,
    pub int_rev2: f64,
    pub int_rev3: f64,
    pub int_debt: f64,
    pub net_debt: f64,
    /// True when a revenue or debt denominator was negative; the ratio sign
    /// is passed through unchanged.
    pub negative_denominator: bool,
}

/// Numerators come from `t1` (year t-1), denominators from `t2` (year t-2):
/// interest on general debt over R1, R2, and total-debt interest over R3,
/// general interest over lagged long-term debt, and the net new debt of
/// `t1`. A zero denominator excludes the row via `ZeroDenominator`.
pub fn interest_ratios(t1: &CountyYear, t2: &CountyYear) -> Result<InterestRatios, FiscalError> {
    if t1.year != t2.year + 1 {
        return Err(FiscalError::YearMismatch {
            later: t1.year,
            earlier: t2.year,
        });
    }
    let int_general = t1.require("interest_general", t1.interest_general)?;
    let int_total = t1.require("interest_total", t1.interest_total)?;
    let debt_outstanding = t1.require("total_lt_debt", t1.total_lt_debt)?;
    let debt_retired = t1.require("debt_retired", t1.debt_retired)?;
    let revenues = revenue_measures(t2)?;
    let lag_debt = t2.require("total_lt_debt", t2.total_lt_debt)?;

    let zero = |denominator: &'static str| FiscalError::ZeroDenominator {
        fips: t1.fips.clone(),
        year: t1.year,
        denominator,
    };
    if revenues.revenue1 == 0.0 {
        return Err(zero("revenue1"));
    }
    if revenues.revenue2 == 0.0 {
        return Err(zero("revenue2"));
    }
    if revenues.revenue3 == 0.0 {
        return Err(zero("revenue3"));
    }
    if lag_debt == 0.0 {
        return Err(zero("total_lt_debt"));
    }

    Ok(InterestRatios {
        int_rev1: int_general / revenues.revenue1,
        int_rev2: int_general / revenues.revenue2,
        int_rev3: int_total / revenues.revenue3,
        int_debt: int_general / lag_debt,
        net_debt: debt_outstanding - debt_retired,
        negative_denominator: revenues.revenue1 < 0.0
            || revenues.revenue2 < 0.0
            || revenues.revenue3 < 0.0
            || lag_debt < 0.0,
    })
}

/// Value-added weights of one industry across sectors, upstream and
/// downstream of the deal's industry.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorWeight {
    pub sector: String,
    pub weight_up: f64,
    pub weight_down: f64,
}

/// A county's share of each sector, wage- and employment-based.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CountyShares {
    pub wage_share: f64,
    pub emp_share: f64,
}

/// Everything needed to score one county's exposure to one industry.
#[derive(Debug, Clone)]
pub struct MultiplierInputs {
    pub industry: String,
    weights: Vec<SectorWeight>,
    shares: HashMap<String, CountyShares>,
}

impl MultiplierInputs {
    pub fn new(
        industry: &str,
        weights: Vec<SectorWeight>,
        shares: HashMap<String, CountyShares>,
    ) -> Result<Self, FiscalError> {
        for w in &weights {
            for (what, value) in [("weight_up", w.weight_up), ("weight_down", w.weight_down)] {
                if !(value >= 0.0) || !value.is_finite() {
                    return Err(FiscalError::BadSectorValue {
                        sector: w.sector.clone(),
                        what,
                        value,
                    });
                }
            }
        }
        for (sector, s) in &shares {
            for (what, value) in [("wage_share", s.wage_share), ("emp_share", s.emp_share)] {
                if !(0.0..=1.0).contains(&value) {
                    return Err(FiscalError::BadSectorValue {
                        sector: sector.clone(),
                        what,
                        value,
                    });
                }
            }
        }
        Ok(Self {
            industry: industry.to_string(),
            weights,
            shares,
        })
    }
}

/// The county's exposure under both share definitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierExposure {
    pub wage_based: f64,
    pub emp_based: f64,
}

/// Dot product of industry weights (upstream plus downstream) with the
/// county's sector shares. Sectors the county has no share for count as 0.
pub fn jobs_multiplier(inputs: &MultiplierInputs) -> MultiplierExposure {
    let n = inputs.weights.len();
    let share = |i: usize| {
        inputs
            .shares
            .get(&inputs.weights[i].sector)
            .copied()
            .unwrap_or_default()
    };
    let wage_based = pairwise_sum_by(n, |i| {
        let w = &inputs.weights[i];
        (w.weight_up + w.weight_down) * share(i).wage_share
    });
    let emp_based = pairwise_sum_by(n, |i| {
        let w = &inputs.weights[i];
        (w.weight_up + w.weight_down) * share(i).emp_share
    });
    MultiplierExposure {
        wage_based,
        emp_based,
    }
}

/// Mean encoded rating over the county's issues dated 12 to 24 whole
/// calendar months (inclusive) before the deal month. Unrated issues are
/// ignored.
pub fn county_rating(bonds: &[&Bond], event_date: NaiveDate) -> Result<f64, FiscalError> {
    let mut ratings: Vec<f64> = Vec::new();
    for bond in bonds {
        let offset = months_between(bond.dated_date, event_date);
        if (12..=24).contains(&offset) {
            if let Some(r) = bond.rating {
                ratings.push(f64::from(r));
            }
        }
    }
    if ratings.is_empty() {
        return Err(FiscalError::NoRatedBonds);
    }
    Ok(pairwise_sum_by(ratings.len(), |i| ratings[i]) / ratings.len() as f64)
}

/// One normalized issuance point: the half-year index relative to the
/// event (0 covers event months 0..=5) and total par over the base window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IssuancePoint {
    pub half_year: i32,
    pub ratio: f64,
}

/// Total par issued per half-year bucket, normalized by the base window
/// 18 to 13 months before the event (bucket -3). Buckets run from
/// `-horizon_halves` through `horizon_halves`; empty buckets yield 0.
pub fn issuance_growth(
    issues: &[(NaiveDate, f64)],
    event_date: NaiveDate,
    horizon_halves: i32,
) -> Result<Vec<IssuancePoint>, FiscalError> {
    let mut buckets: HashMap<i32, Vec<f64>> = HashMap::new();
    for &(dated, par) in issues {
        let offset = months_between(event_date, dated);
        buckets.entry(offset.div_euclid(6)).or_default().push(par);
    }
    let total = |q: i32| {
        buckets
            .get(&q)
            .map(|pars| pairwise_sum_by(pars.len(), |i| pars[i]))
            .unwrap_or(0.0)
    };
    let base = total(-3);
    if !(base > 0.0) {
        return Err(FiscalError::ZeroBase);
    }
    Ok((-horizon_halves..=horizon_halves)
        .map(|q| IssuancePoint {
            half_year: q,
            ratio: total(q) / base,
        })
        .collect())
}
