//! Bond reference data, cashflow generation, price/yield/duration math,
//! rating encoding, and duration-based impact arithmetic.
//!
//! Year fractions use ACT/365.25. Coupon grids are semiannual and anchored
//! at maturity, so a bond with exactly `n/2` years remaining pays on a
//! clean half-year lattice.

use chrono::NaiveDate;
use std::collections::HashMap;
use thiserror::Error;

use crate::curve::{CashflowSchedule, CurveError};
use crate::solver;
use crate::util::year_fraction;

#[derive(Debug, Error)]
pub enum BondError {
    #[error("bond {cusip} matured {maturity} on or before {as_of}")]
    Matured {
        cusip: String,
        as_of: NaiveDate,
        maturity: NaiveDate,
    },
    #[error("bond {cusip} is missing required field `{field}`")]
    MissingField { cusip: String, field: &'static str },
    #[error("bond {cusip} has non-positive amount issued")]
    NonPositiveAmount { cusip: String },
    #[error("unknown rating grade {0:?}")]
    UnknownGrade(String),
    #[error("invalid rating scale: {0}")]
    BadScale(String),
    #[error("no yield in [{lo}, {hi}] reprices the schedule to {target}")]
    NoRoot { lo: f64, hi: f64, target: f64 },
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// How the issue was sold. Negotiated sales are the treated group in the
/// underpricing analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SaleMethod {
    Negotiated,
    Competitive,
}

impl SaleMethod {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "negotiated" => Some(Self::Negotiated),
            "competitive" => Some(Self::Competitive),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Negotiated => "negotiated",
            Self::Competitive => "competitive",
        }
    }
}

/// Static description of one bond issue. Fields that the source data may
/// leave blank are optional; the cleaning rules decide what to do with the
/// gaps.
#[derive(Debug, Clone)]
pub struct Bond {
    pub cusip: String,
    pub dated_date: NaiveDate,
    pub maturity_date: Option<NaiveDate>,
    /// Annual coupon as a decimal; `None` when missing or outside [0, 0.20].
    pub coupon_rate: Option<f64>,
    pub amount_issued: Option<f64>,
    pub offering_price: Option<f64>,
    pub offering_yield: Option<f64>,
    pub sale_method: Option<SaleMethod>,
    pub callable: bool,
    pub insured: bool,
    pub general_obligation: bool,
    pub bank_qualified: bool,
    pub refunding: bool,
    pub credit_enhanced: bool,
    pub tax_exempt_federal: bool,
    pub tax_exempt_state: bool,
    pub state: String,
    pub county_fips: Option<String>,
    /// Numeric rating, 28 = highest grade, 1 = lowest.
    pub rating: Option<u8>,
}

impl Bond {
    fn maturity(&self) -> Result<NaiveDate, BondError> {
        self.maturity_date.ok_or_else(|| BondError::MissingField {
            cusip: self.cusip.clone(),
            field: "maturity_date",
        })
    }

    /// Years from `as_of` to maturity under ACT/365.25.
    pub fn remaining_maturity_years(&self, as_of: NaiveDate) -> Result<f64, BondError> {
        let maturity = self.maturity()?;
        if as_of >= maturity {
            return Err(BondError::Matured {
                cusip: self.cusip.clone(),
                as_of,
                maturity,
            });
        }
        Ok(year_fraction(as_of, maturity))
    }
}

/// Semiannual schedule per 100 face over `remaining_years`: coupons of
/// `coupon_rate / 2 * 100` at `remaining_years - 0.5 k` for every positive
/// grid point, plus 100 face at maturity. A zero coupon yields the single
/// face flow.
pub fn schedule_from_remaining(
    coupon_rate: f64,
    remaining_years: f64,
) -> Result<CashflowSchedule, CurveError> {
    if !(remaining_years > 0.0) {
        return Err(CurveError::BadTimes);
    }
    let mut flows = vec![(remaining_years, 100.0)];
    if coupon_rate > 0.0 {
        let amount = coupon_rate / 2.0 * 100.0;
        let mut k = 0u32;
        loop {
            let t = remaining_years - 0.5 * f64::from(k);
            if t <= 0.0 {
                break;
            }
            flows.push((t, amount));
            k += 1;
        }
    }
    flows.sort_by(|a, b| a.0.total_cmp(&b.0));
    CashflowSchedule::new(flows)
}

/// Remaining cashflows of `bond` as seen from `as_of`.
pub fn cashflows(bond: &Bond, as_of: NaiveDate) -> Result<CashflowSchedule, BondError> {
    let remaining = bond.remaining_maturity_years(as_of)?;
    let coupon = bond.coupon_rate.ok_or_else(|| BondError::MissingField {
        cusip: bond.cusip.clone(),
        field: "coupon_rate",
    })?;
    Ok(schedule_from_remaining(coupon, remaining)?)
}

/// Price per 100 face at semiannually compounded yield `y`:
/// `sum_i amount_i (1 + y/2)^(-2 t_i)`. Requires `y > -2`.
pub fn price_from_yield(cf: &CashflowSchedule, y: f64) -> f64 {
    assert!(y > -2.0, "yield {y} leaves 1 + y/2 non-positive");
    solver::price_semiannual(cf.flows(), y)
}

/// Semiannually compounded yield that reprices the schedule to `price`,
/// solved on the bracket [-0.5, 2.0] to |price gap| < 1e-10.
pub fn ytm_from_price(cf: &CashflowSchedule, price: f64) -> Result<f64, BondError> {
    solver::solve_semiannual_yield(cf.flows(), price).map_err(|m| BondError::NoRoot {
        lo: m.lo,
        hi: m.hi,
        target: m.target,
    })
}

/// Macaulay duration in years at yield `y`:
/// `sum_i t_i PV_i / sum_i PV_i` with semiannual discounting.
pub fn macaulay_duration(cf: &CashflowSchedule, y: f64) -> f64 {
    assert!(y > -2.0, "yield {y} leaves 1 + y/2 non-positive");
    if cf.len() == 1 {
        return cf.flows()[0].0;
    }
    let base = 1.0 + y / 2.0;
    let pv_total = crate::util::pairwise_sum_by(cf.len(), |i| {
        let (t, a) = cf.flows()[i];
        a * base.powf(-2.0 * t)
    });
    let weighted = crate::util::pairwise_sum_by(cf.len(), |i| {
        let (t, a) = cf.flows()[i];
        t * a * base.powf(-2.0 * t)
    });
    weighted / pv_total
}

/// First-order wealth effect of a yield shift `dy` on a stock of debt:
/// `outstanding * macaulay_years * dy / (1 + y/2)`.
pub fn wealth_impact(outstanding: f64, macaulay_years: f64, y: f64, dy: f64) -> f64 {
    outstanding * macaulay_years * dy / (1.0 + y / 2.0)
}

/// Annual interest saved or added by a yield shift on new issuance:
/// `principal * dy`.
pub fn annual_interest_delta(principal: f64, dy: f64) -> f64 {
    principal * dy
}

/// Ordered mapping between letter grades and integer codes, highest grade
/// mapped to the largest code and the lowest to 1.
#[derive(Debug, Clone)]
pub struct RatingScale {
    by_grade: HashMap<String, u8>,
    by_code: HashMap<u8, String>,
    max_code: u8,
}

impl RatingScale {
    /// The shipped 28-grade table, AAA = 28 down to D = 1.
    pub fn default_table() -> Self {
        Self::from_csv(include_str!("../data/rating_scale.csv"))
            .expect("shipped rating table is valid")
    }

    /// Parse a `grade,code` CSV (header required). Codes must be exactly
    /// `1..=n` with every grade and code distinct.
    pub fn from_csv(text: &str) -> Result<Self, BondError> {
        let mut by_grade = HashMap::new();
        let mut by_code = HashMap::new();
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "grade,code" => {}
            other => {
                return Err(BondError::BadScale(format!(
                    "expected header `grade,code`, got {other:?}"
                )))
            }
        }
        for (idx, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (grade, code) = line.split_once(',').ok_or_else(|| {
                BondError::BadScale(format!("line {}: missing comma", idx + 2))
            })?;
            let grade = grade.trim().to_string();
            let code: u8 = code
                .trim()
                .parse()
                .map_err(|e| BondError::BadScale(format!("line {}: {e}", idx + 2)))?;
            if code == 0 {
                return Err(BondError::BadScale(format!("grade {grade}: code 0")));
            }
            if by_grade.insert(grade.clone(), code).is_some() {
                return Err(BondError::BadScale(format!("duplicate grade {grade}")));
            }
            if by_code.insert(code, grade.clone()).is_some() {
                return Err(BondError::BadScale(format!("duplicate code {code}")));
            }
        }
        let n = by_grade.len();
        if n < 2 {
            return Err(BondError::BadScale("need at least two grades".into()));
        }
        let max_code = n as u8;
        for c in 1..=max_code {
            if !by_code.contains_key(&c) {
                return Err(BondError::BadScale(format!(
                    "codes must cover 1..={max_code}, missing {c}"
                )));
            }
        }
        Ok(Self {
            by_grade,
            by_code,
            max_code,
        })
    }

    pub fn len(&self) -> usize {
        self.by_grade.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_grade.is_empty()
    }

    pub fn max_code(&self) -> u8 {
        self.max_code
    }

    pub fn decode(&self, code: u8) -> Option<&str> {
        self.by_code.get(&code).map(String::as_str)
    }
}

/// Integer code of a letter grade; higher means higher quality.
pub fn encode_rating(grade: &str, scale: &RatingScale) -> Result<u8, BondError> {
    scale
        .by_grade
        .get(grade.trim())
        .copied()
        .ok_or_else(|| BondError::UnknownGrade(grade.to_string()))
}

/// Issue-level controls evaluated at an observation date.
#[derive(Debug, Clone, PartialEq)]
pub struct BondControls {
    pub coupon: f64,
    pub log_amount: f64,
    pub callable: f64,
    pub insured: f64,
    pub general_obligation: f64,
    pub bank_qualified: f64,
    pub refunding: f64,
    pub credit_enhanced: f64,
    pub rating: Option<f64>,
    pub remaining_maturity: f64,
    pub inverse_maturity: f64,
}

impl BondControls {
    pub const NAMES: [&'static str; 11] = [
        "coupon",
        "log_amount",
        "callable",
        "insured",
        "go",
        "bank_qualified",
        "refunding",
        "credit_enhanced",
        "rating",
        "remaining_maturity",
        "inverse_maturity",
    ];

    /// Values in the order of [`Self::NAMES`]; rating is `None` when the
    /// issue is unrated.
    pub fn values(&self) -> [Option<f64>; 11] {
        [
            Some(self.coupon),
            Some(self.log_amount),
            Some(self.callable),
            Some(self.insured),
            Some(self.general_obligation),
            Some(self.bank_qualified),
            Some(self.refunding),
            Some(self.credit_enhanced),
            self.rating,
            Some(self.remaining_maturity),
            Some(self.inverse_maturity),
        ]
    }
}

/// Controls for `bond` as of `obs_date`: coupon, log amount, the six issue
/// dummies, rating code, remaining maturity, and its inverse.
pub fn build_bond_controls(bond: &Bond, obs_date: NaiveDate) -> Result<BondControls, BondError> {
    let remaining = bond.remaining_maturity_years(obs_date)?;
    let coupon = bond.coupon_rate.ok_or_else(|| BondError::MissingField {
        cusip: bond.cusip.clone(),
        field: "coupon_rate",
    })?;
    let amount = bond.amount_issued.ok_or_else(|| BondError::MissingField {
        cusip: bond.cusip.clone(),
        field: "amount_issued",
    })?;
    if !(amount > 0.0) {
        return Err(BondError::NonPositiveAmount {
            cusip: bond.cusip.clone(),
        });
    }
    let dummy = |b: bool| if b { 1.0 } else { 0.0 };
    Ok(BondControls {
        coupon,
        log_amount: amount.ln(),
        callable: dummy(bond.callable),
        insured: dummy(bond.insured),
        general_obligation: dummy(bond.general_obligation),
        bank_qualified: dummy(bond.bank_qualified),
        refunding: dummy(bond.refunding),
        credit_enhanced: dummy(bond.credit_enhanced),
        rating: bond.rating.map(f64::from),
        remaining_maturity: remaining,
        inverse_maturity: 1.0 / remaining,
    })
}
