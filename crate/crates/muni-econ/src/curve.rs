//! Treasury zero-coupon term structure: discount factors and the
//! coupon-equivalent risk-free yield of a cashflow schedule.

use chrono::NaiveDate;
use thiserror::Error;

use crate::solver;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("curve tenors must be positive and strictly increasing")]
    BadTenors,
    #[error("zero rate at tenor {tenor} is not finite")]
    NonFiniteRate { tenor: f64 },
    #[error("discount time must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("cashflow schedule is empty")]
    EmptySchedule,
    #[error("cashflow times must be positive and non-decreasing")]
    BadTimes,
    #[error("cashflow amounts must be positive")]
    BadAmounts,
    #[error("present value {0} is not positive; no semiannual yield exists")]
    NonPositivePrice(f64),
    #[error("no yield in [{lo}, {hi}] reprices the schedule to {target}")]
    NoRoot { lo: f64, hi: f64, target: f64 },
}

/// A dated set of cashflows per 100 face: `(time_years, amount)` with
/// strictly increasing positive times and positive amounts.
///
/// Flows supplied at exactly equal times are merged by summing their
/// amounts, so splitting a flow into pieces at the same time leaves every
/// derived quantity unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct CashflowSchedule {
    flows: Vec<(f64, f64)>,
}

impl CashflowSchedule {
    pub fn new(flows: Vec<(f64, f64)>) -> Result<Self, CurveError> {
        if flows.is_empty() {
            return Err(CurveError::EmptySchedule);
        }
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(flows.len());
        for &(t, a) in &flows {
            if !(t > 0.0) || !t.is_finite() {
                return Err(CurveError::BadTimes);
            }
            if !(a > 0.0) || !a.is_finite() {
                return Err(CurveError::BadAmounts);
            }
            match merged.last_mut() {
                Some((last_t, last_a)) if *last_t == t => *last_a += a,
                Some((last_t, _)) if *last_t > t => return Err(CurveError::BadTimes),
                _ => merged.push((t, a)),
            }
        }
        Ok(Self { flows: merged })
    }

    pub fn flows(&self) -> &[(f64, f64)] {
        &self.flows
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    /// Final payment time in years.
    pub fn maturity_years(&self) -> f64 {
        self.flows.last().map(|&(t, _)| t).unwrap_or(0.0)
    }
}

/// Continuously compounded zero rates by tenor, linearly interpolated in the
/// tenor dimension and extrapolated flat beyond the first and last knots.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCurve {
    as_of: NaiveDate,
    points: Vec<(f64, f64)>,
}

impl ZeroCurve {
    /// `points` are `(tenor_years, zero_rate_cc)` pairs, tenors strictly
    /// increasing and positive, rates finite.
    pub fn new(as_of: NaiveDate, points: Vec<(f64, f64)>) -> Result<Self, CurveError> {
        if points.len() < 2 {
            return Err(CurveError::TooFewPoints(points.len()));
        }
        for (i, &(t, z)) in points.iter().enumerate() {
            if !(t > 0.0) || !t.is_finite() {
                return Err(CurveError::BadTenors);
            }
            if i > 0 && points[i - 1].0 >= t {
                return Err(CurveError::BadTenors);
            }
            if !z.is_finite() {
                return Err(CurveError::NonFiniteRate { tenor: t });
            }
        }
        Ok(Self { as_of, points })
    }

    pub fn as_of(&self) -> NaiveDate {
        self.as_of
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Interpolated continuously compounded zero rate at tenor `t`.
    pub fn zero_rate(&self, t: f64) -> f64 {
        let pts = &self.points;
        if t <= pts[0].0 {
            return pts[0].1;
        }
        if t >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        let hi = pts.partition_point(|&(tenor, _)| tenor < t);
        let (t0, z0) = pts[hi - 1];
        let (t1, z1) = pts[hi];
        z0 + (z1 - z0) * (t - t0) / (t1 - t0)
    }

    /// `exp(-z(t) * t)` for `t >= 0`.
    pub fn discount_factor(&self, t: f64) -> Result<f64, CurveError> {
        if !(t >= 0.0) {
            return Err(CurveError::NegativeTime(t));
        }
        let z = self.zero_rate(t);
        if !z.is_finite() {
            return Err(CurveError::NonFiniteRate { tenor: t });
        }
        Ok((-z * t).exp())
    }

    /// Present value per 100 face of the schedule priced off this curve.
    pub fn riskfree_price(&self, cf: &CashflowSchedule) -> Result<f64, CurveError> {
        if cf.is_empty() {
            return Err(CurveError::EmptySchedule);
        }
        let mut dfs = Vec::with_capacity(cf.len());
        for &(t, _) in cf.flows() {
            dfs.push(self.discount_factor(t)?);
        }
        Ok(crate::util::pairwise_sum_by(cf.len(), |i| {
            cf.flows()[i].1 * dfs[i]
        }))
    }

    /// The semiannually compounded annual yield `y` that reprices the
    /// schedule at its curve present value:
    /// `sum_i a_i (1 + y/2)^(-2 t_i) = riskfree_price(cf)`.
    ///
    /// Solved with a bracketed bisection/Newton hybrid on [-0.5, 2.0] to an
    /// absolute price tolerance of 1e-10.
    pub fn coupon_equivalent_riskfree_yield(
        &self,
        cf: &CashflowSchedule,
    ) -> Result<f64, CurveError> {
        let target = self.riskfree_price(cf)?;
        if !(target > 0.0) {
            return Err(CurveError::NonPositivePrice(target));
        }
        solver::solve_semiannual_yield(cf.flows(), target).map_err(|m| CurveError::NoRoot {
            lo: m.lo,
            hi: m.hi,
            target: m.target,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::SplitMix64;

    fn date() -> NaiveDate {
        NaiveDate::from_ymd_opt(2015, 6, 30).unwrap()
    }

    fn flat(z: f64) -> ZeroCurve {
        ZeroCurve::new(date(), vec![(0.25, z), (30.0, z)]).unwrap()
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(ZeroCurve::new(date(), vec![(1.0, 0.02)]).is_err());
        assert!(ZeroCurve::new(date(), vec![(1.0, 0.02), (1.0, 0.03)]).is_err());
        assert!(ZeroCurve::new(date(), vec![(2.0, 0.02), (1.0, 0.03)]).is_err());
        assert!(ZeroCurve::new(date(), vec![(1.0, f64::NAN), (2.0, 0.03)]).is_err());
    }

    #[test]
    fn discount_factor_fixed_points() {
        let c = flat(0.05);
        assert_eq!(c.discount_factor(0.0).unwrap(), 1.0);
        assert_eq!(flat(0.0).discount_factor(7.0).unwrap(), 1.0);
        // exp(-0.10) to ten digits
        assert!((c.discount_factor(2.0).unwrap() - 0.9048374180).abs() < 1e-10);
        assert!(c.discount_factor(-0.5).is_err());
    }

    #[test]
    fn zero_rate_interpolates_linearly_and_extrapolates_flat() {
        let c = ZeroCurve::new(date(), vec![(1.0, 0.02), (3.0, 0.04)]).unwrap();
        assert_eq!(c.zero_rate(0.1), 0.02);
        assert_eq!(c.zero_rate(10.0), 0.04);
        assert!((c.zero_rate(2.0) - 0.03).abs() < 1e-15);
        assert!((c.zero_rate(1.5) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn riskfree_price_fixed_points() {
        let one_year = CashflowSchedule::new(vec![(1.0, 100.0)]).unwrap();
        assert_eq!(flat(0.0).riskfree_price(&one_year).unwrap(), 100.0);
        assert!((flat(0.05).riskfree_price(&one_year).unwrap() - 95.1229424501).abs() < 1e-9);
        let two = CashflowSchedule::new(vec![(0.5, 2.0), (1.0, 102.0)]).unwrap();
        assert_eq!(flat(0.0).riskfree_price(&two).unwrap(), 104.0);
    }

    #[test]
    fn coupon_equivalent_yield_is_zero_on_flat_zero_curve() {
        let cf = CashflowSchedule::new(vec![(0.5, 2.0), (1.0, 102.0)]).unwrap();
        let y = flat(0.0).coupon_equivalent_riskfree_yield(&cf).unwrap();
        assert!(y.abs() < 1e-12);
    }

    #[test]
    fn coupon_equivalent_yield_matches_compounding_conversion() {
        // Zero-coupon flow on a flat continuously compounded curve at r:
        // (1 + y/2)^2 = e^r, i.e. y = 2 (e^(r/2) - 1), independent of T.
        for (r, t) in [(0.04, 7.0), (0.01, 2.0), (0.08, 25.0)] {
            let cf = CashflowSchedule::new(vec![(t, 100.0)]).unwrap();
            let y = flat(r).coupon_equivalent_riskfree_yield(&cf).unwrap();
            let closed = 2.0 * ((r / 2.0).exp() - 1.0);
            assert!(
                (y - closed).abs() < 1e-10,
                "r={r} t={t}: y={y} closed={closed}"
            );
        }
    }

    #[test]
    fn coupon_equivalent_yield_matches_brute_force_bisection() {
        let mut flows: Vec<(f64, f64)> = (1..=20).map(|k| (0.5 * k as f64, 2.0)).collect();
        flows.last_mut().unwrap().1 += 100.0;
        let cf = CashflowSchedule::new(flows).unwrap();
        let c = flat(0.03);
        let y = c.coupon_equivalent_riskfree_yield(&cf).unwrap();
        let target = c.riskfree_price(&cf).unwrap();
        let (mut lo, mut hi) = (-0.5f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if crate::solver::price_semiannual(cf.flows(), mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((y - 0.5 * (lo + hi)).abs() < 1e-9);
    }

    #[test]
    fn yield_invariant_to_splitting_a_flow() {
        let whole = CashflowSchedule::new(vec![(1.0, 100.0), (2.0, 100.0)]).unwrap();
        let split =
            CashflowSchedule::new(vec![(1.0, 50.0), (1.0, 50.0), (2.0, 100.0)]).unwrap();
        assert_eq!(whole, split);
        let c = flat(0.027);
        let y0 = c.coupon_equivalent_riskfree_yield(&whole).unwrap();
        let y1 = c.coupon_equivalent_riskfree_yield(&split).unwrap();
        assert_eq!(y0, y1);
    }

    #[test]
    fn discount_factor_non_increasing_on_monotone_curves() {
        // 1,000 random curves with non-negative, non-decreasing rates.
        let mut rng = SplitMix64::new(0x5eed_cafe);
        for _ in 0..1_000 {
            let n = 2 + (rng.next_u64() % 6) as usize;
            let mut tenor = 0.0;
            let mut rate = 0.0;
            let mut pts = Vec::with_capacity(n);
            for _ in 0..n {
                tenor += 0.25 + 5.0 * rng.next_f64();
                rate += 0.02 * rng.next_f64();
                pts.push((tenor, rate));
            }
            let c = ZeroCurve::new(date(), pts).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..60 {
                let t = k as f64 * 0.6;
                let df = c.discount_factor(t).unwrap();
                assert!(df <= prev + 1e-15, "df increased at t={t}");
                prev = df;
            }
        }
    }

    #[test]
    fn repricing_at_solved_yield_roundtrips() {
        let mut rng = SplitMix64::new(41);
        for _ in 0..200 {
            let coupon = 0.08 * rng.next_f64();
            let half_periods = 1 + (rng.next_u64() % 40) as usize;
            let mut flows: Vec<(f64, f64)> = (1..=half_periods)
                .map(|k| (0.5 * k as f64, 100.0 * coupon / 2.0 + 1e-9))
                .collect();
            flows.last_mut().unwrap().1 += 100.0;
            let cf = CashflowSchedule::new(flows).unwrap();
            let z = 0.12 * rng.next_f64() - 0.01;
            let c = flat(z);
            let y = c.coupon_equivalent_riskfree_yield(&cf).unwrap();
            let repriced = crate::solver::price_semiannual(cf.flows(), y);
            let target = c.riskfree_price(&cf).unwrap();
            assert!((repriced - target).abs() < 1e-8);
        }
    }
}
