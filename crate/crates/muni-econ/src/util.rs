//! Numeric and calendar helpers shared across modules.

use chrono::{Datelike, NaiveDate};

/// Pairwise (cascade) sum of `f(0), f(1), ..., f(n-1)`.
///
/// The reduction tree depends only on `n`, so results are independent of
/// thread scheduling and identical across runs. Error grows like O(log n)
/// rather than O(n) for naive left-to-right accumulation.
pub fn pairwise_sum_by<F: Fn(usize) -> f64>(n: usize, f: F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= 32 {
            let mut acc = 0.0;
            for i in lo..hi {
                acc += f(i);
            }
            acc
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, f) + go(mid, hi, f)
        }
    }
    if n == 0 {
        0.0
    } else {
        go(0, n, &f)
    }
}

/// Pairwise sum of a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    pairwise_sum_by(xs.len(), |i| xs[i])
}

/// Volume-weighted mean `sum(w*x) / sum(w)` with pairwise accumulation.
///
/// Returns `None` when the weight total is zero or either slice is empty.
pub fn weighted_mean(xs: &[f64], ws: &[f64]) -> Option<f64> {
    if xs.is_empty() || xs.len() != ws.len() {
        return None;
    }
    let num = pairwise_sum_by(xs.len(), |i| ws[i] * xs[i]);
    let den = pairwise_sum(ws);
    if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

/// Format `x` with `sig` significant digits, plain decimal notation.
///
/// Magnitudes below 1e-4 or at/above 1e15 fall back to scientific notation.
/// Formatting goes through Rust's own float printer, so output is identical
/// across platforms.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let exp: i32 = sci
        .split_once('e')
        .map(|(_, e)| e.parse().unwrap_or(0))
        .unwrap_or(0);
    if !(-4..15).contains(&exp) {
        return sci;
    }
    let dec = (sig as i32 - 1 - exp).max(0) as usize;
    format!("{:.*}", dec, x)
}

/// Ten-significant-digit formatting used for every numeric CSV field and
/// every number the CLI prints.
pub fn fmt_sig10(x: f64) -> String {
    fmt_sig(x, 10)
}

/// Year fraction between two dates on an ACT/365.25 basis.
pub fn year_fraction(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64 / 365.25
}

/// Signed whole-month difference `to − from`, ignoring days of month.
pub fn months_between(from: NaiveDate, to: NaiveDate) -> i32 {
    (to.year() - from.year()) * 12 + to.month() as i32 - from.month() as i32
}

/// Last calendar day of the given year/month.
pub fn month_end(year: i32, month: u32) -> NaiveDate {
    let (ny, nm) = if month == 12 {
        (year + 1, 1)
    } else {
        (year, month + 1)
    };
    NaiveDate::from_ymd_opt(ny, nm, 1)
        .expect("valid month")
        .pred_opt()
        .expect("valid predecessor")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_inputs() {
        let xs = [1.0, 2.0, 3.0, 4.5];
        assert_eq!(pairwise_sum(&xs), 10.5);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn pairwise_is_close_to_exact_on_long_inputs() {
        let xs: Vec<f64> = (0..10_000).map(|i| 0.1 + (i % 7) as f64).collect();
        let exact: f64 = 10_000.0 * 0.1 + (0..10_000).map(|i| (i % 7) as f64).sum::<f64>();
        assert!((pairwise_sum(&xs) - exact).abs() < 1e-6);
    }

    #[test]
    fn weighted_mean_basics() {
        assert_eq!(weighted_mean(&[3.0], &[100.0]), Some(3.0));
        let m = weighted_mean(&[0.03, 0.04], &[100_000.0, 300_000.0]).unwrap();
        assert!((m - 0.0375).abs() < 1e-15);
        assert_eq!(weighted_mean(&[], &[]), None);
        assert_eq!(weighted_mean(&[1.0], &[0.0]), None);
    }

    #[test]
    fn fmt_sig_covers_magnitudes() {
        assert_eq!(fmt_sig(0.0, 10), "0");
        assert_eq!(fmt_sig(7.626990466e9, 10), "7626990466");
        assert_eq!(fmt_sig(0.0404026801, 10), "0.04040268010");
        assert_eq!(fmt_sig(100.0, 10), "100.0000000");
        assert_eq!(fmt_sig(-2.5, 3), "-2.50");
        assert_eq!(fmt_sig(1.25e-7, 10), "1.250000000e-7");
        assert_eq!(fmt_sig(3.0e16, 4), "3.000e16");
    }

    #[test]
    fn date_helpers() {
        let d1 = NaiveDate::from_ymd_opt(2012, 3, 15).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2013, 3, 15).unwrap();
        assert!((year_fraction(d1, d2) - 365.0 / 365.25).abs() < 1e-12);
        assert_eq!(months_between(d1, d2), 12);
        assert_eq!(months_between(d2, d1), -12);
        assert_eq!(
            month_end(2012, 2),
            NaiveDate::from_ymd_opt(2012, 2, 29).unwrap()
        );
        assert_eq!(
            month_end(2019, 12),
            NaiveDate::from_ymd_opt(2019, 12, 31).unwrap()
        );
    }
}
