//! CSV ingestion and emission for every pipeline artifact.
//!
//! Readers validate headers exactly, report failures with file and line
//! context, and map blank optional fields to `None`. Writers print every
//! float with ten significant digits so reruns are byte-comparable.

use chrono::NaiveDate;
use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use thiserror::Error;

use crate::bonds::{Bond, RatingScale, SaleMethod};
use crate::curve::ZeroCurve;
use crate::fiscal::{CountyShares, CountyYear, SectorWeight};
use crate::liquidity::LiquidityRow;
use crate::matching::{BalanceRow, Event, FeatureRow, MatchResult};
use crate::panel::{FitResult, PanelData};
use crate::spreads::TaxRegime;
use crate::trades::{BondMonthObs, CleanReport, Side, TradeRecord};
use crate::util::fmt_sig10;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{file}: {source}")]
    File {
        file: String,
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Csv { file: String, source: csv::Error },
    #[error("{file}: expected header `{expected}`, got `{got}`")]
    Header {
        file: String,
        expected: String,
        got: String,
    },
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: u64, msg: String },
}

struct Ctx<'a> {
    file: &'a str,
    line: u64,
}

impl Ctx<'_> {
    fn err(&self, msg: impl Into<String>) -> IoError {
        IoError::Parse {
            file: self.file.to_string(),
            line: self.line,
            msg: msg.into(),
        }
    }

    fn req(&self, record: &csv::StringRecord, idx: usize, name: &str) -> Result<String, IoError> {
        let value = record.get(idx).unwrap_or("").trim();
        if value.is_empty() {
            return Err(self.err(format!("{name} must not be blank")));
        }
        Ok(value.to_string())
    }

    fn opt(&self, record: &csv::StringRecord, idx: usize) -> Option<String> {
        let value = record.get(idx).unwrap_or("").trim();
        if value.is_empty() {
            None
        } else {
            Some(value.to_string())
        }
    }

    fn f64(&self, value: &str, name: &str) -> Result<f64, IoError> {
        value
            .trim()
            .parse::<f64>()
            .map_err(|e| self.err(format!("{name} `{value}`: {e}")))
    }

    fn opt_f64(
        &self,
        record: &csv::StringRecord,
        idx: usize,
        name: &str,
    ) -> Result<Option<f64>, IoError> {
        match self.opt(record, idx) {
            None => Ok(None),
            Some(v) => self.f64(&v, name).map(Some),
        }
    }

    fn i32(&self, value: &str, name: &str) -> Result<i32, IoError> {
        value
            .trim()
            .parse::<i32>()
            .map_err(|e| self.err(format!("{name} `{value}`: {e}")))
    }

    fn date(&self, value: &str, name: &str) -> Result<NaiveDate, IoError> {
        NaiveDate::parse_from_str(value.trim(), "%Y-%m-%d")
            .map_err(|e| self.err(format!("{name} `{value}`: {e}")))
    }

    fn opt_date(
        &self,
        record: &csv::StringRecord,
        idx: usize,
        name: &str,
    ) -> Result<Option<NaiveDate>, IoError> {
        match self.opt(record, idx) {
            None => Ok(None),
            Some(v) => self.date(&v, name).map(Some),
        }
    }

    fn bool01(&self, value: &str, name: &str) -> Result<bool, IoError> {
        match value.trim() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(self.err(format!("{name} must be 0 or 1, got `{other}`"))),
        }
    }
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        file: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> IoError {
    IoError::Csv {
        file: path.display().to_string(),
        source,
    }
}

/// Open `path`, check its header equals `expected`, and return the reader
/// positioned at the first data record.
fn open_checked(
    path: &Path,
    expected: &[&str],
) -> Result<csv::Reader<std::fs::File>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let got: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if got != expected {
        return Err(IoError::Header {
            file: path.display().to_string(),
            expected: expected.join(","),
            got: got.join(","),
        });
    }
    Ok(reader)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

pub const BOND_HEADER: [&str; 19] = [
    "cusip",
    "dated_date",
    "maturity_date",
    "coupon_rate",
    "amount_issued",
    "offering_price",
    "offering_yield",
    "sale_method",
    "callable",
    "insured",
    "go",
    "bank_qualified",
    "refunding",
    "credit_enhanced",
    "tax_exempt_fed",
    "tax_exempt_state",
    "state",
    "county_fips",
    "rating",
];

/// Reference data keyed by cusip plus counts of coerced fields.
#[derive(Debug, Default)]
pub struct BondFile {
    pub bonds: HashMap<String, Bond>,
    /// Coupons present in the file but outside [0, 0.20], loaded as missing.
    pub coerced_coupons: usize,
}

pub fn read_bonds(path: &Path, scale: &RatingScale) -> Result<BondFile, IoError> {
    let file = path.display().to_string();
    let mut reader = open_checked(path, &BOND_HEADER)?;
    let mut out = BondFile::default();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ctx = Ctx {
            file: &file,
            line: record_line(&record),
        };
        let cusip = ctx.req(&record, 0, "cusip")?;
        let mut coupon_rate = ctx.opt_f64(&record, 3, "coupon_rate")?;
        if let Some(c) = coupon_rate {
            if !(0.0..=0.20).contains(&c) {
                coupon_rate = None;
                out.coerced_coupons += 1;
            }
        }
        let sale_method = match ctx.opt(&record, 7) {
            None => None,
            Some(v) => Some(
                SaleMethod::parse(&v)
                    .ok_or_else(|| ctx.err(format!("sale_method `{v}` not recognized")))?,
            ),
        };
        let rating = match ctx.opt(&record, 18) {
            None => None,
            Some(grade) => Some(
                crate::bonds::encode_rating(&grade, scale)
                    .map_err(|e| ctx.err(e.to_string()))?,
            ),
        };
        let bond = Bond {
            cusip: cusip.clone(),
            dated_date: ctx.date(&ctx.req(&record, 1, "dated_date")?, "dated_date")?,
            maturity_date: ctx.opt_date(&record, 2, "maturity_date")?,
            coupon_rate,
            amount_issued: ctx.opt_f64(&record, 4, "amount_issued")?,
            offering_price: ctx.opt_f64(&record, 5, "offering_price")?,
            offering_yield: ctx.opt_f64(&record, 6, "offering_yield")?,
            sale_method,
            callable: ctx.bool01(&ctx.req(&record, 8, "callable")?, "callable")?,
            insured: ctx.bool01(&ctx.req(&record, 9, "insured")?, "insured")?,
            general_obligation: ctx.bool01(&ctx.req(&record, 10, "go")?, "go")?,
            bank_qualified: ctx.bool01(&ctx.req(&record, 11, "bank_qualified")?, "bank_qualified")?,
            refunding: ctx.bool01(&ctx.req(&record, 12, "refunding")?, "refunding")?,
            credit_enhanced: ctx.bool01(
                &ctx.req(&record, 13, "credit_enhanced")?,
                "credit_enhanced",
            )?,
            tax_exempt_federal: ctx.bool01(
                &ctx.req(&record, 14, "tax_exempt_fed")?,
                "tax_exempt_fed",
            )?,
            tax_exempt_state: ctx.bool01(
                &ctx.req(&record, 15, "tax_exempt_state")?,
                "tax_exempt_state",
            )?,
            state: ctx.req(&record, 16, "state")?,
            county_fips: ctx.opt(&record, 17),
            rating,
        };
        if out.bonds.insert(cusip.clone(), bond).is_some() {
            return Err(ctx.err(format!("duplicate cusip {cusip}")));
        }
    }
    Ok(out)
}

pub const TRADE_HEADER: [&str; 6] = ["cusip", "trade_date", "price", "yield", "par_volume", "side"];

pub fn read_trades(path: &Path) -> Result<Vec<TradeRecord>, IoError> {
    let file = path.display().to_string();
    let mut reader = open_checked(path, &TRADE_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ctx = Ctx {
            file: &file,
            line: record_line(&record),
        };
        let side_code = ctx.req(&record, 5, "side")?;
        let side = Side::parse(&side_code)
            .ok_or_else(|| ctx.err(format!("side must be P, S, or D, got `{side_code}`")))?;
        out.push(TradeRecord {
            cusip: ctx.req(&record, 0, "cusip")?,
            trade_date: ctx.date(&ctx.req(&record, 1, "trade_date")?, "trade_date")?,
            price: ctx.f64(&ctx.req(&record, 2, "price")?, "price")?,
            yield_: ctx.f64(&ctx.req(&record, 3, "yield")?, "yield")?,
            par_volume: ctx.f64(&ctx.req(&record, 4, "par_volume")?, "par_volume")?,
            side,
        });
    }
    Ok(out)
}

pub fn write_trades(path: &Path, trades: &[TradeRecord]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer
        .write_record(TRADE_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for t in trades {
        writer
            .write_record([
                t.cusip.as_str(),
                &t.trade_date.to_string(),
                &fmt_sig10(t.price),
                &fmt_sig10(t.yield_),
                &fmt_sig10(t.par_volume),
                t.side.code(),
            ])
            .map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}

pub const CURVE_HEADER: [&str; 3] = ["as_of_date", "tenor_years", "zero_rate_cc"];

/// Load one curve per distinct as-of date, sorted by date.
pub fn read_curves(path: &Path) -> Result<Vec<ZeroCurve>, IoError> {
    let file = path.display().to_string();
    let mut reader = open_checked(path, &CURVE_HEADER)?;
    let mut grouped: BTreeMap<NaiveDate, Vec<(f64, f64)>> = BTreeMap::new();
    let mut first_line: HashMap<NaiveDate, u64> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ctx = Ctx {
            file: &file,
            line: record_line(&record),
        };
        let as_of = ctx.date(&ctx.req(&record, 0, "as_of_date")?, "as_of_date")?;
        let tenor = ctx.f64(&ctx.req(&record, 1, "tenor_years")?, "tenor_years")?;
        let rate = ctx.f64(&ctx.req(&record, 2, "zero_rate_cc")?, "zero_rate_cc")?;
        first_line.entry(as_of).or_insert(ctx.line);
        grouped.entry(as_of).or_default().push((tenor, rate));
    }
    let mut curves = Vec::with_capacity(grouped.len());
    for (as_of, points) in grouped {
        let line = first_line[&as_of];
        let curve = ZeroCurve::new(as_of, points).map_err(|e| IoError::Parse {
            file: file.clone(),
            line,
            msg: format!("curve {as_of}: {e}"),
        })?;
        curves.push(curve);
    }
    Ok(curves)
}

pub const STATE_TAX_HEADER: [&str; 3] = ["state", "year", "top_rate"];
pub const LOCAL_TAX_HEADER: [&str; 3] = ["fips", "year", "local_rate"];
pub const FEDERAL_TAX_HEADER: [&str; 2] = ["year", "top_rate"];

pub fn read_state_tax(path: &Path, regime: &mut TaxRegime) -> Result<usize, IoError> {
    let file = path.display().to_string();
    let mut reader = open_checked(path, &STATE_TAX_HEADER)?;
    let mut n = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ctx = Ctx {
            file: &file,
            line: record_line(&record),
        };
        let state = ctx.req(&record, 0, "state")?;
        let year = ctx.i32(&ctx.req(&record, 1, "year")?, "year")?;
        let rate = ctx.f64(&ctx.req(&record, 2, "top_rate")?, "top_rate")?;
        regime
            .set_state(&state, year, rate)
            .map_err(|e| ctx.err(e.to_string()))?;
        n += 1;
    }
    Ok(n)
}

pub fn read_local_tax(path: &Path, regime: &mut TaxRegime) -> Result<usize, IoError> {
    let file = path.display().to_string();
    let mut reader = open_checked(path, &LOCAL_TAX_HEADER)?;
    regime.enable_local();
    let mut n = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ctx = Ctx {
            file: &file,
            line: record_line(&record),
        };
        let fips = ctx.req(&record, 0, "fips")?;
        let year = ctx.i32(&ctx.req(&record, 1, "year")?, "year")?;
        let rate = ctx.f64(&ctx.req(&record, 2, "local_rate")?, "local_rate")?;
        regime
            .set_local(&fips, year, rate)
            .map_err(|e| ctx.err(e.to_string()))?;
        n += 1;
    }
    Ok(n)
}

/// Replace the federal schedule with the file's contents.
pub fn read_federal_tax(path: &Path, regime: &mut TaxRegime) -> Result<usize, IoError> {
    let file = path.display().to_string();
    let mut reader = open_checked(path, &FEDERAL_TAX_HEADER)?;
    let mut n = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ctx = Ctx {
            file: &file,
            line: record_line(&record),
        };
        let year = ctx.i32(&ctx.req(&record, 0, "year")?, "year")?;
        let rate = ctx.f64(&ctx.req(&record, 1, "top_rate")?, "top_rate")?;
        regime
            .set_federal(year, rate)
            .map_err(|e| ctx.err(e.to_string()))?;
        n += 1;
    }
    Ok(n)
}

pub const COUNTY_HEADER: [&str; 13] = [
    "fips",
    "year",
    "labor_force",
    "unemployment_rate",
    "total_revenue",
    "state_igr",
    "total_expenditure",
    "interest_general",
    "interest_total",
    "total_lt_debt",
    "debt_retired",
    "property_tax",
    "population",
];

pub fn read_county(path: &Path) -> Result<Vec<CountyYear>, IoError> {
    let file = path.display().to_string();
    let mut reader = open_checked(path, &COUNTY_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ctx = Ctx {
            file: &file,
            line: record_line(&record),
        };
        out.push(CountyYear {
            fips: ctx.req(&record, 0, "fips")?,
            year: ctx.i32(&ctx.req(&record, 1, "year")?, "year")?,
            labor_force: ctx.opt_f64(&record, 2, "labor_force")?,
            unemployment_rate: ctx.opt_f64(&record, 3, "unemployment_rate")?,
            total_revenue: ctx.opt_f64(&record, 4, "total_revenue")?,
            state_igr: ctx.opt_f64(&record, 5, "state_igr")?,
            total_expenditure: ctx.opt_f64(&record, 6, "total_expenditure")?,
            interest_general: ctx.opt_f64(&record, 7, "interest_general")?,
            interest_total: ctx.opt_f64(&record, 8, "interest_total")?,
            total_lt_debt: ctx.opt_f64(&record, 9, "total_lt_debt")?,
            debt_retired: ctx.opt_f64(&record, 10, "debt_retired")?,
            property_tax: ctx.opt_f64(&record, 11, "property_tax")?,
            population: ctx.opt_f64(&record, 12, "population")?,
        });
    }
    Ok(out)
}

pub const MULTIPLIER_HEADER: [&str; 4] = ["industry", "sector", "weight_up", "weight_down"];
pub const SHARES_HEADER: [&str; 4] = ["fips", "sector", "wage_share", "emp_share"];

/// Sector weight rows grouped by industry, file order preserved.
pub fn read_multiplier(path: &Path) -> Result<BTreeMap<String, Vec<SectorWeight>>, IoError> {
    let file = path.display().to_string();
    let mut reader = open_checked(path, &MULTIPLIER_HEADER)?;
    let mut out: BTreeMap<String, Vec<SectorWeight>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ctx = Ctx {
            file: &file,
            line: record_line(&record),
        };
        let industry = ctx.req(&record, 0, "industry")?;
        out.entry(industry).or_default().push(SectorWeight {
            sector: ctx.req(&record, 1, "sector")?,
            weight_up: ctx.f64(&ctx.req(&record, 2, "weight_up")?, "weight_up")?,
            weight_down: ctx.f64(&ctx.req(&record, 3, "weight_down")?, "weight_down")?,
        });
    }
    Ok(out)
}

/// County sector shares keyed fips, then sector.
pub fn read_shares(
    path: &Path,
) -> Result<BTreeMap<String, HashMap<String, CountyShares>>, IoError> {
    let file = path.display().to_string();
    let mut reader = open_checked(path, &SHARES_HEADER)?;
    let mut out: BTreeMap<String, HashMap<String, CountyShares>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ctx = Ctx {
            file: &file,
            line: record_line(&record),
        };
        let fips = ctx.req(&record, 0, "fips")?;
        let sector = ctx.req(&record, 1, "sector")?;
        let shares = CountyShares {
            wage_share: ctx.f64(&ctx.req(&record, 2, "wage_share")?, "wage_share")?,
            emp_share: ctx.f64(&ctx.req(&record, 3, "emp_share")?, "emp_share")?,
        };
        if out.entry(fips.clone()).or_default().insert(sector.clone(), shares).is_some() {
            return Err(ctx.err(format!("duplicate share row for {fips}/{sector}")));
        }
    }
    Ok(out)
}

pub const EVENT_HEADER: [&str; 3] = ["event_id", "treated_fips", "event_date"];

pub fn read_events(path: &Path) -> Result<Vec<Event>, IoError> {
    let file = path.display().to_string();
    let mut reader = open_checked(path, &EVENT_HEADER)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ctx = Ctx {
            file: &file,
            line: record_line(&record),
        };
        out.push(Event {
            event_id: ctx.req(&record, 0, "event_id")?,
            treated_fips: ctx.req(&record, 1, "treated_fips")?,
            event_date: ctx.date(&ctx.req(&record, 2, "event_date")?, "event_date")?,
        });
    }
    Ok(out)
}

/// Matching features: `fips,region` then one numeric column per feature.
/// Returns the rows plus the feature names taken from the header.
pub fn read_features(path: &Path) -> Result<(Vec<FeatureRow>, Vec<String>), IoError> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.len() < 3 || header[0] != "fips" || header[1] != "region" {
        return Err(IoError::Header {
            file,
            expected: "fips,region,<feature>...".to_string(),
            got: header.join(","),
        });
    }
    let names: Vec<String> = header[2..].to_vec();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ctx = Ctx {
            file: &file,
            line: record_line(&record),
        };
        let mut features = Vec::with_capacity(names.len());
        for (j, name) in names.iter().enumerate() {
            features.push(ctx.f64(&ctx.req(&record, j + 2, name)?, name)?);
        }
        out.push(FeatureRow {
            fips: ctx.req(&record, 0, "fips")?,
            region: ctx.opt(&record, 1),
            features,
        });
    }
    Ok((out, names))
}

/// Column-sniffing panel reader: a column is numeric when every non-blank
/// value parses as a float (blanks load as NaN); otherwise it is
/// categorical with blanks kept as empty strings.
pub fn read_panel(path: &Path) -> Result<PanelData, IoError> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut columns: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let ctx = Ctx {
            file: &file,
            line: record_line(&record),
        };
        if record.len() != header.len() {
            return Err(ctx.err(format!(
                "expected {} fields, got {}",
                header.len(),
                record.len()
            )));
        }
        for (j, value) in record.iter().enumerate() {
            columns[j].push(value.trim().to_string());
        }
    }
    let mut data = PanelData::new();
    for (name, column) in header.iter().zip(columns) {
        let numeric = column
            .iter()
            .all(|v| v.is_empty() || v.parse::<f64>().is_ok());
        let added = if numeric {
            data.add_numeric(
                name,
                column
                    .iter()
                    .map(|v| {
                        if v.is_empty() {
                            f64::NAN
                        } else {
                            v.parse::<f64>().expect("checked above")
                        }
                    })
                    .collect(),
            )
        } else {
            data.add_categorical(name, column)
        };
        added.map_err(|e| IoError::Parse {
            file: file.clone(),
            line: 1,
            msg: format!("column {name}: {e}"),
        })?;
    }
    Ok(data)
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(fmt_sig10).unwrap_or_default()
}

/// Columns ordered numeric first, then categorical, each alphabetically;
/// NaN cells print blank.
pub fn write_panel(path: &Path, data: &PanelData) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let numeric = data.numeric_names();
    let categorical = data.categorical_names();
    let header: Vec<&str> = numeric.iter().chain(categorical.iter()).copied().collect();
    writer.write_record(&header).map_err(|e| csv_err(path, e))?;
    for row in 0..data.n_rows() {
        let mut record = Vec::with_capacity(header.len());
        for name in &numeric {
            let v = data.numeric(name).expect("listed name exists")[row];
            record.push(if v.is_nan() { String::new() } else { fmt_sig10(v) });
        }
        for name in &categorical {
            record.push(data.categorical(name).expect("listed name exists")[row].clone());
        }
        writer.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}

/// One row per cleaning rule in pipeline order, then totals.
pub fn write_clean_report(path: &Path, report: &CleanReport) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer
        .write_record(["rule", "count"])
        .map_err(|e| csv_err(path, e))?;
    writer
        .write_record(["input", &report.input.to_string()])
        .map_err(|e| csv_err(path, e))?;
    for (label, count) in report.rows() {
        writer
            .write_record([label, &count.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    writer
        .write_record(["survivors", &report.survivors.to_string()])
        .map_err(|e| csv_err(path, e))?;
    writer
        .write_record(["surviving cusips", &report.surviving_cusips.to_string()])
        .map_err(|e| csv_err(path, e))?;
    writer.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}

pub const MONTHLY_HEADER: [&str; 13] = [
    "cusip",
    "year",
    "month",
    "vw_yield",
    "vw_price",
    "total_volume",
    "n_trades",
    "remaining_maturity_years",
    "riskfree_yield",
    "spread",
    "after_tax_yield",
    "after_tax_spread",
    "retention_applied",
];

/// Monthly observations with spread fields blank where no curve attached.
pub fn write_monthly(path: &Path, obs: &[BondMonthObs]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer
        .write_record(MONTHLY_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for o in obs {
        let spread = o.spread.as_ref();
        writer
            .write_record([
                o.cusip.as_str(),
                &o.year.to_string(),
                &o.month.to_string(),
                &fmt_sig10(o.vw_yield),
                &fmt_sig10(o.vw_price),
                &fmt_sig10(o.total_volume),
                &o.n_trades.to_string(),
                &fmt_sig10(o.remaining_maturity_years),
                &opt_cell(spread.map(|s| s.riskfree_yield)),
                &opt_cell(spread.map(|s| s.spread)),
                &opt_cell(spread.map(|s| s.after_tax_yield)),
                &opt_cell(spread.map(|s| s.after_tax_spread)),
                if spread.is_some() { "1" } else { "0" },
            ])
            .map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}

pub const LIQUIDITY_HEADER: [&str; 7] = [
    "cusip",
    "markup_bps",
    "markup_po_bps",
    "markup_pv_bps",
    "price_dispersion",
    "amihud",
    "n_trades_window",
];

pub fn write_liquidity(path: &Path, rows: &[LiquidityRow]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer
        .write_record(LIQUIDITY_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        writer
            .write_record([
                r.cusip.as_str(),
                &opt_cell(r.markup_bps),
                &opt_cell(r.markup_po_bps),
                &opt_cell(r.markup_pv_bps),
                &opt_cell(r.price_dispersion),
                &opt_cell(r.amihud),
                &r.n_trades_window.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}

pub const MATCH_HEADER: [&str; 5] = [
    "event_id",
    "treated_fips",
    "control_fips",
    "rank",
    "distance",
];

pub fn write_matches(path: &Path, results: &[MatchResult]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer
        .write_record(MATCH_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for result in results {
        for control in &result.controls {
            writer
                .write_record([
                    result.event_id.as_str(),
                    result.treated_fips.as_str(),
                    control.fips.as_str(),
                    &control.rank.to_string(),
                    &fmt_sig10(control.distance),
                ])
                .map_err(|e| csv_err(path, e))?;
        }
    }
    writer.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}

pub const BALANCE_HEADER: [&str; 5] = [
    "feature",
    "treated_mean",
    "control_mean",
    "difference",
    "t_stat",
];

pub fn write_balance(path: &Path, rows: &[BalanceRow]) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer
        .write_record(BALANCE_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for r in rows {
        writer
            .write_record([
                r.feature.as_str(),
                &fmt_sig10(r.treated_mean),
                &fmt_sig10(r.control_mean),
                &fmt_sig10(r.difference),
                &opt_cell(r.t_stat),
            ])
            .map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}

pub const FIT_HEADER: [&str; 5] = ["term", "estimate", "se", "t", "p"];

pub fn write_fit_results(path: &Path, fit: &FitResult) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer
        .write_record(FIT_HEADER)
        .map_err(|e| csv_err(path, e))?;
    for (i, term) in fit.terms.iter().enumerate() {
        writer
            .write_record([
                term.as_str(),
                &fmt_sig10(fit.estimates[i]),
                &fmt_sig10(fit.se[i]),
                &fmt_sig10(fit.t_stats[i]),
                &fmt_sig10(fit.p_values[i]),
            ])
            .map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}

/// Key=value diagnostics for one fit, fixed key order.
pub fn write_fit_diagnostics(path: &Path, fit: &FitResult) -> Result<(), IoError> {
    let mut text = String::new();
    text.push_str(&format!("n={}\n", fit.n));
    text.push_str(&format!("k_model={}\n", fit.k_model));
    text.push_str(&format!("r_squared={}\n", fmt_sig10(fit.r_squared)));
    text.push_str(&format!(
        "adj_r_squared={}\n",
        fmt_sig10(fit.adj_r_squared)
    ));
    text.push_str(&format!("fe_iterations={}\n", fit.fe_iterations));
    text.push_str(&format!("dropped_singletons={}\n", fit.dropped_singletons));
    text.push_str(&format!("dof_inference={}\n", fmt_sig10(fit.dof_inference)));
    text.push_str(&format!(
        "cluster_groups={}\n",
        fit.cluster_groups
            .iter()
            .map(|g| g.to_string())
            .collect::<Vec<_>>()
            .join(";")
    ));
    text.push_str(&format!("psd_adjusted={}\n", u8::from(fit.psd_adjusted)));
    text.push_str(&format!("dropped_collinear={}\n", fit.dropped.join(";")));
    std::fs::write(path, text).map_err(|e| file_err(path, e))
}

pub fn write_bonds(path: &Path, bonds: &BTreeMap<String, Bond>, scale: &RatingScale) -> Result<(), IoError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    writer
        .write_record(BOND_HEADER)
        .map_err(|e| csv_err(path, e))?;
    let flag = |b: bool| if b { "1" } else { "0" };
    for bond in bonds.values() {
        writer
            .write_record([
                bond.cusip.as_str(),
                &bond.dated_date.to_string(),
                &bond
                    .maturity_date
                    .map(|d| d.to_string())
                    .unwrap_or_default(),
                &opt_cell(bond.coupon_rate),
                &opt_cell(bond.amount_issued),
                &opt_cell(bond.offering_price),
                &opt_cell(bond.offering_yield),
                bond.sale_method.map(|m| m.as_str()).unwrap_or(""),
                flag(bond.callable),
                flag(bond.insured),
                flag(bond.general_obligation),
                flag(bond.bank_qualified),
                flag(bond.refunding),
                flag(bond.credit_enhanced),
                flag(bond.tax_exempt_federal),
                flag(bond.tax_exempt_state),
                bond.state.as_str(),
                bond.county_fips.as_deref().unwrap_or(""),
                bond.rating
                    .and_then(|code| scale.decode(code))
                    .unwrap_or(""),
            ])
            .map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(|e| file_err(path, e))?;
    Ok(())
}
