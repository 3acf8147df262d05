//! `muni-econ`: batch pipeline over the muni-econ library.
//!
//! Every command reads the inputs named by its flags (or by a `--config`
//! key=value file), writes plain CSV outputs into the output directory,
//! and drops a run manifest recording the resolved settings, a hash over
//! them, and a digest of every input file. Reruns with the same inputs and
//! settings produce byte-identical outputs regardless of thread count;
//! `MUNI_ECON_THREADS` caps parallelism without entering the manifest.

mod config;
mod manifest;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use muni_econ::bonds::{annual_interest_delta, wealth_impact, Bond, RatingScale};
use muni_econ::io;
use muni_econ::liquidity;
use muni_econ::matching::{match_controls, match_report, own_event_exclusions, MatchOpts};
use muni_econ::panel::{build_event_study, fit, BucketWidth, FitSpec, FixedEffectSpec};
use muni_econ::spreads::TaxRegime;
use muni_econ::synth::{gen_panel, gen_trades, PanelDgp, ViolationRecipe};
use muni_econ::trades::{aggregate_monthly, attach_spreads, clean, DateWindow, Side, TradeRecord};
use muni_econ::util::fmt_sig10;

use manifest::Manifest;

#[derive(Debug)]
enum CliError {
    /// Bad flags, missing or malformed inputs; exit code 2.
    Validation(String),
    /// Failures while computing or writing results; exit code 1.
    Computation(String),
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(msg) | CliError::Computation(msg) => f.write_str(msg),
        }
    }
}

fn vfail(e: impl Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn cfail(e: impl Display) -> CliError {
    CliError::Computation(e.to_string())
}

#[derive(Parser)]
#[command(
    name = "muni-econ",
    version,
    about = "Municipal bond spreads, liquidity, matching, and panel econometrics"
)]
struct Cli {
    /// Key=value file supplying defaults for any omitted option.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the trade cleaning rules; write survivors and a drop report.
    Clean(CleanArgs),
    /// Aggregate cleaned trades to volume-weighted cusip-month rows.
    Aggregate(AggregateArgs),
    /// Aggregate and attach risk-free, spread, and after-tax fields.
    Spreads(SpreadsArgs),
    /// Issuance-window liquidity measures per cusip.
    Liquidity(LiquidityArgs),
    /// Nearest-neighbor control counties for each event.
    Match(MatchArgs),
    /// Fixed-effects panel regression driven by a spec file.
    Fit(FitArgs),
    /// Dynamic event-study regression driven by a spec file.
    EventStudy(EventStudyArgs),
    /// Bondholder wealth and borrowing-cost arithmetic.
    Impact(ImpactArgs),
    /// Synthetic data with known ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct CleanArgs {
    #[arg(long)]
    bonds: Option<PathBuf>,
    #[arg(long)]
    trades: Option<PathBuf>,
    /// First sample day (default: earliest trade date).
    #[arg(long)]
    window_start: Option<NaiveDate>,
    /// Last sample day (default: latest trade date).
    #[arg(long)]
    window_end: Option<NaiveDate>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long)]
    bonds: Option<PathBuf>,
    /// Cleaned trades file.
    #[arg(long)]
    trades: Option<PathBuf>,
    /// Comma-separated side codes to keep (P, S, D).
    #[arg(long)]
    sides: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpreadsArgs {
    #[arg(long)]
    bonds: Option<PathBuf>,
    /// Cleaned trades file.
    #[arg(long)]
    trades: Option<PathBuf>,
    /// Zero curve file, one curve per as-of date.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// State top-rate schedule.
    #[arg(long)]
    tax: Option<PathBuf>,
    /// County local-rate schedule; enables the local tax layer.
    #[arg(long)]
    local_tax: Option<PathBuf>,
    /// Replacement federal schedule; the shipped one is used otherwise.
    #[arg(long)]
    federal_tax: Option<PathBuf>,
    /// Comma-separated side codes to keep (P, S, D).
    #[arg(long)]
    sides: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LiquidityArgs {
    #[arg(long)]
    bonds: Option<PathBuf>,
    /// Raw trades file; the issuance window precedes cleaning cutoffs.
    #[arg(long)]
    trades: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    events: Option<PathBuf>,
    /// County feature file: fips,region, then one column per feature.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Neighbors per event.
    #[arg(long)]
    k: Option<usize>,
    /// Maximum admissible distance.
    #[arg(long)]
    caliper: Option<f64>,
    /// Restrict candidates to the treated county's region.
    #[arg(long)]
    same_region: bool,
    /// Measure distance in raw feature units instead of z-scores.
    #[arg(long)]
    raw_distance: bool,
    /// Months around each event within which a county's own event
    /// disqualifies it as a control.
    #[arg(long)]
    exclusion_window: Option<i32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Panel CSV; numeric columns are sniffed, the rest load as labels.
    #[arg(long)]
    panel: Option<PathBuf>,
    /// Spec file: outcome=, regressors=, fe=, cluster=, weights=.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EventStudyArgs {
    /// Panel CSV; numeric columns are sniffed, the rest load as labels.
    #[arg(long)]
    panel: Option<PathBuf>,
    /// Spec file: outcome=, cohort=, event_time=, window=, benchmark=,
    /// fe=, cluster=, weights=, trends=, regressors=.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ImpactArgs {
    /// Outstanding face value.
    #[arg(long)]
    outstanding: Option<f64>,
    /// Macaulay duration in years.
    #[arg(long)]
    duration: Option<f64>,
    /// Current yield level (decimal, semiannual convention).
    #[arg(long = "yield")]
    yield_rate: Option<f64>,
    /// Yield change (decimal).
    #[arg(long)]
    dy: Option<f64>,
    /// Principal for the annual interest delta.
    #[arg(long)]
    principal: Option<f64>,
    /// When given, also writes impact.txt and a manifest there.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(subcommand)]
    what: SynthWhat,
}

#[derive(Subcommand)]
enum SynthWhat {
    /// Panel with known treatment effect, fixed effects, and cluster noise.
    Panel(SynthPanelArgs),
    /// Bond and trade files with exact planted cleaning violations.
    Trades(SynthTradesArgs),
}

#[derive(Args)]
struct SynthPanelArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_units: Option<usize>,
    #[arg(long)]
    n_periods: Option<usize>,
    /// True treatment effect in basis points.
    #[arg(long)]
    beta_bps: Option<f64>,
    #[arg(long)]
    unit_fe_sd: Option<f64>,
    #[arg(long)]
    time_fe_sd: Option<f64>,
    #[arg(long)]
    pair_fe_sd: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    cluster_sd: Option<f64>,
    #[arg(long)]
    treated_share: Option<f64>,
    /// First post-treatment period index.
    #[arg(long)]
    post_start: Option<usize>,
    /// Differential per-period drift for treated units.
    #[arg(long)]
    pre_trend_slope: Option<f64>,
    #[arg(long)]
    n_controls: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthTradesArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Ordinary bonds carrying only clean trades.
    #[arg(long)]
    n_bonds: Option<usize>,
    #[arg(long)]
    unmatched: Option<usize>,
    #[arg(long)]
    bad_maturity: Option<usize>,
    #[arg(long)]
    missing_coupon: Option<usize>,
    #[arg(long)]
    bad_price: Option<usize>,
    #[arg(long)]
    primary_market: Option<usize>,
    #[arg(long)]
    near_issuance: Option<usize>,
    #[arg(long)]
    short_remaining: Option<usize>,
    #[arg(long)]
    bad_yield: Option<usize>,
    /// Cusips left with too few trades to survive.
    #[arg(long)]
    thin_cusips: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Config-file fallbacks for flags the command line left unset.
struct Settings {
    cfg: BTreeMap<String, String>,
}

impl Settings {
    fn path(&self, cli: &Option<PathBuf>, key: &str) -> Option<PathBuf> {
        cli.clone()
            .or_else(|| self.cfg.get(key).map(PathBuf::from))
    }

    fn req_input(&self, cli: &Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
        let path = self.path(cli, key).ok_or_else(|| {
            CliError::Validation(format!("missing input: pass --{key} or config key `{key}`"))
        })?;
        if !path.is_file() {
            return Err(CliError::Validation(format!(
                "{key} file {} does not exist",
                path.display()
            )));
        }
        Ok(path)
    }

    fn opt_input(&self, cli: &Option<PathBuf>, key: &str) -> Result<Option<PathBuf>, CliError> {
        match self.path(cli, key) {
            None => Ok(None),
            Some(path) if path.is_file() => Ok(Some(path)),
            Some(path) => Err(CliError::Validation(format!(
                "{key} file {} does not exist",
                path.display()
            ))),
        }
    }

    fn out_dir(&self, cli: &Option<PathBuf>) -> Result<PathBuf, CliError> {
        let dir = self.path(cli, "out").unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", dir.display())))?;
        Ok(dir)
    }

    fn value<T>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.cfg.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Validation(format!("config {key}={raw}: {e}"))),
        }
    }

    fn flag(&self, cli: bool, key: &str) -> Result<bool, CliError> {
        if cli {
            return Ok(true);
        }
        match self.cfg.get(key).map(String::as_str) {
            None | Some("0") | Some("false") => Ok(false),
            Some("1") | Some("true") => Ok(true),
            Some(other) => Err(CliError::Validation(format!(
                "config {key}={other}: expected 0/1 or true/false"
            ))),
        }
    }
}

fn main() -> ExitCode {
    if let Err(message) = setup_threads() {
        eprintln!("error: {message}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                CliError::Validation(_) => ExitCode::from(2),
                CliError::Computation(_) => ExitCode::from(1),
            }
        }
    }
}

fn setup_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("MUNI_ECON_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .parse()
        .map_err(|e| format!("MUNI_ECON_THREADS={raw}: {e}"))?;
    if threads == 0 {
        return Err("MUNI_ECON_THREADS must be at least 1".to_string());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| format!("thread pool: {e}"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::load(cli.config.as_deref()).map_err(CliError::Validation)?;
    let settings = Settings { cfg };
    match cli.command {
        Command::Clean(args) => cmd_clean(args, &settings),
        Command::Aggregate(args) => cmd_aggregate(args, &settings),
        Command::Spreads(args) => cmd_spreads(args, &settings),
        Command::Liquidity(args) => cmd_liquidity(args, &settings),
        Command::Match(args) => cmd_match(args, &settings),
        Command::Fit(args) => cmd_fit(args, &settings),
        Command::EventStudy(args) => cmd_event_study(args, &settings),
        Command::Impact(args) => cmd_impact(args, &settings),
        Command::Synth(args) => match args.what {
            SynthWhat::Panel(panel_args) => cmd_synth_panel(panel_args, &settings),
            SynthWhat::Trades(trades_args) => cmd_synth_trades(trades_args, &settings),
        },
    }
}

fn parse_sides(raw: &str) -> Result<Vec<Side>, CliError> {
    let mut sides = Vec::new();
    for code in raw.split(',') {
        let code = code.trim();
        let side = Side::parse(code).ok_or_else(|| {
            CliError::Validation(format!("side `{code}` is not one of P, S, D"))
        })?;
        if !sides.contains(&side) {
            sides.push(side);
        }
    }
    if sides.is_empty() {
        return Err(CliError::Validation("no sides selected".to_string()));
    }
    Ok(sides)
}

fn trade_span(trades: &[TradeRecord]) -> Option<(NaiveDate, NaiveDate)> {
    let first = trades.iter().map(|t| t.trade_date).min()?;
    let last = trades.iter().map(|t| t.trade_date).max()?;
    Some((first, last))
}

fn cmd_clean(args: CleanArgs, settings: &Settings) -> Result<(), CliError> {
    let bonds_path = settings.req_input(&args.bonds, "bonds")?;
    let trades_path = settings.req_input(&args.trades, "trades")?;
    let out = settings.out_dir(&args.out)?;

    let scale = RatingScale::default_table();
    let bond_file = io::read_bonds(&bonds_path, &scale).map_err(vfail)?;
    let trades = io::read_trades(&trades_path).map_err(vfail)?;
    if bond_file.coerced_coupons > 0 {
        eprintln!(
            "warning: {} coupons outside [0, 0.20] loaded as missing",
            bond_file.coerced_coupons
        );
    }

    let window_start = settings.value(args.window_start, "window_start")?;
    let window_end = settings.value(args.window_end, "window_end")?;
    let span = trade_span(&trades);
    let start = window_start
        .or(span.map(|s| s.0))
        .ok_or_else(|| CliError::Validation("no trades and no --window-start".to_string()))?;
    let end = window_end
        .or(span.map(|s| s.1))
        .ok_or_else(|| CliError::Validation("no trades and no --window-end".to_string()))?;
    let window = DateWindow::new(start, end).map_err(vfail)?;

    let (survivors, report) = clean(&trades, &bond_file.bonds, &window);
    io::write_trades(&out.join("cleaned_trades.csv"), &survivors).map_err(cfail)?;
    io::write_clean_report(&out.join("clean_report.csv"), &report).map_err(cfail)?;

    let mut m = Manifest::new("clean");
    m.setting("bonds", bonds_path.display());
    m.setting("trades", trades_path.display());
    m.setting("window_start", start);
    m.setting("window_end", end);
    m.input("bonds", &bonds_path);
    m.input("trades", &trades_path);
    m.output("cleaned_trades.csv");
    m.output("clean_report.csv");
    m.write(&out).map_err(CliError::Computation)?;

    println!("input={}", report.input);
    for (label, count) in report.rows() {
        println!("dropped[{label}]={count}");
    }
    println!("survivors={}", report.survivors);
    println!("surviving_cusips={}", report.surviving_cusips);
    Ok(())
}

fn cmd_aggregate(args: AggregateArgs, settings: &Settings) -> Result<(), CliError> {
    let bonds_path = settings.req_input(&args.bonds, "bonds")?;
    let trades_path = settings.req_input(&args.trades, "trades")?;
    let out = settings.out_dir(&args.out)?;
    let sides_raw = settings
        .value(args.sides, "sides")?
        .unwrap_or_else(|| "P".to_string());
    let sides = parse_sides(&sides_raw)?;

    let scale = RatingScale::default_table();
    let bond_file = io::read_bonds(&bonds_path, &scale).map_err(vfail)?;
    let trades = io::read_trades(&trades_path).map_err(vfail)?;
    let obs = aggregate_monthly(&trades, &bond_file.bonds, &sides).map_err(cfail)?;
    io::write_monthly(&out.join("monthly.csv"), &obs).map_err(cfail)?;

    let mut m = Manifest::new("aggregate");
    m.setting("bonds", bonds_path.display());
    m.setting("trades", trades_path.display());
    m.setting("sides", &sides_raw);
    m.input("bonds", &bonds_path);
    m.input("trades", &trades_path);
    m.output("monthly.csv");
    m.write(&out).map_err(CliError::Computation)?;

    println!("observations={}", obs.len());
    Ok(())
}

fn cmd_spreads(args: SpreadsArgs, settings: &Settings) -> Result<(), CliError> {
    let bonds_path = settings.req_input(&args.bonds, "bonds")?;
    let trades_path = settings.req_input(&args.trades, "trades")?;
    let curve_path = settings.req_input(&args.curve, "curve")?;
    let tax_path = settings.opt_input(&args.tax, "tax")?;
    let local_path = settings.opt_input(&args.local_tax, "local_tax")?;
    let federal_path = settings.opt_input(&args.federal_tax, "federal_tax")?;
    let out = settings.out_dir(&args.out)?;
    let sides_raw = settings
        .value(args.sides, "sides")?
        .unwrap_or_else(|| "P".to_string());
    let sides = parse_sides(&sides_raw)?;

    let mut regime = match &federal_path {
        Some(path) => {
            let mut fresh = TaxRegime::new();
            io::read_federal_tax(path, &mut fresh).map_err(vfail)?;
            fresh
        }
        None => TaxRegime::with_default_federal(),
    };
    if let Some(path) = &tax_path {
        io::read_state_tax(path, &mut regime).map_err(vfail)?;
    }
    if let Some(path) = &local_path {
        io::read_local_tax(path, &mut regime).map_err(vfail)?;
    }

    let scale = RatingScale::default_table();
    let bond_file = io::read_bonds(&bonds_path, &scale).map_err(vfail)?;
    let trades = io::read_trades(&trades_path).map_err(vfail)?;
    let curves = io::read_curves(&curve_path).map_err(vfail)?;

    let mut obs = aggregate_monthly(&trades, &bond_file.bonds, &sides).map_err(cfail)?;
    let report = attach_spreads(&mut obs, &curves, &regime, &bond_file.bonds).map_err(cfail)?;
    io::write_monthly(&out.join("monthly_spreads.csv"), &obs).map_err(cfail)?;

    let mut m = Manifest::new("spreads");
    m.setting("bonds", bonds_path.display());
    m.setting("trades", trades_path.display());
    m.setting("curve", curve_path.display());
    m.setting("sides", &sides_raw);
    m.input("bonds", &bonds_path);
    m.input("trades", &trades_path);
    m.input("curve", &curve_path);
    if let Some(path) = &tax_path {
        m.setting("tax", path.display());
        m.input("tax", path);
    }
    if let Some(path) = &local_path {
        m.setting("local_tax", path.display());
        m.input("local_tax", path);
    }
    if let Some(path) = &federal_path {
        m.setting("federal_tax", path.display());
        m.input("federal_tax", path);
    }
    m.output("monthly_spreads.csv");
    m.write(&out).map_err(CliError::Computation)?;

    println!("observations={}", obs.len());
    println!("attached={}", report.attached);
    println!("missing_curve_months={}", report.missing_curve_months.len());
    let warnings = regime.warnings();
    if warnings.missing_state > 0 {
        eprintln!(
            "warning: {} state-year lookups had no rate and used 0",
            warnings.missing_state
        );
    }
    if warnings.missing_local > 0 {
        eprintln!(
            "warning: {} county-year lookups had no local rate and used 0",
            warnings.missing_local
        );
    }
    Ok(())
}

fn cmd_liquidity(args: LiquidityArgs, settings: &Settings) -> Result<(), CliError> {
    let bonds_path = settings.req_input(&args.bonds, "bonds")?;
    let trades_path = settings.req_input(&args.trades, "trades")?;
    let out = settings.out_dir(&args.out)?;

    let scale = RatingScale::default_table();
    let bond_file = io::read_bonds(&bonds_path, &scale).map_err(vfail)?;
    let trades = io::read_trades(&trades_path).map_err(vfail)?;

    let mut by_cusip: HashMap<&str, Vec<TradeRecord>> = HashMap::new();
    for trade in &trades {
        by_cusip
            .entry(trade.cusip.as_str())
            .or_default()
            .push(trade.clone());
    }

    let sorted: BTreeMap<&String, &Bond> = bond_file.bonds.iter().collect();
    let empty = Vec::new();
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for (cusip, bond) in sorted {
        let cusip_trades = by_cusip.get(cusip.as_str()).unwrap_or(&empty);
        match liquidity::compute(bond, cusip_trades) {
            Ok(row) => rows.push(row),
            Err(_) => skipped += 1,
        }
    }
    io::write_liquidity(&out.join("liquidity.csv"), &rows).map_err(cfail)?;

    let mut m = Manifest::new("liquidity");
    m.setting("bonds", bonds_path.display());
    m.setting("trades", trades_path.display());
    m.input("bonds", &bonds_path);
    m.input("trades", &trades_path);
    m.output("liquidity.csv");
    m.write(&out).map_err(CliError::Computation)?;

    println!("bonds={}", rows.len());
    println!("skipped_no_offering_price={skipped}");
    Ok(())
}

fn cmd_match(args: MatchArgs, settings: &Settings) -> Result<(), CliError> {
    let events_path = settings.req_input(&args.events, "events")?;
    let features_path = settings.req_input(&args.features, "features")?;
    let out = settings.out_dir(&args.out)?;
    let k = settings.value(args.k, "k")?.unwrap_or(1);
    let caliper = settings.value(args.caliper, "caliper")?;
    let same_region = settings.flag(args.same_region, "same_region")?;
    let raw_distance = settings.flag(args.raw_distance, "raw_distance")?;
    let exclusion_window = settings
        .value(args.exclusion_window, "exclusion_window")?
        .unwrap_or(36);
    if k == 0 {
        return Err(CliError::Validation("k must be at least 1".to_string()));
    }
    if exclusion_window < 0 {
        return Err(CliError::Validation(
            "exclusion window must be nonnegative".to_string(),
        ));
    }

    let events = io::read_events(&events_path).map_err(vfail)?;
    let (features, feature_names) = io::read_features(&features_path).map_err(vfail)?;
    let by_fips: HashMap<&str, &muni_econ::matching::FeatureRow> =
        features.iter().map(|r| (r.fips.as_str(), r)).collect();

    let mut results = Vec::with_capacity(events.len());
    let mut treated_vectors = Vec::new();
    let mut control_vectors = Vec::new();
    for event in &events {
        let treated = by_fips.get(event.treated_fips.as_str()).ok_or_else(|| {
            CliError::Computation(format!(
                "event {}: treated county {} not in feature file",
                event.event_id, event.treated_fips
            ))
        })?;
        let mut opts = MatchOpts::new(k);
        opts.caliper = caliper;
        opts.same_region = same_region;
        opts.raw_distance = raw_distance;
        opts.excluded = own_event_exclusions(&events, event.event_date, exclusion_window);
        let result = match_controls(&event.event_id, treated, &features, &opts)
            .map_err(|e| CliError::Computation(format!("event {}: {e}", event.event_id)))?;
        treated_vectors.push(treated.features.clone());
        for control in &result.controls {
            let row = by_fips[control.fips.as_str()];
            control_vectors.push(row.features.clone());
        }
        results.push(result);
    }

    io::write_matches(&out.join("matches.csv"), &results).map_err(cfail)?;
    let balance = match_report(&feature_names, &treated_vectors, &control_vectors);
    io::write_balance(&out.join("balance.csv"), &balance).map_err(cfail)?;

    let mut m = Manifest::new("match");
    m.setting("events", events_path.display());
    m.setting("features", features_path.display());
    m.setting("k", k);
    if let Some(c) = caliper {
        m.setting("caliper", fmt_sig10(c));
    }
    m.setting("same_region", u8::from(same_region));
    m.setting("raw_distance", u8::from(raw_distance));
    m.setting("exclusion_window", exclusion_window);
    m.input("events", &events_path);
    m.input("features", &features_path);
    m.output("matches.csv");
    m.output("balance.csv");
    m.write(&out).map_err(CliError::Computation)?;

    println!("events={}", results.len());
    println!(
        "controls={}",
        results.iter().map(|r| r.controls.len()).sum::<usize>()
    );
    Ok(())
}

fn split_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn build_fit_spec<'m>(
    spec: &'m BTreeMap<String, String>,
    outcome: &'m str,
    regressors: &'m [String],
) -> Result<FitSpec, CliError> {
    let regressor_refs: Vec<&str> = regressors.iter().map(String::as_str).collect();
    let mut fit_spec = FitSpec::new(outcome, &regressor_refs);
    if let Some(fe) = spec.get("fe") {
        fit_spec = fit_spec.with_fe(FixedEffectSpec::parse(fe));
    }
    if let Some(cluster) = spec.get("cluster") {
        let dims = split_list(cluster);
        let dim_refs: Vec<&str> = dims.iter().map(String::as_str).collect();
        fit_spec = fit_spec.with_clusters(&dim_refs);
    }
    if let Some(weights) = spec.get("weights") {
        fit_spec = fit_spec.with_weights(weights);
    }
    Ok(fit_spec)
}

fn req_key<'m>(
    spec: &'m BTreeMap<String, String>,
    key: &str,
    file: &Path,
) -> Result<&'m String, CliError> {
    spec.get(key).ok_or_else(|| {
        CliError::Validation(format!("spec {} is missing `{key}=`", file.display()))
    })
}

fn print_fit(result: &muni_econ::panel::FitResult) {
    for (i, term) in result.terms.iter().enumerate() {
        println!(
            "{term} estimate={} se={} t={} p={}",
            fmt_sig10(result.estimates[i]),
            fmt_sig10(result.se[i]),
            fmt_sig10(result.t_stats[i]),
            fmt_sig10(result.p_values[i])
        );
    }
    println!("n={}", result.n);
    println!("r_squared={}", fmt_sig10(result.r_squared));
    if !result.dropped.is_empty() {
        println!("dropped_collinear={}", result.dropped.join(";"));
    }
}

fn cmd_fit(args: FitArgs, settings: &Settings) -> Result<(), CliError> {
    let panel_path = settings.req_input(&args.panel, "panel")?;
    let spec_path = settings.req_input(&args.spec, "spec")?;
    let out = settings.out_dir(&args.out)?;

    let spec = config::load(Some(&spec_path)).map_err(CliError::Validation)?;
    config::check_keys(&spec, &["outcome", "regressors", "fe", "cluster", "weights"])
        .map_err(CliError::Validation)?;
    let outcome = req_key(&spec, "outcome", &spec_path)?;
    let regressors = split_list(req_key(&spec, "regressors", &spec_path)?);
    if regressors.is_empty() {
        return Err(CliError::Validation("spec has no regressors".to_string()));
    }

    let data = io::read_panel(&panel_path).map_err(vfail)?;
    let fit_spec = build_fit_spec(&spec, outcome, &regressors)?;
    let result = fit(&data, &fit_spec).map_err(cfail)?;

    io::write_fit_results(&out.join("fit_results.csv"), &result).map_err(cfail)?;
    io::write_fit_diagnostics(&out.join("fit_diagnostics.txt"), &result).map_err(cfail)?;

    let mut m = Manifest::new("fit");
    m.setting("panel", panel_path.display());
    m.setting("spec", spec_path.display());
    m.input("panel", &panel_path);
    m.input("spec", &spec_path);
    m.output("fit_results.csv");
    m.output("fit_diagnostics.txt");
    m.write(&out).map_err(CliError::Computation)?;

    print_fit(&result);
    Ok(())
}

fn cmd_event_study(args: EventStudyArgs, settings: &Settings) -> Result<(), CliError> {
    let panel_path = settings.req_input(&args.panel, "panel")?;
    let spec_path = settings.req_input(&args.spec, "spec")?;
    let out = settings.out_dir(&args.out)?;

    let spec = config::load(Some(&spec_path)).map_err(CliError::Validation)?;
    config::check_keys(
        &spec,
        &[
            "outcome",
            "cohort",
            "event_time",
            "window",
            "benchmark",
            "fe",
            "cluster",
            "weights",
            "trends",
            "regressors",
        ],
    )
    .map_err(CliError::Validation)?;
    let outcome = req_key(&spec, "outcome", &spec_path)?;
    let cohort = req_key(&spec, "cohort", &spec_path)?;
    let event_time = req_key(&spec, "event_time", &spec_path)?;
    let width = match spec.get("window").map(String::as_str).unwrap_or("quarter") {
        "quarter" => BucketWidth::Quarter,
        "half" => BucketWidth::Half,
        "year" => BucketWidth::Year,
        other => {
            return Err(CliError::Validation(format!(
                "window must be quarter, half, or year, got `{other}`"
            )))
        }
    };
    let benchmark: i32 = match spec.get("benchmark") {
        None => -1,
        Some(raw) => raw
            .parse()
            .map_err(|e| CliError::Validation(format!("benchmark={raw}: {e}")))?,
    };

    let mut data = io::read_panel(&panel_path).map_err(vfail)?;
    let columns = build_event_study(
        &mut data,
        cohort,
        event_time,
        width,
        benchmark,
        spec.get("trends").map(String::as_str),
    )
    .map_err(cfail)?;

    let mut regressors: Vec<String> = columns.dummies.clone();
    regressors.extend(columns.trend_columns.iter().cloned());
    if let Some(extra) = spec.get("regressors") {
        regressors.extend(split_list(extra));
    }
    let fit_spec = build_fit_spec(&spec, outcome, &regressors)?;
    let result = fit(&data, &fit_spec).map_err(cfail)?;

    io::write_fit_results(&out.join("event_study_results.csv"), &result).map_err(cfail)?;
    io::write_fit_diagnostics(&out.join("event_study_diagnostics.txt"), &result)
        .map_err(cfail)?;

    let mut m = Manifest::new("event_study");
    m.setting("panel", panel_path.display());
    m.setting("spec", spec_path.display());
    m.setting("benchmark", benchmark);
    m.input("panel", &panel_path);
    m.input("spec", &spec_path);
    m.output("event_study_results.csv");
    m.output("event_study_diagnostics.txt");
    m.write(&out).map_err(CliError::Computation)?;

    println!("buckets={}", columns.buckets.len());
    println!("benchmark={benchmark}");
    print_fit(&result);
    Ok(())
}

fn req_value<T>(value: Option<T>, key: &str) -> Result<T, CliError> {
    value.ok_or_else(|| {
        CliError::Validation(format!("missing value: pass --{key} or config key `{key}`"))
    })
}

fn cmd_impact(args: ImpactArgs, settings: &Settings) -> Result<(), CliError> {
    let outstanding = req_value(settings.value(args.outstanding, "outstanding")?, "outstanding")?;
    let duration = req_value(settings.value(args.duration, "duration")?, "duration")?;
    let yield_rate = req_value(settings.value(args.yield_rate, "yield")?, "yield")?;
    let dy = req_value(settings.value(args.dy, "dy")?, "dy")?;
    let principal = settings.value(args.principal, "principal")?;
    for (name, value) in [
        ("outstanding", outstanding),
        ("duration", duration),
        ("yield", yield_rate),
        ("dy", dy),
    ] {
        if !value.is_finite() {
            return Err(CliError::Validation(format!("{name} must be finite")));
        }
    }

    let wealth = wealth_impact(outstanding, duration, yield_rate, dy);
    let mut lines = vec![format!("wealth_impact={}", fmt_sig10(wealth))];
    if let Some(principal) = principal {
        let delta = annual_interest_delta(principal, dy);
        lines.push(format!("annual_interest_delta={}", fmt_sig10(delta)));
    }
    for line in &lines {
        println!("{line}");
    }

    if args.out.is_some() || settings.cfg.contains_key("out") {
        let out = settings.out_dir(&args.out)?;
        let mut text = lines.join("\n");
        text.push('\n');
        std::fs::write(out.join("impact.txt"), text).map_err(cfail)?;
        let mut m = Manifest::new("impact");
        m.setting("outstanding", fmt_sig10(outstanding));
        m.setting("duration", fmt_sig10(duration));
        m.setting("yield", fmt_sig10(yield_rate));
        m.setting("dy", fmt_sig10(dy));
        if let Some(principal) = principal {
            m.setting("principal", fmt_sig10(principal));
        }
        m.output("impact.txt");
        m.write(&out).map_err(CliError::Computation)?;
    }
    Ok(())
}

fn cmd_synth_panel(args: SynthPanelArgs, settings: &Settings) -> Result<(), CliError> {
    let seed = settings.value(args.seed, "seed")?.unwrap_or(1);
    let n_units = settings.value(args.n_units, "n_units")?.unwrap_or(30);
    let n_periods = settings.value(args.n_periods, "n_periods")?.unwrap_or(12);
    if n_units < 2 || n_periods < 2 {
        return Err(CliError::Validation(
            "need at least 2 units and 2 periods".to_string(),
        ));
    }
    let out = settings.out_dir(&args.out)?;

    let mut dgp = PanelDgp::new(seed, n_units, n_periods);
    if let Some(v) = settings.value(args.beta_bps, "beta_bps")? {
        dgp.beta_bps = v;
    }
    if let Some(v) = settings.value(args.unit_fe_sd, "unit_fe_sd")? {
        dgp.unit_fe_sd = v;
    }
    if let Some(v) = settings.value(args.time_fe_sd, "time_fe_sd")? {
        dgp.time_fe_sd = v;
    }
    if let Some(v) = settings.value(args.pair_fe_sd, "pair_fe_sd")? {
        dgp.pair_fe_sd = v;
    }
    if let Some(v) = settings.value(args.noise_sd, "noise_sd")? {
        dgp.noise_sd = v;
    }
    if let Some(v) = settings.value(args.cluster_sd, "cluster_sd")? {
        dgp.cluster_sd = v;
    }
    if let Some(v) = settings.value(args.treated_share, "treated_share")? {
        dgp.treated_share = v;
    }
    if let Some(v) = settings.value(args.post_start, "post_start")? {
        dgp.post_start = v;
    }
    if let Some(v) = settings.value(args.pre_trend_slope, "pre_trend_slope")? {
        dgp.pre_trend_slope = v;
    }
    if let Some(v) = settings.value(args.n_controls, "n_controls")? {
        dgp.n_controls = v;
    }
    if dgp.post_start == 0 || dgp.post_start >= n_periods {
        return Err(CliError::Validation(format!(
            "post_start must be in 1..{n_periods}"
        )));
    }

    let (data, dgp_manifest) = gen_panel(&dgp);
    io::write_panel(&out.join("panel.csv"), &data).map_err(cfail)?;
    std::fs::write(out.join("dgp_manifest.txt"), &dgp_manifest).map_err(cfail)?;

    let mut m = Manifest::new("synth_panel");
    m.setting("seed", seed);
    m.setting("n_units", n_units);
    m.setting("n_periods", n_periods);
    m.setting("beta_bps", fmt_sig10(dgp.beta_bps));
    m.setting("unit_fe_sd", fmt_sig10(dgp.unit_fe_sd));
    m.setting("time_fe_sd", fmt_sig10(dgp.time_fe_sd));
    m.setting("pair_fe_sd", fmt_sig10(dgp.pair_fe_sd));
    m.setting("noise_sd", fmt_sig10(dgp.noise_sd));
    m.setting("cluster_sd", fmt_sig10(dgp.cluster_sd));
    m.setting("treated_share", fmt_sig10(dgp.treated_share));
    m.setting("post_start", dgp.post_start);
    m.setting("pre_trend_slope", fmt_sig10(dgp.pre_trend_slope));
    m.setting("n_controls", dgp.n_controls);
    m.output("panel.csv");
    m.output("dgp_manifest.txt");
    m.write(&out).map_err(CliError::Computation)?;

    println!("rows={}", data.n_rows());
    println!("true_beta_bps={}", fmt_sig10(dgp.beta_bps));
    Ok(())
}

fn cmd_synth_trades(args: SynthTradesArgs, settings: &Settings) -> Result<(), CliError> {
    let seed = settings.value(args.seed, "seed")?.unwrap_or(1);
    let n_bonds = settings.value(args.n_bonds, "n_bonds")?.unwrap_or(8);
    if n_bonds == 0 {
        return Err(CliError::Validation("need at least one bond".to_string()));
    }
    let recipe = ViolationRecipe {
        unmatched_cusip: settings.value(args.unmatched, "unmatched")?.unwrap_or(0),
        bad_maturity: settings.value(args.bad_maturity, "bad_maturity")?.unwrap_or(0),
        missing_coupon: settings
            .value(args.missing_coupon, "missing_coupon")?
            .unwrap_or(0),
        bad_price: settings.value(args.bad_price, "bad_price")?.unwrap_or(0),
        primary_market: settings
            .value(args.primary_market, "primary_market")?
            .unwrap_or(0),
        near_issuance: settings
            .value(args.near_issuance, "near_issuance")?
            .unwrap_or(0),
        short_remaining: settings
            .value(args.short_remaining, "short_remaining")?
            .unwrap_or(0),
        bad_yield: settings.value(args.bad_yield, "bad_yield")?.unwrap_or(0),
        thin_cusips: settings.value(args.thin_cusips, "thin_cusips")?.unwrap_or(0),
    };
    let out = settings.out_dir(&args.out)?;

    let market = gen_trades(seed, n_bonds, &recipe);
    let scale = RatingScale::default_table();
    let sorted: BTreeMap<String, Bond> = market
        .bonds
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    io::write_bonds(&out.join("bonds.csv"), &sorted, &scale).map_err(cfail)?;
    io::write_trades(&out.join("trades.csv"), &market.trades).map_err(cfail)?;
    io::write_clean_report(&out.join("expected_clean_report.csv"), &market.expected)
        .map_err(cfail)?;

    let mut m = Manifest::new("synth_trades");
    m.setting("seed", seed);
    m.setting("n_bonds", n_bonds);
    m.setting("unmatched", recipe.unmatched_cusip);
    m.setting("bad_maturity", recipe.bad_maturity);
    m.setting("missing_coupon", recipe.missing_coupon);
    m.setting("bad_price", recipe.bad_price);
    m.setting("primary_market", recipe.primary_market);
    m.setting("near_issuance", recipe.near_issuance);
    m.setting("short_remaining", recipe.short_remaining);
    m.setting("bad_yield", recipe.bad_yield);
    m.setting("thin_cusips", recipe.thin_cusips);
    m.setting("window_start", market.window.start());
    m.setting("window_end", market.window.end());
    m.output("bonds.csv");
    m.output("trades.csv");
    m.output("expected_clean_report.csv");
    m.write(&out).map_err(CliError::Computation)?;

    println!("bonds={}", market.bonds.len());
    println!("trades={}", market.trades.len());
    println!("expected_survivors={}", market.expected.survivors);
    Ok(())
}
