//! Turning flag values into core inputs: series, curves, lattices and
//! equity baselines.

use std::path::{Path, PathBuf};

use bdt_core::marketdata::detect_price_column;
use bdt_core::{
    calibrate_bdt, estimate_moments, parse_equity_prices, parse_series, parse_treasury_curve,
    parse_yield_curve, simple_returns, BdtCalibration, BinomialMoments, CurveSchema,
    EquityParams, ParsedSeries, PriceField, SeriesKind, SeriesSchema, YieldCurve,
};

use crate::args::{BaselineUnits, EquityArgs, LatticeArgs, SeriesArgs};
use crate::error::{CliError, Context};

const DATE_CANDIDATES: [&str; 5] = ["DATE", "Date", "date", "observation_date", "Observation Date"];

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

fn headers(bytes: &[u8], path: &Path) -> Result<Vec<String>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let record = reader
        .headers()
        .map_err(|e| CliError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
    Ok(record.iter().map(str::to_string).collect())
}

fn pick_date_column(explicit: Option<&str>, headers: &[String]) -> Result<String, CliError> {
    if let Some(name) = explicit {
        return Ok(name.to_string());
    }
    DATE_CANDIDATES
        .iter()
        .find(|c| headers.iter().any(|h| h == *c))
        .map(|c| c.to_string())
        .ok_or_else(|| CliError::config("no date column found; pass --date-column"))
}

/// Series loaded from `--input` plus the price column used, when one was
/// auto-detected.
pub struct LoadedSeries {
    pub path: PathBuf,
    pub parsed: ParsedSeries,
    pub price_field: Option<PriceField>,
}

/// Loads `--input`. Without `--value-column` the value column is the adjusted
/// close (else close) column of a price file, or the only non-date column.
pub fn load_series(args: &SeriesArgs) -> Result<LoadedSeries, CliError> {
    let path = args
        .input
        .clone()
        .ok_or_else(|| CliError::config("--input is required"))?;
    let bytes = read_file(&path)?;
    let headers = headers(&bytes, &path)?;
    let date_column = pick_date_column(args.date_column.as_deref(), &headers)?;

    let (value_column, price_field) = match &args.value_column {
        Some(v) => (v.clone(), None),
        None => {
            let names: Vec<&str> = headers.iter().map(String::as_str).collect();
            match detect_price_column(&names) {
                Some((col, field)) => (col, Some(field)),
                None => {
                    let others: Vec<&String> =
                        headers.iter().filter(|h| **h != date_column).collect();
                    match others.as_slice() {
                        [only] => ((*only).clone(), None),
                        _ => {
                            return Err(CliError::config(format!(
                                "{}: cannot choose a value column among {others:?}; pass --value-column",
                                path.display()
                            )))
                        }
                    }
                }
            }
        }
    };
    let kind = match args.kind {
        Some(k) => k.into(),
        None if price_field.is_some() => SeriesKind::Price,
        None => SeriesKind::Rate,
    };

    let mut schema = SeriesSchema::new(date_column, value_column).with_percent(args.percent);
    if let Some(f) = &args.date_format {
        schema = schema.with_date_format(f.clone());
    }
    let parsed =
        parse_series(bytes.as_slice(), &schema, kind).context(path.display().to_string())?;
    Ok(LoadedSeries {
        path,
        parsed,
        price_field,
    })
}

pub fn moments_of(loaded: &LoadedSeries, delta: f64) -> Result<BinomialMoments, CliError> {
    let ctx = loaded.path.display().to_string();
    let returns = simple_returns(&loaded.parsed.series).context(ctx.clone())?;
    estimate_moments(&returns, delta).context(ctx)
}

/// Lattice from explicit `--c1/--c2/--r0`, or calibrated from the `--input`
/// rate series with `r0` defaulting to its last observation.
pub fn calibration(
    series: &SeriesArgs,
    lattice: &LatticeArgs,
) -> Result<(BdtCalibration, Option<LoadedSeries>), CliError> {
    let delta = series.delta()?;
    match (lattice.c1, lattice.c2) {
        (Some(c1), Some(c2)) => {
            let loaded = series.input.as_ref().map(|_| load_series(series)).transpose()?;
            let r0 = match (lattice.r0, &loaded) {
                (Some(r0), _) => r0,
                (None, Some(l)) => l.parsed.series.last_value(),
                (None, None) => return Err(CliError::config("--c1/--c2 need --r0 or --input")),
            };
            let cal = BdtCalibration::from_coefficients(r0, c1, c2, delta).context("lattice")?;
            Ok((cal, loaded))
        }
        (None, None) => {
            if series.input.is_none() {
                return Err(CliError::config(
                    "a lattice needs --input (rate history) or --c1, --c2 and --r0",
                ));
            }
            let loaded = load_series(series)?;
            let moments = moments_of(&loaded, delta)?;
            let r0 = lattice.r0.unwrap_or_else(|| loaded.parsed.series.last_value());
            let cal = calibrate_bdt(&moments, r0).context("calibration")?;
            Ok((cal, Some(loaded)))
        }
        _ => Err(CliError::config("--c1 and --c2 must be given together")),
    }
}

/// Baseline equity parameters with the price column they came from, if any.
pub struct Baseline {
    pub params: EquityParams,
    pub price_field: Option<PriceField>,
}

/// `--equity-input` estimates (converted per `--baseline-units`) overridden
/// by any of `--mu/--sigma/--p`; without a file all three are required.
pub fn baseline(args: &EquityArgs, series: &SeriesArgs) -> Result<Baseline, CliError> {
    let delta = series.delta()?;
    let mut estimated = None;
    if let Some(path) = &args.equity_input {
        let bytes = read_file(path)?;
        let headers = headers(&bytes, path)?;
        let date_column = pick_date_column(series.date_column.as_deref(), &headers)?;
        let ctx = path.display().to_string();
        let equity = parse_equity_prices(bytes.as_slice(), &date_column, series.date_format.as_deref())
            .context(ctx.clone())?;
        let returns = simple_returns(&equity.parsed.series).context(ctx.clone())?;
        let moments = estimate_moments(&returns, delta).context(ctx)?;
        estimated = Some((moments, equity.field));
    }

    let from_file = estimated.map(|(m, _)| match args.baseline_units.unwrap_or(BaselineUnits::Annualized) {
        BaselineUnits::Annualized => (m.mu(), m.sigma(), m.p_up),
        BaselineUnits::PerStep => (m.mean_per_step, m.std_per_step, m.p_up),
    });
    let pick = |flag: Option<f64>, idx: usize, name: &str| -> Result<f64, CliError> {
        flag.or(from_file.map(|t| [t.0, t.1, t.2][idx]))
            .ok_or_else(|| CliError::config(format!("--{name} is required without --equity-input")))
    };
    let params = EquityParams::new(
        pick(args.mu, 0, "mu")?,
        pick(args.sigma, 1, "sigma")?,
        pick(args.p, 2, "p")?,
    )
    .context("equity baseline")?;
    Ok(Baseline {
        params,
        price_field: estimated.map(|(_, f)| f),
    })
}

/// Reads a curve in either the long layout (`maturity_years,yield`) or the
/// wide Treasury layout (date column plus one column per tenor).
pub fn load_curve(
    path: &Path,
    series: &SeriesArgs,
    curve_date: Option<chrono::NaiveDate>,
) -> Result<YieldCurve, CliError> {
    let bytes = read_file(path)?;
    let headers = headers(&bytes, path)?;
    let ctx = path.display().to_string();
    let schema = CurveSchema {
        percent: series.percent,
        ..CurveSchema::default()
    };
    let long = headers.contains(&schema.maturity_column)
        && headers.contains(&schema.yield_column);
    if long {
        parse_yield_curve(bytes.as_slice(), &schema).context(ctx)
    } else {
        let date_column = pick_date_column(series.date_column.as_deref(), &headers)?;
        let format = series.date_format.clone().or_else(|| sniff_date_format(&bytes));
        parse_treasury_curve(
            bytes.as_slice(),
            &date_column,
            format.as_deref(),
            curve_date,
            series.percent,
        )
        .context(ctx)
    }
}

/// Treasury downloads use `MM/DD/YYYY`; anything else is treated as ISO.
fn sniff_date_format(bytes: &[u8]) -> Option<String> {
    let text = std::str::from_utf8(bytes).ok()?;
    let first = text.lines().nth(1)?.split(',').next()?.trim();
    let slash = first.split('/').collect::<Vec<_>>();
    (slash.len() == 3 && slash[2].len() == 4).then(|| "%m/%d/%Y".to_string())
}

/// Refuses to overwrite any input file.
pub fn guard_output(out: Option<&Path>, inputs: &[Option<&Path>]) -> Result<(), CliError> {
    let Some(out) = out else { return Ok(()) };
    let Ok(out_abs) = out.canonicalize() else {
        return Ok(());
    };
    for input in inputs.iter().flatten() {
        if input.canonicalize().is_ok_and(|p| p == out_abs) {
            return Err(CliError::config(format!(
                "--out {} would overwrite an input file",
                out.display()
            )));
        }
    }
    Ok(())
}
