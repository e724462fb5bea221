//! CSV ingestion for historical observation series and yield curves.
//!
//! Everything here is local-file only. Rows are treated as adjacent lattice
//! steps; missing calendar days are not filled in.

use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ISO_DATE: &str = "%Y-%m-%d";

/// What a series measures. Rates and prices must be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Rate,
    Price,
    Yield,
}

impl SeriesKind {
    fn requires_positive(self) -> bool {
        matches!(self, SeriesKind::Rate | SeriesKind::Price)
    }
}

/// Column mapping used by [`parse_series`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesSchema {
    pub date_column: String,
    pub value_column: String,
    /// chrono format string; ISO-8601 when `None`.
    pub date_format: Option<String>,
    /// Divide values by 100 on ingestion.
    pub percent: bool,
}

impl SeriesSchema {
    pub fn new(date_column: impl Into<String>, value_column: impl Into<String>) -> Self {
        Self {
            date_column: date_column.into(),
            value_column: value_column.into(),
            date_format: None,
            percent: false,
        }
    }

    pub fn with_date_format(mut self, format: impl Into<String>) -> Self {
        self.date_format = Some(format.into());
        self
    }

    pub fn with_percent(mut self, percent: bool) -> Self {
        self.percent = percent;
        self
    }

    fn format(&self) -> &str {
        self.date_format.as_deref().unwrap_or(ISO_DATE)
    }
}

/// Date-ordered numeric observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationSeries {
    entries: Vec<(NaiveDate, f64)>,
    kind: SeriesKind,
}

impl ObservationSeries {
    pub fn new(entries: Vec<(NaiveDate, f64)>, kind: SeriesKind) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                found: entries.len(),
            });
        }
        for (date, value) in &entries {
            if !value.is_finite() || (kind.requires_positive() && *value <= 0.0) {
                return Err(Error::InvalidValue {
                    what: format!("{kind:?} observation on {date}").to_lowercase(),
                    value: *value,
                });
            }
        }
        for pair in entries.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err(Error::Ordering {
                    at: pair[1].0.to_string(),
                });
            }
        }
        Ok(Self { entries, kind })
    }

    pub fn entries(&self) -> &[(NaiveDate, f64)] {
        &self.entries
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|(_, v)| *v)
    }

    pub fn first_value(&self) -> f64 {
        self.entries[0].1
    }

    pub fn last_value(&self) -> f64 {
        self.entries[self.entries.len() - 1].1
    }

    /// Serializes back to CSV text that [`parse_series`] accepts with the same schema.
    pub fn to_csv(&self, schema: &SeriesSchema) -> String {
        let scale = if schema.percent { 100.0 } else { 1.0 };
        let mut out = format!("{},{}\n", schema.date_column, schema.value_column);
        for (date, value) in &self.entries {
            out.push_str(&format!(
                "{},{}\n",
                date.format(schema.format()),
                value * scale
            ));
        }
        out
    }
}

/// A parsed series together with the number of rows dropped for empty or
/// non-numeric values.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSeries {
    pub series: ObservationSeries,
    pub skipped: usize,
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::Csv {
        line,
        message: err.to_string(),
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn parse_value(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a CSV with a header row into an [`ObservationSeries`].
pub fn parse_series<R: Read>(
    source: R,
    schema: &SeriesSchema,
    kind: SeriesKind,
) -> Result<ParsedSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let date_idx = column_index(&headers, &schema.date_column)?;
    let value_idx = column_index(&headers, &schema.value_column)?;
    let scale = if schema.percent { 0.01 } else { 1.0 };

    let mut entries = Vec::new();
    let mut skipped = 0;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let Some(value) = record.get(value_idx).and_then(parse_value) else {
            skipped += 1;
            continue;
        };
        let raw_date = record.get(date_idx).unwrap_or("");
        let date = NaiveDate::parse_from_str(raw_date, schema.format()).map_err(|_| {
            Error::DateParse {
                line,
                value: raw_date.to_string(),
                format: schema.format().to_string(),
            }
        })?;
        entries.push((date, value * scale));
    }

    Ok(ParsedSeries {
        series: ObservationSeries::new(entries, kind)?,
        skipped,
    })
}

/// Which equity price column fed a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceField {
    AdjClose,
    Close,
}

impl PriceField {
    pub fn as_str(self) -> &'static str {
        match self {
            PriceField::AdjClose => "adj_close",
            PriceField::Close => "close",
        }
    }
}

fn normalize_header(h: &str) -> String {
    h.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase()
}

/// Picks the adjusted close column when present, else the close column.
pub fn detect_price_column(headers: &[&str]) -> Option<(String, PriceField)> {
    let find = |target: &str| {
        headers
            .iter()
            .find(|h| normalize_header(h) == target)
            .map(|h| h.trim().to_string())
    };
    find("adjclose")
        .map(|h| (h, PriceField::AdjClose))
        .or_else(|| find("close").map(|h| (h, PriceField::Close)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquitySeries {
    pub parsed: ParsedSeries,
    pub field: PriceField,
}

/// Parses a vendor-style equity history (Date, Open, ..., Close, Adj Close).
pub fn parse_equity_prices<R: Read>(
    mut source: R,
    date_column: &str,
    date_format: Option<&str>,
) -> Result<EquitySeries> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes).map_err(|e| Error::Csv {
        line: 0,
        message: e.to_string(),
    })?;
    let headers = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes.as_slice())
        .headers()
        .map_err(csv_error)?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let (column, field) =
        detect_price_column(&names).ok_or_else(|| Error::MissingColumn("Adj Close|Close".into()))?;
    let mut schema = SeriesSchema::new(date_column, column);
    schema.date_format = date_format.map(str::to_string);
    let parsed = parse_series(bytes.as_slice(), &schema, SeriesKind::Price)?;
    Ok(EquitySeries { parsed, field })
}

/// One quoted point of a yield curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub maturity_years: f64,
    /// Annualized, continuously compounded.
    #[serde(rename = "yield")]
    pub yield_value: f64,
}

/// Zero yields by maturity, linearly interpolated between quotes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YieldCurve {
    points: Vec<CurvePoint>,
    as_of: Option<NaiveDate>,
}

impl YieldCurve {
    pub fn new(points: Vec<CurvePoint>, as_of: Option<NaiveDate>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientData {
                needed: 1,
                found: 0,
            });
        }
        for pt in &points {
            if !(pt.maturity_years.is_finite() && pt.maturity_years > 0.0) {
                return Err(Error::InvalidValue {
                    what: "maturity".into(),
                    value: pt.maturity_years,
                });
            }
            if !pt.yield_value.is_finite() || !(-0.5..=1.0).contains(&pt.yield_value) {
                return Err(Error::SanityRange {
                    maturity: pt.maturity_years,
                    yield_value: pt.yield_value,
                });
            }
        }
        for pair in points.windows(2) {
            if pair[1].maturity_years <= pair[0].maturity_years {
                return Err(Error::Ordering {
                    at: format!("maturity {}", pair[1].maturity_years),
                });
            }
        }
        Ok(Self { points, as_of })
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn as_of(&self) -> Option<NaiveDate> {
        self.as_of
    }

    pub fn min_maturity(&self) -> f64 {
        self.points[0].maturity_years
    }

    pub fn max_maturity(&self) -> f64 {
        self.points[self.points.len() - 1].maturity_years
    }

    /// Yield at `maturity`, exact at quotes and linear in between.
    pub fn yield_at(&self, maturity: f64) -> Result<f64> {
        let (min, max) = (self.min_maturity(), self.max_maturity());
        if !(min..=max).contains(&maturity) {
            return Err(Error::Extrapolation { maturity, min, max });
        }
        let idx = self
            .points
            .partition_point(|p| p.maturity_years < maturity);
        let hi = self.points[idx];
        if hi.maturity_years == maturity || idx == 0 {
            return Ok(hi.yield_value);
        }
        let lo = self.points[idx - 1];
        let w = (maturity - lo.maturity_years) / (hi.maturity_years - lo.maturity_years);
        Ok(lo.yield_value + w * (hi.yield_value - lo.yield_value))
    }
}

/// Free-function form of [`YieldCurve::yield_at`].
pub fn yield_at(curve: &YieldCurve, maturity: f64) -> Result<f64> {
    curve.yield_at(maturity)
}

/// Column mapping for a long-format curve file (one row per maturity).
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSchema {
    pub maturity_column: String,
    pub yield_column: String,
    pub percent: bool,
    pub as_of: Option<NaiveDate>,
}

impl Default for CurveSchema {
    fn default() -> Self {
        Self {
            maturity_column: "maturity_years".into(),
            yield_column: "yield".into(),
            percent: false,
            as_of: None,
        }
    }
}

/// Parses a long-format curve: a maturity column in years and a yield column.
pub fn parse_yield_curve<R: Read>(source: R, schema: &CurveSchema) -> Result<YieldCurve> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let m_idx = column_index(&headers, &schema.maturity_column)?;
    let y_idx = column_index(&headers, &schema.yield_column)?;
    let scale = if schema.percent { 0.01 } else { 1.0 };

    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let maturity = record.get(m_idx).and_then(parse_maturity);
        let yield_value = record.get(y_idx).and_then(parse_value);
        match (maturity, yield_value) {
            (Some(m), Some(y)) => points.push(CurvePoint {
                maturity_years: m,
                yield_value: y * scale,
            }),
            (None, _) => {
                return Err(Error::Csv {
                    line,
                    message: format!("unreadable maturity `{}`", record.get(m_idx).unwrap_or("")),
                })
            }
            (_, None) => {
                return Err(Error::Csv {
                    line,
                    message: format!("unreadable yield `{}`", record.get(y_idx).unwrap_or("")),
                })
            }
        }
    }
    YieldCurve::new(points, schema.as_of)
}

/// Accepts plain decimals, simple fractions like `1/6`, or tenor labels like `2 Mo`.
fn parse_maturity(raw: &str) -> Option<f64> {
    let raw = raw.trim();
    if let Some(v) = parse_value(raw) {
        return Some(v);
    }
    if let Some((num, den)) = raw.split_once('/') {
        let (num, den) = (parse_value(num)?, parse_value(den)?);
        return (den != 0.0).then(|| num / den);
    }
    parse_tenor(raw)
}

/// Converts Treasury tenor labels (`1 Mo`, `6 Mo`, `2 Yr`, `4 Wk`) to years.
pub fn parse_tenor(label: &str) -> Option<f64> {
    let label = label.trim();
    let split = label.find(|c: char| !(c.is_ascii_digit() || c == '.'))?;
    let (num, unit) = label.split_at(split);
    let num: f64 = num.parse().ok()?;
    let per_year = match unit.trim().to_ascii_lowercase().as_str() {
        "mo" | "month" | "months" | "m" => 12.0,
        "yr" | "year" | "years" | "y" => 1.0,
        "wk" | "week" | "weeks" | "w" => 52.0,
        _ => return None,
    };
    Some(num / per_year)
}

/// Parses the Treasury "daily par yield curve" wide layout (one row per date,
/// one column per tenor) and returns the curve for `date`, or for the latest
/// date in the file when `date` is `None`.
pub fn parse_treasury_curve<R: Read>(
    source: R,
    date_column: &str,
    date_format: Option<&str>,
    date: Option<NaiveDate>,
    percent: bool,
) -> Result<YieldCurve> {
    let format = date_format.unwrap_or(ISO_DATE);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let date_idx = column_index(&headers, date_column)?;
    let tenors: Vec<(usize, f64)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != date_idx)
        .filter_map(|(i, h)| parse_tenor(h).map(|t| (i, t)))
        .collect();
    if tenors.is_empty() {
        return Err(Error::MissingColumn("tenor columns (e.g. `1 Mo`, `10 Yr`)".into()));
    }

    let mut chosen: Option<(NaiveDate, csv::StringRecord)> = None;
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let raw = record.get(date_idx).unwrap_or("");
        let row_date = NaiveDate::parse_from_str(raw, format).map_err(|_| Error::DateParse {
            line,
            value: raw.to_string(),
            format: format.to_string(),
        })?;
        let take = match (date, &chosen) {
            (Some(d), _) => d == row_date,
            (None, None) => true,
            (None, Some((best, _))) => row_date > *best,
        };
        if take {
            chosen = Some((row_date, record));
        }
    }
    let (as_of, record) = chosen.ok_or_else(|| match date {
        Some(d) => Error::InvalidArgument(format!("no curve row dated {d}")),
        None => Error::InsufficientData {
            needed: 1,
            found: 0,
        },
    })?;

    let scale = if percent { 0.01 } else { 1.0 };
    let mut points: Vec<CurvePoint> = tenors
        .iter()
        .filter_map(|&(i, maturity)| {
            record.get(i).and_then(parse_value).map(|y| CurvePoint {
                maturity_years: maturity,
                yield_value: y * scale,
            })
        })
        .collect();
    points.sort_by(|a, b| a.maturity_years.total_cmp(&b.maturity_years));
    YieldCurve::new(points, Some(as_of))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> SeriesSchema {
        SeriesSchema::new("date", "rate")
    }

    #[test]
    fn parses_three_rows() {
        let csv = "date,rate\n2023-06-14,0.0376\n2023-06-15,0.0372\n2023-06-16,0.0377";
        let parsed = parse_series(csv.as_bytes(), &schema(), SeriesKind::Rate).unwrap();
        assert_eq!(parsed.series.len(), 3);
        assert_eq!(parsed.series.last_value(), 0.0377);
        assert_eq!(parsed.skipped, 0);
    }

    #[test]
    fn skips_blank_and_non_numeric_values() {
        let csv = "date,rate\n2023-06-13,0.0370\n2023-06-14,\n2023-06-15,0.0372\n2023-06-16,0.0377";
        let parsed = parse_series(csv.as_bytes(), &schema(), SeriesKind::Rate).unwrap();
        assert_eq!(parsed.series.len(), 3);
        assert_eq!(parsed.skipped, 1);

        let csv = "date,rate\n2023-06-13,0.0370\n2023-06-14,.\n2023-06-15,N/A\n2023-06-16,0.0377";
        let parsed = parse_series(csv.as_bytes(), &schema(), SeriesKind::Rate).unwrap();
        assert_eq!(parsed.skipped, 2);
    }

    #[test]
    fn single_row_is_insufficient() {
        let csv = "date,rate\n2023-06-16,0.0377";
        let err = parse_series(csv.as_bytes(), &schema(), SeriesKind::Rate).unwrap_err();
        assert_eq!(err, Error::InsufficientData { needed: 2, found: 1 });
    }

    #[test]
    fn non_increasing_dates_name_the_date() {
        let csv = "date,rate\n2023-06-15,0.03\n2023-06-14,0.03";
        let err = parse_series(csv.as_bytes(), &schema(), SeriesKind::Rate).unwrap_err();
        assert_eq!(
            err,
            Error::Ordering {
                at: "2023-06-14".into()
            }
        );
    }

    #[test]
    fn malformed_csv_reports_line() {
        let csv = "date,rate\n2023-06-14,0.03\n2023-06-15,0.03,extra\n";
        match parse_series(csv.as_bytes(), &schema(), SeriesKind::Rate).unwrap_err() {
            Error::Csv { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn custom_date_format_and_percent() {
        let csv = "Date,10 Yr\n06/15/2023,3.72\n06/16/2023,3.77\n";
        let schema = SeriesSchema::new("Date", "10 Yr")
            .with_date_format("%m/%d/%Y")
            .with_percent(true);
        let parsed = parse_series(csv.as_bytes(), &schema, SeriesKind::Rate).unwrap();
        assert!((parsed.series.last_value() - 0.0377).abs() < 1e-15);
    }

    #[test]
    fn non_positive_rate_rejected() {
        let csv = "date,rate\n2023-06-15,0.03\n2023-06-16,0\n";
        assert!(matches!(
            parse_series(csv.as_bytes(), &schema(), SeriesKind::Rate),
            Err(Error::InvalidValue { .. })
        ));
        // yields may be zero or negative
        assert!(parse_series(csv.as_bytes(), &schema(), SeriesKind::Yield).is_ok());
    }

    #[test]
    fn missing_column() {
        let csv = "date,close\n2023-06-15,1\n2023-06-16,2\n";
        assert_eq!(
            parse_series(csv.as_bytes(), &schema(), SeriesKind::Rate).unwrap_err(),
            Error::MissingColumn("rate".into())
        );
    }

    #[test]
    fn equity_prefers_adjusted_close() {
        let csv = "Date,Open,Close,Adj Close\n2023-06-15,1,10,9.5\n2023-06-16,1,11,10.5\n";
        let eq = parse_equity_prices(csv.as_bytes(), "Date", None).unwrap();
        assert_eq!(eq.field, PriceField::AdjClose);
        assert_eq!(eq.parsed.series.last_value(), 10.5);

        let csv = "Date,Open,Close\n2023-06-15,1,10\n2023-06-16,1,11\n";
        let eq = parse_equity_prices(csv.as_bytes(), "Date", None).unwrap();
        assert_eq!(eq.field, PriceField::Close);
        assert_eq!(eq.parsed.series.last_value(), 11.0);
    }

    fn curve(points: &[(f64, f64)]) -> Result<YieldCurve> {
        YieldCurve::new(
            points
                .iter()
                .map(|&(m, y)| CurvePoint {
                    maturity_years: m,
                    yield_value: y,
                })
                .collect(),
            None,
        )
    }

    #[test]
    fn curve_from_csv() {
        let csv = "maturity_years,yield\n1/6,0.052\n1,0.050\n30,0.041\n";
        let c = parse_yield_curve(csv.as_bytes(), &CurveSchema::default()).unwrap();
        assert_eq!(c.points().len(), 3);
        assert!((c.min_maturity() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(c.max_maturity(), 30.0);
    }

    #[test]
    fn curve_duplicate_maturity_is_ordering_error() {
        let csv = "maturity_years,yield\n1,0.05\n1,0.05\n";
        assert!(matches!(
            parse_yield_curve(csv.as_bytes(), &CurveSchema::default()),
            Err(Error::Ordering { .. })
        ));
    }

    #[test]
    fn curve_yield_out_of_range() {
        let csv = "maturity_years,yield\n1,2.5\n";
        assert!(matches!(
            parse_yield_curve(csv.as_bytes(), &CurveSchema::default()),
            Err(Error::SanityRange { .. })
        ));
    }

    #[test]
    fn interpolation() {
        let c = curve(&[(1.0, 0.04), (2.0, 0.06)]).unwrap();
        assert!((c.yield_at(1.5).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(c.yield_at(2.0).unwrap(), 0.06);
        assert_eq!(c.yield_at(1.0).unwrap(), 0.04);
        assert!(matches!(c.yield_at(2.5), Err(Error::Extrapolation { .. })));
        assert!(matches!(c.yield_at(0.5), Err(Error::Extrapolation { .. })));
    }

    #[test]
    fn tenor_labels() {
        assert_eq!(parse_tenor("2 Mo"), Some(2.0 / 12.0));
        assert_eq!(parse_tenor("30 Yr"), Some(30.0));
        assert_eq!(parse_tenor("Date"), None);
    }

    #[test]
    fn treasury_wide_layout() {
        let csv = "Date,1 Mo,2 Mo,1 Yr,10 Yr,30 Yr\n\
                   06/16/2023,5.15,5.24,5.22,3.77,3.89\n\
                   06/15/2023,5.17,5.26,5.23,3.72,3.85\n";
        let c = parse_treasury_curve(csv.as_bytes(), "Date", Some("%m/%d/%Y"), None, true).unwrap();
        assert_eq!(c.as_of(), NaiveDate::from_ymd_opt(2023, 6, 16));
        assert_eq!(c.points().len(), 5);
        assert!((c.yield_at(10.0).unwrap() - 0.0377).abs() < 1e-15);

        let d = NaiveDate::from_ymd_opt(2023, 6, 15);
        let c = parse_treasury_curve(csv.as_bytes(), "Date", Some("%m/%d/%Y"), d, true).unwrap();
        assert!((c.yield_at(10.0).unwrap() - 0.0372).abs() < 1e-15);
    }
}
