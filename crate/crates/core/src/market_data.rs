//! Gas-price series ingestion, median resampling and descriptive statistics.

use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    /// Gwei.
    pub price: f64,
}

/// Timestamped gas-price observations. Timestamps are strictly increasing and
/// every price is finite and non-negative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GasPriceSeries {
    points: Vec<PricePoint>,
}

impl GasPriceSeries {
    /// Sorts by timestamp and collapses duplicate timestamps to their median.
    pub fn new(mut points: Vec<PricePoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(p) = points.iter().find(|p| !p.price.is_finite() || p.price < 0.0) {
            return Err(Error::Domain(format!(
                "price {} at timestamp {} is not a finite non-negative value",
                p.price, p.timestamp
            )));
        }
        points.sort_by_key(|p| p.timestamp);
        let mut out: Vec<PricePoint> = Vec::with_capacity(points.len());
        let mut i = 0;
        while i < points.len() {
            let ts = points[i].timestamp;
            let mut j = i + 1;
            while j < points.len() && points[j].timestamp == ts {
                j += 1;
            }
            let price = if j - i == 1 {
                points[i].price
            } else {
                let group: Vec<f64> = points[i..j].iter().map(|p| p.price).collect();
                stats::median(&group)
            };
            out.push(PricePoint { timestamp: ts, price });
            i = j;
        }
        Ok(Self { points: out })
    }

    /// Builds an evenly spaced series starting at `start` with `step` seconds.
    pub fn from_values(start: i64, step: i64, values: &[f64]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &price)| PricePoint { timestamp: start + step * i as i64, price })
                .collect(),
        )
    }

    pub fn points(&self) -> &[PricePoint] {
        &self.points
    }

    pub fn prices(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.price).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnConfig {
    pub timestamp: String,
    pub price: String,
}

impl Default for ColumnConfig {
    fn default() -> Self {
        Self { timestamp: "timestamp".into(), price: "price".into() }
    }
}

/// Parses a UTF-8 CSV with a header row. Lines starting with `#` are skipped.
pub fn parse_series(csv_text: &str, columns: &ColumnConfig) -> Result<GasPriceSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Schema(e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column `{name}`")))
    };
    let ts_idx = find(&columns.timestamp)?;
    let price_idx = find(&columns.price)?;

    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Row {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row_err = |message: String| Error::Row { line, message };
        let ts_field = record
            .get(ts_idx)
            .ok_or_else(|| row_err("missing timestamp field".into()))?;
        let price_field = record
            .get(price_idx)
            .ok_or_else(|| row_err("missing price field".into()))?;
        let timestamp = parse_timestamp(ts_field)
            .ok_or_else(|| row_err(format!("unparseable timestamp `{ts_field}`")))?;
        let price: f64 = price_field
            .parse()
            .map_err(|_| row_err(format!("unparseable price `{price_field}`")))?;
        if !price.is_finite() || price < 0.0 {
            return Err(row_err(format!("price `{price_field}` must be finite and non-negative")));
        }
        points.push(PricePoint { timestamp, price });
    }
    GasPriceSeries::new(points)
}

/// Accepts integer epoch seconds, RFC 3339, `YYYY-MM-DD[ T]HH:MM:SS[.fff][ UTC]`
/// (taken as UTC) or a bare date.
pub fn parse_timestamp(field: &str) -> Option<i64> {
    let field = field.trim();
    if let Ok(secs) = field.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(field) {
        return Some(dt.timestamp());
    }
    let naive = field.strip_suffix(" UTC").unwrap_or(field).trim_end_matches('Z');
    for fmt in ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(naive, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(naive, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp())
}

/// Writes the series with the configured column names and integer epoch seconds.
pub fn write_series(series: &GasPriceSeries, columns: &ColumnConfig) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([columns.timestamp.as_str(), columns.price.as_str()])
        .expect("in-memory write");
    for p in series.points() {
        writer
            .write_record([p.timestamp.to_string(), p.price.to_string()])
            .expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    Hour,
    Day,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeZone {
    Utc,
    /// US Eastern with the post-2007 daylight-saving rule.
    UsEastern,
}

const HOUR: i64 = 3600;
const DAY: i64 = 86_400;

impl TimeZone {
    /// Offset from UTC in seconds at the UTC instant `ts`.
    pub fn offset_at(self, ts: i64) -> i64 {
        match self {
            TimeZone::Utc => 0,
            TimeZone::UsEastern => {
                if eastern_dst_active(ts) {
                    -4 * HOUR
                } else {
                    -5 * HOUR
                }
            }
        }
    }

    /// UTC instant of local midnight `local_midnight` (local seconds).
    fn local_midnight_to_utc(self, local_midnight: i64) -> i64 {
        match self {
            TimeZone::Utc => local_midnight,
            TimeZone::UsEastern => {
                // Transitions happen at 02:00 local, so midnight is never ambiguous.
                for off in [-4 * HOUR, -5 * HOUR] {
                    let utc = local_midnight - off;
                    if self.offset_at(utc) == off {
                        return utc;
                    }
                }
                local_midnight + 5 * HOUR
            }
        }
    }
}

/// DST runs from 07:00 UTC on the second Sunday of March to 06:00 UTC on the
/// first Sunday of November.
fn eastern_dst_active(ts: i64) -> bool {
    let Some(dt) = DateTime::from_timestamp(ts, 0) else {
        return false;
    };
    let year = dt.year();
    let start = NaiveDate::from_weekday_of_month_opt(year, 3, Weekday::Sun, 2)
        .and_then(|d| d.and_hms_opt(7, 0, 0))
        .map(|d| d.and_utc().timestamp());
    let end = NaiveDate::from_weekday_of_month_opt(year, 11, Weekday::Sun, 1)
        .and_then(|d| d.and_hms_opt(6, 0, 0))
        .map(|d| d.and_utc().timestamp());
    match (start, end) {
        (Some(s), Some(e)) => ts >= s && ts < e,
        _ => false,
    }
}

/// UTC instant at which the bucket containing `ts` starts.
pub fn bucket_start(ts: i64, bucket: Bucket, tz: TimeZone) -> i64 {
    let offset = tz.offset_at(ts);
    let local = ts + offset;
    match bucket {
        Bucket::Hour => local.div_euclid(HOUR) * HOUR - offset,
        Bucket::Day => tz.local_midnight_to_utc(local.div_euclid(DAY) * DAY),
    }
}

/// One point per non-empty bucket, stamped at the bucket start, valued at the
/// median of its members.
pub fn resample_median(series: &GasPriceSeries, bucket: Bucket, tz: TimeZone) -> Result<GasPriceSeries> {
    if series.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut buckets: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for p in series.points() {
        buckets.entry(bucket_start(p.timestamp, bucket, tz)).or_default().push(p.price);
    }
    GasPriceSeries::new(
        buckets
            .into_iter()
            .map(|(timestamp, prices)| PricePoint { timestamp, price: stats::median(&prices) })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Third central moment over the cubed population standard deviation.
    pub skewness: f64,
    /// Excess kurtosis from population moments.
    pub kurtosis: f64,
}

pub fn summary_stats(series: &GasPriceSeries) -> Result<SummaryStats> {
    if series.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut v = series.prices();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = stats::mean(&v);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in &v {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    Ok(SummaryStats {
        count: v.len(),
        mean,
        std: stats::sample_variance(&v).sqrt(),
        min: v[0],
        q1: stats::quantile_sorted(&v, 0.25),
        median: stats::quantile_sorted(&v, 0.5),
        q3: stats::quantile_sorted(&v, 0.75),
        max: v[v.len() - 1],
        skewness,
        kurtosis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalFit {
    pub mu: f64,
    pub sigma: f64,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
}

/// Maximum-likelihood log-normal fit: `mu` and `sigma` are the mean and
/// population standard deviation of the log prices. AIC and BIC use k = 2.
pub fn lognormal_fit(series: &GasPriceSeries) -> Result<LogNormalFit> {
    let prices = series.prices();
    if prices.len() < 2 {
        return Err(Error::InsufficientData { needed: 2, got: prices.len() });
    }
    if let Some(p) = prices.iter().find(|&&p| p <= 0.0) {
        return Err(Error::Domain(format!("log-normal fit needs positive prices, found {p}")));
    }
    let logs: Vec<f64> = prices.iter().map(|p| p.ln()).collect();
    let mu = stats::mean(&logs);
    let sigma = stats::population_variance(&logs).sqrt();
    if sigma == 0.0 {
        return Err(Error::DegenerateFit("all prices identical; log-normal sigma is zero".into()));
    }
    let n = logs.len() as f64;
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let log_likelihood: f64 = logs
        .iter()
        .map(|&y| -y - sigma.ln() - 0.5 * ln_2pi - (y - mu).powi(2) / (2.0 * sigma * sigma))
        .sum();
    Ok(LogNormalFit {
        mu,
        sigma,
        log_likelihood,
        aic: 2.0 * 2.0 - 2.0 * log_likelihood,
        bic: 2.0 * n.ln() - 2.0 * log_likelihood,
    })
}
