//! CSV ingestion of market data: headered files with a date (or numeric
//! index) column and a price column, mapped onto a uniformly indexed series.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulate::{PriceSeries, Scale};

/// Column names and transforms for CSV input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub date_column: String,
    pub price_column: String,
    /// Take the natural log of the prices.
    pub apply_log: bool,
    /// Values are already log-prices (skips the positivity check).
    pub values_are_log: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            date_column: "date".into(),
            price_column: "close".into(),
            apply_log: false,
            values_are_log: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum TimeKey {
    /// ISO-8601 calendar date, compared as (y, m, d).
    Date(i32, u32, u32),
    /// Numeric index, compared via the order-preserving bit mapping.
    Numeric(u64),
}

fn parse_iso_date(text: &str) -> Option<(i32, u32, u32)> {
    let mut parts = text.split('-');
    let y = parts.next()?.parse::<i32>().ok()?;
    let m = parts.next()?.parse::<u32>().ok()?;
    let d = parts.next()?.parse::<u32>().ok()?;
    if parts.next().is_some() || !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return None;
    }
    Some((y, m, d))
}

/// Read a CSV file into a price series.
///
/// Calendar dates are collapsed onto consecutive integer trading-day indices
/// starting at zero, regardless of weekend or holiday gaps. A numeric time
/// column already on a unit grid keeps its values as indices; any other
/// numeric column is collapsed like dates. Rows must be in strictly
/// increasing time order and prices must be positive; violations are
/// reported with their row number.
pub fn ingest(path: &Path, config: &IngestConfig) -> Result<PriceSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRow {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let date_idx = col(&config.date_column)?;
    let price_idx = col(&config.price_column)?;

    let mut keys: Vec<TimeKey> = Vec::new();
    let mut numeric_times: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();

    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedRow {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize| -> Result<&str> {
            record.get(idx).ok_or_else(|| Error::MalformedRow {
                line,
                msg: format!("missing field {idx}"),
            })
        };

        let time_text = field(date_idx)?;
        let key = if let Ok(num) = time_text.parse::<f64>() {
            if !num.is_finite() {
                return Err(Error::MalformedRow {
                    line,
                    msg: format!("non-finite time value {time_text:?}"),
                });
            }
            numeric_times.push(num);
            // Order-preserving map from f64 to u64 (finite values only).
            let bits = num.to_bits();
            let mapped = if bits >> 63 == 0 {
                bits | (1 << 63)
            } else {
                !bits
            };
            TimeKey::Numeric(mapped)
        } else if let Some((y, m, d)) = parse_iso_date(time_text) {
            TimeKey::Date(y, m, d)
        } else {
            return Err(Error::MalformedRow {
                line,
                msg: format!("unparseable date {time_text:?}"),
            });
        };
        if let Some(last) = keys.last() {
            let consistent = matches!(
                (last, &key),
                (TimeKey::Date(..), TimeKey::Date(..)) | (TimeKey::Numeric(_), TimeKey::Numeric(_))
            );
            if !consistent {
                return Err(Error::MalformedRow {
                    line,
                    msg: "mixed date and numeric time values".into(),
                });
            }
            if *last >= key {
                return Err(Error::UnorderedDates { line });
            }
        }
        keys.push(key);

        let price_text = field(price_idx)?;
        let price: f64 = price_text.parse().map_err(|_| Error::MalformedRow {
            line,
            msg: format!("unparseable price {price_text:?}"),
        })?;
        if !price.is_finite() {
            return Err(Error::MalformedRow {
                line,
                msg: format!("non-finite price {price_text:?}"),
            });
        }
        if !config.values_are_log && price <= 0.0 {
            return Err(Error::NonPositivePrice { line, value: price });
        }
        values.push(if config.apply_log && !config.values_are_log {
            price.ln()
        } else {
            price
        });
    }

    if values.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "{}: no data rows",
            path.display()
        )));
    }

    // A numeric time column already on a unit grid keeps its frame.
    let t0 = if numeric_times.len() == values.len() {
        let unit_spaced = numeric_times
            .windows(2)
            .all(|w| (w[1] - w[0] - 1.0).abs() < 1e-9);
        if unit_spaced {
            numeric_times[0]
        } else {
            0.0
        }
    } else {
        0.0
    };

    let scale = if config.values_are_log || config.apply_log {
        Scale::Log
    } else {
        Scale::Raw
    };
    PriceSeries::new(t0, 1.0, values, scale)
}
