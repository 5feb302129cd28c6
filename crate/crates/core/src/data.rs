//! Daily price data: CSV loading, percentage-change transform, chronological
//! splits and sliding windows over the change series.

use std::collections::HashMap;
use std::ops::Deref;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl PriceBar {
    /// Bar carrying only a close; the other price fields are set to it.
    pub fn from_close(date: NaiveDate, close: f64) -> Self {
        Self {
            date,
            open: close,
            high: close,
            low: close,
            close,
            volume: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.close > 0.0) || !self.close.is_finite() {
            return Err(Error::NonPositiveClose {
                date: self.date,
                close: self.close,
            });
        }
        let finite = [self.open, self.high, self.low, self.volume]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidBar {
                date: self.date,
                message: "non-finite field".into(),
            });
        }
        if self.low > self.open || self.low > self.close || self.low > self.high {
            return Err(Error::InvalidBar {
                date: self.date,
                message: format!(
                    "low {} exceeds open/close/high ({}, {}, {})",
                    self.low, self.open, self.close, self.high
                ),
            });
        }
        if self.volume < 0.0 {
            return Err(Error::InvalidBar {
                date: self.date,
                message: format!("negative volume {}", self.volume),
            });
        }
        Ok(())
    }
}

/// Dated bars of one asset in strictly increasing date order.
///
/// Loaded series hold at least two bars; segments produced by
/// [`chronological_split`] may be shorter and are checked against a
/// caller-supplied minimum instead.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    bars: Vec<PriceBar>,
}

impl PriceSeries {
    pub fn new(bars: Vec<PriceBar>) -> Result<Self> {
        if bars.len() < 2 {
            return Err(Error::SeriesTooShort {
                needed: 2,
                got: bars.len(),
            });
        }
        Self::validated(bars)
    }

    fn validated(bars: Vec<PriceBar>) -> Result<Self> {
        if bars.is_empty() {
            return Err(Error::SeriesTooShort { needed: 1, got: 0 });
        }
        for bar in &bars {
            bar.validate()?;
        }
        if bars.windows(2).any(|w| w[0].date >= w[1].date) {
            return Err(Error::UnorderedDates);
        }
        Ok(Self { bars })
    }

    /// Builds a series from closes on consecutive calendar days starting at `start`.
    pub fn from_closes(start: NaiveDate, closes: &[f64]) -> Result<Self> {
        let bars = closes
            .iter()
            .enumerate()
            .map(|(i, &c)| PriceBar::from_close(start + chrono::Days::new(i as u64), c))
            .collect();
        Self::new(bars)
    }

    pub fn bars(&self) -> &[PriceBar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn close(&self, t: usize) -> f64 {
        self.bars[t].close
    }

    pub fn date(&self, t: usize) -> NaiveDate {
        self.bars[t].date
    }

    fn slice(&self, start: usize, end: usize) -> Result<Self> {
        Self::validated(self.bars[start..end].to_vec())
    }
}

/// Percentage changes of the close; `values[t]` is the change into bar `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    values: Vec<f64>,
}

impl ReturnSeries {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The last `w` percentage changes, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowState(Vec<f64>);

impl WindowState {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for WindowState {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub valid_frac: f64,
    pub test_frac: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_frac: 0.8,
            valid_frac: 0.1,
            test_frac: 0.1,
        }
    }
}

impl SplitSpec {
    pub fn new(train_frac: f64, valid_frac: f64, test_frac: f64) -> Result<Self> {
        let spec = Self {
            train_frac,
            valid_frac,
            test_frac,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for f in [self.train_frac, self.valid_frac, self.test_frac] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::SplitFractionRange(f));
            }
        }
        let sum = self.train_frac + self.valid_frac + self.test_frac;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::SplitFractions(sum));
        }
        Ok(())
    }
}

/// Column names for the required CSV fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub date: String,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            date: "Date".into(),
            open: "Open".into(),
            high: "High".into(),
            low: "Low".into(),
            close: "Close".into(),
            volume: "Volume".into(),
        }
    }
}

/// Loads a daily OHLCV CSV. Rows may appear in any order; the result is
/// sorted by date. Blank or unparseable required fields reject the file.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(csv_err)?.clone();
    let index: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let column = |name: &str| {
        index.get(name).copied().ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.to_string(),
        })
    };
    let cols = [
        column(&schema.date)?,
        column(&schema.open)?,
        column(&schema.high)?,
        column(&schema.low)?,
        column(&schema.close)?,
        column(&schema.volume)?,
    ];
    let names = [
        &schema.date,
        &schema.open,
        &schema.high,
        &schema.low,
        &schema.close,
        &schema.volume,
    ];

    let mut bars = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::BadRow {
            path: path.to_path_buf(),
            line,
            message,
        };
        let field = |k: usize| -> Result<&str> {
            match record.get(cols[k]) {
                Some(s) if !s.is_empty() => Ok(s),
                _ => Err(bad(format!("blank `{}`", names[k]))),
            }
        };
        let number = |k: usize| -> Result<f64> {
            let raw = field(k)?;
            raw.parse::<f64>()
                .map_err(|_| bad(format!("cannot parse `{}` value {raw:?}", names[k])))
        };
        let raw_date = field(0)?;
        let date = NaiveDate::parse_from_str(raw_date, DATE_FORMAT)
            .map_err(|_| bad(format!("cannot parse date {raw_date:?}")))?;
        let bar = PriceBar {
            date,
            open: number(1)?,
            high: number(2)?,
            low: number(3)?,
            close: number(4)?,
            volume: number(5)?,
        };
        bar.validate().map_err(|e| bad(e.to_string()))?;
        bars.push(bar);
    }

    bars.sort_by_key(|b| b.date);
    if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
        return Err(Error::DuplicateDate(w[0].date));
    }
    PriceSeries::new(bars)
}

/// `x[t] = 100 * (p[t+1] - p[t]) / p[t]`.
pub fn pct_change(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: prices.len(),
        });
    }
    let values = prices
        .bars()
        .windows(2)
        .map(|w| 100.0 * (w[1].close - w[0].close) / w[0].close)
        .collect();
    Ok(ReturnSeries { values })
}

/// Splits into contiguous train/validation/test segments at
/// `floor(n * train)` and `floor(n * (train + valid))`. Every segment must
/// hold at least `min_len` prices.
pub fn chronological_split(
    prices: &PriceSeries,
    spec: &SplitSpec,
    min_len: usize,
) -> Result<(PriceSeries, PriceSeries, PriceSeries)> {
    spec.validate()?;
    let n = prices.len();
    let b1 = (n as f64 * spec.train_frac).floor() as usize;
    let b2 = ((n as f64 * (spec.train_frac + spec.valid_frac)).floor() as usize).min(n);
    let min_len = min_len.max(1);
    for (segment, got) in [("train", b1), ("validation", b2 - b1), ("test", n - b2)] {
        if got < min_len {
            return Err(Error::SegmentTooShort {
                segment,
                got,
                needed: min_len,
            });
        }
    }
    Ok((prices.slice(0, b1)?, prices.slice(b1, b2)?, prices.slice(b2, n)?))
}

/// The `w` changes ending at index `t`, oldest first.
pub fn window_at(returns: &ReturnSeries, t: usize, w: usize) -> Result<WindowState> {
    if w == 0 || t + 1 < w || t >= returns.len() {
        return Err(Error::InsufficientHistory { t, window: w });
    }
    Ok(WindowState(returns.values[t + 1 - w..=t].to_vec()))
}
