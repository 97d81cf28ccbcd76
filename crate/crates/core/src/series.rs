//! Hourly series container and its CSV format.
//!
//! Missing samples are stored as `NaN`. The gap mask records which samples
//! were originally missing and is never cleared, so a repaired value can
//! always be told apart from a measured one.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::calendar::{add_hours, format_timestamp, hours_between, parse_timestamp, Timestamp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    start: Timestamp,
    values: Vec<f64>,
    gap_mask: Vec<bool>,
    unit: String,
}

impl HourlySeries {
    /// Builds a series; every `NaN` sample is flagged as a gap.
    pub fn new(start: Timestamp, values: Vec<f64>, unit: impl Into<String>) -> Result<Self> {
        let gap_mask = values.iter().map(|v| v.is_nan()).collect();
        Self::with_gap_mask(start, values, gap_mask, unit)
    }

    pub fn with_gap_mask(
        start: Timestamp,
        values: Vec<f64>,
        gap_mask: Vec<bool>,
        unit: impl Into<String>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Length { needed: 1, got: 0 });
        }
        if gap_mask.len() != values.len() {
            return Err(Error::Dimension {
                expected: values.len(),
                got: gap_mask.len(),
            });
        }
        if values.iter().zip(&gap_mask).any(|(v, g)| v.is_nan() && !g) {
            return Err(Error::Parameter(
                "missing sample without a gap flag".into(),
            ));
        }
        Ok(Self {
            start,
            values,
            gap_mask,
            unit: unit.into(),
        })
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.timestamp(self.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gap_mask(&self) -> &[bool] {
        &self.gap_mask
    }

    pub fn timestamp(&self, index: usize) -> Timestamp {
        add_hours(self.start, index as i64)
    }

    pub fn index_of(&self, t: Timestamp) -> Option<usize> {
        let h = hours_between(self.start, t)?;
        (h >= 0 && (h as usize) < self.len()).then_some(h as usize)
    }

    /// Value at `t`, `None` outside the record or where still missing.
    pub fn value_at(&self, t: Timestamp) -> Option<f64> {
        self.index_of(t)
            .map(|i| self.values[i])
            .filter(|v| !v.is_nan())
    }

    pub fn is_missing(&self, index: usize) -> bool {
        self.values[index].is_nan()
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    pub(crate) fn set_value(&mut self, index: usize, value: f64) {
        self.values[index] = value;
    }

    pub(crate) fn mark_missing(&mut self, index: usize) {
        self.values[index] = f64::NAN;
        self.gap_mask[index] = true;
    }
}

/// Column names used when reading and writing series CSV files.
#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub time: String,
    pub value: String,
    pub unit: String,
}

impl ColumnSpec {
    pub fn new(time: &str, value: &str, unit: &str) -> Self {
        Self {
            time: time.into(),
            value: value.into(),
            unit: unit.into(),
        }
    }
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self::new("time", "value", "")
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<HourlySeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_series(file, spec)
}

/// Reads a series from CSV. Absent hourly slots and empty value cells become
/// gaps. A `repaired` column, when present, is merged into the gap mask.
pub fn read_series<R: Read>(reader: R, spec: &ColumnSpec) -> Result<HourlySeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing column `{name}`")))
    };
    let time_col = col(&spec.time)?;
    let value_col = col(&spec.value)?;
    let repaired_col = headers.iter().position(|h| h == "repaired");

    let mut start = None;
    let mut prev: Option<Timestamp> = None;
    let mut values = Vec::new();
    let mut mask = Vec::new();

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let ts = parse_timestamp(field(time_col)).ok_or_else(|| Error::Parse {
            row,
            message: format!("malformed timestamp `{}`", field(time_col)),
        })?;
        let raw = field(value_col);
        let value = if raw.is_empty() {
            f64::NAN
        } else {
            raw.parse::<f64>().map_err(|_| Error::Parse {
                row,
                message: format!("malformed value `{raw}`"),
            })?
        };
        let flagged = match repaired_col.map(field) {
            None | Some("") | Some("false") | Some("0") => false,
            Some("true") | Some("1") => true,
            Some(other) => {
                return Err(Error::Parse {
                    row,
                    message: format!("malformed repaired flag `{other}`"),
                })
            }
        };

        if let Some(p) = prev {
            let step = hours_between(p, ts).ok_or_else(|| Error::Parse {
                row,
                message: "timestamp is not on the hourly grid".into(),
            })?;
            match step {
                s if s < 0 => return Err(Error::Ordering { row }),
                0 => return Err(Error::Duplicate { row }),
                s => {
                    for _ in 1..s {
                        values.push(f64::NAN);
                        mask.push(true);
                    }
                }
            }
        } else {
            start = Some(ts);
        }
        prev = Some(ts);
        mask.push(flagged || value.is_nan());
        values.push(value);
    }

    let start = start.ok_or(Error::Length { needed: 1, got: 0 })?;
    HourlySeries::with_gap_mask(start, values, mask, spec.unit.clone())
}

/// Writes `time,<value>,repaired`; missing values are empty cells.
pub fn write_series<W: Write>(series: &HourlySeries, writer: W, spec: &ColumnSpec) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([spec.time.as_str(), spec.value.as_str(), "repaired"])?;
    for (i, (v, g)) in series.values.iter().zip(&series.gap_mask).enumerate() {
        let value = if v.is_nan() { String::new() } else { v.to_string() };
        w.write_record([
            format_timestamp(series.timestamp(i)),
            value,
            g.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_series(series: &HourlySeries, path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_series(series, std::io::BufWriter::new(file), spec)
}
