//! CSV ingestion, per-series transforms and frequency alignment.
//!
//! Input files carry a `date` column first (ISO-8601 `YYYY-MM`, `YYYY-MM-DD`
//! or `YYYY-Qn`) followed by one column per raw series. Empty cells are
//! allowed only before a series starts or after it ends; gaps in between,
//! or in the date column itself, are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::var::Dataset;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    Monthly,
    Quarterly,
}

/// A month or a quarter. Ordered chronologically within one frequency.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Period {
    Month { year: i32, month: u32 },
    Quarter { year: i32, quarter: u32 },
}

impl Period {
    pub fn month(year: i32, month: u32) -> Self {
        Period::Month { year, month }
    }

    pub fn quarter(year: i32, quarter: u32) -> Self {
        Period::Quarter { year, quarter }
    }

    pub fn frequency(&self) -> Frequency {
        match self {
            Period::Month { .. } => Frequency::Monthly,
            Period::Quarter { .. } => Frequency::Quarterly,
        }
    }

    /// Periods elapsed since year 0 in this period's frequency.
    fn ordinal(&self) -> i64 {
        match *self {
            Period::Month { year, month } => year as i64 * 12 + (month as i64 - 1),
            Period::Quarter { year, quarter } => year as i64 * 4 + (quarter as i64 - 1),
        }
    }

    pub fn succ(&self) -> Self {
        match *self {
            Period::Month { year, month } if month == 12 => Period::month(year + 1, 1),
            Period::Month { year, month } => Period::month(year, month + 1),
            Period::Quarter { year, quarter } if quarter == 4 => Period::quarter(year + 1, 1),
            Period::Quarter { year, quarter } => Period::quarter(year, quarter + 1),
        }
    }

    pub fn to_quarter(&self) -> Self {
        match *self {
            Period::Month { year, month } => Period::quarter(year, (month - 1) / 3 + 1),
            q => q,
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Period::Month { year, month } => write!(f, "{year:04}-{month:02}"),
            Period::Quarter { year, quarter } => write!(f, "{year:04}-Q{quarter}"),
        }
    }
}

impl FromStr for Period {
    type Err = Error;

    /// Accepts `1976-07`, `1976-07-01`, `1976-Q3`, and the shorthand
    /// `1976M7` / `1976Q3`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Data(format!("unrecognized period '{s}'"));
        let s = s.trim();
        let (year, rest) = if let Some(pos) = s.find(['-', 'M', 'Q']) {
            (&s[..pos], &s[pos..])
        } else {
            return Err(bad());
        };
        let year: i32 = year.parse().map_err(|_| bad())?;
        let rest = rest.strip_prefix('-').unwrap_or(rest);
        if let Some(q) = rest.strip_prefix('Q') {
            let quarter: u32 = q.parse().map_err(|_| bad())?;
            if !(1..=4).contains(&quarter) {
                return Err(bad());
            }
            return Ok(Period::quarter(year, quarter));
        }
        let rest = rest.strip_prefix('M').unwrap_or(rest);
        let month_part = rest.split('-').next().ok_or_else(bad)?;
        let month: u32 = month_part.parse().map_err(|_| bad())?;
        if !(1..=12).contains(&month) {
            return Err(bad());
        }
        if let Some(day) = rest.split('-').nth(1) {
            let day: u32 = day.parse().map_err(|_| bad())?;
            if !(1..=31).contains(&day) {
                return Err(bad());
            }
        }
        Ok(Period::month(year, month))
    }
}

impl Serialize for Period {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Period {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Level,
    /// `100 (log x_t - log x_{t-1})`.
    LogDiffPct,
    /// Within-quarter arithmetic mean of a monthly series.
    QuarterlyMean,
}

/// How one model variable is built from a raw column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesSpec {
    pub name: String,
    pub column: String,
    pub transform: Transform,
    /// Frequency of the model the series enters.
    pub frequency: Frequency,
    /// Optional file overriding the default data path for this series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
}

impl SeriesSpec {
    pub fn new(name: &str, column: &str, transform: Transform, frequency: Frequency) -> Self {
        SeriesSpec {
            name: name.into(),
            column: column.into(),
            transform,
            frequency,
            source: None,
        }
    }
}

/// One column of a raw file: consecutive periods with optional values.
struct RawColumn {
    index: Vec<Period>,
    values: Vec<Option<f64>>,
}

struct RawFile {
    index: Vec<Period>,
    columns: BTreeMap<String, Vec<Option<f64>>>,
}

fn read_raw(path: &Path) -> Result<RawFile> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Data(format!("{}: {other:?}", path.display())),
        })?;
    let headers = reader.headers()?.clone();
    if headers.get(0) != Some("date") {
        return Err(Error::Data(format!(
            "{}: first column must be 'date'",
            path.display()
        )));
    }
    let mut index = Vec::new();
    let mut columns: BTreeMap<String, Vec<Option<f64>>> = headers
        .iter()
        .skip(1)
        .map(|h| (h.to_string(), Vec::new()))
        .collect();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let period: Period = record[0].parse()?;
        if let Some(prev) = index.last() {
            let prev: &Period = prev;
            if prev.frequency() != period.frequency() || period != prev.succ() {
                return Err(Error::Data(format!(
                    "{}: irregular period {period} after {prev} at row {row}",
                    path.display()
                )));
            }
        }
        index.push(period);
        for (name, cell) in headers.iter().skip(1).zip(record.iter().skip(1)) {
            let value = if cell.is_empty() || cell == "." || cell.eq_ignore_ascii_case("na") {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| {
                    Error::Data(format!(
                        "{}: column '{name}' row {row}: cannot parse '{cell}'",
                        path.display()
                    ))
                })?)
            };
            columns.get_mut(name).expect("header").push(value);
        }
    }
    Ok(RawFile { index, columns })
}

impl RawFile {
    fn column(&self, name: &str, path: &Path) -> Result<RawColumn> {
        let values = self.columns.get(name).ok_or_else(|| {
            Error::Data(format!("{}: missing column '{name}'", path.display()))
        })?;
        Ok(RawColumn {
            index: self.index.clone(),
            values: values.clone(),
        })
    }
}

/// Contiguous observed stretch of a column; interior gaps are rejected.
fn observed_span(col: &RawColumn, name: &str) -> Result<(Vec<Period>, Vec<f64>, usize)> {
    let first = col.values.iter().position(Option::is_some);
    let last = col.values.iter().rposition(Option::is_some);
    let (first, last) = match (first, last) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::Data(format!("series '{name}' has no observations"))),
    };
    let mut values = Vec::with_capacity(last - first + 1);
    for row in first..=last {
        match col.values[row] {
            Some(v) => values.push(v),
            None => {
                return Err(Error::Data(format!(
                    "series '{name}' is missing a value at row {row} ({})",
                    col.index[row]
                )))
            }
        }
    }
    Ok((col.index[first..=last].to_vec(), values, first))
}

fn apply_transform(
    spec: &SeriesSpec,
    index: Vec<Period>,
    values: Vec<f64>,
    row_offset: usize,
) -> Result<(Vec<Period>, Vec<f64>)> {
    match spec.transform {
        Transform::Level => Ok((index, values)),
        Transform::LogDiffPct => {
            if let Some(pos) = values.iter().position(|&v| v <= 0.0) {
                return Err(Error::Data(format!(
                    "series '{}' has non-positive value {} at row {} under a log transform",
                    spec.name,
                    values[pos],
                    pos + row_offset
                )));
            }
            let diffs = values
                .windows(2)
                .map(|w| 100.0 * (w[1].ln() - w[0].ln()))
                .collect();
            Ok((index[1..].to_vec(), diffs))
        }
        Transform::QuarterlyMean => {
            let mut out_index: Vec<Period> = Vec::new();
            let mut out = Vec::new();
            let mut i = 0;
            while i < index.len() {
                let q = index[i].to_quarter();
                let mut j = i;
                while j < index.len() && index[j].to_quarter() == q {
                    j += 1;
                }
                // Partial quarters can only occur at the ends of the span.
                if j - i == 3 {
                    out_index.push(q);
                    out.push(values[i..j].iter().sum::<f64>() / 3.0);
                }
                i = j;
            }
            Ok((out_index, out))
        }
    }
}

fn check_frequency(spec: &SeriesSpec, source: Frequency) -> Result<()> {
    let ok = match spec.transform {
        Transform::QuarterlyMean => {
            source == Frequency::Monthly && spec.frequency == Frequency::Quarterly
        }
        _ => source == spec.frequency,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Data(format!(
            "series '{}': transform {:?} cannot map {:?} data into a {:?} model",
            spec.name, spec.transform, source, spec.frequency
        )))
    }
}

/// Load, transform and align the declared series over their common range.
pub fn load(path: impl AsRef<Path>, specs: &[SeriesSpec]) -> Result<Dataset> {
    let path = path.as_ref();
    if specs.is_empty() {
        return Err(Error::Data("no series declared".into()));
    }
    let frequency = specs[0].frequency;
    if let Some(s) = specs.iter().find(|s| s.frequency != frequency) {
        return Err(Error::Data(format!(
            "series '{}' is {:?} but the model is {:?}",
            s.name, s.frequency, frequency
        )));
    }
    let mut files: BTreeMap<PathBuf, RawFile> = BTreeMap::new();
    let mut transformed = Vec::with_capacity(specs.len());
    for spec in specs {
        let source = spec.source.clone().unwrap_or_else(|| path.to_path_buf());
        if !files.contains_key(&source) {
            files.insert(source.clone(), read_raw(&source)?);
        }
        let raw = &files[&source];
        let col = raw.column(&spec.column, &source)?;
        let source_freq = col
            .index
            .first()
            .map(Period::frequency)
            .ok_or_else(|| Error::Data(format!("{}: no rows", source.display())))?;
        check_frequency(spec, source_freq)?;
        let (index, values, offset) = observed_span(&col, &spec.name)?;
        transformed.push(apply_transform(spec, index, values, offset)?);
    }
    let start = transformed.iter().map(|(ix, _)| ix[0]).max().expect("non-empty");
    let end = transformed
        .iter()
        .map(|(ix, _)| *ix.last().expect("non-empty"))
        .min()
        .expect("non-empty");
    if start > end {
        return Err(Error::Data("declared series do not overlap".into()));
    }
    let rows = (end.ordinal() - start.ordinal() + 1) as usize;
    let mut values = DMatrix::zeros(rows, specs.len());
    for (j, (ix, vals)) in transformed.iter().enumerate() {
        let skip = (start.ordinal() - ix[0].ordinal()) as usize;
        for r in 0..rows {
            values[(r, j)] = vals[skip + r];
        }
    }
    let index = std::iter::successors(Some(start), |p| Some(p.succ()))
        .take(rows)
        .collect();
    Dataset::new(
        values,
        specs.iter().map(|s| s.name.clone()).collect(),
        index,
    )
}

/// Inclusive sub-range by time stamp.
pub fn window(data: &Dataset, start: Period, end: Period) -> Result<Dataset> {
    if start > end {
        return Err(Error::Data(format!("window start {start} after end {end}")));
    }
    let rows: Vec<usize> = data
        .index
        .iter()
        .enumerate()
        .filter(|(_, p)| **p >= start && **p <= end)
        .map(|(i, _)| i)
        .collect();
    let (first, count) = match (rows.first(), rows.len()) {
        (Some(&f), c) if c > 0 => (f, c),
        _ => {
            return Err(Error::Data(format!(
                "window {start}..{end} selects no observations"
            )))
        }
    };
    Dataset::new(
        data.values.rows(first, count).into_owned(),
        data.names.clone(),
        data.index[first..first + count].to_vec(),
    )
}

/// Write a dataset in the same layout `load` reads (one level column per
/// variable).
pub fn write(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Data(format!("{}: {other:?}", path.display())),
    })?;
    let mut header = vec!["date".to_string()];
    header.extend(data.names.iter().cloned());
    w.write_record(&header)?;
    for (r, period) in data.index.iter().enumerate() {
        let mut record = vec![period.to_string()];
        record.extend(data.values.row(r).iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Specs that read every column of a written dataset back as levels.
pub fn level_specs(data: &Dataset) -> Vec<SeriesSpec> {
    let freq = data
        .index
        .first()
        .map(Period::frequency)
        .unwrap_or(Frequency::Monthly);
    data.names
        .iter()
        .map(|n| SeriesSpec::new(n, n, Transform::Level, freq))
        .collect()
}
