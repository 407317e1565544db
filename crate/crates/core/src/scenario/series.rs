//! Per-step series files: `step,<value columns...>` with a header row and
//! 0-based step indices.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use super::{ScenarioError, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeriesSpec<'a> {
    pub column: &'a str,
    pub allow_negative: bool,
    /// Accept files at a coarser or finer whole-multiple resolution.
    pub resample: bool,
}

impl<'a> SeriesSpec<'a> {
    pub fn non_negative(column: &'a str) -> Self {
        Self {
            column,
            allow_negative: false,
            resample: false,
        }
    }

    pub fn resampled(self, resample: bool) -> Self {
        Self { resample, ..self }
    }
}

/// Reads one value column from a series CSV and aligns it to `grid`.
///
/// With `resample`, a file with `steps / k` rows is expanded piecewise-constant
/// (each row repeated `k` times) and a file with `k · steps` rows is averaged
/// in blocks of `k`.
pub fn load_series_csv(
    path: &Path,
    spec: SeriesSpec<'_>,
    grid: &TimeGrid,
) -> Result<Vec<f64>, ScenarioError> {
    let file = File::open(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    read_series(file, &path.display().to_string(), spec, grid)
}

pub(crate) fn read_series<R: std::io::Read>(
    reader: R,
    source: &str,
    spec: SeriesSpec<'_>,
    grid: &TimeGrid,
) -> Result<Vec<f64>, ScenarioError> {
    let csv_err = |e: csv::Error| ScenarioError::Csv {
        path: source.to_string(),
        message: e.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ScenarioError::MissingColumn {
                path: source.to_string(),
                column: name.to_string(),
            })
    };
    let step_col = find("step")?;
    let value_col = find(spec.column)?;

    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let bad = |reason: String| ScenarioError::BadRow {
            path: source.to_string(),
            row,
            reason,
        };
        let step: usize = record[step_col]
            .parse()
            .map_err(|_| bad(format!("step `{}` is not an index", &record[step_col])))?;
        if step != row {
            return Err(bad(format!("expected step {row}, found {step}")));
        }
        let v: f64 = record[value_col]
            .parse()
            .map_err(|_| bad(format!("`{}` is not a number", &record[value_col])))?;
        if !v.is_finite() {
            return Err(bad(format!("non-finite value {v}")));
        }
        if v < 0.0 && !spec.allow_negative {
            return Err(ScenarioError::NegativeValue {
                path: source.to_string(),
                column: spec.column.to_string(),
                row,
                value: v,
            });
        }
        values.push(v);
    }
    align(values, source, spec, grid.steps())
}

fn align(
    values: Vec<f64>,
    source: &str,
    spec: SeriesSpec<'_>,
    steps: usize,
) -> Result<Vec<f64>, ScenarioError> {
    let n = values.len();
    if n == steps {
        return Ok(values);
    }
    let mismatch = || ScenarioError::LengthMismatch {
        what: format!("{source} column `{}`", spec.column),
        expected: steps,
        found: n,
    };
    if !spec.resample || n == 0 {
        return Err(mismatch());
    }
    if steps.is_multiple_of(n) {
        let k = steps / n;
        Ok(values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, k))
            .collect())
    } else if n.is_multiple_of(steps) {
        let k = n / steps;
        Ok(values
            .chunks(k)
            .map(|c| c.iter().sum::<f64>() / k as f64)
            .collect())
    } else {
        Err(mismatch())
    }
}

/// Reads `departure_hhmm` entries from a bus timetable CSV.
pub fn load_bus_schedule(path: &Path) -> Result<Vec<String>, ScenarioError> {
    let source = path.display().to_string();
    let file = File::open(path).map_err(|e| ScenarioError::Io {
        path: source.clone(),
        message: e.to_string(),
    })?;
    let csv_err = |e: csv::Error| ScenarioError::Csv {
        path: source.clone(),
        message: e.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let col = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .position(|h| h == "departure_hhmm")
        .ok_or_else(|| ScenarioError::MissingColumn {
            path: source.clone(),
            column: "departure_hhmm".into(),
        })?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        super::sessions::parse_clock(&record[col])?;
        out.push(record[col].to_string());
    }
    Ok(out)
}

/// Writes `step,<names...>` rows for equally long columns.
pub fn write_series_csv(
    path: &Path,
    names: &[&str],
    columns: &[&[f64]],
) -> Result<(), ScenarioError> {
    let io_err = |e: std::io::Error| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut out = String::from("step");
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    let rows = columns.first().map_or(0, |c| c.len());
    for t in 0..rows {
        out.push_str(&t.to_string());
        for c in columns {
            out.push(',');
            out.push_str(&c[t].to_string());
        }
        out.push('\n');
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(io_err)
}
