use std::path::Path;

use chrono::NaiveDate;
use log::warn;

use super::{GapPolicy, IoError, MobilityFormat};
use crate::stats::MOBILITY_CLAMP;

/// Mobility fractions `y_L` on consecutive days from `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionSeries {
    pub start: NaiveDate,
    pub values: Vec<f64>,
}

/// Daily case counts on consecutive days from `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSeries {
    pub start: NaiveDate,
    pub values: Vec<u64>,
}

fn range(start: NaiveDate, len: usize) -> String {
    match len {
        0 => format!("nothing from {start}"),
        _ => format!(
            "{start}..={} ({len} days)",
            start + chrono::Days::new(len as u64 - 1)
        ),
    }
}

impl FractionSeries {
    pub fn range(&self) -> String {
        range(self.start, self.values.len())
    }
}

impl CountSeries {
    pub fn range(&self) -> String {
        range(self.start, self.values.len())
    }
}

struct Row {
    line: u64,
    date: NaiveDate,
    value: f64,
}

/// Parses a `date,value` file, checking that dates strictly increase.
fn read_rows(path: &Path) -> Result<Vec<Row>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => IoError::File {
                path: path.to_path_buf(),
                source,
            },
            other => IoError::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("{other:?}"),
            },
        })?;
    let parse_err = |line: u64, message: String| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(date_col), Some(value_col)) = (column("date"), column("value")) else {
        return Err(parse_err(
            1,
            format!(
                "expected header `date,value`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    };
    let mut rows: Vec<Row> = Vec::new();
    for record in reader.records() {
        let record =
            record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let date_text = record.get(date_col).unwrap_or_default();
        let date = NaiveDate::parse_from_str(date_text, "%Y-%m-%d")
            .map_err(|e| parse_err(line, format!("bad date `{date_text}`: {e}")))?;
        let value_text = record.get(value_col).unwrap_or_default();
        let value: f64 = value_text
            .parse()
            .map_err(|_| parse_err(line, format!("bad value `{value_text}`")))?;
        if !value.is_finite() {
            return Err(parse_err(line, format!("non-finite value `{value_text}`")));
        }
        if let Some(prev) = rows.last() {
            if date <= prev.date {
                return Err(IoError::NonMonotone {
                    path: path.to_path_buf(),
                    line,
                    date,
                    previous: prev.date,
                });
            }
        }
        rows.push(Row { line, date, value });
    }
    Ok(rows)
}

fn drop_before(rows: Vec<Row>, start: Option<NaiveDate>, path: &Path) -> Result<Vec<Row>, IoError> {
    let rows: Vec<Row> = match start {
        Some(s) => rows.into_iter().filter(|r| r.date >= s).collect(),
        None => rows,
    };
    if rows.is_empty() {
        let start = start.map_or_else(|| "the beginning".to_string(), |s| s.to_string());
        return Err(IoError::Empty {
            path: path.to_path_buf(),
            start,
        });
    }
    Ok(rows)
}

/// Loads mobility and converts it to the fraction adhering to mitigation.
///
/// Percent-of-baseline values map to `1 − v/100`; decline-fraction values are
/// used as given. Results are clamped into `[1e−6, 1 − 1e−6]`, warning when the
/// raw value lies outside `[0, 1]`. Missing days are forward-filled or rejected
/// according to `gaps`. Rows before `start` are dropped.
pub fn load_mobility(
    path: &Path,
    format: MobilityFormat,
    gaps: GapPolicy,
    start: Option<NaiveDate>,
) -> Result<FractionSeries, IoError> {
    let rows = drop_before(read_rows(path)?, start, path)?;
    let convert = |row: &Row| {
        let y = match format {
            MobilityFormat::PercentOfBaseline => 1.0 - row.value / 100.0,
            MobilityFormat::DeclineFraction => row.value,
        };
        if !(0.0..=1.0).contains(&y) {
            warn!(
                "{}:{}: mobility fraction {y} clamped into (0, 1)",
                path.display(),
                row.line
            );
        }
        y.clamp(MOBILITY_CLAMP, 1.0 - MOBILITY_CLAMP)
    };
    let mut values = vec![convert(&rows[0])];
    for pair in rows.windows(2) {
        let missing = (pair[1].date - pair[0].date).num_days() - 1;
        if missing > 0 {
            match gaps {
                GapPolicy::Error => {
                    return Err(IoError::Gap {
                        path: path.to_path_buf(),
                        line: pair[1].line,
                        previous: pair[0].date,
                        date: pair[1].date,
                        missing,
                    })
                }
                GapPolicy::ForwardFill => {
                    warn!(
                        "{}:{}: forward-filling {missing} missing day(s) after {}",
                        path.display(),
                        pair[1].line,
                        pair[0].date
                    );
                    let last = *values.last().expect("non-empty");
                    values.extend(std::iter::repeat_n(last, missing as usize));
                }
            }
        }
        values.push(convert(&pair[1]));
    }
    Ok(FractionSeries {
        start: rows[0].date,
        values,
    })
}

/// Loads daily case counts. Negative counts and missing days are errors;
/// non-integer counts are rounded with a warning. Rows before `start` are dropped.
pub fn load_cases(path: &Path, start: Option<NaiveDate>) -> Result<CountSeries, IoError> {
    let rows = drop_before(read_rows(path)?, start, path)?;
    let mut values = Vec::with_capacity(rows.len());
    for (k, row) in rows.iter().enumerate() {
        if k > 0 {
            let missing = (row.date - rows[k - 1].date).num_days() - 1;
            if missing > 0 {
                return Err(IoError::Gap {
                    path: path.to_path_buf(),
                    line: row.line,
                    previous: rows[k - 1].date,
                    date: row.date,
                    missing,
                });
            }
        }
        if row.value < 0.0 {
            return Err(IoError::NegativeCount {
                path: path.to_path_buf(),
                line: row.line,
                value: row.value,
            });
        }
        let rounded = row.value.round();
        if rounded != row.value {
            warn!(
                "{}:{}: non-integer count {} rounded to {rounded}",
                path.display(),
                row.line,
                row.value
            );
        }
        values.push(rounded as u64);
    }
    Ok(CountSeries {
        start: rows[0].date,
        values,
    })
}

/// Trims both series to `days` (when given) and checks that they cover the same dates.
pub fn align(
    mobility: &FractionSeries,
    cases: &CountSeries,
    days: Option<usize>,
) -> Result<(Vec<f64>, Vec<u64>, NaiveDate), IoError> {
    let take = |len: usize| days.map_or(len, |d| d.min(len));
    let m = FractionSeries {
        start: mobility.start,
        values: mobility.values[..take(mobility.values.len())].to_vec(),
    };
    let c = CountSeries {
        start: cases.start,
        values: cases.values[..take(cases.values.len())].to_vec(),
    };
    if m.start != c.start || m.values.len() != c.values.len() {
        return Err(IoError::Alignment {
            mobility: m.range(),
            cases: c.range(),
        });
    }
    Ok((m.values, c.values, c.start))
}
