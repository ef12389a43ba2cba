//! Reading a numeric series from text.
//!
//! Plain input holds one value per line. Delimited input (comma, tab or
//! runs of spaces) needs a column, given by 1-based index or by header name.
//! Blank lines and lines starting with `#` are skipped everywhere.

use std::str::FromStr;

use crate::error::{MuscleError, Result};
use crate::segmentation::TimeSeries;

/// Which field of a delimited row to read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnSelector {
    /// 1-based position.
    Index(usize),
    /// Header name, matched after trimming.
    Name(String),
}

impl FromStr for ColumnSelector {
    type Err = MuscleError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(MuscleError::invalid_input("empty column selector"));
        }
        match s.parse::<usize>() {
            Ok(0) => Err(MuscleError::invalid_input("column indices start at 1")),
            Ok(i) => Ok(ColumnSelector::Index(i)),
            Err(_) => Ok(ColumnSelector::Name(s.to_string())),
        }
    }
}

fn fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn number(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| MuscleError::DataParse {
        line,
        message: format!("'{field}' is not a number"),
    })?;
    if !v.is_finite() {
        return Err(MuscleError::DataParse {
            line,
            message: format!("'{field}' is not finite"),
        });
    }
    Ok(v)
}

/// Parses the values of a series. Without a column every data line must be
/// a single number. With an index, a first row whose selected field is not a
/// number is taken as a header; with a name, the first row must be a header.
pub fn parse_values(text: &str, column: Option<&ColumnSelector>) -> Result<Vec<f64>> {
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .peekable();

    let mut values = Vec::new();
    let pos = match column {
        None => {
            for (no, line) in rows {
                values.push(number(line, no)?);
            }
            return Ok(values);
        }
        Some(ColumnSelector::Index(i)) => {
            let pos = i - 1;
            if let Some(&(_, first)) = rows.peek() {
                let f = fields(first);
                if f.get(pos).is_some_and(|v| v.parse::<f64>().is_err()) {
                    rows.next();
                }
            }
            pos
        }
        Some(ColumnSelector::Name(name)) => {
            let Some((no, header)) = rows.next() else {
                return Ok(values);
            };
            fields(header)
                .iter()
                .position(|f| f.trim_matches('"') == name)
                .ok_or_else(|| MuscleError::DataParse {
                    line: no,
                    message: format!("no column named '{name}'"),
                })?
        }
    };
    for (no, line) in rows {
        let f = fields(line);
        let field = f.get(pos).ok_or_else(|| MuscleError::DataParse {
            line: no,
            message: format!("row has {} fields, column {} requested", f.len(), pos + 1),
        })?;
        values.push(number(field.trim_matches('"'), no)?);
    }
    Ok(values)
}

/// [`parse_values`] followed by the checks of [`TimeSeries::new`].
pub fn parse_series(text: &str, column: Option<&ColumnSelector>) -> Result<TimeSeries> {
    let values = parse_values(text, column)?;
    if values.is_empty() {
        return Err(MuscleError::invalid_input("no data values found"));
    }
    TimeSeries::new(values)
}
