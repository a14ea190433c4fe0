//! CSV ingestion for the two calibration stages.
//!
//! First-stage files carry the header `x,y`; second-stage files the header
//! `y0`. With comma decimals (`0,05`) the column delimiter must be `;` or a
//! tab. Single-column files are never split.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use berkcal::CalibrationData;
use clap::ValueEnum;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Locale {
    /// `1.5` decimals.
    #[default]
    Point,
    /// `1,5` decimals.
    Comma,
}

/// A malformed input file, with the 1-based line and column of the fault.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub path: PathBuf,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}: {}",
            self.path.display(),
            self.line,
            self.column,
            self.message
        )
    }
}

impl std::error::Error for ParseError {}

/// Parsed rows of a CSV table with a fixed header.
fn read_table(path: &Path, header: &[&str], locale: Locale) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_table(&text, path, header, locale).map_err(anyhow::Error::new)
}

pub fn parse_table(text: &str, path: &Path, header: &[&str], locale: Locale) -> Result<Vec<Vec<f64>>, ParseError> {
    let err = |line: usize, column: usize, message: String| ParseError {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut lines = text
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (header_line, head) = lines.next().ok_or_else(|| err(1, 1, "empty file".into()))?;
    let delimiter = if head.contains(';') {
        ';'
    } else if head.contains('\t') {
        '\t'
    } else {
        ','
    };
    if header.len() > 1 && locale == Locale::Comma && delimiter == ',' {
        return Err(err(
            header_line,
            1,
            "comma decimals need ';' or tab as the column delimiter".into(),
        ));
    }
    let split = |line: &str| -> Vec<String> {
        if header.len() == 1 {
            vec![line.trim().to_string()]
        } else {
            line.split(delimiter).map(|f| f.trim().to_string()).collect()
        }
    };

    let names = split(head);
    let expected = header.join(&delimiter.to_string());
    if names.len() != header.len() || names.iter().zip(header).any(|(a, b)| !a.eq_ignore_ascii_case(b)) {
        return Err(err(header_line, 1, format!("expected header `{expected}`, found `{}`", head.trim())));
    }

    let mut rows = Vec::new();
    for (line_no, line) in lines {
        let fields = split(line);
        if fields.len() != header.len() {
            return Err(err(
                line_no,
                1,
                format!("expected {} fields, found {}", header.len(), fields.len()),
            ));
        }
        let mut row = Vec::with_capacity(fields.len());
        for (col, field) in fields.iter().enumerate() {
            let value = parse_number(field, locale).ok_or_else(|| {
                err(
                    line_no,
                    col + 1,
                    format!("cannot read `{field}` as a number with {locale:?} decimals"),
                )
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn parse_number(field: &str, locale: Locale) -> Option<f64> {
    let normalized = match locale {
        Locale::Point => field.to_string(),
        Locale::Comma => {
            if field.contains('.') {
                return None;
            }
            field.replace(',', ".")
        }
    };
    normalized.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn read_first_stage(path: &Path, locale: Locale) -> Result<Vec<(f64, f64)>> {
    Ok(read_table(path, &["x", "y"], locale)?
        .into_iter()
        .map(|r| (r[0], r[1]))
        .collect())
}

pub fn read_second_stage(path: &Path, locale: Locale) -> Result<Vec<f64>> {
    Ok(read_table(path, &["y0"], locale)?.into_iter().map(|r| r[0]).collect())
}

/// Reads and validates both stages.
pub fn ingest(first: &Path, second: &Path, locale: Locale) -> Result<CalibrationData> {
    let data = CalibrationData::new(read_first_stage(first, locale)?, read_second_stage(second, locale)?)?;
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, header: &[&str], locale: Locale) -> Result<Vec<Vec<f64>>, ParseError> {
        parse_table(text, Path::new("t.csv"), header, locale)
    }

    #[test]
    fn point_locale_with_exponent() {
        let rows = parse("x,y\n1.0e5,2\n0.5,-3.25\n", &["x", "y"], Locale::Point).unwrap();
        assert_eq!(rows, vec![vec![1.0e5, 2.0], vec![0.5, -3.25]]);
    }

    #[test]
    fn comma_locale_semicolon_and_crlf() {
        let rows = parse("\u{feff}x;y\r\n0,05;6455,900\r\n\r\n0,11;13042,933\r\n", &["x", "y"], Locale::Comma).unwrap();
        assert_eq!(rows, vec![vec![0.05, 6455.9], vec![0.11, 13042.933]]);
    }

    #[test]
    fn single_column_comma_not_split() {
        let rows = parse("y0\n1465,0\n1351,0\n", &["y0"], Locale::Comma).unwrap();
        assert_eq!(rows, vec![vec![1465.0], vec![1351.0]]);
    }

    #[test]
    fn comma_file_read_as_point_reports_position() {
        let e = parse("x;y\n0,05;6455,900\n", &["x", "y"], Locale::Point).unwrap_err();
        assert_eq!((e.line, e.column), (2, 1));
        let e = parse("y0\n1465\n1351,0\n", &["y0"], Locale::Point).unwrap_err();
        assert_eq!((e.line, e.column), (3, 1));
    }

    #[test]
    fn bad_header_and_field_count() {
        assert_eq!(parse("a,b\n1,2\n", &["x", "y"], Locale::Point).unwrap_err().line, 1);
        let e = parse("x,y\n1,2\n3\n", &["x", "y"], Locale::Point).unwrap_err();
        assert_eq!(e.line, 3);
        assert!(parse("", &["y0"], Locale::Point).is_err());
        assert!(parse("x,y\n1,2\n", &["x", "y"], Locale::Comma).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(parse("y0\nNaN\n", &["y0"], Locale::Point).is_err());
        assert!(parse("y0\ninf\n", &["y0"], Locale::Point).is_err());
    }
}
