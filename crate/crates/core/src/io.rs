//! Data ingestion (libsvm, dense CSV) and the result CSV format.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, ParseError, Result};
use crate::linalg::DenseMatrix;

fn malformed(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Malformed {
        line,
        message: message.into(),
    }
}

fn parse_real(token: &str, line: usize, what: &str) -> std::result::Result<f64, ParseError> {
    let v: f64 = token
        .parse()
        .map_err(|_| malformed(line, format!("invalid {what} '{token}'")))?;
    if !v.is_finite() {
        return Err(malformed(line, format!("non-finite {what} '{token}'")));
    }
    Ok(v)
}

/// Parses `label idx:val idx:val …` lines (1-based, strictly increasing
/// indices) into a dense matrix. Labels are discarded; blank lines are skipped.
pub fn parse_libsvm<R: BufRead>(reader: R) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut width = 0;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let mut tokens = line.split_whitespace();
        let Some(label) = tokens.next() else { continue };
        parse_real(label, line_no, "label")?;
        let mut entries = Vec::new();
        let mut last = 0;
        for token in tokens {
            let (idx, val) = token
                .split_once(':')
                .ok_or_else(|| malformed(line_no, format!("expected idx:val, found '{token}'")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| malformed(line_no, format!("invalid feature index '{idx}'")))?;
            if idx == 0 {
                return Err(malformed(line_no, "feature indices are 1-based").into());
            }
            if idx <= last {
                return Err(malformed(line_no, format!("index {idx} does not increase past {last}")).into());
            }
            last = idx;
            entries.push((idx - 1, parse_real(val, line_no, "value")?));
        }
        width = width.max(last);
        rows.push(entries);
    }
    if rows.is_empty() {
        return Err(ParseError::EmptyInput.into());
    }
    let mut a = DenseMatrix::zeros(rows.len(), width);
    for (i, entries) in rows.iter().enumerate() {
        for &(j, v) in entries {
            a[(i, j)] = v;
        }
    }
    Ok(a)
}

pub fn parse_libsvm_str(text: &str) -> Result<DenseMatrix> {
    parse_libsvm(text.as_bytes())
}

/// libsvm text for `a` with label 0 on every row; zeros are omitted.
pub fn format_libsvm(a: &DenseMatrix) -> String {
    let mut out = String::new();
    for row in a.row_iter() {
        out.push('0');
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 {
                write!(out, " {}:{:e}", j + 1, v).unwrap();
            }
        }
        out.push('\n');
    }
    out
}

/// Comma-separated reals, one row per line, no header.
pub fn parse_dense_csv<R: BufRead>(reader: R) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let (mut rows, mut width) = (0, 0);
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line_no = record_line(&record);
        for token in record.iter() {
            values.push(parse_real(token, line_no, "value")?);
        }
        width = record.len();
        rows += 1;
    }
    if rows == 0 {
        return Err(ParseError::EmptyInput.into());
    }
    Ok(DenseMatrix::from_row_slice(rows, width, &values))
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            malformed(line, format!("expected {expected_len} columns, found {len}")).into()
        }
        other => malformed(line, format!("{other:?}")).into(),
    }
}

/// One line of experiment output.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub k: usize,
    /// Absent when the prediction is undefined (e.g. `k` at or above the rank).
    pub predicted: Option<f64>,
    pub empirical_mean: Option<f64>,
    pub empirical_std: Option<f64>,
    pub epsilon_hat: Option<f64>,
    pub closed_form: Option<f64>,
}

pub const CSV_HEADER: &str = "k,predicted,empirical_mean,empirical_std,epsilon_hat,closed_form";

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros dropped.
pub fn format_significant(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format");
    let exponent: i32 = exponent.parse().expect("exponent");
    if !(-4..DIGITS).contains(&exponent) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exponent < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exponent.abs())
    } else {
        let decimals = (DIGITS - 1 - exponent).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn optional(x: Option<f64>) -> String {
    x.map(format_significant).unwrap_or_default()
}

pub fn format_csv(rows: &[ResultRow]) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::with_capacity(64 * (rows.len() + 1)));
    writer.write_record(CSV_HEADER.split(',')).expect("write to memory");
    for r in rows {
        writer
            .write_record([
                r.k.to_string(),
                optional(r.predicted),
                optional(r.empirical_mean),
                optional(r.empirical_std),
                optional(r.epsilon_hat),
                optional(r.closed_form),
            ])
            .expect("write to memory");
    }
    let bytes = writer.into_inner().expect("flush to memory");
    String::from_utf8(bytes).expect("ascii output")
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    std::fs::write(path, format_csv(rows))?;
    Ok(())
}

/// Reads back a file produced by [`format_csv`].
pub fn parse_result_csv(text: &str) -> Result<Vec<ResultRow>> {
    if text.is_empty() {
        return Err(ParseError::EmptyInput.into());
    }
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error)?;
    if header.iter().ne(CSV_HEADER.split(',')) {
        return Err(malformed(1, "unexpected header").into());
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line_no = record_line(&record);
        let field = |i: usize| -> std::result::Result<Option<f64>, ParseError> {
            match &record[i] {
                "" => Ok(None),
                s => parse_real(s, line_no, "value").map(Some),
            }
        };
        rows.push(ResultRow {
            k: record[0]
                .parse()
                .map_err(|_| malformed(line_no, format!("invalid k '{}'", &record[0])))?,
            predicted: field(1)?,
            empirical_mean: field(2)?,
            empirical_std: field(3)?,
            epsilon_hat: field(4)?,
            closed_form: field(5)?,
        });
    }
    Ok(rows)
}
