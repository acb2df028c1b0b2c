use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::error::CliError;

/// How a check's value is compared with its bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `value <= bound`
    AtMost,
    /// `value >= bound`
    AtLeast,
    /// `value > bound`
    Above,
}

impl Comparison {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Comparison::AtMost => value <= bound,
            Comparison::AtLeast => value >= bound,
            Comparison::Above => value > bound,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Comparison::AtMost => "at_most",
            Comparison::AtLeast => "at_least",
            Comparison::Above => "above",
        }
    }
}

/// Grid coordinates of a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    #[serde(serialize_with = "significant")]
    pub q: f64,
    pub spectrum: String,
    pub degree: usize,
}

/// Outcome of one check at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub parameters: Parameters,
    /// Residual or margin; `None` when the computation failed.
    #[serde(serialize_with = "significant_opt")]
    pub value: Option<f64>,
    #[serde(serialize_with = "significant")]
    pub bound: f64,
    pub comparison: Comparison,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_s: Option<f64>,
}

impl VerificationReport {
    pub fn new(check: &str, parameters: Parameters, value: f64, bound: f64, comparison: Comparison) -> Self {
        Self {
            check: check.to_string(),
            parameters,
            value: Some(value),
            bound,
            comparison,
            passed: value.is_finite() && comparison.holds(value, bound),
            error: None,
            wall_time_s: None,
        }
    }

    pub fn failed(check: &str, parameters: Parameters, bound: f64, comparison: Comparison, error: String) -> Self {
        Self {
            check: check.to_string(),
            parameters,
            value: None,
            bound,
            comparison,
            passed: false,
            error: Some(error),
            wall_time_s: None,
        }
    }
}

/// `x` rounded to 15 significant digits, the precision used in reports.
pub fn round_significant(x: f64) -> f64 {
    format_significant(x).parse().unwrap_or(x)
}

fn format_significant(x: f64) -> String {
    format!("{x:.14e}")
}

fn significant<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        RawValue::from_string(format_significant(*x)).map_err(serde::ser::Error::custom)?.serialize(s)
    } else {
        s.serialize_none()
    }
}

fn significant_opt<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => significant(v, s),
        None => s.serialize_none(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(CliError::Config(format!("format: unknown format `{other}`"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Serialize, Deserialize)]
struct Document {
    reports: Vec<VerificationReport>,
}

const CSV_HEADER: [&str; 10] =
    ["check", "q", "spectrum", "degree", "value", "bound", "comparison", "passed", "error", "wall_time_s"];

/// Writes `reports` in `format`.
pub fn emit<W: Write>(reports: &[VerificationReport], format: Format, out: W) -> Result<(), CliError> {
    match format {
        Format::Json => {
            let doc = Document { reports: reports.to_vec() };
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| CliError::Encode(e.to_string()))?;
            writeln!(out).map_err(|e| CliError::Io("report".into(), e))
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let enc = |e: csv::Error| CliError::Encode(e.to_string());
            w.write_record(CSV_HEADER).map_err(enc)?;
            for r in reports {
                let num = |x: Option<f64>| x.filter(|v| v.is_finite()).map(format_significant).unwrap_or_default();
                w.write_record([
                    r.check.clone(),
                    format_significant(r.parameters.q),
                    r.parameters.spectrum.clone(),
                    r.parameters.degree.to_string(),
                    num(r.value),
                    num(Some(r.bound)),
                    r.comparison.as_str().to_string(),
                    r.passed.to_string(),
                    r.error.clone().unwrap_or_default(),
                    num(r.wall_time_s),
                ])
                .map_err(enc)?;
            }
            w.flush().map_err(|e| CliError::Io("report".into(), e))
        }
    }
}

/// `emit` into a string.
pub fn emit_string(reports: &[VerificationReport], format: Format) -> Result<String, CliError> {
    let mut buf = Vec::new();
    emit(reports, format, &mut buf)?;
    String::from_utf8(buf).map_err(|e| CliError::Encode(e.to_string()))
}

/// Reads back a document written with `Format::Json`.
pub fn parse_json(text: &str) -> Result<Vec<VerificationReport>, CliError> {
    serde_json::from_str::<Document>(text)
        .map(|d| d.reports)
        .map_err(|e| CliError::Decode(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> Parameters {
        Parameters { q: 0.3, spectrum: "2x1".into(), degree: 4 }
    }

    #[test]
    fn comparisons() {
        assert!(Comparison::AtMost.holds(1e-11, 1e-10));
        assert!(!Comparison::AtMost.holds(1e-9, 1e-10));
        assert!(Comparison::AtLeast.holds(0.0, 0.0));
        assert!(!Comparison::Above.holds(0.0, 0.0));
        let r = VerificationReport::new("x", params(), f64::NAN, 1.0, Comparison::AtMost);
        assert!(!r.passed);
    }

    #[test]
    fn empty_documents() {
        let json = emit_string(&[], Format::Json).unwrap();
        assert!(parse_json(&json).unwrap().is_empty());
        let csv = emit_string(&[], Format::Csv).unwrap();
        assert_eq!(csv.lines().count(), 1);
    }

    #[test]
    fn single_pass_row() {
        let r = VerificationReport::new("wick.vacuum", params(), 1.25e-13, 1e-10, Comparison::AtMost);
        let csv = emit_string(&[r], Format::Csv).unwrap();
        let rows: Vec<_> = csv.lines().collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(
            rows[1],
            "wick.vacuum,3.00000000000000e-1,2x1,4,1.25000000000000e-13,1.00000000000000e-10,at_most,true,,"
        );
    }

    #[test]
    fn json_round_trip() {
        let mut a = VerificationReport::new("a", params(), 0.1 + 0.2, 1e-10, Comparison::AtMost);
        a.wall_time_s = Some(1.5);
        let b = VerificationReport::failed("b", params(), 0.0, Comparison::AtLeast, "boom".into());
        let text = emit_string(&[a.clone(), b.clone()], Format::Json).unwrap();
        assert!(text.contains("3.00000000000000e-1"));
        let back = parse_json(&text).unwrap();
        a.value = a.value.map(round_significant);
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn formats_parse() {
        assert_eq!("json".parse::<Format>().unwrap(), Format::Json);
        assert!("xml".parse::<Format>().is_err());
    }
}
