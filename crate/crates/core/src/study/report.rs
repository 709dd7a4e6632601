//! CSV and JSON rendering of convergence reports.

use std::str::FromStr;

use crate::error::{HomogError, Result};
use crate::study::sweep::ConvergenceReport;

pub const CSV_HEADER: &str = "eps,h1_gap,avg_grad_error,bl_corrected_error,bound_rhs,bound_ok";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = HomogError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(HomogError::Config(format!("unknown format `{other}` (csv or json)"))),
        }
    }
}

/// `%.12g`-style formatting: 12 significant digits, trailing zeros dropped,
/// exponent form outside `[1e-4, 1e12)`.
pub fn format_sig12(v: f64) -> String {
    const DIGITS: i32 = 12;
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-4..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, v))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_sig12).unwrap_or_default()
}

pub fn emit_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        let ok = r.bound_ok.map(|b| b.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            format_sig12(r.eps),
            format_sig12(r.h1_gap),
            format_sig12(r.avg_grad_error),
            opt(r.bl_corrected_error),
            opt(r.bound_rhs),
            ok
        ));
    }
    out
}

pub fn emit_json(report: &ConvergenceReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

pub fn emit_report(report: &ConvergenceReport, format: Format) -> String {
    match format {
        Format::Csv => emit_csv(report),
        Format::Json => emit_json(report),
    }
}

pub fn parse_json_report(text: &str) -> Result<ConvergenceReport> {
    serde_json::from_str(text).map_err(|e| HomogError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}
