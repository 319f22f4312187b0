//! Report model and its three encodings: an aligned text table, CSV with
//! `#` header lines, and line-delimited JSON.
//!
//! CSV layout (schema 1): `# multisearch report schema 1`, `# kind: <kind>`,
//! then `# config.<key>: <value>` and `# summary.<key>: <value>` lines, the
//! column header, and one line per row. JSON lines: one header object
//! (`record = "header"`), one object per row (`record = "row"`), then any
//! `record = "replay"` objects.

use std::fmt::Write as _;
use std::io::Write;

use anyhow::Result;
use serde_json::{json, Map, Value as Json};

pub const REPORT_SCHEMA: u32 = 1;
const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Empty,
    Bool(bool),
    Int(i64),
    Num(f64),
    Text(String),
}

impl Value {
    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn opt_num(x: Option<f64>) -> Self {
        x.map_or(Value::Empty, Value::Num)
    }

    fn render(&self) -> String {
        match self {
            Value::Empty => String::new(),
            Value::Bool(b) => b.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Num(x) => format_num(*x),
            Value::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Json {
        match self {
            Value::Empty => Json::Null,
            Value::Bool(b) => Json::Bool(*b),
            Value::Int(i) => json!(i),
            Value::Num(x) => {
                let s = format_num(*x);
                match s.parse::<f64>().ok().and_then(serde_json::Number::from_f64) {
                    Some(n) => Json::Number(n),
                    None => Json::String(s),
                }
            }
            Value::Text(s) => Json::String(s.clone()),
        }
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as i64)
    }
}

impl From<u64> for Value {
    fn from(i: u64) -> Self {
        Value::Int(i as i64)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

/// `%.12g`: twelve significant digits, trailing zeros removed, exponent
/// form outside `1e-4 ≤ |x| < 1e12`.
pub fn format_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIGNIFICANT_DIGITS as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_owned()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn format_point(p: &[f64]) -> String {
    let parts: Vec<String> = p.iter().map(|&x| format_num(x)).collect();
    format!("({})", parts.join(" "))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: &'static str,
    pub config: Vec<(String, Value)>,
    pub summary: Vec<(String, Value)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    /// Structured payloads emitted only as JSON lines.
    pub replays: Vec<Json>,
    /// Free-form lines for the text table.
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(kind: &'static str, columns: Vec<&'static str>) -> Self {
        Self { kind, config: Vec::new(), summary: Vec::new(), columns, rows: Vec::new(), replays: Vec::new(), notes: Vec::new() }
    }

    pub fn config(&mut self, key: &str, value: impl Into<Value>) {
        self.config.push((key.to_owned(), value.into()));
    }

    pub fn summary(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.push((key.to_owned(), value.into()));
    }

    pub fn row(&mut self, values: Vec<Value>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    #[default]
    Csv,
    JsonLines,
}

pub fn emit(report: &Report, format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Table => out.write_all(table(report).as_bytes())?,
        Format::Csv => csv(report, out)?,
        Format::JsonLines => json_lines(report, out)?,
    }
    Ok(())
}

pub fn table(report: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", report.kind);
    let width = report.config.iter().chain(&report.summary).map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &report.config {
        let _ = writeln!(s, "{}", format!("  {k:width$}  {}", v.render()).trim_end());
    }
    if !report.summary.is_empty() {
        s.push('\n');
        for (k, v) in &report.summary {
            let _ = writeln!(s, "{}", format!("  {k:width$}  {}", v.render()).trim_end());
        }
    }
    if !report.columns.is_empty() {
        let cells: Vec<Vec<String>> = report.rows.iter().map(|r| r.iter().map(Value::render).collect()).collect();
        let widths: Vec<usize> = report
            .columns
            .iter()
            .enumerate()
            .map(|(j, c)| cells.iter().map(|r| r[j].chars().count()).chain([c.len()]).max().unwrap_or(0))
            .collect();
        let line = |items: Vec<&str>| {
            let padded: Vec<String> = items.iter().zip(&widths).map(|(v, &w)| format!("{v:>w$}")).collect();
            padded.join("  ").trim_end().to_owned()
        };
        s.push('\n');
        let _ = writeln!(s, "{}", line(report.columns.clone()));
        for r in &cells {
            let _ = writeln!(s, "{}", line(r.iter().map(String::as_str).collect()));
        }
    }
    for note in &report.notes {
        let _ = writeln!(s, "{note}");
    }
    s
}

fn csv(report: &Report, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "# multisearch report schema {REPORT_SCHEMA}")?;
    writeln!(out, "# kind: {}", report.kind)?;
    for (k, v) in &report.config {
        writeln!(out, "# config.{k}: {}", v.render())?;
    }
    for (k, v) in &report.summary {
        writeln!(out, "# summary.{k}: {}", v.render())?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&report.columns)?;
    for r in &report.rows {
        w.write_record(r.iter().map(Value::render))?;
    }
    w.flush()?;
    Ok(())
}

fn json_lines(report: &Report, out: &mut dyn Write) -> Result<()> {
    let object = |pairs: &[(String, Value)]| -> Map<String, Json> {
        pairs.iter().map(|(k, v)| (k.clone(), v.to_json())).collect()
    };
    let header = json!({
        "record": "header",
        "schema": REPORT_SCHEMA,
        "kind": report.kind,
        "config": object(&report.config),
        "summary": object(&report.summary),
        "columns": report.columns,
    });
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for r in &report.rows {
        let mut m = Map::new();
        m.insert("record".into(), Json::from("row"));
        for (c, v) in report.columns.iter().zip(r) {
            m.insert((*c).into(), v.to_json());
        }
        writeln!(out, "{}", serde_json::to_string(&m)?)?;
    }
    for replay in &report.replays {
        let mut m = Map::new();
        m.insert("record".into(), Json::from("replay"));
        if let Json::Object(fields) = replay {
            m.extend(fields.clone());
        }
        writeln!(out, "{}", serde_json::to_string(&m)?)?;
    }
    Ok(())
}
