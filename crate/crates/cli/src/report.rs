//! Machine-readable reports and their JSON, CSV and text renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, MethodKind};
use crate::error::{CliError, CliResult};

/// One tail estimate at one `x`, compared with the normal tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub population: String,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub statistic: String,
    pub method: MethodKind,
    pub x: f64,
    pub p_hat: f64,
    pub stderr: f64,
    /// Replications; 0 for exact methods.
    pub reps: u64,
    /// Samples on which the statistic was undefined.
    pub undefined: u64,
    pub wilson_lower: f64,
    pub wilson_upper: f64,
    pub normal_tail: f64,
    /// `p_hat / normal_tail`.
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub envelope_lower: Option<f64>,
    pub envelope_upper: Option<f64>,
    pub saddlepoint: Option<f64>,
    /// `p_hat / saddlepoint`.
    pub sp_ratio: Option<f64>,
    pub sp_ratio_stderr: Option<f64>,
    /// Smallest envelope constant containing `ratio`.
    pub implied_a: Option<f64>,
    /// Smallest constant of the relative band `|ratio - 1| <= C (1 + x)^3 beta3 / omega`.
    pub implied_band: Option<f64>,
    pub in_range: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsRow {
    pub population: String,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: Option<usize>,
    pub mu: f64,
    pub sigma2: f64,
    pub beta3: f64,
    pub max_dev: f64,
    pub omega: Option<f64>,
    /// Constant the ranges below were computed with.
    pub range_a: f64,
    pub sum_range: Option<f64>,
    pub cramer_range: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    pub population: String,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub n: usize,
    pub x: f64,
    #[serde(rename = "A")]
    pub a_const: f64,
    pub normal_tail: f64,
    pub lower: f64,
    pub upper: f64,
    /// `normal_tail * lower` and `normal_tail * upper`.
    pub tail_lower: f64,
    pub tail_upper: f64,
    pub exponent: f64,
    pub be_bound: f64,
    pub in_range: bool,
    pub cramer_in_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    /// Smallest slack observed, relative to the bound where that makes sense;
    /// negative when violated.
    pub margin: f64,
    pub checked: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub moments: Vec<MomentsRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rows: Vec<ReportRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub envelopes: Vec<EnvelopeRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub properties: Vec<PropertyResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            other => Err(CliError::Config(format!("unknown format `{other}` (json, csv, text)"))),
        }
    }
}

impl Report {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            config: config.clone(),
            moments: Vec::new(),
            rows: Vec::new(),
            envelopes: Vec::new(),
            properties: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn failed_properties(&self) -> Vec<&PropertyResult> {
        self.properties.iter().filter(|p| !p.passed).collect()
    }

    pub fn render(&self, format: Format) -> CliResult<String> {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
            Format::Text => self.to_text(),
        }
    }

    pub fn to_json(&self) -> CliResult<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Numerical(format!("cannot serialize report: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad report: {e}")))
    }

    /// Every nonempty section as its own CSV table, separated by a blank line.
    pub fn to_csv(&self) -> CliResult<String> {
        let tables = self.csv_tables()?;
        Ok(tables.join("\n"))
    }

    fn csv_tables(&self) -> CliResult<Vec<String>> {
        let mut out = Vec::new();
        if !self.moments.is_empty() {
            out.push(csv_table(&self.moments)?);
        }
        if !self.rows.is_empty() {
            out.push(csv_table(&self.rows)?);
        }
        if !self.envelopes.is_empty() {
            out.push(csv_table(&self.envelopes)?);
        }
        if !self.properties.is_empty() {
            out.push(csv_table(&self.properties)?);
        }
        Ok(out)
    }

    /// Aligned columns built from the CSV tables, floats shown to 6 significant digits.
    pub fn to_text(&self) -> CliResult<String> {
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.command);
        for table in self.csv_tables()? {
            out.push('\n');
            out.push_str(&align(&table)?);
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for note in &self.notes {
                let _ = writeln!(out, "note: {note}");
            }
        }
        Ok(out)
    }
}

fn csv_table<T: Serialize>(rows: &[T]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Numerical(format!("csv: {e}")))
}

fn short(cell: &str) -> String {
    let looks_float = cell.contains('.') || cell.contains('e') || cell.contains('E');
    match cell.parse::<f64>() {
        Ok(v) if looks_float && v.is_finite() => {
            let s = format!("{v:.5e}");
            let (mant, exp) = s.split_once('e').expect("exponent form");
            let exp: i32 = exp.parse().expect("integer exponent");
            if (-4..6).contains(&exp) {
                let decimals = (5 - exp).max(0) as usize;
                format!("{v:.decimals$}")
            } else {
                format!("{mant}e{exp}")
            }
        }
        _ => cell.to_string(),
    }
}

fn align(table: &str) -> CliResult<String> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(table.as_bytes());
    let mut cells: Vec<Vec<String>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::Numerical(format!("csv: {e}")))?;
        cells.push(rec.iter().map(short).collect());
    }
    let cols = cells.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| cells.iter().filter_map(|row| row.get(c)).map(|s| s.len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &cells {
        let line: Vec<String> = row.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    Ok(out)
}
