//! On-disk artifacts: `fit.json`, `summary.csv`, `draws.csv` and
//! `expected_values.csv`.

use std::fs;
use std::io;
use std::path::Path;

use dirreg_core::hmc::PosteriorDraws;
use dirreg_core::posterior::SummaryRow;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::ingest::IngestReport;

pub const FORMAT_VERSION: u32 = 1;
pub const FIT_JSON: &str = "fit.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const DRAWS_CSV: &str = "draws.csv";
pub const EXPECTED_VALUES_CSV: &str = "expected_values.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    DiagnosticsFailed,
    Error,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::DiagnosticsFailed => 2,
            Status::Error => 1,
        }
    }
}

/// A distinct row of the mean design matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSetting {
    pub label: String,
    pub x: Vec<f64>,
    /// Observations sharing this design row.
    pub n_obs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub ingest: IngestReport,
    pub components: Vec<String>,
    pub reference: String,
    /// 1-based.
    pub reference_index: usize,
    pub mean_columns: Vec<String>,
    pub precision_columns: Vec<String>,
    /// Free parameters in packing order; the columns of `draws.csv`.
    pub parameter_names: Vec<String>,
    pub settings: Vec<CovariateSetting>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlCoefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlReport {
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub gradient_max_norm: f64,
    pub hessian_condition: Option<f64>,
    pub hessian_asymmetry: f64,
    pub diagnostic: Option<String>,
    /// Full layout, reference rows included.
    pub coefficients: Vec<MlCoefficient>,
    /// Free vector in packing order.
    pub free: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDiagnostics {
    pub name: String,
    pub rhat: Option<f64>,
    pub ess_bulk: Option<f64>,
    pub zero_variance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesReport {
    pub chains: usize,
    pub draws_per_chain: usize,
    pub coefficients: Vec<SummaryRow>,
    pub diagnostics: Vec<ParameterDiagnostics>,
    pub max_rhat: Option<f64>,
    pub divergences: usize,
    pub divergence_count: Vec<usize>,
    pub treedepth_saturation_count: Vec<usize>,
    pub step_sizes: Vec<f64>,
    pub mass_diag: Vec<Vec<f64>>,
    pub mean_accept: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub version: u32,
    pub status: Status,
    pub config: RunConfig,
    pub seed: u64,
    pub data: Option<DataSummary>,
    pub ml: Option<MlReport>,
    pub bayes: Option<BayesReport>,
    pub error: Option<ErrorReport>,
}

/// One line of `expected_values.csv`; ML rows carry no interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedValueRow {
    pub setting: String,
    pub method: &'static str,
    pub component: String,
    pub estimate: f64,
    pub interval: Option<(f64, f64)>,
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryLine {
    pub panel: &'static str,
    pub parameter: String,
    pub lower: Option<f64>,
    pub estimate: f64,
    pub upper: Option<f64>,
}

pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

fn finish<W: io::Write>(mut w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_fit_json(dir: &Path, report: &FitReport) -> Result<()> {
    let path = dir.join(FIT_JSON);
    let mut text = serde_json::to_string_pretty(report).map_err(|e| CliError::io(&path, e))?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

pub fn read_fit_json(dir: &Path) -> Result<FitReport> {
    let path = dir.join(FIT_JSON);
    let text = fs::read_to_string(&path).map_err(|_| CliError::MissingArtifacts(path.display().to_string()))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(&path, e))
}

/// `panel,parameter,lower,estimate,upper`; `path` only labels errors.
pub fn write_summary<W: io::Write>(out: W, lines: &[SummaryLine], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["panel", "parameter", "lower", "estimate", "upper"])
        .map_err(|e| CliError::io(path, e))?;
    for l in lines {
        w.write_record([
            l.panel,
            l.parameter.as_str(),
            &opt(l.lower),
            &num(l.estimate),
            &opt(l.upper),
        ])
        .map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}

pub fn write_summary_csv(dir: &Path, lines: &[SummaryLine]) -> Result<()> {
    let path = dir.join(SUMMARY_CSV);
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    write_summary(file, lines, &path)
}

/// `setting,method,component,lower,estimate,upper`.
pub fn write_expected_values<W: io::Write>(out: W, rows: &[ExpectedValueRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header = ["setting", "method", "component", "lower", "estimate", "upper"];
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for r in rows {
        let (lo, hi) = match r.interval {
            Some((lo, hi)) => (num(lo), num(hi)),
            None => (String::new(), String::new()),
        };
        w.write_record([
            r.setting.as_str(),
            r.method,
            r.component.as_str(),
            &lo,
            &num(r.estimate),
            &hi,
        ])
        .map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}

pub fn write_expected_values_csv(dir: &Path, rows: &[ExpectedValueRow]) -> Result<()> {
    let path = dir.join(EXPECTED_VALUES_CSV);
    let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
    write_expected_values(file, rows, &path)
}

/// `chain,draw,<parameters…>` with chains and draws numbered from 1.
pub fn write_draws_csv(dir: &Path, draws: &PosteriorDraws, names: &[String]) -> Result<()> {
    let path = dir.join(DRAWS_CSV);
    let mut w = csv_writer(&path)?;
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(|e| CliError::io(&path, e))?;
    let mut within = vec![0usize; draws.n_chains()];
    for s in 0..draws.n_draws() {
        let chain = draws.chain_ids[s];
        within[chain] += 1;
        let mut record = vec![(chain + 1).to_string(), within[chain].to_string()];
        record.extend(draws.draws.row(s).iter().map(|&v| num(v)));
        w.write_record(&record).map_err(|e| CliError::io(&path, e))?;
    }
    finish(w, &path)
}

/// Parse `draws.csv` back into the stacked draw matrix and 0-based chain ids.
pub fn read_draws_csv(dir: &Path) -> Result<(Vec<String>, DMatrix<f64>, Vec<usize>)> {
    let path = dir.join(DRAWS_CSV);
    if !path.exists() {
        return Err(CliError::MissingArtifacts(path.display().to_string()));
    }
    let mut reader = csv::Reader::from_path(&path).map_err(|e| CliError::io(&path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::io(&path, e))?
        .iter()
        .skip(2)
        .map(str::to_string)
        .collect();
    let mut chain_ids = Vec::new();
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| CliError::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |j: usize| -> Result<&str> {
            record.get(j).ok_or_else(|| CliError::Parse {
                line,
                message: "short record".into(),
            })
        };
        let chain: usize = field(0)?.parse().map_err(|_| CliError::Parse {
            line,
            message: "bad chain id".into(),
        })?;
        chain_ids.push(chain.saturating_sub(1));
        for j in 0..header.len() {
            values.push(field(j + 2)?.parse::<f64>().map_err(|_| CliError::Parse {
                line,
                message: format!("column {}: not a number", j + 3),
            })?);
        }
    }
    let matrix = DMatrix::from_row_slice(chain_ids.len(), header.len(), &values);
    Ok((header, matrix, chain_ids))
}
