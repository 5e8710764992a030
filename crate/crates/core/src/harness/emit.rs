//! Output files.
//!
//! Tables are written as headered CSV (or a JSON array of row objects) with
//! rows in a fixed order; summaries are pretty-printed JSON carrying
//! `schema_version`. Floats use Rust's shortest round-trip formatting, so
//! identical inputs give byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::bench::{
    CalibrationHit, DiagnosticsBench, EstimationBench, FailprobRow, NegotiationReport, PredictionBench,
};
use super::config::{
    DiagnosticsBenchConfig, EstimationBenchConfig, FailprobBenchConfig, NegotiationConfig, PredictionBenchConfig,
};
use super::metrics::{mean, std_dev, CcdfPoint};
use super::scenario::{CycleRecord, RunReport};
use super::SCHEMA_VERSION;
use crate::error::{Error, Result};
use crate::estimation::Scheme;
use crate::prediction::ArimaSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) if v.is_nan() => String::new(),
            Cell::Float(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Int(v) => (*v).into(),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(serde_json::Value::Null, Into::into),
            Cell::Text(s) => s.clone().into(),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|&c| c.to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Map<String, serde_json::Value>> = self
            .rows
            .iter()
            .map(|row| self.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect())
            .collect();
        let mut s = serde_json::to_string_pretty(&rows).expect("table rows serialize");
        s.push('\n');
        s
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `dir/{stem}.csv` or `dir/{stem}.json`.
pub fn write_table(dir: &Path, stem: &str, table: &Table, format: Format) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (ext, body) = match format {
        Format::Csv => ("csv", table.to_csv()),
        Format::Json => ("json", table.to_json()),
    };
    let path = dir.join(format!("{stem}.{ext}"));
    write_file(&path, &body)?;
    Ok(path)
}

pub fn write_json(dir: &Path, file_name: &str, value: &impl Serialize) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(file_name);
    let mut body = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    body.push('\n');
    write_file(&path, &body)?;
    Ok(path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Header and raw cells of a CSV file written by [`write_table`].
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let bad = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let mut r = csv::Reader::from_path(path).map_err(bad)?;
    let header = r.headers().map_err(bad)?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<_, _>>()
        .map_err(bad)?;
    Ok((header, rows))
}

/// Reads a `delay_ms,ccdf` file back.
pub fn read_ccdf(path: &Path) -> Result<Vec<CcdfPoint>> {
    let (header, rows) = read_csv(path)?;
    let bad = |reason: String| Error::Parse {
        path: path.to_path_buf(),
        reason,
    };
    if header != ["delay_ms", "ccdf"] {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    rows.iter()
        .map(|r| {
            let x = r[0].parse().map_err(|e| bad(format!("{e}")))?;
            let y = r[1].parse().map_err(|e| bad(format!("{e}")))?;
            Ok(CcdfPoint { delay_ms: x, ccdf: y })
        })
        .collect()
}

fn scheme_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

pub fn ccdf_table(points: &[CcdfPoint]) -> Table {
    let mut t = Table::new(&["delay_ms", "ccdf"]);
    for p in points {
        t.push(vec![p.delay_ms.into(), p.ccdf.into()]);
    }
    t
}

pub fn cycles_table(records: &[CycleRecord]) -> Table {
    let mut t = Table::new(&[
        "trial", "cycle", "active_a", "active_b", "est_a", "est_b", "pred_a", "pred_b", "w_a", "w_b", "condition",
        "hard_outage",
    ]);
    for r in records {
        t.push(vec![
            r.trial.into(),
            r.cycle.into(),
            r.active_a.into(),
            r.active_b.into(),
            r.est_a.into(),
            r.est_b.into(),
            r.pred_a.into(),
            r.pred_b.into(),
            r.w_a.into(),
            r.w_b.into(),
            r.condition.map(|c| scheme_name(&c)).as_deref().into(),
            r.hard_outage.into(),
        ]);
    }
    t
}

/// Files of the integrated run: per-cycle records, one CCDF per event and
/// `summary_{name}.json`.
pub fn emit_run(report: &RunReport, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    let name = &report.summary.name;
    Ok(vec![
        write_table(dir, &format!("cycles_{name}"), &cycles_table(&report.records), format)?,
        write_table(dir, &format!("ccdf_bursty_{name}"), &ccdf_table(&report.ccdf_a), format)?,
        write_table(dir, &format!("ccdf_uniform_{name}"), &ccdf_table(&report.ccdf_b), format)?,
        write_json(dir, &format!("summary_{name}.json"), &report.summary)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationSummary {
    pub schema_version: u32,
    pub config: EstimationBenchConfig,
    /// MAE over every `N` and trial, by scheme name.
    pub pooled_mae: BTreeMap<String, f64>,
}

pub fn emit_estimation(bench: &EstimationBench, cfg: &EstimationBenchConfig, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    let mut t = Table::new(&["n", "scheme", "trials", "mean", "bias", "mae", "mae_se", "failures"]);
    for r in &bench.rows {
        t.push(vec![
            r.n.into(),
            r.scheme.name().into(),
            r.trials.into(),
            r.mean.into(),
            r.bias.into(),
            r.mae.into(),
            r.mae_se.into(),
            r.failures.into(),
        ]);
    }
    let pooled_mae = cfg
        .schemes
        .iter()
        .map(|&s: &Scheme| {
            let e: Vec<f64> = bench.pooled_errors(s).into_iter().filter(|x| x.is_finite()).collect();
            (s.name().to_owned(), mean(&e))
        })
        .collect();
    let summary = EstimationSummary {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        pooled_mae,
    };
    Ok(vec![
        write_table(dir, "estimation", &t, format)?,
        write_json(dir, "estimation_summary.json", &summary)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailprobSummary {
    pub schema_version: u32,
    pub config: FailprobBenchConfig,
    pub max_abs_error: f64,
}

pub fn emit_failprob(rows: &[FailprobRow], cfg: &FailprobBenchConfig, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    let mut t = Table::new(&["variant", "k", "w", "analytic", "empirical", "abs_error"]);
    for r in rows {
        t.push(vec![
            scheme_name(&r.variant).as_str().into(),
            r.k.into(),
            r.w.into(),
            r.analytic.into(),
            r.empirical.into(),
            r.abs_error.into(),
        ]);
    }
    let summary = FailprobSummary {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        max_abs_error: rows.iter().map(|r| r.abs_error).fold(0.0, f64::max),
    };
    Ok(vec![
        write_table(dir, "failprob", &t, format)?,
        write_json(dir, "failprob_summary.json", &summary)?,
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub schema_version: u32,
    pub config: PredictionBenchConfig,
    pub arima: ArimaSpec,
    pub arima_error_mean: f64,
    pub arima_error_sd: f64,
    pub masw_error_mean: f64,
    pub masw_error_sd: f64,
    pub diagnostics: Option<DiagnosticsSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub config: DiagnosticsBenchConfig,
    /// How often each `(p, q)` had the lowest AIC, keyed `"p,q"`.
    pub aic_best_counts: BTreeMap<String, usize>,
    pub selected_counts: BTreeMap<String, usize>,
}

fn count_pairs(pairs: &[(usize, usize)]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for (p, q) in pairs {
        *m.entry(format!("{p},{q}")).or_insert(0) += 1;
    }
    m
}

pub fn emit_prediction(
    bench: &PredictionBench,
    cfg: &PredictionBenchConfig,
    diagnostics: Option<(&DiagnosticsBench, &DiagnosticsBenchConfig)>,
    dir: &Path,
    format: Format,
) -> Result<Vec<PathBuf>> {
    let mut reps = Table::new(&["replication", "arima_error", "masw_error"]);
    for (i, (a, m)) in bench.arima_errors.iter().zip(&bench.masw_errors).enumerate() {
        reps.push(vec![i.into(), (*a).into(), (*m).into()]);
    }
    let mut trace = Table::new(&["cycle", "truth", "estimate", "arima", "masw"]);
    for p in &bench.trace {
        trace.push(vec![p.cycle.into(), p.truth.into(), p.estimate.into(), p.arima.into(), p.masw.into()]);
    }
    let mut files = vec![
        write_table(dir, "prediction_replications", &reps, format)?,
        write_table(dir, "prediction_trace", &trace, format)?,
    ];
    let diagnostics = match diagnostics {
        Some((d, dcfg)) => {
            let mut grid = Table::new(&["regeneration", "p", "q", "aic", "dw"]);
            for r in &d.grid {
                grid.push(vec![r.regeneration.into(), r.p.into(), r.q.into(), r.aic.into(), r.dw.into()]);
            }
            files.push(write_table(dir, "model_selection", &grid, format)?);
            Some(DiagnosticsSummary {
                config: *dcfg,
                aic_best_counts: count_pairs(&d.aic_best),
                selected_counts: count_pairs(&d.selected),
            })
        }
        None => None,
    };
    let summary = PredictionSummary {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        arima: bench.arima.clone(),
        arima_error_mean: mean(&bench.arima_errors),
        arima_error_sd: std_dev(&bench.arima_errors),
        masw_error_mean: mean(&bench.masw_errors),
        masw_error_sd: std_dev(&bench.masw_errors),
        diagnostics,
    };
    files.push(write_json(dir, "prediction_summary.json", &summary)?);
    Ok(files)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegotiationSummary {
    pub schema_version: u32,
    pub config: NegotiationConfig,
    pub delta: Option<f64>,
    pub strict_delta: Option<f64>,
    pub calibration_hits: usize,
}

pub fn emit_negotiation(
    report: &NegotiationReport,
    hits: &[CalibrationHit],
    cfg: &NegotiationConfig,
    dir: &Path,
    format: Format,
) -> Result<Vec<PathBuf>> {
    let mut curve = Table::new(&["delta", "fail_A", "fail_B"]);
    for p in &report.curve {
        curve.push(vec![p.delta.into(), p.fail_a.into(), p.fail_b.into()]);
    }
    let mut scan = Table::new(&["w_a", "w_b", "pred_a", "pred_b", "delta"]);
    for h in hits {
        scan.push(vec![h.w_a.into(), h.w_b.into(), h.pred_a.into(), h.pred_b.into(), h.delta.into()]);
    }
    let summary = NegotiationSummary {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        delta: report.delta,
        strict_delta: report.strict_delta,
        calibration_hits: hits.len(),
    };
    Ok(vec![
        write_table(dir, "negotiation", &curve, format)?,
        write_table(dir, "negotiation_calibration", &scan, format)?,
        write_json(dir, "negotiation_summary.json", &summary)?,
    ])
}
