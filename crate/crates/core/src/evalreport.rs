//! Train/val/test splitting, log-space metrics, feature importance and the
//! on-disk report (`report.json`, `importance.csv`, `importance.svg`).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fmt::{float17, to_json17};
use crate::models::{GridCell, ModelArtifact};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_RATIOS: [f64; 3] = [0.8, 0.1, 0.1];
pub const DEFAULT_TOP_N: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

impl SplitAssignment {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.val.len(), self.test.len()]
    }
}

/// Shuffles `0..n` with a seeded Fisher–Yates pass and cuts it into
/// train/val/test. Val and test get `round(n·r)` rows; train gets the rest.
pub fn split_dataset(n: usize, ratios: [f64; 3], seed: u64) -> Result<SplitAssignment> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = (n as f64 * ratios[1]).round() as usize;
    let n_test = (n as f64 * ratios[2]).round() as usize;
    let n_train = n.saturating_sub(n_val + n_test);
    if n_train == 0 || n_val == 0 || n_test == 0 || n_train + n_val + n_test != n {
        return Err(Error::Config(format!(
            "split of {n} rows with ratios {ratios:?} leaves an empty part"
        )));
    }
    Ok(SplitAssignment {
        train: idx[..n_train].to_vec(),
        val: idx[n_train..n_train + n_val].to_vec(),
        test: idx[n_train + n_val..].to_vec(),
        seed,
        ratios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub mse: f64,
    pub mae: f64,
    /// `-inf` when the target is constant and the fit is not exact.
    pub r2: f64,
    pub n: usize,
}

impl MetricsReport {
    pub const SPACE: &'static str = "log_price";

    pub fn to_value(&self) -> Value {
        let num = |x: f64| if x.is_finite() { json!(x) } else { json!("undefined") };
        json!({
            "mse": num(self.mse),
            "mae": num(self.mae),
            "r2": num(self.r2),
            "n": self.n,
            "space": Self::SPACE,
        })
    }
}

pub fn metrics(y_true: &[f64], y_pred: &[f64]) -> Result<MetricsReport> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Dimension {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::invalid("metrics need at least one row"));
    }
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let (mut sse, mut sae, mut sst) = (0.0, 0.0, 0.0);
    for (t, p) in y_true.iter().zip(y_pred) {
        let r = t - p;
        sse += r * r;
        sae += r.abs();
        sst += (t - mean) * (t - mean);
    }
    let r2 = if sst > 0.0 {
        1.0 - sse / sst
    } else if sse == 0.0 {
        0.0
    } else {
        f64::NEG_INFINITY
    };
    Ok(MetricsReport {
        mse: sse / n,
        mae: sae / n,
        r2,
        n: y_true.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub rank: usize,
    pub feature: String,
    pub score: f64,
}

/// Normalized importance per column, highest first; equal scores keep
/// column order.
pub fn feature_importance(model: &ModelArtifact, columns: &[String]) -> Result<Vec<ImportanceEntry>> {
    let raw = model.raw_importance();
    if raw.len() != columns.len() {
        return Err(Error::Dimension {
            expected: raw.len(),
            got: columns.len(),
        });
    }
    let total: f64 = raw.iter().sum();
    let scores: Vec<f64> = if total > 0.0 {
        raw.iter().map(|v| v / total).collect()
    } else {
        vec![0.0; raw.len()]
    };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(r, i)| ImportanceEntry {
            rank: r + 1,
            feature: columns[i].clone(),
            score: scores[i],
        })
        .collect())
}

/// Evaluation of one configured model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelResult {
    pub artifact: ModelArtifact,
    /// Hyperparameters actually used (after grid search, if any).
    pub params: Value,
    pub train: MetricsReport,
    pub val: MetricsReport,
    pub test: MetricsReport,
    pub grid: Option<Vec<GridCell>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResults {
    /// Effective configuration, echoed verbatim.
    pub config: Value,
    pub dataset_summary: Value,
    pub split: SplitAssignment,
    pub pipeline_json: String,
    pub columns: Vec<String>,
    pub models: Vec<ModelResult>,
}

pub fn model_file_name(kind: &str) -> String {
    format!("model_{kind}.json")
}

fn report_value(results: &RunResults) -> Value {
    let models: Vec<Value> = results
        .models
        .iter()
        .map(|m| {
            json!({
                "kind": m.artifact.kind().as_str(),
                "params": m.params,
                "train": m.train.to_value(),
                "val": m.val.to_value(),
                "test": m.test.to_value(),
                "warnings": m.warnings,
            })
        })
        .collect();
    let grid: Vec<Value> = results
        .models
        .iter()
        .filter_map(|m| {
            let cells = m.grid.as_ref()?;
            let rows: Vec<Value> = cells
                .iter()
                .map(|c| {
                    json!({
                        "params": c.overrides,
                        "val_mse": c.val_mse.map_or(json!(null), |v| json!(v)),
                        "error": c.error,
                    })
                })
                .collect();
            Some(json!({"kind": m.artifact.kind().as_str(), "cells": rows}))
        })
        .collect();
    json!({
        "schema_version": REPORT_SCHEMA_VERSION,
        "config": results.config,
        "dataset_summary": results.dataset_summary,
        "split": {
            "seed": results.split.seed,
            "ratios": results.split.ratios,
            "sizes": {
                "train": results.split.train.len(),
                "val": results.split.val.len(),
                "test": results.split.test.len(),
            },
        },
        "models": models,
        "grid": grid,
    })
}

pub fn importance_csv(entries: &[ImportanceEntry]) -> String {
    let mut out = String::from("rank,feature,score\n");
    for e in entries {
        let name = if e.feature.contains([',', '"', '\n']) {
            format!("\"{}\"", e.feature.replace('"', "\"\""))
        } else {
            e.feature.clone()
        };
        let _ = writeln!(out, "{},{},{}", e.rank, name, float17(e.score));
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Horizontal bar chart of the first `top_n` entries on a 1000 × 20·top_n
/// canvas.
pub fn importance_svg(entries: &[ImportanceEntry], top_n: usize) -> String {
    let shown = &entries[..top_n.min(entries.len())];
    let height = 20 * shown.len().max(1);
    let max = shown.iter().map(|e| e.score).fold(0.0, f64::max);
    let (label_w, bar_w) = (320.0, 600.0);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"{height}\" viewBox=\"0 0 1000 {height}\">\n\
         <rect width=\"1000\" height=\"{height}\" fill=\"white\"/>\n"
    );
    for (i, e) in shown.iter().enumerate() {
        let y = 20 * i;
        let w = if max > 0.0 { bar_w * e.score / max } else { 0.0 };
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">{}</text>\n\
             <rect x=\"{label_w:.1}\" y=\"{}\" width=\"{w:.3}\" height=\"16\" fill=\"#4c72b0\"/>\n\
             <text x=\"{:.1}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{:.4}</text>",
            label_w - 6.0,
            y + 14,
            xml_escape(&e.feature),
            y + 2,
            label_w + w + 4.0,
            y + 14,
            e.score,
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn write(path: PathBuf, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes the report, importance table and chart (from the first model),
/// the fitted pipeline, and each model artifact into `out_dir`. Returns the
/// paths written.
pub fn emit_report(results: &RunResults, out_dir: &Path, top_n: usize) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    write(out_dir.join("report.json"), &to_json17(&report_value(results)), &mut written)?;
    if let Some(first) = results.models.first() {
        let entries = feature_importance(&first.artifact, &results.columns)?;
        write(out_dir.join("importance.csv"), &importance_csv(&entries), &mut written)?;
        write(out_dir.join("importance.svg"), &importance_svg(&entries, top_n), &mut written)?;
    }
    write(out_dir.join("pipeline.json"), &results.pipeline_json, &mut written)?;
    for m in &results.models {
        let name = model_file_name(m.artifact.kind().as_str());
        write(out_dir.join(name), &m.artifact.to_json()?, &mut written)?;
    }
    Ok(written)
}
