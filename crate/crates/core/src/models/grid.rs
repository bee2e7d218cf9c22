use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_model, ModelArtifact, ModelKind, ModelParams};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Parameter name → candidate values, in declaration order.
pub type ParamGrid = IndexMap<String, Vec<serde_json::Value>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    /// The grid values of this cell.
    pub overrides: serde_json::Map<String, serde_json::Value>,
    pub val_mse: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: ModelParams,
    /// The winning cell's model, already trained on `train`.
    pub best_model: ModelArtifact,
    pub best_index: usize,
    pub cells: Vec<GridCell>,
}

/// Cartesian product; the last declared parameter varies fastest.
fn cells(grid: &ParamGrid) -> Vec<serde_json::Map<String, serde_json::Value>> {
    let mut out = vec![serde_json::Map::new()];
    for (name, values) in grid {
        let mut next = Vec::with_capacity(out.len() * values.len());
        for partial in &out {
            for v in values {
                let mut cell = partial.clone();
                cell.insert(name.clone(), v.clone());
                next.push(cell);
            }
        }
        out = next;
    }
    out
}

fn merged(base: &serde_json::Value, cell: &serde_json::Map<String, serde_json::Value>) -> serde_json::Value {
    let mut m = base.as_object().cloned().unwrap_or_default();
    for (k, v) in cell {
        m.insert(k.clone(), v.clone());
    }
    serde_json::Value::Object(m)
}

/// Trains every grid cell on `train`, scores MSE on `val`, and picks the
/// lowest (first declared wins ties). Failing cells are recorded and skipped.
pub fn grid_search(
    kind: ModelKind,
    base: &serde_json::Value,
    grid: &ParamGrid,
    train: (&DenseMatrix, &[f64]),
    val: (&DenseMatrix, &[f64]),
) -> Result<GridResult> {
    let all = cells(grid);
    if grid.is_empty() || all.is_empty() {
        return Err(Error::Config("parameter grid is empty".into()));
    }
    if train.0.cols() != val.0.cols() {
        return Err(Error::Dimension {
            expected: train.0.cols(),
            got: val.0.cols(),
        });
    }
    let mut evaluated: Vec<(GridCell, Option<(ModelParams, ModelArtifact)>)> = all
        .into_par_iter()
        .map(|overrides| {
            let attempt = ModelParams::from_overrides(kind, &merged(base, &overrides)).and_then(|p| {
                let m = fit_model(&p, train.0, train.1)?;
                let pred = m.predict(val.0)?;
                let mse = pred.iter().zip(val.1).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pred.len() as f64;
                if mse.is_finite() {
                    Ok((p, m, mse))
                } else {
                    Err(Error::Training("validation MSE is not finite".into()))
                }
            });
            match attempt {
                Ok((p, m, mse)) => (GridCell { overrides, val_mse: Some(mse), error: None }, Some((p, m))),
                Err(e) => {
                    log::warn!("grid cell {overrides:?} failed: {e}");
                    (GridCell { overrides, val_mse: None, error: Some(e.to_string()) }, None)
                }
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, (cell, _)) in evaluated.iter().enumerate() {
        if let Some(mse) = cell.val_mse {
            if best.is_none_or(|(_, b)| mse < b) {
                best = Some((i, mse));
            }
        }
    }
    let (best_index, _) = best.ok_or_else(|| Error::Training("every grid cell failed".into()))?;
    let (best, best_model) = evaluated[best_index].1.take().expect("successful cell has a model");
    Ok(GridResult {
        best,
        best_model,
        best_index,
        cells: evaluated.into_iter().map(|(c, _)| c).collect(),
    })
}
