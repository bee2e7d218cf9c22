//! Regressors over a [`DenseMatrix`]: closed-form ridge, boosted trees and
//! an MLP, with a shared artifact format and grid search.

pub mod gbdt;
pub mod grid;
pub mod mlp;
pub mod ridge;

use serde::{Deserialize, Serialize};

pub use gbdt::{find_best_split, gbdt_fit, gbdt_predict, GbdtModel, GbdtParams, Growth, Split, TreeNode};
pub use grid::{grid_search, GridCell, GridResult, ParamGrid};
pub use mlp::{mlp_fit, mlp_predict, MlpModel, MlpParams};
pub use ridge::{ridge_fit, ridge_predict, RidgeModel, RidgeParams};

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ridge,
    Gbdt,
    Mlp,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ridge => "ridge",
            ModelKind::Gbdt => "gbdt",
            ModelKind::Mlp => "mlp",
        }
    }
}

/// Hyperparameters for one model kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "params")]
pub enum ModelParams {
    Ridge(RidgeParams),
    Gbdt(GbdtParams),
    Mlp(MlpParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Ridge(_) => ModelKind::Ridge,
            ModelParams::Gbdt(_) => ModelKind::Gbdt,
            ModelParams::Mlp(_) => ModelKind::Mlp,
        }
    }

    /// Defaults for `kind` overridden by the fields in `overrides` (a JSON
    /// object). Unknown field names are an error.
    pub fn from_overrides(kind: ModelKind, overrides: &serde_json::Value) -> Result<Self> {
        let mut base = match kind {
            ModelKind::Ridge => serde_json::to_value(RidgeParams::default())?,
            ModelKind::Gbdt => serde_json::to_value(GbdtParams::default())?,
            ModelKind::Mlp => serde_json::to_value(MlpParams::default())?,
        };
        match overrides {
            serde_json::Value::Null => {}
            serde_json::Value::Object(o) => {
                let target = base.as_object_mut().expect("params serialize as objects");
                for (k, v) in o {
                    target.insert(k.clone(), v.clone());
                }
            }
            other => return Err(Error::Config(format!("model params must be an object, got {other}"))),
        }
        let parsed = match kind {
            ModelKind::Ridge => serde_json::from_value(base).map(ModelParams::Ridge),
            ModelKind::Gbdt => serde_json::from_value(base).map(ModelParams::Gbdt),
            ModelKind::Mlp => serde_json::from_value(base).map(ModelParams::Mlp),
        };
        parsed.map_err(|e| Error::Config(format!("{} params: {e}", kind.as_str())))
    }

    pub fn params_json(&self) -> serde_json::Value {
        let v = match self {
            ModelParams::Ridge(p) => serde_json::to_value(p),
            ModelParams::Gbdt(p) => serde_json::to_value(p),
            ModelParams::Mlp(p) => serde_json::to_value(p),
        };
        v.expect("params serialize")
    }
}

/// A trained regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "model")]
pub enum ModelArtifact {
    Ridge(RidgeModel),
    Gbdt(GbdtModel),
    Mlp(MlpModel),
}

impl ModelArtifact {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelArtifact::Ridge(_) => ModelKind::Ridge,
            ModelArtifact::Gbdt(_) => ModelKind::Gbdt,
            ModelArtifact::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn predict(&self, x: &DenseMatrix) -> Result<Vec<f64>> {
        match self {
            ModelArtifact::Ridge(m) => ridge_predict(m, x),
            ModelArtifact::Gbdt(m) => gbdt_predict(m, x),
            ModelArtifact::Mlp(m) => mlp_predict(m, x),
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            ModelArtifact::Ridge(m) => m.coefficients.len(),
            ModelArtifact::Gbdt(m) => m.n_features(),
            ModelArtifact::Mlp(m) => m.n_inputs(),
        }
    }

    /// Unnormalized per-feature importance: accumulated split gain,
    /// |coefficient|, or summed |first-layer weight|.
    pub fn raw_importance(&self) -> Vec<f64> {
        match self {
            ModelArtifact::Ridge(m) => m.coefficients.iter().map(|c| c.abs()).collect(),
            ModelArtifact::Gbdt(m) => m.feature_gain.clone(),
            ModelArtifact::Mlp(m) => {
                let l = &m.layers[0];
                (0..l.n_in)
                    .map(|i| (0..l.n_out).map(|o| l.weights[o * l.n_in + i].abs()).sum())
                    .collect()
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFileRef {
            schema_version: MODEL_SCHEMA_VERSION,
            artifact: self,
        };
        Ok(serde_json::to_string(&file)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let found = v
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::invalid("model file has no schema_version"))?;
        if found != MODEL_SCHEMA_VERSION as u64 {
            return Err(Error::Schema {
                expected: MODEL_SCHEMA_VERSION,
                found: found as u32,
            });
        }
        let file: ModelFile = serde_json::from_value(v)?;
        Ok(file.artifact)
    }
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    schema_version: u32,
    artifact: &'a ModelArtifact,
}

#[derive(Deserialize)]
struct ModelFile {
    #[allow(dead_code)]
    schema_version: u32,
    artifact: ModelArtifact,
}

pub fn fit_model(params: &ModelParams, x: &DenseMatrix, y: &[f64]) -> Result<ModelArtifact> {
    Ok(match params {
        ModelParams::Ridge(p) => ModelArtifact::Ridge(ridge_fit(x, y, p.lambda)?),
        ModelParams::Gbdt(p) => ModelArtifact::Gbdt(gbdt_fit(x, y, p)?),
        ModelParams::Mlp(p) => ModelArtifact::Mlp(mlp::mlp_fit_params(x, y, p)?),
    })
}
