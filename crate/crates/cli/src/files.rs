//! JSON documents: the model spec given to `fit` and the fitted-model file
//! it writes.

use std::collections::BTreeMap;
use std::path::Path;

use mixreg_core::mixture::{ComponentDecl, MixtureSpecDecl};
use mixreg_core::train::History;
use mixreg_core::{Dataset, FittedModel, MixtureModel, MixtureSpec, NetworkDecl, Segment, TrainConfig, VarRanges};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::table::Columns;

pub const FORMAT_VERSION: u32 = 1;

/// Input to `fit`.
///
/// ```json
/// {
///   "response": "yn",
///   "components": [
///     {"family": "normal", "formulas": {"mean": "~1 + x + xsq", "scale": "~1"}},
///     {"family": "normal", "formulas": {"mean": "~1 + x + xsq", "scale": "~1"}}
///   ],
///   "gating": "~1",
///   "train": {"optimizer": {"name": "rmsprop", "lr": 0.01}, "epochs": 1000,
///             "batch_size": 32, "validation_split": 0.1, "patience": 100,
///             "early_stopping": true, "seed": 42}
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpecFile {
    pub response: String,
    pub components: Vec<ComponentDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gating: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub networks: Vec<NetworkDecl>,
    #[serde(default)]
    pub train: TrainConfig,
}

impl ModelSpecFile {
    pub fn load(path: &Path) -> CliResult<ModelSpecFile> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))?;
        let file: ModelSpecFile =
            serde_json::from_str(&text).map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))?;
        file.mixture_spec()?;
        file.train.validate()?;
        Ok(file)
    }

    pub fn mixture_spec(&self) -> CliResult<MixtureSpec> {
        Ok(MixtureSpec::try_from(MixtureSpecDecl::from(self))?)
    }

    /// Splits CSV columns into features and the response.
    pub fn dataset(&self, mut cols: Columns) -> CliResult<Dataset> {
        let y = cols
            .shift_remove(&self.response)
            .ok_or_else(|| CliError::Data(format!("response column `{}` not found", self.response)))?;
        Ok(Dataset::new(cols, y)?)
    }
}

/// Output of `fit`: everything needed to rebuild the model bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FittedModelFile {
    pub version: u32,
    pub response: String,
    pub spec: MixtureSpec,
    pub train: TrainConfig,
    pub theta: Vec<f64>,
    pub index_map: Vec<Segment>,
    pub history: History,
    pub train_ranges: BTreeMap<String, [f64; 2]>,
}

impl FittedModelFile {
    pub fn from_fit(response: &str, fitted: &FittedModel) -> FittedModelFile {
        let model = fitted.model();
        FittedModelFile {
            version: FORMAT_VERSION,
            response: response.to_string(),
            spec: model.spec().clone(),
            train: fitted.train_config().clone(),
            theta: model.theta().to_vec(),
            index_map: model.segments().to_vec(),
            history: fitted.history().clone(),
            train_ranges: model.ranges().iter().map(|(k, &(lo, hi))| (k.clone(), [lo, hi])).collect(),
        }
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> CliResult<FittedModelFile> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))?;
        match value.get("version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(CliError::Version(format!(
                    "{}: model file version {v}, this build reads version {FORMAT_VERSION}",
                    path.display()
                )))
            }
            None => return Err(CliError::Version(format!("{}: missing model file version", path.display()))),
        }
        let file: FittedModelFile =
            serde_json::from_value(value).map_err(|e| CliError::Spec(format!("{}: {e}", path.display())))?;
        Ok(file)
    }

    pub fn ranges(&self) -> VarRanges {
        self.train_ranges.iter().map(|(k, r)| (k.clone(), (r[0], r[1]))).collect()
    }

    /// The stored model evaluated on `cols`. The response column is used
    /// when present; `need_response` makes it mandatory.
    pub fn model_on(&self, mut cols: Columns, need_response: bool) -> CliResult<MixtureModel> {
        let data = match cols.shift_remove(&self.response) {
            Some(y) => Dataset::new(cols, y)?,
            None if need_response => {
                return Err(CliError::Data(format!("response column `{}` not found", self.response)))
            }
            None => Dataset::features_only(cols)?,
        };
        let model = MixtureModel::from_parts(&self.spec, self.ranges(), self.theta.clone(), &data)?;
        if model.segments() != self.index_map.as_slice() {
            return Err(CliError::Spec("index_map does not match the layout implied by spec".into()));
        }
        Ok(model)
    }

    pub fn fitted(&self, cols: Columns) -> CliResult<FittedModel> {
        let model = self.model_on(cols, false)?;
        Ok(FittedModel::new(model, self.history.clone(), self.train.clone()))
    }
}

impl From<&ModelSpecFile> for MixtureSpecDecl {
    fn from(f: &ModelSpecFile) -> Self {
        MixtureSpecDecl { components: f.components.clone(), gating: f.gating.clone(), networks: f.networks.clone() }
    }
}
