//! Black-box predictor contract, built-in models and model loading.

mod builtin;
mod external;
mod linear;
mod table;

use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;
use sha2::{Digest, Sha256};

pub use builtin::{builtin_model, deflategate, mug, BUILTIN_NAMES};
pub use external::{ExternalModel, DEFAULT_TIMEOUT, TIMEOUT_ENV};
pub use linear::LinearModel;
pub use table::TableModel;

use crate::error::{Error, Result};
use crate::space::FeatureSpace;

/// A deterministic model mapping input batches to output batches.
///
/// Batches are the only entry point; estimators issue thousands of probes
/// and remote adapters amortize per-call overhead over a batch.
pub trait Predictor: Send + Sync {
    fn n_inputs(&self) -> usize;

    fn n_outputs(&self) -> usize;

    /// Raw batch evaluation. Callers should go through [`batch_predict`],
    /// which checks shapes and finiteness.
    fn predict_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>>;

    /// Stable identifier of the model's behavior.
    fn fingerprint(&self) -> String;

    /// Whether concurrent batch calls are allowed.
    fn supports_parallel(&self) -> bool {
        true
    }
}

/// Evaluates a batch with full contract checks on both sides.
pub fn batch_predict(model: &dyn Predictor, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    for (position, input) in inputs.iter().enumerate() {
        if input.len() != model.n_inputs() {
            return Err(Error::Dimension {
                position,
                expected: model.n_inputs(),
                actual: input.len(),
            });
        }
    }
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    let outputs = model.predict_batch(inputs)?;
    if outputs.len() != inputs.len() {
        return Err(Error::OutputShape {
            what: "output vectors",
            expected: inputs.len(),
            actual: outputs.len(),
        });
    }
    for (position, row) in outputs.iter().enumerate() {
        if row.len() != model.n_outputs() {
            return Err(Error::OutputShape {
                what: "outputs per vector",
                expected: model.n_outputs(),
                actual: row.len(),
            });
        }
        if let Some(output) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { position, output });
        }
    }
    Ok(outputs)
}

pub(crate) fn digest(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    hasher
        .finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

type PredictFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A model backed by a plain Rust function, evaluated row by row.
#[derive(Clone)]
pub struct FnModel {
    name: String,
    n_inputs: usize,
    n_outputs: usize,
    f: Arc<PredictFn>,
}

impl FnModel {
    pub fn new(
        name: impl Into<String>,
        n_inputs: usize,
        n_outputs: usize,
        f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            n_inputs,
            n_outputs,
            f: Arc::new(f),
        }
    }

    /// Model returning `value` on every output regardless of input.
    pub fn constant(n_inputs: usize, values: Vec<f64>) -> Self {
        let n_outputs = values.len();
        let name = format!(
            "constant({})",
            values.iter().map(|v| crate::format::g9(*v)).collect::<Vec<_>>().join(",")
        );
        Self::new(name, n_inputs, n_outputs, move |_| values.clone())
    }
}

impl std::fmt::Debug for FnModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FnModel")
            .field("name", &self.name)
            .field("n_inputs", &self.n_inputs)
            .field("n_outputs", &self.n_outputs)
            .finish()
    }
}

impl Predictor for FnModel {
    fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn predict_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(inputs.iter().map(|x| (self.f)(x)).collect())
    }

    fn fingerprint(&self) -> String {
        format!("fn:{}", self.name)
    }
}

/// Declarative model description, as found in a scenario file or a
/// standalone model file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Linear {
        weights: Vec<Vec<f64>>,
        #[serde(default)]
        bias: Option<Vec<f64>>,
    },
    Table {
        rows: Vec<TableRow>,
    },
    Builtin {
        name: String,
    },
    External {
        command: Vec<String>,
        #[serde(default)]
        timeout_secs: Option<f64>,
    },
}

/// One row of a table model; inputs are level names in feature order.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableRow {
    pub inputs: Vec<String>,
    pub outputs: Vec<f64>,
}

impl ModelSpec {
    /// Parses a standalone TOML model description.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ModelSpec(e.to_string()))
    }

    pub fn is_external(&self) -> bool {
        matches!(self, ModelSpec::External { .. })
    }
}

/// Options that only matter for some model kinds.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Overrides `timeout_secs` of an external model.
    pub timeout: Option<Duration>,
}

/// Builds a ready predictor and checks its arity against `space`.
///
/// External adapters are launched and handshaken before returning.
pub fn load_model(
    spec: &ModelSpec,
    space: &FeatureSpace,
    options: &LoadOptions,
) -> Result<Box<dyn Predictor>> {
    let model: Box<dyn Predictor> = match spec {
        ModelSpec::Linear { weights, bias } => {
            let bias = bias.clone().unwrap_or_else(|| vec![0.0; weights.len()]);
            Box::new(LinearModel::new(weights.clone(), bias)?)
        }
        ModelSpec::Table { rows } => Box::new(TableModel::from_rows(space, rows)?),
        ModelSpec::Builtin { name } => Box::new(builtin_model(name).ok_or_else(|| {
            Error::ModelSpec(format!(
                "unknown built-in model '{name}' (available: {})",
                BUILTIN_NAMES.join(", ")
            ))
        })?),
        ModelSpec::External {
            command,
            timeout_secs,
        } => {
            let timeout = match (options.timeout, timeout_secs) {
                (Some(t), _) => t,
                (None, Some(secs)) if secs.is_finite() && *secs > 0.0 => {
                    Duration::from_secs_f64(*secs)
                }
                (None, Some(secs)) => {
                    return Err(Error::ModelSpec(format!("invalid timeout_secs {secs}")))
                }
                (None, None) => DEFAULT_TIMEOUT,
            };
            Box::new(ExternalModel::launch(command, timeout)?)
        }
    };
    if model.n_inputs() != space.len() {
        return Err(Error::ArityMismatch {
            model: model.n_inputs(),
            space: space.len(),
        });
    }
    Ok(model)
}
