use crate::error::{Error, Result};
use crate::format::g9;

use super::{digest, Predictor};

/// `y = W x + b`, one row of `W` per output.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl LinearModel {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights[0].is_empty() {
            return Err(Error::ModelSpec("linear model needs at least one weight".into()));
        }
        let n_inputs = weights[0].len();
        if weights.iter().any(|row| row.len() != n_inputs) {
            return Err(Error::ModelSpec("weight rows differ in length".into()));
        }
        if bias.len() != weights.len() {
            return Err(Error::ModelSpec(format!(
                "bias has {} entries for {} outputs",
                bias.len(),
                weights.len()
            )));
        }
        if weights.iter().flatten().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::ModelSpec("linear model entries must be finite".into()));
        }
        Ok(Self { weights, bias })
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }
}

impl Predictor for LinearModel {
    fn n_inputs(&self) -> usize {
        self.weights[0].len()
    }

    fn n_outputs(&self) -> usize {
        self.weights.len()
    }

    fn predict_batch(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        Ok(inputs.iter().map(|x| self.eval(x)).collect())
    }

    fn fingerprint(&self) -> String {
        let text: Vec<String> = self
            .weights
            .iter()
            .flatten()
            .chain(&self.bias)
            .map(|v| format!("{v:e}"))
            .collect();
        let shape = format!("{}x{}", self.n_outputs(), self.n_inputs());
        let refs: Vec<&str> = std::iter::once(shape.as_str())
            .chain(text.iter().map(String::as_str))
            .collect();
        format!("linear-{}-{}", shape, digest(&refs))
    }
}

impl std::fmt::Display for LinearModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (row, b) in self.weights.iter().zip(&self.bias) {
            let terms: Vec<String> = row.iter().map(|w| g9(*w)).collect();
            writeln!(f, "[{}] + {}", terms.join(", "), g9(*b))?;
        }
        Ok(())
    }
}
