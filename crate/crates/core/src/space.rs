//! Feature domains, contexts and output declarations.
//!
//! Every model input is an `f64`. Continuous features carry their value
//! directly; categorical features carry the integer code of their level,
//! numbered `0..n` in declaration order.

use std::collections::HashSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureKind {
    Continuous { lower: f64, upper: f64 },
    Categorical { levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDescriptor {
    name: String,
    kind: FeatureKind,
}

impl FeatureDescriptor {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Result<Self> {
        let name = name.into();
        if !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidFeature {
                name,
                reason: "bounds must be finite".into(),
            });
        }
        if lower >= upper {
            return Err(Error::InvalidFeature {
                name,
                reason: format!("lower bound {lower} must be below upper bound {upper}"),
            });
        }
        Ok(Self {
            name,
            kind: FeatureKind::Continuous { lower, upper },
        })
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        levels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let name = name.into();
        let levels: Vec<String> = levels.into_iter().map(Into::into).collect();
        let distinct: HashSet<&str> = levels.iter().map(String::as_str).collect();
        if distinct.len() != levels.len() {
            return Err(Error::InvalidFeature {
                name,
                reason: "levels must be distinct".into(),
            });
        }
        if levels.len() < 2 {
            return Err(Error::InvalidFeature {
                name,
                reason: "a categorical feature needs at least 2 levels".into(),
            });
        }
        Ok(Self {
            name,
            kind: FeatureKind::Categorical { levels },
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &FeatureKind {
        &self.kind
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, FeatureKind::Categorical { .. })
    }

    /// Level names for categorical features, `None` for continuous ones.
    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            FeatureKind::Categorical { levels } => Some(levels),
            FeatureKind::Continuous { .. } => None,
        }
    }

    /// Lowest and highest admissible encoded value.
    pub fn bounds(&self) -> (f64, f64) {
        match &self.kind {
            FeatureKind::Continuous { lower, upper } => (*lower, *upper),
            FeatureKind::Categorical { levels } => (0.0, (levels.len() - 1) as f64),
        }
    }

    /// Checks a single encoded value against this feature's domain.
    fn check(&self, value: f64) -> Result<f64> {
        match &self.kind {
            FeatureKind::Continuous { lower, upper } => {
                if value.is_finite() && value >= *lower && value <= *upper {
                    Ok(value)
                } else {
                    Err(Error::OutOfRange {
                        feature: self.name.clone(),
                        value,
                        lower: *lower,
                        upper: *upper,
                    })
                }
            }
            FeatureKind::Categorical { levels } => {
                if value.fract() == 0.0 && value >= 0.0 && (value as usize) < levels.len() {
                    Ok(value)
                } else {
                    Err(Error::UnknownLevel {
                        feature: self.name.clone(),
                        level: value.to_string(),
                    })
                }
            }
        }
    }

    /// Human-readable rendering of an encoded value.
    pub fn display_value(&self, value: f64) -> String {
        match &self.kind {
            FeatureKind::Continuous { .. } => crate::format::two_decimals(value),
            FeatureKind::Categorical { levels } => levels
                .get(value as usize)
                .cloned()
                .unwrap_or_else(|| value.to_string()),
        }
    }
}

/// A value as supplied by a user, before encoding.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Number(f64),
    Level(String),
}

impl From<f64> for RawValue {
    fn from(v: f64) -> Self {
        RawValue::Number(v)
    }
}

impl From<&str> for RawValue {
    fn from(s: &str) -> Self {
        RawValue::Level(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpace {
    features: Vec<FeatureDescriptor>,
}

impl FeatureSpace {
    pub fn new(features: Vec<FeatureDescriptor>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptySpace);
        }
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::DuplicateFeature(f.name.clone()));
            }
        }
        Ok(Self { features })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureDescriptor] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &FeatureDescriptor {
        &self.features[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Number of levels per feature, or `None` if any feature is continuous.
    pub fn categorical_cardinalities(&self) -> Option<Vec<usize>> {
        self.features
            .iter()
            .map(|f| f.levels().map(<[String]>::len))
            .collect()
    }

    /// Interprets command-line text for feature `index`. Level names win
    /// over numeric codes for categorical features.
    pub fn parse_raw(&self, index: usize, text: &str) -> RawValue {
        let text = text.trim();
        let feature = &self.features[index];
        if let Some(levels) = feature.levels() {
            if levels.iter().any(|l| l == text) {
                return RawValue::Level(text.to_string());
            }
        }
        match text.parse::<f64>() {
            Ok(v) => RawValue::Number(v),
            Err(_) => RawValue::Level(text.to_string()),
        }
    }

    /// Validates and encodes a raw input vector. Reports the first violation.
    pub fn validate_context(&self, raw: &[RawValue]) -> Result<Context> {
        if raw.len() != self.features.len() {
            return Err(Error::LengthMismatch {
                expected: self.features.len(),
                actual: raw.len(),
            });
        }
        let values = self
            .features
            .iter()
            .zip(raw)
            .map(|(feature, value)| self.encode(feature, value))
            .collect::<Result<Vec<_>>>()?;
        Ok(Context { values })
    }

    fn encode(&self, feature: &FeatureDescriptor, value: &RawValue) -> Result<f64> {
        match (value, &feature.kind) {
            (RawValue::Number(v), _) => feature.check(*v),
            (RawValue::Level(level), FeatureKind::Categorical { levels }) => levels
                .iter()
                .position(|l| l == level)
                .map(|code| code as f64)
                .ok_or_else(|| Error::UnknownLevel {
                    feature: feature.name.clone(),
                    level: level.clone(),
                }),
            (RawValue::Level(text), FeatureKind::Continuous { .. }) => {
                Err(Error::InvalidArgument(format!(
                    "feature '{}' is continuous, got non-numeric value '{text}'",
                    feature.name
                )))
            }
        }
    }

    /// Validates an already-encoded vector.
    pub fn context_from_encoded(&self, values: &[f64]) -> Result<Context> {
        let raw: Vec<RawValue> = values.iter().copied().map(RawValue::Number).collect();
        self.validate_context(&raw)
    }
}

/// One concrete, validated input instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    values: Vec<f64>,
}

impl Context {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Declares which model output is explained and its absolute range.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    name: String,
    index: usize,
    absmin: f64,
    absmax: f64,
}

impl OutputSpec {
    pub fn new(name: impl Into<String>, index: usize, absmin: f64, absmax: f64) -> Result<Self> {
        let name = name.into();
        if !absmin.is_finite() || !absmax.is_finite() {
            return Err(Error::InvalidOutput {
                name,
                reason: "absolute bounds must be finite".into(),
            });
        }
        if absmin >= absmax {
            return Err(Error::InvalidOutput {
                name,
                reason: format!("absmin {absmin} must be below absmax {absmax}"),
            });
        }
        Ok(Self {
            name,
            index,
            absmin,
            absmax,
        })
    }

    /// Output with the absolute range [0, 1], as for class probabilities.
    pub fn unit(name: impl Into<String>, index: usize) -> Self {
        Self {
            name: name.into(),
            index,
            absmin: 0.0,
            absmax: 1.0,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn absmin(&self) -> f64 {
        self.absmin
    }

    pub fn absmax(&self) -> f64 {
        self.absmax
    }
}
