//! Scenario files: feature space, concepts, model, outputs, labels and
//! estimator defaults in one TOML document.
//!
//! ```toml
//! name = "demo_linear"
//!
//! [[feature]]
//! name = "x1"
//! range = [0.0, 1.0]          # continuous
//!
//! [[feature]]
//! name = "color"
//! levels = ["red", "blue"]    # categorical, coded 0, 1, ...
//!
//! [concepts]
//! both = ["x1", "color"]      # members: all features or all concepts
//!
//! [model]
//! kind = "linear"             # linear | table | builtin | external
//! weights = [[0.5, 0.5]]
//!
//! [[output]]
//! name = "y"
//! absmin = 0.0                # defaults to [0, 1]
//! absmax = 1.0
//!
//! [estimator]                 # all optional
//! strategy = "grid"
//! grid_levels = 21
//!
//! [labels]                    # all optional
//! importance = [[0.5, "minor"], [1.0, "major"]]
//! sentence = "{target}: {utility}"
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::Deserialize;

use crate::concept::{ConceptNode, ConceptTree};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, Strategy};
use crate::model::{load_model, LoadOptions, ModelSpec, Predictor};
use crate::narrative::{check_template, LabelScale, NarrativeStyle};
use crate::space::{Context, FeatureDescriptor, FeatureSpace, OutputSpec, RawValue};

/// Demo scenarios compiled into the library, by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("demo_linear", include_str!("../scenarios/demo_linear.toml")),
    ("demo_mug", include_str!("../scenarios/demo_mug.toml")),
    (
        "demo_deflategate",
        include_str!("../scenarios/demo_deflategate.toml"),
    ),
];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    description: Option<String>,
    #[serde(rename = "feature")]
    features: Vec<RawFeature>,
    #[serde(default)]
    concepts: BTreeMap<String, Vec<String>>,
    model: ModelSpec,
    #[serde(rename = "output")]
    outputs: Vec<RawOutput>,
    #[serde(default)]
    targets: Option<Vec<String>>,
    #[serde(default)]
    estimator: RawEstimator,
    #[serde(default)]
    labels: RawLabels,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeature {
    name: String,
    range: Option<[f64; 2]>,
    levels: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    name: String,
    index: Option<usize>,
    absmin: Option<f64>,
    absmax: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEstimator {
    strategy: Option<String>,
    grid_levels: Option<usize>,
    mc_samples: Option<usize>,
    seed: Option<u64>,
    refinement: Option<u32>,
    probe_cap: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLabels {
    importance: Option<Vec<(f64, String)>>,
    utility: Option<Vec<(f64, String)>>,
    sentence: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub space: FeatureSpace,
    pub tree: ConceptTree,
    pub model: ModelSpec,
    pub outputs: Vec<OutputSpec>,
    /// Targets used when none are requested.
    pub default_targets: Vec<String>,
    pub estimator: EstimatorConfig,
    pub style: NarrativeStyle,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        Self::from_raw(raw)
    }

    /// Loads a bundled demo by name, or else a file from disk.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(text) = bundled(name_or_path) {
            return Self::from_toml_str(text);
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Scenario(format!("cannot read scenario '{}': {e}", path.display()))
        })?;
        let mut scenario = Self::from_toml_str(&text)?;
        if let ModelSpec::External { command, .. } = &mut scenario.model {
            resolve_relative_command(command, path);
        }
        Ok(scenario)
    }

    fn from_raw(raw: RawScenario) -> Result<Self> {
        let features = raw
            .features
            .iter()
            .map(|f| match (&f.range, &f.levels) {
                (Some([lo, hi]), None) => FeatureDescriptor::continuous(&f.name, *lo, *hi),
                (None, Some(levels)) => FeatureDescriptor::categorical(&f.name, levels.clone()),
                _ => Err(Error::Scenario(format!(
                    "feature '{}' needs exactly one of 'range' or 'levels'",
                    f.name
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        let space = FeatureSpace::new(features)?;
        let tree = build_tree(&space, &raw.concepts)?;

        if let ModelSpec::External { command, .. } = &raw.model {
            if command.first().is_none_or(|c| c.trim().is_empty()) {
                return Err(Error::Scenario("external model command is empty".into()));
            }
        }

        if raw.outputs.is_empty() {
            return Err(Error::Scenario("at least one [[output]] is required".into()));
        }
        let mut names = HashSet::new();
        let mut indices = HashSet::new();
        let outputs = raw
            .outputs
            .iter()
            .enumerate()
            .map(|(pos, o)| {
                let index = o.index.unwrap_or(pos);
                if !names.insert(o.name.clone()) {
                    return Err(Error::Scenario(format!("duplicate output name '{}'", o.name)));
                }
                if !indices.insert(index) {
                    return Err(Error::Scenario(format!("duplicate output index {index}")));
                }
                OutputSpec::new(&o.name, index, o.absmin.unwrap_or(0.0), o.absmax.unwrap_or(1.0))
            })
            .collect::<Result<Vec<_>>>()?;
        if let ModelSpec::Linear { weights, .. } = &raw.model {
            check_output_indices(&outputs, weights.len())?;
        }

        let default_targets = match raw.targets {
            Some(targets) => {
                for t in &targets {
                    if space.index_of(t).is_none() && !tree.contains(t) {
                        return Err(Error::UnknownTarget(t.clone()));
                    }
                }
                targets
            }
            None => space.features().iter().map(|f| f.name().to_string()).collect(),
        };

        let defaults = EstimatorConfig::default();
        let e = raw.estimator;
        let estimator = EstimatorConfig {
            strategy: match e.strategy {
                Some(s) => s.parse::<Strategy>()?,
                None => defaults.strategy,
            },
            grid_levels: e.grid_levels.unwrap_or(defaults.grid_levels),
            mc_samples: e.mc_samples.unwrap_or(defaults.mc_samples),
            seed: e.seed.unwrap_or(defaults.seed),
            refinement: e.refinement.unwrap_or(defaults.refinement),
            probe_cap: e.probe_cap.unwrap_or(defaults.probe_cap),
            jobs: 1,
        };
        estimator.validate()?;

        let mut style = NarrativeStyle::default();
        if let Some(bands) = raw.labels.importance {
            style.importance = LabelScale::new(bands)?;
        }
        if let Some(bands) = raw.labels.utility {
            style.utility = LabelScale::new(bands)?;
        }
        if let Some(sentence) = raw.labels.sentence {
            check_template(&sentence)?;
            style.sentence = sentence;
        }

        Ok(Self {
            name: raw.name.unwrap_or_else(|| "scenario".into()),
            description: raw.description,
            space,
            tree,
            model: raw.model,
            outputs,
            default_targets,
            estimator,
            style,
        })
    }

    pub fn output(&self, name: &str) -> Result<&OutputSpec> {
        self.outputs
            .iter()
            .find(|o| o.name() == name)
            .ok_or_else(|| Error::UnknownOutput(name.to_string()))
    }

    /// Builds the model and checks its arities against the scenario.
    pub fn load_model(&self, options: &LoadOptions) -> Result<Box<dyn Predictor>> {
        let model = load_model(&self.model, &self.space, options)?;
        check_output_indices(&self.outputs, model.n_outputs())?;
        Ok(model)
    }

    /// Parses `0.3,0.6`, `x1=0.3,x2=0.6`, or a mix. Positional values fill
    /// features in order; named values override them.
    pub fn parse_context(&self, text: &str) -> Result<Context> {
        parse_context(&self.space, text)
    }
}

pub fn bundled(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

fn check_output_indices(outputs: &[OutputSpec], n_outputs: usize) -> Result<()> {
    for o in outputs {
        if o.index() >= n_outputs {
            return Err(Error::InvalidOutput {
                name: o.name().to_string(),
                reason: format!("index {} but the model has {n_outputs} outputs", o.index()),
            });
        }
    }
    Ok(())
}

/// A command whose program is a relative path with a directory component
/// is resolved against the scenario file's directory.
fn resolve_relative_command(command: &mut [String], scenario: &Path) {
    let Some(dir) = scenario.parent() else { return };
    for part in command.iter_mut() {
        let p = Path::new(part.as_str());
        if p.is_relative() && (part.starts_with("./") || part.starts_with("../")) {
            *part = dir.join(p).to_string_lossy().into_owned();
        }
    }
}

fn build_tree(space: &FeatureSpace, raw: &BTreeMap<String, Vec<String>>) -> Result<ConceptTree> {
    let mut concepts = BTreeMap::new();
    for (name, members) in raw {
        let mut features = BTreeSet::new();
        let mut children = BTreeSet::new();
        for m in members {
            if let Some(i) = space.index_of(m) {
                features.insert(i);
            } else if raw.contains_key(m) {
                children.insert(m.clone());
            } else {
                return Err(Error::InvalidConcept {
                    name: name.clone(),
                    reason: format!("'{m}' is neither a feature nor a concept"),
                });
            }
        }
        let node = match (features.is_empty(), children.is_empty()) {
            (_, true) => ConceptNode::Features(features),
            (true, false) => ConceptNode::Children(children),
            (false, false) => {
                return Err(Error::InvalidConcept {
                    name: name.clone(),
                    reason: "members must be all features or all concepts".into(),
                })
            }
        };
        concepts.insert(name.clone(), node);
    }
    ConceptTree::new(space, concepts)
}

pub fn parse_context(space: &FeatureSpace, text: &str) -> Result<Context> {
    let mut slots: Vec<Option<RawValue>> = vec![None; space.len()];
    let mut named: Vec<(usize, RawValue)> = Vec::new();
    let mut position = 0;
    for part in text.split(',').map(str::trim) {
        if part.is_empty() {
            return Err(Error::InvalidArgument(format!("empty value in context '{text}'")));
        }
        match part.split_once('=') {
            Some((name, value)) => {
                let i = space
                    .index_of(name.trim())
                    .ok_or_else(|| Error::UnknownFeature(name.trim().to_string()))?;
                named.push((i, space.parse_raw(i, value)));
            }
            None => {
                if position >= space.len() {
                    return Err(Error::LengthMismatch {
                        expected: space.len(),
                        actual: position + 1,
                    });
                }
                slots[position] = Some(space.parse_raw(position, part));
                position += 1;
            }
        }
    }
    for (i, value) in named {
        slots[i] = Some(value);
    }
    let provided = slots.iter().filter(|s| s.is_some()).count();
    let raw: Vec<RawValue> = slots.into_iter().flatten().collect();
    if provided != space.len() {
        return Err(Error::LengthMismatch {
            expected: space.len(),
            actual: provided,
        });
    }
    space.validate_context(&raw)
}
