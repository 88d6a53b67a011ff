//! Contextual extrema estimation.
//!
//! For an output `j` and a varied feature set, the features in the set
//! range over their declared domains while every other feature is clamped
//! to the context. The minimum and maximum of output `j` over the probes
//! estimate the contextual extrema `Cmin` and `Cmax`.
//!
//! The context itself is always evaluated as a probe, so the context's own
//! output lies inside `[cmin, cmax]` no matter how coarse the search is.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::format::g9;
use crate::model::{batch_predict, Predictor};
use crate::space::{Context, FeatureKind, FeatureSpace};

pub const DEFAULT_GRID_LEVELS: usize = 21;
pub const DEFAULT_MC_SAMPLES: usize = 1000;
pub const DEFAULT_PROBE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strategy {
    #[default]
    Grid,
    MonteCarlo,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Grid => "grid",
            Strategy::MonteCarlo => "montecarlo",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Strategy::Grid),
            "mc" | "montecarlo" => Ok(Strategy::MonteCarlo),
            other => Err(Error::InvalidConfig(format!(
                "unknown strategy '{other}' (expected grid or mc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimatorConfig {
    pub strategy: Strategy,
    /// Probes per continuous feature, endpoints included.
    pub grid_levels: usize,
    pub mc_samples: usize,
    pub seed: u64,
    /// Number of grid refinement rounds after the initial grid.
    pub refinement: u32,
    /// Largest grid accepted, in probes.
    pub probe_cap: u64,
    /// Worker threads for built-in models. Results do not depend on it.
    pub jobs: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Grid,
            grid_levels: DEFAULT_GRID_LEVELS,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed: 0,
            refinement: 0,
            probe_cap: DEFAULT_PROBE_CAP,
            jobs: 1,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_levels < 2 {
            return Err(Error::InvalidConfig("grid_levels must be at least 2".into()));
        }
        if self.mc_samples < 1 {
            return Err(Error::InvalidConfig("mc_samples must be at least 1".into()));
        }
        if self.jobs < 1 {
            return Err(Error::InvalidConfig("jobs must be at least 1".into()));
        }
        if self.refinement > 0 && self.strategy != Strategy::Grid {
            return Err(Error::InvalidConfig("refinement requires the grid strategy".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremaEstimate {
    pub cmin: f64,
    pub cmax: f64,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    pub probes_used: usize,
}

fn normalize_set(space: &FeatureSpace, feature_set: &[usize]) -> Result<Vec<usize>> {
    if feature_set.is_empty() {
        return Err(Error::InvalidArgument("feature set is empty".into()));
    }
    if let Some(bad) = feature_set.iter().find(|&&i| i >= space.len()) {
        return Err(Error::InvalidArgument(format!(
            "feature index {bad} out of range for {} features",
            space.len()
        )));
    }
    let mut set = feature_set.to_vec();
    set.sort_unstable();
    set.dedup();
    Ok(set)
}

/// Endpoint-inclusive, equally spaced values; all levels for categoricals.
fn axis_values(space: &FeatureSpace, index: usize, levels: usize) -> Vec<f64> {
    match space.feature(index).kind() {
        FeatureKind::Continuous { lower, upper } => (0..levels)
            .map(|k| {
                if k + 1 == levels {
                    *upper
                } else {
                    lower + (upper - lower) * (k as f64 / (levels - 1) as f64)
                }
            })
            .collect(),
        FeatureKind::Categorical { levels } => (0..levels.len()).map(|c| c as f64).collect(),
    }
}

fn check_cap(axes: &[Vec<f64>], cap: u64) -> Result<()> {
    let count = axes
        .iter()
        .try_fold(1u128, |acc, axis| acc.checked_mul(axis.len() as u128))
        .unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(Error::ProbeCap { count, cap });
    }
    Ok(())
}

/// Visits the Cartesian product of `axes` in odometer order, the last axis
/// turning fastest.
fn for_each_grid_point(axes: &[Vec<f64>], mut visit: impl FnMut(&[usize])) {
    let mut digits = vec![0usize; axes.len()];
    loop {
        visit(&digits);
        let mut pos = digits.len();
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < axes[pos].len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

/// Builds the probe list for one varied feature set.
///
/// Probes equal the context outside `feature_set`. The grid strategy takes
/// the full product of per-feature values in odometer order over the set
/// sorted ascending; the Monte Carlo strategy draws uniformly from the
/// seeded generator. The context is always the final probe.
pub fn generate_probes(
    space: &FeatureSpace,
    context: &Context,
    feature_set: &[usize],
    config: &EstimatorConfig,
) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let set = normalize_set(space, feature_set)?;
    let base = context.values();
    let mut probes = match config.strategy {
        Strategy::Grid => {
            let axes: Vec<Vec<f64>> = set
                .iter()
                .map(|&i| axis_values(space, i, config.grid_levels))
                .collect();
            check_cap(&axes, config.probe_cap)?;
            let mut probes = Vec::new();
            for_each_grid_point(&axes, |digits| {
                let mut probe = base.to_vec();
                for ((&feature, axis), &d) in set.iter().zip(&axes).zip(digits) {
                    probe[feature] = axis[d];
                }
                probes.push(probe);
            });
            probes
        }
        Strategy::MonteCarlo => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            (0..config.mc_samples)
                .map(|_| {
                    let mut probe = base.to_vec();
                    for &feature in &set {
                        probe[feature] = match space.feature(feature).kind() {
                            FeatureKind::Continuous { lower, upper } => {
                                rng.gen_range(*lower..=*upper)
                            }
                            FeatureKind::Categorical { levels } => {
                                rng.gen_range(0..levels.len()) as f64
                            }
                        };
                    }
                    probe
                })
                .collect()
        }
    };
    probes.push(base.to_vec());
    Ok(probes)
}

/// Min and max of output `output_index` over already-evaluated probes.
/// Ties go to the earliest probe.
pub fn extrema_from_outputs(
    probes: &[Vec<f64>],
    outputs: &[Vec<f64>],
    output_index: usize,
) -> ExtremaEstimate {
    assert!(!probes.is_empty() && probes.len() == outputs.len());
    let mut lo = 0;
    let mut hi = 0;
    for (k, row) in outputs.iter().enumerate().skip(1) {
        if row[output_index] < outputs[lo][output_index] {
            lo = k;
        }
        if row[output_index] > outputs[hi][output_index] {
            hi = k;
        }
    }
    ExtremaEstimate {
        cmin: outputs[lo][output_index],
        cmax: outputs[hi][output_index],
        argmin: probes[lo].clone(),
        argmax: probes[hi].clone(),
        probes_used: probes.len(),
    }
}

fn check_output(model: &dyn Predictor, output_index: usize) -> Result<()> {
    if output_index >= model.n_outputs() {
        return Err(Error::InvalidArgument(format!(
            "output index {output_index} out of range for a model with {} outputs",
            model.n_outputs()
        )));
    }
    Ok(())
}

/// Evaluates `probes` and returns the extrema of one output.
pub fn estimate_extrema(
    model: &dyn Predictor,
    probes: &[Vec<f64>],
    output_index: usize,
) -> Result<ExtremaEstimate> {
    if probes.is_empty() {
        return Err(Error::InvalidArgument("no probes to evaluate".into()));
    }
    check_output(model, output_index)?;
    let outputs = batch_predict(model, probes)?;
    Ok(extrema_from_outputs(probes, &outputs, output_index))
}

const CHUNK: usize = 4096;

/// Predicts in chunks across `jobs` workers when the model allows it.
/// Output order always matches probe order.
fn predict(model: &dyn Predictor, probes: &[Vec<f64>], jobs: usize) -> Result<Vec<Vec<f64>>> {
    if jobs <= 1 || !model.supports_parallel() || probes.len() <= CHUNK {
        return batch_predict(model, probes);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {jobs} workers: {e}")))?;
    let chunks: Vec<Result<Vec<Vec<f64>>>> = pool.install(|| {
        probes
            .par_chunks(CHUNK)
            .map(|chunk| batch_predict(model, chunk))
            .collect()
    });
    let mut outputs = Vec::with_capacity(probes.len());
    for chunk in chunks {
        outputs.extend(chunk?);
    }
    Ok(outputs)
}

/// Every probe evaluated for one feature set, with all model outputs.
///
/// Holding all outputs lets several model outputs be judged on the same
/// evidence.
#[derive(Debug, Clone)]
pub struct ProbeEvaluation {
    probes: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    /// Cumulative probe count at the end of each round.
    round_ends: Vec<usize>,
}

impl ProbeEvaluation {
    pub fn probes(&self) -> &[Vec<f64>] {
        &self.probes
    }

    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.outputs
    }

    pub fn rounds(&self) -> usize {
        self.round_ends.len()
    }

    pub fn extrema(&self, output_index: usize) -> ExtremaEstimate {
        extrema_from_outputs(&self.probes, &self.outputs, output_index)
    }

    /// Extrema after each round, using every probe up to that round.
    pub fn round_extrema(&self, output_index: usize) -> Vec<ExtremaEstimate> {
        self.round_ends
            .iter()
            .map(|&end| extrema_from_outputs(&self.probes[..end], &self.outputs[..end], output_index))
            .collect()
    }
}

/// Generates and evaluates probes for a feature set, running grid
/// refinement rounds when configured.
pub fn evaluate_feature_set(
    model: &dyn Predictor,
    space: &FeatureSpace,
    context: &Context,
    feature_set: &[usize],
    config: &EstimatorConfig,
) -> Result<ProbeEvaluation> {
    config.validate()?;
    if config.refinement == 0 {
        let probes = generate_probes(space, context, feature_set, config)?;
        let outputs = predict(model, &probes, config.jobs)?;
        let round_ends = vec![probes.len()];
        return Ok(ProbeEvaluation {
            probes,
            outputs,
            round_ends,
        });
    }
    let set = normalize_set(space, feature_set)?;
    let mut probes = generate_probes(space, context, &set, config)?;
    let mut round_ends = vec![probes.len()];
    let mut levels = config.grid_levels;
    for _ in 0..config.refinement {
        levels = (levels - 1) * 2 + 1;
        let axes: Vec<Vec<f64>> = set.iter().map(|&i| axis_values(space, i, levels)).collect();
        check_cap(&axes, config.probe_cap)?;
        let continuous: Vec<bool> = set
            .iter()
            .map(|&i| !space.feature(i).is_categorical())
            .collect();
        let base = context.values();
        for_each_grid_point(&axes, |digits| {
            // Points with every continuous digit even were probed last round.
            let seen = digits
                .iter()
                .zip(&continuous)
                .all(|(d, &c)| !c || d % 2 == 0);
            if !seen {
                let mut probe = base.to_vec();
                for ((&feature, axis), &d) in set.iter().zip(&axes).zip(digits) {
                    probe[feature] = axis[d];
                }
                probes.push(probe);
            }
        });
        round_ends.push(probes.len());
    }
    let outputs = predict(model, &probes, config.jobs)?;
    Ok(ProbeEvaluation {
        probes,
        outputs,
        round_ends,
    })
}

/// Extrema after nested grid refinement of doubling density
/// (`levels`, `2·levels−1`, `4·levels−3`, ...), keeping earlier probes.
pub fn refine_extrema(
    model: &dyn Predictor,
    space: &FeatureSpace,
    context: &Context,
    feature_set: &[usize],
    config: &EstimatorConfig,
    output_index: usize,
) -> Result<ExtremaEstimate> {
    if config.refinement < 1 {
        return Err(Error::InvalidConfig("refinement must be at least 1".into()));
    }
    check_output(model, output_index)?;
    Ok(evaluate_feature_set(model, space, context, feature_set, config)?.extrema(output_index))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    /// Level name for categorical sweeps.
    pub label: Option<String>,
    pub outputs: Vec<f64>,
}

/// One-feature response curve with every other feature at the context.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub feature: String,
    pub points: Vec<SweepPoint>,
}

impl Sweep {
    /// CSV with header `value,out_0,...,out_{m-1}` and `%.9g` numbers.
    pub fn to_csv(&self) -> String {
        let m = self.points.first().map(|p| p.outputs.len()).unwrap_or(0);
        let mut out = String::from("value");
        for k in 0..m {
            out.push_str(&format!(",out_{k}"));
        }
        out.push('\n');
        for p in &self.points {
            match &p.label {
                Some(label) => out.push_str(&csv_field(label)),
                None => out.push_str(&g9(p.value)),
            }
            for v in &p.outputs {
                out.push(',');
                out.push_str(&g9(*v));
            }
            out.push('\n');
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Endpoint-inclusive sweep of a continuous feature.
pub fn sweep_feature(
    model: &dyn Predictor,
    space: &FeatureSpace,
    context: &Context,
    feature_index: usize,
    resolution: usize,
) -> Result<Sweep> {
    if feature_index >= space.len() {
        return Err(Error::InvalidArgument(format!("feature index {feature_index} out of range")));
    }
    let feature = space.feature(feature_index);
    if feature.is_categorical() {
        return Err(Error::InvalidArgument(format!(
            "feature '{}' is categorical; sweep its levels instead",
            feature.name()
        )));
    }
    if resolution < 2 {
        return Err(Error::InvalidArgument("sweep resolution must be at least 2".into()));
    }
    sweep_values(model, context, feature_index, feature.name(), axis_values(space, feature_index, resolution), None)
}

/// One point per level of a categorical feature, labeled by level name.
pub fn sweep_levels(
    model: &dyn Predictor,
    space: &FeatureSpace,
    context: &Context,
    feature_index: usize,
) -> Result<Sweep> {
    if feature_index >= space.len() {
        return Err(Error::InvalidArgument(format!("feature index {feature_index} out of range")));
    }
    let feature = space.feature(feature_index);
    let levels = feature.levels().ok_or_else(|| {
        Error::InvalidArgument(format!("feature '{}' is continuous", feature.name()))
    })?;
    let values = (0..levels.len()).map(|c| c as f64).collect();
    sweep_values(model, context, feature_index, feature.name(), values, Some(levels))
}

fn sweep_values(
    model: &dyn Predictor,
    context: &Context,
    feature_index: usize,
    name: &str,
    values: Vec<f64>,
    labels: Option<&[String]>,
) -> Result<Sweep> {
    let probes: Vec<Vec<f64>> = values
        .iter()
        .map(|&v| {
            let mut p = context.values().to_vec();
            p[feature_index] = v;
            p
        })
        .collect();
    let outputs = batch_predict(model, &probes)?;
    let points = values
        .into_iter()
        .zip(outputs)
        .enumerate()
        .map(|(k, (value, outputs))| SweepPoint {
            value,
            label: labels.map(|l| l[k].clone()),
            outputs,
        })
        .collect();
    Ok(Sweep {
        feature: name.to_string(),
        points,
    })
}
