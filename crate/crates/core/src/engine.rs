//! Contextual importance (CI) and contextual utility (CU).
//!
//! With `Cmin`/`Cmax` the contextual extrema of output `j` when the input
//! set varies and `absmin`/`absmax` the output's absolute range:
//!
//! ```text
//! CI = (Cmax - Cmin) / (absmax - absmin)
//! CU = (out(C) - Cmin) / (Cmax - Cmin)
//! ```
//!
//! Joint input sets (concepts) are estimated directly over their product
//! space; CI of a set is not derivable from singleton CIs in general.

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;

use crate::concept::ConceptTree;
use crate::error::{Error, Result};
use crate::estimator::{evaluate_feature_set, EstimatorConfig, ExtremaEstimate, ProbeEvaluation};
use crate::model::{batch_predict, Predictor};
use crate::space::{Context, FeatureSpace, OutputSpec};

/// CU reported when the output does not move in context.
pub const NEUTRAL_UTILITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Importance {
    pub ci: f64,
    /// Set when the contextual extrema stray outside the declared absolute
    /// bounds and CI had to be clamped into [0, 1].
    pub clamped: bool,
}

pub fn contextual_importance(est: &ExtremaEstimate, spec: &OutputSpec) -> Importance {
    let raw = (est.cmax - est.cmin) / (spec.absmax() - spec.absmin());
    let outside = est.cmin < spec.absmin() || est.cmax > spec.absmax();
    let ci = raw.clamp(0.0, 1.0);
    Importance {
        ci,
        clamped: outside || ci != raw,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Utility {
    pub cu: f64,
    /// `Cmax == Cmin`: the input set has no effect in this context.
    pub degenerate: bool,
}

/// Fails only if `out_value` lies outside `[cmin, cmax]`, which the
/// estimator's context inclusion rules out.
pub fn contextual_utility(out_value: f64, est: &ExtremaEstimate) -> Result<Utility> {
    if !(est.cmin <= out_value && out_value <= est.cmax) {
        return Err(Error::Invariant(format!(
            "context output {out_value} outside estimated interval [{}, {}]",
            est.cmin, est.cmax
        )));
    }
    if est.cmax > est.cmin {
        Ok(Utility {
            cu: (out_value - est.cmin) / (est.cmax - est.cmin),
            degenerate: false,
        })
    } else {
        Ok(Utility {
            cu: NEUTRAL_UTILITY,
            degenerate: true,
        })
    }
}

/// CI and CU of one output for one input set.
#[derive(Debug, Clone, PartialEq)]
pub struct CiuResult {
    pub target: String,
    pub feature_set: Vec<usize>,
    pub ci: f64,
    pub cu: f64,
    pub cmin: f64,
    pub cmax: f64,
    pub out_value: f64,
    pub degenerate: bool,
    pub ci_clamped: bool,
    pub argmin: Vec<f64>,
    pub argmax: Vec<f64>,
    pub probes_used: usize,
}

impl CiuResult {
    fn from_estimate(
        target: &str,
        feature_set: &[usize],
        est: ExtremaEstimate,
        spec: &OutputSpec,
        out_value: f64,
    ) -> Result<Self> {
        let importance = contextual_importance(&est, spec);
        let utility = contextual_utility(out_value, &est)?;
        Ok(Self {
            target: target.to_string(),
            feature_set: feature_set.to_vec(),
            ci: importance.ci,
            cu: utility.cu,
            cmin: est.cmin,
            cmax: est.cmax,
            out_value,
            degenerate: utility.degenerate,
            ci_clamped: importance.clamped,
            argmin: est.argmin,
            argmax: est.argmax,
            probes_used: est.probes_used,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiuReport {
    pub context: Context,
    pub output: OutputSpec,
    /// Model output at the context.
    pub out_value: f64,
    /// Sorted by descending CI, ties by target name.
    pub entries: Vec<CiuResult>,
    pub config: EstimatorConfig,
    pub fingerprint: String,
}

impl CiuReport {
    pub fn entry(&self, target: &str) -> Option<&CiuResult> {
        self.entries.iter().find(|e| e.target == target)
    }

    /// One message per entry whose CI was clamped.
    pub fn warnings(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| e.ci_clamped)
            .map(|e| {
                format!(
                    "'{}': contextual range [{}, {}] exceeds the declared bounds [{}, {}] of '{}'; CI clamped",
                    e.target,
                    e.cmin,
                    e.cmax,
                    self.output.absmin(),
                    self.output.absmax(),
                    self.output.name()
                )
            })
            .collect()
    }
}

/// Feature indices of a target: a feature name, else a concept name.
pub fn resolve_target(space: &FeatureSpace, tree: &ConceptTree, name: &str) -> Result<Vec<usize>> {
    if let Some(i) = space.index_of(name) {
        return Ok(vec![i]);
    }
    if tree.contains(name) {
        return Ok(tree.resolve(name)?.into_iter().collect());
    }
    Err(Error::UnknownTarget(name.to_string()))
}

fn resolve_targets<S: AsRef<str>>(
    space: &FeatureSpace,
    tree: &ConceptTree,
    targets: &[S],
) -> Result<Vec<(String, Vec<usize>)>> {
    let mut seen = HashSet::new();
    targets
        .iter()
        .map(|t| {
            let name = t.as_ref();
            if !seen.insert(name) {
                return Err(Error::InvalidArgument(format!("target '{name}' listed twice")));
            }
            Ok((name.to_string(), resolve_target(space, tree, name)?))
        })
        .collect()
}

fn check_output(model: &dyn Predictor, spec: &OutputSpec) -> Result<()> {
    if spec.index() >= model.n_outputs() {
        return Err(Error::InvalidOutput {
            name: spec.name().to_string(),
            reason: format!(
                "index {} but the model has {} outputs",
                spec.index(),
                model.n_outputs()
            ),
        });
    }
    Ok(())
}

/// Evaluates every target's probes. With `jobs > 1` and a model that allows
/// it, targets fan out to workers; results keep target order.
fn evaluate_targets(
    model: &dyn Predictor,
    space: &FeatureSpace,
    context: &Context,
    targets: &[(String, Vec<usize>)],
    config: &EstimatorConfig,
) -> Result<Vec<ProbeEvaluation>> {
    if config.jobs > 1 && model.supports_parallel() && targets.len() > 1 {
        let inner = EstimatorConfig {
            jobs: 1,
            ..config.clone()
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start workers: {e}")))?;
        pool.install(|| {
            targets
                .par_iter()
                .map(|(_, set)| evaluate_feature_set(model, space, context, set, &inner))
                .collect()
        })
    } else {
        targets
            .iter()
            .map(|(_, set)| evaluate_feature_set(model, space, context, set, config))
            .collect()
    }
}

fn context_outputs(model: &dyn Predictor, context: &Context) -> Result<Vec<f64>> {
    Ok(batch_predict(model, &[context.values().to_vec()])?.remove(0))
}

fn check_context(space: &FeatureSpace, model: &dyn Predictor, context: &Context) -> Result<()> {
    if context.len() != space.len() {
        return Err(Error::LengthMismatch {
            expected: space.len(),
            actual: context.len(),
        });
    }
    if model.n_inputs() != space.len() {
        return Err(Error::ArityMismatch {
            model: model.n_inputs(),
            space: space.len(),
        });
    }
    Ok(())
}

fn by_ci_then_name(a: &CiuResult, b: &CiuResult) -> Ordering {
    b.ci.total_cmp(&a.ci).then_with(|| a.target.cmp(&b.target))
}

/// Explains one output of `model` at `context` for each target.
pub fn explain<S: AsRef<str>>(
    model: &dyn Predictor,
    space: &FeatureSpace,
    context: &Context,
    output: &OutputSpec,
    targets: &[S],
    tree: &ConceptTree,
    config: &EstimatorConfig,
) -> Result<CiuReport> {
    config.validate()?;
    check_context(space, model, context)?;
    check_output(model, output)?;
    let resolved = resolve_targets(space, tree, targets)?;
    let out_value = context_outputs(model, context)?[output.index()];
    let evaluations = evaluate_targets(model, space, context, &resolved, config)?;
    let mut entries = resolved
        .iter()
        .zip(evaluations)
        .map(|((name, set), eval)| {
            CiuResult::from_estimate(name, set, eval.extrema(output.index()), output, out_value)
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(by_ci_then_name);
    Ok(CiuReport {
        context: context.clone(),
        output: output.clone(),
        out_value,
        entries,
        config: config.clone(),
        fingerprint: model.fingerprint(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContrastEntry {
    pub target: String,
    pub feature_set: Vec<usize>,
    pub a: CiuResult,
    pub b: CiuResult,
    /// `cu_a - cu_b`, in [-1, 1].
    pub cu_delta: f64,
}

/// "Why A rather than B": per-target CI/CU of two outputs judged on the
/// same probes.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastReport {
    pub context: Context,
    pub output_a: OutputSpec,
    pub output_b: OutputSpec,
    /// Sorted by descending `|cu_delta|`, ties by target name.
    pub entries: Vec<ContrastEntry>,
    pub config: EstimatorConfig,
    pub fingerprint: String,
}

impl ContrastReport {
    pub fn entry(&self, target: &str) -> Option<&ContrastEntry> {
        self.entries.iter().find(|e| e.target == target)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn contrast<S: AsRef<str>>(
    model: &dyn Predictor,
    space: &FeatureSpace,
    context: &Context,
    output_a: &OutputSpec,
    output_b: &OutputSpec,
    targets: &[S],
    tree: &ConceptTree,
    config: &EstimatorConfig,
) -> Result<ContrastReport> {
    config.validate()?;
    if output_a.index() == output_b.index() {
        return Err(Error::InvalidArgument(format!(
            "contrast needs two different outputs, got '{}' twice",
            output_a.name()
        )));
    }
    check_context(space, model, context)?;
    check_output(model, output_a)?;
    check_output(model, output_b)?;
    let resolved = resolve_targets(space, tree, targets)?;
    let outs = context_outputs(model, context)?;
    let evaluations = evaluate_targets(model, space, context, &resolved, config)?;
    let mut entries = resolved
        .iter()
        .zip(evaluations)
        .map(|((name, set), eval)| {
            let a = CiuResult::from_estimate(
                name,
                set,
                eval.extrema(output_a.index()),
                output_a,
                outs[output_a.index()],
            )?;
            let b = CiuResult::from_estimate(
                name,
                set,
                eval.extrema(output_b.index()),
                output_b,
                outs[output_b.index()],
            )?;
            Ok(ContrastEntry {
                target: name.clone(),
                feature_set: set.clone(),
                cu_delta: a.cu - b.cu,
                a,
                b,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|x, y| {
        y.cu_delta
            .abs()
            .total_cmp(&x.cu_delta.abs())
            .then_with(|| x.target.cmp(&y.target))
    });
    Ok(ContrastReport {
        context: context.clone(),
        output_a: output_a.clone(),
        output_b: output_b.clone(),
        entries,
        config: config.clone(),
        fingerprint: model.fingerprint(),
    })
}

#[cfg(test)]
mod tests {
    use std::collections::{BTreeMap, BTreeSet};

    use super::*;
    use crate::concept::ConceptNode;
    use crate::estimator::Strategy;
    use crate::model::{FnModel, LinearModel};
    use crate::space::FeatureDescriptor;

    fn est(cmin: f64, cmax: f64) -> ExtremaEstimate {
        ExtremaEstimate {
            cmin,
            cmax,
            argmin: vec![],
            argmax: vec![],
            probes_used: 0,
        }
    }

    #[test]
    fn importance_is_range_fraction() {
        let unit = OutputSpec::unit("y", 0);
        // (0.80 - 0.30) / (1 - 0), evaluated by hand.
        assert!((contextual_importance(&est(0.30, 0.80), &unit).ci - 0.5).abs() < 1e-12);
        assert_eq!(contextual_importance(&est(0.7, 0.7), &unit).ci, 0.0);
        let full = contextual_importance(&est(0.0, 1.0), &unit);
        assert_eq!(full.ci, 1.0);
        assert!(!full.clamped);
    }

    #[test]
    fn importance_clamps_outside_declared_bounds() {
        let unit = OutputSpec::unit("y", 0);
        let over = contextual_importance(&est(-0.5, 1.5), &unit);
        assert_eq!(over.ci, 1.0);
        assert!(over.clamped);
        let shifted = contextual_importance(&est(0.9, 1.2), &unit);
        assert!((shifted.ci - 0.3).abs() < 1e-12);
        assert!(shifted.clamped);
    }

    #[test]
    fn utility_is_position_in_interval() {
        // (0.45 - 0.30) / (0.80 - 0.30) = 0.3, evaluated by hand.
        let u = contextual_utility(0.45, &est(0.30, 0.80)).unwrap();
        assert!((u.cu - 0.3).abs() < 1e-12);
        assert!(!u.degenerate);
        assert_eq!(contextual_utility(0.8, &est(0.30, 0.80)).unwrap().cu, 1.0);
        let flat = contextual_utility(0.7, &est(0.7, 0.7)).unwrap();
        assert_eq!(flat, Utility { cu: 0.5, degenerate: true });
    }

    #[test]
    fn utility_outside_interval_is_an_invariant_failure() {
        let err = contextual_utility(0.9, &est(0.30, 0.80)).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)));
    }

    fn square() -> FeatureSpace {
        FeatureSpace::new(vec![
            FeatureDescriptor::continuous("x1", 0.0, 1.0).unwrap(),
            FeatureDescriptor::continuous("x2", 0.0, 1.0).unwrap(),
        ])
        .unwrap()
    }

    fn both_tree(space: &FeatureSpace) -> ConceptTree {
        ConceptTree::new(
            space,
            BTreeMap::from([("both".to_string(), ConceptNode::Features(BTreeSet::from([0, 1])))]),
        )
        .unwrap()
    }

    #[test]
    fn linear_explanation() {
        let s = square();
        let m = LinearModel::new(vec![vec![0.5, 0.5]], vec![0.0]).unwrap();
        let c = s.context_from_encoded(&[0.3, 0.6]).unwrap();
        let report = explain(
            &m,
            &s,
            &c,
            &OutputSpec::unit("y", 0),
            &["x1", "x2", "both"],
            &both_tree(&s),
            &EstimatorConfig::default(),
        )
        .unwrap();
        let names: Vec<&str> = report.entries.iter().map(|e| e.target.as_str()).collect();
        assert_eq!(names, ["both", "x1", "x2"]);
        let x1 = report.entry("x1").unwrap();
        assert!((x1.ci - 0.5).abs() < 1e-9 && (x1.cu - 0.3).abs() < 1e-9);
        let x2 = report.entry("x2").unwrap();
        assert!((x2.ci - 0.5).abs() < 1e-9 && (x2.cu - 0.6).abs() < 1e-9);
        let both = report.entry("both").unwrap();
        assert!((both.ci - 1.0).abs() < 1e-9 && (both.cu - 0.45).abs() < 1e-9);
        assert_eq!(both.feature_set, vec![0, 1]);
    }

    #[test]
    fn constant_model_is_degenerate_everywhere() {
        let s = square();
        let m = FnModel::constant(2, vec![0.7]);
        let c = s.context_from_encoded(&[0.3, 0.6]).unwrap();
        for strategy in [Strategy::Grid, Strategy::MonteCarlo] {
            let config = EstimatorConfig {
                strategy,
                ..Default::default()
            };
            let report = explain(&m, &s, &c, &OutputSpec::unit("y", 0), &["x1", "x2", "both"], &both_tree(&s), &config)
                .unwrap();
            for e in &report.entries {
                assert_eq!((e.ci, e.cu, e.degenerate), (0.0, 0.5, true));
            }
        }
    }

    #[test]
    fn unknown_and_duplicate_targets() {
        let s = square();
        let m = LinearModel::new(vec![vec![0.5, 0.5]], vec![0.0]).unwrap();
        let c = s.context_from_encoded(&[0.3, 0.6]).unwrap();
        let tree = ConceptTree::default();
        let unknown = explain(&m, &s, &c, &OutputSpec::unit("y", 0), &["x9"], &tree, &EstimatorConfig::default());
        assert!(matches!(unknown, Err(Error::UnknownTarget(_))));
        let dup = explain(&m, &s, &c, &OutputSpec::unit("y", 0), &["x1", "x1"], &tree, &EstimatorConfig::default());
        assert!(dup.is_err());
        let bad_output = explain(&m, &s, &c, &OutputSpec::unit("z", 3), &["x1"], &tree, &EstimatorConfig::default());
        assert!(matches!(bad_output, Err(Error::InvalidOutput { .. })));
    }

    #[test]
    fn empty_target_list_gives_empty_report() {
        let s = square();
        let m = LinearModel::new(vec![vec![0.5, 0.5]], vec![0.0]).unwrap();
        let c = s.context_from_encoded(&[0.3, 0.6]).unwrap();
        let none: [&str; 0] = [];
        let report = explain(&m, &s, &c, &OutputSpec::unit("y", 0), &none, &ConceptTree::default(), &EstimatorConfig::default())
            .unwrap();
        assert!(report.entries.is_empty());
    }

    #[test]
    fn ties_sort_by_name() {
        let s = FeatureSpace::new(vec![
            FeatureDescriptor::continuous("b", 0.0, 1.0).unwrap(),
            FeatureDescriptor::continuous("a", 0.0, 1.0).unwrap(),
        ])
        .unwrap();
        let m = LinearModel::new(vec![vec![0.5, 0.5]], vec![0.0]).unwrap();
        let c = s.context_from_encoded(&[0.3, 0.6]).unwrap();
        let report = explain(&m, &s, &c, &OutputSpec::unit("y", 0), &["b", "a"], &ConceptTree::default(), &EstimatorConfig::default())
            .unwrap();
        assert_eq!(report.entries[0].target, "a");
    }

    fn opposing() -> (FeatureSpace, LinearModel) {
        let s = FeatureSpace::new(vec![FeatureDescriptor::continuous("x1", 0.0, 1.0).unwrap()]).unwrap();
        let m = LinearModel::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 1.0]).unwrap();
        (s, m)
    }

    #[test]
    fn contrast_of_opposing_outputs() {
        let (s, m) = opposing();
        let c = s.context_from_encoded(&[0.9]).unwrap();
        let report = contrast(
            &m,
            &s,
            &c,
            &OutputSpec::unit("a", 0),
            &OutputSpec::unit("b", 1),
            &["x1"],
            &ConceptTree::default(),
            &EstimatorConfig::default(),
        )
        .unwrap();
        let e = report.entry("x1").unwrap();
        // Dense-grid oracle: y_a ranges over [0, 1] and y_b over [0, 1].
        let dense: Vec<f64> = (0..=10_000).map(|k| k as f64 / 10_000.0).collect();
        let (lo_a, hi_a) = (dense[0], dense[dense.len() - 1]);
        let oracle_a = (0.9 - lo_a) / (hi_a - lo_a);
        let oracle_b = ((1.0 - 0.9) - (1.0 - hi_a)) / ((1.0 - lo_a) - (1.0 - hi_a));
        assert!((e.a.cu - oracle_a).abs() < 1e-9);
        assert!((e.b.cu - oracle_b).abs() < 1e-9);
        assert!((e.cu_delta - 0.8).abs() < 1e-9);
    }

    #[test]
    fn contrast_of_duplicated_outputs_has_zero_deltas() {
        let s = square();
        let m = LinearModel::new(vec![vec![0.2, 0.7], vec![0.2, 0.7]], vec![0.0, 0.0]).unwrap();
        let c = s.context_from_encoded(&[0.3, 0.6]).unwrap();
        let report = contrast(
            &m,
            &s,
            &c,
            &OutputSpec::unit("a", 0),
            &OutputSpec::unit("b", 1),
            &["x1", "x2", "both"],
            &both_tree(&s),
            &EstimatorConfig::default(),
        )
        .unwrap();
        assert!(report.entries.iter().all(|e| e.cu_delta == 0.0));
    }

    #[test]
    fn contrast_requires_distinct_outputs() {
        let (s, m) = opposing();
        let c = s.context_from_encoded(&[0.9]).unwrap();
        let res = contrast(
            &m,
            &s,
            &c,
            &OutputSpec::unit("a", 0),
            &OutputSpec::unit("a2", 0),
            &["x1"],
            &ConceptTree::default(),
            &EstimatorConfig::default(),
        );
        assert!(res.is_err());
    }

    #[test]
    fn non_linear_utility_peaks_inside_range() {
        let s = FeatureSpace::new(vec![FeatureDescriptor::continuous("x1", 0.0, 1.0).unwrap()]).unwrap();
        let m = FnModel::new("peak", 1, 1, |x| vec![1.0 - 2.0 * (x[0] - 0.5).abs()]);
        let cu_at = |v: f64| {
            let c = s.context_from_encoded(&[v]).unwrap();
            explain(&m, &s, &c, &OutputSpec::unit("y", 0), &["x1"], &ConceptTree::default(), &EstimatorConfig::default())
                .unwrap()
                .entries[0]
                .cu
        };
        let (low, high, mid) = (cu_at(0.1), cu_at(0.9), cu_at(0.5));
        assert!((low - high).abs() < 1e-9);
        assert!(low < mid);
        assert_eq!(mid, 1.0);
    }

    #[test]
    fn parallel_targets_match_serial() {
        let s = square();
        let m = FnModel::new("bumpy", 2, 2, |x| vec![(5.0 * x[0]).sin() * x[1], x[0] * x[0] - x[1]]);
        let c = s.context_from_encoded(&[0.3, 0.6]).unwrap();
        let serial = EstimatorConfig::default();
        let parallel = EstimatorConfig { jobs: 3, ..Default::default() };
        let tree = both_tree(&s);
        let a = explain(&m, &s, &c, &OutputSpec::new("y", 0, -1.0, 1.0).unwrap(), &["x1", "x2", "both"], &tree, &serial).unwrap();
        let b = explain(&m, &s, &c, &OutputSpec::new("y", 0, -1.0, 1.0).unwrap(), &["x1", "x2", "both"], &tree, &parallel).unwrap();
        assert_eq!(a.entries, b.entries);
    }
}
