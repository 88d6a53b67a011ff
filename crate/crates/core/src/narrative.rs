//! Verbal labels and text rendering of reports.

use crate::engine::{CiuReport, CiuResult, ContrastReport};
use crate::error::{Error, Result};
use crate::format::two_decimals;
use crate::space::{Context, FeatureSpace};

pub const NEUTRAL_UTILITY_LABEL: &str = "neutral (feature has no effect here)";
pub const DEFAULT_SENTENCE: &str =
    "{target} is {importance} (CI={ci}) and its current value {value} is {utility} (CU={cu}) for {output}.";
pub const NO_DIFFERENCE: &str = "no target meaningfully distinguishes the outputs.";
/// CU differences at or below this are treated as ties.
pub const DELTA_EPSILON: f64 = 1e-9;

const PLACEHOLDERS: &[&str] = &["target", "ci", "cu", "value", "output", "importance", "utility"];

/// Ordered bands `(upper threshold, label)` covering [0, 1]. Each band is
/// closed below and open above, except the last, which ends at 1.0 inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelScale {
    bands: Vec<(f64, String)>,
}

impl LabelScale {
    pub fn new<S: Into<String>>(bands: impl IntoIterator<Item = (f64, S)>) -> Result<Self> {
        let bands: Vec<(f64, String)> = bands.into_iter().map(|(t, l)| (t, l.into())).collect();
        let Some(last) = bands.last() else {
            return Err(Error::InvalidScale("no bands".into()));
        };
        if last.0 != 1.0 {
            return Err(Error::InvalidScale(format!(
                "final threshold must be 1.0, got {}",
                last.0
            )));
        }
        if bands[0].0 <= 0.0 {
            return Err(Error::InvalidScale("first threshold must be above 0".into()));
        }
        if bands.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidScale("thresholds must be strictly increasing".into()));
        }
        Ok(Self { bands })
    }

    /// Quartiles: not / somewhat / important / highly important.
    pub fn default_importance() -> Self {
        Self::new([
            (0.25, "not important"),
            (0.5, "somewhat important"),
            (0.75, "important"),
            (1.0, "highly important"),
        ])
        .expect("default scale is valid")
    }

    /// Quintiles from "very bad" to "very good".
    pub fn default_utility() -> Self {
        Self::new([
            (0.2, "very bad"),
            (0.4, "bad"),
            (0.6, "acceptable"),
            (0.8, "good"),
            (1.0, "very good"),
        ])
        .expect("default scale is valid")
    }

    pub fn bands(&self) -> &[(f64, String)] {
        &self.bands
    }

    pub fn band_index(&self, value: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Invariant(format!("label input {value} outside [0, 1]")));
        }
        Ok(self
            .bands
            .iter()
            .position(|(upper, _)| value < *upper)
            .unwrap_or(self.bands.len() - 1))
    }

    pub fn label(&self, value: f64) -> Result<&str> {
        Ok(&self.bands[self.band_index(value)?].1)
    }
}

/// Labels and sentence template used to render reports.
#[derive(Debug, Clone, PartialEq)]
pub struct NarrativeStyle {
    pub importance: LabelScale,
    pub utility: LabelScale,
    /// Per-entry sentence with `{target}`, `{ci}`, `{cu}`, `{value}`,
    /// `{output}`, `{importance}` and `{utility}` placeholders.
    pub sentence: String,
}

impl Default for NarrativeStyle {
    fn default() -> Self {
        Self {
            importance: LabelScale::default_importance(),
            utility: LabelScale::default_utility(),
            sentence: DEFAULT_SENTENCE.to_string(),
        }
    }
}

/// Rejects templates with unknown or unterminated placeholders.
pub fn check_template(template: &str) -> Result<()> {
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| Error::InvalidArgument(format!("unterminated placeholder in '{template}'")))?;
        let key = &after[..close];
        if !PLACEHOLDERS.contains(&key) {
            return Err(Error::InvalidArgument(format!(
                "unknown placeholder '{{{key}}}' in template (known: {})",
                PLACEHOLDERS.join(", ")
            )));
        }
        rest = &after[close + 1..];
    }
    Ok(())
}

fn fill(template: &str, lookup: impl Fn(&str) -> Option<String>) -> String {
    let mut out = String::with_capacity(template.len() + 32);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match after.find('}').and_then(|close| lookup(&after[..close]).map(|v| (close, v))) {
            Some((close, value)) => {
                out.push_str(&value);
                rest = &after[close + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

pub fn label_importance(ci: f64, scale: &LabelScale) -> Result<&str> {
    scale.label(ci)
}

pub fn label_utility(cu: f64, degenerate: bool, scale: &LabelScale) -> Result<&str> {
    if !(0.0..=1.0).contains(&cu) {
        return Err(Error::Invariant(format!("CU {cu} outside [0, 1]")));
    }
    if degenerate {
        return Ok(NEUTRAL_UTILITY_LABEL);
    }
    scale.label(cu)
}

fn describe_context(space: &FeatureSpace, context: &Context) -> String {
    space
        .features()
        .iter()
        .zip(context.values())
        .map(|(f, v)| format!("{}={}", f.name(), f.display_value(*v)))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Current value of a target: the feature's value, or `(a=.., b=..)` for
/// a concept spanning several features.
fn target_value(space: &FeatureSpace, context: &Context, entry: &CiuResult) -> String {
    let values = context.values();
    match entry.feature_set.as_slice() {
        [single] if space.feature(*single).name() == entry.target => {
            space.feature(*single).display_value(values[*single])
        }
        set => {
            let parts: Vec<String> = set
                .iter()
                .map(|&i| {
                    let f = space.feature(i);
                    format!("{}={}", f.name(), f.display_value(values[i]))
                })
                .collect();
            format!("({})", parts.join(", "))
        }
    }
}

/// Header line plus one sentence per entry, in report order.
pub fn render_explanation(report: &CiuReport, space: &FeatureSpace, style: &NarrativeStyle) -> Result<String> {
    let mut out = format!(
        "Explaining {} = {} at {}:\n",
        report.output.name(),
        two_decimals(report.out_value),
        describe_context(space, &report.context)
    );
    for entry in &report.entries {
        let importance = label_importance(entry.ci, &style.importance)?;
        let utility = label_utility(entry.cu, entry.degenerate, &style.utility)?;
        let value = target_value(space, &report.context, entry);
        let line = fill(&style.sentence, |key| {
            Some(match key {
                "target" => entry.target.clone(),
                "ci" => two_decimals(entry.ci),
                "cu" => two_decimals(entry.cu),
                "value" => value.clone(),
                "output" => report.output.name().to_string(),
                "importance" => importance.to_string(),
                "utility" => utility.to_string(),
                _ => return None,
            })
        });
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

/// "Output A was preferred over B mainly because:" and the `top_k`
/// targets with the largest CU differences.
pub fn render_contrast(
    report: &ContrastReport,
    space: &FeatureSpace,
    top_k: usize,
) -> Result<String> {
    if top_k == 0 {
        return Err(Error::InvalidArgument("top_k must be at least 1".into()));
    }
    let a = report.output_a.name();
    let b = report.output_b.name();
    let mut out = format!(
        "At {}: output {a} was preferred over {b} mainly because:\n",
        describe_context(space, &report.context)
    );
    let decisive: Vec<_> = report
        .entries
        .iter()
        .filter(|e| e.cu_delta.abs() > DELTA_EPSILON)
        .take(top_k)
        .collect();
    if decisive.is_empty() {
        out.push_str(NO_DIFFERENCE);
        out.push('\n');
        return Ok(out);
    }
    for e in decisive {
        let favored = if e.cu_delta > 0.0 { a } else { b };
        out.push_str(&format!(
            "- for {}, the context favors {favored} (CU {} vs {}).\n",
            e.target,
            two_decimals(e.a.cu),
            two_decimals(e.b.cu)
        ));
    }
    Ok(out)
}
