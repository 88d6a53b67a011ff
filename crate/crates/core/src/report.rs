//! Canonical JSON serialization of reports.
//!
//! Keys appear in a fixed order, numbers are rendered with `%.9g`, and the
//! document is a single line, so identical reports serialize to identical
//! bytes.

use serde::Deserialize;

use crate::engine::{CiuReport, ContrastReport};
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::format::g9;
use crate::space::OutputSpec;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputDoc {
    pub name: String,
    pub index: usize,
    pub absmin: f64,
    pub absmax: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub strategy: String,
    pub grid_levels: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub refinement: u32,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDoc {
    pub target: String,
    pub ci: f64,
    pub cu: f64,
    pub cmin: f64,
    pub cmax: f64,
    pub out_value: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub context: Vec<f64>,
    pub output: OutputDoc,
    pub entries: Vec<EntryDoc>,
    pub config: ConfigDoc,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastEntryDoc {
    pub target: String,
    pub ci_a: f64,
    pub cu_a: f64,
    pub ci_b: f64,
    pub cu_b: f64,
    pub cu_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastDocument {
    pub context: Vec<f64>,
    pub output_a: OutputDoc,
    pub output_b: OutputDoc,
    pub entries: Vec<ContrastEntryDoc>,
    pub config: ConfigDoc,
    pub fingerprint: String,
}

fn output_doc(spec: &OutputSpec) -> OutputDoc {
    OutputDoc {
        name: spec.name().to_string(),
        index: spec.index(),
        absmin: spec.absmin(),
        absmax: spec.absmax(),
    }
}

fn config_doc(config: &EstimatorConfig) -> ConfigDoc {
    ConfigDoc {
        strategy: config.strategy.as_str().to_string(),
        grid_levels: config.grid_levels,
        mc_samples: config.mc_samples,
        seed: config.seed,
        refinement: config.refinement,
    }
}

impl From<&CiuReport> for ReportDocument {
    fn from(r: &CiuReport) -> Self {
        Self {
            context: r.context.values().to_vec(),
            output: output_doc(&r.output),
            entries: r
                .entries
                .iter()
                .map(|e| EntryDoc {
                    target: e.target.clone(),
                    ci: e.ci,
                    cu: e.cu,
                    cmin: e.cmin,
                    cmax: e.cmax,
                    out_value: e.out_value,
                    degenerate: e.degenerate,
                })
                .collect(),
            config: config_doc(&r.config),
            fingerprint: r.fingerprint.clone(),
        }
    }
}

impl From<&ContrastReport> for ContrastDocument {
    fn from(r: &ContrastReport) -> Self {
        Self {
            context: r.context.values().to_vec(),
            output_a: output_doc(&r.output_a),
            output_b: output_doc(&r.output_b),
            entries: r
                .entries
                .iter()
                .map(|e| ContrastEntryDoc {
                    target: e.target.clone(),
                    ci_a: e.a.ci,
                    cu_a: e.a.cu,
                    ci_b: e.b.ci,
                    cu_b: e.b.cu,
                    cu_delta: e.cu_delta,
                })
                .collect(),
            config: config_doc(&r.config),
            fingerprint: r.fingerprint.clone(),
        }
    }
}

/// Minimal ordered JSON writer.
struct Writer {
    buf: String,
    first: Vec<bool>,
}

impl Writer {
    fn new() -> Self {
        Self {
            buf: String::new(),
            first: Vec::new(),
        }
    }

    fn sep(&mut self) {
        if let Some(first) = self.first.last_mut() {
            if !*first {
                self.buf.push(',');
            }
            *first = false;
        }
    }

    fn open(&mut self, c: char) {
        self.sep();
        self.buf.push(c);
        self.first.push(true);
    }

    fn close(&mut self, c: char) {
        self.first.pop();
        self.buf.push(c);
    }

    fn key(&mut self, k: &str) {
        self.sep();
        self.buf.push_str(&serde_json::to_string(k).expect("string serializes"));
        self.buf.push(':');
        // The value that follows must not emit another separator.
        if let Some(first) = self.first.last_mut() {
            *first = true;
        }
    }

    fn finish_value(&mut self) {
        if let Some(first) = self.first.last_mut() {
            *first = false;
        }
    }

    fn raw(&mut self, text: &str) {
        self.sep();
        self.buf.push_str(text);
    }

    fn num(&mut self, v: f64) {
        self.raw(&g9(v));
    }

    fn str(&mut self, s: &str) {
        self.raw(&serde_json::to_string(s).expect("string serializes"));
    }

    fn field_num(&mut self, k: &str, v: f64) {
        self.key(k);
        self.num(v);
        self.finish_value();
    }

    fn field_int(&mut self, k: &str, v: u64) {
        self.key(k);
        self.raw(&v.to_string());
        self.finish_value();
    }

    fn field_str(&mut self, k: &str, v: &str) {
        self.key(k);
        self.str(v);
        self.finish_value();
    }

    fn field_bool(&mut self, k: &str, v: bool) {
        self.key(k);
        self.raw(if v { "true" } else { "false" });
        self.finish_value();
    }

    fn field_nums(&mut self, k: &str, vs: &[f64]) {
        self.key(k);
        self.open('[');
        for v in vs {
            self.num(*v);
        }
        self.close(']');
        self.finish_value();
    }

    fn field_output(&mut self, k: &str, o: &OutputDoc) {
        self.key(k);
        self.open('{');
        self.field_str("name", &o.name);
        self.field_int("index", o.index as u64);
        self.field_num("absmin", o.absmin);
        self.field_num("absmax", o.absmax);
        self.close('}');
        self.finish_value();
    }

    fn field_config(&mut self, c: &ConfigDoc) {
        self.key("config");
        self.open('{');
        self.field_str("strategy", &c.strategy);
        self.field_int("grid_levels", c.grid_levels as u64);
        self.field_int("mc_samples", c.mc_samples as u64);
        self.field_int("seed", c.seed);
        self.field_int("refinement", c.refinement as u64);
        self.close('}');
        self.finish_value();
    }

    fn entries<T>(&mut self, items: &[T], mut each: impl FnMut(&mut Self, &T)) {
        self.key("entries");
        self.open('[');
        for item in items {
            self.open('{');
            each(self, item);
            self.close('}');
        }
        self.close(']');
        self.finish_value();
    }
}

impl ReportDocument {
    pub fn to_canonical_json(&self) -> String {
        let mut w = Writer::new();
        w.open('{');
        w.field_nums("context", &self.context);
        w.field_output("output", &self.output);
        w.entries(&self.entries, |w, e| {
            w.field_str("target", &e.target);
            w.field_num("ci", e.ci);
            w.field_num("cu", e.cu);
            w.field_num("cmin", e.cmin);
            w.field_num("cmax", e.cmax);
            w.field_num("out_value", e.out_value);
            w.field_bool("degenerate", e.degenerate);
        });
        w.field_config(&self.config);
        w.field_str("fingerprint", &self.fingerprint);
        w.close('}');
        w.buf
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("bad report JSON: {e}")))
    }
}

impl ContrastDocument {
    pub fn to_canonical_json(&self) -> String {
        let mut w = Writer::new();
        w.open('{');
        w.field_nums("context", &self.context);
        w.field_output("output_a", &self.output_a);
        w.field_output("output_b", &self.output_b);
        w.entries(&self.entries, |w, e| {
            w.field_str("target", &e.target);
            w.field_num("ci_a", e.ci_a);
            w.field_num("cu_a", e.cu_a);
            w.field_num("ci_b", e.ci_b);
            w.field_num("cu_b", e.cu_b);
            w.field_num("cu_delta", e.cu_delta);
        });
        w.field_config(&self.config);
        w.field_str("fingerprint", &self.fingerprint);
        w.close('}');
        w.buf
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("bad report JSON: {e}")))
    }
}

impl CiuReport {
    pub fn to_canonical_json(&self) -> String {
        ReportDocument::from(self).to_canonical_json()
    }
}

impl ContrastReport {
    pub fn to_canonical_json(&self) -> String {
        ContrastDocument::from(self).to_canonical_json()
    }
}
