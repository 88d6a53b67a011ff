//! Contextual importance and utility (CIU) explanations for black-box
//! models.
//!
//! A [`Predictor`](model::Predictor) is probed around a [`Context`](space::Context):
//! the features of a target set vary over their declared ranges while the
//! rest stay fixed. The spread of an output over those probes, relative to
//! the output's absolute range, is the target's contextual importance; the
//! position of the actual output inside that spread is its contextual
//! utility.

pub mod baseline;
pub mod concept;
pub mod engine;
pub mod error;
pub mod estimator;
pub mod format;
pub mod model;
pub mod narrative;
pub mod report;
pub mod scenario;
pub mod space;

pub use concept::{ConceptNode, ConceptTree};
pub use engine::{contrast, explain, CiuReport, CiuResult, ContrastReport};
pub use error::{Error, ErrorClass, Result};
pub use estimator::{EstimatorConfig, ExtremaEstimate, Strategy};
pub use model::{batch_predict, Predictor};
pub use scenario::Scenario;
pub use space::{Context, FeatureDescriptor, FeatureSpace, OutputSpec, RawValue};
