//! Cross-domain few-shot classification by combining domain-specific
//! meta-learners in parameter space.
//!
//! The numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the working precision used by the experiment harness.

pub mod domains;
pub mod error;
pub mod harness;
pub mod metalearn;
pub mod ndcore;
pub mod prototypes;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ParamVector = ndcore::ParamVector<f64>;
pub type Gradient = ndcore::Gradient<f64>;
pub type AdamState = ndcore::AdamState<f64>;
pub type LabeledBatch = ndcore::LabeledBatch<f64>;
