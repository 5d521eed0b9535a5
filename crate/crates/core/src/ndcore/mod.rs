//! Dense numerics for small fully connected networks: exact gradients,
//! losses, optimizers, parameter blending and a finite-difference oracle.

mod gradcheck;
mod manifest;
mod mlp;
mod optim;
mod params;
pub mod text;

pub use gradcheck::{central_difference, finite_diff_grad, max_relative_error};
pub use manifest::{Activation, ShapeManifest};
pub(crate) use mlp::squared_distance;
pub use mlp::{
    argmax, backward, cross_entropy, features, features_batch, forward, forward_batch, mean_loss,
    ForwardCache, LabeledBatch,
};
pub use optim::{adam_step, sgd_step, AdamConfig, AdamState};
pub use params::{blend, Gradient, LayerView, ParamVector};
