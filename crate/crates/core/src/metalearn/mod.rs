//! Pre-training, domain-specific meta-training with pure and mixed tasks,
//! and meta-test adaptation from blended meta-parameters.

mod checkpoint;
mod config;
mod eval;
#[cfg(test)]
mod fixtures;
mod pretrain;
mod state;
mod train;
mod update;

pub use checkpoint::Checkpoint;
pub use config::{AlphaChainRule, PretrainConfig, TrainLoopConfig};
pub use eval::{meta_test, meta_test_embedded, query_accuracy, NovelTaskResult, WeightRule};
pub use pretrain::{accuracy, pretrain, PretrainOutcome};
pub use state::{task_manifest, MetaState};
pub use train::{maml_train, meta_train, MamlTrainer, MetaTrainOutput, MetaTrainer};
pub use update::{adapt_embedded, inner_adapt, pure_meta_gradient, task_meta_gradient};
