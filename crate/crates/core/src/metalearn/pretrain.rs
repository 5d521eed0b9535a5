use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use super::config::PretrainConfig;
use crate::domains::Corpus;
use crate::error::{invalid, Result};
use crate::ndcore::{
    adam_step, argmax, backward, forward_batch, AdamConfig, AdamState, LabeledBatch, ParamVector,
    ShapeManifest,
};
use crate::scalar::Scalar;

/// Result of non-episodic pre-training.
#[derive(Debug, Clone)]
pub struct PretrainOutcome<T> {
    /// Frozen extractor: the first `split_index` layers of the trained network.
    pub phi: ParamVector<T>,
    /// The whole trained network, head included.
    pub network: ParamVector<T>,
    /// Accuracy of `network` on the corpus after the last epoch.
    pub train_accuracy: f64,
}

/// Trains the full network with Adam on shuffled mini-batches of the corpus,
/// then keeps only the extractor layers.
pub fn pretrain<T: Scalar, R: Rng + ?Sized>(
    corpus: &Corpus<T>,
    manifest: &ShapeManifest,
    cfg: &PretrainConfig,
    rng: &mut R,
) -> Result<PretrainOutcome<T>> {
    if corpus.is_empty() {
        return Err(invalid("empty pre-training corpus"));
    }
    if manifest.output_dim() != corpus.n_classes {
        return Err(invalid(format!(
            "network has {} outputs for {} corpus classes",
            manifest.output_dim(),
            corpus.n_classes
        )));
    }
    if manifest.input_dim() != corpus.examples.dim() {
        return Err(invalid("network input width does not match the corpus"));
    }
    if cfg.batch_size == 0 {
        return Err(invalid("batch_size must be positive"));
    }
    let manifest = Arc::new(manifest.clone());
    let mut network = ParamVector::glorot(manifest.clone(), manifest.all_layers(), rng)?;
    let mut opt = AdamState::new(
        network.len(),
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
    );
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let data = &corpus.examples;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch = LabeledBatch::with_capacity(data.dim(), chunk.len());
            for &i in chunk {
                batch.push(data.row(i), data.labels()[i])?;
            }
            let (_, grad) = backward(&network, &batch, 0)?;
            network = adam_step(&mut opt, &network, &grad)?;
        }
    }
    let train_accuracy = accuracy(&network, data)?;
    let phi = network.slice_layers(manifest.extractor_layers())?;
    Ok(PretrainOutcome {
        phi,
        network,
        train_accuracy,
    })
}

/// Fraction of rows whose argmax output equals the label.
pub fn accuracy<T: Scalar>(params: &ParamVector<T>, batch: &LabeledBatch<T>) -> Result<f64> {
    if batch.is_empty() {
        return Err(invalid("accuracy of an empty batch"));
    }
    let cache = forward_batch(params, batch)?;
    let correct = batch
        .labels()
        .iter()
        .enumerate()
        .filter(|(r, &y)| argmax(cache.output_row(*r)) == y)
        .count();
    Ok(correct as f64 / batch.len() as f64)
}
