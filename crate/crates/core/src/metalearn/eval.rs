use super::state::MetaState;
use super::update::adapt_embedded;
use crate::domains::{Episode, EpisodeKind};
use crate::error::{invalid, Result};
use crate::ndcore::{argmax, blend, forward_batch, LabeledBatch, ParamVector};
use crate::prototypes::{DomainWeights, EmbeddedEpisode, PrototypeStore};
use crate::scalar::Scalar;

/// How the initialization for a novel task is formed from the meta-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightRule {
    /// Inverse task-to-domain distance weights.
    Similarity,
    /// Equal weight per domain (also the rule for a single pooled learner).
    Uniform,
}

/// Outcome of adapting to one novel task.
#[derive(Debug, Clone)]
pub struct NovelTaskResult<T> {
    pub accuracy: f64,
    pub weights: DomainWeights<T>,
    pub adapted: ParamVector<T>,
}

/// Fraction of query rows whose argmax logit equals the label (lowest index wins ties).
pub fn query_accuracy<T: Scalar>(theta: &ParamVector<T>, query: &LabeledBatch<T>) -> Result<f64> {
    if query.is_empty() {
        return Err(invalid("empty query set"));
    }
    let cache = forward_batch(theta, query)?;
    let correct = query
        .labels()
        .iter()
        .enumerate()
        .filter(|(r, &y)| argmax(cache.output_row(*r)) == y)
        .count();
    Ok(correct as f64 / query.len() as f64)
}

/// Blends the meta-parameters for the task, adapts on its support set and
/// scores the adapted subnetwork on its query set.
pub fn meta_test_embedded<T: Scalar>(
    state: &MetaState<T>,
    stores: &[PrototypeStore<T>],
    task: &EmbeddedEpisode<T>,
    rule: WeightRule,
    gamma: T,
    steps: usize,
) -> Result<NovelTaskResult<T>> {
    let weights = state.weights_for(&task.support, stores, rule == WeightRule::Uniform)?;
    let theta = blend(&state.thetas, &weights.alphas)?;
    let adapted = adapt_embedded(&theta, &task.support, gamma, steps)?;
    let accuracy = query_accuracy(&adapted, &task.query)?;
    Ok(NovelTaskResult {
        accuracy,
        weights,
        adapted,
    })
}

pub fn meta_test<T: Scalar>(
    state: &MetaState<T>,
    stores: &[PrototypeStore<T>],
    novel: &Episode<T>,
    rule: WeightRule,
    gamma: T,
    steps: usize,
) -> Result<NovelTaskResult<T>> {
    if novel.kind != EpisodeKind::Novel {
        return Err(invalid(format!(
            "meta-test expects a novel task, got {:?}",
            novel.kind
        )));
    }
    meta_test_embedded(
        state,
        stores,
        &EmbeddedEpisode::new(novel, &state.phi)?,
        rule,
        gamma,
        steps,
    )
}
