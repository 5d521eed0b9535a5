use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Method};
use crate::domains::{
    make_domain, pretrain_corpus, sample_novel_task, DomainAudit, DomainGenerator, SeedStreams,
    Stream,
};
use crate::error::{Error, Result};
use crate::metalearn::{
    maml_train, meta_test_embedded, meta_train, pretrain, Checkpoint, MetaState, PretrainOutcome,
    WeightRule,
};
use crate::ndcore::{argmax, squared_distance, ParamVector};
use crate::prototypes::EmbeddedEpisode;

/// Accuracy summary of one (method, holdout, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: Method,
    pub holdout_id: usize,
    pub seed: u64,
    pub n_way: usize,
    pub k_shot: usize,
    pub eval_tasks: usize,
    pub mean_accuracy: f64,
    pub ci95_halfwidth: f64,
    pub per_task_accuracies: Vec<f64>,
    pub wall_time: f64,
    /// Holdout-domain examples consumed before meta-testing began.
    pub holdout_examples_before_test: u64,
    pub pretrain_accuracy: f64,
}

/// Sample mean and `1.96 * sample_std / sqrt(n)`; the half-width is zero for a single value.
pub fn mean_and_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

fn generators(cfg: &ExperimentConfig) -> Result<(Vec<DomainGenerator>, DomainGenerator)> {
    let seen = cfg
        .seen_specs()
        .into_iter()
        .map(make_domain)
        .collect::<Result<Vec<_>>>()?;
    let holdout = make_domain(
        cfg.spec(cfg.holdout_id)
            .cloned()
            .ok_or_else(|| Error::Config("unknown holdout".into()))?,
    )?;
    Ok((seen, holdout))
}

/// Pre-trains the extractor on the designated seen domain.
pub fn pretrain_stage(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(PretrainOutcome<f64>, DomainAudit)> {
    cfg.validate()?;
    let streams = SeedStreams::new(seed);
    let spec = cfg
        .spec(cfg.pretrain_domain_id)
        .cloned()
        .ok_or_else(|| Error::Config("unknown pretrain domain".into()))?;
    let gen = make_domain(spec)?;
    let corpus = pretrain_corpus::<f64, _>(
        &gen,
        cfg.pretrain.per_class,
        &mut streams.stream(Stream::PretrainCorpus),
    )?;
    let mut audit = DomainAudit::new();
    audit.record_corpus(&corpus);
    let outcome = pretrain(
        &corpus,
        &cfg.manifest()?,
        &cfg.pretrain,
        &mut streams.stream(Stream::Pretrain),
    )?;
    Ok((outcome, audit))
}

/// Meta-trains according to `cfg.method`; the result is a checkpoint
/// (no thetas for the nearest-prototype baseline, one for pooled MAML).
pub fn train_stage(
    cfg: &ExperimentConfig,
    seed: u64,
    phi: ParamVector<f64>,
    audit: &mut DomainAudit,
) -> Result<Checkpoint<f64>> {
    let streams = SeedStreams::new(seed);
    let (seen, _) = generators(cfg)?;
    let train_cfg = cfg.train_config();
    let (state, stores) = match cfg.method {
        m if m.is_cosml() => {
            let out = meta_train(&seen, cfg.task_shape(), phi, &train_cfg, &streams)?;
            audit.merge(&out.audit);
            (out.state, out.stores)
        }
        Method::MamlPooled => {
            let (state, a) = maml_train(&seen, cfg.task_shape(), phi, &train_cfg, &streams)?;
            audit.merge(&a);
            (state, Vec::new())
        }
        _ => (
            MetaState::from_thetas(phi, Vec::new(), Vec::new(), train_cfg.beta)?,
            Vec::new(),
        ),
    };
    Ok(Checkpoint {
        state,
        stores,
        config_echo: cfg.to_json(),
    })
}

/// Accuracy of classifying each query point by its nearest episode-class
/// mean of support features (lowest class index on ties).
pub fn nearest_prototype_accuracy(task: &EmbeddedEpisode<f64>) -> Result<f64> {
    let dim = task.feature_dim();
    let mut means = vec![vec![0.0; dim]; task.n_way];
    let mut counts = vec![0usize; task.n_way];
    for (row, &y) in task.support.rows().zip(task.support.labels()) {
        means[y].iter_mut().zip(row).for_each(|(m, v)| *m += v);
        counts[y] += 1;
    }
    for (m, &c) in means.iter_mut().zip(&counts) {
        m.iter_mut().for_each(|v| *v /= c.max(1) as f64);
    }
    if task.query.is_empty() {
        return Err(Error::InvalidInput("empty query set".into()));
    }
    let correct = task
        .query
        .rows()
        .zip(task.query.labels())
        .filter(|(row, &y)| {
            let neg_dist: Vec<f64> = means.iter().map(|m| -squared_distance(m, row)).collect();
            argmax(&neg_dist) == y
        })
        .count();
    Ok(correct as f64 / task.query.len() as f64)
}

/// Per-task query accuracies on `cfg.eval_tasks` novel tasks from the holdout domain.
/// The novel-task stream depends only on the seed, so every method sees the same tasks.
pub fn evaluate(cfg: &ExperimentConfig, seed: u64, model: &Checkpoint<f64>) -> Result<Vec<f64>> {
    let (_, holdout) = generators(cfg)?;
    let mut rng = SeedStreams::new(seed).stream(Stream::MetaTest);
    let gamma = cfg.train.gamma;
    let steps = cfg.train.inner_steps;
    let mut out = Vec::with_capacity(cfg.eval_tasks);
    for _ in 0..cfg.eval_tasks {
        let episode = sample_novel_task(&holdout, cfg.task_shape(), &mut rng)?;
        let task = EmbeddedEpisode::new(&episode, &model.state.phi)?;
        let acc = match cfg.method {
            Method::NearestPrototype => nearest_prototype_accuracy(&task)?,
            Method::CosmlUniform | Method::MamlPooled => {
                meta_test_embedded(
                    &model.state,
                    &model.stores,
                    &task,
                    WeightRule::Uniform,
                    gamma,
                    steps,
                )?
                .accuracy
            }
            Method::Cosml | Method::CosmlNoMixed => {
                meta_test_embedded(
                    &model.state,
                    &model.stores,
                    &task,
                    WeightRule::Similarity,
                    gamma,
                    steps,
                )?
                .accuracy
            }
        };
        out.push(acc);
    }
    Ok(out)
}

/// Pre-train, meta-train and evaluate one method on one holdout for one seed.
pub fn run_method(cfg: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    let started = Instant::now();
    let (pre, audit) = pretrain_stage(cfg, seed)?;
    let mut result = run_pretrained(cfg, seed, &pre, audit)?;
    result.wall_time = started.elapsed().as_secs_f64();
    Ok(result)
}

/// Meta-train and evaluate on top of an extractor already produced by
/// [`pretrain_stage`] for the same config and seed; `audit` is the
/// pre-training audit. Wall time covers only this stage.
pub fn run_pretrained(
    cfg: &ExperimentConfig,
    seed: u64,
    pre: &PretrainOutcome<f64>,
    mut audit: DomainAudit,
) -> Result<RunResult> {
    let started = Instant::now();
    cfg.validate()?;
    let model = train_stage(cfg, seed, pre.phi.clone(), &mut audit)?;
    let leaked = audit.count(cfg.holdout_id);
    if leaked > 0 {
        return Err(Error::Precondition(format!(
            "{leaked} holdout examples were consumed before meta-testing"
        )));
    }
    let per_task = evaluate(cfg, seed, &model)?;
    let (mean, ci) = mean_and_ci95(&per_task);
    Ok(RunResult {
        method: cfg.method,
        holdout_id: cfg.holdout_id,
        seed,
        n_way: cfg.n_way,
        k_shot: cfg.k_shot,
        eval_tasks: cfg.eval_tasks,
        mean_accuracy: mean,
        ci95_halfwidth: ci,
        per_task_accuracies: per_task,
        wall_time: started.elapsed().as_secs_f64(),
        holdout_examples_before_test: leaked,
        pretrain_accuracy: pre.train_accuracy,
    })
}
