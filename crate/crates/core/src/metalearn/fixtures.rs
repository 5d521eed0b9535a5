use std::collections::BTreeSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::TrainLoopConfig;
use super::state::MetaState;
use crate::domains::{
    make_domain, sample_pure_task, DomainGenerator, DomainSpec, EpisodeKind, GeneratorKind,
    TaskShape,
};
use crate::ndcore::{Activation, LabeledBatch, ParamVector, ShapeManifest};
use crate::prototypes::{EmbeddedEpisode, PrototypeStore};

pub(crate) const SHAPE: TaskShape = TaskShape {
    n_way: 3,
    k_shot: 2,
    q_queries: 3,
};

pub(crate) fn gens(m: usize) -> Vec<DomainGenerator> {
    (0..m)
        .map(|i| make_domain(DomainSpec::new(i, GeneratorKind::ALL[i], 1000 + i as u64)).unwrap())
        .collect()
}

/// Random extractor: one 8x10 layer of an 8-10-10-20 network.
pub(crate) fn phi(seed: u64) -> ParamVector<f64> {
    let m = Arc::new(ShapeManifest::mlp(8, &[10, 10], 20, Activation::Relu, 1).unwrap());
    ParamVector::glorot(m, 0..1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

pub(crate) fn state(m: usize, seed: u64, cfg: &TrainLoopConfig) -> MetaState<f64> {
    MetaState::init(
        phi(seed),
        (0..m).collect(),
        SHAPE.n_way,
        cfg,
        &mut ChaCha8Rng::seed_from_u64(seed + 1),
    )
    .unwrap()
}

pub(crate) fn pure_batch(
    gen: &DomainGenerator,
    phi: &ParamVector<f64>,
    n: usize,
    seed: u64,
) -> Vec<EmbeddedEpisode<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            EmbeddedEpisode::new(&sample_pure_task(gen, SHAPE, &mut rng).unwrap(), phi).unwrap()
        })
        .collect()
}

/// Embedded episode whose every feature row equals `point`, labels cycling over the classes.
pub(crate) fn constant_episode(
    point: &[f64],
    kind: EpisodeKind,
    domains: &[usize],
) -> EmbeddedEpisode<f64> {
    let batch = |rows: usize| {
        let mut b = LabeledBatch::with_capacity(point.len(), rows);
        for r in 0..rows {
            b.push(point, r % SHAPE.n_way).unwrap();
        }
        b
    };
    EmbeddedEpisode {
        support: batch(SHAPE.n_way * SHAPE.k_shot),
        query: batch(SHAPE.n_way * SHAPE.q_queries),
        kind,
        domains: domains.iter().copied().collect::<BTreeSet<_>>(),
        n_way: SHAPE.n_way,
    }
}

/// Stores whose domain `k` holds one task with every feature at `points[k]`.
pub(crate) fn point_stores(points: &[Vec<f64>]) -> Vec<PrototypeStore<f64>> {
    points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut s = PrototypeStore::new(k, p.len());
            s.fold_embedded(&constant_episode(p, EpisodeKind::Pure, &[k]))
                .unwrap();
            s
        })
        .collect()
}
