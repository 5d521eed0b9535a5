use std::collections::BTreeSet;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::generator::DomainGenerator;
use crate::error::{invalid, Result};
use crate::ndcore::LabeledBatch;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeKind {
    Pure,
    Mixed,
    Novel,
}

/// One labelled example together with the domain it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub x: Vec<T>,
    pub y: usize,
    pub domain: usize,
}

/// Episode shape: `n_way` classes, `k_shot` support and `q_queries` query examples per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskShape {
    pub n_way: usize,
    pub k_shot: usize,
    pub q_queries: usize,
}

impl TaskShape {
    pub fn new(n_way: usize, k_shot: usize, q_queries: usize) -> Self {
        Self {
            n_way,
            k_shot,
            q_queries,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_way == 0 || self.k_shot == 0 || self.q_queries == 0 {
            return Err(invalid(format!("degenerate task shape {self:?}")));
        }
        Ok(())
    }

    pub fn examples_per_task(&self) -> usize {
        self.n_way * (self.k_shot + self.q_queries)
    }
}

/// One N-way K-shot task. Episode labels are `0..n_way`; the source class
/// identities are not kept.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode<T> {
    pub shape: TaskShape,
    pub support: Vec<Example<T>>,
    pub query: Vec<Example<T>>,
    pub kind: EpisodeKind,
}

impl<T: Scalar> Episode<T> {
    pub fn n_way(&self) -> usize {
        self.shape.n_way
    }

    pub fn input_dim(&self) -> usize {
        self.support
            .first()
            .or(self.query.first())
            .map_or(0, |e| e.x.len())
    }

    pub fn support_batch(&self) -> Result<LabeledBatch<T>> {
        to_batch(&self.support, self.input_dim())
    }

    pub fn query_batch(&self) -> Result<LabeledBatch<T>> {
        to_batch(&self.query, self.input_dim())
    }

    pub fn examples(&self) -> impl Iterator<Item = &Example<T>> {
        self.support.iter().chain(&self.query)
    }

    pub fn domain_tags(&self) -> BTreeSet<usize> {
        self.examples().map(|e| e.domain).collect()
    }

    /// The single source domain of a pure or novel episode.
    pub fn single_domain(&self) -> Option<usize> {
        let tags = self.domain_tags();
        (tags.len() == 1).then(|| *tags.iter().next().expect("one tag"))
    }
}

fn to_batch<T: Scalar>(examples: &[Example<T>], dim: usize) -> Result<LabeledBatch<T>> {
    let mut b = LabeledBatch::with_capacity(dim, examples.len());
    for e in examples {
        b.push(&e.x, e.y)?;
    }
    Ok(b)
}

/// Builds an episode from `(generator, class)` per episode label.
fn assemble<T: Scalar, R: Rng + ?Sized>(
    classes: &[(&DomainGenerator, usize)],
    shape: TaskShape,
    kind: EpisodeKind,
    rng: &mut R,
) -> Result<Episode<T>> {
    let mut support = Vec::with_capacity(shape.n_way * shape.k_shot);
    let mut query = Vec::with_capacity(shape.n_way * shape.q_queries);
    for (label, &(gen, class)) in classes.iter().enumerate() {
        for _ in 0..shape.k_shot {
            support.push(Example {
                x: gen.sample(class, rng)?,
                y: label,
                domain: gen.domain_id(),
            });
        }
        for _ in 0..shape.q_queries {
            query.push(Example {
                x: gen.sample(class, rng)?,
                y: label,
                domain: gen.domain_id(),
            });
        }
    }
    Ok(Episode {
        shape,
        support,
        query,
        kind,
    })
}

fn single_domain_task<T: Scalar, R: Rng + ?Sized>(
    gen: &DomainGenerator,
    shape: TaskShape,
    kind: EpisodeKind,
    rng: &mut R,
) -> Result<Episode<T>> {
    shape.validate()?;
    if shape.n_way > gen.n_classes() {
        return Err(invalid(format!(
            "{}-way task from a pool of {} classes",
            shape.n_way,
            gen.n_classes()
        )));
    }
    let picked: Vec<_> = sample_indices(rng, gen.n_classes(), shape.n_way)
        .into_iter()
        .map(|c| (gen, c))
        .collect();
    assemble(&picked, shape, kind, rng)
}

/// N distinct classes of one domain, K support and Q query examples each.
pub fn sample_pure_task<T: Scalar, R: Rng + ?Sized>(
    gen: &DomainGenerator,
    shape: TaskShape,
    rng: &mut R,
) -> Result<Episode<T>> {
    single_domain_task(gen, shape, EpisodeKind::Pure, rng)
}

/// A task from a held-out domain, used only for evaluation.
pub fn sample_novel_task<T: Scalar, R: Rng + ?Sized>(
    gen: &DomainGenerator,
    shape: TaskShape,
    rng: &mut R,
) -> Result<Episode<T>> {
    single_domain_task(gen, shape, EpisodeKind::Novel, rng)
}

/// Each episode class comes from an independently, uniformly chosen domain.
/// With at least two domains and two classes the assignment is redrawn until
/// two or more domains are represented.
pub fn sample_mixed_task<T: Scalar, R: Rng + ?Sized>(
    gens: &[DomainGenerator],
    shape: TaskShape,
    rng: &mut R,
) -> Result<Episode<T>> {
    shape.validate()?;
    if gens.is_empty() {
        return Err(invalid("mixed task needs at least one domain"));
    }
    let m = gens.len();
    let assignment: Vec<usize> = loop {
        let a: Vec<usize> = (0..shape.n_way).map(|_| rng.random_range(0..m)).collect();
        if m < 2 || shape.n_way < 2 || a.iter().any(|&d| d != a[0]) {
            break a;
        }
    };
    let mut per_domain: Vec<Vec<usize>> = Vec::with_capacity(m);
    for (d, gen) in gens.iter().enumerate() {
        let wanted = assignment.iter().filter(|&&a| a == d).count();
        if wanted > gen.n_classes() {
            return Err(invalid(format!(
                "{wanted} classes requested from domain {} with {} classes",
                gen.domain_id(),
                gen.n_classes()
            )));
        }
        per_domain.push(sample_indices(rng, gen.n_classes(), wanted).into_vec());
    }
    let mut cursor = vec![0; m];
    let classes: Vec<_> = assignment
        .iter()
        .map(|&d| {
            let c = per_domain[d][cursor[d]];
            cursor[d] += 1;
            (&gens[d], c)
        })
        .collect();
    assemble(&classes, shape, EpisodeKind::Mixed, rng)
}
