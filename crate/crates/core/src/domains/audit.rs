use std::collections::BTreeMap;

use super::corpus::Corpus;
use super::episode::Episode;
use crate::scalar::Scalar;

/// Tally of consumed examples per domain tag.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DomainAudit {
    counts: BTreeMap<usize, u64>,
}

impl DomainAudit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_episode<T: Scalar>(&mut self, episode: &Episode<T>) {
        for e in episode.examples() {
            *self.counts.entry(e.domain).or_default() += 1;
        }
    }

    pub fn record_corpus<T: Scalar>(&mut self, corpus: &Corpus<T>) {
        *self.counts.entry(corpus.domain_id).or_default() += corpus.len() as u64;
    }

    pub fn merge(&mut self, other: &DomainAudit) {
        for (&d, &n) in &other.counts {
            *self.counts.entry(d).or_default() += n;
        }
    }

    pub fn count(&self, domain: usize) -> u64 {
        self.counts.get(&domain).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn domains(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&d, &n)| (d, n))
    }
}
