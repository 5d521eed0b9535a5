//! Synthetic multi-domain task universe: class-conditional generators,
//! episodic samplers for pure, mixed and novel tasks, and a non-episodic
//! pre-training corpus.

mod audit;
mod corpus;
mod episode;
mod generator;
mod seeds;

pub use audit::DomainAudit;
pub use corpus::{pretrain_corpus, Corpus};
pub use episode::{
    sample_mixed_task, sample_novel_task, sample_pure_task, Episode, EpisodeKind, Example,
    TaskShape,
};
pub use generator::{make_domain, DomainGenerator, DomainSpec, GeneratorKind, LATENT_DIM};
pub use seeds::{SeedStreams, Stream};
