use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config, invalid, Error, Result};
use crate::scalar::Scalar;

/// Latent dimensionality of every generator.
pub const LATENT_DIM: usize = 2;

/// Every layout sits around this latent point, so each domain's embedding
/// gives it its own mean in input space.
const LATENT_CENTRE: [f64; 2] = [4.0, 0.0];
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Blobs,
    Rings,
    Spirals,
    Stripes,
    Moons,
}

impl GeneratorKind {
    pub const ALL: [GeneratorKind; 5] = [
        GeneratorKind::Blobs,
        GeneratorKind::Rings,
        GeneratorKind::Spirals,
        GeneratorKind::Stripes,
        GeneratorKind::Moons,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Blobs => "blobs",
            GeneratorKind::Rings => "rings",
            GeneratorKind::Spirals => "spirals",
            GeneratorKind::Stripes => "stripes",
            GeneratorKind::Moons => "moons",
        }
    }
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| config(format!("unknown generator kind `{s}`")))
    }
}

fn default_latent_dim() -> usize {
    LATENT_DIM
}
fn default_input_dim() -> usize {
    8
}
fn default_noise_sigma() -> f64 {
    0.1
}
fn default_n_classes() -> usize {
    20
}

/// Description of one synthetic domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub domain_id: usize,
    pub generator_kind: GeneratorKind,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    #[serde(default = "default_input_dim")]
    pub input_dim: usize,
    pub embed_seed: u64,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "default_n_classes")]
    pub n_classes: usize,
}

impl DomainSpec {
    pub fn new(domain_id: usize, generator_kind: GeneratorKind, embed_seed: u64) -> Self {
        Self {
            domain_id,
            generator_kind,
            latent_dim: LATENT_DIM,
            input_dim: default_input_dim(),
            embed_seed,
            noise_sigma: default_noise_sigma(),
            n_classes: default_n_classes(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim != LATENT_DIM {
            return Err(config(format!(
                "latent_dim must be {LATENT_DIM}, got {}",
                self.latent_dim
            )));
        }
        if self.input_dim < self.latent_dim {
            return Err(config(format!(
                "input_dim {} below latent_dim {}",
                self.input_dim, self.latent_dim
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(config(format!(
                "noise_sigma must be finite and >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.n_classes < 2 {
            return Err(config("a domain needs at least two classes"));
        }
        Ok(())
    }
}

/// Class-conditional sampler for one domain: a latent 2-D structure per
/// class, a fixed random linear embedding into input space, and isotropic
/// Gaussian noise.
#[derive(Debug, Clone)]
pub struct DomainGenerator {
    spec: DomainSpec,
    /// `input_dim x 2`, row-major.
    embedding: Vec<f64>,
}

pub fn make_domain(spec: DomainSpec) -> Result<DomainGenerator> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.embed_seed);
    let scale = 1.0 / (LATENT_DIM as f64).sqrt();
    let embedding = (0..spec.input_dim * LATENT_DIM)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(DomainGenerator { spec, embedding })
}

impl DomainGenerator {
    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn domain_id(&self) -> usize {
        self.spec.domain_id
    }

    pub fn n_classes(&self) -> usize {
        self.spec.n_classes
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    /// Noise-free latent point of `class` at position `u` in `[0, 1)` along its structure.
    pub fn latent(&self, class: usize, u: f64) -> [f64; 2] {
        let [x, y] = self.layout(class, u);
        [x + LATENT_CENTRE[0], y + LATENT_CENTRE[1]]
    }

    fn layout(&self, class: usize, u: f64) -> [f64; 2] {
        let n = self.spec.n_classes;
        match self.spec.generator_kind {
            GeneratorKind::Blobs => {
                let r = 3.0 * ((class as f64 + 0.5) / n as f64).sqrt();
                let a = class as f64 * GOLDEN_ANGLE;
                [r * a.cos(), r * a.sin()]
            }
            GeneratorKind::Rings => {
                let rings = 4;
                let arcs = n.div_ceil(rings);
                let ring = class % rings;
                let span = 2.0 * PI / arcs as f64;
                let a = (class / rings) as f64 * span + (u * 0.8 + 0.1) * span + ring as f64 * 0.5;
                let r = 1.0 + ring as f64;
                [r * a.cos(), r * a.sin()]
            }
            GeneratorKind::Spirals => {
                let arm = (class % 2) as f64;
                let segments = n.div_ceil(2);
                let seg = (class / 2) as f64;
                let t = (seg + 0.1 + 0.8 * u) * (3.0 * PI / segments as f64);
                let r = 0.4 + 0.35 * t;
                let a = t + arm * PI;
                [r * a.cos(), r * a.sin()]
            }
            GeneratorKind::Stripes => {
                let y = (class as f64 - (n as f64 - 1.0) / 2.0) * 0.45;
                let x = -1.5 + 3.0 * u + 0.3 * (class % 3) as f64;
                // rotated so no stripe is axis-aligned in latent space
                let (s, c) = (0.6f64).sin_cos();
                [c * x - s * y, s * x + c * y]
            }
            GeneratorKind::Moons => {
                let pair = class / 2;
                let cols = 4;
                let (cx, cy) = (
                    (pair % cols) as f64 * 3.2 - 4.8,
                    (pair / cols) as f64 * 3.2 - 3.2,
                );
                let a = PI * (0.05 + 0.9 * u);
                if class.is_multiple_of(2) {
                    [cx + a.cos(), cy + a.sin()]
                } else {
                    [cx + 1.0 - a.cos(), cy + 0.5 - a.sin()]
                }
            }
        }
    }

    /// Mean latent point of `class`, by composite Simpson quadrature over `u`.
    pub fn latent_mean(&self, class: usize) -> [f64; 2] {
        const INTERVALS: usize = 2000;
        let h = 1.0 / INTERVALS as f64;
        let mut acc = [0.0; 2];
        for i in 0..=INTERVALS {
            let w = if i == 0 || i == INTERVALS {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let p = self.latent(class, i as f64 * h);
            acc[0] += w * p[0];
            acc[1] += w * p[1];
        }
        [acc[0] * h / 3.0, acc[1] * h / 3.0]
    }

    pub fn embed(&self, z: [f64; 2]) -> Vec<f64> {
        self.embedding
            .chunks_exact(LATENT_DIM)
            .map(|row| row[0] * z[0] + row[1] * z[1])
            .collect()
    }

    /// Mean of `class` in input space (noise has zero mean).
    pub fn class_mean(&self, class: usize) -> Vec<f64> {
        self.embed(self.latent_mean(class))
    }

    /// Deterministic sample given a structure position and a noise stream.
    pub fn sample_at<T: Scalar, R: Rng + ?Sized>(
        &self,
        class: usize,
        u: f64,
        noise: &mut R,
    ) -> Vec<T> {
        let x = self.embed(self.latent(class, u));
        let sigma = self.spec.noise_sigma;
        x.into_iter()
            .map(|v| {
                let eps: f64 = if sigma > 0.0 {
                    noise.sample(StandardNormal)
                } else {
                    0.0
                };
                T::lit(v + sigma * eps)
            })
            .collect()
    }

    pub fn sample<T: Scalar, R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> Result<Vec<T>> {
        if class >= self.spec.n_classes {
            return Err(invalid(format!(
                "class {class} outside pool of {}",
                self.spec.n_classes
            )));
        }
        let u: f64 = rng.random();
        Ok(self.sample_at(class, u, rng))
    }
}
