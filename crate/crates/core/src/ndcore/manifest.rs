use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Nonlinearity applied after every hidden layer. The output layer is always identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(invalid(format!("unknown activation `{other}`"))),
        }
    }
}

/// Layer geometry of a fully connected network plus the boundary between the
/// frozen feature extractor (layers `0..split_index`) and the task subnetwork.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShapeManifest {
    layer_dims: Vec<(usize, usize)>,
    activation: Activation,
    split_index: usize,
}

impl ShapeManifest {
    pub fn new(
        layer_dims: Vec<(usize, usize)>,
        activation: Activation,
        split_index: usize,
    ) -> Result<Self> {
        if layer_dims.is_empty() {
            return Err(invalid("manifest needs at least one layer"));
        }
        if let Some(&(i, o)) = layer_dims.iter().find(|(i, o)| *i == 0 || *o == 0) {
            return Err(invalid(format!("zero-width layer {i}x{o}")));
        }
        for (l, pair) in layer_dims.windows(2).enumerate() {
            if pair[0].1 != pair[1].0 {
                return Err(invalid(format!(
                    "layer {l} emits {} features but layer {} expects {}",
                    pair[0].1,
                    l + 1,
                    pair[1].0
                )));
            }
        }
        // A single-layer manifest has no extractor; it is allowed for plain
        // heads and oracle tests, with split 0.
        let n = layer_dims.len();
        let split_ok = if n == 1 {
            split_index == 0
        } else {
            split_index > 0 && split_index < n
        };
        if !split_ok {
            return Err(invalid(format!(
                "split_index {split_index} invalid for {n} layers"
            )));
        }
        Ok(Self {
            layer_dims,
            activation,
            split_index,
        })
    }

    /// `input → hidden^depth → output` with the given split.
    pub fn mlp(
        input: usize,
        hidden: &[usize],
        output: usize,
        activation: Activation,
        split_index: usize,
    ) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output);
        let dims = widths.windows(2).map(|w| (w[0], w[1])).collect();
        Self::new(dims, activation, split_index)
    }

    pub fn layer_dims(&self) -> &[(usize, usize)] {
        &self.layer_dims
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn split_index(&self) -> usize {
        self.split_index
    }

    pub fn num_layers(&self) -> usize {
        self.layer_dims.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0].0
    }

    pub fn output_dim(&self) -> usize {
        self.layer_dims[self.num_layers() - 1].1
    }

    /// Width of the extractor output, i.e. of the feature space.
    pub fn feature_dim(&self) -> usize {
        match self.split_index {
            0 => self.input_dim(),
            s => self.layer_dims[s - 1].1,
        }
    }

    pub fn extractor_layers(&self) -> Range<usize> {
        0..self.split_index
    }

    pub fn task_layers(&self) -> Range<usize> {
        self.split_index..self.num_layers()
    }

    pub fn all_layers(&self) -> Range<usize> {
        0..self.num_layers()
    }

    pub fn layer_len(&self, layer: usize) -> usize {
        let (i, o) = self.layer_dims[layer];
        i * o + o
    }

    /// Weights plus biases over a contiguous layer range.
    pub fn param_count(&self, layers: Range<usize>) -> usize {
        layers.map(|l| self.layer_len(l)).sum()
    }

    /// Whether the layer gets the hidden nonlinearity (every layer but the last).
    pub fn is_hidden(&self, layer: usize) -> bool {
        layer + 1 < self.num_layers()
    }

    /// Same lower layers with a different output width, e.g. a 20-way
    /// pre-training head versus an N-way episode head.
    pub fn with_output_dim(&self, output: usize) -> Result<Self> {
        let mut dims = self.layer_dims.clone();
        let last = dims.len() - 1;
        dims[last].1 = output;
        Self::new(dims, self.activation, self.split_index)
    }

    pub fn with_split(&self, split_index: usize) -> Result<Self> {
        Self::new(self.layer_dims.clone(), self.activation, split_index)
    }

    /// Whether both manifests agree on the given layers.
    pub fn layers_match(&self, other: &Self, layers: Range<usize>) -> bool {
        self.activation == other.activation
            && layers.end <= self.num_layers()
            && layers.end <= other.num_layers()
            && layers
                .clone()
                .all(|l| self.layer_dims[l] == other.layer_dims[l])
            && layers
                .clone()
                .all(|l| self.is_hidden(l) == other.is_hidden(l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_incompatible_layers() {
        assert!(ShapeManifest::new(vec![(4, 3), (2, 2)], Activation::Relu, 1).is_err());
    }

    #[test]
    fn split_must_be_interior() {
        let dims = vec![(4, 3), (3, 2)];
        assert!(ShapeManifest::new(dims.clone(), Activation::Relu, 0).is_err());
        assert!(ShapeManifest::new(dims.clone(), Activation::Relu, 2).is_err());
        assert!(ShapeManifest::new(dims, Activation::Relu, 1).is_ok());
    }

    #[test]
    fn counts_weights_and_biases() {
        let m = ShapeManifest::mlp(8, &[64, 64, 64, 64], 5, Activation::Relu, 2).unwrap();
        assert_eq!(
            m.param_count(m.all_layers()),
            8 * 64 + 64 + 3 * (64 * 64 + 64) + 64 * 5 + 5
        );
        assert_eq!(m.feature_dim(), 64);
        assert_eq!(m.task_layers(), 2..5);
    }

    #[test]
    fn activation_names_parse_back() {
        for a in [Activation::Relu, Activation::Tanh, Activation::Identity] {
            assert_eq!(a.name().parse::<Activation>().unwrap(), a);
        }
        assert!("sigmoid".parse::<Activation>().is_err());
    }
}
