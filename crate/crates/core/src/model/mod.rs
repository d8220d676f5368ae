//! Plain residual super-resolution networks: `depth` 3×3 convolutions with
//! ReLU between them and the input added back at the output.
//!
//! A lightweight student is derived from a teacher layout by removing a fixed
//! fraction `ratio` of feature maps in every layer, which shrinks each middle
//! layer's parameters to roughly `(1 - ratio)^2` of the original.

mod checkpoint;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, CHECKPOINT_VERSION,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numcore::{
    conv2d_backward, conv2d_forward, relu_forward_inplace, relu_mask_inplace, ConvParams, Tensor,
};

pub const KERNEL: usize = 3;
const PAD: usize = 1;

/// Explanation attached to every FLOP figure this crate reports.
pub const FLOP_CONVENTION: &str =
    "FLOPs = 2 x multiply-accumulates of all convolutions (bias adds, ReLU and the residual add not counted)";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Feature maps of the full-width (teacher) layout.
    #[serde(default = "default_base_width")]
    pub base_width: usize,
    /// Fraction of feature maps removed, in `[0, 1)`.
    #[serde(default)]
    pub ratio: f64,
    #[serde(default = "default_in_channels")]
    pub in_channels: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_depth() -> usize {
    20
}
fn default_base_width() -> usize {
    64
}
fn default_in_channels() -> usize {
    1
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            depth: default_depth(),
            base_width: default_base_width(),
            ratio: 0.0,
            in_channels: default_in_channels(),
            seed: 0,
        }
    }
}

impl ModelSpec {
    /// Full-width layout with `width` feature maps.
    pub fn with_width(depth: usize, width: usize, seed: u64) -> Self {
        ModelSpec {
            depth,
            base_width: width,
            ratio: 0.0,
            in_channels: 1,
            seed,
        }
    }

    /// `round(base_width * (1 - ratio))`, rounding halves up.
    pub fn width(&self) -> usize {
        let w = self.base_width as f64 * (1.0 - self.ratio);
        (w + 0.5).floor().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.ratio) {
            return Err(Error::InvalidConfig(format!(
                "ratio {} not in [0, 1)",
                self.ratio
            )));
        }
        if self.width() < 1 {
            return Err(Error::InvalidConfig(format!(
                "base_width {} with ratio {} leaves no feature maps",
                self.base_width, self.ratio
            )));
        }
        if self.depth < 3 {
            return Err(Error::InvalidConfig(format!("depth {} < 3", self.depth)));
        }
        if self.in_channels < 1 {
            return Err(Error::InvalidConfig(
                "in_channels must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// `(out, in)` channel pairs of every layer in order.
    pub fn layer_channels(&self) -> Vec<(usize, usize)> {
        let f = self.width();
        let c = self.in_channels;
        let mut layers = Vec::with_capacity(self.depth);
        layers.push((f, c));
        layers.extend(std::iter::repeat_n((f, f), self.depth.saturating_sub(2)));
        layers.push((c, f));
        layers
    }
}

/// Exact number of stored scalars (weights and biases).
pub fn count_params(spec: &ModelSpec) -> usize {
    spec.layer_channels()
        .iter()
        .map(|&(o, i)| o * i * KERNEL * KERNEL + o)
        .sum()
}

/// Number of convolution weights, biases excluded. Published parameter
/// tables for this family of networks usually count this way.
pub fn count_weights(spec: &ModelSpec) -> usize {
    spec.layer_channels()
        .iter()
        .map(|&(o, i)| o * i * KERNEL * KERNEL)
        .sum()
}

/// FLOPs of a single padded 3×3 convolution on an `h × w` input.
pub fn layer_flops(out_ch: usize, in_ch: usize, h: usize, w: usize) -> u64 {
    2 * (h * w * out_ch * in_ch * KERNEL * KERNEL) as u64
}

/// FLOPs of one forward pass on an `h × w` input; see [`FLOP_CONVENTION`].
pub fn count_flops(spec: &ModelSpec, h: usize, w: usize) -> u64 {
    spec.layer_channels()
        .iter()
        .map(|&(o, i)| layer_flops(o, i, h, w))
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    spec: ModelSpec,
    layers: Vec<ConvParams>,
}

/// He-normal weights (`std = sqrt(2 / fan_in)`) and zero biases, drawn from a
/// ChaCha stream seeded with `spec.seed`.
pub fn build_network(spec: &ModelSpec) -> Result<Network> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layers = spec
        .layer_channels()
        .into_iter()
        .map(|(o, i)| {
            let fan_in = (i * KERNEL * KERNEL) as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
            let weights =
                Tensor::from_fn([o, i, KERNEL, KERNEL], |_, _, _, _| normal.sample(&mut rng));
            ConvParams {
                weights,
                biases: vec![0.0; o],
            }
        })
        .collect();
    Ok(Network {
        spec: spec.clone(),
        layers,
    })
}

/// Intermediate activations kept by [`Network::forward_train`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Input of every layer; entry 0 is the network input.
    layer_inputs: Vec<Tensor>,
}

/// Parameter gradients in layer order, plus the gradient for the input.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkGrads {
    pub layers: Vec<ConvParams>,
    pub input: Tensor,
}

impl NetworkGrads {
    pub fn zeros_like(net: &Network, input_shape: [usize; 4]) -> Self {
        NetworkGrads {
            layers: net
                .layers
                .iter()
                .map(|l| ConvParams::zeros(l.out_channels(), l.in_channels(), l.kernel()))
                .collect(),
            input: Tensor::zeros(input_shape),
        }
    }

    /// Adds `other`'s parameter gradients into `self`. Input gradients are
    /// left alone since they belong to different samples.
    pub fn accumulate(&mut self, other: &NetworkGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.data_mut().iter_mut().zip(b.weights.data()) {
                *x += y;
            }
            for (x, y) in a.biases.iter_mut().zip(&b.biases) {
                *x += y;
            }
        }
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.data(), l.biases.as_slice()])
            .collect()
    }
}

impl Network {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[ConvParams] {
        &self.layers
    }

    /// Assembles a network from explicit parameters, checking every layer
    /// shape against `spec`.
    pub fn from_layers(spec: ModelSpec, layers: Vec<ConvParams>) -> Result<Self> {
        spec.validate()?;
        let expected = spec.layer_channels();
        if expected.len() != layers.len() {
            return Err(Error::shape(
                "Network::from_layers",
                expected.len(),
                layers.len(),
            ));
        }
        for (l, &(o, i)) in layers.iter().zip(&expected) {
            if l.weights.shape() != [o, i, KERNEL, KERNEL] || l.biases.len() != o {
                return Err(Error::shape(
                    "Network::from_layers",
                    [o, i, KERNEL, KERNEL],
                    l.weights.shape(),
                ));
            }
        }
        Ok(Network { spec, layers })
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(ConvParams::num_params).sum()
    }

    /// Parameter arrays in storage order: `w0, b0, w1, b1, ...`.
    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.data(), l.biases.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.data_mut(), l.biases.as_mut_slice()])
            .collect()
    }

    /// Human-readable name of parameter array `index` (as used by the optimizer).
    pub fn param_name(&self, index: usize) -> String {
        let kind = if index % 2 == 0 { "weights" } else { "biases" };
        format!("layer {} {}", index / 2, kind)
    }

    pub fn zero_params(&mut self) {
        for p in self.param_slices_mut() {
            p.fill(0.0);
        }
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.c() != self.spec.in_channels {
            return Err(Error::shape(
                "Network::forward",
                x.shape(),
                self.layers[0].weights.shape(),
            ));
        }
        Ok(())
    }

    /// `x + residual(x)`; output shape equals input shape. Not clamped.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut h = conv2d_forward(x, &self.layers[0], PAD)?;
        relu_forward_inplace(&mut h);
        for layer in &self.layers[1..last] {
            h = conv2d_forward(&h, layer, PAD)?;
            relu_forward_inplace(&mut h);
        }
        let mut out = conv2d_forward(&h, &self.layers[last], PAD)?;
        out.add_assign(x)?;
        Ok(out)
    }

    pub fn forward_train(&self, x: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(x)?;
        let last = self.layers.len() - 1;
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        layer_inputs.push(x.clone());
        for layer in &self.layers[..last] {
            let mut h = conv2d_forward(layer_inputs.last().expect("non-empty"), layer, PAD)?;
            relu_forward_inplace(&mut h);
            layer_inputs.push(h);
        }
        let mut out = conv2d_forward(
            layer_inputs.last().expect("non-empty"),
            &self.layers[last],
            PAD,
        )?;
        out.add_assign(x)?;
        Ok((out, ForwardCache { layer_inputs }))
    }

    /// Gradients of `Σ grad_out ⊙ forward(x)` for the input cached in `cache`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Tensor) -> Result<NetworkGrads> {
        let input = &cache.layer_inputs[0];
        if grad_out.shape() != input.shape() {
            return Err(Error::shape(
                "Network::backward",
                input.shape(),
                grad_out.shape(),
            ));
        }
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_out.clone();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let cg = conv2d_backward(&cache.layer_inputs[l], layer, &g, PAD)?;
            layer_grads.push(ConvParams {
                weights: cg.weights,
                biases: cg.biases,
            });
            g = cg.input;
            if l > 0 {
                // layer_inputs[l] is a ReLU output, positive exactly where its pre-activation was
                relu_mask_inplace(&cache.layer_inputs[l], &mut g);
            }
        }
        layer_grads.reverse();
        g.add_assign(grad_out)?;
        Ok(NetworkGrads {
            layers: layer_grads,
            input: g,
        })
    }

    /// SHA-256 over the spec and every parameter's little-endian bytes.
    ///
    /// Two networks share a digest exactly when their weights are bitwise equal.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&self.spec).expect("spec serializes"));
        for p in self.param_slices() {
            for v in p {
                hasher.update(v.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}
