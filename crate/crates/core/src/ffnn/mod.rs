//! Feed-forward networks: data model, evaluation and random construction.
//!
//! Weights are stored row-major per layer (one row per output neuron). The
//! last layer must be linear.

pub mod io;
pub mod stimulus;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::expansion::ActivationKind;
use crate::{Error, Result};

pub use io::{load_network, network_from_json, network_to_json, save_network};
pub use stimulus::{add_noise, fuzz_inputs, numeric_range, perturb_weights, StimulusSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }

    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
            Activation::Linear => v,
        }
    }

    /// The expandable activation, or `None` for linear layers.
    pub fn expansion_kind(self) -> Option<ActivationKind> {
        match self {
            Activation::Tanh => Some(ActivationKind::Tanh),
            Activation::Relu => Some(ActivationKind::Relu),
            Activation::Linear => None,
        }
    }
}

impl From<ActivationKind> for Activation {
    fn from(k: ActivationKind) -> Self {
        match k {
            ActivationKind::Tanh => Activation::Tanh,
            ActivationKind::Relu => Activation::Relu,
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
        match s.trim().to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "linear" | "identity" => Ok(Activation::Linear),
            other => Err(Error::Parameter(format!(
                "unknown activation {other:?} (expected tanh, relu or linear)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs x inputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    pub fn new(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != inputs * outputs {
            return Err(Error::Dimension {
                expected: inputs * outputs,
                got: weights.len(),
            });
        }
        if bias.len() != outputs {
            return Err(Error::Dimension {
                expected: outputs,
                got: bias.len(),
            });
        }
        Ok(Layer {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn row(&self, neuron: usize) -> &[f64] {
        &self.weights[neuron * self.inputs..(neuron + 1) * self.inputs]
    }

    pub fn weight(&self, neuron: usize, input: usize) -> f64 {
        self.weights[neuron * self.inputs + input]
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Affine part `W x + b`.
    pub fn preactivation(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|n| {
                self.row(n)
                    .iter()
                    .zip(x)
                    .fold(self.bias[n], |acc, (w, xi)| w.mul_add(*xi, acc))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    num_inputs: usize,
    layers: Vec<Layer>,
}

impl Network {
    /// Validates that dimensions chain and that the last layer is linear.
    pub fn new(num_inputs: usize, layers: Vec<Layer>) -> Result<Self> {
        if num_inputs == 0 {
            return Err(Error::Structure("a network needs at least one input".into()));
        }
        let Some(last) = layers.last() else {
            return Err(Error::Structure("a network needs at least one layer".into()));
        };
        if last.activation != Activation::Linear {
            return Err(Error::Structure(format!(
                "the output layer must be linear, found {}",
                last.activation
            )));
        }
        let mut width = num_inputs;
        for (i, l) in layers.iter().enumerate() {
            if l.inputs != width {
                return Err(Error::Structure(format!(
                    "layer {i} expects {} inputs but the previous layer provides {width}",
                    l.inputs
                )));
            }
            width = l.outputs;
        }
        Ok(Network { num_inputs, layers })
    }

    /// Random network with PyTorch-style default initialisation: weights and
    /// biases uniform in `±1/sqrt(fan_in)`.
    pub fn random(
        num_inputs: usize,
        hidden: &[usize],
        num_outputs: usize,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut fan_in = num_inputs;
        let widths = hidden.iter().copied().chain(std::iter::once(num_outputs));
        for (i, width) in widths.enumerate() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = (0..width * fan_in).map(|_| rng.random_range(-bound..=bound)).collect();
            let bias = (0..width).map(|_| rng.random_range(-bound..=bound)).collect();
            let act = if i == hidden.len() {
                Activation::Linear
            } else {
                activation
            };
            layers.push(Layer::new(fan_in, width, weights, bias, act)?);
            fan_in = width;
        }
        Network::new(num_inputs, layers)
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Widths of the hidden layers.
    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(|l| l.outputs).collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.num_inputs {
            return Err(Error::Dimension {
                expected: self.num_inputs,
                got: x.len(),
            });
        }
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut h = x.to_vec();
        for l in &self.layers {
            let mut v = l.preactivation(&h);
            for vi in v.iter_mut() {
                *vi = l.activation.apply(*vi);
            }
            h = v;
        }
        h
    }

    /// Forward pass over many inputs, in parallel.
    pub fn forward_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.par_iter().map(|x| self.forward(x)).collect()
    }

    /// Largest `|pre-activation|` over all non-output layers and all `xs`.
    pub fn max_abs_preactivation(&self, xs: &[Vec<f64>]) -> Result<f64> {
        let per_sample: Result<Vec<f64>> = xs
            .par_iter()
            .map(|x| {
                if x.len() != self.num_inputs {
                    return Err(Error::Dimension {
                        expected: self.num_inputs,
                        got: x.len(),
                    });
                }
                let mut h = x.clone();
                let mut worst: f64 = 0.0;
                for l in &self.layers[..self.layers.len() - 1] {
                    let v = l.preactivation(&h);
                    worst = v.iter().fold(worst, |a, b| a.max(b.abs()));
                    h = v.into_iter().map(|vi| l.activation.apply(vi)).collect();
                }
                Ok(worst)
            })
            .collect();
        Ok(per_sample?.into_iter().fold(0.0, f64::max))
    }
}
