//! Dense multilayer perceptrons and their parameter containers.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Tape, Tensor, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    fn record(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Identity => x,
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
            Activation::Sigmoid => tape.sigmoid(x),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::parse(
                "activation",
                format!("unknown activation `{other}`"),
            )),
        }
    }
}

/// What a parameter set is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Encoder,
    Discriminator,
    Head,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Encoder => "encoder",
            Role::Discriminator => "discriminator",
            Role::Head => "head",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One affine layer `act(x W + b)` with `W: [in, out]` and `b: [1, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub role: Role,
    pub layers: Vec<Layer>,
}

/// Tape handles for one bound copy of a [`ModelParams`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<(Var, Var)>,
}

/// Per-layer `(weight, bias)` gradients, aligned with [`ModelParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<(Tensor, Tensor)>,
}

impl ParamGrads {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| {
                    (
                        Tensor::zeros(l.weight.rows(), l.weight.cols()),
                        Tensor::zeros(1, l.bias.cols()),
                    )
                })
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .map(|(w, b)| w.max_abs().max(b.max_abs()))
            .fold(0.0, f64::max)
    }
}

impl ModelParams {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    ///
    /// `dims` lists layer widths from input to output; hidden layers use
    /// `hidden` and the last layer uses `output`.
    pub fn init<R: Rng + ?Sized>(
        role: Role,
        dims: &[usize],
        hidden: Activation,
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::shape(
                "init",
                format!("need at least two positive widths, got {dims:?}"),
            ));
        }
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-limit..limit))
                    .collect();
                Layer {
                    weight: Tensor::new([fan_in, fan_out], data).expect("sized above"),
                    bias: Tensor::zeros(1, fan_out),
                    activation: if i + 2 == dims.len() { output } else { hidden },
                }
            })
            .collect();
        Ok(Self { role, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// Forward pass without recording.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &self.layers {
            let mut z = h.matmul(&layer.weight)?;
            let cols = z.cols();
            let bias = layer.bias.data();
            for (i, v) in z.data_mut().iter_mut().enumerate() {
                *v = layer.activation.apply(*v + bias[i % cols]);
            }
            h = z;
        }
        Ok(h)
    }

    /// Places the parameters on `tape` as leaves.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound {
            vars: self
                .layers
                .iter()
                .map(|l| (tape.leaf(l.weight.clone()), tape.leaf(l.bias.clone())))
                .collect(),
        }
    }

    /// Recorded forward pass using previously bound parameters.
    pub fn forward_tape(&self, tape: &mut Tape, bound: &Bound, x: Var) -> Result<Var> {
        let mut h = x;
        for (layer, &(w, b)) in self.layers.iter().zip(&bound.vars) {
            let z = tape.matmul(h, w)?;
            let z = tape.add(z, b)?;
            h = layer.activation.record(tape, z);
        }
        Ok(h)
    }

    /// Flattened parameters: each layer's weight (row-major) then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(l.bias.data());
        }
        out
    }

    /// Inverse of [`ModelParams::flatten`] for a model of the same shape.
    pub fn load_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::shape(
                "load_flat",
                format!(
                    "{} values for {} parameters",
                    values.len(),
                    self.param_count()
                ),
            ));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let n = l.weight.len();
            l.weight.data_mut().copy_from_slice(&values[at..at + n]);
            at += n;
            let n = l.bias.len();
            l.bias.data_mut().copy_from_slice(&values[at..at + n]);
            at += n;
        }
        Ok(())
    }

    /// A zero-valued model with the given widths and activations.
    pub fn zeros(role: Role, dims: &[usize], activations: &[Activation]) -> Result<Self> {
        if dims.len() != activations.len() + 1 || dims.contains(&0) {
            return Err(Error::shape(
                "zeros",
                format!(
                    "{} widths for {} activations",
                    dims.len(),
                    activations.len()
                ),
            ));
        }
        Ok(Self {
            role,
            layers: dims
                .windows(2)
                .zip(activations)
                .map(|(w, &activation)| Layer {
                    weight: Tensor::zeros(w[0], w[1]),
                    bias: Tensor::zeros(1, w[1]),
                    activation,
                })
                .collect(),
        })
    }
}

impl Bound {
    /// Extracts this model's gradients; unreachable parameters get zeros.
    pub fn grads(&self, grads: &Gradients) -> ParamGrads {
        ParamGrads {
            layers: self
                .vars
                .iter()
                .map(|&(w, b)| {
                    (
                        grads.get(w).expect("leaf gradient").clone(),
                        grads.get(b).expect("leaf gradient").clone(),
                    )
                })
                .collect(),
        }
    }
}
