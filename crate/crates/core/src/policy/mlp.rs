use super::{Observation, Policy};
use crate::compressor::{quantize, NamedTensors, Tensor, TensorPayload};
use crate::error::{Error, Result};
use crate::types::ActionVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn code(self) -> f32 {
        match self {
            Activation::Identity => 0.0,
            Activation::Relu => 1.0,
            Activation::Tanh => 2.0,
        }
    }

    fn from_code(code: f32) -> Result<Self> {
        match code.round() as i32 {
            0 => Ok(Activation::Identity),
            1 => Ok(Activation::Relu),
            2 => Ok(Activation::Tanh),
            other => Err(Error::Format(format!("unknown activation code {other}"))),
        }
    }

    fn apply(self, x: f32) -> f32 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }
}

/// Affine layer. Weight is `1 x 1 x out x in`, bias `1 x 1 x 1 x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl Dense {
    pub fn new(weight: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        let [n, c, out, _] = weight.shape();
        if n != 1 || c != 1 {
            return Err(Error::Shape(format!(
                "weight must be 1x1xOUTxIN, got {:?}",
                weight.shape()
            )));
        }
        if bias.shape() != [1, 1, 1, out] {
            return Err(Error::Shape(format!(
                "bias must be 1x1x1x{out}, got {:?}",
                bias.shape()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[3]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[2]
    }
}

/// Small feed-forward network over NCHW-unified rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyMlp {
    layers: Vec<Dense>,
}

impl TinyMlp {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Shape(format!(
                    "layer output {} feeds input {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// `input` is `N x 1 x 1 x in`; returns `N x 1 x 1 x out`.
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let [n, c, h, w] = input.shape();
        if c != 1 || h != 1 || w != self.in_dim() {
            return Err(Error::Shape(format!(
                "expected Nx1x1x{} input, got {:?}",
                self.in_dim(),
                input.shape()
            )));
        }
        let mut rows: Vec<f32> = input.data().to_vec();
        for layer in &self.layers {
            let in_dim = layer.in_dim();
            let mut next = Vec::with_capacity(n * layer.out_dim());
            for x in rows.chunks_exact(in_dim) {
                next.extend(
                    layer
                        .weight
                        .data()
                        .chunks_exact(in_dim)
                        .zip(layer.bias.data())
                        .map(|(w_row, b)| {
                            let z = w_row.iter().zip(x).fold(*b, |acc, (w, v)| acc + w * v);
                            layer.activation.apply(z)
                        }),
                );
            }
            rows = next;
        }
        Tensor::new([n, 1, 1, self.out_dim()], rows)
    }

    pub fn to_named(&self) -> NamedTensors {
        let mut out = Vec::with_capacity(self.layers.len() * 3);
        for (i, l) in self.layers.iter().enumerate() {
            out.push((
                format!("layer{i}.weight"),
                TensorPayload::Float(l.weight.clone()),
            ));
            out.push((
                format!("layer{i}.bias"),
                TensorPayload::Float(l.bias.clone()),
            ));
            out.push((
                format!("layer{i}.activation"),
                TensorPayload::Float(Tensor::row(vec![l.activation.code()]).unwrap()),
            ));
        }
        out
    }

    /// Same file with every tensor stored as int16.
    pub fn to_quantized_named(&self) -> Result<NamedTensors> {
        self.to_named()
            .into_iter()
            .map(|(name, t)| match t {
                TensorPayload::Float(f) => Ok((name, TensorPayload::Quantized(quantize(&f)?))),
                q => Ok((name, q)),
            })
            .collect()
    }

    /// Loads a network; quantized tensors are dequantized on load.
    pub fn from_named(tensors: &[(String, TensorPayload)]) -> Result<Self> {
        let find = |name: String| {
            tensors
                .iter()
                .find(|(n, _)| *n == name)
                .map(|(_, t)| t.to_float())
                .ok_or_else(|| Error::Format(format!("model is missing tensor `{name}`")))
        };
        let mut layers = Vec::new();
        let mut i = 0;
        while tensors
            .iter()
            .any(|(n, _)| *n == format!("layer{i}.weight"))
        {
            let act = find(format!("layer{i}.activation"))?;
            let code = *act
                .data()
                .first()
                .ok_or_else(|| Error::Format("empty activation tensor".into()))?;
            layers.push(Dense::new(
                find(format!("layer{i}.weight"))?,
                find(format!("layer{i}.bias"))?,
                Activation::from_code(code)?,
            )?);
            i += 1;
        }
        Self::new(layers)
    }
}

/// Chunking policy whose output layer emits `k * A` values.
#[derive(Debug, Clone)]
pub struct MlpPolicy {
    net: TinyMlp,
    chunk_size: usize,
    action_dim: usize,
}

impl MlpPolicy {
    pub fn new(net: TinyMlp, chunk_size: usize, action_dim: usize) -> Result<Self> {
        if net.out_dim() != chunk_size * action_dim {
            return Err(Error::Shape(format!(
                "network emits {} values, chunk needs {chunk_size} x {action_dim}",
                net.out_dim()
            )));
        }
        Ok(Self {
            net,
            chunk_size,
            action_dim,
        })
    }

    pub fn net(&self) -> &TinyMlp {
        &self.net
    }
}

impl Policy for MlpPolicy {
    fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    fn action_dim(&self) -> usize {
        self.action_dim
    }

    fn predict(&self, observation: &Observation, _start_step: usize) -> Result<Vec<ActionVector>> {
        let input = Tensor::row(observation.0.iter().map(|&v| v as f32).collect())?;
        let out = self.net.forward(&input)?;
        out.data()
            .chunks_exact(self.action_dim)
            .map(|c| ActionVector::new(c.iter().map(|&v| v as f64).collect()))
            .collect()
    }
}
