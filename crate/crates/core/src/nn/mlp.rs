use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::{dot, Matrix};
use crate::rng;
use crate::{Error, Result};

static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);

fn fresh_stamp() -> u64 {
    NEXT_STAMP.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `out × in`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::Dimension {
                context: "layer bias",
                expected: weights.rows(),
                actual: bias.len(),
            });
        }
        if let Some(index) = bias.iter().position(|b| !b.is_finite()) {
            return Err(Error::NonFinite {
                context: "layer bias",
                index,
            });
        }
        Ok(DenseLayer {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    fn num_params(&self) -> usize {
        self.weights.rows() * self.weights.cols() + self.bias.len()
    }
}

/// Shape of the kernel network: `input_dim → hidden… → 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl KernelArch {
    /// Two tanh hidden layers of width 64 over a concatenated `(query, key)` pair.
    pub fn for_features(d: usize) -> Self {
        KernelArch {
            input_dim: 2 * d,
            hidden: vec![64, 64],
            activation: Activation::Tanh,
        }
    }

    fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(self.input_dim);
        w.extend_from_slice(&self.hidden);
        w.push(1);
        w
    }
}

/// The shared kernel subnetwork. Maps a concatenated `(query, key)` vector
/// to a scalar log-kernel score.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Checkpoint", into = "Checkpoint")]
pub struct KernelMLP {
    layers: Vec<DenseLayer>,
    input_dim: usize,
    stamp: u64,
}

impl PartialEq for KernelMLP {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.input_dim == other.input_dim
    }
}

/// Activation trace of one batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    stamp: u64,
    /// `activations[0]` is the input; `activations[l + 1]` is layer `l`'s output.
    activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn batch_len(&self) -> usize {
        self.activations[0].rows()
    }
}

impl KernelMLP {
    /// Glorot-uniform weights, zero biases.
    pub fn new(arch: &KernelArch, seed: u64) -> Result<Self> {
        if arch.input_dim == 0 || arch.hidden.contains(&0) {
            return Err(Error::invalid("kernel layer widths must be positive"));
        }
        let widths = arch.widths();
        let mut rng = rng::stream(seed, &[rng::label("kernel-init")]);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (l, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..=limit))
                .collect();
            let activation = if l + 2 == widths.len() {
                Activation::Identity
            } else {
                arch.activation
            };
            layers.push(DenseLayer::new(
                Matrix::new(fan_out, fan_in, data)?,
                vec![0.0; fan_out],
                activation,
            )?);
        }
        Self::from_layers(layers)
    }

    /// All weights and biases zero; every score is 0.
    pub fn zeros(arch: &KernelArch) -> Result<Self> {
        let mut net = Self::new(arch, 0)?;
        let n = net.num_params();
        net.set_params(&vec![0.0; n])?;
        Ok(net)
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::invalid("kernel network needs at least one layer"))?;
        let input_dim = first.in_dim();
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Dimension {
                    context: "layer chain",
                    expected: pair[0].out_dim(),
                    actual: pair[1].in_dim(),
                });
            }
        }
        let last = layers.last().expect("non-empty");
        if last.out_dim() != 1 || last.activation != Activation::Identity {
            return Err(Error::invalid(
                "final kernel layer must have one identity-activated output",
            ));
        }
        Ok(KernelMLP {
            layers,
            input_dim,
            stamp: fresh_stamp(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    /// Flat parameter vector: per layer, weights row-major then bias.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            p.extend_from_slice(layer.weights.as_slice());
            p.extend_from_slice(&layer.bias);
        }
        p
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Dimension {
                context: "parameter vector",
                expected: self.num_params(),
                actual: params.len(),
            });
        }
        if let Some(index) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "parameter vector",
                index,
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            let w = layer.weights.as_mut_slice();
            w.copy_from_slice(&params[offset..offset + w.len()]);
            offset += w.len();
            let b = layer.bias.len();
            layer.bias.copy_from_slice(&params[offset..offset + b]);
            offset += b;
        }
        self.stamp = fresh_stamp();
        Ok(())
    }

    /// Scores a batch of concatenated `(query, key)` rows.
    pub fn forward(&self, inputs: &Matrix) -> Result<(Vec<f64>, ForwardCache)> {
        if inputs.cols() != self.input_dim {
            return Err(Error::Dimension {
                context: "kernel input",
                expected: self.input_dim,
                actual: inputs.cols(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(inputs.clone());
        for layer in &self.layers {
            let input = activations.last().expect("non-empty");
            let out = layer_forward(layer, input);
            activations.push(out);
        }
        let scores = activations.last().expect("non-empty").as_slice().to_vec();
        Ok((
            scores,
            ForwardCache {
                stamp: self.stamp,
                activations,
            },
        ))
    }

    /// Scores without keeping a trace.
    pub fn scores(&self, inputs: &Matrix) -> Result<Vec<f64>> {
        if inputs.cols() != self.input_dim {
            return Err(Error::Dimension {
                context: "kernel input",
                expected: self.input_dim,
                actual: inputs.cols(),
            });
        }
        let mut current = layer_forward(&self.layers[0], inputs);
        for layer in &self.layers[1..] {
            current = layer_forward(layer, &current);
        }
        Ok(current.into_vec())
    }

    /// Adds `Σ_b upstream[b] · ∂score_b/∂θ` into `grad`.
    pub fn backward_into(&self, cache: &ForwardCache, upstream: &[f64], grad: &mut [f64]) -> Result<()> {
        if cache.stamp != self.stamp {
            return Err(Error::StaleCache);
        }
        if upstream.len() != cache.batch_len() {
            return Err(Error::Dimension {
                context: "upstream gradient",
                expected: cache.batch_len(),
                actual: upstream.len(),
            });
        }
        if grad.len() != self.num_params() {
            return Err(Error::Dimension {
                context: "gradient buffer",
                expected: self.num_params(),
                actual: grad.len(),
            });
        }
        let batch = cache.batch_len();
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for layer in &self.layers {
            offsets.push(offset);
            offset += layer.num_params();
        }

        // delta = ∂L/∂(pre-activation) of the current layer, batch × out
        let last = self.layers.len() - 1;
        let mut delta: Vec<f64> = upstream.to_vec();
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let (out_dim, in_dim) = (layer.out_dim(), layer.in_dim());
            let output = &cache.activations[l + 1];
            let input = &cache.activations[l];
            for b in 0..batch {
                let out_row = output.row(b);
                for j in 0..out_dim {
                    delta[b * out_dim + j] *= layer.activation.derivative_from_output(out_row[j]);
                }
            }
            let (w_grad, b_grad) =
                grad[offsets[l]..offsets[l] + out_dim * in_dim + out_dim].split_at_mut(out_dim * in_dim);
            for b in 0..batch {
                let in_row = input.row(b);
                for j in 0..out_dim {
                    let dj = delta[b * out_dim + j];
                    if dj == 0.0 {
                        continue;
                    }
                    b_grad[j] += dj;
                    axpy(dj, in_row, &mut w_grad[j * in_dim..(j + 1) * in_dim]);
                }
            }
            if l > 0 {
                let mut prev = vec![0.0; batch * in_dim];
                for b in 0..batch {
                    let dst = &mut prev[b * in_dim..(b + 1) * in_dim];
                    for j in 0..out_dim {
                        let dj = delta[b * out_dim + j];
                        if dj != 0.0 {
                            axpy(dj, layer.weights.row(j), dst);
                        }
                    }
                }
                delta = prev;
            }
        }
        Ok(())
    }

    /// Applies `update` to the flat parameter vector in place.
    pub fn update_params<F>(&mut self, update: F) -> Result<()>
    where
        F: FnOnce(&mut [f64]) -> Result<()>,
    {
        let mut p = self.params();
        update(&mut p)?;
        self.set_params(&p)
    }

    pub fn to_checkpoint_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serialization cannot fail")
    }

    pub fn from_checkpoint_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save_checkpoint(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_str(&s)
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn layer_forward(layer: &DenseLayer, input: &Matrix) -> Matrix {
    let out_dim = layer.out_dim();
    let mut out = Matrix::zeros(input.rows(), out_dim);
    for b in 0..input.rows() {
        let x = input.row(b);
        let dst = out.row_mut(b);
        for (j, o) in dst.iter_mut().enumerate() {
            *o = layer.activation.apply(dot(layer.weights.row(j), x) + layer.bias[j]);
        }
    }
    out
}

/// Scores one concatenated `(query, key)` vector.
pub fn forward_mlp(net: &KernelMLP, input: &[f64]) -> Result<(f64, ForwardCache)> {
    if input.len() != net.input_dim() {
        return Err(Error::Dimension {
            context: "kernel input",
            expected: net.input_dim(),
            actual: input.len(),
        });
    }
    let m = Matrix::new(1, input.len(), input.to_vec())?;
    let (scores, cache) = net.forward(&m)?;
    Ok((scores[0], cache))
}

/// `∂(upstream · score)/∂θ` for a single-pair cache.
pub fn backward_mlp(net: &KernelMLP, cache: &ForwardCache, upstream: f64) -> Result<Vec<f64>> {
    let mut grad = vec![0.0; net.num_params()];
    net.backward_into(cache, &[upstream], &mut grad)?;
    Ok(grad)
}

/// On-disk layout: layer shapes plus row-major values.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    input_dim: usize,
    layers: Vec<CheckpointLayer>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointLayer {
    rows: usize,
    cols: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

const CHECKPOINT_FORMAT: &str = "tnw-kernel-mlp/1";

impl From<KernelMLP> for Checkpoint {
    fn from(net: KernelMLP) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            input_dim: net.input_dim,
            layers: net
                .layers
                .into_iter()
                .map(|l| CheckpointLayer {
                    rows: l.weights.rows(),
                    cols: l.weights.cols(),
                    activation: l.activation,
                    weights: l.weights.into_vec(),
                    bias: l.bias,
                })
                .collect(),
        }
    }
}

impl TryFrom<Checkpoint> for KernelMLP {
    type Error = Error;

    fn try_from(c: Checkpoint) -> Result<Self> {
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Parse(format!("unsupported checkpoint format `{}`", c.format)));
        }
        let layers = c
            .layers
            .into_iter()
            .map(|l| DenseLayer::new(Matrix::new(l.rows, l.cols, l.weights)?, l.bias, l.activation))
            .collect::<Result<Vec<_>>>()?;
        let net = KernelMLP::from_layers(layers)?;
        if net.input_dim != c.input_dim {
            return Err(Error::Dimension {
                context: "checkpoint input_dim",
                expected: c.input_dim,
                actual: net.input_dim,
            });
        }
        Ok(net)
    }
}
