//! RISBFNN: a five-layer fully connected network that maps channel features
//! to RIS phases, trained without labels on the negative channel gain.
//!
//! Layout (widths for `N` elements): `FC(32N)→BN→ReLU → FC(16N)→BN→ReLU →
//! FC(8N)→BN→ReLU → FC(4N)→BN→ReLU → FC(N)`, followed by the Lambda layer
//! `θ = e^{jp}`. Everything (forward, backward, Adam) is written out by hand
//! for this fixed architecture and is generic over `f32`/`f64`; training runs
//! in `f32` and the `f64` path exists for gradient checking.

mod adam;
mod backward;
mod forward;
mod loss;
mod model_io;
mod train;

use ndarray::{Array1, Array2, NdFloat};
use rand::Rng;

use crate::error::{argument, Result};
use crate::features::{feature_len, Standardizer};

pub use adam::{AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use backward::{backward, Gradients, LayerGrad};
pub use forward::{forward, infer, ForwardCache, Mode};
pub use loss::{lambda_layer, loss_and_phase_gradient, unsupervised_loss};
pub use model_io::{MODEL_MAGIC, MODEL_VERSION};
pub use train::{
    loss_and_gradients, predict, predict_batch, train, train_with_observer, EpochSummary, TrainConfig, TrainHistory,
    TrainOutcome,
};

/// Momentum of the BN running statistics: `running = 0.9·running + 0.1·batch`.
pub const BN_MOMENTUM: f64 = 0.9;
/// Variance guard inside BN.
pub const BN_EPSILON: f64 = 1e-5;

pub(crate) fn cast<T: NdFloat>(x: f64) -> T {
    T::from(x).expect("representable constant")
}

/// Network shape for a given `(M, N)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchitectureSpec {
    pub m: usize,
    pub n: usize,
    pub input_width: usize,
    /// Output widths of the five FC layers; the last equals `N`.
    pub layer_widths: Vec<usize>,
    /// BN after each hidden FC layer.
    pub batch_norm: bool,
}

impl ArchitectureSpec {
    /// Standard widths `[32N, 16N, 8N, 4N, N]` with BN.
    pub fn new(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            input_width: feature_len(m, n),
            layer_widths: vec![32 * n, 16 * n, 8 * n, 4 * n, n],
            batch_norm: true,
        }
    }

    /// Same input/output contract with custom hidden widths (used for small
    /// gradient-check networks).
    pub fn with_widths(m: usize, n: usize, layer_widths: Vec<usize>) -> Result<Self> {
        let spec = Self { layer_widths, ..Self::new(m, n) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn without_batch_norm(mut self) -> Self {
        self.batch_norm = false;
        self
    }

    /// True when the widths are the standard `32N/16N/8N/4N/N` sequence.
    pub fn follows_width_law(&self) -> bool {
        self.layer_widths == Self::new(self.m, self.n).layer_widths
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(argument("architecture needs M, N >= 1"));
        }
        if self.input_width != feature_len(self.m, self.n) {
            return Err(argument(format!(
                "input width {} != 2(NM+M) = {}",
                self.input_width,
                feature_len(self.m, self.n)
            )));
        }
        if self.layer_widths.len() < 2 || self.layer_widths.contains(&0) {
            return Err(argument("need at least two non-empty layers"));
        }
        if *self.layer_widths.last().unwrap() != self.n {
            return Err(argument("output layer width must equal N"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` per layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut fan_in = self.input_width;
        self.layer_widths
            .iter()
            .map(|&w| {
                let dims = (fan_in, w);
                fan_in = w;
                dims
            })
            .collect()
    }
}

/// BN scale/shift and running statistics for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Array1<T>,
    pub beta: Array1<T>,
    pub running_mean: Array1<T>,
    pub running_var: Array1<T>,
}

impl<T: NdFloat> BatchNorm<T> {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }
}

/// One FC layer; `weight` is `fan_in × fan_out` so a batch is `X·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    pub bn: Option<BatchNorm<T>>,
}

/// Every trainable and running quantity of the network plus its input standardizer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    pub spec: ArchitectureSpec,
    pub layers: Vec<DenseLayer<T>>,
    pub standardizer: Standardizer,
}

impl<T: NdFloat> NetworkParams<T> {
    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len() + l.bn.as_ref().map_or(0, |b| b.gamma.len() + b.beta.len()))
            .sum()
    }

    /// Trainable tensors in a fixed order: per layer weight, bias, then BN gamma, beta.
    pub fn trainable_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            out.push(layer.weight.as_slice_mut().expect("standard layout"));
            out.push(layer.bias.as_slice_mut().expect("standard layout"));
            if let Some(bn) = &mut layer.bn {
                out.push(bn.gamma.as_slice_mut().expect("standard layout"));
                out.push(bn.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }

    pub fn trainable_shapes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(layer.weight.len());
            out.push(layer.bias.len());
            if let Some(bn) = &layer.bn {
                out.push(bn.gamma.len());
                out.push(bn.beta.len());
            }
        }
        out
    }

    /// Converts every tensor to another float type.
    pub fn cast<U: NdFloat>(&self) -> NetworkParams<U> {
        let conv1 = |a: &Array1<T>| a.mapv(|v| cast::<U>(v.to_f64().unwrap()));
        NetworkParams {
            spec: self.spec.clone(),
            standardizer: self.standardizer.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| DenseLayer {
                    weight: l.weight.mapv(|v| cast::<U>(v.to_f64().unwrap())),
                    bias: conv1(&l.bias),
                    bn: l.bn.as_ref().map(|b| BatchNorm {
                        gamma: conv1(&b.gamma),
                        beta: conv1(&b.beta),
                        running_mean: conv1(&b.running_mean),
                        running_var: conv1(&b.running_var),
                    }),
                })
                .collect(),
        }
    }

    /// Folds the batch statistics of a train-mode pass into the running statistics.
    pub fn update_running_stats(&mut self, cache: &ForwardCache<T>) -> Result<()> {
        let momentum = cast::<T>(BN_MOMENTUM);
        let keep = T::one() - momentum;
        for (layer, stats) in self.layers.iter_mut().zip(cache.batch_stats()?) {
            if let (Some(bn), Some((mean, var))) = (&mut layer.bn, stats) {
                bn.running_mean.zip_mut_with(mean, |r, &b| *r = *r * momentum + b * keep);
                bn.running_var.zip_mut_with(var, |r, &b| *r = *r * momentum + b * keep);
            }
        }
        Ok(())
    }
}

/// Uniform He initialization for ReLU layers, Glorot-uniform for the linear
/// output layer; zero biases; BN scale 1, shift 0, running stats (0, 1).
pub fn init_network<T: NdFloat, R: Rng + ?Sized>(spec: &ArchitectureSpec, rng: &mut R) -> Result<NetworkParams<T>> {
    spec.validate()?;
    let dims = spec.layer_dims();
    let last = dims.len() - 1;
    let layers = dims
        .iter()
        .enumerate()
        .map(|(idx, &(fan_in, fan_out))| {
            let limit = if idx == last {
                (6.0 / (fan_in + fan_out) as f64).sqrt()
            } else {
                (6.0 / fan_in as f64).sqrt()
            };
            let weight = Array2::from_shape_simple_fn((fan_in, fan_out), || cast::<T>((rng.random::<f64>() * 2.0 - 1.0) * limit));
            DenseLayer {
                weight,
                bias: Array1::zeros(fan_out),
                bn: (spec.batch_norm && idx != last).then(|| BatchNorm::new(fan_out)),
            }
        })
        .collect();
    Ok(NetworkParams { spec: spec.clone(), layers, standardizer: Standardizer::identity(spec.input_width) })
}

/// Target weight variance of the initializer for layer `idx`.
pub fn init_variance(spec: &ArchitectureSpec, idx: usize) -> f64 {
    let dims = spec.layer_dims();
    let (fan_in, fan_out) = dims[idx];
    if idx == dims.len() - 1 {
        2.0 / (fan_in + fan_out) as f64
    } else {
        2.0 / fan_in as f64
    }
}
