use ndarray::{Array1, Array2, Axis, NdFloat};

use super::{cast, NetworkParams, BN_EPSILON};
use crate::error::{argument, Error, Result};

/// BN uses batch statistics in `Train` and running statistics in `Infer`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache<T> {
    /// Input to the FC layer (post-ReLU output of the previous layer).
    pub input: Array2<T>,
    /// `x̂ = (z − μ_B)/σ_B` (train-mode BN only).
    pub normalized: Option<Array2<T>>,
    pub inv_std: Option<Array1<T>>,
    pub batch_mean: Option<Array1<T>>,
    pub batch_var: Option<Array1<T>>,
}

/// Activations kept by [`forward`] for [`super::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub mode: Mode,
    pub(crate) layers: Vec<LayerCache<T>>,
    /// Predicted phases `p_pred`, one row per sample.
    pub output: Array2<T>,
}

impl<T: NdFloat> ForwardCache<T> {
    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }

    /// Normalized pre-activations `x̂` of each BN layer (train mode).
    pub fn normalized(&self, layer: usize) -> Option<&Array2<T>> {
        self.layers.get(layer).and_then(|l| l.normalized.as_ref())
    }

    pub(crate) fn batch_stats(&self) -> Result<Vec<Option<(&Array1<T>, &Array1<T>)>>> {
        if self.mode != Mode::Train {
            return Err(Error::State("batch statistics exist only for train-mode passes".into()));
        }
        Ok(self
            .layers
            .iter()
            .map(|l| match (&l.batch_mean, &l.batch_var) {
                (Some(m), Some(v)) => Some((m, v)),
                _ => None,
            })
            .collect())
    }
}

fn check_input<T: NdFloat>(params: &NetworkParams<T>, x: &Array2<T>) -> Result<()> {
    if x.ncols() != params.spec.input_width {
        return Err(argument(format!("feature width {} != network input width {}", x.ncols(), params.spec.input_width)));
    }
    if x.nrows() == 0 {
        return Err(argument("empty batch"));
    }
    Ok(())
}

fn relu_in_place<T: NdFloat>(a: &mut Array2<T>) {
    a.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
}

/// FC→BN→ReLU for the hidden layers and FC→Linear for the output layer.
/// Train mode requires at least two samples so the batch variance exists.
pub fn forward<T: NdFloat>(params: &NetworkParams<T>, x: &Array2<T>, mode: Mode) -> Result<ForwardCache<T>> {
    check_input(params, x)?;
    let batch = x.nrows();
    if mode == Mode::Train && batch < 2 && params.layers.iter().any(|l| l.bn.is_some()) {
        return Err(argument("train-mode batch normalization needs a batch of at least 2"));
    }
    let eps = cast::<T>(BN_EPSILON);
    let inv_batch = cast::<T>(1.0 / batch as f64);
    let last = params.layers.len() - 1;

    let mut caches = Vec::with_capacity(params.layers.len());
    let mut h = x.to_owned();
    for (idx, layer) in params.layers.iter().enumerate() {
        let mut z = h.dot(&layer.weight);
        z += &layer.bias;
        let mut cache = LayerCache { input: h, normalized: None, inv_std: None, batch_mean: None, batch_var: None };
        if idx == last {
            caches.push(cache);
            return Ok(ForwardCache { mode, layers: caches, output: z });
        }
        match (&layer.bn, mode) {
            (Some(bn), Mode::Train) => {
                let mean = z.sum_axis(Axis(0)) * inv_batch;
                z -= &mean;
                let var = z.mapv(|v| v * v).sum_axis(Axis(0)) * inv_batch;
                let inv_std = var.mapv(|v| T::one() / (v + eps).sqrt());
                z *= &inv_std;
                let mut y = z.clone();
                y *= &bn.gamma;
                y += &bn.beta;
                cache.normalized = Some(z);
                cache.inv_std = Some(inv_std);
                cache.batch_mean = Some(mean);
                cache.batch_var = Some(var);
                z = y;
            }
            (Some(bn), Mode::Infer) => apply_running_bn(&mut z, bn, eps),
            (None, _) => {}
        }
        relu_in_place(&mut z);
        caches.push(cache);
        h = z;
    }
    unreachable!("network has at least one layer")
}

fn apply_running_bn<T: NdFloat>(z: &mut Array2<T>, bn: &super::BatchNorm<T>, eps: T) {
    let scale: Array1<T> = bn.gamma.iter().zip(&bn.running_var).map(|(&g, &v)| g / (v + eps).sqrt()).collect();
    let shift: Array1<T> =
        bn.beta.iter().zip(&bn.running_mean).zip(&scale).map(|((&b, &m), &s)| b - m * s).collect();
    *z *= &scale;
    *z += &shift;
}

/// `h·W + b`. A single row is accumulated row-by-row over `W`, which avoids
/// the packing overhead a general matrix product pays for one-sample latency.
fn affine<T: NdFloat>(h: &Array2<T>, weight: &Array2<T>, bias: &Array1<T>) -> Array2<T> {
    if h.nrows() != 1 {
        let mut z = h.dot(weight);
        z += bias;
        return z;
    }
    let mut out = bias.clone();
    for (&v, w) in h.row(0).iter().zip(weight.rows()) {
        if v != T::zero() {
            out.scaled_add(v, &w);
        }
    }
    out.insert_axis(Axis(0))
}

/// Inference-mode pass without keeping activations.
pub fn infer<T: NdFloat>(params: &NetworkParams<T>, x: &Array2<T>) -> Result<Array2<T>> {
    check_input(params, x)?;
    let eps = cast::<T>(BN_EPSILON);
    let last = params.layers.len() - 1;
    let mut h = x.to_owned();
    for (idx, layer) in params.layers.iter().enumerate() {
        h = affine(&h, &layer.weight, &layer.bias);
        if idx == last {
            break;
        }
        if let Some(bn) = &layer.bn {
            apply_running_bn(&mut h, bn, eps);
        }
        relu_in_place(&mut h);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_network, ArchitectureSpec};
    use crate::rng::StreamRng;
    use rand::{Rng, SeedableRng};

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = StreamRng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.random::<f64>() * 4.0 - 2.0)
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = ArchitectureSpec::new(2, 3);
        let mut params: NetworkParams<f64> = init_network(&spec, &mut StreamRng::seed_from_u64(0)).unwrap();
        for layer in &mut params.layers {
            layer.weight.fill(0.0);
            layer.bias.fill(0.0);
            if let Some(bn) = &mut layer.bn {
                bn.beta.fill(0.0);
            }
        }
        let x = random_batch(7, spec.input_width, 1);
        assert!(infer(&params, &x).unwrap().iter().all(|&v| v == 0.0));
        assert!(forward(&params, &x, Mode::Train).unwrap().output.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inference_is_deterministic_and_matches_forward() {
        let spec = ArchitectureSpec::new(1, 4);
        let params: NetworkParams<f64> = init_network(&spec, &mut StreamRng::seed_from_u64(2)).unwrap();
        let x = random_batch(5, spec.input_width, 3);
        let a = infer(&params, &x).unwrap();
        let b = infer(&params, &x).unwrap();
        assert_eq!(a, b);
        let c = forward(&params, &x, Mode::Infer).unwrap().output;
        for (u, v) in a.iter().zip(c.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn single_row_inference_matches_batched_rows() {
        let spec = ArchitectureSpec::new(2, 4);
        let params: NetworkParams<f64> = init_network(&spec, &mut StreamRng::seed_from_u64(4)).unwrap();
        let x = random_batch(6, spec.input_width, 5);
        let batched = infer(&params, &x).unwrap();
        for (i, row) in x.rows().into_iter().enumerate() {
            let single = infer(&params, &row.to_owned().insert_axis(Axis(0))).unwrap();
            for (u, v) in single.row(0).iter().zip(batched.row(i)) {
                assert!((u - v).abs() < 1e-10, "{u} vs {v}");
            }
        }
    }

    #[test]
    fn batch_norm_standardizes_pre_activations() {
        let spec = ArchitectureSpec::new(2, 4);
        let params: NetworkParams<f64> = init_network(&spec, &mut StreamRng::seed_from_u64(4)).unwrap();
        let x = random_batch(64, spec.input_width, 5);
        let cache = forward(&params, &x, Mode::Train).unwrap();
        for layer in 0..4 {
            let xhat = cache.normalized(layer).unwrap();
            let n = xhat.nrows() as f64;
            for col in xhat.columns() {
                let mean = col.sum() / n;
                let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                assert!(mean.abs() < 1e-6);
                // var/(var + 1e-5) is within 1e-4 of 1 unless a unit is nearly constant.
                assert!((var - 1.0).abs() < 1e-4 || col.iter().all(|&v| v.abs() < 1e-3), "{var}");
            }
        }
    }

    #[test]
    fn train_mode_rejects_single_sample() {
        let spec = ArchitectureSpec::new(1, 2);
        let params: NetworkParams<f32> = init_network(&spec, &mut StreamRng::seed_from_u64(0)).unwrap();
        let x = Array2::zeros((1, spec.input_width));
        assert!(forward(&params, &x, Mode::Train).is_err());
        assert!(forward(&params, &x, Mode::Infer).is_ok());
        assert!(infer(&params, &Array2::zeros((2, 3))).is_err());
    }
}
