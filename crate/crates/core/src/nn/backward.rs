use ndarray::{Array1, Array2, Axis, NdFloat};

use super::forward::{ForwardCache, Mode};
use super::{cast, NetworkParams};
use crate::error::{argument, Error, Result};

/// Gradients of one FC layer (and its BN, if any).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T> {
    pub weight: Array2<T>,
    pub bias: Array1<T>,
    pub gamma: Option<Array1<T>>,
    pub beta: Option<Array1<T>>,
    /// Gradient with respect to the BN output, kept only when requested.
    pub(crate) bn_output: Option<Array2<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<LayerGrad<T>>,
}

impl<T: NdFloat> Gradients<T> {
    /// Same ordering as [`NetworkParams::trainable_mut`].
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.push(layer.weight.as_slice().expect("standard layout"));
            out.push(layer.bias.as_slice().expect("standard layout"));
            if let (Some(g), Some(b)) = (&layer.gamma, &layer.beta) {
                out.push(g.as_slice().expect("standard layout"));
                out.push(b.as_slice().expect("standard layout"));
            }
        }
        out
    }
}

/// Backpropagates `grad_output = ∂loss/∂p_pred` through a train-mode pass.
pub fn backward<T: NdFloat>(
    params: &NetworkParams<T>,
    cache: &ForwardCache<T>,
    grad_output: &Array2<T>,
) -> Result<Gradients<T>> {
    backward_impl(params, cache, grad_output, false)
}

pub(crate) fn backward_impl<T: NdFloat>(
    params: &NetworkParams<T>,
    cache: &ForwardCache<T>,
    grad_output: &Array2<T>,
    record_bn_output: bool,
) -> Result<Gradients<T>> {
    if cache.mode != Mode::Train {
        return Err(Error::State("backward needs the cache of a train-mode forward pass".into()));
    }
    if cache.layers.len() != params.layers.len() {
        return Err(Error::State("cache does not belong to this network".into()));
    }
    if grad_output.dim() != cache.output.dim() {
        return Err(argument("output gradient shape differs from the cached output"));
    }
    let batch = grad_output.nrows();
    let inv_batch = cast::<T>(1.0 / batch as f64);

    let mut grads: Vec<Option<LayerGrad<T>>> = vec![None; params.layers.len()];
    let mut pending_bn: Option<(Array1<T>, Array1<T>, Option<Array2<T>>)> = None;
    let mut dz = grad_output.to_owned();
    for idx in (0..params.layers.len()).rev() {
        let layer = &params.layers[idx];
        let input = &cache.layers[idx].input;
        if input.ncols() != layer.weight.nrows() {
            return Err(Error::State("stale cache: layer shapes changed".into()));
        }
        let weight = input.t().dot(&dz);
        let bias = dz.sum_axis(Axis(0));
        let (gamma, beta, bn_output) = match pending_bn.take() {
            Some((g, b, out)) => (Some(g), Some(b), out),
            None => (None, None, None),
        };
        grads[idx] = Some(LayerGrad { weight, bias, gamma, beta, bn_output });
        if idx == 0 {
            break;
        }

        // Through the ReLU that produced `input`.
        let mut dy = dz.dot(&layer.weight.t());
        dy.zip_mut_with(input, |d, &a| {
            if a <= T::zero() {
                *d = T::zero();
            }
        });

        let prev = &cache.layers[idx - 1];
        dz = match (&params.layers[idx - 1].bn, &prev.normalized, &prev.inv_std) {
            (Some(bn), Some(xhat), Some(inv_std)) => {
                let d_gamma = (&dy * xhat).sum_axis(Axis(0));
                let d_beta = dy.sum_axis(Axis(0));
                let recorded = record_bn_output.then(|| dy.clone());
                let mut dxhat = dy;
                dxhat *= &bn.gamma;
                let sum_dxhat = dxhat.sum_axis(Axis(0));
                let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
                // dz = (1/B)·σ⁻¹·(B·dx̂ − Σdx̂ − x̂·Σ(dx̂·x̂))
                let mut out = xhat * &sum_dxhat_xhat;
                out += &sum_dxhat;
                out *= inv_batch;
                let mut dz_prev = dxhat - out;
                dz_prev *= inv_std;
                pending_bn = Some((d_gamma, d_beta, recorded));
                dz_prev
            }
            (Some(_), _, _) => return Err(Error::State("cache lacks batch-norm statistics".into())),
            (None, _, _) => dy,
        };
    }
    Ok(Gradients { layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect() })
}
