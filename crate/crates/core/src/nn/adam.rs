use ndarray::NdFloat;

use super::cast;
use super::{Gradients, NetworkParams};
use crate::error::{argument, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// First/second moment estimates for every trainable tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: NdFloat> AdamState<T> {
    /// Zero moments for tensors of the given lengths.
    pub fn new(shapes: &[usize]) -> Self {
        Self {
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step: 0,
        }
    }

    pub fn for_params(params: &NetworkParams<T>) -> Self {
        Self::new(&params.trainable_shapes())
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update over parallel lists of tensors.
    pub fn step(&mut self, params: Vec<&mut [T]>, grads: Vec<&[T]>, lr: T) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(argument("parameter/gradient lists do not match the optimizer state"));
        }
        self.step += 1;
        let b1 = cast::<T>(ADAM_BETA1);
        let b2 = cast::<T>(ADAM_BETA2);
        let eps = cast::<T>(ADAM_EPSILON);
        let t = self.step as i32;
        let corr1 = T::one() - b1.powi(t);
        let corr2 = T::one() - b2.powi(t);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.len() != m.len() || g.len() != m.len() {
                return Err(argument("tensor length differs from optimizer state"));
            }
            for (((p, &g), m), v) in p.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (T::one() - b1) * g;
                *v = b2 * *v + (T::one() - b2) * g * g;
                let m_hat = *m / corr1;
                let v_hat = *v / corr2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

impl<T: NdFloat> NetworkParams<T> {
    /// Applies one Adam step with the given learning rate.
    pub fn adam_step(&mut self, grads: &Gradients<T>, state: &mut AdamState<T>, lr: T) -> Result<()> {
        state.step(self.trainable_mut(), grads.tensors(), lr)
    }
}
