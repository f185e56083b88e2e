//! Network input features.
//!
//! Each output of the effective channel is `r_i = Σ_n g_{i,n}·h_{r,n}·θ_n + h_{d,i}`,
//! so the cascade products `g_{i,n}·h_{r,n}` together with `h_d` carry all the
//! information the network needs. Layout of the real feature vector:
//!
//! ```text
//! [Re c_11, Im c_11, Re c_12, Im c_12, ..., Re c_MN, Im c_MN,   (row-major over (i, n))
//!  Re h_d1, Im h_d1, ..., Re h_dM, Im h_dM]
//! ```

use ndarray::{Array2, NdFloat};
use num_complex::Complex64;

use crate::channel::{ChannelRealization, Dataset};
use crate::error::{argument, Result};

/// Divisor guard for zero-variance dimensions.
pub const STANDARDIZER_EPSILON: f64 = 1e-8;

/// Feature length for `(M, N)`: `2(NM + M)`.
pub fn feature_len(m: usize, n: usize) -> usize {
    2 * (n * m + m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Cascade product `c_{i,n}` read back from its feature pair.
    pub fn cascade(&self, m: usize, n: usize, i: usize, k: usize) -> Complex64 {
        debug_assert!(i < m);
        let at = 2 * (i * n + k);
        Complex64::new(self.0[at], self.0[at + 1])
    }
}

/// Writes the features of `ch` into `out` (length `2(NM + M)`).
pub fn write_features<T: NdFloat>(ch: &ChannelRealization, out: &mut [T]) {
    let (m, n) = (ch.m(), ch.n());
    debug_assert_eq!(out.len(), feature_len(m, n));
    let mut k = 0;
    for i in 0..m {
        for j in 0..n {
            let c = ch.g[(i, j)] * ch.h_r[j];
            out[k] = T::from(c.re).unwrap();
            out[k + 1] = T::from(c.im).unwrap();
            k += 2;
        }
    }
    for z in ch.h_d.iter() {
        out[k] = T::from(z.re).unwrap();
        out[k + 1] = T::from(z.im).unwrap();
        k += 2;
    }
}

pub fn extract_features(ch: &ChannelRealization) -> FeatureVector {
    let mut values = vec![0.0; feature_len(ch.m(), ch.n())];
    write_features(ch, &mut values);
    FeatureVector(values)
}

/// Raw (unstandardized) features of every sample, one row per sample.
pub fn feature_matrix<T: NdFloat>(samples: &[ChannelRealization]) -> Result<Array2<T>> {
    let first = samples.first().ok_or_else(|| argument("no samples"))?;
    let (m, n) = (first.m(), first.n());
    let width = feature_len(m, n);
    let mut out = Array2::zeros((samples.len(), width));
    for (mut row, ch) in out.rows_mut().into_iter().zip(samples) {
        if ch.m() != m || ch.n() != n {
            return Err(argument("samples disagree on (M, N)"));
        }
        write_features(ch, row.as_slice_mut().expect("standard layout"));
    }
    Ok(out)
}

/// Per-dimension affine standardization fitted on training features.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub epsilon: f64,
}

impl Standardizer {
    /// Mean 0, std 1: leaves features unchanged up to `epsilon`.
    pub fn identity(len: usize) -> Self {
        Self { mean: vec![0.0; len], std: vec![1.0; len], epsilon: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, f: &FeatureVector) -> Result<FeatureVector> {
        self.check_len(f.len())?;
        Ok(FeatureVector(
            f.0.iter().zip(&self.mean).zip(&self.std).map(|((x, mu), sd)| (x - mu) / (sd + self.epsilon)).collect(),
        ))
    }

    pub fn invert(&self, f: &FeatureVector) -> Result<FeatureVector> {
        self.check_len(f.len())?;
        Ok(FeatureVector(
            f.0.iter().zip(&self.mean).zip(&self.std).map(|((x, mu), sd)| x * (sd + self.epsilon) + mu).collect(),
        ))
    }

    /// Standardizes every row of `features` in place.
    pub fn apply_rows<T: NdFloat>(&self, features: &mut Array2<T>) -> Result<()> {
        self.check_len(features.ncols())?;
        let mean: Vec<T> = self.mean.iter().map(|&v| T::from(v).unwrap()).collect();
        let scale: Vec<T> = self.std.iter().map(|&v| T::from(1.0 / (v + self.epsilon)).unwrap()).collect();
        for mut row in features.rows_mut() {
            for ((x, &mu), &s) in row.iter_mut().zip(&mean).zip(&scale) {
                *x = (*x - mu) * s;
            }
        }
        Ok(())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.mean.len() {
            return Err(argument(format!("feature length {len} does not match standardizer length {}", self.mean.len())));
        }
        Ok(())
    }
}

/// Fits mean and population standard deviation over the training set.
pub fn fit_standardizer(train: &Dataset) -> Result<Standardizer> {
    if train.is_empty() {
        return Err(argument("cannot fit a standardizer on an empty dataset"));
    }
    let (m, n) = (train.samples[0].m(), train.samples[0].n());
    let width = feature_len(m, n);
    let count = train.len() as f64;
    let mut row = vec![0.0; width];
    let mut mean = vec![0.0; width];
    for ch in &train.samples {
        if ch.m() != m || ch.n() != n {
            return Err(argument("samples disagree on (M, N)"));
        }
        write_features(ch, &mut row);
        mean.iter_mut().zip(&row).for_each(|(acc, x)| *acc += x);
    }
    mean.iter_mut().for_each(|v| *v /= count);
    let mut var = vec![0.0; width];
    for ch in &train.samples {
        write_features(ch, &mut row);
        var.iter_mut().zip(&row).zip(&mean).for_each(|((acc, x), mu)| *acc += (x - mu) * (x - mu));
    }
    let std = var.into_iter().map(|v| (v / count).sqrt()).collect();
    Ok(Standardizer { mean, std, epsilon: STANDARDIZER_EPSILON })
}

#[cfg(test)]
fn fit_matrix(features: &Array2<f64>) -> Standardizer {
    let count = features.nrows() as f64;
    let width = features.ncols();
    let mut mean = vec![0.0; width];
    for row in features.rows() {
        for (acc, x) in mean.iter_mut().zip(row) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let mut var = vec![0.0; width];
    for row in features.rows() {
        for ((acc, x), mu) in var.iter_mut().zip(row).zip(&mean) {
            *acc += (x - mu) * (x - mu);
        }
    }
    let std = var.into_iter().map(|v| (v / count).sqrt()).collect();
    Standardizer { mean, std, epsilon: STANDARDIZER_EPSILON }
}
