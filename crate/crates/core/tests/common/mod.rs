//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;
use risbf_core::channel::{generate_dataset, ChannelRealization, ScenarioConfig};
use risbf_core::features::{feature_matrix, fit_standardizer};
use risbf_core::nn::{forward, init_network, loss_and_gradients, unsupervised_loss, ArchitectureSpec, Mode, NetworkParams};
use risbf_core::objective::PhaseVector;
use risbf_core::rng::StreamRng;
use rand::SeedableRng;

pub const GRID_LEVELS: usize = 16;

/// Best channel gain over all `16^N` phase combinations (N ≤ 6).
///
/// Enumerates in reflected Gray order over base-16 digits so each step
/// changes one element and the effective channel is updated in O(M).
pub fn grid_best_gain(ch: &ChannelRealization) -> f64 {
    let (m, n) = (ch.m(), ch.n());
    let levels: Vec<Complex64> =
        (0..GRID_LEVELS).map(|k| Complex64::from_polar(1.0, k as f64 * std::f64::consts::TAU / GRID_LEVELS as f64)).collect();
    let cascade: Vec<Vec<Complex64>> = (0..n).map(|k| (0..m).map(|i| ch.g[(i, k)] * ch.h_r[k]).collect()).collect();
    let mut digits = vec![0usize; n];
    let mut dirs = vec![1isize; n];
    let mut r: Vec<Complex64> = (0..m).map(|i| ch.h_d[i] + cascade.iter().map(|c| c[i]).sum::<Complex64>()).collect();
    let gain = |r: &[Complex64]| r.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let mut best = gain(&r);
    loop {
        // Find the lowest digit that can move in its current direction.
        let mut k = 0;
        while k < n {
            let next = digits[k] as isize + dirs[k];
            if (0..GRID_LEVELS as isize).contains(&next) {
                break;
            }
            dirs[k] = -dirs[k];
            k += 1;
        }
        if k == n {
            return best;
        }
        let old = levels[digits[k]];
        digits[k] = (digits[k] as isize + dirs[k]) as usize;
        let delta = levels[digits[k]] - old;
        for (ri, c) in r.iter_mut().zip(&cascade[k]) {
            *ri += c * delta;
        }
        best = best.max(gain(&r));
    }
}

/// Brute-force version of [`grid_best_gain`] for cross-checking the Gray walk.
pub fn grid_best_gain_naive(ch: &ChannelRealization) -> f64 {
    let n = ch.n();
    let mut best = f64::NEG_INFINITY;
    for code in 0..GRID_LEVELS.pow(n as u32) {
        let mut rest = code;
        let angles: Vec<f64> = (0..n)
            .map(|_| {
                let d = rest % GRID_LEVELS;
                rest /= GRID_LEVELS;
                d as f64 * std::f64::consts::TAU / GRID_LEVELS as f64
            })
            .collect();
        best = best.max(risbf_core::objective::channel_gain(ch, &PhaseVector::from_angles(&angles)).unwrap());
    }
    best
}

/// Worst relative error between analytic and central-difference gradients
/// over every trainable parameter of a tiny f64 network in train mode.
pub struct GradientCheck {
    pub worst_relative_error: f64,
    pub checked: usize,
    pub worst_index: usize,
}

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms; central
/// differences on an O(10) loss carry ~1e-10 rounding noise at this step.
pub const FD_FLOOR: f64 = 1e-5;

pub fn tiny_network_gradient_check(seed: u64) -> GradientCheck {
    let spec = ArchitectureSpec::with_widths(1, 2, vec![4, 4, 4, 4, 2]).unwrap();
    // Unit-scale channels keep the loss and gradients O(1).
    let ds = generate_dataset(&ScenarioConfig::new(1, 2), 8, seed).unwrap();
    let samples: Vec<ChannelRealization> = ds.samples.iter().map(|c| c.scaled(10.0)).collect();
    let mut params: NetworkParams<f64> = init_network(&spec, &mut StreamRng::seed_from_u64(seed)).unwrap();
    let scaled = risbf_core::channel::Dataset { samples: samples.clone(), ..ds };
    params.standardizer = fit_standardizer(&scaled).unwrap();
    // Non-trivial BN parameters so their gradients are exercised.
    for (k, layer) in params.layers.iter_mut().enumerate() {
        if let Some(bn) = &mut layer.bn {
            bn.gamma.iter_mut().enumerate().for_each(|(i, g)| *g = 0.8 + 0.1 * (i + k) as f64);
            bn.beta.iter_mut().enumerate().for_each(|(i, b)| *b = 0.05 * i as f64 - 0.02 * k as f64);
        }
        layer.bias.iter_mut().enumerate().for_each(|(i, b)| *b = 0.01 * (i as f64 - 1.0));
    }
    let raw: Array2<f64> = feature_matrix(&samples).unwrap();
    let mut x = raw.clone();
    params.standardizer.apply_rows(&mut x).unwrap();

    let (loss, grads, _) = loss_and_gradients(&params, &x, &raw).unwrap();
    // Cross-check the batch loss against the per-sample gain oracle.
    let cache = forward(&params, &x, Mode::Train).unwrap();
    let thetas: Vec<PhaseVector> =
        cache.output.rows().into_iter().map(|r| PhaseVector::from_angles(r.as_slice().unwrap())).collect();
    let oracle = unsupervised_loss(&samples, &thetas).unwrap();
    assert!((loss - oracle).abs() <= 1e-10 * oracle.abs());

    let analytic: Vec<f64> = grads.tensors().into_iter().flat_map(|t| t.iter().copied()).collect();
    let loss_at = |p: &NetworkParams<f64>| {
        let cache = forward(p, &x, Mode::Train).unwrap();
        let thetas: Vec<PhaseVector> =
            cache.output.rows().into_iter().map(|r| PhaseVector::from_angles(r.as_slice().unwrap())).collect();
        unsupervised_loss(&samples, &thetas).unwrap()
    };

    let mut worst = GradientCheck { worst_relative_error: 0.0, checked: 0, worst_index: 0 };
    let total: usize = params.trainable_shapes().iter().sum();
    assert_eq!(total, analytic.len());
    for flat in 0..total {
        let perturbed = |delta: f64| {
            let mut p = params.clone();
            let mut offset = flat;
            for t in p.trainable_mut() {
                if offset < t.len() {
                    t[offset] += delta;
                    break;
                }
                offset -= t.len();
            }
            loss_at(&p)
        };
        let fd = (perturbed(FD_STEP) - perturbed(-FD_STEP)) / (2.0 * FD_STEP);
        let a = analytic[flat];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(FD_FLOOR);
        if rel > worst.worst_relative_error {
            worst.worst_relative_error = rel;
            worst.worst_index = flat;
        }
        worst.checked += 1;
    }
    worst
}
