//! Closed-form optimum for a single-antenna AP and the random-phase baseline.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::ChannelRealization;
use crate::error::{argument, Result};
use crate::objective::{unit_normalize, PhaseVector};

/// Optimal phases for `M = 1`: every reflected path `g_n·h_r,n·θ_n` is
/// rotated onto the phase of the direct path `h_d`. When `h_d = 0` the
/// reflected paths are aligned to the real axis instead.
pub fn closed_form_single_antenna(ch: &ChannelRealization) -> Result<PhaseVector> {
    if ch.m() != 1 {
        return Err(argument(format!("closed form requires M = 1 (got M = {})", ch.m())));
    }
    let h_d = ch.h_d[0];
    let direct_zero = h_d == Complex64::new(0.0, 0.0);
    let theta = (0..ch.n()).map(|n| {
        let c = ch.g[(0, n)] * ch.h_r[n];
        if c.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else if direct_zero {
            unit_normalize(c.conj())
        } else {
            unit_normalize(h_d / c)
        }
    });
    Ok(PhaseVector::normalized(theta))
}

/// Optimal gain for `M = 1`: `(Σ|g_n·h_r,n| + |h_d|)²`.
pub fn single_antenna_optimal_gain(ch: &ChannelRealization) -> Result<f64> {
    if ch.m() != 1 {
        return Err(argument(format!("closed form requires M = 1 (got M = {})", ch.m())));
    }
    let reflected: f64 = (0..ch.n()).map(|n| (ch.g[(0, n)] * ch.h_r[n]).norm()).sum();
    Ok((reflected + ch.h_d[0].norm()).powi(2))
}

/// I.i.d. phases uniform on `[0, 2π)`.
pub fn random_phase<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<PhaseVector> {
    if n == 0 {
        return Err(argument("random phase needs N >= 1"));
    }
    let angles: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    Ok(PhaseVector::from_angles(&angles))
}
