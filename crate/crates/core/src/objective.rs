//! Objective and link-budget math shared by every phase-shift designer.
//!
//! With MRT at the AP, the receive SNR is `(p/σ²)·‖G·diag(θ)·h_r + h_d‖²`,
//! so every method is compared on the channel gain `‖r‖²`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::{ChannelRealization, ScenarioConfig};
use crate::error::{argument, Error, Result};

/// Allowed deviation of `|θ_n|` from 1.
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

/// RIS phase shifts, one unit-modulus complex value per element.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector(Vec<Complex64>);

impl PhaseVector {
    /// Wraps `theta`, rejecting entries whose modulus is not 1.
    pub fn new(theta: Vec<Complex64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(argument("phase vector must be non-empty"));
        }
        if let Some((i, z)) = theta.iter().enumerate().find(|(_, z)| !((z.norm() - 1.0).abs() <= UNIT_MODULUS_TOL)) {
            return Err(argument(format!("theta[{i}] = {z} is not unit modulus")));
        }
        Ok(Self(theta))
    }

    /// `θ_n = e^{j·φ_n}`.
    pub fn from_angles(angles: &[f64]) -> Self {
        Self(angles.iter().map(|&a| Complex64::new(a.cos(), a.sin())).collect())
    }

    /// Projects arbitrary complex values onto the unit circle (zero maps to 1).
    pub fn normalized(values: impl IntoIterator<Item = Complex64>) -> Self {
        Self(values.into_iter().map(unit_normalize).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn angles(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.arg()).collect()
    }

    pub fn conj(&self) -> Self {
        Self(self.0.iter().map(|z| z.conj()).collect())
    }

    /// Multiplies every element by `e^{jφ}`.
    pub fn rotated(&self, phi: f64) -> Self {
        let rot = Complex64::from_polar(1.0, phi);
        Self(self.0.iter().map(|z| z * rot).collect())
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }
}

/// `Norm(z) = z/|z|`; zero maps to 1 since any unit value is then optimal.
pub fn unit_normalize(z: Complex64) -> Complex64 {
    let mag = z.norm();
    if mag > 0.0 && mag.is_finite() {
        z / mag
    } else {
        Complex64::new(1.0, 0.0)
    }
}

fn check_dims(ch: &ChannelRealization, theta: &PhaseVector) -> Result<()> {
    if ch.n() != theta.len() {
        return Err(argument(format!("phase vector has {} elements, channel has N={}", theta.len(), ch.n())));
    }
    Ok(())
}

/// `r = G·diag(θ)·h_r + h_d`.
pub fn effective_channel(ch: &ChannelRealization, theta: &PhaseVector) -> Result<DVector<Complex64>> {
    check_dims(ch, theta)?;
    let m = ch.m();
    let mut r = ch.h_d.clone();
    for (n, (&t, &h)) in theta.as_slice().iter().zip(ch.h_r.iter()).enumerate() {
        let th = t * h;
        for i in 0..m {
            r[i] += ch.g[(i, n)] * th;
        }
    }
    Ok(r)
}

/// `‖G·diag(θ)·h_r + h_d‖²`, the quantity every method maximizes.
pub fn channel_gain(ch: &ChannelRealization, theta: &PhaseVector) -> Result<f64> {
    Ok(effective_channel(ch, theta)?.iter().map(|z| z.norm_sqr()).sum())
}

/// MRT transmit beamformer `w = sqrt(p)·conj(r)/‖r‖` for the effective channel.
pub fn mrt_beamformer(ch: &ChannelRealization, theta: &PhaseVector, p: f64) -> Result<DVector<Complex64>> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::Domain(format!("transmit power must be finite and >= 0 (got {p})")));
    }
    let r = effective_channel(ch, theta)?;
    mrt_from_effective(&r, p)
}

fn mrt_from_effective(r: &DVector<Complex64>, p: f64) -> Result<DVector<Complex64>> {
    let norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateChannel);
    }
    let scale = p.sqrt() / norm;
    Ok(r.map(|z| z.conj() * scale))
}

/// Link-level summary of a phase design under MRT.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerOutput {
    pub w: DVector<Complex64>,
    pub gain: f64,
    pub snr: f64,
    /// Achievable rate in bits/s/Hz.
    pub rate: f64,
}

/// `γ = |rᵀw|²/σ²` with MRT `w`, together with the beamformer and rate.
pub fn receive_snr(ch: &ChannelRealization, theta: &PhaseVector, config: &ScenarioConfig) -> Result<BeamformerOutput> {
    let p = config.transmit_power();
    let r = effective_channel(ch, theta)?;
    let w = mrt_from_effective(&r, p)?;
    let gain: f64 = r.iter().map(|z| z.norm_sqr()).sum();
    let received: Complex64 = r.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
    let snr = received.norm_sqr() / config.sigma2;
    Ok(BeamformerOutput { w, gain, snr, rate: rate(snr) })
}

/// SNR under MRT from a known channel gain.
pub fn snr_from_gain(gain: f64, config: &ScenarioConfig) -> f64 {
    config.transmit_power() / config.sigma2 * gain
}

/// Shannon rate `log2(1 + γ)` in bits/s/Hz.
pub fn rate(snr: f64) -> f64 {
    (1.0 + snr).log2()
}
