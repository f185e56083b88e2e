use ndarray::{Array2, ArrayView2, NdFloat};

use super::cast;
use crate::channel::ChannelRealization;
use crate::error::{argument, Result};
use crate::features::feature_len;
use crate::objective::{channel_gain, PhaseVector};

/// `θ = cos(p) + j·sin(p)`: maps real network outputs onto the unit circle.
pub fn lambda_layer(p: &[f64]) -> PhaseVector {
    PhaseVector::from_angles(p)
}

/// `−(1/K)·Σ_k ‖G_kΘ_kh_{r,k} + h_{d,k}‖²`.
pub fn unsupervised_loss(channels: &[ChannelRealization], thetas: &[PhaseVector]) -> Result<f64> {
    if channels.is_empty() {
        return Err(argument("loss over an empty batch"));
    }
    if channels.len() != thetas.len() {
        return Err(argument(format!("{} channels but {} phase vectors", channels.len(), thetas.len())));
    }
    let mut total = 0.0;
    for (ch, theta) in channels.iter().zip(thetas) {
        total += channel_gain(ch, theta)?;
    }
    Ok(-total / channels.len() as f64)
}

/// Batch loss from raw (unstandardized) features and predicted phases, with
/// its gradient with respect to the phases:
///
/// `∂loss/∂p_n = (2/K)·Σ_i Im(conj(r_i)·c_{i,n}·e^{jp_n})`.
pub fn loss_and_phase_gradient<T: NdFloat>(
    raw: ArrayView2<'_, T>,
    m: usize,
    n: usize,
    p: &Array2<T>,
) -> Result<(f64, Array2<T>)> {
    let batch = raw.nrows();
    if batch == 0 {
        return Err(argument("loss over an empty batch"));
    }
    if raw.ncols() != feature_len(m, n) || p.dim() != (batch, n) {
        return Err(argument("feature/phase shapes disagree with (M, N)"));
    }
    let scale = cast::<T>(2.0 / batch as f64);
    let mut grad = Array2::zeros((batch, n));
    let mut total = 0.0f64;
    let mut rot = vec![(T::zero(), T::zero()); n];
    let mut r = vec![(T::zero(), T::zero()); m];
    for ((feat, phases), mut g) in raw.rows().into_iter().zip(p.rows()).zip(grad.rows_mut()) {
        for (slot, &ph) in rot.iter_mut().zip(phases) {
            *slot = (ph.cos(), ph.sin());
        }
        let hd = 2 * m * n;
        for (i, ri) in r.iter_mut().enumerate() {
            let (mut re, mut im) = (feat[hd + 2 * i], feat[hd + 2 * i + 1]);
            for (k, &(cs, sn)) in rot.iter().enumerate() {
                let (cr, ci) = (feat[2 * (i * n + k)], feat[2 * (i * n + k) + 1]);
                re += cr * cs - ci * sn;
                im += cr * sn + ci * cs;
            }
            *ri = (re, im);
            total += re.to_f64().unwrap().powi(2) + im.to_f64().unwrap().powi(2);
        }
        for (k, (&(cs, sn), gk)) in rot.iter().zip(g.iter_mut()).enumerate() {
            let mut acc = T::zero();
            for (i, &(rr, ri)) in r.iter().enumerate() {
                let (cr, ci) = (feat[2 * (i * n + k)], feat[2 * (i * n + k) + 1]);
                let (wr, wi) = (cr * cs - ci * sn, cr * sn + ci * cs);
                acc += rr * wi - ri * wr;
            }
            *gk = acc * scale;
        }
    }
    Ok((-total / batch as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_dataset, ScenarioConfig};
    use crate::features::feature_matrix;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    #[test]
    fn lambda_examples() {
        let theta = lambda_layer(&[0.0, 0.0]);
        assert!(theta.as_slice().iter().all(|z| *z == Complex64::new(1.0, 0.0)));
        let theta = lambda_layer(&[std::f64::consts::FRAC_PI_2]);
        assert!((theta.as_slice()[0] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        let a = lambda_layer(&[0.7, -2.0]);
        let b = lambda_layer(&[0.7 + std::f64::consts::TAU, -2.0 + std::f64::consts::TAU]);
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn loss_examples() {
        let one = Complex64::new(1.0, 0.0);
        let j = Complex64::new(0.0, 1.0);
        let ch = ChannelRealization::from_slices(1, 1, &[one], &[j], &[one]).unwrap();
        let theta = PhaseVector::new(vec![-j]).unwrap();
        assert!((unsupervised_loss(&[ch.clone()], &[theta]).unwrap() + 4.0).abs() < 1e-12);
        let zero = ch.scaled(0.0);
        assert_eq!(unsupervised_loss(&[zero], &[lambda_layer(&[0.3])]).unwrap(), 0.0);
        assert!(unsupervised_loss(&[], &[]).is_err());
    }

    #[test]
    fn batch_loss_matches_gain_oracle() {
        let ds = generate_dataset(&ScenarioConfig::new(3, 4), 16, 2).unwrap();
        let raw = feature_matrix::<f64>(&ds.samples).unwrap();
        let mut rng = crate::rng::StreamRng::seed_from_u64(1);
        let p = Array2::from_shape_simple_fn((16, 4), || rng.random::<f64>() * 6.0);
        let (loss, _) = loss_and_phase_gradient(raw.view(), 3, 4, &p).unwrap();
        let thetas: Vec<_> = p.rows().into_iter().map(|row| lambda_layer(row.as_slice().unwrap())).collect();
        let oracle = unsupervised_loss(&ds.samples, &thetas).unwrap();
        assert!((loss - oracle).abs() <= 1e-10 * oracle.abs());
    }

    #[test]
    fn phase_gradient_matches_finite_differences() {
        let ds = generate_dataset(&ScenarioConfig::new(2, 3), 4, 7).unwrap();
        let raw = feature_matrix::<f64>(&ds.samples).unwrap();
        let mut rng = crate::rng::StreamRng::seed_from_u64(8);
        let p = Array2::from_shape_simple_fn((4, 3), || rng.random::<f64>() * 6.0);
        let (_, grad) = loss_and_phase_gradient(raw.view(), 2, 3, &p).unwrap();
        let h = 1e-5;
        for idx in [(0, 0), (1, 2), (3, 1)] {
            let mut up = p.clone();
            up[idx] += h;
            let mut down = p.clone();
            down[idx] -= h;
            let fd = (loss_and_phase_gradient(raw.view(), 2, 3, &up).unwrap().0
                - loss_and_phase_gradient(raw.view(), 2, 3, &down).unwrap().0)
                / (2.0 * h);
            assert!((fd - grad[idx]).abs() <= 1e-5 * grad[idx].abs().max(1e-6), "{fd} vs {}", grad[idx]);
        }
    }

    #[test]
    fn zero_cascade_gives_zero_phase_gradient() {
        let mut raw = Array2::<f64>::zeros((2, 4));
        raw[(0, 2)] = 1.0;
        raw[(1, 3)] = -0.5;
        let p = Array2::from_elem((2, 1), 0.4);
        let (loss, grad) = loss_and_phase_gradient(raw.view(), 1, 1, &p).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
        assert!((loss + (1.0 + 0.25) / 2.0).abs() < 1e-15);
    }
}
