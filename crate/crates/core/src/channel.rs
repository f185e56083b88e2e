//! Indoor AP–RIS–user scenario: geometry, path loss and Rayleigh channels.
//!
//! The AP and the RIS sit `d_ar` meters apart on a horizontal line. The user
//! stands `d1` meters off that line, at horizontal offset `d0` from the AP.
//! All three links (AP–RIS `G`, RIS–user `h_r`, AP–user `h_d`) are
//! independent Rayleigh fading scaled by the log-distance path loss
//! `20.4·log10(d/d_ref)` dB.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{argument, Error, Result};
use crate::rng::{stream_rng, Domain};

/// Path-loss exponent factor: loss in dB is `PATH_LOSS_SLOPE_DB · log10(d / d_ref)`.
pub const PATH_LOSS_SLOPE_DB: f64 = 20.4;

/// Scenario parameters shared by every sample in a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// AP antenna count.
    pub m: usize,
    /// RIS element count.
    pub n: usize,
    /// AP–RIS distance (m).
    pub d_ar: f64,
    /// Range of the user's offset along the AP–RIS line (m).
    pub d0_range: (f64, f64),
    /// Range of the user's distance from the AP–RIS line (m).
    pub d1_range: (f64, f64),
    /// Reference distance for path loss (m).
    pub d_ref: f64,
    /// Transmit SNR `p/σ²` in dB.
    pub snr_db: f64,
    /// Noise power (linear).
    pub sigma2: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            m: 1,
            n: 8,
            d_ar: 8.0,
            d0_range: (0.0, 8.0),
            d1_range: (1.0, 6.0),
            d_ref: 1.0,
            snr_db: 10.0,
            sigma2: 1.0,
        }
    }
}

impl ScenarioConfig {
    pub fn new(m: usize, n: usize) -> Self {
        Self { m, n, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(argument(format!("M and N must be >= 1 (got M={}, N={})", self.m, self.n)));
        }
        let finite_pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(argument(format!("{name} must be a positive finite number (got {v})")))
            }
        };
        finite_pos("d_ar", self.d_ar)?;
        finite_pos("d_ref", self.d_ref)?;
        finite_pos("sigma2", self.sigma2)?;
        for (name, (lo, hi)) in [("d0_range", self.d0_range), ("d1_range", self.d1_range)] {
            if !(lo.is_finite() && hi.is_finite()) || lo < 0.0 || lo > hi {
                return Err(argument(format!("{name} must satisfy 0 <= min <= max (got [{lo}, {hi}])")));
            }
        }
        if !self.snr_db.is_finite() {
            return Err(argument("snr_db must be finite"));
        }
        Ok(())
    }

    /// Transmit power `p` such that `p/σ²` equals the configured SNR.
    pub fn transmit_power(&self) -> f64 {
        self.sigma2 * 10f64.powf(self.snr_db / 10.0)
    }

    /// Linear `p/σ²`.
    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }
}

/// User position relative to the AP and the RIS.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySample {
    pub d0: f64,
    pub d1: f64,
    pub d_au: f64,
    pub d_ru: f64,
}

impl GeometrySample {
    pub fn from_offsets(d0: f64, d1: f64, d_ar: f64) -> Self {
        Self {
            d0,
            d1,
            d_au: (d0 * d0 + d1 * d1).sqrt(),
            d_ru: ((d_ar - d0) * (d_ar - d0) + d1 * d1).sqrt(),
        }
    }
}

/// One draw of the three links for a given `(M, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// AP–RIS channel, `M × N`.
    pub g: DMatrix<Complex64>,
    /// RIS–user channel, length `N`.
    pub h_r: DVector<Complex64>,
    /// AP–user direct channel, length `M`.
    pub h_d: DVector<Complex64>,
    /// Geometry the sample was drawn at; absent for samples read from disk.
    pub geometry: Option<GeometrySample>,
}

impl ChannelRealization {
    pub fn new(g: DMatrix<Complex64>, h_r: DVector<Complex64>, h_d: DVector<Complex64>) -> Result<Self> {
        if g.ncols() != h_r.len() || g.nrows() != h_d.len() {
            return Err(argument(format!(
                "channel shapes disagree: G is {}x{}, h_r has {}, h_d has {}",
                g.nrows(),
                g.ncols(),
                h_r.len(),
                h_d.len()
            )));
        }
        if g.nrows() == 0 || g.ncols() == 0 {
            return Err(argument("channel dimensions must be >= 1"));
        }
        let finite = g.iter().chain(h_r.iter()).chain(h_d.iter()).all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return Err(argument("channel contains non-finite entries"));
        }
        Ok(Self { g, h_r, h_d, geometry: None })
    }

    /// Convenience constructor from row-major slices.
    pub fn from_slices(m: usize, n: usize, g: &[Complex64], h_r: &[Complex64], h_d: &[Complex64]) -> Result<Self> {
        if g.len() != m * n {
            return Err(argument(format!("G needs {} entries, got {}", m * n, g.len())));
        }
        Self::new(
            DMatrix::from_row_slice(m, n, g),
            DVector::from_column_slice(h_r),
            DVector::from_column_slice(h_d),
        )
    }

    pub fn m(&self) -> usize {
        self.g.nrows()
    }

    pub fn n(&self) -> usize {
        self.g.ncols()
    }

    /// Element-wise conjugate of every link.
    pub fn conj(&self) -> Self {
        Self {
            g: self.g.map(|z| z.conj()),
            h_r: self.h_r.map(|z| z.conj()),
            h_d: self.h_d.map(|z| z.conj()),
            geometry: self.geometry,
        }
    }

    /// Rescales both propagation paths by a real factor, so the effective
    /// channel for any `θ` is multiplied by `factor` (`G` and `h_d` scaled,
    /// `h_r` left alone).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            g: self.g.map(|z| z * factor),
            h_r: self.h_r.clone(),
            h_d: self.h_d.map(|z| z * factor),
            geometry: self.geometry,
        }
    }

    /// Cascaded coefficients `c[i][n] = g[i][n]·h_r[n]`, i.e. `G·diag(h_r)`.
    pub fn cascade(&self) -> DMatrix<Complex64> {
        let mut c = self.g.clone();
        for (mut col, h) in c.column_iter_mut().zip(self.h_r.iter()) {
            col *= *h;
        }
        c
    }
}

/// Linear power gain of the log-distance path loss at distance `d`.
pub fn path_loss_linear(d: f64, d_ref: f64) -> Result<f64> {
    if !(d > 0.0 && d.is_finite()) || !(d_ref > 0.0 && d_ref.is_finite()) {
        return Err(Error::Domain(format!("path loss needs d > 0 and d_ref > 0 (got d={d}, d_ref={d_ref})")));
    }
    let loss_db = PATH_LOSS_SLOPE_DB * (d / d_ref).log10();
    Ok(10f64.powf(-loss_db / 10.0))
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        lo + (hi - lo) * rng.random::<f64>()
    }
}

/// Draws a user position uniformly over the configured ranges.
pub fn sample_geometry<R: Rng + ?Sized>(rng: &mut R, config: &ScenarioConfig) -> Result<GeometrySample> {
    config.validate()?;
    let d0 = uniform(rng, config.d0_range);
    let d1 = uniform(rng, config.d1_range);
    Ok(GeometrySample::from_offsets(d0, d1, config.d_ar))
}

/// Standard circularly-symmetric complex Gaussian, unit power.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    Complex64::new(x, y) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws Rayleigh links at a fixed geometry. Entries are drawn in the order
/// `G` (row-major), `h_r`, `h_d`.
pub fn sample_channels<R: Rng + ?Sized>(
    rng: &mut R,
    geometry: &GeometrySample,
    config: &ScenarioConfig,
) -> Result<ChannelRealization> {
    config.validate()?;
    let amp_ar = path_loss_linear(config.d_ar, config.d_ref)?.sqrt();
    let amp_ru = path_loss_linear(geometry.d_ru, config.d_ref)?.sqrt();
    let amp_au = path_loss_linear(geometry.d_au, config.d_ref)?.sqrt();
    let (m, n) = (config.m, config.n);

    let g_rows: Vec<Complex64> = (0..m * n).map(|_| complex_normal(rng) * amp_ar).collect();
    let g = DMatrix::from_row_slice(m, n, &g_rows);
    let h_r = DVector::from_fn(n, |_, _| complex_normal(rng) * amp_ru);
    let h_d = DVector::from_fn(m, |_, _| complex_normal(rng) * amp_au);
    Ok(ChannelRealization { g, h_r, h_d, geometry: Some(*geometry) })
}

/// A reproducible collection of channel realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: ScenarioConfig,
    pub samples: Vec<ChannelRealization>,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.config.m, self.config.n)
    }
}

/// Generates `count` samples, each with its own geometry draw. Sample `i` is a
/// pure function of `(config, seed, i)`, so the output does not depend on the
/// size of the rayon pool.
pub fn generate_dataset(config: &ScenarioConfig, count: usize, seed: u64) -> Result<Dataset> {
    config.validate()?;
    if count == 0 {
        return Err(argument("dataset count must be >= 1"));
    }
    let samples = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, Domain::Dataset, i as u64);
            let geometry = sample_geometry(&mut rng, config)?;
            sample_channels(&mut rng, &geometry, config)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { config: config.clone(), samples, seed })
}

pub const DATASET_MAGIC: &[u8; 4] = b"RISB";
pub const DATASET_VERSION: u32 = 1;

fn write_complex<W: Write>(w: &mut W, z: Complex64) -> Result<()> {
    w.write_all(&z.re.to_le_bytes())?;
    w.write_all(&z.im.to_le_bytes())?;
    Ok(())
}

fn read_array<const K: usize, R: Read>(r: &mut R) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated dataset file".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn read_complex<R: Read>(r: &mut R) -> Result<Complex64> {
    let re = f64::from_le_bytes(read_array::<8, _>(r)?);
    let im = f64::from_le_bytes(read_array::<8, _>(r)?);
    Ok(Complex64::new(re, im))
}

impl Dataset {
    /// Serializes the dataset in the little-endian `RISB` v1 layout.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let (m, n) = self.dims();
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&DATASET_VERSION.to_le_bytes())?;
        w.write_all(&(m as u32).to_le_bytes())?;
        w.write_all(&(n as u32).to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for s in &self.samples {
            if s.m() != m || s.n() != n {
                return Err(argument("dataset samples disagree on (M, N)"));
            }
            for i in 0..m {
                for j in 0..n {
                    write_complex(w, s.g[(i, j)])?;
                }
            }
            for z in s.h_r.iter().chain(s.h_d.iter()) {
                write_complex(w, *z)?;
            }
        }
        Ok(())
    }

    /// Reads a `RISB` v1 stream. Scenario distances are not stored in the
    /// file, so the returned config carries defaults for everything except
    /// `M` and `N`.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let magic = read_array::<4, _>(r)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format(format!("bad dataset magic {magic:?}")));
        }
        let version = u32::from_le_bytes(read_array::<4, _>(r)?);
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let m = u32::from_le_bytes(read_array::<4, _>(r)?) as usize;
        let n = u32::from_le_bytes(read_array::<4, _>(r)?) as usize;
        let count = u64::from_le_bytes(read_array::<8, _>(r)?) as usize;
        let seed = u64::from_le_bytes(read_array::<8, _>(r)?);
        if m == 0 || n == 0 {
            return Err(Error::Format(format!("invalid dimensions M={m}, N={n}")));
        }
        let mut samples = Vec::with_capacity(count.min(1 << 20));
        let mut g_buf = vec![Complex64::default(); m * n];
        for _ in 0..count {
            for z in g_buf.iter_mut() {
                *z = read_complex(r)?;
            }
            let h_r = (0..n).map(|_| read_complex(r)).collect::<Result<Vec<_>>>()?;
            let h_d = (0..m).map(|_| read_complex(r)).collect::<Result<Vec<_>>>()?;
            samples.push(ChannelRealization::from_slices(m, n, &g_buf, &h_r, &h_d).map_err(|e| Error::Format(e.to_string()))?);
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Format("trailing bytes after last sample".into()));
        }
        Ok(Self { config: ScenarioConfig::new(m, n), samples, seed })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut r)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }
}
