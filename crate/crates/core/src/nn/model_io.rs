//! Little-endian `RISM` model files.
//!
//! ```text
//! "RISM" | version u32 = 1 | M u32 | N u32 | feature length F u32
//! standardizer mean f64[F] | standardizer std f64[F]
//! 5 × { fan_in u32 | fan_out u32 | weight f64[fan_in·fan_out] (row-major, fan_in × fan_out)
//!       | bias f64[fan_out]
//!       | layers 1–4 only: BN scale, shift, running mean, running var (f64[fan_out] each) }
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, NdFloat};

use super::{cast, ArchitectureSpec, BatchNorm, DenseLayer, NetworkParams};
use crate::error::{argument, Error, Result};
use crate::features::{feature_len, Standardizer, STANDARDIZER_EPSILON};

pub const MODEL_MAGIC: &[u8; 4] = b"RISM";
pub const MODEL_VERSION: u32 = 1;
const MODEL_LAYERS: usize = 5;

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| argument("dimension exceeds u32"))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64s<W: Write, T: NdFloat>(w: &mut W, values: impl IntoIterator<Item = T>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_f64().unwrap().to_le_bytes())?;
    }
    Ok(())
}

fn get_bytes<const K: usize, R: Read>(r: &mut R) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated model file".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

fn get_u32<R: Read>(r: &mut R) -> Result<usize> {
    Ok(u32::from_le_bytes(get_bytes::<4, _>(r)?) as usize)
}

fn get_f64s<R: Read>(r: &mut R, len: usize) -> Result<Vec<f64>> {
    (0..len).map(|_| Ok(f64::from_le_bytes(get_bytes::<8, _>(r)?))).collect()
}

impl<T: NdFloat> NetworkParams<T> {
    pub fn write_model<W: Write>(&self, w: &mut W) -> Result<()> {
        let spec = &self.spec;
        if self.layers.len() != MODEL_LAYERS {
            return Err(argument(format!("model files hold {MODEL_LAYERS}-layer networks (got {})", self.layers.len())));
        }
        let bn_layout_ok =
            self.layers[..MODEL_LAYERS - 1].iter().all(|l| l.bn.is_some()) && self.layers[MODEL_LAYERS - 1].bn.is_none();
        if !bn_layout_ok {
            return Err(argument("model files require BN after each hidden layer and none after the output"));
        }
        w.write_all(MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        put_u32(w, spec.m)?;
        put_u32(w, spec.n)?;
        put_u32(w, spec.input_width)?;
        put_f64s(w, self.standardizer.mean.iter().copied())?;
        put_f64s(w, self.standardizer.std.iter().copied())?;
        for layer in &self.layers {
            put_u32(w, layer.weight.nrows())?;
            put_u32(w, layer.weight.ncols())?;
            put_f64s(w, layer.weight.iter().copied())?;
            put_f64s(w, layer.bias.iter().copied())?;
            if let Some(bn) = &layer.bn {
                for v in [&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var] {
                    put_f64s(w, v.iter().copied())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_model<R: Read>(r: &mut R) -> Result<Self> {
        let magic = get_bytes::<4, _>(r)?;
        if &magic != MODEL_MAGIC {
            return Err(Error::Format(format!("bad model magic {magic:?}")));
        }
        let version = u32::from_le_bytes(get_bytes::<4, _>(r)?);
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let m = get_u32(r)?;
        let n = get_u32(r)?;
        let width = get_u32(r)?;
        if m == 0 || n == 0 || width != feature_len(m, n) {
            return Err(Error::Format(format!("inconsistent header: M={m}, N={n}, feature length {width}")));
        }
        let mean = get_f64s(r, width)?;
        let std = get_f64s(r, width)?;
        if std.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::Format("negative standard deviation in standardizer".into()));
        }

        let mut layers = Vec::with_capacity(MODEL_LAYERS);
        let mut widths = Vec::with_capacity(MODEL_LAYERS);
        let mut expected_in = width;
        for idx in 0..MODEL_LAYERS {
            let fan_in = get_u32(r)?;
            let fan_out = get_u32(r)?;
            if fan_in != expected_in || fan_out == 0 {
                return Err(Error::Format(format!("layer {} has shape {fan_in}x{fan_out}, expected input {expected_in}", idx + 1)));
            }
            let to_t = |v: Vec<f64>| v.into_iter().map(cast::<T>).collect::<Vec<T>>();
            let weight = Array2::from_shape_vec((fan_in, fan_out), to_t(get_f64s(r, fan_in * fan_out)?))
                .map_err(|e| Error::Format(e.to_string()))?;
            let bias = Array1::from(to_t(get_f64s(r, fan_out)?));
            let bn = if idx < MODEL_LAYERS - 1 {
                let gamma = Array1::from(to_t(get_f64s(r, fan_out)?));
                let beta = Array1::from(to_t(get_f64s(r, fan_out)?));
                let running_mean = Array1::from(to_t(get_f64s(r, fan_out)?));
                let running_var = Array1::from(to_t(get_f64s(r, fan_out)?));
                if running_var.iter().any(|&v| !(v >= T::zero())) {
                    return Err(Error::Format("negative running variance".into()));
                }
                Some(BatchNorm { gamma, beta, running_mean, running_var })
            } else {
                None
            };
            layers.push(DenseLayer { weight, bias, bn });
            widths.push(fan_out);
            expected_in = fan_out;
        }
        if expected_in != n {
            return Err(Error::Format(format!("output layer width {expected_in} != N = {n}")));
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::Format("trailing bytes after model".into()));
        }
        let spec = ArchitectureSpec { m, n, input_width: width, layer_widths: widths, batch_norm: true };
        Ok(Self { spec, layers, standardizer: Standardizer { mean, std, epsilon: STANDARDIZER_EPSILON } })
    }

    pub fn to_model_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_model(&mut buf)?;
        Ok(buf)
    }

    pub fn save_model(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_model(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_model(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_model(&mut r)
    }
}
