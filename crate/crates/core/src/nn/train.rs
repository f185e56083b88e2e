use std::io::Write;

use ndarray::{s, Array2, Axis, NdFloat};
use rand::seq::SliceRandom;

use super::backward::backward;
use super::forward::{forward, infer, ForwardCache, Mode};
use super::loss::{lambda_layer, loss_and_phase_gradient};
use super::{init_network, AdamState, ArchitectureSpec, Gradients, NetworkParams};
use crate::channel::{ChannelRealization, Dataset};
use crate::error::{argument, Result};
use crate::features::{feature_matrix, fit_standardizer};
use crate::objective::PhaseVector;
use crate::rng::{stream_rng, Domain};

/// Rows per inference chunk when scoring a whole dataset.
const EVAL_CHUNK: usize = 4096;

/// Optimizer, schedule and stopping settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub init_lr: f64,
    pub max_epochs: usize,
    /// Stop after this many epochs without a new best validation loss.
    pub early_stop_patience: usize,
    /// Multiply the learning rate by `lr_decay` after this many epochs without improvement.
    pub plateau_patience: usize,
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 5000,
            init_lr: 1e-3,
            max_epochs: 1000,
            early_stop_patience: 30,
            plateau_patience: 15,
            lr_decay: 0.33,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.max_epochs == 0 || self.early_stop_patience == 0 || self.plateau_patience == 0 {
            return Err(argument("batch_size, max_epochs and patiences must be >= 1"));
        }
        if !(self.init_lr > 0.0 && self.init_lr.is_finite()) {
            return Err(argument(format!("init_lr must be positive (got {})", self.init_lr)));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay < 1.0) {
            return Err(argument(format!("lr_decay must lie in (0, 1) (got {})", self.lr_decay)));
        }
        Ok(())
    }
}

/// Per-epoch losses and learning rates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub learning_rate: Vec<f64>,
    /// Epoch (0-based) with the lowest validation loss.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.val_loss.len()
    }

    pub fn best_val_loss(&self) -> Option<f64> {
        self.val_loss.get(self.best_epoch).copied()
    }

    /// `epoch,train_loss,val_loss,learning_rate` rows after `#`-prefixed header lines.
    pub fn write_csv<W: Write>(&self, mut w: W, header_comment: &str) -> Result<()> {
        for line in header_comment.lines() {
            writeln!(w, "# {line}")?;
        }
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "train_loss", "val_loss", "learning_rate"])?;
        for (epoch, ((t, v), lr)) in self.train_loss.iter().zip(&self.val_loss).zip(&self.learning_rate).enumerate() {
            out.write_record([(epoch + 1).to_string(), format!("{t:e}"), format!("{v:e}"), format!("{lr:e}")])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub learning_rate: f64,
    pub best_val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the best-validation epoch.
    pub params: NetworkParams<f32>,
    pub history: TrainHistory,
}

/// Loss, parameter gradients and cache for one train-mode batch.
/// `standardized` feeds the network; `raw` (unstandardized features) feeds the loss.
pub fn loss_and_gradients<T: NdFloat>(
    params: &NetworkParams<T>,
    standardized: &Array2<T>,
    raw: &Array2<T>,
) -> Result<(f64, Gradients<T>, ForwardCache<T>)> {
    let cache = forward(params, standardized, Mode::Train)?;
    let (loss, grad_p) = loss_and_phase_gradient(raw.view(), params.spec.m, params.spec.n, &cache.output)?;
    let grads = backward(params, &cache, &grad_p)?;
    Ok((loss, grads, cache))
}

/// Mean loss of the network (inference mode) over a prepared feature set.
fn dataset_loss<T: NdFloat>(params: &NetworkParams<T>, standardized: &Array2<T>, raw: &Array2<T>) -> Result<f64> {
    let rows = standardized.nrows();
    let mut total = 0.0;
    let mut start = 0;
    while start < rows {
        let end = (start + EVAL_CHUNK).min(rows);
        let x = standardized.slice(s![start..end, ..]).to_owned();
        let p = infer(params, &x)?;
        let (loss, _) = loss_and_phase_gradient(raw.slice(s![start..end, ..]), params.spec.m, params.spec.n, &p)?;
        total += loss * (end - start) as f64;
        start = end;
    }
    Ok(total / rows as f64)
}

/// Splits `len` shuffled rows into mini-batches. The trailing partial batch is
/// kept, except that a lone final sample joins the previous batch (BN needs
/// two samples).
fn batch_bounds(len: usize, batch_size: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < len {
        let end = (start + batch_size).min(len);
        out.push((start, end));
        start = end;
    }
    if out.len() > 1 && out.last().is_some_and(|(a, b)| b - a == 1) {
        let (_, end) = out.pop().unwrap();
        out.last_mut().unwrap().1 = end;
    }
    out
}

fn check_dataset(ds: &Dataset, spec: &ArchitectureSpec, role: &str) -> Result<()> {
    if ds.is_empty() {
        return Err(argument(format!("{role} set is empty")));
    }
    let mismatched = ds.samples.iter().any(|ch| ch.m() != spec.m || ch.n() != spec.n);
    if mismatched {
        return Err(argument(format!("{role} set does not match the network's (M, N) = ({}, {})", spec.m, spec.n)));
    }
    Ok(())
}

pub fn train(train_set: &Dataset, val_set: &Dataset, spec: &ArchitectureSpec, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with_observer(train_set, val_set, spec, config, |_| {})
}

/// Mini-batch Adam on the unsupervised loss with plateau LR decay, early
/// stopping and best-epoch restoration. `observer` sees every finished epoch.
pub fn train_with_observer<F: FnMut(&EpochSummary)>(
    train_set: &Dataset,
    val_set: &Dataset,
    spec: &ArchitectureSpec,
    config: &TrainConfig,
    mut observer: F,
) -> Result<TrainOutcome> {
    config.validate()?;
    spec.validate()?;
    check_dataset(train_set, spec, "training")?;
    check_dataset(val_set, spec, "validation")?;
    if train_set.len() < 2 && spec.batch_norm {
        return Err(argument("batch normalization needs at least two training samples"));
    }

    let standardizer = fit_standardizer(train_set)?;
    let train_raw = feature_matrix::<f32>(&train_set.samples)?;
    let mut train_x = train_raw.clone();
    standardizer.apply_rows(&mut train_x)?;
    let val_raw = feature_matrix::<f32>(&val_set.samples)?;
    let mut val_x = val_raw.clone();
    standardizer.apply_rows(&mut val_x)?;

    let mut params = init_network::<f32, _>(spec, &mut stream_rng(config.seed, Domain::Init, 0))?;
    params.standardizer = standardizer;
    let mut adam = AdamState::for_params(&params);
    let mut shuffle_rng = stream_rng(config.seed, Domain::Training, 0);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut history = TrainHistory::default();
    let mut lr = config.init_lr;
    let mut best_val = f64::INFINITY;
    let mut best_params = params.clone();
    let (mut plateau_wait, mut stop_wait) = (0, 0);

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (start, end) in batch_bounds(order.len(), config.batch_size) {
            let idx = &order[start..end];
            let x = train_x.select(Axis(0), idx);
            let raw = train_raw.select(Axis(0), idx);
            let (loss, grads, cache) = loss_and_gradients(&params, &x, &raw)?;
            params.update_running_stats(&cache)?;
            params.adam_step(&grads, &mut adam, lr as f32)?;
            loss_sum += loss * idx.len() as f64;
        }
        let train_loss = loss_sum / order.len() as f64;
        let val_loss = dataset_loss(&params, &val_x, &val_raw)?;
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        history.learning_rate.push(lr);

        if val_loss < best_val {
            best_val = val_loss;
            best_params = params.clone();
            history.best_epoch = epoch;
            plateau_wait = 0;
            stop_wait = 0;
        } else {
            plateau_wait += 1;
            stop_wait += 1;
            if plateau_wait >= config.plateau_patience {
                lr *= config.lr_decay;
                plateau_wait = 0;
            }
        }
        observer(&EpochSummary {
            epoch: epoch + 1,
            train_loss,
            val_loss,
            learning_rate: history.learning_rate[epoch],
            best_val_loss: best_val,
        });
        if stop_wait >= config.early_stop_patience {
            break;
        }
    }
    Ok(TrainOutcome { params: best_params, history })
}

fn check_model_dims<T>(params: &NetworkParams<T>, ch: &ChannelRealization) -> Result<()> {
    if ch.m() != params.spec.m || ch.n() != params.spec.n {
        return Err(argument(format!(
            "model expects (M, N) = ({}, {}), channel is ({}, {})",
            params.spec.m,
            params.spec.n,
            ch.m(),
            ch.n()
        )));
    }
    Ok(())
}

/// Standardize, run the network in inference mode, apply the Lambda layer.
pub fn predict<T: NdFloat>(params: &NetworkParams<T>, ch: &ChannelRealization) -> Result<PhaseVector> {
    Ok(predict_batch(params, std::slice::from_ref(ch))?.pop().expect("one prediction"))
}

pub fn predict_batch<T: NdFloat>(params: &NetworkParams<T>, samples: &[ChannelRealization]) -> Result<Vec<PhaseVector>> {
    for ch in samples {
        check_model_dims(params, ch)?;
    }
    let mut x = feature_matrix::<T>(samples)?;
    params.standardizer.apply_rows(&mut x)?;
    let p = infer(params, &x)?;
    Ok(p.rows()
        .into_iter()
        .map(|row| lambda_layer(&row.iter().map(|v| v.to_f64().unwrap()).collect::<Vec<_>>()))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_dataset, ScenarioConfig};

    #[test]
    fn batches_keep_partial_tail_but_not_singletons() {
        assert_eq!(batch_bounds(10, 4), vec![(0, 4), (4, 8), (8, 10)]);
        assert_eq!(batch_bounds(9, 4), vec![(0, 4), (4, 9)]);
        assert_eq!(batch_bounds(3, 5), vec![(0, 3)]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { lr_decay: 1.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn single_epoch_run() {
        let cfg = ScenarioConfig::new(1, 2);
        let train_set = generate_dataset(&cfg, 300, 1).unwrap();
        let val_set = generate_dataset(&cfg, 100, 2).unwrap();
        let spec = ArchitectureSpec::new(1, 2);
        let config = TrainConfig { batch_size: 64, max_epochs: 1, ..Default::default() };
        let out = train(&train_set, &val_set, &spec, &config).unwrap();
        assert_eq!(out.history.epochs(), 1);
        assert_eq!(out.history.train_loss.len(), 1);
        assert_eq!(out.history.learning_rate, vec![1e-3]);
    }

    #[test]
    fn mismatched_sets_are_rejected() {
        let train_set = generate_dataset(&ScenarioConfig::new(1, 2), 10, 1).unwrap();
        let val_set = generate_dataset(&ScenarioConfig::new(1, 3), 10, 2).unwrap();
        let spec = ArchitectureSpec::new(1, 2);
        assert!(train(&train_set, &val_set, &spec, &TrainConfig::default()).is_err());
    }

    #[test]
    fn predictions_are_unit_modulus_and_stable() {
        let spec = ArchitectureSpec::new(2, 4);
        let params: NetworkParams<f32> =
            init_network(&spec, &mut crate::rng::stream_rng(0, Domain::Init, 0)).unwrap();
        let ds = generate_dataset(&ScenarioConfig::new(2, 4), 20, 3).unwrap();
        for ch in &ds.samples {
            let a = predict(&params, ch).unwrap();
            assert!(a.as_slice().iter().all(|z| (z.norm() - 1.0).abs() < 1e-9));
            assert_eq!(a, predict(&params, ch).unwrap());
        }
        let wrong = generate_dataset(&ScenarioConfig::new(1, 4), 1, 3).unwrap();
        assert!(predict(&params, &wrong.samples[0]).is_err());
    }
}
