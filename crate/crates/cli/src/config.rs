//! Run configuration: a line-oriented `key = value` file, overridden by flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use risbf_core::channel::ScenarioConfig;
use risbf_core::nn::TrainConfig;
use risbf_core::sdr::SolverOptions;

use crate::CliError;

/// Every accepted key with its default, in echo order.
const KEYS: &[(&str, &str)] = &[
    ("m", "1"),
    ("n", "8"),
    ("d_ar", "8"),
    ("d0_min", "0"),
    ("d0_max", "8"),
    ("d1_min", "1"),
    ("d1_max", "6"),
    ("d_ref", "1"),
    ("snr_db", "10"),
    ("sigma2", "1"),
    ("count", "10000"),
    ("seed", "0"),
    ("batch_size", "5000"),
    ("lr", "0.001"),
    ("max_epochs", "1000"),
    ("early_stop_patience", "30"),
    ("plateau_patience", "15"),
    ("lr_decay", "0.33"),
    ("sdr_trials", "100"),
    ("sdr_tol", "1e-7"),
    ("sdr_restarts", "20"),
    ("sdr_max_iters", "5000"),
];

pub const SEED_ENV: &str = "RISBF_SEED";

/// Raw key/value layers before parsing.
#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn check_key(key: &str, origin: &str) -> Result<(), CliError> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("unknown config key '{key}' ({origin})")))
    }
}

impl Settings {
    pub fn parse_file_text(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut s = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected 'key = value'", lineno + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            check_key(k, &format!("{origin}:{}", lineno + 1))?;
            s.values.insert(k.to_string(), v.to_string());
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_file_text(&text, &path.display().to_string())
    }

    /// Applies a `key=value` override from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) =
            pair.split_once('=').ok_or_else(|| CliError::Usage(format!("--set expects key=value (got '{pair}')")))?;
        check_key(k.trim(), "--set")?;
        self.values.insert(k.trim().to_string(), v.trim().to_string());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        debug_assert!(KEYS.iter().any(|(k, _)| *k == key));
        self.values.insert(key.to_string(), value.to_string());
    }

    fn raw(&self, key: &str) -> String {
        if let Some(v) = self.values.get(key) {
            return v.clone();
        }
        if key == "seed" {
            if let Ok(v) = std::env::var(SEED_ENV) {
                return v;
            }
        }
        KEYS.iter().find(|(k, _)| *k == key).expect("known key").1.to_string()
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.raw(key);
        raw.parse().map_err(|_| CliError::Usage(format!("config key '{key}' has invalid value '{raw}'")))
    }

    /// Parses and validates every field.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let scenario = ScenarioConfig {
            m: self.get("m")?,
            n: self.get("n")?,
            d_ar: self.get("d_ar")?,
            d0_range: (self.get("d0_min")?, self.get("d0_max")?),
            d1_range: (self.get("d1_min")?, self.get("d1_max")?),
            d_ref: self.get("d_ref")?,
            snr_db: self.get("snr_db")?,
            sigma2: self.get("sigma2")?,
        };
        scenario.validate().map_err(CliError::from_core)?;
        let seed = self.get("seed")?;
        let train = TrainConfig {
            batch_size: self.get("batch_size")?,
            init_lr: self.get("lr")?,
            max_epochs: self.get("max_epochs")?,
            early_stop_patience: self.get("early_stop_patience")?,
            plateau_patience: self.get("plateau_patience")?,
            lr_decay: self.get("lr_decay")?,
            seed,
        };
        train.validate().map_err(CliError::from_core)?;
        let solver = SolverOptions {
            trials: self.get("sdr_trials")?,
            tol: self.get("sdr_tol")?,
            restarts: self.get("sdr_restarts")?,
            max_iters: self.get("sdr_max_iters")?,
            rank: None,
            seed,
        };
        solver.validate().map_err(CliError::from_core)?;
        let count: usize = self.get("count")?;
        if count == 0 {
            return Err(CliError::Usage("config key 'count' must be >= 1".into()));
        }
        let mut echo = String::new();
        for (k, _) in KEYS {
            let _ = writeln!(echo, "{k} = {}", self.raw(k));
        }
        Ok(RunConfig { scenario, train, solver, count, seed, echo })
    }
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub train: TrainConfig,
    pub solver: SolverOptions,
    pub count: usize,
    pub seed: u64,
    /// `key = value` lines for every key, echoed into output headers.
    pub echo: String,
}
