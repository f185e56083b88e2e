//! Method comparisons over test ensembles: ratio tables, N/M sweeps, runtime
//! benchmarks and the coherence-time budget.

mod report;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{closed_form_single_antenna, random_phase};
use crate::channel::{generate_dataset, ChannelRealization, Dataset, ScenarioConfig};
use crate::error::{argument, Error, Result};
use crate::nn::{predict, predict_batch, NetworkParams};
use crate::objective::{channel_gain, rate, snr_from_gain, PhaseVector};
use crate::rng::{child_seed, stream_rng, Domain};
use crate::sdr::{sdr_beamform, SolverOptions};

pub use report::{
    write_history_plot, write_report_csv, write_sweep_csv, write_sweep_plot, write_timing_csv, REPORT_FORMAT_VERSION,
};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Phase-shift design methods the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ClosedForm,
    Random,
    Sdr,
    Nn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::ClosedForm, Method::Random, Method::Sdr, Method::Nn];

    pub fn name(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::Random => "random",
            Method::Sdr => "sdr",
            Method::Nn => "nn",
        }
    }

    // Stable per-method stream tag, independent of the order methods are listed in.
    fn tag(self) -> u64 {
        match self {
            Method::ClosedForm => 1,
            Method::Random => 2,
            Method::Sdr => 3,
            Method::Nn => 4,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| argument(format!("unknown method '{s}' (expected closed-form, random, sdr or nn)")))
    }
}

/// Everything a method needs besides the channel: solver settings, the
/// trained network (for `nn`) and the seed behind the random streams.
#[derive(Debug, Clone, Default)]
pub struct EvalContext {
    pub solver: SolverOptions,
    pub model: Option<NetworkParams<f32>>,
    pub seed: u64,
}

impl EvalContext {
    pub fn new(seed: u64) -> Self {
        Self { seed, ..Default::default() }
    }

    pub fn with_model(mut self, model: NetworkParams<f32>) -> Self {
        self.model = Some(model);
        self
    }

    /// Checks that `method` can run on `(m, n)` channels.
    pub fn check(&self, method: Method, m: usize, n: usize) -> Result<()> {
        match method {
            Method::ClosedForm if m != 1 => {
                Err(argument(format!("closed-form requires a single-antenna AP (M = 1), test set has M = {m}")))
            }
            Method::Sdr => self.solver.validate(),
            Method::Nn => match &self.model {
                None => Err(argument("method nn needs a model")),
                Some(p) if (p.spec.m, p.spec.n) != (m, n) => Err(argument(format!(
                    "model is for (M, N) = ({}, {}), test set is ({m}, {n})",
                    p.spec.m, p.spec.n
                ))),
                Some(_) => Ok(()),
            },
            _ => Ok(()),
        }
    }

    /// Runs one method on instance `index`. The second value flags a solver
    /// that hit its iteration cap.
    pub fn design(&self, method: Method, ch: &ChannelRealization, index: u64) -> Result<(PhaseVector, bool)> {
        let mut rng = stream_rng(child_seed(self.seed, method.tag()), Domain::Evaluation, index);
        match method {
            Method::ClosedForm => Ok((closed_form_single_antenna(ch)?, false)),
            Method::Random => Ok((random_phase(&mut rng, ch.n())?, false)),
            Method::Sdr => {
                let out = sdr_beamform(ch, &self.solver, &mut rng)?;
                let warn = !out.converged();
                Ok((out.theta, warn))
            }
            Method::Nn => Ok((predict(self.model.as_ref().ok_or_else(|| argument("method nn needs a model"))?, ch)?, false)),
        }
    }
}

/// Summary statistics of one method over an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodStats {
    pub method: Method,
    pub mean_gain: f64,
    pub std_gain: f64,
    /// Mean of `log2(1 + (p/σ²)·gain)` in bit/s/Hz.
    pub mean_rate: f64,
    /// `100·mean_gain / reference mean_gain`.
    pub ratio_pct: f64,
    /// `100·mean_rate / reference mean_rate`.
    pub rate_ratio_pct: f64,
    pub mean_ms: f64,
    pub median_ms: f64,
    /// Instances whose solver stopped at its iteration cap.
    pub warnings: usize,
}

/// Per-method results on one test ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub m: usize,
    pub n: usize,
    pub samples: usize,
    pub dataset_seed: u64,
    pub eval_seed: u64,
    pub reference: Method,
    pub methods: Vec<MethodStats>,
}

impl ExperimentReport {
    pub fn get(&self, method: Method) -> Option<&MethodStats> {
        self.methods.iter().find(|s| s.method == method)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    (xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    if v.len() % 2 == 1 {
        v[k]
    } else {
        0.5 * (v[k - 1] + v[k])
    }
}

struct InstanceResult {
    gain: f64,
    ms: f64,
    warn: bool,
}

/// Evaluates every method on every instance of `test_set` and reports each
/// method's mean gain relative to `reference`.
///
/// Instance `i` of method `k` uses its own random stream, so the gains do not
/// depend on the thread count. Timings do.
pub fn evaluate_methods(
    methods: &[Method],
    test_set: &Dataset,
    reference: Method,
    ctx: &EvalContext,
) -> Result<ExperimentReport> {
    if methods.is_empty() {
        return Err(argument("no methods to evaluate"));
    }
    if !methods.contains(&reference) {
        return Err(argument(format!("reference method {reference} is not among the evaluated methods")));
    }
    for (i, a) in methods.iter().enumerate() {
        if methods[..i].contains(a) {
            return Err(argument(format!("method {a} listed twice")));
        }
    }
    if test_set.is_empty() {
        return Err(argument("test set is empty"));
    }
    let (m, n) = test_set.dims();
    for &method in methods {
        ctx.check(method, m, n)?;
    }

    let mut raw = Vec::with_capacity(methods.len());
    for &method in methods {
        let results: Vec<InstanceResult> = test_set
            .samples
            .par_iter()
            .enumerate()
            .map(|(i, ch)| {
                let start = Instant::now();
                let (theta, warn) = ctx.design(method, ch, i as u64)?;
                let ms = start.elapsed().as_secs_f64() * 1e3;
                Ok(InstanceResult { gain: channel_gain(ch, &theta)?, ms, warn })
            })
            .collect::<Result<_>>()?;
        raw.push((method, results));
    }

    let summarize = |method: Method, results: &[InstanceResult]| {
        let gains: Vec<f64> = results.iter().map(|r| r.gain).collect();
        let rates: Vec<f64> = gains.iter().map(|&g| rate(snr_from_gain(g, &test_set.config))).collect();
        let ms: Vec<f64> = results.iter().map(|r| r.ms).collect();
        MethodStats {
            method,
            mean_gain: mean(&gains),
            std_gain: sample_std(&gains),
            mean_rate: mean(&rates),
            ratio_pct: 0.0,
            rate_ratio_pct: 0.0,
            mean_ms: mean(&ms),
            median_ms: median(&ms),
            warnings: results.iter().filter(|r| r.warn).count(),
        }
    };
    let mut stats: Vec<MethodStats> = raw.iter().map(|(method, r)| summarize(*method, r)).collect();
    let ref_stats = stats.iter().find(|s| s.method == reference).expect("reference present").clone();
    for s in &mut stats {
        s.ratio_pct = ratio(s.mean_gain, ref_stats.mean_gain);
        s.rate_ratio_pct = ratio(s.mean_rate, ref_stats.mean_rate);
    }
    Ok(ExperimentReport {
        m,
        n,
        samples: test_set.len(),
        dataset_seed: test_set.seed,
        eval_seed: ctx.seed,
        reference,
        methods: stats,
    })
}

fn ratio(value: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        100.0 * value / reference
    } else if value == reference {
        100.0
    } else {
        f64::INFINITY
    }
}

/// Which scenario dimension a sweep varies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepAxis {
    N(Vec<usize>),
    M(Vec<usize>),
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::N(_) => "N",
            SweepAxis::M(_) => "M",
        }
    }

    pub fn values(&self) -> &[usize] {
        match self {
            SweepAxis::N(v) | SweepAxis::M(v) => v,
        }
    }

    fn config_at(&self, base: &ScenarioConfig, value: usize) -> ScenarioConfig {
        let mut cfg = base.clone();
        match self {
            SweepAxis::N(_) => cfg.n = value,
            SweepAxis::M(_) => cfg.m = value,
        }
        cfg
    }
}

/// Whether a method's mean gain and rate grow along the axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Monotonicity {
    pub method: Method,
    pub gain_increasing: bool,
    pub rate_increasing: bool,
    /// Axis values at which the mean gain failed to increase over the previous point.
    pub gain_violations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub reports: Vec<ExperimentReport>,
    pub diagnostics: Vec<Monotonicity>,
}

/// Test-set recipe shared by every sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub axis: SweepAxis,
    pub base: ScenarioConfig,
    pub samples: usize,
    pub dataset_seed: u64,
}

/// Runs [`evaluate_methods`] at each axis point on a freshly generated test
/// set. `context_for(m, n)` supplies the per-point context (e.g. a model
/// trained for those dimensions).
pub fn sweep<F>(plan: &SweepPlan, methods: &[Method], reference: Method, mut context_for: F) -> Result<SweepResult>
where
    F: FnMut(usize, usize) -> Result<EvalContext>,
{
    if plan.axis.values().is_empty() {
        return Err(argument("sweep axis is empty"));
    }
    let mut reports = Vec::new();
    for &value in plan.axis.values() {
        let cfg = plan.axis.config_at(&plan.base, value);
        let test = generate_dataset(&cfg, plan.samples, plan.dataset_seed)?;
        let ctx = context_for(cfg.m, cfg.n)?;
        reports.push(evaluate_methods(methods, &test, reference, &ctx)?);
    }
    let diagnostics = methods
        .iter()
        .map(|&method| {
            let series: Vec<&MethodStats> = reports.iter().map(|r| r.get(method).expect("evaluated")).collect();
            let gain_violations: Vec<usize> = series
                .windows(2)
                .zip(&plan.axis.values()[1..])
                .filter(|(w, _)| !(w[1].mean_gain > w[0].mean_gain))
                .map(|(_, &v)| v)
                .collect();
            Monotonicity {
                method,
                gain_increasing: gain_violations.is_empty(),
                rate_increasing: series.windows(2).all(|w| w[1].mean_rate > w[0].mean_rate),
                gain_violations,
            }
        })
        .collect();
    Ok(SweepResult { axis: plan.axis.clone(), reports, diagnostics })
}

/// Timing of one method at one `(M, N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub m: usize,
    pub n: usize,
    pub method: Method,
    pub repetitions: usize,
    /// Mean single-instance latency.
    pub mean_ms: f64,
    pub median_ms: f64,
    pub min_ms: f64,
    /// Per-instance cost when all repetitions are processed in one call
    /// (batched inference for `nn`, equal to `mean_ms` for the others).
    pub batched_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
}

impl TimingTable {
    pub fn get(&self, m: usize, n: usize, method: Method) -> Option<&TimingRow> {
        self.rows.iter().find(|r| (r.m, r.n, r.method) == (m, n, method))
    }

    /// How many times faster `method` is than `baseline` at `(m, n)`, on the
    /// average per-instance cost (`batched_ms`).
    pub fn speedup(&self, m: usize, n: usize, method: Method, baseline: Method) -> Option<f64> {
        Some(self.get(m, n, baseline)?.batched_ms / self.get(m, n, method)?.batched_ms)
    }

    /// Like [`speedup`](Self::speedup) but on single-instance latency (`mean_ms`).
    pub fn latency_speedup(&self, m: usize, n: usize, method: Method, baseline: Method) -> Option<f64> {
        Some(self.get(m, n, baseline)?.mean_ms / self.get(m, n, method)?.mean_ms)
    }
}

/// Minimum repetitions accepted by [`benchmark_runtime`].
pub const MIN_REPETITIONS: usize = 10;

/// Times each method on `repetitions` fresh instances per configuration,
/// sequentially on the calling thread. Instance generation and model setup
/// are outside the timed region, and one warm-up run per method is discarded.
pub fn benchmark_runtime<F>(
    methods: &[Method],
    configs: &[ScenarioConfig],
    repetitions: usize,
    seed: u64,
    mut context_for: F,
) -> Result<TimingTable>
where
    F: FnMut(usize, usize) -> Result<EvalContext>,
{
    if repetitions < MIN_REPETITIONS {
        return Err(argument(format!("repetitions must be >= {MIN_REPETITIONS} (got {repetitions})")));
    }
    if configs.is_empty() || methods.is_empty() {
        return Err(argument("benchmark needs at least one configuration and one method"));
    }
    let mut table = TimingTable::default();
    for (ci, cfg) in configs.iter().enumerate() {
        let instances = generate_dataset(cfg, repetitions + 1, child_seed(seed, ci as u64))?;
        let ctx = context_for(cfg.m, cfg.n)?;
        for &method in methods {
            ctx.check(method, cfg.m, cfg.n)?;
            let (warm, timed) = instances.samples.split_first().expect("non-empty");
            std::hint::black_box(ctx.design(method, warm, u64::MAX)?);
            let mut ms = Vec::with_capacity(repetitions);
            for (i, ch) in timed.iter().enumerate() {
                let start = Instant::now();
                std::hint::black_box(ctx.design(method, ch, i as u64)?);
                ms.push(start.elapsed().as_secs_f64() * 1e3);
            }
            let batched_ms = match (&ctx.model, method) {
                (Some(model), Method::Nn) => {
                    let start = Instant::now();
                    std::hint::black_box(predict_batch(model, timed)?);
                    start.elapsed().as_secs_f64() * 1e3 / timed.len() as f64
                }
                _ => mean(&ms),
            };
            table.rows.push(TimingRow {
                m: cfg.m,
                n: cfg.n,
                method,
                repetitions,
                mean_ms: mean(&ms),
                median_ms: median(&ms),
                min_ms: ms.iter().copied().fold(f64::INFINITY, f64::min),
                batched_ms,
            });
        }
    }
    Ok(table)
}

/// Channel coherence time in seconds, `9/(16π·f_d)` with Doppler shift
/// `f_d = v·f_c/c`.
pub fn coherence_time(v_max: f64, f_c: f64) -> Result<f64> {
    if !(v_max > 0.0 && v_max.is_finite()) || !(f_c > 0.0 && f_c.is_finite()) {
        return Err(Error::Domain(format!("speed and carrier frequency must be positive (got {v_max}, {f_c})")));
    }
    let f_d = v_max * f_c / SPEED_OF_LIGHT;
    Ok(9.0 / (16.0 * std::f64::consts::PI * f_d))
}
