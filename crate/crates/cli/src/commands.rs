use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use risbf_core::channel::{generate_dataset, Dataset, ScenarioConfig};
use risbf_core::error::Error as CoreError;
use risbf_core::harness::{
    benchmark_runtime, coherence_time, evaluate_methods, sweep, write_history_plot, write_report_csv, write_sweep_csv,
    write_sweep_plot, write_timing_csv, EvalContext, ExperimentReport, Method, SweepAxis, SweepPlan,
};
use risbf_core::nn::{init_network, train_with_observer, ArchitectureSpec, NetworkParams};
use risbf_core::rng::{stream_rng, Domain};

use crate::config::{RunConfig, Settings};
use crate::{Axis, Cli, CliError, Command};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    let mut settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    for pair in &cli.overrides {
        settings.set_pair(pair)?;
    }
    if let Some(seed) = cli.seed {
        settings.set("seed", seed);
    }
    match &cli.command {
        Command::GenData { count, m, n, .. } => {
            count.map(|v| settings.set("count", v));
            m.map(|v| settings.set("m", v));
            n.map(|v| settings.set("n", v));
        }
        Command::Train { max_epochs, batch_size, lr, .. } => {
            max_epochs.map(|v| settings.set("max_epochs", v));
            batch_size.map(|v| settings.set("batch_size", v));
            lr.map(|v| settings.set("lr", v));
        }
        Command::Sweep { count, .. } => {
            count.map(|v| settings.set("count", v));
        }
        _ => {}
    }
    let rc = settings.resolve()?;

    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("cannot start thread pool: {e}")))?;
    }
    let threads = rayon::current_num_threads();
    let provenance = |command: &str, extra: &[(&str, String)]| {
        let mut s = format!("command = {command}\nthreads = {threads}\n{}", rc.echo);
        for (k, v) in extra {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    };

    match cli.command {
        Command::GenData { out, .. } => gen_data(&rc, &out),
        Command::Train { train_path, val_path, model_out, history, plot, quiet, .. } => {
            let history = history.unwrap_or_else(|| model_out.with_extension("history.csv"));
            let header = provenance(
                "train",
                &[("train", train_path.display().to_string()), ("val", val_path.display().to_string())],
            );
            train(&rc, &train_path, &val_path, &model_out, &history, plot.as_deref(), quiet, &header)
        }
        Command::Eval { test, methods, reference, model, out, no_timing } => {
            let header = provenance("eval", &[("test", test.display().to_string())]);
            eval(&rc, &test, &methods, &reference, model.as_deref(), out.as_deref(), no_timing, &header)
        }
        Command::Bench { configs, methods, repetitions, model, baseline, out } => {
            let header = provenance("bench", &[("repetitions", repetitions.to_string())]);
            bench(&rc, &configs, &methods, repetitions, model.as_deref(), &baseline, out.as_deref(), &header)
        }
        Command::Sweep { axis, values, methods, reference, model, out, plot, no_timing, .. } => {
            let header = provenance("sweep", &[]);
            let axis = match axis {
                Axis::N => SweepAxis::N(values),
                Axis::M => SweepAxis::M(values),
            };
            run_sweep(&rc, axis, &methods, &reference, model.as_deref(), &out, plot.as_deref(), no_timing, &header)
        }
        Command::Coherence { speed, carrier } => {
            let tc = coherence_time(speed, carrier)?;
            println!("coherence time: {:.3} ms (v = {speed} m/s, f_c = {carrier} Hz)", tc * 1e3);
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).map_err(|e| match e {
        CoreError::Io(io) => CliError::Usage(format!("cannot read dataset {}: {io}", path.display())),
        other => CliError::Usage(format!("{}: {other}", path.display())),
    })
}

// Unreadable or malformed models are input errors (exit 2), like datasets.
fn load_model(path: &Path) -> risbf_core::error::Result<NetworkParams<f32>> {
    NetworkParams::<f32>::load_model(path).map_err(|e| match e {
        CoreError::Io(io) => CoreError::Argument(format!("cannot read model {}: {io}", path.display())),
        CoreError::Format(msg) => CoreError::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    let methods: Vec<Method> = names.iter().map(|s| s.parse()).collect::<std::result::Result<_, _>>()?;
    if methods.is_empty() {
        return Err(CliError::Usage("no methods given".into()));
    }
    Ok(methods)
}

fn expand_template(template: &str, m: usize, n: usize) -> PathBuf {
    PathBuf::from(template.replace("{m}", &m.to_string()).replace("{n}", &n.to_string()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn gen_data(rc: &RunConfig, out: &Path) -> Result<()> {
    let ds = generate_dataset(&rc.scenario, rc.count, rc.seed)?;
    let bytes = ds.to_bytes()?;
    let mut w = create(out)?;
    w.write_all(&bytes)?;
    w.flush()?;
    println!("wrote {} samples (M = {}, N = {}, seed = {}) to {}", ds.len(), ds.config.m, ds.config.n, rc.seed, out.display());
    println!("sha256 {}", sha256_hex(&bytes));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    rc: &RunConfig,
    train_path: &Path,
    val_path: &Path,
    model_out: &Path,
    history_path: &Path,
    plot: Option<&Path>,
    quiet: bool,
    header: &str,
) -> Result<()> {
    let train_set = load_dataset(train_path)?;
    let val_set = load_dataset(val_path)?;
    if train_set.dims() != val_set.dims() {
        return Err(CliError::Usage(format!(
            "training set is (M, N) = {:?} but validation set is {:?}",
            train_set.dims(),
            val_set.dims()
        )));
    }
    let (m, n) = train_set.dims();
    let spec = ArchitectureSpec::new(m, n);
    let outcome = train_with_observer(&train_set, &val_set, &spec, &rc.train, |e| {
        if !quiet {
            eprintln!(
                "epoch {:>4}  train {:.6e}  val {:.6e}  lr {:.3e}",
                e.epoch, e.train_loss, e.val_loss, e.learning_rate
            );
        }
    })?;
    let model_bytes = outcome.params.to_model_bytes()?;
    let mut w = create(model_out)?;
    w.write_all(&model_bytes)?;
    w.flush()?;
    outcome.history.write_csv(create(history_path)?, header)?;
    if let Some(plot) = plot {
        write_history_plot(
            create(plot)?,
            &history_path.display().to_string(),
            &plot.with_extension("png").display().to_string(),
        )?;
    }
    let h = &outcome.history;
    println!(
        "trained {} epochs, best epoch {} (val loss {:.6e}); model {} (sha256 {}), history {}",
        h.epochs(),
        h.best_epoch + 1,
        h.best_val_loss().unwrap_or(f64::NAN),
        model_out.display(),
        sha256_hex(&model_bytes),
        history_path.display()
    );
    Ok(())
}

fn print_report(r: &ExperimentReport) {
    println!("M = {}, N = {}, {} instances, reference {}", r.m, r.n, r.samples, r.reference);
    println!("{:<12} {:>12} {:>10} {:>10} {:>10} {:>10}", "method", "mean_gain", "rate", "ratio%", "rate%", "mean_ms");
    for s in &r.methods {
        println!(
            "{:<12} {:>12.5e} {:>10.4} {:>10.2} {:>10.2} {:>10.4}",
            s.method.name(),
            s.mean_gain,
            s.mean_rate,
            s.ratio_pct,
            s.rate_ratio_pct,
            s.mean_ms
        );
        if s.warnings > 0 {
            eprintln!("warning: {} of {} {} solves hit the iteration cap", s.warnings, r.samples, s.method);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn eval(
    rc: &RunConfig,
    test: &Path,
    methods: &[String],
    reference: &str,
    model: Option<&Path>,
    out: Option<&Path>,
    no_timing: bool,
    header: &str,
) -> Result<()> {
    let methods = parse_methods(methods)?;
    let reference: Method = reference.parse()?;
    let test_set = load_dataset(test)?;
    let mut ctx = EvalContext { solver: rc.solver.clone(), model: None, seed: rc.seed };
    if let Some(path) = model {
        ctx.model = Some(load_model(path)?);
    }
    let report = evaluate_methods(&methods, &test_set, reference, &ctx)?;
    print_report(&report);
    if let Some(out) = out {
        write_report_csv(create(out)?, std::slice::from_ref(&report), header, !no_timing)?;
    }
    Ok(())
}

fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let bad = || CliError::Usage(format!("configuration '{s}' is not of the form MxN"));
    let (m, n) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((m.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?))
}

fn context_for(
    rc: &RunConfig,
    model: Option<&str>,
    needs_model: bool,
    m: usize,
    n: usize,
) -> risbf_core::error::Result<EvalContext> {
    let mut ctx = EvalContext { solver: rc.solver.clone(), model: None, seed: rc.seed };
    if needs_model {
        ctx.model = Some(match model {
            Some(t) => load_model(&expand_template(t, m, n))?,
            None => init_network(&ArchitectureSpec::new(m, n), &mut stream_rng(rc.seed, Domain::Init, 0))?,
        });
    }
    Ok(ctx)
}

#[allow(clippy::too_many_arguments)]
fn bench(
    rc: &RunConfig,
    configs: &[String],
    methods: &[String],
    repetitions: usize,
    model: Option<&str>,
    baseline: &str,
    out: Option<&Path>,
    header: &str,
) -> Result<()> {
    let dims: Vec<(usize, usize)> =
        configs.iter().filter(|s| !s.trim().is_empty()).map(|s| parse_dims(s)).collect::<Result<_>>()?;
    if dims.is_empty() {
        return Err(CliError::Usage("bench needs at least one MxN configuration".into()));
    }
    let methods = parse_methods(methods)?;
    let baseline: Method = baseline.parse()?;
    let needs_model = methods.contains(&Method::Nn);
    if needs_model && model.is_none() {
        eprintln!("note: timing nn on a freshly initialized network (weights do not change its cost)");
    }
    let scenarios: Vec<ScenarioConfig> =
        dims.iter().map(|&(m, n)| ScenarioConfig { m, n, ..rc.scenario.clone() }).collect();
    for s in &scenarios {
        s.validate()?;
    }
    // Timing loops run on one thread regardless of --threads.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| CliError::Runtime(e.to_string()))?;
    let table = pool.install(|| {
        benchmark_runtime(&methods, &scenarios, repetitions, rc.seed, |m, n| context_for(rc, model, needs_model, m, n))
    })?;
    println!(
        "{:<8} {:<12} {:>12} {:>12} {:>12} {:>10} {:>12}",
        "config", "method", "mean_ms", "median_ms", "batched_ms", "speedup", "lat_speedup"
    );
    for r in &table.rows {
        let fmt = |s: Option<f64>| s.map(|s| format!("{s:.1}")).unwrap_or_default();
        println!(
            "{:<8} {:<12} {:>12.5} {:>12.5} {:>12.5} {:>10} {:>12}",
            format!("{}x{}", r.m, r.n),
            r.method.name(),
            r.mean_ms,
            r.median_ms,
            r.batched_ms,
            fmt(table.speedup(r.m, r.n, r.method, baseline)),
            fmt(table.latency_speedup(r.m, r.n, r.method, baseline)),
        );
    }
    if let Some(out) = out {
        write_timing_csv(create(out)?, &table, Some(baseline), header)?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    rc: &RunConfig,
    axis: SweepAxis,
    methods: &[String],
    reference: &str,
    model: Option<&str>,
    out: &Path,
    plot: Option<&Path>,
    no_timing: bool,
    header: &str,
) -> Result<()> {
    let methods = parse_methods(methods)?;
    let reference: Method = reference.parse()?;
    let needs_model = methods.contains(&Method::Nn);
    if needs_model && model.is_none() {
        return Err(CliError::Usage("sweep with nn needs --model (a path template with {m} and {n})".into()));
    }
    let plan = SweepPlan { axis, base: rc.scenario.clone(), samples: rc.count, dataset_seed: rc.seed };
    let result = sweep(&plan, &methods, reference, |m, n| context_for(rc, model, needs_model, m, n))?;
    for r in &result.reports {
        print_report(r);
    }
    for d in &result.diagnostics {
        if !d.gain_increasing {
            eprintln!("note: {} mean gain does not increase at {} = {:?}", d.method, result.axis.name(), d.gain_violations);
        }
    }
    write_sweep_csv(create(out)?, &result, header, !no_timing)?;
    if let Some(plot) = plot {
        write_sweep_plot(create(plot)?, &result, &out.display().to_string(), &plot.with_extension("png").display().to_string())?;
    }
    Ok(())
}
