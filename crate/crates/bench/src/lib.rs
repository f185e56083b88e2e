//! Criterion benchmarks: channel generation, one SDR design and one network
//! inference, at the configurations the runtime comparison uses.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion};
use risbf_core::channel::{generate_dataset, sample_channels, sample_geometry, ScenarioConfig};
use risbf_core::nn::{init_network, predict, predict_batch, ArchitectureSpec, NetworkParams};
use risbf_core::rng::{stream_rng, Domain};
use risbf_core::sdr::{sdr_beamform, SolverOptions};

const CONFIGS: [(usize, usize); 3] = [(2, 8), (4, 16), (4, 32)];

pub fn channel_generation(c: &mut Criterion) {
    let mut group = c.benchmark_group("channel");
    for (m, n) in CONFIGS {
        let cfg = ScenarioConfig::new(m, n);
        let mut rng = stream_rng(1, Domain::Benchmark, 0);
        group.bench_function(BenchmarkId::from_parameter(format!("{m}x{n}")), |b| {
            b.iter(|| {
                let geo = sample_geometry(&mut rng, black_box(&cfg)).unwrap();
                sample_channels(&mut rng, &geo, &cfg).unwrap()
            })
        });
    }
    group.finish();
}

pub fn sdr_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("sdr");
    group.sample_size(10);
    for (m, n) in CONFIGS {
        let ch = &generate_dataset(&ScenarioConfig::new(m, n), 1, 2).unwrap().samples[0];
        let opts = SolverOptions::default();
        let mut rng = stream_rng(2, Domain::Benchmark, 0);
        group.bench_function(BenchmarkId::from_parameter(format!("{m}x{n}")), |b| {
            b.iter(|| sdr_beamform(black_box(ch), &opts, &mut rng).unwrap())
        });
    }
    group.finish();
}

pub fn nn_inference(c: &mut Criterion) {
    let mut group = c.benchmark_group("nn");
    for (m, n) in CONFIGS {
        // Weights do not affect the cost, so an untrained network suffices.
        let params: NetworkParams<f32> =
            init_network(&ArchitectureSpec::new(m, n), &mut stream_rng(3, Domain::Init, 0)).unwrap();
        let batch = generate_dataset(&ScenarioConfig::new(m, n), 1000, 3).unwrap();
        group.bench_function(BenchmarkId::new("single", format!("{m}x{n}")), |b| {
            b.iter(|| predict(&params, black_box(&batch.samples[0])).unwrap())
        });
        group.bench_function(BenchmarkId::new("batch1000", format!("{m}x{n}")), |b| {
            b.iter(|| predict_batch(&params, black_box(&batch.samples)).unwrap())
        });
    }
    group.finish();
}

pub fn benchmarks(c: &mut Criterion) {
    channel_generation(c);
    sdr_solve(c);
    nn_inference(c);
}
