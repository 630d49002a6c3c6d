//! Benchmarks for the data-parallel chain stages.
//!
//! Build once with the default (rayon) feature and once sequentially to
//! compare; the group names carry the mode:
//!
//! ```bash
//! cargo bench -p dmf-core
//! cargo bench -p dmf-core --no-default-features
//! ```

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dmf_core::channel::{apply_bandwidth_limit, ChannelConfig};
use dmf_core::dsp::{cap_modulate, fir_apply, lowpass_design, normalize_unit_power, SystemParams};
use dmf_core::features::extract_features;
use dmf_core::neural::{backward, MlpParams, TrainConfig};
use dmf_core::receiver::{demodulate, qam_map};
use dmf_core::signal::RealSignal;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODE: &str = if cfg!(feature = "parallel") {
    "parallel"
} else {
    "sequential"
};

struct Fixture {
    sys: SystemParams,
    rx: RealSignal,
    reference: Vec<Complex64>,
    params: MlpParams,
    f_std: Vec<f64>,
}

fn fixture(k_symbols: usize) -> Fixture {
    let sys = SystemParams::ci();
    let pair = sys.nominal_pair().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let bits: Vec<bool> = (0..2 * k_symbols).map(|_| rng.gen()).collect();
    let stream = qam_map(&bits, 4).unwrap();
    let tx = normalize_unit_power(&cap_modulate(stream.symbols(), &pair).unwrap()).unwrap();
    let cfg = ChannelConfig::new(0.6, 25.0, 3, sys.bandwidth_hz);
    let rx = apply_bandwidth_limit(&tx, &cfg).unwrap();
    let params = MlpParams::residual_init(sys.filter_length, 5);
    let f_std: Vec<f64> = (0..16).map(|i| (i as f64 * 0.37).sin()).collect();
    Fixture {
        sys,
        rx,
        reference: stream.symbols().to_vec(),
        params,
        f_std,
    }
}

fn bench_pipeline(c: &mut Criterion) {
    let fx = fixture(4000);
    let pair = fx.sys.nominal_pair().unwrap();
    let (q, r) = pair.matched_taps();
    let lp = lowpass_design(101, 0.3).unwrap();
    let train = TrainConfig::default();

    let mut group = c.benchmark_group(format!("chain/{MODE}"));
    group.sample_size(20);

    group.bench_function(BenchmarkId::from_parameter("modulate_4k"), |b| {
        b.iter(|| cap_modulate(&fx.reference, &pair).unwrap())
    });
    group.bench_function(BenchmarkId::from_parameter("fir_101_taps"), |b| {
        b.iter(|| fir_apply(&fx.rx, &lp).unwrap())
    });
    group.bench_function(BenchmarkId::from_parameter("demodulate_4k"), |b| {
        b.iter(|| demodulate(&fx.rx, &q, &r, fx.sys.samples_per_symbol, 0, 4000).unwrap())
    });
    group.bench_function(BenchmarkId::from_parameter("features"), |b| {
        b.iter(|| extract_features(&fx.rx, fx.sys.samples_per_symbol).unwrap())
    });
    group.bench_function(BenchmarkId::from_parameter("backward"), |b| {
        b.iter(|| {
            backward(
                &fx.params,
                &fx.f_std,
                &pair,
                &fx.rx,
                &fx.reference,
                fx.sys.samples_per_symbol,
                0,
                &train,
            )
            .unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, bench_pipeline);
criterion_main!(benches);
