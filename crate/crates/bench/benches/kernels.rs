use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use twotime_bench::Fixture;
use twotime_core::channel::ChannelSample;
use twotime_core::fitness::{aar_over_samples, lbo_fitness, mbs_surrogate, spgm_fitness, ThetaChannel};
use twotime_core::rng::{stream, Domain};
use twotime_core::transceiver::{svd_basis, zf_slot_rate, ReflectionPath};
use twotime_core::{waterfill, SystemConfig};

fn bench_waterfill(c: &mut Criterion) {
    let mut g = c.benchmark_group("waterfill");
    for m in [2usize, 4, 8] {
        let levels: Vec<f64> = (0..m).map(|k| 0.1 * (k + 1) as f64).collect();
        g.bench_with_input(BenchmarkId::from_parameter(m), &levels, |b, l| b.iter(|| waterfill(black_box(l), 1.0).unwrap()));
    }
    g.finish();
}

fn bench_linear_algebra(c: &mut Criterion) {
    let fx = Fixture::default_with_samples(100, 1).unwrap();
    let path = ReflectionPath::from_g(&fx.st.g_mat);
    let tc = ThetaChannel::new(&fx.st, &path, &fx.theta).unwrap();
    let mut rb = stream(1, Domain::Test, 0);
    let mut rr = stream(1, Domain::Test, 1);
    let a = ChannelSample::initial(fx.st.n_tx(), fx.st.n_rx(), fx.st.n_irs(), &mut rb, &mut rr);
    let h = tc.effective(&a);
    let power = fx.samples.slot_power();
    c.bench_function("effective_channel", |b| b.iter(|| tc.effective(black_box(&a))));
    c.bench_function("svd_basis_8x4", |b| b.iter(|| svd_basis(black_box(&h), 4).unwrap()));
    c.bench_function("zf_slot_rate", |b| b.iter(|| zf_slot_rate(black_box(&h), black_box(&h), 4, power).unwrap()));
}

fn bench_fitness(c: &mut Criterion) {
    let fx = Fixture::default_with_samples(5000, 2).unwrap();
    let batch: Vec<usize> = fx.samples.batch_for_iteration(1).collect();
    let mut g = c.benchmark_group("fitness_per_particle");
    g.sample_size(20);
    g.bench_function("mbs_surrogate", |b| b.iter(|| mbs_surrogate(black_box(&fx.theta), &fx.samples, 1, 0.0).unwrap()));
    g.bench_function("aar_one_batch", |b| b.iter(|| aar_over_samples(black_box(&fx.theta), &fx.samples, &batch).unwrap()));
    g.bench_function("lbo", |b| b.iter(|| lbo_fitness(black_box(&fx.theta), &fx.scsi).unwrap()));
    g.bench_function("spgm", |b| b.iter(|| spgm_fitness(black_box(&fx.theta), &fx.scsi).unwrap()));
    g.finish();

    let small = Fixture::new(SystemConfig { n_samples: 500, ..SystemConfig::default() }, 3).unwrap();
    let all: Vec<usize> = (0..500).collect();
    let mut g = c.benchmark_group("fitness_full_batch");
    g.sample_size(10);
    g.bench_function("aar_500_samples", |b| b.iter(|| aar_over_samples(black_box(&small.theta), &small.samples, &all).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_waterfill, bench_linear_algebra, bench_fitness);
criterion_main!(benches);
