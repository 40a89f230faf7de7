use std::hint::black_box;

use coexist_bench::{cell, coexistence, rng, scan};
use coexist_core::coordination::{
    adapt_ed_threshold, channel_metrics, AdaptiveEdConfig, ChannelSelectConfig, RunningOn,
};
use coexist_core::propagation::{Building, PropagationModel};
use coexist_core::relay::{decode_beacon_bytes, encode_pseudo_beacon, ies_to_bytes};
use coexist_core::sensing::{
    ed_success_prob, fractional_ed_coverage, CoverageOptions, EdConfig, WIFI_MIN_SENSITIVITY_DBM,
};
use coexist_core::sim::run;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn beacon(c: &mut Criterion) {
    let info = cell("bench-cell", 40);
    let bytes = ies_to_bytes(&encode_pseudo_beacon(&info).unwrap());
    c.bench_function("beacon/encode", |b| {
        b.iter(|| encode_pseudo_beacon(black_box(&info)).unwrap())
    });
    c.bench_function("beacon/decode", |b| {
        b.iter(|| decode_beacon_bytes(black_box(&bytes)).unwrap())
    });
}

fn coordination(c: &mut Criterion) {
    let cfg = ChannelSelectConfig::default();
    let adapt = AdaptiveEdConfig::new(-62.0, -82.0);
    let mut g = c.benchmark_group("coordination");
    for n in [8, 64, 512] {
        let s = scan(n, 3);
        g.bench_with_input(BenchmarkId::new("channel_metrics", n), &s, |b, s| {
            b.iter(|| channel_metrics(s, &[36, 40, 44, 48], &cfg, RunningOn::LteEnb).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("adapt_threshold", n), &s, |b, s| {
            b.iter(|| adapt_ed_threshold(s, 36, &adapt))
        });
    }
    g.finish();
}

fn sensing(c: &mut Criterion) {
    let links = [-52.0; 10];
    c.bench_function("sensing/ed_success_prob", |b| {
        b.iter(|| ed_success_prob(black_box(&links), -62.0).unwrap())
    });
    let model = PropagationModel::inh();
    let ed = EdConfig {
        threshold_dbm: -62.0,
        min_sensitivity_dbm: WIFI_MIN_SENSITIVITY_DBM,
    };
    let opts = CoverageOptions {
        samples: 10_000,
        ..CoverageOptions::default()
    };
    c.bench_function("sensing/coverage_10k", |b| {
        b.iter(|| {
            fractional_ed_coverage(
                &Building::REFERENCE,
                Building::REFERENCE_BASE,
                20.0,
                &model,
                &ed,
                &opts,
                &mut rng(1),
            )
            .unwrap()
        })
    });
}

fn simulator(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulator");
    g.sample_size(10);
    for adaptive in [false, true] {
        let cfg = coexistence(2.0, adaptive);
        g.bench_with_input(BenchmarkId::new("coexistence_2s", adaptive), &cfg, |b, cfg| {
            b.iter(|| run(cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, beacon, coordination, sensing, simulator);
criterion_main!(benches);
