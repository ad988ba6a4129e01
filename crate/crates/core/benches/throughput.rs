use std::f64::consts::PI;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use harmflow::analyzer;
use harmflow::exec::Execution;
use harmflow::filter_design::reference_bank;
use harmflow::network;
use harmflow::simulator::{self, Scenario};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn scan(c: &mut Criterion) {
    let bank = reference_bank();
    let mut g = c.benchmark_group("impedance_scan");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 100_000), &exec, |b, &exec| {
            b.iter(|| network::scan_with(exec, &bank, 0.0016, 10.0, 5000.0, 100_000).unwrap())
        });
    }
    g.finish();
}

fn spectrum(c: &mut Criterion) {
    let fs = 1e5;
    let x: Vec<f64> = (0..10_000)
        .map(|k| {
            let t = k as f64 / fs;
            [(1.0, 10.0), (5.0, 2.0), (7.0, 1.4), (11.0, 0.5)]
                .iter()
                .map(|(h, a)| a * (2.0 * PI * h * 50.0 * t).sin())
                .sum()
        })
        .collect();
    let mut g = c.benchmark_group("spectrum");
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, 200), &exec, |b, &exec| {
            b.iter(|| analyzer::spectrum_with(exec, &x, fs, 50.0, 200).unwrap())
        });
    }
    g.finish();
}

fn batch(c: &mut Criterion) {
    let scenarios: Vec<Scenario> = [60.0, 70.0, 78.0, 90.0, 110.0, 140.0]
        .iter()
        .flat_map(|&r| {
            [Scenario::baseline(), Scenario::filtered()].map(|mut s| {
                s.load.load_resistance_ohm = r;
                s.solver.duration_s = 0.2;
                s
            })
        })
        .collect();
    let mut g = c.benchmark_group("scenario_batch");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new(name, scenarios.len()), &exec, |b, &exec| {
            b.iter(|| simulator::run_batch(exec, &scenarios))
        });
    }
    g.finish();
}

criterion_group!(benches, scan, spectrum, batch);
criterion_main!(benches);
