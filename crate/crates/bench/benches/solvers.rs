use std::hint::black_box;

use amcsim::egv::{jacobian_egv, EgvCircuit};
use amcsim::inv::{jacobian_inv, InvCircuit};
use amcsim::mvm::{jacobian_mvm, MvmCircuit};
use amcsim::oracle::oracle_inv;
use amcsim_bench::{fixture, SIZES};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assembly");
    for n in SIZES {
        let f = fixture(n);
        g.bench_with_input(BenchmarkId::new("inv", n), &f, |b, f| {
            b.iter(|| jacobian_inv(black_box(&f.model)))
        });
        g.bench_with_input(BenchmarkId::new("egv", n), &f, |b, f| {
            b.iter(|| jacobian_egv(black_box(&f.model), f.lambda_max))
        });
        g.bench_with_input(BenchmarkId::new("mvm", n), &f, |b, f| {
            b.iter(|| jacobian_mvm(black_box(&f.model)))
        });
    }
    g.finish();
}

/// Assembly, ordering and numeric factorization.
fn factor(c: &mut Criterion) {
    let mut g = c.benchmark_group("factor");
    g.sample_size(10);
    for n in SIZES {
        let f = fixture(n);
        g.bench_with_input(BenchmarkId::new("inv", n), &f, |b, f| {
            b.iter(|| InvCircuit::new(black_box(&f.model)))
        });
        g.bench_with_input(BenchmarkId::new("egv", n), &f, |b, f| {
            b.iter(|| EgvCircuit::new(black_box(&f.model), f.lambda_max))
        });
        g.bench_with_input(BenchmarkId::new("mvm", n), &f, |b, f| {
            b.iter(|| MvmCircuit::new(black_box(&f.model)))
        });
    }
    g.finish();
}

/// Triangular solves and refinement on a prepared factorization.
fn solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve");
    for n in SIZES {
        let f = fixture(n);
        let inv = InvCircuit::new(&f.model).unwrap();
        let egv = EgvCircuit::new(&f.model, f.lambda_max).unwrap();
        let mvm = MvmCircuit::new(&f.model).unwrap();
        g.bench_function(BenchmarkId::new("inv", n), |b| {
            b.iter(|| inv.solve_linear_system(black_box(&f.currents)))
        });
        g.bench_function(BenchmarkId::new("egv", n), |b| b.iter(|| egv.solve()));
        g.bench_function(BenchmarkId::new("mvm", n), |b| {
            b.iter(|| mvm.solve(black_box(&f.voltages)))
        });
    }
    g.finish();
}

/// Full nodal analysis, for contrast with the reduced system.
fn netlist(c: &mut Criterion) {
    let mut g = c.benchmark_group("netlist");
    g.sample_size(10);
    for n in [8, 16, 32] {
        let f = fixture(n);
        g.bench_with_input(BenchmarkId::new("inv", n), &f, |b, f| {
            b.iter(|| oracle_inv(black_box(&f.model), &f.currents))
        });
    }
    g.finish();
}

criterion_group!(benches, assembly, factor, solve, netlist);
criterion_main!(benches);
