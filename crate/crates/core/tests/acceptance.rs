//! Acceptance suite. Each test checks one criterion and prints a single
//! `[PASS]` / `[FAIL]` line with the measured values to stderr, uncaptured.
//! Tests hold a global lock so the runtime measurements are not disturbed.

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use amcsim::compensation::{search_optimal_bias, BiasSearchConfig, BiasSearchResult};
use amcsim::egv::{jacobian_egv, residual_egv, EgvCircuit, DEFAULT_V0};
use amcsim::experiment::{bench_scaling, BenchConfig};
use amcsim::inv::{jacobian_inv, residual_inv, InvCircuit};
use amcsim::mvm::{jacobian_mvm, residual_mvm, MvmCircuit};
use amcsim::oracle::{oracle_egv, oracle_inv, oracle_mvm};
use amcsim::reference::{dominant_eigen, eigenvector_error, ideal_inverse, relative_error};
use amcsim::sparse::SparseMatrix;
use amcsim::workload::{derive_seed, gen_input, gen_matrix, InputKind, MatrixKind, MatrixSpec};
use amcsim::{CircuitKind, CrossbarModel, RowMajor};
use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: u64 = 10;
const R_16NM: f64 = 4.53;

fn exclusive() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, title: &str, pass: bool, detail: String) {
    let tag = if pass { "PASS" } else { "FAIL" };
    // written to the raw handle so the verdict shows even for passing tests
    let _ = writeln!(std::io::stderr(), "[{tag}] criterion {id:>2}: {title} -- {detail}");
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

fn dds_model(n: usize, r: f64, seed: u64) -> CrossbarModel {
    let g = gen_matrix(&MatrixSpec::new(
        n,
        MatrixKind::DiagDominantSymmetric,
        derive_seed(seed, &[n as u64]),
    ))
    .unwrap();
    CrossbarModel::with_wire_resistance(g, r).unwrap()
}

#[test]
fn c01_inv_matches_the_netlist_oracle() {
    let _g = exclusive();
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for n in [2, 4, 8, 16, 32] {
        for r in [1.0, R_16NM] {
            for seed in 0..SEEDS {
                let m = dds_model(n, r, seed);
                let i_in: Vec<f64> = gen_input(n, InputKind::Current, seed).iter().map(|v| -v).collect();
                let x = InvCircuit::new(&m).unwrap().solve(&i_in).unwrap().output;
                worst = worst.max(relative_error(&x, &oracle_inv(&m, &i_in).unwrap()));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    report(
        1,
        "INV vs nodal oracle",
        worst <= 1e-8 && secs < 120.0,
        format!("max rel. error {worst:.2e} (tol 1e-8), {secs:.1} s (limit 120 s)"),
    );
}

#[test]
fn c02_mvm_matches_the_netlist_oracle() {
    let _g = exclusive();
    let mut worst = 0.0f64;
    for n in [2, 4, 8, 16, 32] {
        for r in [1.0, R_16NM] {
            for seed in 0..SEEDS {
                let m = dds_model(n, r, seed);
                let v = gen_input(n, InputKind::Voltage, seed);
                let y = MvmCircuit::new(&m).unwrap().solve(&v).unwrap().output;
                worst = worst.max(relative_error(&y, &oracle_mvm(&m, &v).unwrap()));
            }
        }
    }
    report(
        2,
        "MVM vs nodal oracle",
        worst <= 1e-8,
        format!("max rel. error {worst:.2e} (tol 1e-8)"),
    );
}

#[test]
fn c03_egv_recovers_the_dominant_eigenvector() {
    let _g = exclusive();
    let (mut worst_ideal, mut worst_oracle) = (0.0f64, 0.0f64);
    for n in [4, 8, 16] {
        for seed in 0..SEEDS {
            let m = dds_model(n, 1e-6, seed);
            let (lambda, ev) = dominant_eigen(m.g()).unwrap();
            let e = EgvCircuit::new(&m, lambda).unwrap().solve().unwrap().eigenvector;
            worst_ideal = worst_ideal.max(eigenvector_error(&e, &ev));

            let m1 = dds_model(n, 1.0, seed);
            let l1 = dominant_eigen(m1.g()).unwrap().0;
            let out = EgvCircuit::new(&m1, l1).unwrap().solve().unwrap().output;
            worst_oracle = worst_oracle.max(relative_error(&out, &oracle_egv(&m1, l1, DEFAULT_V0).unwrap()));
        }
    }
    report(
        3,
        "EGV eigenvector anchor",
        worst_ideal <= 1e-4 && worst_oracle <= 1e-8,
        format!(
            "RE vs dense eigenvector {worst_ideal:.2e} (tol 1e-4), vs oracle at 1 ohm {worst_oracle:.2e} (tol 1e-8)"
        ),
    );
}

#[test]
fn c04_inv_zero_wire_limit() {
    let _g = exclusive();
    let mut worst = 0.0f64;
    for n in [4, 8, 16, 32, 64] {
        for seed in 0..SEEDS {
            let m = dds_model(n, 1e-6, seed);
            let b = gen_input(n, InputKind::Current, seed);
            let x = InvCircuit::new(&m).unwrap().solve_linear_system(&b).unwrap().output;
            worst = worst.max(relative_error(&x, &ideal_inverse(m.g(), &b).unwrap()));
        }
    }
    report(
        4,
        "INV zero-wire limit",
        worst <= 1e-4,
        format!("max RE vs G^-1 b {worst:.2e} (tol 1e-4)"),
    );
}

fn jacobian(kind: CircuitKind, m: &CrossbarModel) -> SparseMatrix {
    match kind {
        CircuitKind::Inv => jacobian_inv(m).unwrap(),
        CircuitKind::Egv => jacobian_egv(m, dominant_eigen(m.g()).unwrap().0).unwrap(),
        CircuitKind::Mvm => jacobian_mvm(m).unwrap(),
    }
}

#[test]
fn c05_jacobians_are_sparse() {
    let _g = exclusive();
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in CircuitKind::ALL {
        for n in [32, 64, 128] {
            let s = jacobian(kind, &dds_model(n, 1.0, 0)).sparsity_report();
            let ratio = s.nnz as f64 / (n * n) as f64;
            ok &= ratio <= 10.0 && s.sparsity > 0.99;
            parts.push(format!("{kind}/{n}: {ratio:.2}N^2 {:.3}%", 100.0 * s.sparsity));
        }
    }
    report(5, "Jacobian sparsity (nnz <= 10 N^2, > 99%)", ok, parts.join(", "));
}

#[test]
fn c06_jacobian_matches_the_residual() {
    let _g = exclusive();
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for n in [4, 8] {
        let m = dds_model(n, R_16NM, 1);
        let i_in = gen_input(n, InputKind::Current, 1);
        let v_in = gen_input(n, InputKind::Voltage, 1);
        let gl = dominant_eigen(m.g()).unwrap().0;
        for kind in CircuitKind::ALL {
            let jac = jacobian(kind, &m);
            let f = |t: &Mat<f64>| match kind {
                CircuitKind::Inv => residual_inv(&m, t, &i_in).unwrap(),
                CircuitKind::Egv => residual_egv(&m, t, gl, DEFAULT_V0).unwrap(),
                CircuitKind::Mvm => residual_mvm(&m, t, &v_in).unwrap(),
            };
            let f0 = RowMajor::vec(&f(&Mat::zeros(n, n)));
            for _ in 0..20 {
                let theta = Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                let ft = RowMajor::vec(&f(&theta));
                let jt = jac.mul_vec(&RowMajor::vec(&theta));
                let diff: Vec<f64> = ft.iter().zip(&f0).map(|(a, b)| a - b).collect();
                worst = worst.max(relative_error(&diff, &jt));
            }
        }
    }
    report(
        6,
        "linearity identity F(x) - F(0) = J x",
        worst <= 1e-12,
        format!("max rel. gap {worst:.2e} (tol 1e-12)"),
    );
}

#[test]
fn c07_runtime_scaling() {
    let _g = exclusive();
    let cfg = BenchConfig {
        circuit: CircuitKind::Inv,
        sizes: vec![128, 256, 512, 1024],
        r_ohm: 1.0,
        reps: 3,
        seed: 0,
        timeout: None,
    };
    let rep = bench_scaling(&cfg).unwrap();
    let complete = rep.points.len() == 4 && rep.skipped.is_empty();
    let t1024 = rep.points.iter().find(|p| p.n == 1024).map(|p| p.runtime_ms / 1e3);
    let slope = rep.slope_all.unwrap_or(f64::NAN);
    let times: Vec<String> = rep
        .points
        .iter()
        .map(|p| format!("{}:{:.2}s", p.n, p.runtime_ms / 1e3))
        .collect();
    report(
        7,
        "runtime scaling",
        complete && t1024.is_some_and(|t| t <= 60.0) && (2.0..=3.5).contains(&slope),
        format!(
            "median times [{}], N=1024 {:.1} s (limit 60 s), log-log slope {slope:.2} (range [2.0, 3.5])",
            times.join(" "),
            t1024.unwrap_or(f64::NAN)
        ),
    );
}

fn search(kind: CircuitKind, n: usize, r: f64, seed: u64) -> BiasSearchResult {
    static CACHE: OnceLock<Mutex<HashMap<(CircuitKind, usize, u64, u64), BiasSearchResult>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let key = (kind, n, r.to_bits(), seed);
    if let Some(hit) = cache.lock().unwrap().get(&key) {
        return hit.clone();
    }
    let cfg = BiasSearchConfig {
        seed,
        ..Default::default()
    };
    let res = search_optimal_bias(kind, &dds_model(n, r, seed), &cfg).unwrap();
    cache.lock().unwrap().insert(key, res.clone());
    res
}

fn compensation(id: u32, kind: CircuitKind, strict: f64, relaxed: f64) {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [16, 32, 64] {
        let runs: Vec<BiasSearchResult> = (0..SEEDS).map(|s| search(kind, n, R_16NM, s)).collect();
        let mean = runs.iter().map(|r| r.delta_re).sum::<f64>() / runs.len() as f64;
        let above = runs.iter().filter(|r| r.delta_re >= strict).count();
        let negative = runs.iter().all(|r| r.optimal_bias_ratio < 0.0);
        let mean_ratio = runs.iter().map(|r| r.optimal_bias_ratio).sum::<f64>() / runs.len() as f64;
        let pass = negative && (mean >= strict || (mean >= relaxed && 2 * above >= runs.len()));
        ok &= pass;
        parts.push(format!(
            "N={n}: mean dRE {mean:.3}, {above}/{} seeds >= {strict}, mean ratio {mean_ratio:.5}",
            runs.len()
        ));
    }
    report(
        id,
        &format!("{kind} compensation (dRE >= {strict}, slack {relaxed})"),
        ok,
        parts.join("; "),
    );
}

#[test]
fn c08_inv_compensation() {
    let _g = exclusive();
    compensation(8, CircuitKind::Inv, 0.50, 0.45);
}

#[test]
fn c09_egv_compensation() {
    let _g = exclusive();
    compensation(9, CircuitKind::Egv, 0.70, 0.65);
}

fn mean_abs_ratio(kind: CircuitKind, n: usize, r: f64) -> f64 {
    (0..SEEDS)
        .map(|s| search(kind, n, r, s).optimal_bias_ratio.abs())
        .sum::<f64>()
        / SEEDS as f64
}

#[test]
fn c10_optimal_bias_grows_with_size_and_resistance() {
    let _g = exclusive();
    let mut ok = true;
    let mut parts = Vec::new();
    for kind in [CircuitKind::Inv, CircuitKind::Egv] {
        let by_n: Vec<f64> = [8, 16, 32, 64]
            .iter()
            .map(|&n| mean_abs_ratio(kind, n, R_16NM))
            .collect();
        let by_r: Vec<f64> = [1.55, 2.97, R_16NM]
            .iter()
            .map(|&r| mean_abs_ratio(kind, 32, r))
            .collect();
        ok &= by_n.windows(2).all(|w| w[1] >= w[0]) && by_r.windows(2).all(|w| w[1] >= w[0]);
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.5}")).collect::<Vec<_>>().join(" <= ");
        parts.push(format!(
            "{kind}: N {{8,16,32,64}} {}; r {{1.55,2.97,4.53}} {}",
            fmt(&by_n),
            fmt(&by_r)
        ));
    }
    report(10, "optimal |bias| trends", ok, parts.join("; "));
}
