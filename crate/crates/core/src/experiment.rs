//! Single simulation cases, their result records and the runtime-scaling
//! benchmark.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::compensation::{re_egv, re_inv};
use crate::egv::{EgvCircuit, DEFAULT_V0};
use crate::error::{Error, Result};
use crate::inv::InvCircuit;
use crate::model::{CircuitKind, CrossbarModel};
use crate::mvm::MvmCircuit;
use crate::oracle::{oracle_egv, oracle_inv, oracle_mvm};
use crate::reference::{dominant_eigen, ideal_inverse, ideal_mvm, relative_error};
use crate::workload::{derive_seed, gen_input, gen_matrix, InputKind, MatrixKind, MatrixSpec};
use crate::SolveReport;

/// Outcome of one case. Wall-clock fields are the only nondeterministic
/// columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub circuit: CircuitKind,
    pub n: usize,
    pub r_ohm: f64,
    pub trial: usize,
    pub seed: u64,
    /// `ok` or `failed`.
    pub status: String,
    pub message: String,
    pub re_vs_ideal: Option<f64>,
    pub re_vs_oracle: Option<f64>,
    pub runtime_ms: f64,
    pub assembly_ms: f64,
    pub factor_ms: f64,
    pub solve_ms: f64,
    pub nnz: usize,
    pub sparsity: f64,
    pub residual: f64,
    pub converged: bool,
}

impl BenchRecord {
    pub fn failed(circuit: CircuitKind, n: usize, r_ohm: f64, trial: usize, seed: u64, err: &Error) -> Self {
        Self {
            circuit,
            n,
            r_ohm,
            trial,
            seed,
            status: "failed".into(),
            message: err.to_string(),
            re_vs_ideal: None,
            re_vs_oracle: None,
            runtime_ms: 0.0,
            assembly_ms: 0.0,
            factor_ms: 0.0,
            solve_ms: 0.0,
            nnz: 0,
            sparsity: 0.0,
            residual: 0.0,
            converged: false,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Debug)]
pub struct CaseResult {
    /// INV: `x ~ G^{-1} b`; EGV: unit eigenvector; MVM: column currents.
    pub output: Vec<f64>,
    pub ideal: Vec<f64>,
    /// The same quantity from the nodal-analysis netlist, when requested.
    pub oracle: Option<Vec<f64>>,
    pub report: SolveReport,
    pub record: BenchRecord,
}

/// Input vector family of a circuit; EGV has none.
pub fn input_kind(kind: CircuitKind) -> Option<InputKind> {
    match kind {
        CircuitKind::Inv => Some(InputKind::Current),
        CircuitKind::Mvm => Some(InputKind::Voltage),
        CircuitKind::Egv => None,
    }
}

/// Deterministic input of trial `trial`; empty for EGV.
pub fn case_input(kind: CircuitKind, n: usize, seed: u64, trial: usize) -> Vec<f64> {
    match input_kind(kind) {
        Some(k) => gen_input(n, k, derive_seed(seed, &[0x1f, trial as u64])),
        None => Vec::new(),
    }
}

/// Generated dominant symmetric matrix of a sweep cell.
pub fn case_matrix(n: usize, kind: MatrixKind, seed: u64) -> Result<faer::Mat<f64>> {
    gen_matrix(&MatrixSpec::new(n, kind, seed))
}

/// Solves one circuit. INV computes `G^{-1} b` for `b = input`; MVM computes
/// `G^T v`; EGV ignores `input` and runs at `G_lambda = lambda_max(G)`.
pub fn run_case(kind: CircuitKind, model: &CrossbarModel, input: &[f64], with_oracle: bool) -> Result<CaseResult> {
    let n = model.n();
    let (output, raw, ideal, report) = match kind {
        CircuitKind::Inv => {
            let s = InvCircuit::new(model)?.solve_linear_system(input)?;
            let x = ideal_inverse(model.g(), input)?;
            (s.output.clone(), s.output, x, s.report)
        }
        CircuitKind::Mvm => {
            let s = MvmCircuit::new(model)?.solve(input)?;
            let x = ideal_mvm(model.g(), input)?;
            (s.output.clone(), s.output, x, s.report)
        }
        CircuitKind::Egv => {
            let (lambda, ev) = dominant_eigen(model.g())?;
            let s = EgvCircuit::new(model, lambda)?.solve()?;
            (s.eigenvector, s.output, ev, s.report)
        }
    };
    let re_vs_ideal = match kind {
        CircuitKind::Egv => re_egv(&output, &ideal)?,
        _ => re_inv(&output, &ideal)?,
    };
    let oracle = if with_oracle {
        Some(match kind {
            CircuitKind::Inv => {
                let neg: Vec<f64> = input.iter().map(|v| -v).collect();
                oracle_inv(model, &neg)?
            }
            CircuitKind::Mvm => oracle_mvm(model, input)?,
            CircuitKind::Egv => oracle_egv(model, dominant_eigen(model.g())?.0, DEFAULT_V0)?,
        })
    } else {
        None
    };
    let re_vs_oracle = oracle.as_ref().map(|o| relative_error(&raw, o));
    let t = report.timings;
    let record = BenchRecord {
        circuit: kind,
        n,
        r_ohm: 1.0 / model.g1(),
        trial: 0,
        seed: 0,
        status: "ok".into(),
        message: String::new(),
        re_vs_ideal: Some(re_vs_ideal),
        re_vs_oracle,
        runtime_ms: t.total_ms(),
        assembly_ms: t.assembly_ms,
        factor_ms: t.factor_ms,
        solve_ms: t.solve_ms,
        nnz: report.sparsity.nnz,
        sparsity: report.sparsity.sparsity,
        residual: report.residual_norm,
        converged: report.converged,
    };
    let oracle = match (kind, oracle) {
        (CircuitKind::Egv, Some(o)) => Some(crate::egv::normalize_eigenvector(&o)?),
        (_, o) => o,
    };
    Ok(CaseResult {
        output,
        ideal,
        oracle,
        report,
        record,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub circuit: CircuitKind,
    /// Strictly ascending.
    pub sizes: Vec<usize>,
    pub r_ohm: f64,
    pub reps: usize,
    pub seed: u64,
    /// A size whose first repetition exceeds this is reported as skipped,
    /// and larger sizes are not attempted.
    pub timeout: Option<Duration>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            circuit: CircuitKind::Inv,
            sizes: vec![128, 256, 512, 1024],
            r_ohm: 1.0,
            reps: 3,
            seed: 0,
            timeout: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    pub reps: usize,
    /// Medians over the repetitions.
    pub runtime_ms: f64,
    pub assembly_ms: f64,
    pub factor_ms: f64,
    pub solve_ms: f64,
    pub nnz: usize,
    /// `nnz(J) / N^2`.
    pub nnz_per_n2: f64,
    pub factor_entries: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub circuit: CircuitKind,
    pub r_ohm: f64,
    pub points: Vec<ScalingPoint>,
    pub skipped: Vec<(usize, String)>,
    /// Least-squares slope of `log(runtime)` against `log(N)` over all
    /// measured sizes, and over the larger half of them.
    pub slope_all: Option<f64>,
    pub slope_top_half: Option<f64>,
}

/// Times assembly + factorization + solve per size, single-stream.
pub fn bench_scaling(cfg: &BenchConfig) -> Result<ScalingReport> {
    if cfg.reps == 0 {
        return Err(Error::Invalid("at least one repetition is required".into()));
    }
    if cfg.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Invalid(format!(
            "benchmark sizes must be strictly ascending: {:?}",
            cfg.sizes
        )));
    }
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    let mut stop: Option<String> = None;
    for &n in &cfg.sizes {
        if let Some(reason) = &stop {
            skipped.push((n, reason.clone()));
            continue;
        }
        let g = case_matrix(n, MatrixKind::DiagDominantSymmetric, derive_seed(cfg.seed, &[n as u64]))?;
        let model = CrossbarModel::with_wire_resistance(g, cfg.r_ohm)?;
        let input = case_input(cfg.circuit, n, cfg.seed, 0);
        let mut samples: Vec<SolveReport> = Vec::with_capacity(cfg.reps);
        for rep in 0..cfg.reps {
            let t0 = Instant::now();
            let report = time_once(cfg.circuit, &model, &input)?;
            samples.push(report);
            if let Some(limit) = cfg.timeout {
                if rep == 0 && t0.elapsed() > limit {
                    let reason = format!("exceeded timeout of {:.1} s", limit.as_secs_f64());
                    log::warn!("size {n}: {reason}");
                    skipped.push((n, reason.clone()));
                    stop = Some(format!("a smaller size {reason}"));
                    samples.clear();
                    break;
                }
            }
        }
        if samples.is_empty() {
            continue;
        }
        let med = |f: &dyn Fn(&SolveReport) -> f64| median(samples.iter().map(f).collect());
        let last = samples[samples.len() - 1];
        points.push(ScalingPoint {
            n,
            reps: samples.len(),
            runtime_ms: med(&|r| r.timings.total_ms()),
            assembly_ms: med(&|r| r.timings.assembly_ms),
            factor_ms: med(&|r| r.timings.factor_ms),
            solve_ms: med(&|r| r.timings.solve_ms),
            nnz: last.sparsity.nnz,
            nnz_per_n2: last.sparsity.nnz as f64 / (n * n) as f64,
            factor_entries: last.factor.factor_entries,
        });
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.n as f64, p.runtime_ms)).collect();
    let top = &xy[xy.len() / 2..];
    Ok(ScalingReport {
        circuit: cfg.circuit,
        r_ohm: cfg.r_ohm,
        slope_all: fit_log_slope(&xy),
        slope_top_half: fit_log_slope(top),
        points,
        skipped,
    })
}

fn time_once(kind: CircuitKind, model: &CrossbarModel, input: &[f64]) -> Result<SolveReport> {
    Ok(match kind {
        CircuitKind::Inv => InvCircuit::new(model)?.solve_linear_system(input)?.report,
        CircuitKind::Mvm => MvmCircuit::new(model)?.solve(input)?.report,
        CircuitKind::Egv => {
            let lambda = crate::reference::dominant_eigen(model.g())?.0;
            EgvCircuit::new(model, lambda)?.solve()?.report
        }
    })
}

pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares slope of `ln y` against `ln x`; needs two distinct `x`.
pub fn fit_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_laws() {
        let pts: Vec<(f64, f64)> = [8.0, 16.0, 32.0].iter().map(|&n: &f64| (n, 3.0 * n.powi(3))).collect();
        assert!((fit_log_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
        assert!(fit_log_slope(&pts[..1]).is_none());
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn cases_run_for_every_circuit() {
        let g = case_matrix(4, MatrixKind::DiagDominantSymmetric, 1).unwrap();
        let m = CrossbarModel::with_wire_resistance(g, 1.0).unwrap();
        for kind in CircuitKind::ALL {
            let input = case_input(kind, 4, 9, 0);
            let c = run_case(kind, &m, &input, true).unwrap();
            assert!(c.record.re_vs_oracle.unwrap() < 1e-8, "{kind}");
            assert!(c.record.re_vs_ideal.unwrap() < 0.05, "{kind}");
            assert_eq!(c.output.len(), 4);
            assert!(relative_error(&c.output, c.oracle.as_ref().unwrap()) < 1e-8);
        }
    }

    #[test]
    fn bench_small_sizes() {
        let cfg = BenchConfig {
            sizes: vec![4, 8],
            reps: 3,
            ..Default::default()
        };
        let r = bench_scaling(&cfg).unwrap();
        assert_eq!(r.points.len(), 2);
        assert!(r.slope_all.is_some());
        assert!(r.points.iter().all(|p| p.reps == 3 && p.runtime_ms >= 0.0));
        let bad = BenchConfig {
            sizes: vec![8, 4],
            ..Default::default()
        };
        assert!(bench_scaling(&bad).is_err());
        let tight = BenchConfig {
            sizes: vec![16, 32],
            timeout: Some(Duration::ZERO),
            ..Default::default()
        };
        let r = bench_scaling(&tight).unwrap();
        assert!(r.points.is_empty());
        assert_eq!(r.skipped.len(), 2);
    }
}
