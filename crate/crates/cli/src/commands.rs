use std::path::{Path, PathBuf};
use std::time::Duration;

use amcsim::compensation::{search_optimal_bias, BiasSearchConfig, CurvePoint};
use amcsim::egv::DEFAULT_V0;
use amcsim::experiment::{bench_scaling, case_input, case_matrix, run_case, BenchConfig, BenchRecord};
use amcsim::oracle::{egv_netlist, inv_netlist, mvm_netlist, oracle_egv, oracle_inv, oracle_mvm};
use amcsim::reference::dominant_eigen;
use amcsim::workload::derive_seed;
use amcsim::{CircuitKind, CrossbarModel, Mat};
use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::io::{input_error, read_matrix, read_vector, write_table, write_text, write_vector};

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    Ok(dir)
}

fn single(cfg: &RunConfig) -> (CircuitKind, f64) {
    (cfg.circuits[0], cfg.resistances[0].1)
}

/// The matrix from `--matrix`, or a generated one seeded by `--seed`.
fn load_model(cfg: &RunConfig, r: f64) -> Result<CrossbarModel> {
    let g: Mat<f64> = match &cfg.matrix {
        Some(p) => read_matrix(p)?,
        None => case_matrix(cfg.n, cfg.gen, cfg.seed)?,
    };
    Ok(CrossbarModel::with_wire_resistance(g, r)?)
}

/// The vector from `--input`, or a generated one. EGV takes no input.
fn load_input(cfg: &RunConfig, kind: CircuitKind, n: usize) -> Result<Vec<f64>> {
    match (&cfg.input, kind) {
        (Some(_), CircuitKind::Egv) => Err(input_error("the eigenvector circuit takes no --input")),
        (Some(p), _) => read_vector(p),
        (None, _) => Ok(case_input(kind, n, cfg.seed, 0)),
    }
}

fn note(path: &Path) {
    println!("wrote {}", path.display());
}

/// One case: `solution.txt` holds the output vector, `record.*` its record.
pub fn simulate(cfg: &RunConfig) -> Result<()> {
    let (kind, r) = single(cfg);
    let model = load_model(cfg, r)?;
    let input = load_input(cfg, kind, model.n())?;
    let case = run_case(kind, &model, &input, cfg.oracle)?;
    let mut record = case.record;
    record.seed = cfg.seed;
    let dir = out_dir(cfg)?;
    let sol = dir.join("solution.txt");
    write_vector(&sol, &case.output)?;
    note(&sol);
    note(&write_table(&dir, "record", cfg.format, &cfg.echo(), &[record])?);
    Ok(())
}

/// Cross product circuits x sizes x resistances x trials. The matrix of a
/// `(n, trial)` cell is shared by all circuits and resistances.
pub fn sweep(cfg: &RunConfig) -> Result<()> {
    let mut cells = Vec::new();
    for &kind in &cfg.circuits {
        for &n in &cfg.sizes {
            for (_, r) in &cfg.resistances {
                for trial in 0..cfg.trials {
                    cells.push((kind, n, *r, trial));
                }
            }
        }
    }
    let rows: Vec<BenchRecord> = cells
        .par_iter()
        .map(|&(kind, n, r, trial)| {
            let seed = derive_seed(cfg.seed, &[n as u64, trial as u64]);
            let run = || -> amcsim::Result<BenchRecord> {
                let model = CrossbarModel::with_wire_resistance(case_matrix(n, cfg.gen, seed)?, r)?;
                let input = case_input(kind, n, seed, trial);
                Ok(run_case(kind, &model, &input, cfg.oracle)?.record)
            };
            match run() {
                Ok(mut rec) => {
                    rec.trial = trial;
                    rec.seed = seed;
                    rec
                }
                Err(e) => {
                    log::warn!("{kind} n={n} r={r} trial {trial}: {e}");
                    BenchRecord::failed(kind, n, r, trial, seed, &e)
                }
            }
        })
        .collect();
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", rows.len());
    }
    note(&write_table(&out_dir(cfg)?, "sweep", cfg.format, &cfg.echo(), &rows)?);
    Ok(())
}

#[derive(Serialize)]
struct Summary {
    circuit: CircuitKind,
    n: usize,
    r_ohm: f64,
    trials: usize,
    seed: u64,
    optimal_bias_ratio: f64,
    baseline_re: f64,
    min_re: f64,
    delta_re: f64,
}

#[derive(Serialize)]
struct CurveRow {
    circuit: CircuitKind,
    ratio: f64,
    mean_re: f64,
}

/// Bias search per circuit: `summary.*` and the evaluated `curve.*`.
pub fn compensate(cfg: &RunConfig) -> Result<()> {
    let r = cfg.resistances[0].1;
    let model = load_model(cfg, r)?;
    if cfg.input.is_some() {
        return Err(input_error(
            "compensate draws its own trial inputs; --input is not accepted",
        ));
    }
    let search = BiasSearchConfig {
        trials_per_candidate: cfg.trials,
        seed: cfg.seed,
        ..Default::default()
    };
    let mut summary = Vec::new();
    let mut curve = Vec::new();
    for &kind in &cfg.circuits {
        let res = search_optimal_bias(kind, &model, &search)?;
        println!(
            "{kind}: optimal ratio {:+.6}, RE {:.4e} -> {:.4e} (reduction {:.1}%)",
            res.optimal_bias_ratio,
            res.baseline_re,
            res.min_re,
            100.0 * res.delta_re
        );
        summary.push(Summary {
            circuit: kind,
            n: model.n(),
            r_ohm: r,
            trials: cfg.trials,
            seed: cfg.seed,
            optimal_bias_ratio: res.optimal_bias_ratio,
            baseline_re: res.baseline_re,
            min_re: res.min_re,
            delta_re: res.delta_re,
        });
        curve.extend(res.curve.iter().map(|&CurvePoint { ratio, mean_re }| CurveRow {
            circuit: kind,
            ratio,
            mean_re,
        }));
    }
    let dir = out_dir(cfg)?;
    let echo = cfg.echo();
    note(&write_table(&dir, "summary", cfg.format, &echo, &summary)?);
    note(&write_table(&dir, "curve", cfg.format, &echo, &curve)?);
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    circuit: CircuitKind,
    n: usize,
    status: String,
    reps: usize,
    runtime_ms: Option<f64>,
    assembly_ms: Option<f64>,
    factor_ms: Option<f64>,
    solve_ms: Option<f64>,
    nnz: Option<usize>,
    nnz_per_n2: Option<f64>,
    factor_entries: Option<usize>,
}

#[derive(Serialize)]
struct FitRow {
    circuit: CircuitKind,
    r_ohm: f64,
    sizes_timed: usize,
    slope_top_half: Option<f64>,
    slope_all: Option<f64>,
}

/// Runtime scaling, single-stream: `bench.*` per size and `bench_fit.*`.
pub fn bench(cfg: &RunConfig) -> Result<()> {
    let r = cfg.resistances[0].1;
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &kind in &cfg.circuits {
        let rep = bench_scaling(&BenchConfig {
            circuit: kind,
            sizes: cfg.sizes.clone(),
            r_ohm: r,
            reps: cfg.reps,
            seed: cfg.seed,
            timeout: cfg.timeout.map(Duration::from_secs_f64),
        })?;
        for p in &rep.points {
            println!(
                "{kind} n={:5}: {:10.2} ms (nnz/N^2 = {:.2})",
                p.n, p.runtime_ms, p.nnz_per_n2
            );
            rows.push(BenchRow {
                circuit: kind,
                n: p.n,
                status: "ok".into(),
                reps: p.reps,
                runtime_ms: Some(p.runtime_ms),
                assembly_ms: Some(p.assembly_ms),
                factor_ms: Some(p.factor_ms),
                solve_ms: Some(p.solve_ms),
                nnz: Some(p.nnz),
                nnz_per_n2: Some(p.nnz_per_n2),
                factor_entries: Some(p.factor_entries),
            });
        }
        for (n, why) in &rep.skipped {
            println!("{kind} n={n:5}: skipped, {why}");
            rows.push(BenchRow {
                circuit: kind,
                n: *n,
                status: format!("skipped: {why}"),
                reps: 0,
                runtime_ms: None,
                assembly_ms: None,
                factor_ms: None,
                solve_ms: None,
                nnz: None,
                nnz_per_n2: None,
                factor_entries: None,
            });
        }
        if let Some(s) = rep.slope_top_half {
            println!("{kind}: log-log slope {s:.3} over the larger half of the sizes");
        }
        fits.push(FitRow {
            circuit: kind,
            r_ohm: r,
            sizes_timed: rep.points.len(),
            slope_top_half: rep.slope_top_half,
            slope_all: rep.slope_all,
        });
    }
    rows.sort_by_key(|r| (r.circuit as u8, r.n));
    let dir = out_dir(cfg)?;
    let echo = cfg.echo();
    note(&write_table(&dir, "bench", cfg.format, &echo, &rows)?);
    note(&write_table(&dir, "bench_fit", cfg.format, &echo, &fits)?);
    Ok(())
}

/// The nodal-analysis netlist: `oracle.txt` lists its elements and
/// `solution.txt` holds its outputs, read out like `simulate`.
pub fn oracle(cfg: &RunConfig) -> Result<()> {
    let (kind, r) = single(cfg);
    let model = load_model(cfg, r)?;
    let input = load_input(cfg, kind, model.n())?;
    let (net, output) = match kind {
        CircuitKind::Inv => {
            let i: Vec<f64> = input.iter().map(|v| -v).collect();
            (inv_netlist(&model, &i)?, oracle_inv(&model, &i)?)
        }
        CircuitKind::Mvm => (mvm_netlist(&model, &input)?, oracle_mvm(&model, &input)?),
        CircuitKind::Egv => {
            let gl = dominant_eigen(model.g())?.0;
            (
                egv_netlist(&model, gl, DEFAULT_V0)?,
                oracle_egv(&model, gl, DEFAULT_V0)?,
            )
        }
    };
    let dir = out_dir(cfg)?;
    let mut text: String = cfg.echo().iter().map(|(k, v)| format!("* {k}={v}\n")).collect();
    text.push_str(&net.netlist.dump());
    let path = dir.join("oracle.txt");
    write_text(&path, &text)?;
    note(&path);
    let path = dir.join("solution.txt");
    write_vector(&path, &output)?;
    note(&path);
    Ok(())
}
