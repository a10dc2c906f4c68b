//! Error metrics and the coarse-to-fine search for the uniform bias that
//! minimizes the wire-resistance error of each circuit.
//!
//! The bias is a ratio `delta`: INV scales its input currents by
//! `1 + delta`, EGV its feedback conductance `G_lambda`, and MVM its input
//! voltages. Every candidate ratio is scored by the mean relative error over
//! a fixed set of randomized trials; the same trials are reused for every
//! candidate, so differences between candidates are not sampling noise.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::egv::{EgvBiasResponse, EgvCircuit, DEFAULT_V0};
use crate::error::{Error, Result};
use crate::inv::InvCircuit;
use crate::model::{CircuitKind, CrossbarModel};
use crate::mvm::MvmCircuit;
use crate::reference::{dominant_eigen, ideal_inverse, ideal_mvm};
use crate::sparse::SymbolicLu;
use crate::workload::{derive_seed, gen_input, gen_matrix, InputKind, MatrixKind, MatrixSpec};

/// `||x - x_ideal|| / ||x_ideal||`.
pub fn re_inv(x: &[f64], x_ideal: &[f64]) -> Result<f64> {
    same_len(x, x_ideal)?;
    let den = norm(x_ideal);
    if den == 0.0 {
        return Err(Error::Invalid("relative error against a zero reference".into()));
    }
    Ok(x.iter().zip(x_ideal).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / den)
}

/// Distance between the directions of `x` and `x_ideal` after flipping `x`
/// onto the same half-space.
pub fn re_egv(x: &[f64], x_ideal: &[f64]) -> Result<f64> {
    same_len(x, x_ideal)?;
    let (nx, nr) = (norm(x), norm(x_ideal));
    if nx == 0.0 || nr == 0.0 {
        return Err(Error::Invalid("eigenvector error of a zero vector".into()));
    }
    let dot: f64 = x.iter().zip(x_ideal).map(|(a, b)| a * b).sum();
    let s = if dot < 0.0 { -1.0 } else { 1.0 };
    Ok(x.iter()
        .zip(x_ideal)
        .map(|(a, b)| (s * a / nx - b / nr).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Relative reduction `(baseline - minimum) / baseline`.
pub fn delta_re(baseline: f64, minimum: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::Invalid(format!(
            "baseline error must be positive, got {baseline}"
        )));
    }
    Ok((baseline - minimum) / baseline)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    crate::error::check_dim("reference length", b.len(), a.len())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasSearchConfig {
    pub initial_step: f64,
    pub refinement_rounds: usize,
    pub grid_points: usize,
    pub grid_center_index: usize,
    pub trials_per_candidate: usize,
    pub seed: u64,
}

impl Default for BiasSearchConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.02,
            refinement_rounds: 3,
            grid_points: 20,
            grid_center_index: 15,
            trials_per_candidate: 50,
            seed: 0,
        }
    }
}

impl BiasSearchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_step > 0.0
            && self.initial_step.is_finite()
            && self.refinement_rounds > 0
            && self.grid_points > 0
            && self.trials_per_candidate > 0
            && self.grid_center_index < self.grid_points;
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("invalid bias search configuration {self:?}")))
        }
    }

    /// Every ratio the search can reach lies in this closed interval.
    pub fn reach(&self) -> (f64, f64) {
        let (mut lo, mut hi, mut step) = (0.0, 0.0, self.initial_step);
        for _ in 0..self.refinement_rounds {
            step /= 10.0;
            lo -= self.grid_center_index as f64 * step;
            hi += (self.grid_points - 1 - self.grid_center_index) as f64 * step;
        }
        (lo, hi)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub ratio: f64,
    pub mean_re: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasSearchResult {
    pub circuit: CircuitKind,
    pub optimal_bias_ratio: f64,
    pub min_re: f64,
    /// Mean error at zero bias.
    pub baseline_re: f64,
    pub delta_re: f64,
    /// Every evaluated candidate, sorted by ratio.
    pub curve: Vec<CurvePoint>,
}

/// Fixed trial set of one circuit against which candidate biases are scored.
pub struct BiasProblem {
    kind: CircuitKind,
    trials: Trials,
}

enum Trials {
    Inv {
        circuit: Box<InvCircuit>,
        cases: Vec<(Vec<f64>, Vec<f64>)>,
    },
    Mvm {
        circuit: Box<MvmCircuit>,
        cases: Vec<(Vec<f64>, Vec<f64>)>,
    },
    Egv {
        cases: Vec<(EgvBiasResponse, Vec<f64>)>,
    },
}

const TAG_INV: u64 = 1;
const TAG_EGV: u64 = 2;
const TAG_MVM: u64 = 3;

impl BiasProblem {
    /// INV and MVM keep the model's matrix and draw a fresh input vector per
    /// trial. EGV has no input; trial 0 uses the model's matrix and every
    /// further trial a fresh diagonally dominant symmetric matrix of the same
    /// size, each with `G_lambda` set to its own largest eigenvalue. Trials
    /// whose setup fails are skipped with a warning.
    pub fn new(kind: CircuitKind, model: &CrossbarModel, trials: usize, seed: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::Invalid("at least one trial is required".into()));
        }
        let n = model.n();
        let trials = match kind {
            CircuitKind::Inv => {
                let circuit = InvCircuit::new(model)?;
                let cases = (0..trials)
                    .filter_map(|t| {
                        let b = gen_input(n, InputKind::Current, derive_seed(seed, &[TAG_INV, t as u64]));
                        keep(t, ideal_inverse(model.g(), &b).map(|x| (b, x)))
                    })
                    .collect();
                Trials::Inv {
                    circuit: Box::new(circuit),
                    cases,
                }
            }
            CircuitKind::Mvm => {
                let circuit = MvmCircuit::new(model)?;
                let cases = (0..trials)
                    .filter_map(|t| {
                        let v = gen_input(n, InputKind::Voltage, derive_seed(seed, &[TAG_MVM, t as u64]));
                        keep(t, ideal_mvm(model.g(), &v).map(|x| (v, x)))
                    })
                    .collect();
                Trials::Mvm {
                    circuit: Box::new(circuit),
                    cases,
                }
            }
            CircuitKind::Egv => {
                let mut sym: Option<SymbolicLu> = None;
                let mut cases = Vec::with_capacity(trials);
                for t in 0..trials {
                    let case = egv_trial(model, t, seed, &mut sym);
                    if let Some(c) = keep(t, case) {
                        cases.push(c);
                    }
                }
                Trials::Egv { cases }
            }
        };
        let p = Self { kind, trials };
        if p.is_empty() {
            return Err(Error::Search(format!("every {kind} trial failed during setup")));
        }
        Ok(p)
    }

    pub fn kind(&self) -> CircuitKind {
        self.kind
    }

    /// Trials that survived setup.
    pub fn len(&self) -> usize {
        match &self.trials {
            Trials::Inv { cases, .. } | Trials::Mvm { cases, .. } => cases.len(),
            Trials::Egv { cases } => cases.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean relative error at one bias ratio; trials that fail are skipped.
    pub fn mean_re(&self, ratio: f64) -> Result<f64> {
        let k = 1.0 + ratio;
        let errors: Vec<Result<f64>> = match &self.trials {
            Trials::Inv { circuit, cases } => cases
                .iter()
                .map(|(b, x)| {
                    let scaled: Vec<f64> = b.iter().map(|v| v * k).collect();
                    re_inv(&circuit.solve_linear_system(&scaled)?.output, x)
                })
                .collect(),
            Trials::Mvm { circuit, cases } => cases
                .iter()
                .map(|(v, x)| {
                    let scaled: Vec<f64> = v.iter().map(|u| u * k).collect();
                    re_inv(&circuit.solve(&scaled)?.output, x)
                })
                .collect(),
            Trials::Egv { cases } => cases
                .iter()
                .map(|(resp, ev)| re_egv(&resp.output(resp.g_lambda() * k)?, ev))
                .collect(),
        };
        let mut sum = 0.0;
        let mut count = 0usize;
        for (t, e) in errors.into_iter().enumerate() {
            match e {
                Ok(v) if v.is_finite() => {
                    sum += v;
                    count += 1;
                }
                Ok(v) => log::warn!("{} trial {t} at ratio {ratio}: non-finite error {v}", self.kind),
                Err(err) => log::warn!("{} trial {t} at ratio {ratio}: {err}", self.kind),
            }
        }
        if count == 0 {
            return Err(Error::Search(format!(
                "every {} trial failed at ratio {ratio}",
                self.kind
            )));
        }
        Ok(sum / count as f64)
    }
}

fn keep<T>(trial: usize, r: Result<T>) -> Option<T> {
    r.map_err(|e| log::warn!("trial {trial} skipped: {e}")).ok()
}

fn egv_trial(
    model: &CrossbarModel,
    t: usize,
    seed: u64,
    sym: &mut Option<SymbolicLu>,
) -> Result<(EgvBiasResponse, Vec<f64>)> {
    let m = if t == 0 {
        model.clone()
    } else {
        let spec = MatrixSpec::new(
            model.n(),
            MatrixKind::DiagDominantSymmetric,
            derive_seed(seed, &[TAG_EGV, t as u64]),
        );
        let g: Mat<f64> = gen_matrix(&spec)?;
        CrossbarModel::new(g, model.g1(), model.g2())?
    };
    let (lambda, ev) = dominant_eigen(m.g())?;
    let c = EgvCircuit::with_options(&m, lambda, DEFAULT_V0, sym.as_ref())?;
    if sym.is_none() {
        *sym = Some(c.symbolic());
    }
    Ok((c.bias_response()?, ev))
}

/// Coarse-to-fine grid search: each round divides the step by ten and scans
/// `offset + (i - center) * step` for `i` in `0..grid_points`, then moves the
/// offset to the best candidate.
pub fn search_optimal_bias(
    kind: CircuitKind,
    model: &CrossbarModel,
    cfg: &BiasSearchConfig,
) -> Result<BiasSearchResult> {
    cfg.validate()?;
    let problem = BiasProblem::new(kind, model, cfg.trials_per_candidate, cfg.seed)?;
    search_with(&problem, cfg)
}

/// The search on a prepared trial set.
pub fn search_with(problem: &BiasProblem, cfg: &BiasSearchConfig) -> Result<BiasSearchResult> {
    cfg.validate()?;
    let mut curve: Vec<CurvePoint> = Vec::new();
    let mut step = cfg.initial_step;
    let mut offset = 0.0;
    let mut baseline = None;
    let mut best = f64::INFINITY;
    for _ in 0..cfg.refinement_rounds {
        step /= 10.0;
        let mut round_min = f64::INFINITY;
        let mut i_min = cfg.grid_center_index;
        for i in 0..cfg.grid_points {
            let ratio = offset + (i as f64 - cfg.grid_center_index as f64) * step;
            let re = match curve.iter().find(|p| p.ratio == ratio) {
                Some(p) => p.mean_re,
                None => {
                    let re = problem.mean_re(ratio)?;
                    curve.push(CurvePoint { ratio, mean_re: re });
                    re
                }
            };
            if ratio == 0.0 {
                baseline = Some(re);
            }
            if re < round_min {
                round_min = re;
                i_min = i;
            }
        }
        offset += (i_min as f64 - cfg.grid_center_index as f64) * step;
        best = best.min(round_min);
    }
    let baseline_re = match baseline {
        Some(b) => b,
        None => problem.mean_re(0.0)?,
    };
    curve.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
    let min_re = best.min(baseline_re);
    Ok(BiasSearchResult {
        circuit: problem.kind(),
        optimal_bias_ratio: offset,
        min_re,
        baseline_re,
        delta_re: delta_re(baseline_re, min_re)?,
        curve,
    })
}

/// Mean error at each given ratio.
pub fn bias_sweep(
    kind: CircuitKind,
    model: &CrossbarModel,
    ratios: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    let problem = BiasProblem::new(kind, model, trials, seed)?;
    ratios
        .iter()
        .map(|&ratio| {
            Ok(CurvePoint {
                ratio,
                mean_re: problem.mean_re(ratio)?,
            })
        })
        .collect()
}
