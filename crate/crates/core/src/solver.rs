//! Shared machinery of the three circuit solvers: stamped Jacobian, cached
//! factorization and the Newton-form solve from a zero initial field.

use std::time::Instant;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RowMajor;
use crate::sparse::{
    compress, norm_inf, FactorStats, Ordering, SparseLu, SparseMatrix, SparsityReport, SymbolicLu, TripletBuffer,
};
use crate::stamp::Stamper;

/// Field residuals are accepted below `RESIDUAL_TOL * max(1, scale)`, or
/// below `ROUNDING_TOL * ||J|| ||x||` when the equations carry large
/// coefficients and that is the attainable floor.
pub const RESIDUAL_TOL: f64 = 1e-9;
pub const ROUNDING_TOL: f64 = 1e-12;
/// Refinement steps allowed after the first solve.
const MAX_CORRECTIONS: usize = 3;

/// Wall-clock breakdown of one solve, in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub assembly_ms: f64,
    pub factor_ms: f64,
    pub solve_ms: f64,
}

impl Timings {
    pub fn total_ms(&self) -> f64 {
        self.assembly_ms + self.factor_ms + self.solve_ms
    }
}

#[derive(Clone, Debug)]
pub(crate) struct FieldSolver {
    pub n: usize,
    pub lu: SparseLu,
    pub jac_norm: f64,
    pub sparsity: SparsityReport,
    pub timings: Timings,
}

pub(crate) fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Grid layout of an `n x n` field; `defer_boundary` puts the last row and
/// last column into the root front.
pub(crate) fn field_ordering(n: usize, defer_boundary: bool) -> Ordering {
    let deferred = if defer_boundary {
        let mut d: Vec<usize> = (0..n).map(|j| RowMajor::index(n - 1, j, n)).collect();
        d.extend((0..n - 1).map(|i| RowMajor::index(i, n - 1, n)));
        d
    } else {
        Vec::new()
    };
    Ordering::Grid(crate::sparse::GridLayout {
        rows: n,
        cols: n,
        deferred,
    })
}

/// Stamps and compresses a Jacobian over an `n x n` field; returns it with
/// the elapsed milliseconds.
pub(crate) fn assemble(n: usize, stamp: impl FnOnce(&mut Stamper)) -> Result<(SparseMatrix, f64)> {
    let t0 = Instant::now();
    let mut buf = TripletBuffer::with_capacity(n * n, 16 * n * n);
    stamp(&mut Stamper::new(n, &mut buf));
    let jac = compress(buf)?;
    Ok((jac, ms_since(t0)))
}

impl FieldSolver {
    pub fn build(
        n: usize,
        jac: SparseMatrix,
        assembly_ms: f64,
        ordering: &Ordering,
        symbolic: Option<&SymbolicLu>,
    ) -> Result<Self> {
        let t1 = Instant::now();
        let lu = match symbolic {
            Some(sym) if sym.admits(&jac) => SparseLu::factorize_with(sym, &jac)?,
            _ => SparseLu::factorize_ordered(&jac, ordering)?,
        };
        let factor_ms = ms_since(t1);
        Ok(Self {
            n,
            jac_norm: jac.norm_inf(),
            sparsity: jac.sparsity_report(),
            lu,
            timings: Timings {
                assembly_ms,
                factor_ms,
                solve_ms: 0.0,
            },
        })
    }

    pub fn jacobian(&self) -> &SparseMatrix {
        self.lu.matrix()
    }

    pub fn stats(&self) -> FactorStats {
        self.lu.stats()
    }

    /// Solves `F(X) = 0` for an affine `F`, starting from `X = 0`, with one
    /// extra correction step when the residual is above tolerance.
    pub fn solve_affine(&self, residual: impl Fn(&Mat<f64>) -> Mat<f64>, scale: f64) -> Result<FieldSolution> {
        let n = self.n;
        let t0 = Instant::now();
        let f0 = residual(&Mat::zeros(n, n));
        let rhs: Vec<f64> = RowMajor::vec(&f0).iter().map(|v| -v).collect();
        let mut x = self.lu.solve(&rhs)?;
        let mut field = RowMajor::reshape(&x, n)?;
        let mut res = norm_inf(&RowMajor::vec(&residual(&field)));
        let mut steps = 1;
        let tol = |x: &[f64]| (RESIDUAL_TOL * scale.max(1.0)).max(ROUNDING_TOL * self.jac_norm * norm_inf(x));
        // iterative refinement; stops once a step no longer halves the
        // residual
        while steps <= MAX_CORRECTIONS && res.is_finite() && res > 0.0 {
            let r: Vec<f64> = RowMajor::vec(&residual(&field)).iter().map(|v| -v).collect();
            let d = self.lu.solve(&r)?;
            let cand: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + di).collect();
            let cand_field = RowMajor::reshape(&cand, n)?;
            let cand_res = norm_inf(&RowMajor::vec(&residual(&cand_field)));
            steps += 1;
            if !(cand_res < res) {
                break;
            }
            let gain = cand_res / res;
            (x, field, res) = (cand, cand_field, cand_res);
            if gain > 0.5 {
                break;
            }
        }
        if !res.is_finite() {
            return Err(Error::Degenerate("non-finite residual".into()));
        }
        let converged = res <= tol(&x);
        if !converged {
            log::warn!("field residual {res:e} above tolerance {:e}", tol(&x));
        }
        Ok(FieldSolution {
            field,
            residual_norm: res,
            converged,
            steps,
            solve_ms: ms_since(t0),
        })
    }
}

#[derive(Clone, Debug)]
pub(crate) struct FieldSolution {
    pub field: Mat<f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub steps: usize,
    pub solve_ms: f64,
}

/// Diagnostics attached to every circuit solution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// `||F(x)||_inf` at the returned field.
    pub residual_norm: f64,
    pub converged: bool,
    /// Linear solves performed: the first one plus refinement steps.
    pub steps: usize,
    pub timings: Timings,
    pub sparsity: SparsityReport,
    pub factor: FactorStats,
}

impl FieldSolver {
    pub fn report(&self, sol: &FieldSolution) -> SolveReport {
        SolveReport {
            residual_norm: sol.residual_norm,
            converged: sol.converged,
            steps: sol.steps,
            timings: Timings {
                solve_ms: sol.solve_ms,
                ..self.timings
            },
            sparsity: self.sparsity,
            factor: self.stats(),
        }
    }
}

/// `1 / G` elementwise, scaled.
pub(crate) fn inverse_scaled(g: &Mat<f64>, alpha: f64) -> Mat<f64> {
    Mat::from_fn(g.nrows(), g.ncols(), |i, j| alpha / g[(i, j)])
}

pub(crate) fn add_into(acc: &mut Mat<f64>, term: &Mat<f64>) {
    for j in 0..acc.ncols() {
        for i in 0..acc.nrows() {
            acc[(i, j)] += term[(i, j)];
        }
    }
}
