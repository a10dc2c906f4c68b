//! Eigenvector (EGV) crossbar.
//!
//! Each row ends in a transimpedance amplifier with feedback conductance
//! `G_lambda`, followed by an inverter that drives the bottom of the
//! matching column. Column 0 is instead driven by an external voltage `V0`,
//! which fixes the amplitude. The field `V` holds the row-node voltages; the
//! inverter outputs `(g1 / G_lambda) V[:, n-1]` approximate the eigenvector
//! of `G` for the eigenvalue `G_lambda`.

use faer::Mat;

use crate::error::{check_dim, Error, Result};
use crate::model::{CrossbarModel, Operator, RowMajor, StructuredOperators};
use crate::solver::{add_into, assemble, field_ordering, inverse_scaled, FieldSolver, SolveReport};
use crate::sparse::{SparseMatrix, SymbolicLu};
use crate::stamp::{eval_hadamard_sandwich, eval_sandwich, eval_transpose_sandwich};

/// Default drive voltage of column 0.
pub const DEFAULT_V0: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct EgvSolution {
    pub v: Mat<f64>,
    /// Inverter output voltages.
    pub output: Vec<f64>,
    /// `output` scaled to unit Euclidean norm, largest entry positive.
    pub eigenvector: Vec<f64>,
    pub report: SolveReport,
}

#[derive(Clone, Debug)]
pub struct EgvEquations {
    model: CrossbarModel,
    ops: StructuredOperators,
    g1_over_g: Mat<f64>,
    g_lambda: f64,
    v0: f64,
}

impl EgvEquations {
    pub fn new(model: &CrossbarModel, g_lambda: f64, v0: f64) -> Result<Self> {
        if !(g_lambda.is_finite() && g_lambda > 0.0) {
            return Err(Error::Invalid(format!(
                "feedback conductance must be positive, got {g_lambda}"
            )));
        }
        if !v0.is_finite() {
            return Err(Error::Invalid(format!("drive voltage must be finite, got {v0}")));
        }
        Ok(Self {
            model: model.clone(),
            ops: StructuredOperators::new(model.n())?,
            g1_over_g: inverse_scaled(model.g(), model.g1()),
            g_lambda,
            v0,
        })
    }

    pub fn g_lambda(&self) -> f64 {
        self.g_lambda
    }

    fn assemble(&self) -> Result<(SparseMatrix, f64)> {
        let n = self.model.n();
        let (g1, g2) = (self.model.g1(), self.model.g2());
        let ident = Operator::identity(n);
        let o = &self.ops;
        assemble(n, |st| {
            st.hadamard_sandwich(1.0, &o.d, &self.g1_over_g, &o.d);
            st.sandwich(g1 / g2, &ident, &o.d);
            st.sandwich(1.0, &o.d, &ident);
            st.transpose_sandwich(-g1 / self.g_lambda, &o.sel.m5, &o.sel.m4);
        })
    }

    /// The feedback term alone with unit coefficient: `J = J_rest + s B`
    /// with `s = -g1 / G_lambda`.
    fn coupling(&self) -> Result<SparseMatrix> {
        let o = &self.ops;
        Ok(assemble(self.model.n(), |st| st.transpose_sandwich(1.0, &o.sel.m5, &o.sel.m4))?.0)
    }

    pub fn jacobian(&self) -> Result<SparseMatrix> {
        Ok(self.assemble()?.0)
    }

    pub fn residual(&self, v: &Mat<f64>) -> Result<Mat<f64>> {
        let n = self.model.n();
        check_dim("field rows", n, v.nrows())?;
        check_dim("field columns", n, v.ncols())?;
        Ok(self.residual_unchecked(v))
    }

    fn residual_unchecked(&self, v: &Mat<f64>) -> Mat<f64> {
        let n = self.model.n();
        let (g1, g2) = (self.model.g1(), self.model.g2());
        let ident = Operator::identity(n);
        let o = &self.ops;
        let mut f = eval_hadamard_sandwich(1.0, &o.d, &self.g1_over_g, v, &o.d);
        add_into(&mut f, &eval_sandwich(g1 / g2, &ident, v, &o.d));
        add_into(&mut f, &eval_sandwich(1.0, &o.d, v, &ident));
        add_into(
            &mut f,
            &eval_transpose_sandwich(-g1 / self.g_lambda, v, &o.sel.m5, &o.sel.m4),
        );
        f[(n - 1, 0)] -= self.v0;
        f
    }
}

#[derive(Clone, Debug)]
pub struct EgvCircuit {
    eq: EgvEquations,
    solver: FieldSolver,
}

impl EgvCircuit {
    pub fn new(model: &CrossbarModel, g_lambda: f64) -> Result<Self> {
        Self::build(EgvEquations::new(model, g_lambda, DEFAULT_V0)?, None)
    }

    pub fn with_options(model: &CrossbarModel, g_lambda: f64, v0: f64, sym: Option<&SymbolicLu>) -> Result<Self> {
        Self::build(EgvEquations::new(model, g_lambda, v0)?, sym)
    }

    fn build(eq: EgvEquations, sym: Option<&SymbolicLu>) -> Result<Self> {
        let n = eq.model.n();
        let (jac, ms) = eq.assemble()?;
        let solver = FieldSolver::build(n, jac, ms, &field_ordering(n, true), sym)?;
        Ok(Self { eq, solver })
    }

    pub fn equations(&self) -> &EgvEquations {
        &self.eq
    }

    pub fn jacobian(&self) -> &SparseMatrix {
        self.solver.jacobian()
    }

    pub fn symbolic(&self) -> SymbolicLu {
        SymbolicLu::analyze(self.jacobian(), &field_ordering(self.eq.model.n(), true))
    }

    /// Precomputes the exact output response to changes of `G_lambda`
    /// (one additional solve per coupled entry).
    pub fn bias_response(&self) -> Result<EgvBiasResponse> {
        let n = self.eq.model.n();
        let base = self.solve()?;
        let y = RowMajor::vec(&base.v);
        let b = self.eq.coupling()?;
        let entries: Vec<(usize, usize, f64)> = b.triplets().collect();
        let m = entries.len();
        let out: Vec<usize> = (0..n).map(|i| RowMajor::index(i, n - 1, n)).collect();
        let mut z_out = Mat::zeros(n, m);
        let mut z_q = Mat::zeros(m, m);
        let mut e = vec![0.0; n * n];
        for (k, &(p, _, v)) in entries.iter().enumerate() {
            e[p] = v;
            let z = self.solver.lu.solve(&e)?;
            e[p] = 0.0;
            for (r, &o) in out.iter().enumerate() {
                z_out[(r, k)] = z[o];
            }
            for (r, &(_, q, _)) in entries.iter().enumerate() {
                z_q[(r, k)] = z[q];
            }
        }
        Ok(EgvBiasResponse {
            n,
            g1: self.eq.model.g1(),
            g_lambda: self.eq.g_lambda,
            y_out: out.iter().map(|&o| y[o]).collect(),
            y_q: entries.iter().map(|&(_, q, _)| y[q]).collect(),
            z_out,
            z_q,
        })
    }

    pub fn solve(&self) -> Result<EgvSolution> {
        let n = self.eq.model.n();
        let sol = self
            .solver
            .solve_affine(|v| self.eq.residual_unchecked(v), self.eq.v0.abs())?;
        let k = self.eq.model.g1() / self.eq.g_lambda;
        let output: Vec<f64> = (0..n).map(|i| k * sol.field[(i, n - 1)]).collect();
        let eigenvector = normalize_eigenvector(&output)?;
        Ok(EgvSolution {
            output,
            eigenvector,
            report: self.solver.report(&sol),
            v: sol.field,
        })
    }
}

/// Outputs of one circuit as a function of `G_lambda` with everything else
/// fixed. The feedback coupling has at most `n` nonzeros, so a change of
/// `G_lambda` is a low-rank update of the factorized Jacobian and is applied
/// exactly through the Sherman-Morrison-Woodbury identity.
#[derive(Clone, Debug)]
pub struct EgvBiasResponse {
    n: usize,
    g1: f64,
    g_lambda: f64,
    /// Base field entries at the outputs and at the coupled columns.
    y_out: Vec<f64>,
    y_q: Vec<f64>,
    /// `J^{-1} U` restricted to the same entries.
    z_out: Mat<f64>,
    z_q: Mat<f64>,
}

impl EgvBiasResponse {
    pub fn g_lambda(&self) -> f64 {
        self.g_lambda
    }

    /// Inverter outputs with the feedback conductance set to `g_lambda`.
    pub fn output(&self, g_lambda: f64) -> Result<Vec<f64>> {
        if !(g_lambda.is_finite() && g_lambda > 0.0) {
            return Err(Error::Invalid(format!(
                "feedback conductance must be positive, got {g_lambda}"
            )));
        }
        let t = -self.g1 / g_lambda + self.g1 / self.g_lambda;
        let m = self.y_q.len();
        let mut field = self.y_out.clone();
        if t != 0.0 && m > 0 {
            // (I + t V^T Z) w = t V^T y ;  x = y - Z w
            let lhs = Mat::from_fn(m, m, |i, j| if i == j { 1.0 } else { 0.0 } + t * self.z_q[(i, j)]);
            let rhs = Mat::from_fn(m, 1, |i, _| t * self.y_q[i]);
            let w = faer::linalg::solvers::Solve::solve(&lhs.partial_piv_lu(), &rhs);
            for (r, f) in field.iter_mut().enumerate() {
                *f -= (0..m).map(|k| self.z_out[(r, k)] * w[(k, 0)]).sum::<f64>();
            }
        }
        if field.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular { pivot: 0 });
        }
        let k = self.g1 / g_lambda;
        debug_assert_eq!(field.len(), self.n);
        Ok(field.into_iter().map(|v| k * v).collect())
    }
}

/// Unit Euclidean norm with the largest-magnitude entry made positive.
pub fn normalize_eigenvector(v: &[f64]) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Degenerate("eigenvector output has zero norm".into()));
    }
    let big = v
        .iter()
        .copied()
        .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    let s = if big < 0.0 { -1.0 } else { 1.0 } / norm;
    Ok(v.iter().map(|x| x * s).collect())
}

pub fn residual_egv(model: &CrossbarModel, v: &Mat<f64>, g_lambda: f64, v0: f64) -> Result<Mat<f64>> {
    EgvEquations::new(model, g_lambda, v0)?.residual(v)
}

pub fn jacobian_egv(model: &CrossbarModel, g_lambda: f64) -> Result<SparseMatrix> {
    EgvEquations::new(model, g_lambda, DEFAULT_V0)?.jacobian()
}

pub fn solve_egv(model: &CrossbarModel, g_lambda: f64) -> Result<EgvSolution> {
    EgvCircuit::new(model, g_lambda)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{dominant_eigen, relative_error};
    use crate::workload::{gen_matrix, MatrixKind, MatrixSpec};

    #[test]
    fn bias_response_matches_direct_solves() {
        let g = gen_matrix(&MatrixSpec::new(6, MatrixKind::DiagDominantSymmetric, 4)).unwrap();
        let m = CrossbarModel::with_wire_resistance(g.clone(), 4.53).unwrap();
        let (lambda, _) = dominant_eigen(&g).unwrap();
        let resp = EgvCircuit::new(&m, lambda).unwrap().bias_response().unwrap();
        for d in [-0.03, -0.004, 0.0, 0.008] {
            let gl = lambda * (1.0 + d);
            let direct = EgvCircuit::new(&m, gl).unwrap().solve().unwrap().output;
            let fast = resp.output(gl).unwrap();
            assert!(relative_error(&fast, &direct) < 1e-9, "d = {d}");
        }
    }

    #[test]
    fn normalization_fixes_sign_and_scale() {
        let v = normalize_eigenvector(&[-3.0, 0.0, -4.0]).unwrap();
        for (a, b) in v.iter().zip([0.6, 0.0, 0.8]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(normalize_eigenvector(&[0.0, 0.0]).is_err());
    }
}
