//! Matrix-inversion (INV) crossbar.
//!
//! Input currents enter the left end of each row; op-amp `i` holds the right
//! end of row `i` at virtual ground and drives the bottom of column `i`
//! through one column segment. The unknown field `theta` holds the row-node
//! voltages, with its last column reused for the op-amp outputs, which are
//! the circuit's output. Ideally the outputs are `-G^{-1} i`.

use faer::Mat;

use crate::error::{check_dim, Result};
use crate::model::{CrossbarModel, Operator, StructuredOperators};
use crate::solver::{add_into, assemble, field_ordering, inverse_scaled, FieldSolution, FieldSolver, SolveReport};
use crate::sparse::{SparseMatrix, SymbolicLu};
use crate::stamp::{eval_hadamard_sandwich, eval_sandwich, eval_transpose_sandwich};

#[derive(Clone, Debug)]
pub struct InvSolution {
    pub theta: Mat<f64>,
    /// Op-amp output voltages (last column of `theta`).
    pub output: Vec<f64>,
    pub report: SolveReport,
}

/// Residual equations of the INV circuit for one crossbar.
#[derive(Clone, Debug)]
pub struct InvEquations {
    model: CrossbarModel,
    ops: StructuredOperators,
    m1d: Operator,
    g1_over_g: Mat<f64>,
}

/// INV circuit bound to one crossbar, with its Jacobian factored once.
#[derive(Clone, Debug)]
pub struct InvCircuit {
    eq: InvEquations,
    solver: FieldSolver,
}

fn input_matrix(n: usize, i_in: &[f64]) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| if j == 0 { i_in[i] } else { 0.0 })
}

impl InvCircuit {
    pub fn new(model: &CrossbarModel) -> Result<Self> {
        Self::build(model, None)
    }

    /// Reuses a symbolic analysis from a circuit of the same size when the
    /// Jacobian pattern matches.
    pub fn with_symbolic(model: &CrossbarModel, sym: &SymbolicLu) -> Result<Self> {
        Self::build(model, Some(sym))
    }

    fn build(model: &CrossbarModel, sym: Option<&SymbolicLu>) -> Result<Self> {
        let eq = InvEquations::new(model)?;
        let (jac, ms) = eq.assemble()?;
        let solver = FieldSolver::build(model.n(), jac, ms, &field_ordering(model.n(), true), sym)?;
        Ok(Self { eq, solver })
    }

    pub fn model(&self) -> &CrossbarModel {
        &self.eq.model
    }

    pub fn equations(&self) -> &InvEquations {
        &self.eq
    }

    pub fn jacobian(&self) -> &SparseMatrix {
        self.solver.jacobian()
    }

    pub fn symbolic(&self) -> SymbolicLu {
        SymbolicLu::analyze(self.jacobian(), &field_ordering(self.model().n(), true))
    }

    pub fn residual(&self, theta: &Mat<f64>, i_in: &[f64]) -> Result<Mat<f64>> {
        self.eq.residual(theta, i_in)
    }

    /// Solves the circuit for input currents `i_in`.
    pub fn solve(&self, i_in: &[f64]) -> Result<InvSolution> {
        let n = self.model().n();
        check_dim("input current length", n, i_in.len())?;
        let i0 = input_matrix(n, i_in);
        let scale = crate::sparse::norm_inf(i_in) / self.model().g2();
        let sol: FieldSolution = self
            .solver
            .solve_affine(|th| self.eq.residual_unchecked(th, &i0), scale)?;
        let output = (0..n).map(|i| sol.field[(i, n - 1)]).collect();
        Ok(InvSolution {
            output,
            report: self.solver.report(&sol),
            theta: sol.field,
        })
    }

    /// Approximates `x = G^{-1} b`: drives the rows with `i = -b` so the
    /// outputs carry the solution with a positive sign.
    pub fn solve_linear_system(&self, b: &[f64]) -> Result<InvSolution> {
        let neg: Vec<f64> = b.iter().map(|v| -v).collect();
        self.solve(&neg)
    }
}

impl InvEquations {
    pub fn new(model: &CrossbarModel) -> Result<Self> {
        let ops = StructuredOperators::new(model.n())?;
        let m1d = ops.sel.m1.compose(&ops.d);
        let g1_over_g = inverse_scaled(model.g(), model.g1());
        Ok(Self {
            model: model.clone(),
            ops,
            m1d,
            g1_over_g,
        })
    }

    fn assemble(&self) -> Result<(SparseMatrix, f64)> {
        let (g1, g2) = (self.model.g1(), self.model.g2());
        let ident = Operator::identity(self.model.n());
        assemble(self.model.n(), |st| {
            st.transpose_sandwich(1.0, &self.ops.sel.m2, &ident);
            st.sandwich(-g1 / g2, &ident, &self.m1d);
            st.sandwich(-1.0, &self.ops.d, &self.ops.sel.m1);
            st.hadamard_sandwich(-1.0, &self.ops.d, &self.g1_over_g, &self.m1d);
        })
    }

    /// Constant Jacobian `dF/dvec(theta)`.
    pub fn jacobian(&self) -> Result<SparseMatrix> {
        Ok(self.assemble()?.0)
    }

    /// `F(theta)` for input currents `i_in`.
    pub fn residual(&self, theta: &Mat<f64>, i_in: &[f64]) -> Result<Mat<f64>> {
        let n = self.model.n();
        check_dim("input current length", n, i_in.len())?;
        check_dim("field rows", n, theta.nrows())?;
        check_dim("field columns", n, theta.ncols())?;
        Ok(self.residual_unchecked(theta, &input_matrix(n, i_in)))
    }

    fn residual_unchecked(&self, theta: &Mat<f64>, i0: &Mat<f64>) -> Mat<f64> {
        let n = self.model.n();
        let (g1, g2) = (self.model.g1(), self.model.g2());
        let ident = Operator::identity(n);
        let mut f = Mat::from_fn(n, n, |i, j| i0[(i, j)] / g2);
        add_into(&mut f, &eval_transpose_sandwich(1.0, theta, &self.ops.sel.m2, &ident));
        add_into(&mut f, &eval_sandwich(-g1 / g2, &ident, theta, &self.m1d));
        add_into(&mut f, &eval_sandwich(-1.0, &self.ops.d, theta, &self.ops.sel.m1));
        add_into(
            &mut f,
            &eval_hadamard_sandwich(-1.0, &self.ops.d, &self.g1_over_g, theta, &self.m1d),
        );
        // + D[(1/G) o I0]
        let inner = Mat::from_fn(n, n, |i, j| i0[(i, j)] / self.model.g()[(i, j)]);
        add_into(&mut f, &self.ops.d.apply_left(&inner));
        f
    }
}

pub fn residual_inv(model: &CrossbarModel, theta: &Mat<f64>, i_in: &[f64]) -> Result<Mat<f64>> {
    InvEquations::new(model)?.residual(theta, i_in)
}

pub fn jacobian_inv(model: &CrossbarModel) -> Result<SparseMatrix> {
    InvEquations::new(model)?.jacobian()
}

pub fn solve_inv(model: &CrossbarModel, i_in: &[f64]) -> Result<InvSolution> {
    InvCircuit::new(model)?.solve(i_in)
}

/// `x ~ G^{-1} b` as computed by the INV crossbar.
pub fn solve_linear_system(model: &CrossbarModel, b: &[f64]) -> Result<Vec<f64>> {
    Ok(InvCircuit::new(model)?.solve_linear_system(b)?.output)
}
