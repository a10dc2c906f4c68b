//! Matrix-vector multiplication (MVM) crossbar.
//!
//! Row `i` is driven at its left end by `v_i` through one row segment; every
//! column bottom feeds a virtual-ground sense amplifier through one column
//! segment. The output currents approximate `G^T v`. The unknown field is
//! the transposed column-node voltage matrix, `U[j, i]` being the voltage on
//! column `j` at row `i`.

use faer::Mat;

use crate::error::{check_dim, Result};
use crate::model::{CrossbarModel, Operator, StructuredOperators};
use crate::solver::{add_into, assemble, field_ordering, inverse_scaled, FieldSolver, SolveReport};
use crate::sparse::{norm_inf, SparseMatrix, SymbolicLu};
use crate::stamp::{eval_hadamard_sandwich, eval_sandwich};

#[derive(Clone, Debug)]
pub struct MvmSolution {
    pub u: Mat<f64>,
    /// Sensed column currents.
    pub output: Vec<f64>,
    pub report: SolveReport,
}

#[derive(Clone, Debug)]
pub struct MvmEquations {
    model: CrossbarModel,
    ops: StructuredOperators,
    g2_over_gt: Mat<f64>,
}

impl MvmEquations {
    pub fn new(model: &CrossbarModel) -> Result<Self> {
        let gt = model.g().transpose().to_owned();
        Ok(Self {
            ops: StructuredOperators::new(model.n())?,
            g2_over_gt: inverse_scaled(&gt, model.g2()),
            model: model.clone(),
        })
    }

    fn assemble(&self) -> Result<(SparseMatrix, f64)> {
        let n = self.model.n();
        let (g1, g2) = (self.model.g1(), self.model.g2());
        let ident = Operator::identity(n);
        let o = &self.ops;
        assemble(n, |st| {
            st.hadamard_sandwich(1.0, &o.d1, &self.g2_over_gt, &o.d);
            st.sandwich(g2 / g1, &ident, &o.d);
            st.sandwich(1.0, &o.d1, &ident);
        })
    }

    pub fn jacobian(&self) -> Result<SparseMatrix> {
        Ok(self.assemble()?.0)
    }

    pub fn residual(&self, u: &Mat<f64>, v_in: &[f64]) -> Result<Mat<f64>> {
        let n = self.model.n();
        check_dim("input voltage length", n, v_in.len())?;
        check_dim("field rows", n, u.nrows())?;
        check_dim("field columns", n, u.ncols())?;
        Ok(self.residual_unchecked(u, v_in))
    }

    fn residual_unchecked(&self, u: &Mat<f64>, v_in: &[f64]) -> Mat<f64> {
        let n = self.model.n();
        let (g1, g2) = (self.model.g1(), self.model.g2());
        let ident = Operator::identity(n);
        let o = &self.ops;
        let mut f = eval_hadamard_sandwich(1.0, &o.d1, &self.g2_over_gt, u, &o.d);
        add_into(&mut f, &eval_sandwich(g2 / g1, &ident, u, &o.d));
        add_into(&mut f, &eval_sandwich(1.0, &o.d1, u, &ident));
        // D1 applied to the ideal field (every row equal to v_in) leaves only
        // its first row.
        for j in 0..n {
            f[(0, j)] -= v_in[j];
        }
        f
    }
}

#[derive(Clone, Debug)]
pub struct MvmCircuit {
    eq: MvmEquations,
    solver: FieldSolver,
}

impl MvmCircuit {
    pub fn new(model: &CrossbarModel) -> Result<Self> {
        Self::with_symbolic(model, None)
    }

    pub fn with_symbolic(model: &CrossbarModel, sym: Option<&SymbolicLu>) -> Result<Self> {
        let eq = MvmEquations::new(model)?;
        let n = model.n();
        let (jac, ms) = eq.assemble()?;
        let solver = FieldSolver::build(n, jac, ms, &field_ordering(n, false), sym)?;
        Ok(Self { eq, solver })
    }

    pub fn equations(&self) -> &MvmEquations {
        &self.eq
    }

    pub fn jacobian(&self) -> &SparseMatrix {
        self.solver.jacobian()
    }

    pub fn symbolic(&self) -> SymbolicLu {
        SymbolicLu::analyze(self.jacobian(), &field_ordering(self.eq.model.n(), false))
    }

    pub fn solve(&self, v_in: &[f64]) -> Result<MvmSolution> {
        let n = self.eq.model.n();
        check_dim("input voltage length", n, v_in.len())?;
        let sol = self
            .solver
            .solve_affine(|u| self.eq.residual_unchecked(u, v_in), norm_inf(v_in))?;
        let g2 = self.eq.model.g2();
        let output = (0..n).map(|j| g2 * sol.field[(j, n - 1)]).collect();
        Ok(MvmSolution {
            output,
            report: self.solver.report(&sol),
            u: sol.field,
        })
    }
}

pub fn residual_mvm(model: &CrossbarModel, u: &Mat<f64>, v_in: &[f64]) -> Result<Mat<f64>> {
    MvmEquations::new(model)?.residual(u, v_in)
}

pub fn jacobian_mvm(model: &CrossbarModel) -> Result<SparseMatrix> {
    MvmEquations::new(model)?.jacobian()
}

pub fn solve_mvm(model: &CrossbarModel, v_in: &[f64]) -> Result<MvmSolution> {
    MvmCircuit::new(model)?.solve(v_in)
}
