//! Simulation of analog matrix-computing (AMC) crossbar circuits with finite
//! wire resistance.
//!
//! Three circuits are modelled: matrix inversion (`inv`), dominant
//! eigenvector computation (`egv`) and matrix-vector multiplication (`mvm`).
//! Each is described by residual equations in the node voltages of the
//! crossbar; the solvers stamp the exact Jacobian of those equations into a
//! sparse matrix and solve it with the multifrontal LU in [`sparse`]. An
//! independent nodal-analysis netlist in [`oracle`] serves as ground truth.
//!
//! [`compensation`] searches the uniform bias that minimizes the
//! wire-resistance error, [`workload`] generates reproducible problems and
//! [`experiment`] runs cases and the scaling benchmark.

pub mod compensation;
pub mod egv;
pub mod error;
pub mod experiment;
pub mod inv;
pub mod model;
pub mod mvm;
pub mod oracle;
pub mod reference;
mod solver;
pub mod sparse;
mod stamp;
pub mod workload;

pub use error::{Error, Result};
pub use faer::Mat;
pub use model::{CircuitKind, CrossbarModel, Operator, RowMajor, StructuredOperators};
pub use solver::{SolveReport, Timings};
