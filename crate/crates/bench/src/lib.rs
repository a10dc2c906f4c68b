//! Shared fixtures for the criterion benchmarks in `benches/`.

use amcsim::reference::dominant_eigen;
use amcsim::workload::{derive_seed, gen_input, gen_matrix, InputKind, MatrixKind, MatrixSpec};
use amcsim::CrossbarModel;

/// Sizes timed by the solver benchmarks; the full scaling run to N = 1024
/// is `amcsim bench`.
pub const SIZES: [usize; 4] = [16, 32, 64, 128];

/// Wire resistance of the 16 nm preset.
pub const R_OHM: f64 = 4.53;

pub struct Fixture {
    pub model: CrossbarModel,
    pub currents: Vec<f64>,
    pub voltages: Vec<f64>,
    pub lambda_max: f64,
}

/// Deterministic dominant symmetric problem of size `n`.
pub fn fixture(n: usize) -> Fixture {
    let seed = derive_seed(0xbe4c, &[n as u64]);
    let g = gen_matrix(&MatrixSpec::new(n, MatrixKind::DiagDominantSymmetric, seed)).expect("feasible spec");
    let lambda_max = dominant_eigen(&g).expect("symmetric matrix").0;
    Fixture {
        model: CrossbarModel::with_wire_resistance(g, R_OHM).expect("valid model"),
        currents: gen_input(n, InputKind::Current, seed),
        voltages: gen_input(n, InputKind::Voltage, seed),
        lambda_max,
    }
}
