use amcsim::egv::{jacobian_egv, residual_egv, EgvCircuit, DEFAULT_V0};
use amcsim::inv::{jacobian_inv, residual_inv, solve_linear_system, InvCircuit};
use amcsim::mvm::{jacobian_mvm, residual_mvm, MvmCircuit};
use amcsim::oracle::{oracle_egv, oracle_inv, oracle_mvm};
use amcsim::reference::{dominant_eigen, eigenvector_error, ideal_inverse, ideal_mvm, relative_error};
use amcsim::sparse::SparseMatrix;
use amcsim::workload::{gen_input, gen_matrix, InputKind, MatrixKind, MatrixSpec};
use amcsim::{CrossbarModel, Error, RowMajor};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use proptest::prelude::*;

fn model(n: usize, r: f64, seed: u64) -> CrossbarModel {
    let g = gen_matrix(&MatrixSpec::new(n, MatrixKind::DiagDominantSymmetric, seed)).unwrap();
    CrossbarModel::with_wire_resistance(g, r).unwrap()
}

fn linearity_gap(jac: &SparseMatrix, f: impl Fn(&Mat<f64>) -> Mat<f64>, theta: &Mat<f64>) -> f64 {
    let n = theta.nrows();
    let f0 = RowMajor::vec(&f(&Mat::zeros(n, n)));
    let ft = RowMajor::vec(&f(theta));
    let jt = jac.mul_vec(&RowMajor::vec(theta));
    let diff: Vec<f64> = ft.iter().zip(&f0).map(|(a, b)| a - b).collect();
    relative_error(&diff, &jt)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn residuals_are_affine_with_the_stamped_jacobian(
        n in 2usize..7,
        seed in 0u64..1000,
        r in 0.5f64..5.0,
        vals in proptest::collection::vec(-1.0f64..1.0, 36),
    ) {
        let m = model(n, r, seed);
        let theta = Mat::from_fn(n, n, |i, j| vals[i * 6 + j]);
        let i_in = gen_input(n, InputKind::Current, seed);
        let v_in = gen_input(n, InputKind::Voltage, seed);
        let gl = dominant_eigen(m.g()).unwrap().0;
        let inv = linearity_gap(&jacobian_inv(&m).unwrap(), |t| residual_inv(&m, t, &i_in).unwrap(), &theta);
        let egv = linearity_gap(&jacobian_egv(&m, gl).unwrap(), |t| residual_egv(&m, t, gl, DEFAULT_V0).unwrap(), &theta);
        let mvm = linearity_gap(&jacobian_mvm(&m).unwrap(), |t| residual_mvm(&m, t, &v_in).unwrap(), &theta);
        prop_assert!(inv < 1e-12, "inv {inv:e}");
        prop_assert!(egv < 1e-12, "egv {egv:e}");
        prop_assert!(mvm < 1e-12, "mvm {mvm:e}");
    }

    #[test]
    fn inv_output_is_linear_in_the_input(seed in 0u64..500, k in 0.1f64..3.0) {
        let m = model(5, 2.97, seed);
        let c = InvCircuit::new(&m).unwrap();
        let b = gen_input(5, InputKind::Current, seed + 1);
        let kb: Vec<f64> = b.iter().map(|v| v * k).collect();
        let x = c.solve_linear_system(&b).unwrap().output;
        let kx: Vec<f64> = x.iter().map(|v| v * k).collect();
        prop_assert!(relative_error(&c.solve_linear_system(&kb).unwrap().output, &kx) < 1e-10);
    }
}

#[test]
fn solutions_satisfy_their_residual_equations() {
    let m = model(7, 4.53, 3);
    let i_in = gen_input(7, InputKind::Current, 1);
    let s = InvCircuit::new(&m).unwrap().solve(&i_in).unwrap();
    assert!(s.report.converged);
    let f = residual_inv(&m, &s.theta, &i_in).unwrap();
    let scale = i_in.iter().fold(0.0f64, |a, v| a.max(v.abs())) / m.g2();
    assert!(RowMajor::vec(&f).iter().all(|v| v.abs() <= 1e-9 * scale.max(1.0)));
    assert_eq!(s.report.sparsity.dim, 49);
}

#[test]
fn every_circuit_agrees_with_its_netlist() {
    for seed in 0..3 {
        let m = model(5, 2.97, seed);
        let b = gen_input(5, InputKind::Current, seed);
        let x = InvCircuit::new(&m).unwrap().solve_linear_system(&b).unwrap().output;
        let neg: Vec<f64> = b.iter().map(|v| -v).collect();
        assert!(relative_error(&x, &oracle_inv(&m, &neg).unwrap()) < 1e-9);

        let v = gen_input(5, InputKind::Voltage, seed);
        let y = MvmCircuit::new(&m).unwrap().solve(&v).unwrap().output;
        assert!(relative_error(&y, &oracle_mvm(&m, &v).unwrap()) < 1e-9);

        let gl = dominant_eigen(m.g()).unwrap().0 * 0.99;
        let e = EgvCircuit::new(&m, gl).unwrap().solve().unwrap().output;
        assert!(relative_error(&e, &oracle_egv(&m, gl, DEFAULT_V0).unwrap()) < 1e-9);
    }
}

#[test]
fn vanishing_wire_resistance_recovers_the_ideal_results() {
    for seed in 0..3 {
        let m = model(8, 1e-6, seed);
        let b = gen_input(8, InputKind::Current, seed);
        let x = solve_linear_system(&m, &b).unwrap();
        assert!(relative_error(&x, &ideal_inverse(m.g(), &b).unwrap()) < 1e-6);
        let neg = InvCircuit::new(&m).unwrap().solve(&b).unwrap().output;
        let minus_x: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!(relative_error(&neg, &minus_x) < 1e-12);

        let v = gen_input(8, InputKind::Voltage, seed);
        let y = MvmCircuit::new(&m).unwrap().solve(&v).unwrap().output;
        assert!(relative_error(&y, &ideal_mvm(m.g(), &v).unwrap()) < 1e-6);

        let (gl, ev) = dominant_eigen(m.g()).unwrap();
        let e = EgvCircuit::new(&m, gl).unwrap().solve().unwrap().eigenvector;
        assert!(eigenvector_error(&e, &ev) < 1e-4);
    }
}

#[test]
fn wire_resistance_degrades_accuracy_monotonically() {
    let b = gen_input(16, InputKind::Current, 2);
    let mut last = 0.0;
    for r in [0.5, 1.0, 2.0, 4.0] {
        let m = model(16, r, 2);
        let x = solve_linear_system(&m, &b).unwrap();
        let re = relative_error(&x, &ideal_inverse(m.g(), &b).unwrap());
        assert!(re > last, "r = {r}: {re:e} after {last:e}");
        last = re;
    }
}

#[test]
fn multifrontal_lu_matches_a_reference_sparse_lu() {
    let m = model(12, 4.53, 7);
    let jac = jacobian_inv(&m).unwrap();
    let dim = jac.dim();
    let trips: Vec<Triplet<usize, usize, f64>> = jac.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
    let reference = SparseColMat::<usize, f64>::try_new_from_triplets(dim, dim, &trips).unwrap();
    let lu = reference.sp_lu().unwrap();
    let rhs: Vec<f64> = (0..dim).map(|k| ((k * 37 % 11) as f64 - 5.0) * 1e-3).collect();
    let x_ref = faer::linalg::solvers::Solve::solve(&lu, Mat::from_fn(dim, 1, |i, _| rhs[i]));
    let x_ref: Vec<f64> = (0..dim).map(|i| x_ref[(i, 0)]).collect();
    let ours = amcsim::sparse::SparseLu::factorize(&jac).unwrap().solve(&rhs).unwrap();
    assert!(relative_error(&ours, &x_ref) < 1e-10);
}

#[test]
fn shared_symbolic_analysis_reproduces_fresh_factorizations() {
    let a = model(10, 1.55, 1);
    let b = model(10, 1.55, 2);
    let sym = InvCircuit::new(&a).unwrap().symbolic();
    let i_in = gen_input(10, InputKind::Current, 5);
    let fresh = InvCircuit::new(&b).unwrap().solve(&i_in).unwrap().output;
    let reused = InvCircuit::with_symbolic(&b, &sym)
        .unwrap()
        .solve(&i_in)
        .unwrap()
        .output;
    assert_eq!(fresh, reused);
    let v = gen_input(10, InputKind::Voltage, 5);
    let ms = MvmCircuit::new(&a).unwrap().symbolic();
    let y0 = MvmCircuit::new(&b).unwrap().solve(&v).unwrap().output;
    let y1 = MvmCircuit::with_symbolic(&b, Some(&ms))
        .unwrap()
        .solve(&v)
        .unwrap()
        .output;
    assert_eq!(y0, y1);
}

#[test]
fn malformed_inputs_are_rejected() {
    let m = model(4, 1.0, 0);
    assert!(matches!(
        InvCircuit::new(&m).unwrap().solve(&[1e-6; 3]),
        Err(Error::Dimension { .. })
    ));
    assert!(matches!(
        MvmCircuit::new(&m).unwrap().solve(&[0.1; 5]),
        Err(Error::Dimension { .. })
    ));
    assert!(EgvCircuit::new(&m, 0.0).is_err());
    assert!(EgvCircuit::new(&m, f64::NAN).is_err());
    assert!(residual_inv(&m, &Mat::zeros(3, 3), &[1e-6; 4]).is_err());
    let mut g = m.g().to_owned();
    g[(1, 2)] = 0.0;
    assert!(matches!(
        CrossbarModel::with_wire_resistance(g, 1.0),
        Err(Error::ZeroConductance { row: 1, col: 2 })
    ));
    assert!(CrossbarModel::with_wire_resistance(Mat::from_fn(1, 1, |_, _| 1e-5), 1.0).is_err());
    assert!(CrossbarModel::with_wire_resistance(m.g().to_owned(), 0.0).is_err());
}

#[test]
fn solves_are_deterministic() {
    let m = model(9, 4.53, 4);
    let b = gen_input(9, InputKind::Current, 4);
    let a = solve_linear_system(&m, &b).unwrap();
    let c = solve_linear_system(&m, &b).unwrap();
    assert_eq!(a, c);
}

#[test]
fn refined_solves_match_the_netlist_to_rounding_at_moderate_size() {
    for seed in 0..3 {
        let m = model(32, 4.53, seed);
        let b = gen_input(32, InputKind::Current, seed);
        let neg: Vec<f64> = b.iter().map(|v| -v).collect();
        let x = InvCircuit::new(&m).unwrap().solve_linear_system(&b).unwrap().output;
        assert!(relative_error(&x, &oracle_inv(&m, &neg).unwrap()) < 1e-10);
        let v = gen_input(32, InputKind::Voltage, seed);
        let y = MvmCircuit::new(&m).unwrap().solve(&v).unwrap().output;
        assert!(relative_error(&y, &oracle_mvm(&m, &v).unwrap()) < 1e-10);
        let gl = dominant_eigen(m.g()).unwrap().0;
        let e = EgvCircuit::new(&m, gl).unwrap().solve().unwrap().output;
        assert!(relative_error(&e, &oracle_egv(&m, gl, DEFAULT_V0).unwrap()) < 1e-9);
    }
}
