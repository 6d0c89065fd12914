use genmeter_core::autodiff::{hvp, HvpMethod, Objective, Quadratic};
use genmeter_core::measures::curvature::{hessian_diagonal, hessian_top_eigenvalue, hessian_trace, PowerIteration};
use genmeter_core::rng;
use genmeter_core::sandbox::{make_dataset, BatchObjective, DatasetKind, ModelSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Q·diag(λ)·Qᵀ with Q orthogonal from the QR of a Gaussian-ish matrix.
fn with_spectrum(eigs: &[f64], r: &mut ChaCha8Rng) -> DMatrix<f64> {
    let d = eigs.len();
    let m = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
    let q = m.qr().q();
    &q * DMatrix::from_diagonal(&DVector::from_column_slice(eigs)) * q.transpose()
}

fn quadratic(a: &DMatrix<f64>) -> Quadratic {
    Quadratic::new((0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect()).collect())
}

#[test]
fn top_eigenvalue_on_known_spectra() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let pi = PowerIteration { iters: 2000, tol: 1e-10 };
    for case in 0..30 {
        let d = r.random_range(2..=8);
        let top: f64 = r.random_range(3.0..6.0) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut eigs: Vec<f64> = (1..d).map(|_| r.random_range(-0.6..0.6) * top.abs()).collect();
        eigs.push(top);
        let a = with_spectrum(&eigs, &mut r);
        let theta: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let est = hessian_top_eigenvalue(&quadratic(&a), &theta, pi, &mut rng::stream(case, &[])).unwrap();
        assert!((est - top).abs() < 1e-3, "case {case}: {est} vs {top} ({eigs:?})");
    }
}

#[test]
fn top_eigenvalue_small_cases() {
    let pi = PowerIteration { iters: 500, tol: 1e-10 };
    let mut s = rng::stream(1, &[]);
    let e = hessian_top_eigenvalue(&Quadratic::diagonal(&[3.0, 1.0]), &[0.2, -0.4], pi, &mut s).unwrap();
    assert!((e - 3.0).abs() < 1e-3);
    let e = hessian_top_eigenvalue(&Quadratic::diagonal(&[-2.0, 1.0]), &[0.0, 0.0], pi, &mut s).unwrap();
    assert!((e + 2.0).abs() < 1e-3);
}

#[test]
fn hutchinson_trace_diag_3_1() {
    let q = Quadratic::diagonal(&[3.0, 1.0]);
    let t = hessian_trace(&q, &[0.5, 0.5], 200, &mut rng::stream(5, &[])).unwrap();
    assert!((t - 4.0).abs() < 0.15, "{t}");
}

#[test]
fn hutchinson_trace_dense_matrix() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    let a = with_spectrum(&[2.0, 1.5, 1.0, 0.5, 0.25], &mut r);
    let t = hessian_trace(&quadratic(&a), &[0.0; 5], 2000, &mut rng::stream(9, &[])).unwrap();
    assert!((t - a.trace()).abs() < 0.15, "{t} vs {}", a.trace());
}

#[test]
fn hvp_on_quadratic_is_matrix_product() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let a = with_spectrum(&[4.0, -1.0, 0.3, 2.2], &mut r);
    let q = quadratic(&a);
    for _ in 0..10 {
        let theta: Vec<f64> = (0..4).map(|_| r.random_range(-3.0..3.0)).collect();
        let v: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
        let got = hvp(&q, &theta, &v, HvpMethod::FdCentral).unwrap();
        let want = &a * DVector::from_column_slice(&v);
        for i in 0..4 {
            assert!((got[i] - want[i]).abs() < 1e-6);
        }
    }
}

#[test]
fn hvp_on_mlp_matches_hessian_column_by_differences() {
    let ds = make_dataset(DatasetKind::Moons, 20, 2, 0.1, 3).unwrap();
    let spec = ModelSpec { activation: genmeter_core::sandbox::Activation::Tanh, ..ModelSpec::new(2, vec![3], 2) };
    let obj = BatchObjective::new(&spec, &ds.train);
    let theta = spec.init_params(1).unwrap().flatten();
    let d = theta.len();
    // column j of H by central differences of the analytic gradient at a coarser step
    let h = 1e-5;
    for j in [0, d / 2, d - 1] {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        let got = hvp(&obj, &theta, &e, HvpMethod::FdCentral).unwrap();
        let mut p = theta.clone();
        p[j] += h;
        let gp = obj.grad(&p).unwrap();
        p[j] -= 2.0 * h;
        let gm = obj.grad(&p).unwrap();
        for i in 0..d {
            let want = (gp[i] - gm[i]) / (2.0 * h);
            assert!((got[i] - want).abs() < 1e-5 * (1.0 + want.abs()), "H[{i},{j}] {} vs {want}", got[i]);
        }
    }
}

#[test]
fn exact_diagonal_and_hutchinson_estimate() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let a = with_spectrum(&[3.0, 2.0, 1.0, 0.5], &mut r);
    let q = quadratic(&a);
    let exact = hessian_diagonal(&q, &[0.0; 4], 512, 0, &mut rng::stream(0, &[])).unwrap();
    let est = hessian_diagonal(&q, &[0.0; 4], 0, 4000, &mut rng::stream(0, &[])).unwrap();
    for i in 0..4 {
        assert!((exact[i] - a[(i, i)]).abs() < 1e-6);
        assert!((est[i] - a[(i, i)]).abs() < 0.15, "{i}: {} vs {}", est[i], a[(i, i)]);
    }
}
