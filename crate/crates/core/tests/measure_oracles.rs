use genmeter_core::autodiff::{ParamVector, Tensor};
use genmeter_core::measures::calibration::binned_errors;
use genmeter_core::measures::info::{aic_bias, aicc_bias, tic_bias, tic_bias_bound};
use genmeter_core::measures::norms::{frobenius_distance, path_norm, spectral_norm};
use genmeter_core::measures::pac_bayes::{kl_diag_gaussian, mcallester};
use genmeter_core::measures::{all_names, compute_measures, select, vcdim, Category, MeasureConfig};
use genmeter_core::sandbox::{make_dataset, train_run, DatasetKind, ModelSpec, OptimizerKind, TrainConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn vcdim_and_classical_penalties() {
    assert!((vcdim(100).unwrap() - 200.0 * 10f64.ln()).abs() < 1e-9);
    assert_eq!(vcdim(1).unwrap(), 0.0);
    assert!(vcdim(0).is_err());
    assert_eq!(aic_bias(10), 20.0);
    assert!((aicc_bias(10, 100).unwrap() - (20.0 + 220.0 / 89.0)).abs() < 1e-12);
    assert!(aicc_bias(10, 11).is_err());
}

#[test]
fn kl_scalar_cases() {
    assert!((kl_diag_gaussian(&[1.0], &[0.0], &[1.0], 1.0) - 0.5).abs() < 1e-15);
    assert_eq!(kl_diag_gaussian(&[0.3, -0.2], &[0.3, -0.2], &[0.7, 0.7], 0.7), 0.0);
    let want = 0.5 * (0.25 - 1.0 - 0.25f64.ln());
    assert!((kl_diag_gaussian(&[0.0], &[0.0], &[0.5], 1.0) - want).abs() < 1e-15);
    // additive over coordinates
    let two = kl_diag_gaussian(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 0.5], 1.0);
    assert!((two - 0.5 - want).abs() < 1e-15);
}

#[test]
fn mcallester_identity() {
    let (r, kl, n, d): (f64, f64, usize, f64) = (0.1, 3.0, 400, 0.05);
    let want = r + ((kl + (2.0 * 20.0 / d).ln()) / 800.0).sqrt();
    assert!((mcallester(r, kl, n, d).unwrap() - want).abs() < 1e-15);
}

/// Σ over every input→output path (or bias→output path) of Π w².
fn enumerate_paths(spec: &ModelSpec, p: &ParamVector) -> f64 {
    fn walk(spec: &ModelSpec, p: &ParamVector, layer: usize, unit: usize, acc: f64) -> f64 {
        if layer == spec.depth() {
            return acc;
        }
        let w = p.segment(&format!("W{layer}")).unwrap();
        let (rows, cols) = w.dims2().unwrap();
        (0..rows).map(|o| walk(spec, p, layer + 1, o, acc * w.values()[o * cols + unit].powi(2))).sum()
    }
    let mut total: f64 = (0..spec.input_dim).map(|i| walk(spec, p, 0, i, 1.0)).sum();
    if spec.bias {
        for l in 0..spec.depth() {
            let b = p.segment(&format!("b{l}")).unwrap();
            for (o, v) in b.values().iter().enumerate() {
                total += walk(spec, p, l + 1, o, v * v);
            }
        }
    }
    total
}

#[test]
fn path_norm_matches_path_enumeration() {
    let mut r = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let depth = r.random_range(0..=3);
        let spec = ModelSpec {
            bias: r.random_bool(0.5),
            ..ModelSpec::new(
                r.random_range(1..=3),
                (0..depth).map(|_| r.random_range(1..=3)).collect(),
                r.random_range(2..=3),
            )
        };
        let flat: Vec<f64> = (0..spec.param_count()).map(|_| r.random_range(-1.5..1.5)).collect();
        let p = ParamVector::from_flat(&spec.layout(), &flat).unwrap();
        let got = path_norm(&spec, &p).unwrap();
        let want = enumerate_paths(&spec, &p);
        assert!((got - want).abs() < 1e-10 * want.max(1.0), "{got} vs {want}");
    }
}

#[test]
fn spectral_norm_matches_dense_svd() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for case in 0..40 {
        let (m, n) = (r.random_range(1..=8), r.random_range(1..=8));
        let vals: Vec<f64> = (0..m * n).map(|_| r.random_range(-2.0..2.0)).collect();
        let svd = DMatrix::from_row_slice(m, n, &vals).singular_values();
        let want = svd.iter().cloned().fold(0.0, f64::max);
        let got = spectral_norm(&Tensor::matrix(m, n, vals).unwrap(), 10_000, 1e-14, case).unwrap();
        assert!((got - want).abs() < 1e-6, "{m}x{n}: {got} vs {want}");
    }
}

#[test]
fn frobenius_distance_is_flat_l2() {
    let a = ParamVector::new(vec![("W0".into(), Tensor::matrix(1, 2, vec![3.0, 0.0]).unwrap())]).unwrap();
    let b = ParamVector::new(vec![("W0".into(), Tensor::matrix(1, 2, vec![0.0, 4.0]).unwrap())]).unwrap();
    assert_eq!(frobenius_distance(&a, &b).unwrap(), 5.0);
}

#[test]
fn two_bin_calibration_arithmetic() {
    let conf = [0.2, 0.3, 0.4, 0.9];
    let correct = [false, true, true, false];
    let (ece, mce, rd) = binned_errors(&conf, &correct, 2);
    // bin (0, 0.5]: conf 0.3, acc 2/3; bin (0.5, 1]: conf 0.9, acc 0
    let g0 = 2.0 / 3.0 - 0.3;
    let g1 = 0.9;
    assert!((ece - (0.75 * g0 + 0.25 * g1)).abs() < 1e-12);
    assert!((mce - g1).abs() < 1e-12);
    assert!((rd - (g0 + g1) / 2.0).abs() < 1e-12);
}

#[test]
fn tic_well_specified_equals_parameter_count() {
    let j = [0.3, 1.2, 5.0, 0.01, 2.5];
    assert_eq!(tic_bias(&j, &j, 0.0).unwrap(), 5.0);
    let i = [1.0, 2.0, 4.0];
    assert_eq!(tic_bias_bound(&[1.0, 1.0, 1.0], &i, 0.0).unwrap(), 3.0);
}

fn trained() -> (genmeter_core::sandbox::DatasetBundle, genmeter_core::sandbox::RunRecord) {
    let ds = make_dataset(DatasetKind::Blobs, 60, 3, 1.0, 2).unwrap();
    let spec = ModelSpec { dropout_p: 0.1, ..ModelSpec::new(2, vec![6], 3) };
    let cfg = TrainConfig {
        optimizer: OptimizerKind::Adam,
        learning_rate: 0.01,
        batch_size: 16,
        weight_decay: 1e-4,
        epochs: 12,
        seed: 4,
    };
    let mut rec = train_run(&ds, &spec, &cfg).unwrap();
    rec.run_id = "r0".into();
    (ds, rec)
}

#[test]
fn full_catalog_on_a_trained_run() {
    let (ds, rec) = trained();
    let cfg = MeasureConfig::default();
    let names = all_names();
    let vals = compute_measures(&rec, &ds, &cfg, &names).unwrap();
    assert_eq!(vals.len(), 42);
    let got: Vec<&str> = vals.iter().map(|v| v.name.as_str()).collect();
    assert_eq!(got, names);
    for v in &vals {
        assert!(!v.is_ok() || v.value.is_finite(), "{} ok but non-finite", v.name);
    }
    let k = rec.model.param_count();
    let by = |n: &str| vals.iter().find(|v| v.name == n).unwrap().value;
    assert_eq!(by("params"), k as f64);
    assert!((by("vcdim") - k as f64 * (k as f64).ln()).abs() < 1e-9);
    assert_eq!(by("aic_bias_term"), 2.0 * k as f64);
    assert!((by("path_norm") - enumerate_paths(&rec.model, &rec.final_params)).abs() < 1e-9);
    let again = compute_measures(&rec, &ds, &cfg, &names).unwrap();
    for (a, b) in vals.iter().zip(&again) {
        assert!(a.value.to_bits() == b.value.to_bits() || (a.value.is_nan() && b.value.is_nan()), "{}", a.name);
    }
}

#[test]
fn subset_values_equal_full_catalog_values() {
    let (ds, rec) = trained();
    let cfg = MeasureConfig::default();
    let full = compute_measures(&rec, &ds, &cfg, &all_names()).unwrap();
    for name in
        ["pac_bayes_magflat", "sharpness_magnitude_init", "tic_bias_term", "gradient_noise_final_var", "waic_bias_term"]
    {
        let one = compute_measures(&rec, &ds, &cfg, &[name]).unwrap();
        let f = full.iter().find(|v| v.name == name).unwrap();
        assert_eq!(one[0].value.to_bits(), f.value.to_bits(), "{name}");
    }
}

#[test]
fn calibration_filter_selects_five() {
    let names = select("calibration").unwrap();
    assert_eq!(names, ["ece", "mce", "ace", "reliability_diagram", "temperature_scaling"]);
    assert_eq!(select("ece,sharpness").unwrap().len(), 1 + 12);
    let err = select("nope").unwrap_err().to_string();
    assert!(err.contains("vcdim") && err.contains("temperature_scaling"), "{err}");
    assert_eq!(Category::ALL.len(), 6);
}
