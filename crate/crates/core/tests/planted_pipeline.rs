use genmeter_core::stats::{analyze, StatsConfig, TargetSpec};
use genmeter_core::sweep::{planted_records, HyperGrid, Planted};
use genmeter_core::Execution;

fn axis(name: &str, n: usize) -> (String, Vec<String>) {
    (name.into(), (0..n).map(|i| i.to_string()).collect())
}

#[test]
fn planted_measures_end_to_end() {
    // 5 × 5 × 24 = 600 runs
    let grid = HyperGrid::new(vec![axis("learning_rate", 5), axis("weight_decay", 5), axis("seed", 24)]).unwrap();
    let recs =
        planted_records(&grid, 17, &[], &[("cross_entropy", Planted::Gap), ("magnitude", Planted::Noise)]).unwrap();
    assert!(recs.len() >= 500);
    let rep = analyze(&recs, &[TargetSpec::Iid], &StatsConfig::default(), Execution::Parallel).unwrap();

    let psi = |m: &str| rep.psi.iter().find(|r| r.measure == m).unwrap().psi;
    let se = |m: &str| rep.sign_error.iter().find(|r| r.measure == m).unwrap();
    let k = |m: &str| rep.cmi.iter().find(|r| r.measure == m).unwrap().k.unwrap();

    assert_eq!(psi("cross_entropy"), 1.0);
    assert_eq!(se("cross_entropy").max, Some(0.0));
    assert_eq!(k("cross_entropy"), 1.0);

    assert!(psi("magnitude").abs() <= 0.1, "{}", psi("magnitude"));
    let m = se("magnitude").mean.unwrap();
    assert!((0.4..=0.6).contains(&m), "{m}");
    assert!(k("magnitude") <= 0.05, "{}", k("magnitude"));
}

#[test]
fn missing_shift_target_is_reported_and_iid_kept() {
    let grid = HyperGrid::new(vec![axis("learning_rate", 3), axis("seed", 6)]).unwrap();
    let recs = planted_records(&grid, 1, &[], &[("cross_entropy", Planted::Gap)]).unwrap();
    let rep = analyze(&recs, &[TargetSpec::Iid, TargetSpec::Shift(3)], &StatsConfig::default(), Execution::Sequential)
        .unwrap();
    assert_eq!(rep.missing_targets, vec![TargetSpec::Shift(3)]);
    assert!(rep.sign_error.iter().all(|r| r.target == "gen_gap_iid"));
    assert_eq!(rep.cmi.len(), 1);
}

#[test]
fn two_targets_double_the_rows() {
    let grid = HyperGrid::new(vec![axis("learning_rate", 3), axis("weight_decay", 2), axis("seed", 6)]).unwrap();
    let ms = [("cross_entropy", Planted::Gap), ("magnitude", Planted::Noise), ("ece", Planted::Noise)];
    let recs = planted_records(&grid, 2, &[3], &ms).unwrap();
    let cfg = StatsConfig::default();
    let one = analyze(&recs, &[TargetSpec::Iid], &cfg, Execution::Sequential).unwrap();
    let two = analyze(&recs, &[TargetSpec::Iid, TargetSpec::Shift(3)], &cfg, Execution::Sequential).unwrap();
    assert_eq!(two.psi.len(), 2 * one.psi.len());
    assert_eq!(two.sign_error.len(), 2 * one.sign_error.len());
    assert_eq!(two.cmi.len(), 2 * one.cmi.len());
    // catalog order: magnitude, cross_entropy, ..., ece
    let order: Vec<&str> = one.cmi.iter().map(|r| r.measure.as_str()).collect();
    assert_eq!(order, ["magnitude", "cross_entropy", "ece"]);
}

#[test]
fn parallel_and_sequential_reports_agree() {
    let grid = HyperGrid::new(vec![axis("learning_rate", 4), axis("weight_decay", 3), axis("seed", 8)]).unwrap();
    let ms = [("cross_entropy", Planted::Gap), ("magnitude", Planted::Noise), ("spec_sum", Planted::Noise)];
    let recs = planted_records(&grid, 3, &[1, 2], &ms).unwrap();
    let t = [TargetSpec::Iid, TargetSpec::Shift(1), TargetSpec::Shift(2)];
    let cfg = StatsConfig::default();
    assert_eq!(
        analyze(&recs, &t, &cfg, Execution::Sequential).unwrap(),
        analyze(&recs, &t, &cfg, Execution::Parallel).unwrap()
    );
}

#[test]
fn no_done_runs_is_an_error() {
    let grid = HyperGrid::new(vec![axis("seed", 3)]).unwrap();
    let mut recs = planted_records(&grid, 1, &[], &[]).unwrap();
    recs.iter_mut().for_each(|r| r.status = genmeter_core::sandbox::RunStatus::Failed);
    let err = analyze(&recs, &[TargetSpec::Iid], &StatsConfig::default(), Execution::Sequential).unwrap_err();
    assert_eq!(err.kind(), "degenerate");
}
