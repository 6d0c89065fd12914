use std::collections::{BTreeMap, HashSet};
use std::fs;

use genmeter_core::measures::select;
use genmeter_core::sandbox::RunRecord;
use genmeter_core::sweep::{
    compute_store_measures, expand_grid, load_measure_log, load_records, resume, run_sweep, synthetic_record,
    HyperGrid, Store, SweepConfig, SweepManifest,
};
use genmeter_core::Execution;

fn rec(i: usize) -> RunRecord {
    let a = vec![("seed".to_string(), i.to_string())];
    let mut r = synthetic_record(a, 0.01 * i as f64, &BTreeMap::from([(2, 0.3)])).unwrap();
    r.loss_curve = vec![1.0 / 3.0, 0.1 + 0.2, 1e-300, 5e-324];
    r
}

#[test]
fn round_trip_is_bit_exact_including_non_finite() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rec(0);
    r.loss_curve.extend([f64::NAN, f64::INFINITY, f64::NEG_INFINITY, -0.0]);
    r.test_acc_iid = f64::NAN;
    r.grad_trace.step_norms = vec![f64::INFINITY, 2.5];
    {
        let mut s = Store::open(dir.path()).unwrap();
        s.persist(&r).unwrap();
    }
    let back = load_records(dir.path()).unwrap();
    assert_eq!(back.len(), 1);
    let b = &back[0];
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&b.loss_curve), bits(&r.loss_curve));
    assert_eq!(bits(&b.grad_trace.step_norms), bits(&r.grad_trace.step_norms));
    assert!(b.test_acc_iid.is_nan());
    let mut b2 = b.clone();
    b2.test_acc_iid = 0.0;
    b2.loss_curve.clear();
    let mut r2 = r.clone();
    r2.test_acc_iid = 0.0;
    r2.loss_curve.clear();
    assert_eq!(b2, r2);
}

#[test]
fn duplicate_run_id_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Store::open(dir.path()).unwrap();
    s.persist(&rec(1)).unwrap();
    assert_eq!(s.persist(&rec(1)).unwrap_err().kind(), "duplicate_run_id");
    drop(s);
    let mut s = Store::open(dir.path()).unwrap();
    assert_eq!(s.persist(&rec(1)).unwrap_err().kind(), "duplicate_run_id");
}

#[test]
fn hundred_records_keep_count_and_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = Store::open(dir.path()).unwrap();
    let recs: Vec<RunRecord> = (0..100).map(rec).collect();
    for r in &recs {
        s.persist(r).unwrap();
    }
    let back = load_records(dir.path()).unwrap();
    assert_eq!(back.len(), 100);
    let ids: Vec<&str> = back.iter().map(|r| r.run_id.as_str()).collect();
    let want: Vec<&str> = recs.iter().map(|r| r.run_id.as_str()).collect();
    assert_eq!(ids, want);
}

#[test]
fn second_writer_is_locked_out() {
    let dir = tempfile::tempdir().unwrap();
    let s = Store::open(dir.path()).unwrap();
    assert_eq!(Store::open(dir.path()).unwrap_err().kind(), "store_locked");
    drop(s);
    Store::open(dir.path()).unwrap();
}

#[test]
fn truncated_tail_is_quarantined_and_resumed() {
    let dir = tempfile::tempdir().unwrap();
    {
        let mut s = Store::open(dir.path()).unwrap();
        for i in 0..5 {
            s.persist(&rec(i)).unwrap();
        }
    }
    let path = dir.path().join("runs.jsonl");
    let text = fs::read_to_string(&path).unwrap();
    let cut = text.len() - text.lines().last().unwrap().len() / 2 - 1;
    fs::write(&path, &text[..cut]).unwrap();

    // read-only load skips the torn line and leaves the file alone
    assert_eq!(load_records(dir.path()).unwrap().len(), 4);
    assert_eq!(fs::read_to_string(&path).unwrap().len(), cut);

    let grid = HyperGrid::new(vec![("seed".into(), (0..5).map(|i| i.to_string()).collect())]).unwrap();
    let mut s = Store::open(dir.path()).unwrap();
    assert!(dir.path().join("runs.jsonl.quarantine").exists());
    let have = s.records().unwrap();
    assert_eq!(have.len(), 4);
    let manifest = manifest_for(&grid);
    let pending = resume(&manifest, &have);
    assert_eq!(pending, vec![vec![("seed".to_string(), "4".to_string())]]);
    s.persist(&rec(4)).unwrap();
    assert_eq!(load_records(dir.path()).unwrap().len(), 5);
}

fn manifest_for(grid: &HyperGrid) -> SweepManifest {
    let runs = expand_grid(grid)
        .into_iter()
        .map(|a| genmeter_core::sweep::PlannedRun {
            run_id: genmeter_core::sweep::run_id(&a, 0),
            assignment: a,
            state: genmeter_core::sweep::RunState::Pending,
        })
        .collect();
    SweepManifest { grid: grid.clone(), seed_offset: 0, runs }
}

#[test]
fn resume_is_set_difference() {
    let grid = HyperGrid::new(vec![("seed".into(), (0..10).map(|i| i.to_string()).collect())]).unwrap();
    let m = manifest_for(&grid);
    let done: Vec<RunRecord> = [2, 5, 7].into_iter().map(rec).collect();
    let pending = resume(&m, &done);
    let want: HashSet<String> = (0..10).filter(|i| ![2, 5, 7].contains(i)).map(|i| i.to_string()).collect();
    let got: HashSet<String> = pending.iter().map(|a| a[0].1.clone()).collect();
    assert_eq!(got, want);
    assert_eq!(resume(&m, &[]).len(), 10);
    let all: Vec<RunRecord> = (0..10).map(rec).collect();
    assert!(resume(&m, &all).is_empty());
    assert_eq!(resume(&m, &done), pending);
}

const TOY: &str = r#"
[dataset]
kind = "blobs"
n_per_split = 40
classes = 2
shift = "translate"

[train]
epochs = 3
batch_size = 16

[grid.axes]
learning_rate = ["0.1", "0.01"]
weight_decay = ["0", "0.001"]
seed = [0, 1]
"#;

#[test]
fn sweep_resume_and_measure_idempotence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SweepConfig::from_toml_str(TOY).unwrap();
    let mut s = Store::open(dir.path()).unwrap();
    let first = run_sweep(&cfg, &mut s, 0, Execution::Parallel).unwrap();
    assert_eq!((first.planned, first.trained, first.done), (8, 8, 8));
    let again = run_sweep(&cfg, &mut s, 0, Execution::Parallel).unwrap();
    assert_eq!((again.already_stored, again.trained), (8, 0));

    let ds = cfg.build_dataset().unwrap();
    let names = select("calibration").unwrap();
    let m = compute_store_measures(&mut s, &ds, &cfg.measures, &names, false, Execution::Parallel).unwrap();
    assert_eq!(m.computed, 8 * 5);
    let log1 = load_measure_log(dir.path()).unwrap();
    let m = compute_store_measures(&mut s, &ds, &cfg.measures, &names, false, Execution::Parallel).unwrap();
    assert_eq!((m.computed, m.skipped), (0, 40));
    assert_eq!(load_measure_log(dir.path()).unwrap(), log1);
    for r in s.records().unwrap() {
        let got: Vec<&str> = r.measure_values.keys().map(String::as_str).collect();
        let mut want = names.clone();
        want.sort();
        assert_eq!(got, want);
    }
    let m = compute_store_measures(&mut s, &ds, &cfg.measures, &names[..1], true, Execution::Sequential).unwrap();
    assert_eq!(m.computed, 8);
    let log2 = load_measure_log(dir.path()).unwrap();
    assert_eq!(log2.len(), 48);
    // merged view unchanged after recompute
    for b in &log2[40..] {
        let a = log1.iter().find(|a| a.run_id == b.run_id && a.value.name == b.value.name).unwrap();
        assert_eq!(a.value.value.to_bits(), b.value.value.to_bits());
        assert!(b.computed_at >= a.computed_at);
    }
}

#[test]
fn seed_offset_changes_ids_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SweepConfig::from_toml_str(TOY).unwrap();
    let mut s = Store::open(dir.path()).unwrap();
    run_sweep(&cfg, &mut s, 0, Execution::Sequential).unwrap();
    let second = run_sweep(&cfg, &mut s, 100, Execution::Sequential).unwrap();
    assert_eq!(second.trained, 8);
    let recs = s.records().unwrap();
    assert_eq!(recs.len(), 16);
    assert!(recs[8..].iter().all(|r| r.train.seed >= 100));
}

#[test]
fn sequential_and_parallel_sweeps_store_identical_records() {
    let cfg = SweepConfig::from_toml_str(TOY).unwrap();
    let run = |exec| {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Store::open(dir.path()).unwrap();
        run_sweep(&cfg, &mut s, 0, exec).unwrap();
        let mut r = s.records().unwrap();
        r.iter_mut().for_each(|r| r.wall_time_s = 0.0);
        r.sort_by(|a, b| a.run_id.cmp(&b.run_id));
        r
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}

#[test]
fn config_mismatch_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SweepConfig::from_toml_str(TOY).unwrap();
    let mut s = Store::open(dir.path()).unwrap();
    run_sweep(&cfg, &mut s, 0, Execution::Sequential).unwrap();
    let other = SweepConfig::from_toml_str(&TOY.replace("epochs = 3", "epochs = 4")).unwrap();
    assert_eq!(run_sweep(&other, &mut s, 0, Execution::Sequential).unwrap_err().kind(), "config");
}
