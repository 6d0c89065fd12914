use std::collections::HashSet;

use genmeter_core::sweep::{expand_grid, run_id, HyperGrid};
use proptest::prelude::*;

fn grid_strategy() -> impl Strategy<Value = Vec<(String, Vec<String>)>> {
    prop::collection::btree_map("[a-z]{1,6}", prop::collection::btree_set("[0-9a-z.]{1,4}", 1..5), 1..5)
        .prop_map(|m| m.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn cardinality_is_product_of_axis_sizes(axes in grid_strategy()) {
        let want: usize = axes.iter().map(|(_, v)| v.len()).product();
        let g = HyperGrid::new(axes).unwrap();
        let all = expand_grid(&g);
        prop_assert_eq!(all.len(), want);
        let ids: HashSet<String> = all.iter().map(|a| run_id(a, 0)).collect();
        prop_assert_eq!(ids.len(), want);
    }

    #[test]
    fn axis_order_does_not_change_expansion(mut axes in grid_strategy()) {
        let a = expand_grid(&HyperGrid::new(axes.clone()).unwrap());
        axes.reverse();
        let b = expand_grid(&HyperGrid::new(axes).unwrap());
        prop_assert_eq!(a, b);
    }
}

#[test]
fn run_id_is_stable() {
    // pinned: sha256("learning_rate=0.1\nseed=3\n")[..16]
    let a = vec![("seed".to_string(), "3".to_string()), ("learning_rate".to_string(), "0.1".to_string())];
    assert_eq!(run_id(&a, 0), "522bcb2478ab4937");
}

#[test]
fn five_axis_grid_has_48_points() {
    let ax = |n: &str, v: &[&str]| (n.to_string(), v.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    let g = HyperGrid::new(vec![
        ax("learning_rate", &["1e-5", "3e-5", "1e-4", "3e-4"]),
        ax("batch_size", &["32"]),
        ax("weight_decay", &["0", "1e-4", "1e-2"]),
        ax("seed", &["0"]),
        ax("test_env", &["0", "1", "2", "3"]),
    ])
    .unwrap();
    assert_eq!(expand_grid(&g).len(), 4 * 3 * 4);
}
