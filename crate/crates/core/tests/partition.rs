use proptest::prelude::*;

use fedsim_core::data::{label_stats, ImageShape, MultilabelDataset, UcmLike};
use fedsim_core::partition::{make_partition, skew_report, SkewConfig};

fn dataset() -> MultilabelDataset {
    UcmLike::default().generate(300, ImageShape::new(2, 2, 3), 5).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plans_cover_the_dataset_once(k in 1usize..20, s in 0.0f64..=100.0, small in any::<bool>(), seed in any::<u64>()) {
        let ds = dataset();
        let stats = label_stats(&ds).unwrap();
        let cfg = SkewConfig { n_clients: k, skew_pct: s, small_skew: small, seed };
        let plan = make_partition(&ds, &stats, &cfg).unwrap();
        prop_assert_eq!(plan.n_clients(), k);
        let mut all = plan.assignment.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        for shard in &plan.assignment {
            prop_assert!(shard.windows(2).all(|w| w[0] < w[1]));
        }
        prop_assert_eq!(&plan, &make_partition(&ds, &stats, &cfg).unwrap());
    }
}

#[test]
fn zero_skew_ignores_pool_choice() {
    let ds = dataset();
    let stats = label_stats(&ds).unwrap();
    let a = make_partition(&ds, &stats, &SkewConfig { n_clients: 7, skew_pct: 0.0, small_skew: true, seed: 1 }).unwrap();
    let b = make_partition(&ds, &stats, &SkewConfig { n_clients: 7, skew_pct: 0.0, small_skew: false, seed: 1 }).unwrap();
    assert_eq!(a.assignment, b.assignment);
    assert!(a.monopoly.is_empty());
}

#[test]
fn full_skew_concentrates_the_label() {
    let ds = dataset();
    let stats = label_stats(&ds).unwrap();
    let plan = make_partition(&ds, &stats, &SkewConfig { n_clients: 4, skew_pct: 100.0, small_skew: true, seed: 2 }).unwrap();
    let report = skew_report(&plan, &ds).unwrap();
    for (&client, &label) in &plan.monopoly {
        let here = report[client][label];
        let elsewhere = report.iter().map(|row| row[label]).max().unwrap();
        assert_eq!(here, elsewhere, "client {client} label {label}");
    }
}

#[test]
fn report_columns_sum_to_label_counts() {
    let ds = dataset();
    let stats = label_stats(&ds).unwrap();
    let plan = make_partition(&ds, &stats, &SkewConfig { n_clients: 5, skew_pct: 60.0, small_skew: false, seed: 4 }).unwrap();
    let report = skew_report(&plan, &ds).unwrap();
    for (l, &count) in stats.counts.iter().enumerate() {
        assert_eq!(report.iter().map(|row| row[l]).sum::<usize>(), count);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let ds = dataset();
    let stats = label_stats(&ds).unwrap();
    let base = SkewConfig { n_clients: 4, skew_pct: 10.0, small_skew: true, seed: 0 };
    for cfg in [
        SkewConfig { n_clients: 0, ..base },
        SkewConfig { n_clients: 301, ..base },
        SkewConfig { skew_pct: -1.0, ..base },
        SkewConfig { skew_pct: 100.5, ..base },
    ] {
        assert!(make_partition(&ds, &stats, &cfg).is_err(), "{cfg:?}");
    }
}
