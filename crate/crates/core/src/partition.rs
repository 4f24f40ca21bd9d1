//! Label-skew partitioning of a dataset across simulated clients.
//!
//! Each monopoly client owns one label: a fraction `s` of the samples that
//! are candidates for that label is pinned to it. Unpinned candidates are
//! dealt round-robin over all clients; samples without a monopoly label are
//! shuffled and dealt to the least-loaded client, which keeps shard sizes level.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use rand::seq::SliceRandom;

use crate::data::{split_common_labels, LabelStats, MultilabelDataset, DEFAULT_COMMON_THRESHOLD};
use crate::error::{Error, Result};
use crate::rng::{rng_for, tag};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewConfig {
    pub n_clients: usize,
    /// Percentage in `[0, 100]`; zero gives an IID deal.
    pub skew_pct: f64,
    /// Draw monopoly labels from the less-common labels instead of the common ones.
    pub small_skew: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan {
    /// Sample indices per client, ascending.
    pub assignment: Vec<Vec<usize>>,
    /// Client index to its monopoly label.
    pub monopoly: BTreeMap<usize, usize>,
    /// Number of samples pinned to each monopoly client.
    pub pinned: BTreeMap<usize, usize>,
    pub config: SkewConfig,
}

impl PartitionPlan {
    pub fn n_clients(&self) -> usize {
        self.assignment.len()
    }

    pub fn shard_sizes(&self) -> Vec<usize> {
        self.assignment.iter().map(Vec::len).collect()
    }
}

/// Number of candidate samples pinned at skew `s` percent.
pub fn pinned_count(skew_pct: f64, n_candidates: usize) -> usize {
    (skew_pct * n_candidates as f64 / 100.0).floor() as usize
}

pub fn make_partition(
    ds: &MultilabelDataset,
    stats: &LabelStats,
    cfg: &SkewConfig,
) -> Result<PartitionPlan> {
    let n = ds.len();
    let k = cfg.n_clients;
    if k == 0 {
        return Err(Error::invalid("partition needs at least one client"));
    }
    if k > n {
        return Err(Error::invalid(format!("{k} clients for {n} samples")));
    }
    if !(0.0..=100.0).contains(&cfg.skew_pct) {
        return Err(Error::invalid(format!("skew {} outside [0,100]", cfg.skew_pct)));
    }
    if stats.counts.len() != ds.n_labels() {
        return Err(Error::invalid("label stats do not match dataset vocabulary"));
    }

    let mut assignment = vec![Vec::new(); k];
    let mut monopoly = BTreeMap::new();
    let mut pinned = BTreeMap::new();
    // samples not tied to any monopoly label
    let mut free: Vec<usize> = (0..n).collect();

    if cfg.skew_pct > 0.0 {
        let (common, less_common) = split_common_labels(stats, n, DEFAULT_COMMON_THRESHOLD);
        let mut pool = if cfg.small_skew { less_common } else { common };
        if pool.is_empty() {
            return Err(Error::invalid(format!(
                "no {} labels available for skew",
                if cfg.small_skew { "less-common" } else { "common" }
            )));
        }
        pool.sort_by_key(|&l| (stats.counts[l], l));
        pool.truncate(k);

        // first matching monopoly label in ascending-frequency order wins
        let mut candidates = vec![Vec::new(); pool.len()];
        free.clear();
        for (i, s) in ds.samples().iter().enumerate() {
            match pool.iter().position(|&l| s.labels.get(l)) {
                Some(j) => candidates[j].push(i),
                None => free.push(i),
            }
        }
        for (client, (&label, mut cands)) in pool.iter().zip(candidates).enumerate() {
            // The permutation does not depend on s, so pinned sets are nested in s.
            cands.shuffle(&mut rng_for(cfg.seed, &[tag::PARTITION, 1, label as u64]));
            let take = pinned_count(cfg.skew_pct, cands.len());
            monopoly.insert(client, label);
            pinned.insert(client, take);
            assignment[client].extend_from_slice(&cands[..take]);
            // Unpinned candidates are dealt from a fixed starting client, so the
            // monopoly client's share of its own candidates is monotone in s.
            for (pos, &i) in cands[take..].iter().enumerate() {
                assignment[(client + 1 + pos) % k].push(i);
            }
        }
    }

    free.shuffle(&mut rng_for(cfg.seed, &[tag::PARTITION, 0]));
    // least-loaded client first, ties to the lowest index
    let mut loads: BinaryHeap<Reverse<(usize, usize)>> = assignment
        .iter()
        .enumerate()
        .map(|(c, a)| Reverse((a.len(), c)))
        .collect();
    for i in free {
        let Reverse((load, c)) = loads.pop().expect("k >= 1");
        assignment[c].push(i);
        loads.push(Reverse((load + 1, c)));
    }
    for (c, shard) in assignment.iter_mut().enumerate() {
        if shard.is_empty() {
            return Err(Error::invalid(format!(
                "skew {} leaves client {c} without samples",
                cfg.skew_pct
            )));
        }
        shard.sort_unstable();
    }
    Ok(PartitionPlan {
        assignment,
        monopoly,
        pinned,
        config: *cfg,
    })
}

/// `counts[k][l]`: samples on client `k` carrying label `l`.
pub fn skew_report(plan: &PartitionPlan, ds: &MultilabelDataset) -> Result<Vec<Vec<usize>>> {
    let l = ds.n_labels();
    plan.assignment
        .iter()
        .map(|shard| {
            let mut row = vec![0usize; l];
            for &i in shard {
                let s = ds
                    .samples()
                    .get(i)
                    .ok_or_else(|| Error::invalid(format!("sample index {i} out of range")))?;
                for lab in s.labels.iter_ones() {
                    row[lab] += 1;
                }
            }
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{label_stats, Image, ImageShape, LabelVector, Sample, UcmLike};

    fn dataset(labels: Vec<LabelVector>, names: usize) -> MultilabelDataset {
        let shape = ImageShape::new(1, 1, 3);
        let samples = labels
            .into_iter()
            .map(|labels| Sample {
                image: Image::zeros(shape),
                labels,
            })
            .collect();
        MultilabelDataset::new(samples, (0..names).map(|i| format!("l{i}")).collect(), shape).unwrap()
    }

    fn cfg(k: usize, s: f64, small: bool, seed: u64) -> SkewConfig {
        SkewConfig {
            n_clients: k,
            skew_pct: s,
            small_skew: small,
            seed,
        }
    }

    #[test]
    fn uniform_deal() {
        let ds = dataset((0..100).map(|i| LabelVector::from_indices(2, &[i % 2])).collect(), 2);
        let st = label_stats(&ds).unwrap();
        let plan = make_partition(&ds, &st, &cfg(4, 0.0, true, 1)).unwrap();
        assert_eq!(plan.shard_sizes(), vec![25; 4]);
        assert!(plan.monopoly.is_empty());
    }

    #[test]
    fn single_rare_label_monopoly() {
        // label 1 on 10 of 40 samples (25% > 10%), so it is "common"; label 2 is
        // on 2 samples and never chosen because the pool is the common set
        let labels = (0..40)
            .map(|i| {
                if i < 10 {
                    LabelVector::from_indices(2, &[1])
                } else {
                    LabelVector::from_indices(2, &[0])
                }
            })
            .collect();
        let ds = dataset(labels, 2);
        let st = label_stats(&ds).unwrap();
        let plan = make_partition(&ds, &st, &cfg(2, 80.0, false, 5)).unwrap();
        assert_eq!(plan.monopoly.get(&0), Some(&1));
        let report = skew_report(&plan, &ds).unwrap();
        assert!(report[0][1] >= 8, "{report:?}");
    }

    #[test]
    fn single_less_common_label_pool() {
        // label 1 present on 3 of 40 samples (< 10%) and is the only less-common label
        let labels = (0..40)
            .map(|i| LabelVector::from_indices(2, if i < 3 { &[0, 1] } else { &[0] }))
            .collect();
        let ds = dataset(labels, 2);
        let st = label_stats(&ds).unwrap();
        let plan = make_partition(&ds, &st, &cfg(2, 100.0, true, 5)).unwrap();
        assert_eq!(plan.monopoly.len(), 1);
        assert_eq!(skew_report(&plan, &ds).unwrap()[0][1], 3);
    }

    #[test]
    fn errors() {
        let ds = dataset((0..3).map(|_| LabelVector::from_indices(1, &[0])).collect(), 1);
        let st = label_stats(&ds).unwrap();
        assert!(make_partition(&ds, &st, &cfg(4, 0.0, true, 0)).is_err());
        // only label is common, so a small-skew pool is empty
        assert!(make_partition(&ds, &st, &cfg(2, 40.0, true, 0)).is_err());
        assert!(make_partition(&ds, &st, &cfg(2, 0.0, true, 0)).is_ok());
    }

    #[test]
    fn nine_rare_labels_ten_clients() {
        let gen = UcmLike {
            n_common: 7,
            n_rare: 9,
            ..UcmLike::default()
        };
        let ds = gen.generate(2000, ImageShape::new(4, 4, 3), 3).unwrap();
        let st = label_stats(&ds).unwrap();
        let plan = make_partition(&ds, &st, &cfg(10, 40.0, true, 8)).unwrap();
        assert_eq!(plan.monopoly.len(), 9);
        assert!(!plan.monopoly.contains_key(&9));
        let order: Vec<usize> = plan.monopoly.values().copied().collect();
        for (&client, &label) in &plan.monopoly {
            assert!(label >= 7);
            // candidates: samples whose first monopoly label (in client order) is this one
            let cands: Vec<usize> = (0..ds.len())
                .filter(|&i| {
                    let labels = &ds.samples()[i].labels;
                    order.iter().find(|&&l| labels.get(l)) == Some(&label)
                })
                .collect();
            let held = cands
                .iter()
                .filter(|i| plan.assignment[client].binary_search(i).is_ok())
                .count();
            assert!(
                held as f64 >= 0.4 * cands.len() as f64,
                "client {client}: {held} of {}",
                cands.len()
            );
        }
    }

    #[test]
    fn report_columns_sum_to_counts() {
        let ds = UcmLike::default().generate(500, ImageShape::new(4, 4, 3), 1).unwrap();
        let st = label_stats(&ds).unwrap();
        let plan = make_partition(&ds, &st, &cfg(8, 60.0, true, 2)).unwrap();
        let report = skew_report(&plan, &ds).unwrap();
        for l in 0..ds.n_labels() {
            assert_eq!(report.iter().map(|r| r[l]).sum::<usize>(), st.counts[l]);
        }
    }
}
