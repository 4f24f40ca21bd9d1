//! Label frequency and co-occurrence statistics.

use super::MultilabelDataset;
use crate::error::{Error, Result};

/// Labels present in more than this fraction of samples count as common.
pub const DEFAULT_COMMON_THRESHOLD: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct LabelStats {
    /// Number of samples carrying each label.
    pub counts: Vec<usize>,
    /// Cosine similarity between the binary label columns.
    pub cosine: Vec<Vec<f64>>,
}

pub fn label_stats(ds: &MultilabelDataset) -> Result<LabelStats> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let l = ds.n_labels();
    let mut counts = vec![0usize; l];
    let mut co = vec![vec![0usize; l]; l];
    for s in ds.samples() {
        let on: Vec<usize> = s.labels.iter_ones().collect();
        for &i in &on {
            counts[i] += 1;
            for &j in &on {
                co[i][j] += 1;
            }
        }
    }
    let cosine = (0..l)
        .map(|i| {
            (0..l)
                .map(|j| {
                    if counts[i] == 0 || counts[j] == 0 {
                        0.0
                    } else {
                        co[i][j] as f64 / ((counts[i] * counts[j]) as f64).sqrt()
                    }
                })
                .collect()
        })
        .collect();
    Ok(LabelStats { counts, cosine })
}

/// Splits count-positive labels into those above `threshold * n_samples`
/// occurrences and the rest.
pub fn split_common_labels(
    stats: &LabelStats,
    n_samples: usize,
    threshold: f64,
) -> (Vec<usize>, Vec<usize>) {
    let cut = threshold * n_samples as f64;
    let mut common = Vec::new();
    let mut less_common = Vec::new();
    for (l, &c) in stats.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        if c as f64 > cut {
            common.push(l);
        } else {
            less_common.push(l);
        }
    }
    (common, less_common)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Image, ImageShape, LabelVector, Sample};

    fn ds_from_columns(cols: &[&[u8]]) -> MultilabelDataset {
        let n = cols[0].len();
        let shape = ImageShape::new(1, 1, 3);
        let samples = (0..n)
            .map(|i| Sample {
                image: Image::zeros(shape),
                labels: LabelVector::from_bits(cols.iter().map(|c| c[i] == 1).collect()),
            })
            .collect();
        let names = (0..cols.len()).map(|l| format!("l{l}")).collect();
        MultilabelDataset::new(samples, names, shape).unwrap()
    }

    #[test]
    fn cosine_hand_values() {
        let ds = ds_from_columns(&[&[1, 1, 0], &[1, 0, 1], &[0, 0, 1], &[1, 1, 0], &[0, 0, 0]]);
        let st = label_stats(&ds).unwrap();
        assert_eq!(st.counts, vec![2, 2, 1, 2, 0]);
        // a·b = 1, |a| = |b| = √2
        assert!((st.cosine[0][1] - 0.5).abs() < 1e-15);
        // never co-occur
        assert_eq!(st.cosine[0][2], 0.0);
        // identical columns
        assert_eq!(st.cosine[0][3], 1.0);
        assert_eq!(st.cosine[1][1], 1.0);
        // zero-count label: zero row including diagonal
        assert!(st.cosine[4].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_dataset_is_error() {
        let ds = MultilabelDataset::new(vec![], vec!["a".into()], ImageShape::new(1, 1, 3)).unwrap();
        assert!(matches!(label_stats(&ds), Err(Error::EmptyDataset)));
    }

    #[test]
    fn common_split() {
        let st = LabelStats {
            counts: vec![900, 50, 0],
            cosine: vec![],
        };
        assert_eq!(split_common_labels(&st, 2000, 0.10), (vec![0], vec![1]));
        let st = LabelStats {
            counts: vec![10, 20, 30],
            cosine: vec![],
        };
        assert_eq!(split_common_labels(&st, 2000, 0.10), (vec![], vec![0, 1, 2]));
    }
}
