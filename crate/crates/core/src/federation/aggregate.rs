use crate::error::{Error, Result};
use crate::learners::ModelWeights;

/// Weighted model average `Σ (n_k / n)·w_k` over the given updates, with
/// `n = Σ n_k`. Terms are summed in the order given; equal sample counts
/// reduce to a plain sum divided by the number of updates.
pub fn fedavg_aggregate(updates: &[(usize, &ModelWeights)]) -> Result<ModelWeights> {
    let (_, first) = updates
        .first()
        .ok_or_else(|| Error::invalid("no updates to aggregate"))?;
    if let Some((_, w)) = updates.iter().find(|(_, w)| w.layout() != first.layout()) {
        return Err(Error::ShapeMismatch(format!(
            "update with {} values among updates of {}",
            w.len(),
            first.len()
        )));
    }
    if updates.iter().any(|&(n, _)| n == 0) {
        return Err(Error::invalid("update with zero samples"));
    }
    let mut iter = updates.iter();
    if updates.iter().all(|&(n, _)| n == updates[0].0) {
        let mut acc = first.values().to_vec();
        for (_, w) in &updates[1..] {
            for (a, v) in acc.iter_mut().zip(w.values()) {
                *a += v;
            }
        }
        let m = updates.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        return first.with_values(acc);
    }
    let total: usize = updates.iter().map(|(n, _)| n).sum();
    let total = total as f64;
    let (n0, w0) = iter.next().expect("nonempty");
    let s0 = *n0 as f64 / total;
    let mut acc: Vec<f64> = w0.values().iter().map(|v| s0 * v).collect();
    for (n, w) in iter {
        let s = *n as f64 / total;
        for (a, v) in acc.iter_mut().zip(w.values()) {
            *a += s * v;
        }
    }
    first.with_values(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::ParamBlock;

    fn w(v: &[f64]) -> ModelWeights {
        ModelWeights::new(v.to_vec(), vec![ParamBlock::new("w", vec![v.len()])]).unwrap()
    }

    #[test]
    fn arithmetic_examples() {
        let out = fedavg_aggregate(&[(5, &w(&[1.0, 1.0])), (5, &w(&[3.0, 3.0]))]).unwrap();
        assert_eq!(out.values(), &[2.0, 2.0]);
        let out = fedavg_aggregate(&[(1, &w(&[1.0, 1.0])), (3, &w(&[2.0, 2.0]))]).unwrap();
        assert_eq!(out.values(), &[1.75, 1.75]);
    }

    #[test]
    fn single_update_is_identity() {
        let a = w(&[-0.0, 1.3, -7.25]);
        let out = fedavg_aggregate(&[(17, &a)]).unwrap();
        let bits = |m: &ModelWeights| m.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&out), bits(&a));
    }

    #[test]
    fn errors() {
        assert!(fedavg_aggregate(&[]).is_err());
        assert!(fedavg_aggregate(&[(1, &w(&[1.0])), (1, &w(&[1.0, 2.0]))]).is_err());
        assert!(fedavg_aggregate(&[(0, &w(&[1.0]))]).is_err());
    }
}
