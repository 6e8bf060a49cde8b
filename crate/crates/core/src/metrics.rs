//! Classification quality metrics.

use crate::error::{Error, Result};
use crate::trees::predict_class;

/// Micro-averaged one-vs-rest AUC.
///
/// Every (sample, class) pair is a binary decision scored by that class's
/// confidence and labelled positive iff the class is the sample's label. The
/// result is the probability that a random positive outscores a random
/// negative, ties counting one half.
pub fn micro_auc(scores: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} score rows for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let mut pooled: Vec<(f64, bool)> = Vec::new();
    for (row, &label) in scores.iter().zip(labels) {
        if label >= row.len() {
            return Err(Error::Shape(format!("label {label} outside {} classes", row.len())));
        }
        pooled.extend(row.iter().enumerate().map(|(c, &s)| (s, c == label)));
    }
    if pooled.iter().any(|(s, _)| s.is_nan()) {
        return Err(Error::Shape("NaN score".into()));
    }
    let positives = pooled.iter().filter(|p| p.1).count();
    let negatives = pooled.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Walk tie groups in ascending order: each positive beats every negative
    // seen so far and ties half of its own group's negatives.
    let mut wins = 0.0f64;
    let mut negatives_below = 0usize;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let group_pos = pooled[i..j].iter().filter(|p| p.1).count();
        let group_neg = (j - i) - group_pos;
        wins += group_pos as f64 * (negatives_below as f64 + 0.5 * group_neg as f64);
        negatives_below += group_neg;
        i = j;
    }
    Ok(wins / (positives as f64 * negatives as f64))
}

/// Fraction of samples whose argmax class equals the label.
pub fn accuracy(scores: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Shape("accuracy needs one nonempty score row per label".into()));
    }
    let mut hits = 0usize;
    for (row, &label) in scores.iter().zip(labels) {
        if predict_class(row)? == label {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_inverted() {
        let labels = [0, 1, 2];
        let perfect: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| (0..3).map(|c| f64::from(u8::from(c == l))).collect())
            .collect();
        assert_eq!(micro_auc(&perfect, &labels).unwrap(), 1.0);
        let inverted: Vec<Vec<f64>> = perfect.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
        assert_eq!(micro_auc(&inverted, &labels).unwrap(), 0.0);
        assert_eq!(accuracy(&perfect, &labels).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_is_half() {
        assert_eq!(micro_auc(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn degenerate_pool() {
        assert!(matches!(micro_auc(&[vec![0.3]], &[0]), Err(Error::DegenerateLabels)));
        assert!(micro_auc(&[vec![0.3, 0.1]], &[2]).is_err());
    }
}
