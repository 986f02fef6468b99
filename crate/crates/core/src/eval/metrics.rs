use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    c: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.c
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.c + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.c).map(|i| self.get(i, i)).sum()
    }
}

pub fn confusion(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions but {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::InvalidInput(
            "metrics over zero samples are undefined".into(),
        ));
    }
    let mut counts = vec![0; num_classes * num_classes];
    for (i, (&p, &l)) in preds.iter().zip(labels).enumerate() {
        if p >= num_classes || l >= num_classes {
            return Err(Error::InvalidInput(format!(
                "sample {i}: class index (pred {p}, label {l}) outside 0..{num_classes}"
            )));
        }
        counts[l * num_classes + p] += 1;
    }
    Ok(ConfusionMatrix {
        c: num_classes,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64, what: &str, class: usize) -> f64 {
    if den == 0 {
        log::debug!("{what} of class {class} has a zero denominator; counted as 0");
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and macro-averaged metrics. Undefined precision or recall
/// counts as 0 and every class takes part in the macro mean.
pub fn metrics(cm: &ConfusionMatrix) -> MetricsReport {
    let c = cm.c;
    let mut per_class = Vec::with_capacity(c);
    let mut zero_den = 0;
    for k in 0..c {
        let tp = cm.get(k, k);
        let predicted: u64 = (0..c).map(|t| cm.get(t, k)).sum();
        let support: u64 = (0..c).map(|p| cm.get(k, p)).sum();
        zero_den += usize::from(predicted == 0) + usize::from(support == 0);
        let precision = ratio(tp, predicted, "precision", k);
        let recall = ratio(tp, support, "recall", k);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
            support,
        });
    }
    if zero_den > 0 {
        log::info!(
            "{zero_den} per-class precision/recall values had zero denominators and count as 0"
        );
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / c as f64;
    MetricsReport {
        accuracy: cm.trace() as f64 / cm.total() as f64,
        macro_precision: mean(|m| m.precision),
        macro_recall: mean(|m| m.recall),
        macro_f1: mean(|m| m.f1),
        per_class,
    }
}

pub fn evaluate(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<MetricsReport> {
    Ok(metrics(&confusion(preds, labels, num_classes)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_is_diagonal() {
        let cm = confusion(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(cm.get(1, 1), 2);
        assert_eq!(cm.trace(), cm.total());
        let m = metrics(&cm);
        assert_eq!(
            (m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn empty_rejected() {
        assert!(confusion(&[], &[], 2).is_err());
        assert!(confusion(&[2], &[0], 2).is_err());
    }

    #[test]
    fn one_class_predicted() {
        let m = metrics(&confusion(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap());
        assert_eq!(m.macro_precision, 0.25);
        assert_eq!(m.per_class[1].f1, 0.0);
    }
}
