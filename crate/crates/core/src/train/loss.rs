use crate::error::{Error, Result};

/// Mean label-smoothed cross-entropy of `logits` (`m×c`, row-major) against
/// `labels`, with targets `(1 - eps) * onehot + eps / c`.
pub fn smoothed_cross_entropy(logits: &[f64], c: usize, labels: &[usize], eps: f64) -> Result<f64> {
    if c == 0 || logits.len() != labels.len() * c {
        return Err(Error::shape(
            "cross_entropy",
            format!(
                "{} logits for {} labels and {c} classes",
                logits.len(),
                labels.len()
            ),
        ));
    }
    if labels.is_empty() {
        return Err(Error::InvalidInput(
            "cross-entropy over an empty batch".into(),
        ));
    }
    let mut total = 0.0;
    for (row, &label) in logits.chunks(c).zip(labels) {
        if label >= c {
            return Err(Error::InvalidInput(format!("label {label} outside 0..{c}")));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (j, v) in row.iter().enumerate() {
            let target = eps / c as f64 + if j == label { 1.0 - eps } else { 0.0 };
            total -= target * (v - lse);
        }
    }
    Ok(total / labels.len() as f64)
}
