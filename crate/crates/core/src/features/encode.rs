//! Deterministic text and prediction encoders.

use super::llm::LlmRecord;

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Seeded 64-bit token hash: FNV-1a followed by a splitmix64 finalizer.
pub fn token_hash(token: &str, seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Signed feature hashing of unigrams into `dim` buckets, L2-normalized.
/// Text without tokens maps to the zero vector.
pub fn encode_text(text: &str, dim: usize, seed: u64) -> Vec<f64> {
    assert!(dim >= 1, "embedding dimension must be positive");
    let mut v = vec![0.0; dim];
    for tok in tokenize(text) {
        let h = token_hash(&tok, seed);
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[(h % dim as u64) as usize] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

/// Rank-weighted class distribution: the r-th prediction (1-based, r ≤ K)
/// gets weight 1/r, then the vector is normalized to sum to one.
pub fn encode_predictions(record: &LlmRecord, num_classes: usize, top_k: usize) -> Vec<f64> {
    assert!(top_k >= 1, "top_k must be positive");
    let mut v = vec![0.0; num_classes];
    for (rank, &c) in record.predictions.iter().take(top_k).enumerate() {
        v[c] += 1.0 / (rank + 1) as f64;
    }
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    }
    v
}
