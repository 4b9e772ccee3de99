use super::Cutoff;
use crate::stats;

/// Threshold at or above which a score is predicted positive. Quantile
/// cutoffs are computed on the scores being thresholded.
pub fn cutoff_threshold(scores: &[f64], option: Cutoff) -> f64 {
    match option.quantile() {
        None => 0.5,
        Some(q) if scores.is_empty() => q,
        Some(q) => stats::quantile(scores, q),
    }
}

pub fn predict_with_threshold(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s >= threshold)).collect()
}

pub fn apply_cutoff(scores: &[f64], option: Cutoff) -> Vec<u8> {
    predict_with_threshold(scores, cutoff_threshold(scores, option))
}
