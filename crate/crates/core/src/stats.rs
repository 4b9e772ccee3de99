//! Small numeric helpers shared by the preprocessing and analysis code.
//!
//! Conventions are fixed crate-wide: standard deviations use the population
//! denominator `n`, and quantiles interpolate linearly between order
//! statistics (`h = (n - 1) q`).

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population variance (denominator `n`).
pub fn variance(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
}

/// Population standard deviation (denominator `n`).
pub fn std_dev(values: &[f64]) -> f64 {
    variance(values).sqrt()
}

/// Linear-interpolation quantile of already sorted data.
///
/// Panics if `sorted` is empty.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let q = q.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Linear-interpolation quantile of unsorted data.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, q)
}

/// Round half away from zero, returned as a count.
pub fn round_count(x: f64) -> usize {
    x.round().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_sd_of_one_two_three() {
        let sd = std_dev(&[1.0, 2.0, 3.0]);
        assert!((sd - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn interpolated_quantiles() {
        let data: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((quantile_sorted(&data, 0.25) - 25.75).abs() < 1e-12);
        assert!((quantile_sorted(&data, 0.5) - 50.5).abs() < 1e-12);
        assert!((quantile_sorted(&data, 0.75) - 75.25).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[3.0], 0.9), 3.0);
    }
}
