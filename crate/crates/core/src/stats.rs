//! Small descriptive statistics shared by the clustering and simulation code.

/// Quantile by linear interpolation between order statistics.
///
/// For sorted values `v[0..n]` and level `prob`, the position `h = (n - 1) * prob`
/// is located and the result is `v[floor(h)] + (h - floor(h)) * (v[floor(h)+1] - v[floor(h)])`.
/// Returns `None` for an empty slice or a level outside `[0, 1]`.
pub fn quantile(values: &[f64], prob: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&prob) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(quantile_sorted(&sorted, prob))
}

/// Same as [`quantile`] but assumes `sorted` is already ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mu = mean(values);
    let ss: f64 = values.iter().map(|v| (v - mu).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}
