//! Probability-simplex helpers.

/// Absolute tolerance for treating a vector as a probability distribution.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// `true` when every entry lies in `[0, 1]` and the entries sum to one, both within `tol`.
pub fn is_simplex(v: &[f64], tol: f64) -> bool {
    !v.is_empty()
        && v.iter().all(|&x| x.is_finite() && x >= -tol && x <= 1.0 + tol)
        && (v.iter().sum::<f64>() - 1.0).abs() <= tol
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

pub fn uniform(m: usize) -> Vec<f64> {
    vec![1.0 / m as f64; m]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn projection_of_simplex_point_is_identity() {
        let v = [0.2, 0.3, 0.5];
        let p = project(&v);
        for (a, b) in v.iter().zip(&p) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_clips_negative_mass() {
        assert_eq!(project(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project(&[0.5, 0.5, -3.0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && p[2] == 0.0);
    }

    proptest! {
        #[test]
        fn projection_lands_on_simplex(v in prop::collection::vec(-5.0f64..5.0, 1..8)) {
            let p = project(&v);
            prop_assert!(is_simplex(&p, 1e-12));
        }
    }
}
