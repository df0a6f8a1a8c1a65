use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-dimension location and scale removed by [`standardize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionScale {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub points: Vec<Vec<f64>>,
    pub scales: Vec<DimensionScale>,
}

/// Z-scores every column using the sample (n - 1) standard deviation.
pub fn standardize(points: &[Vec<f64>]) -> Result<Standardized> {
    if points.len() < 2 {
        return Err(Error::input(format!(
            "standardization needs at least 2 points, got {}",
            points.len()
        )));
    }
    let dim = points[0].len();
    if let Some(k) = points.iter().position(|p| p.len() != dim) {
        return Err(Error::dim(format!("point {k} has {} coordinates, expected {dim}", points[k].len())));
    }
    let n = points.len() as f64;
    let mut scales = Vec::with_capacity(dim);
    for d in 0..dim {
        let mean = points.iter().map(|p| p[d]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        if !(sd > 1e-12 * mean.abs().max(1.0)) {
            return Err(Error::Standardization { dimension: d + 1 });
        }
        scales.push(DimensionScale { mean, sd });
    }
    let points = points
        .iter()
        .map(|p| p.iter().zip(&scales).map(|(v, s)| (v - s.mean) / s.sd).collect())
        .collect();
    Ok(Standardized { points, scales })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_points_map_to_plus_minus_half_root_two() {
        let s = standardize(&[vec![0.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let h = 0.5f64.sqrt();
        assert!((s.points[0][0] + h).abs() < 1e-12);
        assert!((s.points[1][0] - h).abs() < 1e-12);
    }

    #[test]
    fn constant_column_is_an_error() {
        let err = standardize(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]).unwrap_err();
        assert!(matches!(err, Error::Standardization { dimension: 2 }));
        assert!(standardize(&[vec![1.0]]).is_err());
    }

    proptest! {
        #[test]
        fn output_is_standard_and_idempotent(
            pts in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 4), 3..40)
        ) {
            let Ok(s) = standardize(&pts) else { return Ok(()) };
            let n = s.points.len() as f64;
            for d in 0..4 {
                let mean = s.points.iter().map(|p| p[d]).sum::<f64>() / n;
                let sd = (s.points.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((sd - 1.0).abs() < 1e-9);
            }
            let again = standardize(&s.points).unwrap();
            for (a, b) in again.points.iter().flatten().zip(s.points.iter().flatten()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
