//! Davies–Bouldin index and cluster-count selection.

use super::kmeans::{kmeans, squared_distance, ClusteringResult};
use crate::error::{Error, Result};

/// Mean over clusters of the worst `(s_i + s_j) / d(c_i, c_j)`, where `s_i`
/// is the mean Euclidean distance of cluster `i`'s points to its center.
/// Empty clusters are ignored.
pub fn davies_bouldin(points: &[Vec<f64>], assignments: &[usize], centers: &[Vec<f64>]) -> Result<f64> {
    if points.len() != assignments.len() {
        return Err(Error::dim("one assignment per point required"));
    }
    let k = centers.len();
    let mut scatter = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        if a == 0 || a > k {
            return Err(Error::input(format!("assignment {a} outside 1..={k}")));
        }
        scatter[a - 1] += squared_distance(p, &centers[a - 1]).sqrt();
        counts[a - 1] += 1;
    }
    let populated: Vec<usize> = (0..k).filter(|&j| counts[j] > 0).collect();
    if populated.len() < 2 {
        return Err(Error::input("Davies–Bouldin index needs at least two non-empty clusters"));
    }
    for &j in &populated {
        scatter[j] /= counts[j] as f64;
    }
    let mut total = 0.0;
    for &i in &populated {
        let mut worst = 0.0f64;
        for &j in &populated {
            if i == j {
                continue;
            }
            let sep = squared_distance(&centers[i], &centers[j]).sqrt();
            if sep == 0.0 {
                return Err(Error::CoincidentCenters {
                    first: i + 1,
                    second: j + 1,
                });
            }
            worst = worst.max((scatter[i] + scatter[j]) / sep);
        }
        total += worst;
    }
    Ok(total / populated.len() as f64)
}

/// Clusters for every `k` in `k_range` and keeps the lowest Davies–Bouldin index.
/// Ties go to the smaller `k`.
pub fn select_k(
    points: &[Vec<f64>],
    k_range: impl IntoIterator<Item = usize>,
    seed: u64,
    restarts: usize,
) -> Result<(usize, ClusteringResult)> {
    let mut best: Option<(f64, ClusteringResult)> = None;
    for k in k_range {
        if k < 2 || k > points.len() {
            return Err(Error::input(format!(
                "cluster count {k} outside 2..={}",
                points.len()
            )));
        }
        let res = kmeans(points, k, seed, restarts)?;
        let Some(db) = res.db_index else { continue };
        if best.as_ref().is_none_or(|(b, _)| db < *b) {
            best = Some((db, res));
        }
    }
    best.map(|(_, r)| (r.k, r))
        .ok_or_else(|| Error::input("no cluster count produced a valid Davies–Bouldin index"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn singletons_have_zero_index() {
        let pts = vec![vec![0.0], vec![1.0]];
        let db = davies_bouldin(&pts, &[1, 2], &[vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(db, 0.0);
    }

    #[test]
    fn hand_computed_pairs() {
        let pts = vec![vec![-0.5], vec![0.5], vec![9.5], vec![10.5]];
        let db = davies_bouldin(&pts, &[1, 1, 2, 2], &[vec![0.0], vec![10.0]]).unwrap();
        assert!((db - 0.1).abs() < 1e-15);
    }

    #[test]
    fn coincident_centers_error() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            davies_bouldin(&pts, &[1, 2], &[vec![0.5], vec![0.5]]),
            Err(Error::CoincidentCenters { .. })
        ));
        assert!(davies_bouldin(&pts, &[1, 1], &[vec![0.5], vec![3.0]]).is_err());
    }

    pub(crate) fn blobs(seed: u64, per: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let centers = [[0.0, 0.0, 0.0, 0.0], [10.0, 0.0, 0.0, 5.0], [0.0, 10.0, -5.0, 0.0]];
        centers
            .iter()
            .flat_map(|c| {
                (0..per)
                    .map(|_| c.iter().map(|v| v + noise.sample(&mut rng)).collect::<Vec<f64>>())
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn three_blobs_select_three() {
        let pts = blobs(1, 40);
        let all: Vec<f64> = (2..=6)
            .map(|k| kmeans(&pts, k, 5, 10).unwrap().db_index.unwrap())
            .collect();
        let argmin = all.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0 + 2;
        let (k, res) = select_k(&pts, 2..=6, 5, 10).unwrap();
        assert_eq!(k, 3);
        assert_eq!(argmin, 3);
        assert_eq!(res.k, 3);
    }

    #[test]
    fn singleton_range_and_seed_stability() {
        let pts = blobs(2, 30);
        assert_eq!(select_k(&pts, [2], 1, 3).unwrap().0, 2);
        for seed in 0..10 {
            assert_eq!(select_k(&pts, 2..=6, seed, 10).unwrap().0, 3);
        }
        assert!(select_k(&pts, [1], 1, 3).is_err());
    }

    #[test]
    fn invariant_under_relabeling_and_isometry() {
        let pts = blobs(3, 20);
        let res = kmeans(&pts, 3, 1, 5).unwrap();
        let db = res.db_index.unwrap();
        // swap labels 1 <-> 3
        let relabeled: Vec<usize> = res.assignments.iter().map(|&a| 4 - a).collect();
        let centers: Vec<Vec<f64>> = res.centers.iter().rev().cloned().collect();
        assert!((davies_bouldin(&pts, &relabeled, &centers).unwrap() - db).abs() < 1e-12);
        // rotate the first two coordinates and translate
        let (s, c) = (0.7f64.sin(), 0.7f64.cos());
        let iso = |p: &Vec<f64>| vec![c * p[0] - s * p[1] + 3.0, s * p[0] + c * p[1] - 1.0, p[2], p[3] + 2.0];
        let moved: Vec<Vec<f64>> = pts.iter().map(iso).collect();
        let moved_centers: Vec<Vec<f64>> = res.centers.iter().map(iso).collect();
        let db2 = davies_bouldin(&moved, &res.assignments, &moved_centers).unwrap();
        assert!((db2 - db).abs() < 1e-9);
        assert!(db >= 0.0);
    }
}
