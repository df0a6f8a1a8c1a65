//! Lloyd's k-means with distance-weighted seeding and independent restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::standardize::DimensionScale;
use super::validity::davies_bouldin;
use crate::error::{Error, Result};

pub const DEFAULT_RESTARTS: usize = 10;
const MAX_LLOYD_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub k: usize,
    pub centers: Vec<Vec<f64>>,
    /// One-based cluster id per point.
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// `None` when fewer than two clusters are populated.
    pub db_index: Option<f64>,
    /// Filled in when the points were standardized before clustering.
    pub standardization: Option<Vec<DimensionScale>>,
    /// Inertia after each assignment step of the winning restart, then the final value.
    pub inertia_trace: Vec<f64>,
}

impl ClusteringResult {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a - 1] += 1;
        }
        sizes
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn seed_centers(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centers = vec![points[rng.random_range(0..n)].clone()];
    let mut dist: Vec<f64> = points.iter().map(|p| squared_distance(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let idx = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in dist.iter().enumerate() {
                acc += d;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[idx].clone());
        for (d, p) in dist.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &centers[centers.len() - 1]));
        }
    }
    centers
}

struct Run {
    centers: Vec<Vec<f64>>,
    labels: Vec<usize>,
    inertia: f64,
    trace: Vec<f64>,
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> Run {
    let k = centers.len();
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    let mut trace = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut changed = false;
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(p, &centers);
            if labels[i] != j {
                labels[i] = j;
                changed = true;
            }
            inertia += d;
        }
        trace.push(inertia);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &j) in points.iter().zip(&labels) {
            counts[j] += 1;
            for (s, v) in sums[j].iter_mut().zip(p) {
                *s += v;
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                // re-seed at the point farthest from its own center
                let (far, _) = points
                    .iter()
                    .zip(&labels)
                    .enumerate()
                    .map(|(i, (p, &l))| (i, squared_distance(p, &centers[l])))
                    .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                log::debug!("k-means cluster {} emptied; re-seeded at point {far}", j + 1);
                centers[j] = points[far].clone();
                labels[far] = j;
                counts[j] = 1;
            }
        }
    }
    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &j)| squared_distance(p, &centers[j]))
        .sum();
    trace.push(inertia);
    Run {
        centers,
        labels,
        inertia,
        trace,
    }
}

/// Best-of-`restarts` Lloyd clustering; deterministic in `(seed, restarts)`.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Result<ClusteringResult> {
    if k == 0 || k > points.len() {
        return Err(Error::input(format!(
            "cannot form {k} clusters from {} points",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::dim("points have differing dimensions"));
    }
    let runs: Vec<Run> = (0..restarts.max(1))
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(restart as u64);
            lloyd(points, seed_centers(points, k, &mut rng))
        })
        .collect();
    let best = runs
        .into_iter()
        .reduce(|best, run| if run.inertia < best.inertia { run } else { best })
        .expect("at least one restart");
    let assignments: Vec<usize> = best.labels.iter().map(|l| l + 1).collect();
    let db_index = davies_bouldin(points, &assignments, &best.centers).ok();
    Ok(ClusteringResult {
        k,
        centers: best.centers,
        assignments,
        inertia: best.inertia,
        db_index,
        standardization: None,
        inertia_trace: best.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_d(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn two_clusters_on_a_line() {
        let pts = one_d(&[0.0, 1.0, 9.0, 10.0]);
        // exhaustive oracle over all 2-partitions
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..(1 << 4) - 1 {
            let groups: Vec<Vec<f64>> = (0..2)
                .map(|g| (0..4).filter(|i| ((mask >> i) & 1) as usize == g).map(|i| pts[i][0]).collect())
                .collect();
            let cost: f64 = groups
                .iter()
                .map(|g| {
                    let m = g.iter().sum::<f64>() / g.len() as f64;
                    g.iter().map(|x| (x - m).powi(2)).sum::<f64>()
                })
                .sum();
            if cost < best.0 {
                let mut centers: Vec<f64> =
                    groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
                centers.sort_by(f64::total_cmp);
                best = (cost, centers);
            }
        }
        let res = kmeans(&pts, 2, 1, DEFAULT_RESTARTS).unwrap();
        let mut centers: Vec<f64> = res.centers.iter().map(|c| c[0]).collect();
        centers.sort_by(f64::total_cmp);
        assert_eq!(centers, best.1);
        assert_eq!(centers, vec![0.5, 9.5]);
        assert!((res.inertia - best.0).abs() < 1e-12);
    }

    #[test]
    fn k_equals_n_has_zero_inertia() {
        let pts = one_d(&[3.0, -1.0, 7.5, 2.0]);
        let res = kmeans(&pts, 4, 5, 3).unwrap();
        assert_eq!(res.inertia, 0.0);
        let mut sizes = res.cluster_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![1, 1, 1, 1]);
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        assert!(kmeans(&one_d(&[1.0, 2.0]), 3, 0, 1).is_err());
    }

    #[test]
    fn duplicated_points_give_identical_centers() {
        let base: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i % 7) as f64 * 1.3, (i * i % 11) as f64 * 0.7])
            .collect();
        let doubled: Vec<Vec<f64>> = base.iter().flat_map(|p| [p.clone(), p.clone()]).collect();
        let a = kmeans(&base, 3, 42, 5).unwrap();
        let b = kmeans(&doubled, 3, 42, 5).unwrap();
        for (ca, cb) in a.centers.iter().zip(&b.centers) {
            for (x, y) in ca.iter().zip(cb) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()]).collect();
        assert_eq!(kmeans(&pts, 4, 9, 4).unwrap(), kmeans(&pts, 4, 9, 4).unwrap());
    }

    proptest! {
        #[test]
        fn inertia_monotone_and_assignments_nearest(
            pts in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2), 5..60),
            k in 1usize..5,
            seed in 0u64..1000,
        ) {
            let res = kmeans(&pts, k, seed, 2).unwrap();
            for w in res.inertia_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9 * w[0].max(1.0));
            }
            for (p, &a) in pts.iter().zip(&res.assignments) {
                prop_assert!((1..=k).contains(&a));
                let own = squared_distance(p, &res.centers[a - 1]).sqrt();
                for c in &res.centers {
                    prop_assert!(own <= squared_distance(p, c).sqrt() + 1e-12);
                }
            }
        }
    }
}
