use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-segment visit totals of the monitored customers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentFrequencies {
    /// Mean visits per customer, per segment.
    pub f: Vec<f64>,
    /// Unique customers per segment.
    pub customers: Vec<u64>,
    pub visits: Vec<u64>,
}

/// Mean visit frequency per segment from one-based customer assignments.
pub fn segment_frequencies(assignments: &[usize], visit_counts: &[u64], m: usize) -> Result<SegmentFrequencies> {
    if assignments.len() != visit_counts.len() {
        return Err(Error::dim("one visit count per customer required"));
    }
    let mut customers = vec![0u64; m];
    let mut visits = vec![0u64; m];
    for (&a, &v) in assignments.iter().zip(visit_counts) {
        if a == 0 || a > m {
            return Err(Error::input(format!("segment {a} outside 1..={m}")));
        }
        if v == 0 {
            return Err(Error::input("customers must have at least one visit"));
        }
        customers[a - 1] += 1;
        visits[a - 1] += v;
    }
    if let Some(j) = customers.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateSegment { segment: j + 1 });
    }
    let f = visits.iter().zip(&customers).map(|(&v, &c)| v as f64 / c as f64).collect();
    Ok(SegmentFrequencies { f, customers, visits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Poisson};

    #[test]
    fn mean_of_visits() {
        let s = segment_frequencies(&[1, 1], &[2, 4], 1).unwrap();
        assert_eq!(s.f, vec![3.0]);
        assert_eq!(s.customers, vec![2]);
    }

    #[test]
    fn single_visits_floor_at_one() {
        let s = segment_frequencies(&[1, 2, 3, 2], &[1, 1, 1, 1], 3).unwrap();
        assert_eq!(s.f, vec![1.0; 3]);
    }

    #[test]
    fn empty_segment_errors() {
        assert!(matches!(
            segment_frequencies(&[1, 1], &[1, 1], 2),
            Err(Error::DegenerateSegment { segment: 2 })
        ));
    }

    #[test]
    fn shifted_poisson_frequencies() {
        let lambdas = [5.0, 2.0, 0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut assign = Vec::new();
        let mut visits = Vec::new();
        for (j, &l) in lambdas.iter().enumerate() {
            let pois = Poisson::new(l).unwrap();
            for _ in 0..4000 {
                assign.push(j + 1);
                visits.push(1 + pois.sample(&mut rng) as u64);
            }
        }
        let s = segment_frequencies(&assign, &visits, 3).unwrap();
        for (fj, l) in s.f.iter().zip(lambdas) {
            let se = (l / 4000.0f64).sqrt();
            assert!((fj - (l + 1.0)).abs() < 3.0 * se, "{fj} vs {}", l + 1.0);
        }
    }
}
