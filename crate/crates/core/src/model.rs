//! Transaction counts, segment/basket probability models and the conversion
//! from a transaction-level segment mix to unique-customer counts.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{is_simplex, SIMPLEX_TOL};

/// Relative singular-value threshold below which a column direction counts as dependent.
pub const RANK_TOL: f64 = 1e-8;

/// Observed transaction tallies for one sample.
///
/// `y` and `z` are only present for monitored samples, where every transaction
/// carries a customer segment. `z[i][j]` counts transactions of basket type `i`
/// made by segment `j` (both zero-based here; labels fed to
/// [`tabulate_counts`] are one-based).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsTable {
    pub a: u64,
    pub x: Vec<u64>,
    pub y: Option<Vec<u64>>,
    pub z: Option<Vec<Vec<u64>>>,
}

impl CountsTable {
    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Unmonitored counts built from a basket-type tally alone.
    pub fn from_basket_counts(x: Vec<u64>) -> Self {
        let a = x.iter().sum();
        CountsTable { a, x, y: None, z: None }
    }

    /// Monitored counts built from the joint table; `x`, `y` and `a` are its margins.
    pub fn from_joint(z: Vec<Vec<u64>>) -> Self {
        let m = z.first().map_or(0, Vec::len);
        let x: Vec<u64> = z.iter().map(|row| row.iter().sum()).collect();
        let y: Vec<u64> = (0..m).map(|j| z.iter().map(|row| row[j]).sum()).collect();
        let a = x.iter().sum();
        CountsTable { a, x, y: Some(y), z: Some(z) }
    }

    /// Checks the margin identities `sum x = sum y = sum z = a` and row/column sums.
    pub fn is_consistent(&self) -> bool {
        if self.x.iter().sum::<u64>() != self.a {
            return false;
        }
        match (&self.y, &self.z) {
            (None, None) => true,
            (Some(y), Some(z)) => {
                y.iter().sum::<u64>() == self.a
                    && z.len() == self.x.len()
                    && z.iter().zip(&self.x).all(|(row, &xi)| {
                        row.len() == y.len() && row.iter().sum::<u64>() == xi
                    })
                    && (0..y.len()).all(|j| z.iter().map(|row| row[j]).sum::<u64>() == y[j])
            }
            _ => false,
        }
    }
}

/// Tallies one-based basket-type labels (and optionally segment labels) into counts.
pub fn tabulate_counts(
    basket_labels: &[usize],
    segment_labels: Option<&[usize]>,
    n: usize,
    m: usize,
) -> Result<CountsTable> {
    if let Some(seg) = segment_labels {
        if seg.len() != basket_labels.len() {
            return Err(Error::input(format!(
                "{} basket labels but {} segment labels",
                basket_labels.len(),
                seg.len()
            )));
        }
    }
    let mut x = vec![0u64; n];
    for (k, &b) in basket_labels.iter().enumerate() {
        if b == 0 || b > n {
            return Err(Error::input(format!(
                "basket label {b} at index {k} outside 1..={n}"
            )));
        }
        x[b - 1] += 1;
    }
    let (y, z) = match segment_labels {
        None => (None, None),
        Some(seg) => {
            let mut y = vec![0u64; m];
            let mut z = vec![vec![0u64; m]; n];
            for (k, (&b, &c)) in basket_labels.iter().zip(seg).enumerate() {
                if c == 0 || c > m {
                    return Err(Error::input(format!(
                        "segment label {c} at index {k} outside 1..={m}"
                    )));
                }
                y[c - 1] += 1;
                z[b - 1][c - 1] += 1;
            }
            (Some(y), Some(z))
        }
    };
    Ok(CountsTable {
        a: basket_labels.len() as u64,
        x,
        y,
        z,
    })
}

/// Basket-type distribution `p`, segment mix `q`, conditional matrix `r`
/// (column `j` is the basket-type distribution of segment `j`) and mean
/// visit frequencies `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityModel {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub r: DMatrix<f64>,
    pub f: Vec<f64>,
}

impl ProbabilityModel {
    pub fn n(&self) -> usize {
        self.r.nrows()
    }

    pub fn m(&self) -> usize {
        self.r.ncols()
    }

    /// Simplex checks on `p`, `q` and every column of `r`, plus `f > 0` and `n >= m`.
    pub fn validate(&self) -> Result<()> {
        let (n, m) = self.r.shape();
        if self.p.len() != n || self.q.len() != m || self.f.len() != m {
            return Err(Error::dim(format!(
                "model with r {n}x{m} has |p|={}, |q|={}, |f|={}",
                self.p.len(),
                self.q.len(),
                self.f.len()
            )));
        }
        if n < m {
            return Err(Error::dim(format!("{n} basket types < {m} segments")));
        }
        if !is_simplex(&self.p, SIMPLEX_TOL) || !is_simplex(&self.q, SIMPLEX_TOL) {
            return Err(Error::input("p or q is not a probability vector"));
        }
        check_column_simplex(&self.r)?;
        if let Some(j) = self.f.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::input(format!("frequency of segment {} is not positive", j + 1)));
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        column_rank(&self.r)
    }

    pub fn is_identifiable(&self) -> bool {
        self.rank() == self.m()
    }
}

pub fn check_column_simplex(r: &DMatrix<f64>) -> Result<()> {
    for (j, col) in r.column_iter().enumerate() {
        let v: Vec<f64> = col.iter().copied().collect();
        if !is_simplex(&v, SIMPLEX_TOL) {
            return Err(Error::input(format!(
                "column {} of r is not a probability vector",
                j + 1
            )));
        }
    }
    Ok(())
}

/// Numerical column rank: singular values above `RANK_TOL * sigma_max`.
pub fn column_rank(r: &DMatrix<f64>) -> usize {
    if r.is_empty() {
        return 0;
    }
    let sv = r.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOL * max).count()
}

/// Rejects `r` unless its columns are linearly independent.
pub fn ensure_identifiable(r: &DMatrix<f64>) -> Result<()> {
    let rank = column_rank(r);
    if rank < r.ncols() {
        return Err(Error::Identifiability {
            rank,
            expected: r.ncols(),
        });
    }
    Ok(())
}

/// Plug-in estimates of `p`, `q` and `r` from a fully observed sample.
///
/// `frequencies` is carried through unchanged into the returned model.
pub fn estimate_monitored(counts: &CountsTable, frequencies: &[f64]) -> Result<ProbabilityModel> {
    let (y, z) = match (&counts.y, &counts.z) {
        (Some(y), Some(z)) => (y, z),
        _ => return Err(Error::input("monitored estimation needs segment counts")),
    };
    if counts.a == 0 {
        return Err(Error::EmptySample("monitored sample has no transactions".into()));
    }
    let (n, m) = (counts.n(), y.len());
    if frequencies.len() != m {
        return Err(Error::dim(format!(
            "{} frequencies for {m} segments",
            frequencies.len()
        )));
    }
    if let Some(j) = y.iter().position(|&v| v == 0) {
        return Err(Error::DegenerateSegment { segment: j + 1 });
    }
    let a = counts.a as f64;
    let p = counts.x.iter().map(|&v| v as f64 / a).collect();
    let q = y.iter().map(|&v| v as f64 / a).collect();
    let r = DMatrix::from_fn(n, m, |i, j| z[i][j] as f64 / y[j] as f64);
    let model = ProbabilityModel {
        p,
        q,
        r,
        f: frequencies.to_vec(),
    };
    if !model.is_identifiable() {
        log::warn!(
            "conditional basket-type matrix has rank {} < {m}; segments are linearly dependent",
            model.rank()
        );
    }
    Ok(model)
}

/// Law of total probability: `p = r q`.
pub fn mixture_probabilities(r: &DMatrix<f64>, q: &[f64]) -> Result<Vec<f64>> {
    if r.ncols() != q.len() {
        return Err(Error::dim(format!(
            "r has {} columns but q has {} entries",
            r.ncols(),
            q.len()
        )));
    }
    Ok((0..r.nrows())
        .map(|i| (0..r.ncols()).map(|j| r[(i, j)] * q[j]).sum())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Naive,
    Mle,
    LeastSquares,
    Map,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::Mle => "mle",
            EstimatorKind::LeastSquares => "least-squares",
            EstimatorKind::Map => "map",
        })
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(EstimatorKind::Naive),
            "mle" => Ok(EstimatorKind::Mle),
            "least-squares" | "ls" => Ok(EstimatorKind::LeastSquares),
            "map" => Ok(EstimatorKind::Map),
            other => Err(Error::input(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Estimated segment mix of the unmonitored transactions and the implied
/// unique-customer count and customer-level segment distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub q_hat: Vec<f64>,
    pub d_hat: f64,
    pub u_hat: Vec<f64>,
    pub estimator: EstimatorKind,
    pub objective: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EstimationResult {
    /// Attaches `d_hat` and `u_hat` to an estimated mix.
    pub fn from_mix(
        q_hat: Vec<f64>,
        f: &[f64],
        a: u64,
        estimator: EstimatorKind,
        objective: Option<f64>,
        iterations: usize,
        converged: bool,
    ) -> Result<Self> {
        let (d_hat, u_hat) = unique_customers(&q_hat, f, a)?;
        Ok(EstimationResult {
            q_hat,
            d_hat,
            u_hat,
            estimator,
            objective,
            iterations,
            converged,
        })
    }
}

/// Assumes the unmonitored segment mix equals the monitored one.
pub fn naive_estimate(q0_hat: &[f64], f: &[f64], a: u64) -> Result<EstimationResult> {
    if a == 0 {
        return Err(Error::EmptySample("no unmonitored transactions".into()));
    }
    EstimationResult::from_mix(q0_hat.to_vec(), f, a, EstimatorKind::Naive, None, 0, true)
}

/// `d = sum_j q_j a / f_j` and `u_j = q_j a / (f_j d)`.
pub fn unique_customers(q_hat: &[f64], f: &[f64], a: u64) -> Result<(f64, Vec<f64>)> {
    if q_hat.len() != f.len() {
        return Err(Error::dim(format!(
            "{} segment shares but {} frequencies",
            q_hat.len(),
            f.len()
        )));
    }
    if let Some(j) = f.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::input(format!(
            "frequency of segment {} must be positive, got {}",
            j + 1,
            f[j]
        )));
    }
    if a == 0 {
        return Err(Error::EmptySample("no transactions".into()));
    }
    let a = a as f64;
    let per_segment: Vec<f64> = q_hat.iter().zip(f).map(|(q, fj)| q * a / fj).collect();
    let d: f64 = per_segment.iter().sum();
    if !(d > 0.0) {
        return Err(Error::input("segment mix carries no mass"));
    }
    let u = per_segment.iter().map(|c| c / d).collect();
    Ok((d, u))
}

/// Outcome of the square-case inverse `q = r^{-1} p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareInverse {
    pub q: Vec<f64>,
    /// `false` when some entry falls outside `[0, 1]` by more than [`SIMPLEX_TOL`].
    pub feasible: bool,
}

/// Condition numbers above this are treated as singular.
pub const MAX_CONDITION: f64 = 1e8;

pub fn square_invert_estimate(p_hat: &[f64], r: &DMatrix<f64>) -> Result<SquareInverse> {
    let (n, m) = r.shape();
    if n != m {
        return Err(Error::dim(format!("square inverse needs n = m, got {n}x{m}")));
    }
    if p_hat.len() != n {
        return Err(Error::dim(format!("p has {} entries, r has {n} rows", p_hat.len())));
    }
    let svd = r.clone().svd(true, true);
    let (max, min) = (svd.singular_values.max(), svd.singular_values.min());
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::Conditioning { condition });
    }
    let rhs = nalgebra::DVector::from_column_slice(p_hat);
    let sol = r
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or(Error::Conditioning { condition })?;
    let q: Vec<f64> = sol.iter().copied().collect();
    let feasible = q.iter().all(|&v| (-SIMPLEX_TOL..=1.0 + SIMPLEX_TOL).contains(&v));
    Ok(SquareInverse { q, feasible })
}
