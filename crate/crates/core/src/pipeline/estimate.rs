//! Clustering, monitored estimation and unmonitored deconvolution for one period.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::ingest::Basket;
use super::period::{filter_extreme_frequency, period_length_months, split_periods};
use crate::clustering::{
    basket_features, cluster_points, customer_features, segment_frequencies, BasketSummary, ClusterCount,
    ClusteringResult,
};
use crate::error::{Error, Result};
use crate::estimators::{ls_estimate, map_estimate, mle_estimate, Fit, OptimizerSettings, PriorSpec};
use crate::model::{column_rank, ensure_identifiable, estimate_monitored, unique_customers, CountsTable, EstimatorKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRow {
    /// Positional name `segment-j`.
    pub segment: String,
    /// Cluster center in standardized customer-feature coordinates.
    pub center: Vec<f64>,
    pub q0_hat: f64,
    pub q_hat: f64,
    pub f0_hat: f64,
    pub monitored_customers: u64,
    pub estimated_customers: f64,
    pub naive_customers: f64,
    /// Share of the segment's customers that are monitored.
    pub penetration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub monitored_customers: u64,
    pub estimated_customers: f64,
    pub naive_customers: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_baskets: usize,
    pub m_segments: usize,
    pub basket_db_index: Option<f64>,
    pub segment_db_index: Option<f64>,
    pub rank: usize,
    pub identifiable: bool,
    pub estimator: EstimatorKind,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub removed_customers: usize,
    pub removed_baskets: usize,
    /// Receipts excluded because their total value is not positive.
    pub zero_value_baskets: usize,
    /// One-based feature dimensions left out of clustering because they are constant.
    pub constant_basket_dimensions: Vec<usize>,
    pub constant_customer_dimensions: Vec<usize>,
}

/// Result of one pipeline run over one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub period: String,
    pub a: u64,
    pub a0: u64,
    pub segments: Vec<SegmentRow>,
    pub totals: Totals,
    pub diagnostics: Diagnostics,
}

fn drop_constant_columns(points: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
    let dim = points.first().map_or(0, Vec::len);
    let keep: Vec<usize> = (0..dim)
        .filter(|&d| points.iter().any(|p| p[d] != points[0][d]))
        .collect();
    if keep.is_empty() {
        return Err(Error::Standardization { dimension: 1 });
    }
    let dropped = (0..dim).filter(|d| !keep.contains(d)).map(|d| d + 1).collect();
    let reduced = points.iter().map(|p| keep.iter().map(|&d| p[d]).collect()).collect();
    Ok((reduced, dropped))
}

fn cluster(points: &[Vec<f64>], count: &ClusterCount, seed: u64, restarts: usize) -> Result<(ClusteringResult, Vec<usize>)> {
    let (reduced, dropped) = drop_constant_columns(points)?;
    Ok((cluster_points(&reduced, count, seed, restarts)?, dropped))
}

fn fit_unmonitored(config: &RunConfig, x: &[u64], r: &nalgebra::DMatrix<f64>) -> Result<Fit> {
    let settings = OptimizerSettings::default();
    match config.estimator {
        EstimatorKind::Mle => mle_estimate(x, r, &settings),
        EstimatorKind::LeastSquares => {
            let a: u64 = x.iter().sum();
            let p_hat: Vec<f64> = x.iter().map(|&v| v as f64 / a as f64).collect();
            ls_estimate(&p_hat, r, &settings)
        }
        EstimatorKind::Map => {
            let gamma = config
                .prior_gamma
                .clone()
                .ok_or_else(|| Error::input("map estimator requires prior_gamma"))?;
            if gamma.len() != r.ncols() {
                return Err(Error::dim(format!(
                    "prior has {} entries but {} segments were formed",
                    gamma.len(),
                    r.ncols()
                )));
            }
            map_estimate(x, r, &PriorSpec { gamma }, &settings)
        }
        EstimatorKind::Naive => Err(Error::input("estimator must be mle, least-squares or map")),
    }
}

/// Basket types and customer segments of one period.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    /// Receipts that entered clustering, after frequency filtering and zero-value removal.
    pub baskets: Vec<Basket>,
    pub types: ClusteringResult,
    /// Monitored customers in order of first appearance with indices into `baskets`.
    pub customers: Vec<(String, Vec<usize>)>,
    pub visits: Vec<u64>,
    pub segments: ClusteringResult,
    pub removed_customers: usize,
    pub removed_baskets: usize,
    pub zero_value_baskets: usize,
    pub constant_basket_dimensions: Vec<usize>,
    pub constant_customer_dimensions: Vec<usize>,
}

/// Filters a period's receipts and clusters baskets and monitored customers.
pub fn segment_period(baskets: &[Basket], config: &RunConfig, period: &str) -> Result<Segmentation> {
    config.validate()?;
    let months = period_length_months(baskets, config.period);
    let filtered = filter_extreme_frequency(baskets.to_vec(), config.frequency_cap, months)?;
    let total = filtered.baskets.len();

    let mut summaries = Vec::with_capacity(total);
    let mut kept = Vec::with_capacity(total);
    for b in filtered.baskets {
        match BasketSummary::from_lines(&b.basket_id, &b.lines) {
            Ok(s) => {
                summaries.push(s);
                kept.push(b);
            }
            Err(Error::DegenerateBasket { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if !kept.iter().any(Basket::is_monitored) {
        return Err(Error::EmptySample(format!("period {period} has no monitored receipts")));
    }

    let features = basket_features(&summaries)?;
    let basket_points: Vec<Vec<f64>> = features.vectors.iter().map(|v| v.to_point()).collect();
    let (types, constant_basket_dimensions) = cluster(&basket_points, &config.n_baskets, config.seed, config.restarts)?;

    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut customers: Vec<(String, Vec<usize>)> = Vec::new();
    for (k, b) in kept.iter().enumerate() {
        if let Some(id) = b.customer_id.as_deref() {
            let slot = *index.entry(id).or_insert_with(|| {
                customers.push((id.to_string(), Vec::new()));
                customers.len() - 1
            });
            customers[slot].1.push(k);
        }
    }
    let profiles = customer_features(&customers, &summaries, &features.vectors)?;
    let customer_points: Vec<Vec<f64>> = profiles.iter().map(|p| p.to_point()).collect();
    let (segments, constant_customer_dimensions) =
        cluster(&customer_points, &config.m_segments, config.seed.wrapping_add(1), config.restarts)?;
    Ok(Segmentation {
        zero_value_baskets: total - kept.len(),
        baskets: kept,
        types,
        visits: profiles.iter().map(|p| p.visit_count).collect(),
        customers,
        segments,
        removed_customers: filtered.removed_customers,
        removed_baskets: filtered.removed_baskets,
        constant_basket_dimensions,
        constant_customer_dimensions,
    })
}

/// Runs basket typing, customer segmentation and estimation on one period's receipts.
pub fn estimate_pipeline(baskets: &[Basket], config: &RunConfig, period: &str) -> Result<Report> {
    let seg = segment_period(baskets, config, period)?;
    let a0 = seg.baskets.iter().filter(|b| b.is_monitored()).count() as u64;
    let a = seg.baskets.len() as u64 - a0;
    if a == 0 {
        return Err(Error::EmptySample(format!(
            "period {period} has no unmonitored receipts; nothing to estimate"
        )));
    }
    let Segmentation { types, segments, customers, .. } = &seg;
    let (n, m) = (types.k, segments.k);

    let mut z = vec![vec![0u64; m]; n];
    for ((_, bs), &seg) in customers.iter().zip(&segments.assignments) {
        for &k in bs {
            z[types.assignments[k] - 1][seg - 1] += 1;
        }
    }
    let freq = segment_frequencies(&segments.assignments, &seg.visits, m)?;
    let monitored = estimate_monitored(&CountsTable::from_joint(z), &freq.f)?;
    let rank = column_rank(&monitored.r);
    ensure_identifiable(&monitored.r)?;

    let mut x = vec![0u64; n];
    for (k, b) in seg.baskets.iter().enumerate() {
        if !b.is_monitored() {
            x[types.assignments[k] - 1] += 1;
        }
    }
    let fit = fit_unmonitored(config, &x, &monitored.r)?;
    if !fit.converged {
        return Err(Error::NonConvergence { iterations: fit.iterations });
    }
    let (d_hat, _) = unique_customers(&fit.q_hat, &freq.f, a)?;

    let rows: Vec<SegmentRow> = (0..m)
        .map(|j| {
            let est = fit.q_hat[j] * a as f64 / freq.f[j];
            let d0 = freq.customers[j];
            SegmentRow {
                segment: format!("segment-{}", j + 1),
                center: segments.centers[j].clone(),
                q0_hat: monitored.q[j],
                q_hat: fit.q_hat[j],
                f0_hat: freq.f[j],
                monitored_customers: d0,
                estimated_customers: est,
                naive_customers: monitored.q[j] * a as f64 / freq.f[j],
                penetration: d0 as f64 / (d0 as f64 + est),
            }
        })
        .collect();
    let totals = Totals {
        monitored_customers: rows.iter().map(|r| r.monitored_customers).sum(),
        estimated_customers: rows.iter().map(|r| r.estimated_customers).sum(),
        naive_customers: rows.iter().map(|r| r.naive_customers).sum(),
    };
    debug_assert!((totals.estimated_customers - d_hat).abs() <= 1e-9 * d_hat.max(1.0));
    Ok(Report {
        period: period.to_string(),
        a,
        a0,
        segments: rows,
        totals,
        diagnostics: Diagnostics {
            n_baskets: n,
            m_segments: m,
            basket_db_index: types.db_index,
            segment_db_index: segments.db_index,
            rank,
            identifiable: true,
            estimator: config.estimator,
            converged: fit.converged,
            iterations: fit.iterations,
            objective: fit.objective,
            removed_customers: seg.removed_customers,
            removed_baskets: seg.removed_baskets,
            zero_value_baskets: seg.zero_value_baskets,
            constant_basket_dimensions: seg.constant_basket_dimensions.clone(),
            constant_customer_dimensions: seg.constant_customer_dimensions.clone(),
        },
    })
}

/// Restricts receipts to the configured date range and runs the pipeline per period.
pub fn estimate_periods(baskets: Vec<Basket>, config: &RunConfig) -> Result<Vec<Report>> {
    config.validate()?;
    let in_range: Vec<Basket> = baskets.into_iter().filter(|b| config.in_range(b.date)).collect();
    if in_range.is_empty() {
        return Err(Error::EmptySample("no receipts in the configured date range".into()));
    }
    split_periods(in_range, config.period)?
        .iter()
        .map(|(label, part)| estimate_pipeline(part, config, label))
        .collect()
}
