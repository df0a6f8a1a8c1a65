//! Hold-out validation: hide the ids of some monitored customers and score the
//! estimate of their unique count.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::estimate::{estimate_pipeline, Report};
use super::ingest::Basket;
use super::period::{filter_extreme_frequency, period_length_months, split_periods, Periodization};
use crate::error::{Error, Result};
use crate::stats::{mean, sample_sd};

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSplit {
    /// Flagged customers keep their ids, the others' receipts become anonymous.
    pub baskets: Vec<Basket>,
    pub pseudo_monitored_customers: usize,
    pub true_unmonitored_customers: u64,
}

/// Splits monitored receipts by a per-customer flag. Unmonitored receipts are discarded.
pub fn validation_split(baskets: &[Basket], flags: &HashMap<String, bool>) -> Result<ValidationSplit> {
    let mut kept = BTreeSet::new();
    let mut hidden = BTreeSet::new();
    let mut out = Vec::new();
    for b in baskets {
        let Some(id) = b.customer_id.as_deref() else { continue };
        let flag = *flags
            .get(id)
            .ok_or_else(|| Error::input(format!("customer {id} has no validation flag")))?;
        let mut b = b.clone();
        if flag {
            kept.insert(id.to_string());
        } else {
            hidden.insert(id.to_string());
            b.customer_id = None;
        }
        out.push(b);
    }
    if kept.is_empty() || hidden.is_empty() {
        return Err(Error::input(format!(
            "validation split needs both sides non-empty ({} flagged, {} unflagged customers)",
            kept.len(),
            hidden.len()
        )));
    }
    Ok(ValidationSplit {
        baskets: out,
        pseudo_monitored_customers: kept.len(),
        true_unmonitored_customers: hidden.len() as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub periodization: Periodization,
    pub period: String,
    pub true_customers: u64,
    pub estimated_customers: f64,
    pub naive_customers: f64,
    pub ape: f64,
    pub naive_ape: f64,
}

/// Mean, standard deviation and worst case of absolute percentage errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    #[serde(rename = "M")]
    pub mean: f64,
    #[serde(rename = "SD")]
    pub sd: f64,
    #[serde(rename = "WC")]
    pub worst: f64,
}

impl ErrorStats {
    fn of(values: &[f64]) -> Self {
        ErrorStats {
            mean: mean(values),
            sd: sample_sd(values),
            worst: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub periodization: Periodization,
    pub obs: usize,
    pub naive: ErrorStats,
    pub proposed: ErrorStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationTable {
    pub rows: Vec<ValidationRow>,
    pub summary: Vec<ValidationSummary>,
    pub reports: Vec<Report>,
}

/// Runs the hold-out experiment for every requested period length.
///
/// Within each period, customers above the frequency cap are removed before
/// splitting so that hidden and visible customers are cleaned alike.
pub fn run_validation(
    baskets: &[Basket],
    flags: &HashMap<String, bool>,
    config: &RunConfig,
    periodizations: &[Periodization],
) -> Result<ValidationTable> {
    config.validate()?;
    let in_range: Vec<Basket> = baskets.iter().filter(|b| config.in_range(b.date)).cloned().collect();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    let mut reports = Vec::new();
    for &p in periodizations {
        let mut period_config = config.clone();
        period_config.period = p;
        let mut apes = Vec::new();
        let mut naive_apes = Vec::new();
        for (label, part) in split_periods(in_range.clone(), p)? {
            let months = period_length_months(&part, p);
            let cleaned = filter_extreme_frequency(part, config.frequency_cap, months)?.baskets;
            let split = validation_split(&cleaned, flags)?;
            let report = estimate_pipeline(&split.baskets, &period_config, &label)?;
            let truth = split.true_unmonitored_customers as f64;
            let row = ValidationRow {
                periodization: p,
                period: label,
                true_customers: split.true_unmonitored_customers,
                estimated_customers: report.totals.estimated_customers,
                naive_customers: report.totals.naive_customers,
                ape: 100.0 * (report.totals.estimated_customers - truth).abs() / truth,
                naive_ape: 100.0 * (report.totals.naive_customers - truth).abs() / truth,
            };
            apes.push(row.ape);
            naive_apes.push(row.naive_ape);
            rows.push(row);
            reports.push(report);
        }
        summary.push(ValidationSummary {
            periodization: p,
            obs: apes.len(),
            naive: ErrorStats::of(&naive_apes),
            proposed: ErrorStats::of(&apes),
        });
    }
    Ok(ValidationTable { rows, summary, reports })
}
