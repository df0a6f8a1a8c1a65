//! Basket and customer feature extraction.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::stats::quantile_sorted;

/// Level at which basket and customer values are capped.
pub const VALUE_QUANTILE: f64 = 0.95;
/// Level at which basket product counts are capped.
pub const DIVERSITY_QUANTILE: f64 = 0.90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriceLevel {
    LowEnd,
    Standard,
    HighEnd,
}

impl std::str::FromStr for PriceLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low-end" | "low" => Ok(PriceLevel::LowEnd),
            "standard" => Ok(PriceLevel::Standard),
            "high-end" | "high" | "premium" => Ok(PriceLevel::HighEnd),
            other => Err(Error::input(format!("unknown price level `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductLine {
    pub product_id: String,
    pub unit_price: f64,
    pub quantity: u32,
    pub price_level: PriceLevel,
    pub children: bool,
}

impl ProductLine {
    pub fn value(&self) -> f64 {
        self.unit_price * self.quantity as f64
    }
}

/// Unscaled per-basket totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasketSummary {
    pub value: f64,
    pub premium_value: f64,
    pub children_value: f64,
    /// Distinct products in the basket.
    pub product_count: usize,
}

impl BasketSummary {
    pub fn from_lines(basket_id: &str, lines: &[ProductLine]) -> Result<Self> {
        let mut summary = BasketSummary {
            value: 0.0,
            premium_value: 0.0,
            children_value: 0.0,
            product_count: 0,
        };
        let mut products = BTreeSet::new();
        for line in lines {
            let v = line.value();
            summary.value += v;
            if line.price_level == PriceLevel::HighEnd {
                summary.premium_value += v;
            }
            if line.children {
                summary.children_value += v;
            }
            products.insert(line.product_id.as_str());
        }
        summary.product_count = products.len();
        if !(summary.value > 0.0) {
            return Err(Error::DegenerateBasket {
                basket: basket_id.to_string(),
            });
        }
        Ok(summary)
    }
}

/// Four clustering dimensions of a basket, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasketFeatureVector {
    pub value_scaled: f64,
    pub premium_share: f64,
    pub children_share: f64,
    pub diversity_scaled: f64,
}

impl BasketFeatureVector {
    pub fn to_point(&self) -> Vec<f64> {
        vec![
            self.value_scaled,
            self.premium_share,
            self.children_share,
            self.diversity_scaled,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasketFeatureSet {
    pub vectors: Vec<BasketFeatureVector>,
    pub value_quantile: f64,
    pub count_quantile: f64,
}

fn sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

fn capped_ratio(value: f64, cap: f64) -> f64 {
    if cap > 0.0 {
        (value / cap).min(1.0)
    } else {
        1.0
    }
}

/// Scales basket totals against the period's value and product-count quantiles.
pub fn basket_features(summaries: &[BasketSummary]) -> Result<BasketFeatureSet> {
    if summaries.is_empty() {
        return Err(Error::EmptySample("no baskets to featurize".into()));
    }
    let value_quantile = quantile_sorted(&sorted(summaries.iter().map(|s| s.value)), VALUE_QUANTILE);
    let count_quantile = quantile_sorted(
        &sorted(summaries.iter().map(|s| s.product_count as f64)),
        DIVERSITY_QUANTILE,
    );
    let vectors = summaries
        .iter()
        .map(|s| BasketFeatureVector {
            value_scaled: capped_ratio(s.value, value_quantile),
            premium_share: (s.premium_value / s.value).clamp(0.0, 1.0),
            children_share: (s.children_value / s.value).clamp(0.0, 1.0),
            diversity_scaled: capped_ratio(s.product_count as f64, count_quantile),
        })
        .collect();
    Ok(BasketFeatureSet {
        vectors,
        value_quantile,
        count_quantile,
    })
}

/// Aggregated purchase profile of one customer over a period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerProfile {
    pub customer_id: String,
    pub total_value_scaled: f64,
    pub premium_share: f64,
    pub children_share: f64,
    pub mean_diversity: f64,
    pub visit_count: u64,
}

impl CustomerProfile {
    pub fn to_point(&self) -> Vec<f64> {
        vec![
            self.total_value_scaled,
            self.premium_share,
            self.children_share,
            self.mean_diversity,
        ]
    }
}

/// Aggregates basket features per customer.
///
/// `customers` pairs each customer id with the indices of its baskets in
/// `summaries`/`features`. Shares are value-weighted, diversity is the plain
/// mean and total value is scaled by the 95% quantile across customers.
pub fn customer_features(
    customers: &[(String, Vec<usize>)],
    summaries: &[BasketSummary],
    features: &[BasketFeatureVector],
) -> Result<Vec<CustomerProfile>> {
    if summaries.len() != features.len() {
        return Err(Error::dim("basket summaries and features differ in length"));
    }
    let mut totals = Vec::with_capacity(customers.len());
    for (id, baskets) in customers {
        if baskets.is_empty() {
            return Err(Error::input(format!("customer {id} has no baskets")));
        }
        if let Some(&k) = baskets.iter().find(|&&k| k >= summaries.len()) {
            return Err(Error::input(format!("customer {id} references unknown basket {k}")));
        }
        totals.push(baskets.iter().map(|&k| summaries[k].value).sum::<f64>());
    }
    if customers.is_empty() {
        return Ok(Vec::new());
    }
    let cap = quantile_sorted(&sorted(totals.iter().copied()), VALUE_QUANTILE);
    Ok(customers
        .iter()
        .zip(&totals)
        .map(|((id, baskets), &total)| {
            let premium: f64 = baskets.iter().map(|&k| summaries[k].premium_value).sum();
            let children: f64 = baskets.iter().map(|&k| summaries[k].children_value).sum();
            let diversity: f64 = baskets.iter().map(|&k| features[k].diversity_scaled).sum();
            CustomerProfile {
                customer_id: id.clone(),
                total_value_scaled: capped_ratio(total, cap),
                premium_share: (premium / total).clamp(0.0, 1.0),
                children_share: (children / total).clamp(0.0, 1.0),
                mean_diversity: diversity / baskets.len() as f64,
                visit_count: baskets.len() as u64,
            }
        })
        .collect())
}
