//! Basket types and customer segments: feature extraction, z-scoring,
//! k-means with Davies–Bouldin selection, and per-segment visit frequencies.

mod features;
mod frequency;
mod kmeans;
mod standardize;
mod validity;

pub use features::{
    basket_features, customer_features, BasketFeatureSet, BasketFeatureVector, BasketSummary,
    CustomerProfile, PriceLevel, ProductLine, DIVERSITY_QUANTILE, VALUE_QUANTILE,
};
pub use frequency::{segment_frequencies, SegmentFrequencies};
pub use kmeans::{kmeans, ClusteringResult, DEFAULT_RESTARTS};
pub use standardize::{standardize, DimensionScale, Standardized};
pub use validity::{davies_bouldin, select_k};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How many clusters to form.
///
/// Serialized as an integer, as `"auto"` (range 2 to 10) or as `"auto:MIN-MAX"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CountRepr", into = "CountRepr")]
pub enum ClusterCount {
    Fixed(usize),
    /// Davies–Bouldin selection over an inclusive range.
    Auto { min: usize, max: usize },
}

impl ClusterCount {
    pub const DEFAULT_AUTO: ClusterCount = ClusterCount::Auto { min: 2, max: 10 };

    pub fn validate(&self) -> Result<()> {
        match *self {
            ClusterCount::Fixed(0) => Err(Error::input("cluster count must be positive")),
            ClusterCount::Auto { min, max } if min < 2 || max < min => {
                Err(Error::input(format!("automatic cluster range {min}-{max} must satisfy 2 <= min <= max")))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for ClusterCount {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ClusterCount::Fixed(k) => write!(f, "{k}"),
            ClusterCount::Auto { min, max } => write!(f, "auto:{min}-{max}"),
        }
    }
}

impl std::str::FromStr for ClusterCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::input(format!("cluster count `{s}` is neither an integer nor auto[:MIN-MAX]"));
        let count = if s == "auto" {
            ClusterCount::DEFAULT_AUTO
        } else if let Some(range) = s.strip_prefix("auto:") {
            let (lo, hi) = range.split_once('-').ok_or_else(bad)?;
            ClusterCount::Auto {
                min: lo.trim().parse().map_err(|_| bad())?,
                max: hi.trim().parse().map_err(|_| bad())?,
            }
        } else {
            ClusterCount::Fixed(s.parse().map_err(|_| bad())?)
        };
        count.validate()?;
        Ok(count)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CountRepr {
    Fixed(usize),
    Text(String),
}

impl TryFrom<CountRepr> for ClusterCount {
    type Error = Error;

    fn try_from(r: CountRepr) -> Result<Self> {
        match r {
            CountRepr::Fixed(k) => {
                let c = ClusterCount::Fixed(k);
                c.validate()?;
                Ok(c)
            }
            CountRepr::Text(s) => s.parse(),
        }
    }
}

impl From<ClusterCount> for CountRepr {
    fn from(c: ClusterCount) -> Self {
        match c {
            ClusterCount::Fixed(k) => CountRepr::Fixed(k),
            auto => CountRepr::Text(auto.to_string()),
        }
    }
}

/// Standardizes raw feature points, then clusters them.
pub fn cluster_points(
    raw: &[Vec<f64>],
    count: &ClusterCount,
    seed: u64,
    restarts: usize,
) -> Result<ClusteringResult> {
    let std = standardize(raw)?;
    let mut res = match *count {
        ClusterCount::Fixed(k) => kmeans(&std.points, k, seed, restarts)?,
        ClusterCount::Auto { min, max } => {
            let max = max.min(std.points.len());
            select_k(&std.points, min..=max, seed, restarts)?.1
        }
    };
    res.standardization = Some(std.scales);
    Ok(res)
}
