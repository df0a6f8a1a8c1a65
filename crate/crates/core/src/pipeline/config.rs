use std::path::PathBuf;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::period::{Periodization, DEFAULT_FREQUENCY_CAP};
use crate::clustering::{ClusterCount, DEFAULT_RESTARTS};
use crate::error::{Error, Result};
use crate::estimators::PriorSpec;
use crate::model::EstimatorKind;

/// Settings for one pipeline run, readable from a flat TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub period: Periodization,
    /// Inclusive lower date bound applied before slicing.
    pub date_from: Option<NaiveDate>,
    /// Inclusive upper date bound applied before slicing.
    pub date_to: Option<NaiveDate>,
    pub n_baskets: ClusterCount,
    pub m_segments: ClusterCount,
    /// Monitored customers above this many visits per month are removed.
    pub frequency_cap: f64,
    pub estimator: EstimatorKind,
    pub prior_gamma: Option<Vec<f64>>,
    pub seed: u64,
    pub restarts: usize,
    pub delimiter: char,
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            period: Periodization::All,
            date_from: None,
            date_to: None,
            n_baskets: ClusterCount::DEFAULT_AUTO,
            m_segments: ClusterCount::Auto { min: 2, max: 8 },
            frequency_cap: DEFAULT_FREQUENCY_CAP,
            estimator: EstimatorKind::Mle,
            prior_gamma: None,
            seed: 1,
            restarts: DEFAULT_RESTARTS,
            delimiter: ',',
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::input(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.frequency_cap > 0.0) {
            return Err(Error::input(format!("frequency_cap must be positive, got {}", self.frequency_cap)));
        }
        self.n_baskets.validate()?;
        self.m_segments.validate()?;
        if self.restarts == 0 {
            return Err(Error::input("restarts must be positive"));
        }
        if !self.delimiter.is_ascii() {
            return Err(Error::input("delimiter must be a single ASCII character"));
        }
        if let (Some(a), Some(b)) = (self.date_from, self.date_to) {
            if a > b {
                return Err(Error::input(format!("date_from {a} is after date_to {b}")));
            }
        }
        match (self.estimator, &self.prior_gamma) {
            (EstimatorKind::Naive, _) => Err(Error::input("estimator must be mle, least-squares or map")),
            (EstimatorKind::Map, None) => Err(Error::input("map estimator requires prior_gamma")),
            (EstimatorKind::Map, Some(gamma)) => PriorSpec { gamma: gamma.clone() }.validate(),
            (_, Some(_)) => Err(Error::input("prior_gamma is only used by the map estimator")),
            (_, None) => Ok(()),
        }
    }

    pub fn in_range(&self, date: Option<NaiveDate>) -> bool {
        match date {
            Some(d) => self.date_from.is_none_or(|a| d >= a) && self.date_to.is_none_or(|b| d <= b),
            None => self.date_from.is_none() && self.date_to.is_none(),
        }
    }
}
