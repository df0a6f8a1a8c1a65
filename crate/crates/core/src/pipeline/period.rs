//! Calendar slicing of receipts and removal of implausibly frequent customers.

use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::ingest::Basket;
use crate::error::{Error, Result};

/// Mean Gregorian month length in days.
const DAYS_PER_MONTH: f64 = 365.2425 / 12.0;

pub const DEFAULT_FREQUENCY_CAP: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Periodization {
    Week,
    Month,
    Quarter,
    Year,
    All,
}

impl Periodization {
    pub fn name(self) -> &'static str {
        match self {
            Periodization::Week => "week",
            Periodization::Month => "month",
            Periodization::Quarter => "quarter",
            Periodization::Year => "year",
            Periodization::All => "all",
        }
    }

    /// Label of the period containing `date`: `2018-W05`, `2018-03`, `2018-Q1`, `2018` or `all`.
    pub fn label(self, date: NaiveDate) -> String {
        match self {
            Periodization::Week => {
                let w = date.iso_week();
                format!("{}-W{:02}", w.year(), w.week())
            }
            Periodization::Month => format!("{}-{:02}", date.year(), date.month()),
            Periodization::Quarter => format!("{}-Q{}", date.year(), (date.month() - 1) / 3 + 1),
            Periodization::Year => format!("{}", date.year()),
            Periodization::All => "all".to_string(),
        }
    }

    /// Nominal period length in months; `None` for the whole log.
    pub fn months(self) -> Option<f64> {
        match self {
            Periodization::Week => Some(7.0 / DAYS_PER_MONTH),
            Periodization::Month => Some(1.0),
            Periodization::Quarter => Some(3.0),
            Periodization::Year => Some(12.0),
            Periodization::All => None,
        }
    }
}

impl std::str::FromStr for Periodization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "week" | "weekly" => Ok(Periodization::Week),
            "month" | "monthly" => Ok(Periodization::Month),
            "quarter" | "quarterly" => Ok(Periodization::Quarter),
            "year" | "yearly" | "annual" => Ok(Periodization::Year),
            "all" => Ok(Periodization::All),
            other => Err(Error::input(format!("unknown period `{other}`"))),
        }
    }
}

/// Splits receipts by calendar period, ordered by label.
///
/// Undated receipts are only accepted with [`Periodization::All`].
pub fn split_periods(baskets: Vec<Basket>, period: Periodization) -> Result<BTreeMap<String, Vec<Basket>>> {
    let mut out: BTreeMap<String, Vec<Basket>> = BTreeMap::new();
    for b in baskets {
        let label = match (period, b.date) {
            (Periodization::All, _) => "all".to_string(),
            (p, Some(d)) => p.label(d),
            (p, None) => {
                return Err(Error::input(format!(
                    "basket {} has no timestamp; {} periods need dates",
                    b.basket_id,
                    p.name()
                )))
            }
        };
        out.entry(label).or_default().push(b);
    }
    Ok(out)
}

/// Months covered by a set of receipts: the nominal length for calendar
/// periods, otherwise the dated span (at least one day), or one month when undated.
pub fn period_length_months(baskets: &[Basket], period: Periodization) -> f64 {
    if let Some(m) = period.months() {
        return m;
    }
    let dates = baskets.iter().filter_map(|b| b.date);
    match (dates.clone().min(), dates.max()) {
        (Some(lo), Some(hi)) => ((hi - lo).num_days() + 1) as f64 / DAYS_PER_MONTH,
        _ => 1.0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyFilter {
    pub baskets: Vec<Basket>,
    pub removed_customers: usize,
    pub removed_baskets: usize,
}

/// Drops every receipt of monitored customers whose visits per month exceed `cap`.
pub fn filter_extreme_frequency(baskets: Vec<Basket>, cap: f64, months: f64) -> Result<FrequencyFilter> {
    if !(cap > 0.0) {
        return Err(Error::input(format!("frequency cap must be positive, got {cap}")));
    }
    if !(months > 0.0) {
        return Err(Error::input(format!("period length must be positive, got {months}")));
    }
    let mut visits: HashMap<&str, u64> = HashMap::new();
    for id in baskets.iter().filter_map(|b| b.customer_id.as_deref()) {
        *visits.entry(id).or_default() += 1;
    }
    let removed: HashSet<String> = visits
        .into_iter()
        .filter(|&(_, v)| v as f64 / months > cap)
        .map(|(id, _)| id.to_string())
        .collect();
    let before = baskets.len();
    let kept: Vec<Basket> = baskets
        .into_iter()
        .filter(|b| b.customer_id.as_ref().is_none_or(|c| !removed.contains(c)))
        .collect();
    Ok(FrequencyFilter {
        removed_baskets: before - kept.len(),
        removed_customers: removed.len(),
        baskets: kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basket(id: usize, customer: Option<&str>, date: NaiveDate) -> Basket {
        Basket {
            basket_id: format!("b{id}"),
            customer_id: customer.map(str::to_string),
            date: Some(date),
            lines: Vec::new(),
        }
    }

    fn visits(customer: &str, n: usize, offset: usize) -> Vec<Basket> {
        let d = NaiveDate::from_ymd_opt(2018, 3, 1).unwrap();
        (0..n).map(|k| basket(offset + k, Some(customer), d)).collect()
    }

    #[test]
    fn cap_is_strict() {
        let mut all = visits("heavy", 16, 0);
        all.extend(visits("edge", 15, 100));
        all.push(basket(999, None, NaiveDate::from_ymd_opt(2018, 3, 2).unwrap()));
        let out = filter_extreme_frequency(all.clone(), 15.0, 1.0).unwrap();
        assert_eq!(out.removed_customers, 1);
        assert_eq!(out.removed_baskets, 16);
        assert_eq!(out.baskets.len(), 16);
        assert!(out.baskets.iter().all(|b| b.customer_id.as_deref() != Some("heavy")));
        let none = filter_extreme_frequency(all, f64::INFINITY, 1.0).unwrap();
        assert_eq!(none.removed_customers, 0);
        assert!(filter_extreme_frequency(Vec::new(), 0.0, 1.0).is_err());
    }

    #[test]
    fn cap_scales_with_period_length() {
        let out = filter_extreme_frequency(visits("c", 40, 0), 15.0, 3.0).unwrap();
        assert_eq!(out.removed_customers, 0);
    }

    #[test]
    fn labels() {
        let d = NaiveDate::from_ymd_opt(2018, 2, 1).unwrap();
        assert_eq!(Periodization::Week.label(d), "2018-W05");
        assert_eq!(Periodization::Month.label(d), "2018-02");
        assert_eq!(Periodization::Quarter.label(d), "2018-Q1");
        assert_eq!(Periodization::Year.label(d), "2018");
        assert_eq!("quarterly".parse::<Periodization>().unwrap(), Periodization::Quarter);
    }

    #[test]
    fn split_requires_dates() {
        let d1 = NaiveDate::from_ymd_opt(2018, 1, 31).unwrap();
        let d2 = NaiveDate::from_ymd_opt(2018, 2, 1).unwrap();
        let parts = split_periods(vec![basket(1, None, d2), basket(2, None, d1)], Periodization::Month).unwrap();
        assert_eq!(parts.keys().cloned().collect::<Vec<_>>(), ["2018-01", "2018-02"]);
        let mut undated = basket(3, None, d1);
        undated.date = None;
        assert!(split_periods(vec![undated.clone()], Periodization::Month).is_err());
        assert_eq!(split_periods(vec![undated], Periodization::All).unwrap().len(), 1);
        let span = period_length_months(&[basket(1, None, d1), basket(2, None, d2)], Periodization::All);
        assert!((span - 2.0 / DAYS_PER_MONTH).abs() < 1e-12);
    }
}
