//! End-to-end workflows over transaction logs: ingestion, per-period
//! estimation, hold-out validation and a synthetic log generator.

mod config;
mod estimate;
mod ingest;
mod period;
mod synthetic;
mod validation;

pub use config::RunConfig;
pub use estimate::{
    estimate_periods, estimate_pipeline, segment_period, Diagnostics, Report, SegmentRow, Segmentation, Totals,
};
pub use ingest::{
    group_baskets, ingest_path, ingest_reader, parse_date, Basket, IngestOptions, IngestSummary, Ingested,
    Rejection, TransactionRecord,
};
pub use period::{
    filter_extreme_frequency, period_length_months, split_periods, FrequencyFilter, Periodization,
    DEFAULT_FREQUENCY_CAP,
};
pub use synthetic::{
    generate_log, write_records_csv, BasketArchetype, SegmentSpec, SyntheticLog, SyntheticSpec,
};
pub use validation::{
    run_validation, validation_split, ErrorStats, ValidationRow, ValidationSplit, ValidationSummary,
    ValidationTable,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::ClusterCount;
    use crate::error::Error;

    fn fixed_config() -> RunConfig {
        RunConfig {
            n_baskets: ClusterCount::Fixed(4),
            m_segments: ClusterCount::Fixed(3),
            ..RunConfig::default()
        }
    }

    #[test]
    fn synthetic_log_is_recovered() {
        let spec = SyntheticSpec::three_segment(4, 1);
        let log = generate_log(&spec, 1).unwrap();
        let baskets = group_baskets(&log.records).unwrap();
        let report = estimate_pipeline(&baskets, &fixed_config(), "all").unwrap();
        let truth = log.true_unmonitored(Periodization::All)["all"] as f64;
        let ape = (report.totals.estimated_customers - truth).abs() / truth;
        let naive = (report.totals.naive_customers - truth).abs() / truth;
        assert!(ape < 0.05, "ape {ape}");
        assert!(ape < naive);
        let recomposed: f64 = report.segments.iter().map(|s| s.q_hat * report.a as f64 / s.f0_hat).sum();
        assert!((recomposed - report.totals.estimated_customers).abs() <= 1e-9 * recomposed);
        assert!(report.segments.iter().all(|s| (0.0..=1.0).contains(&s.penetration)));
        assert_eq!(report.a + report.a0, baskets.len() as u64);
        let again = estimate_pipeline(&baskets, &fixed_config(), "all").unwrap();
        assert_eq!(serde_json::to_string(&report).unwrap(), serde_json::to_string(&again).unwrap());
    }

    #[test]
    fn no_unmonitored_receipts_is_an_error() {
        let spec = SyntheticSpec::three_segment(1, 1);
        let log = generate_log(&spec, 2).unwrap();
        let baskets: Vec<Basket> = group_baskets(&log.records)
            .unwrap()
            .into_iter()
            .filter(Basket::is_monitored)
            .collect();
        assert!(matches!(
            estimate_pipeline(&baskets, &fixed_config(), "all"),
            Err(Error::EmptySample(_))
        ));
    }

    #[test]
    fn validation_table_has_period_structure() {
        let spec = SyntheticSpec::three_segment(2, 3);
        let log = generate_log(&spec, 4).unwrap();
        let baskets = group_baskets(&log.records).unwrap();
        let table = run_validation(
            &baskets,
            &log.flags,
            &fixed_config(),
            &[Periodization::Month, Periodization::Quarter],
        )
        .unwrap();
        assert_eq!(table.summary.len(), 2);
        assert_eq!(table.summary[0].obs, 3);
        assert_eq!(table.summary[1].obs, 1);
        assert_eq!(table.rows.len(), 4);
        for s in &table.summary {
            assert!(s.proposed.mean < s.naive.mean, "{s:?}");
        }
    }
}
