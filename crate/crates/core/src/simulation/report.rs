use std::io::Write;

use serde::Serialize;

use super::runner::{ScenarioResult, SweepResult};
use crate::error::{Error, Result};
use crate::model::EstimatorKind;

/// One record of the structured simulation summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRecord {
    pub label: String,
    pub description: String,
    pub estimator: EstimatorKind,
    #[serde(rename = "M")]
    pub mean: f64,
    #[serde(rename = "SD")]
    pub sd: f64,
    pub q95: f64,
    pub nu: usize,
    pub used: usize,
    pub failed: usize,
    pub seed: u64,
}

pub fn summary_records(results: &[ScenarioResult]) -> Vec<SummaryRecord> {
    results
        .iter()
        .flat_map(|res| {
            res.summaries.iter().map(move |s| SummaryRecord {
                label: res.label.clone(),
                description: res.description.clone(),
                estimator: s.estimator,
                mean: s.ape.mean,
                sd: s.ape.sd,
                q95: s.ape.q95,
                nu: res.replications,
                used: res.trace.len(),
                failed: res.failed,
                seed: res.master_seed,
            })
        })
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    Error::input(format!("failed to write table: {e}"))
}

/// Writes one row per scenario with `M`, `SD` and `q95` columns per estimator.
pub fn write_scenario_table<W: Write>(results: &[ScenarioResult], out: W) -> Result<()> {
    let mut kinds: Vec<EstimatorKind> = Vec::new();
    for s in results.iter().flat_map(|r| &r.summaries) {
        if !kinds.contains(&s.estimator) {
            kinds.push(s.estimator);
        }
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string(), "description".to_string()];
    for k in &kinds {
        for stat in ["M", "SD", "q95"] {
            header.push(format!("{k}_{stat}"));
        }
    }
    header.extend(["nu", "failed", "seed"].map(String::from));
    w.write_record(&header).map_err(csv_error)?;
    for res in results {
        let mut row = vec![res.label.clone(), res.description.clone()];
        for k in &kinds {
            match res.summary(*k) {
                Some(s) => row.extend([s.mean, s.sd, s.q95].map(|v| format!("{v:.4}"))),
                None => row.extend(std::iter::repeat_n(String::new(), 3)),
            }
        }
        row.extend([res.replications.to_string(), res.failed.to_string(), res.master_seed.to_string()]);
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::input(format!("failed to write table: {e}")))
}

/// Writes one row per (grid value, estimator).
pub fn write_sweep<W: Write>(sweep: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis", "value", "estimator", "mean_ape", "ci_half_width", "replications"])
        .map_err(csv_error)?;
    for row in sweep.rows() {
        w.write_record([
            sweep.axis.name().to_string(),
            row.value.to_string(),
            row.estimator.to_string(),
            format!("{:.6}", row.mean_ape),
            format!("{:.6}", row.ci_half_width),
            row.replications.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::input(format!("failed to write table: {e}")))
}

pub fn write_summary_json<W: Write>(results: &[ScenarioResult], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, &summary_records(results))
        .map_err(|e| Error::input(format!("failed to write summary: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{run_scenario, run_sweep, scenario_catalog, SweepAxis};

    #[test]
    fn tables_have_expected_shape() {
        let mut c = scenario_catalog()[1].clone();
        c.replications = 3;
        c.a0 = 2000;
        c.a = 2000;
        let res = run_scenario(&c).unwrap();
        let mut buf = Vec::new();
        write_scenario_table(std::slice::from_ref(&res), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("label,description,naive_M,naive_SD,naive_q95,mle_M"));
        assert!(lines[1].starts_with("ii,Benchmark scenario,40.0000,0.0000,40.0000,"));

        let sweep = run_sweep(SweepAxis::A0, &[100.0, 1000.0, 10000.0], &c, 2).unwrap();
        let mut buf = Vec::new();
        write_sweep(&sweep, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.contains(",mle,")).count(), 3);

        let mut buf = Vec::new();
        write_summary_json(&[res], &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
        assert_eq!(v[0]["M"], 40.0);
    }
}
