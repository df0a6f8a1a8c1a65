use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::sampling::{dirichlet_perturb_columns, dirichlet_perturb_frequencies, sample_multinomial};
use crate::error::{Error, Result};
use crate::estimators::{ls_estimate, map_estimate, mle_estimate, OptimizerSettings, PriorSpec};
use crate::model::{
    estimate_monitored, naive_estimate, unique_customers, CountsTable,
    EstimatorKind,
};
use crate::stats::{mean, quantile_sorted, sample_sd};

/// Monitored draws with an empty segment are repeated at most this many times.
const MAX_REDRAWS: u32 = 1000;

/// One simulated replication: the true unmonitored customer count and each estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub d_true: f64,
    /// `(estimator, d_hat)` in evaluation order; naive first, then MLE, then extras.
    pub estimates: Vec<(EstimatorKind, f64)>,
    /// Monitored samples discarded because some segment was empty.
    pub redraws: u32,
}

impl Replication {
    pub fn estimate(&self, kind: EstimatorKind) -> Option<f64> {
        self.estimates.iter().find(|(k, _)| *k == kind).map(|(_, d)| *d)
    }
}

fn rng_for(master_seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws one monitored and one unmonitored sample and evaluates every estimator.
pub fn run_replication(config: &ScenarioConfig, index: usize, rng: &mut ChaCha8Rng) -> Result<Replication> {
    let r_unmonitored = match config.alpha_r {
        Some(alpha) => dirichlet_perturb_columns(&config.r0, alpha, rng)?,
        None => config.r0.clone(),
    };
    let f = match config.alpha_f {
        Some(alpha) => dirichlet_perturb_frequencies(&config.f0, alpha, rng)?,
        None => config.f0.clone(),
    };
    let n = config.r0.nrows();
    let column = |r: &nalgebra::DMatrix<f64>, j: usize| -> Vec<f64> { r.column(j).iter().copied().collect() };

    // monitored sample: segments from q0, baskets from the columns of r0
    let mut redraws = 0;
    let y0 = loop {
        let y = sample_multinomial(config.a0, &config.q0, rng);
        if y.iter().all(|&v| v > 0) {
            break y;
        }
        redraws += 1;
        if redraws >= MAX_REDRAWS {
            return Err(Error::input("monitored sample keeps missing a segment"));
        }
    };
    let mut z = vec![vec![0u64; y0.len()]; n];
    for (j, &yj) in y0.iter().enumerate() {
        for (i, c) in sample_multinomial(yj, &column(&config.r0, j), rng).into_iter().enumerate() {
            z[i][j] = c;
        }
    }
    let monitored = estimate_monitored(&CountsTable::from_joint(z), &config.f0)?;

    // unmonitored sample: segments from q, baskets from the (possibly perturbed) r
    let y = sample_multinomial(config.a, &config.q, rng);
    let mut x = vec![0u64; n];
    for (j, &yj) in y.iter().enumerate() {
        for (i, c) in sample_multinomial(yj, &column(&r_unmonitored, j), rng).into_iter().enumerate() {
            x[i] += c;
        }
    }

    let d_true = ScenarioConfig::expected_customers(config.a, &config.q, &f);
    let settings = OptimizerSettings::default();
    let mut estimates = vec![(
        EstimatorKind::Naive,
        naive_estimate(&config.q0, &config.f0, config.a)?.d_hat,
    )];
    let mle = mle_estimate(&x, &monitored.r, &settings)?;
    if !mle.converged {
        return Err(Error::NonConvergence { iterations: mle.iterations });
    }
    estimates.push((EstimatorKind::Mle, unique_customers(&mle.q_hat, &config.f0, config.a)?.0));
    for &kind in &config.extra_estimators {
        let fit = match kind {
            EstimatorKind::LeastSquares => {
                let p_hat: Vec<f64> = x.iter().map(|&v| v as f64 / config.a as f64).collect();
                ls_estimate(&p_hat, &monitored.r, &settings)?
            }
            EstimatorKind::Map => map_estimate(&x, &monitored.r, &PriorSpec::flat(monitored.r.ncols()), &settings)?,
            EstimatorKind::Naive | EstimatorKind::Mle => continue,
        };
        if !fit.converged {
            return Err(Error::NonConvergence { iterations: fit.iterations });
        }
        estimates.push((kind, unique_customers(&fit.q_hat, &config.f0, config.a)?.0));
    }
    Ok(Replication {
        index,
        d_true,
        estimates,
        redraws,
    })
}

/// Absolute percentage errors `100 |d - d_hat| / d`.
pub fn ape_values(d_true: &[f64], d_hat: &[f64]) -> Result<Vec<f64>> {
    if d_true.len() != d_hat.len() {
        return Err(Error::dim(format!(
            "{} true values but {} estimates",
            d_true.len(),
            d_hat.len()
        )));
    }
    d_true
        .iter()
        .zip(d_hat)
        .map(|(&d, &e)| {
            if !(d > 0.0) {
                Err(Error::input(format!("true customer count must be positive, got {d}")))
            } else {
                Ok(100.0 * ((d - e) / d).abs())
            }
        })
        .collect()
}

/// Mean absolute percentage error.
pub fn mape(d_true: &[f64], d_hat: &[f64]) -> Result<f64> {
    let apes = ape_values(d_true, d_hat)?;
    if apes.is_empty() {
        return Err(Error::EmptySample("no replications".into()));
    }
    Ok(mean(&apes))
}

/// Mean, sample standard deviation and 95% quantile of absolute percentage errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApeSummary {
    pub mean: f64,
    pub sd: f64,
    pub q95: f64,
}

impl ApeSummary {
    pub fn from_apes(apes: &[f64]) -> Self {
        let mut sorted = apes.to_vec();
        sorted.sort_by(f64::total_cmp);
        ApeSummary {
            mean: mean(apes),
            sd: sample_sd(apes),
            q95: if sorted.is_empty() { f64::NAN } else { quantile_sorted(&sorted, 0.95) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    #[serde(flatten)]
    pub ape: ApeSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub label: String,
    pub description: String,
    pub replications: usize,
    pub failed: usize,
    pub redraws: u64,
    pub master_seed: u64,
    pub summaries: Vec<EstimatorSummary>,
    pub trace: Vec<Replication>,
}

impl ScenarioResult {
    pub fn summary(&self, kind: EstimatorKind) -> Option<&ApeSummary> {
        self.summaries.iter().find(|s| s.estimator == kind).map(|s| &s.ape)
    }

    /// Recomputes the summaries from the stored trace.
    pub fn summarize_trace(trace: &[Replication]) -> Result<Vec<EstimatorSummary>> {
        let Some(first) = trace.first() else {
            return Ok(Vec::new());
        };
        let d_true: Vec<f64> = trace.iter().map(|r| r.d_true).collect();
        first
            .estimates
            .iter()
            .map(|(kind, _)| {
                let d_hat: Vec<f64> = trace
                    .iter()
                    .map(|r| r.estimate(*kind).unwrap_or(f64::NAN))
                    .collect();
                Ok(EstimatorSummary {
                    estimator: *kind,
                    ape: ApeSummary::from_apes(&ape_values(&d_true, &d_hat)?),
                })
            })
            .collect()
    }
}

/// Runs every replication of `config` on its own RNG stream.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioResult> {
    config.validate()?;
    let outcomes: Vec<Result<Replication>> = (0..config.replications)
        .into_par_iter()
        .map(|s| run_replication(config, s, &mut rng_for(config.master_seed, s)))
        .collect();
    let mut trace = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    for (s, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(rep) => trace.push(rep),
            Err(e) => {
                log::warn!("scenario {} replication {s} failed: {e}", config.label);
                failed += 1;
            }
        }
    }
    if trace.is_empty() {
        return Err(Error::input(format!("every replication of scenario {} failed", config.label)));
    }
    let summaries = ScenarioResult::summarize_trace(&trace)?;
    Ok(ScenarioResult {
        label: config.label.clone(),
        description: config.description.clone(),
        replications: config.replications,
        failed,
        redraws: trace.iter().map(|r| r.redraws as u64).sum(),
        master_seed: config.master_seed,
        summaries,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    A0,
    A,
    AlphaR,
    AlphaF,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::A0 => "a0",
            SweepAxis::A => "a",
            SweepAxis::AlphaR => "alpha_r",
            SweepAxis::AlphaF => "alpha_f",
        }
    }

    /// Grid spanning the range studied for this axis.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepAxis::A0 | SweepAxis::A => vec![100.0, 200.0, 500.0, 1000.0, 2000.0, 5000.0, 10000.0],
            SweepAxis::AlphaR | SweepAxis::AlphaF => vec![10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0],
        }
    }

    fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut c = base.clone();
        c.label = format!("{}={value}", self.name());
        match self {
            SweepAxis::A0 | SweepAxis::A => {
                if !(value >= 1.0) || value.fract() != 0.0 {
                    return Err(Error::input(format!("sample size must be a positive integer, got {value}")));
                }
                if self == SweepAxis::A0 {
                    c.a0 = value as u64;
                } else {
                    c.a = value as u64;
                }
            }
            SweepAxis::AlphaR => c.alpha_r = Some(value),
            SweepAxis::AlphaF => c.alpha_f = Some(value),
        }
        c.description = c.label.clone();
        Ok(c)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a0" => Ok(SweepAxis::A0),
            "a" => Ok(SweepAxis::A),
            "alpha_r" | "alpha-r" => Ok(SweepAxis::AlphaR),
            "alpha_f" | "alpha-f" => Ok(SweepAxis::AlphaF),
            other => Err(Error::input(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// One plot-ready observation: mean APE with a normal 95% confidence half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub estimator: EstimatorKind,
    pub mean_ape: f64,
    pub ci_half_width: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub points: Vec<(f64, ScenarioResult)>,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.points
            .iter()
            .flat_map(|(value, res)| {
                let used = res.trace.len();
                res.summaries.iter().map(move |s| SweepRow {
                    value: *value,
                    estimator: s.estimator,
                    mean_ape: s.ape.mean,
                    ci_half_width: 1.96 * s.ape.sd / (used as f64).sqrt(),
                    replications: used,
                })
            })
            .collect()
    }
}

pub fn run_sweep(axis: SweepAxis, grid: &[f64], base: &ScenarioConfig, replications: usize) -> Result<SweepResult> {
    let mut points = Vec::with_capacity(grid.len());
    for &value in grid {
        let mut config = axis.apply(base, value)?;
        config.replications = replications;
        points.push((value, run_scenario(&config)?));
    }
    Ok(SweepResult { axis, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::config::{benchmark_parameters, scenario_catalog};

    #[test]
    fn mape_examples() {
        assert!((mape(&[500_000.0], &[300_000.0]).unwrap() - 40.0).abs() < 1e-12);
        assert!((mape(&[500.0], &[300.0]).unwrap() - 40.0).abs() < 1e-12);
        assert_eq!(mape(&[7.0, 9.0], &[7.0, 9.0]).unwrap(), 0.0);
        assert!(mape(&[0.0], &[1.0]).is_err());
        assert!(mape(&[1.0], &[]).is_err());
    }

    #[test]
    fn naive_errors_are_fixed_by_protocol() {
        let cat = scenario_catalog();
        for (idx, expected) in [(0usize, 0.0), (1, 40.0)] {
            let mut c = cat[idx].clone();
            c.replications = 5;
            let res = run_scenario(&c).unwrap();
            for rep in &res.trace {
                let ape = 100.0 * (rep.d_true - rep.estimate(EstimatorKind::Naive).unwrap()).abs() / rep.d_true;
                assert!((ape - expected).abs() < 1e-9);
                assert!((rep.d_true - if idx == 0 { 300_000.0 } else { 500_000.0 }).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn changing_f_moves_true_count() {
        let mut c = scenario_catalog()[6].clone();
        c.replications = 4;
        let res = run_scenario(&c).unwrap();
        let first = res.trace[0].d_true;
        assert!(res.trace.iter().any(|r| (r.d_true - first).abs() > 1.0));
    }

    #[test]
    fn reruns_are_bit_identical() {
        let mut c = benchmark_parameters();
        c.replications = 8;
        c.a0 = 5000;
        c.a = 5000;
        c.extra_estimators = vec![EstimatorKind::LeastSquares];
        let a = run_scenario(&c).unwrap();
        let b = run_scenario(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.summaries, ScenarioResult::summarize_trace(&a.trace).unwrap());
        assert!(a.summary(EstimatorKind::LeastSquares).is_some());
    }
}
