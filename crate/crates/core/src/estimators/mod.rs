//! Simplex-constrained estimators of the unmonitored segment mix.
//!
//! All three estimators share one optimization engine (see [`solver`]):
//!
//! * [`mle_estimate`] maximizes the multinomial log-likelihood of the observed
//!   basket-type counts, warm-started with the classical mixture-weight EM update;
//! * [`ls_estimate`] minimizes the squared distance between the observed and the
//!   implied basket-type distribution;
//! * [`map_estimate`] maximizes the log posterior under a Dirichlet prior.

mod objective;
mod solver;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_column_simplex, ensure_identifiable};
use crate::simplex::uniform;

pub use objective::{
    kl_divergence, ln_multivariate_beta, log_likelihood, log_posterior, squared_error,
};
use objective::mix;
use solver::{maximize, SimplexObjective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub max_iterations: usize,
    /// Relative stopping threshold on the objective.
    pub tolerance: f64,
    /// Lower clamp applied to probabilities inside logarithms.
    pub floor: f64,
    pub multistart_count: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            max_iterations: 10_000,
            tolerance: 1e-10,
            floor: 1e-300,
            multistart_count: 1,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !(self.floor > 0.0) || self.max_iterations == 0 {
            return Err(Error::input(
                "optimizer needs tolerance > 0, floor > 0 and max_iterations >= 1",
            ));
        }
        Ok(())
    }
}

/// Dirichlet prior over the segment mix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub gamma: Vec<f64>,
}

impl PriorSpec {
    pub fn flat(m: usize) -> Self {
        PriorSpec { gamma: vec![1.0; m] }
    }

    pub fn validate(&self) -> Result<()> {
        for (j, &g) in self.gamma.iter().enumerate() {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::Prior {
                    segment: j + 1,
                    value: g,
                });
            }
        }
        Ok(())
    }
}

/// Optimizer output for one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub q_hat: Vec<f64>,
    /// Log-likelihood (MLE), squared error (least squares) or log posterior (MAP).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final objective reached from every start, in start order.
    pub start_objectives: Vec<f64>,
}

struct Likelihood<'a> {
    weights: Vec<f64>,
    total: f64,
    r: &'a DMatrix<f64>,
    floor: f64,
}

impl Likelihood<'_> {
    fn guarded_mix(&self, q: &[f64]) -> Vec<f64> {
        mix(self.r, q).into_iter().map(|s| s.max(self.floor)).collect()
    }
}

impl SimplexObjective for Likelihood<'_> {
    fn dim(&self) -> usize {
        self.r.ncols()
    }

    fn value(&self, q: &[f64]) -> f64 {
        self.guarded_mix(q)
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(s, w)| w * s.ln())
            .sum()
    }

    fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let s = self.guarded_mix(q);
        (0..self.dim())
            .map(|j| {
                (0..self.r.nrows())
                    .map(|i| self.weights[i] * self.r[(i, j)] / s[i])
                    .sum()
            })
            .collect()
    }

    fn hessian(&self, q: &[f64]) -> DMatrix<f64> {
        let s = self.guarded_mix(q);
        let m = self.dim();
        DMatrix::from_fn(m, m, |j, k| {
            -(0..self.r.nrows())
                .map(|i| self.weights[i] * self.r[(i, j)] * self.r[(i, k)] / (s[i] * s[i]))
                .sum::<f64>()
        })
    }

    fn warm_step(&self, q: &[f64], _value: f64, _step: &mut f64) -> Vec<f64> {
        let g = self.gradient(q);
        let mut next: Vec<f64> = q.iter().zip(&g).map(|(qj, gj)| qj * gj / self.total).collect();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        next
    }
}

struct Posterior<'a> {
    likelihood: Likelihood<'a>,
    gamma: &'a [f64],
}

impl SimplexObjective for Posterior<'_> {
    fn dim(&self) -> usize {
        self.likelihood.dim()
    }

    fn value(&self, q: &[f64]) -> f64 {
        let floor = self.likelihood.floor;
        self.likelihood.value(q)
            + q.iter()
                .zip(self.gamma)
                .filter(|(_, &g)| g != 1.0)
                .map(|(qj, g)| (g - 1.0) * qj.max(floor).ln())
                .sum::<f64>()
    }

    fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let floor = self.likelihood.floor;
        let mut g = self.likelihood.gradient(q);
        for j in (0..g.len()).filter(|&j| self.gamma[j] != 1.0) {
            g[j] += (self.gamma[j] - 1.0) / q[j].max(floor);
        }
        g
    }

    fn hessian(&self, q: &[f64]) -> DMatrix<f64> {
        let floor = self.likelihood.floor;
        let mut h = self.likelihood.hessian(q);
        for j in (0..q.len()).filter(|&j| self.gamma[j] != 1.0) {
            let qj = q[j].max(floor);
            h[(j, j)] -= (self.gamma[j] - 1.0) / qj / qj;
        }
        h
    }
}

/// Negated squared error, so the engine can maximize it.
struct NegSquaredError<'a> {
    p_hat: &'a [f64],
    r: &'a DMatrix<f64>,
    gram: DMatrix<f64>,
    lipschitz: f64,
}

impl<'a> NegSquaredError<'a> {
    fn new(p_hat: &'a [f64], r: &'a DMatrix<f64>) -> Self {
        let gram = r.transpose() * r;
        let top = gram.clone().symmetric_eigenvalues().max();
        NegSquaredError {
            p_hat,
            r,
            gram,
            lipschitz: 2.0 * top.max(f64::MIN_POSITIVE),
        }
    }
}

impl SimplexObjective for NegSquaredError<'_> {
    fn dim(&self) -> usize {
        self.r.ncols()
    }

    fn value(&self, q: &[f64]) -> f64 {
        -mix(self.r, q)
            .iter()
            .zip(self.p_hat)
            .map(|(s, p)| (p - s).powi(2))
            .sum::<f64>()
    }

    fn gradient(&self, q: &[f64]) -> Vec<f64> {
        let resid: Vec<f64> = mix(self.r, q)
            .iter()
            .zip(self.p_hat)
            .map(|(s, p)| p - s)
            .collect();
        (0..self.dim())
            .map(|j| 2.0 * (0..self.r.nrows()).map(|i| self.r[(i, j)] * resid[i]).sum::<f64>())
            .collect()
    }

    fn hessian(&self, _q: &[f64]) -> DMatrix<f64> {
        &self.gram * -2.0
    }

    fn warm_step(&self, q: &[f64], _value: f64, _step: &mut f64) -> Vec<f64> {
        let g = self.gradient(q);
        let trial: Vec<f64> = q
            .iter()
            .zip(&g)
            .map(|(qj, gj)| qj + gj / self.lipschitz)
            .collect();
        crate::simplex::project(&trial)
    }
}

fn check_shapes(r: &DMatrix<f64>, rows: usize) -> Result<()> {
    if r.nrows() != rows {
        return Err(Error::dim(format!(
            "r has {} rows but the observation vector has {rows} entries",
            r.nrows()
        )));
    }
    if r.ncols() == 0 {
        return Err(Error::dim("r has no columns"));
    }
    check_column_simplex(r)?;
    ensure_identifiable(r)
}

/// Deterministic start points: uniform first, then interior Dirichlet(1) draws.
fn start_points(m: usize, count: usize) -> Vec<Vec<f64>> {
    let mut starts = vec![uniform(m)];
    for k in 1..count.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let raw: Vec<f64> = (0..m).map(|_| Exp1.sample(&mut rng)).map(|v: f64| v + 1e-3).collect();
        let s: f64 = raw.iter().sum();
        starts.push(raw.into_iter().map(|v| v / s).collect());
    }
    starts
}

fn run_multistart<O: SimplexObjective>(obj: &O, settings: &OptimizerSettings) -> Fit {
    let mut best: Option<solver::Solution> = None;
    let mut start_objectives = Vec::new();
    let mut iterations = 0;
    for start in start_points(obj.dim(), settings.multistart_count) {
        let sol = maximize(obj, start, settings);
        iterations += sol.iterations;
        start_objectives.push(sol.value);
        if best.as_ref().is_none_or(|b| sol.value > b.value) {
            best = Some(sol);
        }
    }
    let best = best.expect("at least one start");
    Fit {
        q_hat: best.q,
        objective: best.value,
        iterations,
        converged: best.converged,
        start_objectives,
    }
}

/// Maximum-likelihood segment mix from unmonitored basket-type counts `x`.
pub fn mle_estimate(x: &[u64], r: &DMatrix<f64>, settings: &OptimizerSettings) -> Result<Fit> {
    let weights: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    weighted_likelihood_fit(weights, r, settings)
}

/// Minimizes the Kullback–Leibler divergence from `r q` to `p_hat`.
///
/// The returned objective is the divergence itself.
pub fn kl_minimize(p_hat: &[f64], r: &DMatrix<f64>, settings: &OptimizerSettings) -> Result<Fit> {
    let mut fit = weighted_likelihood_fit(p_hat.to_vec(), r, settings)?;
    fit.objective = kl_divergence(&fit.q_hat, p_hat, r)?;
    Ok(fit)
}

fn weighted_likelihood_fit(
    weights: Vec<f64>,
    r: &DMatrix<f64>,
    settings: &OptimizerSettings,
) -> Result<Fit> {
    settings.validate()?;
    check_shapes(r, weights.len())?;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptySample("all basket-type counts are zero".into()));
    }
    let obj = Likelihood {
        weights,
        total,
        r,
        floor: settings.floor,
    };
    let mut fit = run_multistart(&obj, settings);
    fit.objective = log_likelihood(&fit.q_hat, &obj.weights, r)?;
    Ok(fit)
}

/// Least-squares segment mix: minimizes `sum_i (p_hat_i - (r q)_i)^2` over the simplex.
pub fn ls_estimate(p_hat: &[f64], r: &DMatrix<f64>, settings: &OptimizerSettings) -> Result<Fit> {
    settings.validate()?;
    check_shapes(r, p_hat.len())?;
    let obj = NegSquaredError::new(p_hat, r);
    let mut fit = run_multistart(&obj, settings);
    fit.objective = squared_error(&fit.q_hat, p_hat, r)?;
    fit.start_objectives.iter_mut().for_each(|v| *v = -*v);
    Ok(fit)
}

/// Maximum a posteriori segment mix under a Dirichlet prior.
///
/// Concentrations in `(0, 1)` make the posterior unbounded at the simplex
/// boundary; the returned point is then only boundary-adjacent and governed by
/// the logarithm floor.
pub fn map_estimate(
    x: &[u64],
    r: &DMatrix<f64>,
    prior: &PriorSpec,
    settings: &OptimizerSettings,
) -> Result<Fit> {
    settings.validate()?;
    prior.validate()?;
    check_shapes(r, x.len())?;
    if prior.gamma.len() != r.ncols() {
        return Err(Error::dim(format!(
            "{} prior concentrations for {} segments",
            prior.gamma.len(),
            r.ncols()
        )));
    }
    let weights: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptySample("all basket-type counts are zero".into()));
    }
    let obj = Posterior {
        likelihood: Likelihood {
            weights,
            total,
            r,
            floor: settings.floor,
        },
        gamma: &prior.gamma,
    };
    let mut fit = run_multistart(&obj, settings);
    fit.objective = log_posterior(&fit.q_hat, &obj.likelihood.weights, r, &prior.gamma)?;
    Ok(fit)
}

/// One mixture-weight EM update `q_j <- q_j / a * sum_i x_i r_ij / (r q)_i`.
pub fn em_update(q: &[f64], x: &[u64], r: &DMatrix<f64>) -> Vec<f64> {
    let a: f64 = x.iter().map(|&v| v as f64).sum();
    let p = mix(r, q);
    (0..q.len())
        .map(|j| {
            let s: f64 = (0..r.nrows())
                .filter(|&i| x[i] > 0)
                .map(|i| x[i] as f64 * r[(i, j)] / p[i])
                .sum();
            q[j] * s / a
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn benchmark_r() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            6,
            3,
            &[
                0.4, 0.1, 0.1, 0.2, 0.1, 0.1, 0.1, 0.4, 0.1, 0.1, 0.2, 0.1, 0.1, 0.1, 0.4, 0.1,
                0.1, 0.2,
            ],
        )
    }

    fn exact_counts() -> Vec<u64> {
        // 10^6 * (0.16, 0.12, 0.16, 0.12, 0.28, 0.16)
        vec![160_000, 120_000, 160_000, 120_000, 280_000, 160_000]
    }

    #[test]
    fn mle_recovers_exact_mixture() {
        let fit = mle_estimate(&exact_counts(), &benchmark_r(), &OptimizerSettings::default())
            .unwrap();
        assert!(fit.converged);
        for (a, b) in fit.q_hat.iter().zip([0.2, 0.2, 0.6]) {
            assert!((a - b).abs() < 1e-6, "{:?}", fit.q_hat);
        }
    }

    #[test]
    fn mle_identity_is_closed_form() {
        let r = DMatrix::identity(3, 3);
        let x = [5, 0, 15];
        let fit = mle_estimate(&x, &r, &OptimizerSettings::default()).unwrap();
        for (a, b) in fit.q_hat.iter().zip([0.25, 0.0, 0.75]) {
            assert!((a - b).abs() < 1e-9, "{:?}", fit.q_hat);
        }
        assert!(fit.converged);
    }

    #[test]
    fn mle_errors() {
        let r = benchmark_r();
        let settings = OptimizerSettings::default();
        assert!(matches!(
            mle_estimate(&[0; 6], &r, &settings),
            Err(Error::EmptySample(_))
        ));
        let dependent = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!(matches!(
            mle_estimate(&[1, 1], &dependent, &settings),
            Err(Error::Identifiability { .. })
        ));
        assert!(matches!(mle_estimate(&[1, 1], &r, &settings), Err(Error::Dimension(_))));
    }

    #[test]
    fn mle_reports_non_convergence() {
        let settings = OptimizerSettings {
            max_iterations: 1,
            tolerance: 1e-14,
            ..OptimizerSettings::default()
        };
        let fit = mle_estimate(&[10, 20, 30, 40, 50, 60], &benchmark_r(), &settings).unwrap();
        assert!(!fit.converged);
    }

    #[test]
    fn ls_consistent_and_identity() {
        let r = benchmark_r();
        let p: Vec<f64> = mix(&r, &[0.5, 0.3, 0.2]);
        let fit = ls_estimate(&p, &r, &OptimizerSettings::default()).unwrap();
        assert!(fit.objective < 1e-20);
        for (a, b) in fit.q_hat.iter().zip([0.5, 0.3, 0.2]) {
            assert!((a - b).abs() < 1e-9);
        }
        let id = DMatrix::identity(3, 3);
        let fit = ls_estimate(&[0.1, 0.6, 0.3], &id, &OptimizerSettings::default()).unwrap();
        for (a, b) in fit.q_hat.iter().zip([0.1, 0.6, 0.3]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn map_matches_dirichlet_posterior_mode() {
        let id = DMatrix::identity(2, 2);
        let prior = PriorSpec { gamma: vec![3.0, 1.0] };
        let fit = map_estimate(&[1, 1], &id, &prior, &OptimizerSettings::default()).unwrap();
        // mode of Dirichlet(gamma + x) = (gamma_j + x_j - 1) / (sum - m)
        assert!((fit.q_hat[0] - 0.75).abs() < 1e-9, "{:?}", fit.q_hat);
        assert!((fit.q_hat[1] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn map_flat_prior_is_mle() {
        let r = benchmark_r();
        let x = [120, 80, 200, 50, 300, 90];
        let s = OptimizerSettings::default();
        let mle = mle_estimate(&x, &r, &s).unwrap();
        let map = map_estimate(&x, &r, &PriorSpec::flat(3), &s).unwrap();
        for (a, b) in mle.q_hat.iter().zip(&map.q_hat) {
            assert!((a - b).abs() < 1e-6);
        }
        // flat Dirichlet on 3 categories has density 1 / B(1,1,1) = 2
        assert!((map.objective - (mle.objective + 2f64.ln())).abs() < 1e-6);
    }

    #[test]
    fn map_flat_prior_leaves_the_boundary() {
        // the optimum has a small interior second share; warm starts land on q_2 = 0
        let r = DMatrix::from_row_slice(
            6,
            3,
            &[
                0.15570115222411082, 0.2438184103137083, 0.09023698070953651, //
                0.006474671134205931, 0.21188078438970845, 0.11255406787165236, //
                0.08377451908036587, 0.0503372714675518, 0.5171859429013248, //
                0.27789734725322346, 0.2250165868771378, 0.17125444586275002, //
                0.15048383828767628, 0.24863197600593712, 0.0392080808481606, //
                0.3256684720204177, 0.020314970945956426, 0.06956048180657558,
            ],
        );
        let x = [240, 40, 250, 448, 221, 485];
        let s = OptimizerSettings::default();
        let mle = mle_estimate(&x, &r, &s).unwrap();
        let map = map_estimate(&x, &r, &PriorSpec::flat(3), &s).unwrap();
        assert!(mle.converged && map.converged);
        assert!(map.q_hat[1] > 1e-3);
        for (a, b) in mle.q_hat.iter().zip(&map.q_hat) {
            assert!((a - b).abs() < 1e-6, "{:?} vs {:?}", mle.q_hat, map.q_hat);
        }
    }

    #[test]
    fn map_rejects_bad_prior() {
        let r = benchmark_r();
        let prior = PriorSpec { gamma: vec![1.0, 0.0, 2.0] };
        assert!(matches!(
            map_estimate(&[1; 6], &r, &prior, &OptimizerSettings::default()),
            Err(Error::Prior { segment: 2, .. })
        ));
    }

    #[test]
    fn em_update_is_stationary_at_optimum() {
        let r = benchmark_r();
        let x = [120, 80, 200, 50, 300, 90];
        let fit = mle_estimate(&x, &r, &OptimizerSettings::default()).unwrap();
        let next = em_update(&fit.q_hat, &x, &r);
        let change = next
            .iter()
            .zip(&fit.q_hat)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(change < 1e-10, "{change}");
    }

    #[test]
    fn boundary_optimum_is_found() {
        // counts concentrated on segment 3's dominant basket types
        let r = benchmark_r();
        let x = [0, 0, 0, 0, 500, 250];
        let fit = mle_estimate(&x, &r, &OptimizerSettings::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.q_hat[0] == 0.0 && fit.q_hat[1] == 0.0, "{:?}", fit.q_hat);
    }
}
