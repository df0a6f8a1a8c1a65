//! Simplex-constrained maximization engine shared by all estimators.
//!
//! Optimization runs in two phases. A first-order warm start (the mixture-weight
//! EM update for likelihood objectives, projected gradient otherwise) brings the
//! iterate close to the optimum. An active-set Newton method then polishes it on
//! the current face of the simplex, dropping coordinates that hit zero and
//! releasing bound coordinates whose gradient exceeds the face multiplier.
//! Convergence is certified by the Frank–Wolfe gap `max_j g_j - g'q`, an upper
//! bound on suboptimality for concave objectives.

use nalgebra::{DMatrix, DVector};

use super::OptimizerSettings;
use crate::simplex::project;

/// Smooth objective to be maximized over the probability simplex.
pub(crate) trait SimplexObjective {
    fn dim(&self) -> usize;
    fn value(&self, q: &[f64]) -> f64;
    fn gradient(&self, q: &[f64]) -> Vec<f64>;
    fn hessian(&self, q: &[f64]) -> DMatrix<f64>;

    /// One warm-start step. The default is a backtracking projected-gradient step.
    fn warm_step(&self, q: &[f64], value: f64, step: &mut f64) -> Vec<f64> {
        projected_gradient_step(self, q, value, step)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Solution {
    pub q: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_BACKTRACKS: usize = 60;

fn projected_gradient_step<O: SimplexObjective + ?Sized>(
    obj: &O,
    q: &[f64],
    value: f64,
    step: &mut f64,
) -> Vec<f64> {
    let g = obj.gradient(q);
    let mut t = *step;
    for _ in 0..MAX_BACKTRACKS {
        let trial: Vec<f64> = q.iter().zip(&g).map(|(qi, gi)| qi + t * gi).collect();
        let cand = project(&trial);
        let moved: f64 = cand.iter().zip(q).zip(&g).map(|((c, qi), gi)| gi * (c - qi)).sum();
        let dist2: f64 = cand.iter().zip(q).map(|(c, qi)| (c - qi).powi(2)).sum();
        let v = obj.value(&cand);
        if dist2 == 0.0 {
            return cand;
        }
        // sufficient-ascent condition along the projection arc
        if v >= value + ARMIJO * moved.min(dist2 / t) {
            *step = t * 2.0;
            return cand;
        }
        t *= BACKTRACK;
    }
    *step = t;
    q.to_vec()
}

/// Frank–Wolfe duality gap at `q`.
pub(crate) fn frank_wolfe_gap(g: &[f64], q: &[f64]) -> f64 {
    let inner: f64 = g.iter().zip(q).map(|(a, b)| a * b).sum();
    g.iter().copied().fold(f64::NEG_INFINITY, f64::max) - inner
}

fn gap_tolerance(settings: &OptimizerSettings, value: f64) -> f64 {
    settings.tolerance * value.abs().max(1.0)
}

pub(crate) fn maximize<O: SimplexObjective>(
    obj: &O,
    start: Vec<f64>,
    settings: &OptimizerSettings,
) -> Solution {
    let warm_budget = (settings.max_iterations / 2).clamp(1, 500);
    let warm_tol = settings.tolerance.sqrt();
    let mut q = start;
    let mut value = obj.value(&q);
    let mut iterations = 0;
    let mut step = 1.0;

    while iterations < warm_budget {
        let next = obj.warm_step(&q, value, &mut step);
        let next_value = obj.value(&next);
        iterations += 1;
        if !(next_value >= value) {
            break;
        }
        let change = (next_value - value).abs();
        q = next;
        value = next_value;
        if change <= warm_tol * value.abs().max(1.0) {
            break;
        }
    }

    let mut active: Vec<bool> = q.iter().map(|&v| v > 0.0).collect();
    let mut forbidden = vec![false; q.len()];
    let mut polish_step = 1.0;
    loop {
        if iterations >= settings.max_iterations {
            let g = obj.gradient(&q);
            let converged = frank_wolfe_gap(&g, &q) <= gap_tolerance(settings, value);
            return Solution { q, value, iterations, converged };
        }
        iterations += 1;
        let g = obj.gradient(&q);
        match newton_step(obj, &q, value, &g, &active, settings) {
            NewtonOutcome::Moved { q: next, value: v, dropped } => {
                q = next;
                value = v;
                for j in dropped {
                    active[j] = false;
                }
                forbidden.iter_mut().for_each(|f| *f = false);
            }
            NewtonOutcome::Blocked(j) => {
                // a released coordinate whose Newton direction points outward still admits projected ascent
                let next = projected_gradient_step(obj, &q, value, &mut polish_step);
                let next_value = obj.value(&next);
                if next_value > value {
                    q = next;
                    value = next_value;
                    active = q.iter().map(|&v| v > 0.0).collect();
                    forbidden.iter_mut().for_each(|f| *f = false);
                } else {
                    active[j] = false;
                    forbidden[j] = true;
                }
            }
            NewtonOutcome::Stationary => {
                let free: Vec<usize> = (0..q.len()).filter(|&j| active[j]).collect();
                let weight: f64 = free.iter().map(|&j| q[j]).sum();
                let lambda = free.iter().map(|&j| q[j] * g[j]).sum::<f64>() / weight;
                let tol = gap_tolerance(settings, value);
                let release = (0..q.len())
                    .filter(|&j| !active[j] && !forbidden[j] && g[j] - lambda > tol)
                    .max_by(|&a, &b| g[a].total_cmp(&g[b]));
                match release {
                    Some(j) => active[j] = true,
                    None => {
                        let converged = frank_wolfe_gap(&g, &q) <= tol;
                        return Solution { q, value, iterations, converged };
                    }
                }
            }
        }
    }
}

enum NewtonOutcome {
    Moved {
        q: Vec<f64>,
        value: f64,
        dropped: Vec<usize>,
    },
    /// A coordinate sitting at zero blocks the step immediately.
    Blocked(usize),
    Stationary,
}

fn newton_step<O: SimplexObjective>(
    obj: &O,
    q: &[f64],
    value: f64,
    g: &[f64],
    active: &[bool],
    settings: &OptimizerSettings,
) -> NewtonOutcome {
    let free: Vec<usize> = (0..q.len()).filter(|&j| active[j]).collect();
    let s = free.len();
    if s <= 1 {
        return NewtonOutcome::Stationary;
    }
    let h = obj.hessian(q);
    // null-space basis of sum(d) = 0 on the free set: columns e_k - e_last
    let last = free[s - 1];
    let reduced_grad = DVector::from_fn(s - 1, |k, _| g[free[k]] - g[last]);
    let neg_h = DMatrix::from_fn(s - 1, s - 1, |k, l| {
        let (a, b) = (free[k], free[l]);
        -(h[(a, b)] - h[(a, last)] - h[(last, b)] + h[(last, last)])
    });
    let scale = neg_h.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut mu = 0.0;
    let w = loop {
        let mut m = neg_h.clone();
        for k in 0..s - 1 {
            m[(k, k)] += mu;
        }
        if let Some(chol) = m.cholesky() {
            break chol.solve(&reduced_grad);
        }
        mu = if mu == 0.0 { 1e-12 * scale.max(1e-300) } else { mu * 10.0 };
        if !mu.is_finite() {
            return NewtonOutcome::Stationary;
        }
    };
    let mut d = vec![0.0; q.len()];
    for k in 0..s - 1 {
        d[free[k]] = w[k];
        d[last] -= w[k];
    }
    let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
    let scale = value.abs().max(1.0);
    let step_size = d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    // the face is solved once its own Frank–Wolfe gap is well inside the certificate
    let qg: f64 = free.iter().map(|&j| q[j] * g[j]).sum::<f64>() / free.iter().map(|&j| q[j]).sum::<f64>();
    let face_gap = free.iter().map(|&j| g[j] - qg).fold(0.0f64, f64::max);
    if face_gap <= 1e-2 * gap_tolerance(settings, value) || !(slope > 0.0) || step_size <= 1e-15 {
        return NewtonOutcome::Stationary;
    }
    // inside the quadratic region rounding dominates the predicted ascent
    let terminal = slope <= settings.tolerance * scale;

    // largest step keeping every coordinate non-negative
    let mut alpha_max = f64::INFINITY;
    let mut blocking = None;
    for &j in &free {
        if d[j] < 0.0 {
            let t = -q[j] / d[j];
            if t < alpha_max {
                alpha_max = t;
                blocking = Some(j);
            }
        }
    }
    if let (Some(j), true) = (blocking, alpha_max <= 0.0) {
        return NewtonOutcome::Blocked(j);
    }
    let mut alpha = alpha_max.min(1.0);
    for _ in 0..MAX_BACKTRACKS {
        let hits_bound = blocking.is_some() && alpha >= alpha_max;
        let mut cand: Vec<f64> = q.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
        let mut dropped = Vec::new();
        if hits_bound {
            dropped = free
                .iter()
                .copied()
                .filter(|&j| cand[j] <= 1e-15 * q[j].max(1e-300) || Some(j) == blocking)
                .collect();
        }
        for j in &dropped {
            cand[*j] = 0.0;
        }
        for v in cand.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let total: f64 = cand.iter().sum();
        for v in cand.iter_mut() {
            *v /= total;
        }
        let v = obj.value(&cand);
        let accept = v >= value + ARMIJO * alpha * slope
            || (terminal && v >= value - 4.0 * f64::EPSILON * scale);
        if v.is_finite() && accept {
            return NewtonOutcome::Moved {
                q: cand,
                value: v,
                dropped,
            };
        }
        alpha *= BACKTRACK;
    }
    NewtonOutcome::Stationary
}
