//! Objective functions over the segment-mix simplex.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn check_dims(q: &[f64], weights: &[f64], r: &DMatrix<f64>) -> Result<()> {
    if r.ncols() != q.len() || r.nrows() != weights.len() {
        return Err(Error::dim(format!(
            "r is {}x{} but |q| = {} and |x| = {}",
            r.nrows(),
            r.ncols(),
            q.len(),
            weights.len()
        )));
    }
    Ok(())
}

pub(crate) fn mix(r: &DMatrix<f64>, q: &[f64]) -> Vec<f64> {
    (0..r.nrows())
        .map(|i| (0..r.ncols()).map(|j| r[(i, j)] * q[j]).sum())
        .collect()
}

/// Multinomial log-likelihood `sum_i x_i ln((r q)_i)`, dropping the
/// multinomial coefficient.
///
/// Returns `f64::NEG_INFINITY` when a basket type with `x_i > 0` has zero
/// probability under `q`.
pub fn log_likelihood(q: &[f64], x: &[f64], r: &DMatrix<f64>) -> Result<f64> {
    check_dims(q, x, r)?;
    let p = mix(r, q);
    let mut total = 0.0;
    for (xi, pi) in x.iter().zip(&p) {
        if *xi > 0.0 {
            if *pi <= 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            total += xi * pi.ln();
        }
    }
    Ok(total)
}

/// Kullback–Leibler divergence from `r q` to `p_hat`. Terms with `p_hat_i = 0` vanish.
pub fn kl_divergence(q: &[f64], p_hat: &[f64], r: &DMatrix<f64>) -> Result<f64> {
    check_dims(q, p_hat, r)?;
    let p = mix(r, q);
    let mut total = 0.0;
    for (ph, pi) in p_hat.iter().zip(&p) {
        if *ph > 0.0 {
            if *pi <= 0.0 {
                return Ok(f64::INFINITY);
            }
            total += ph * (ph / pi).ln();
        }
    }
    Ok(total)
}

/// Squared error `sum_i (p_hat_i - (r q)_i)^2`.
pub fn squared_error(q: &[f64], p_hat: &[f64], r: &DMatrix<f64>) -> Result<f64> {
    check_dims(q, p_hat, r)?;
    Ok(mix(r, q)
        .iter()
        .zip(p_hat)
        .map(|(pi, ph)| (ph - pi).powi(2))
        .sum())
}

/// Log of the multivariate beta function `B(gamma)`.
pub fn ln_multivariate_beta(gamma: &[f64]) -> f64 {
    let total: f64 = gamma.iter().sum();
    gamma.iter().map(|&g| libm::lgamma(g)).sum::<f64>() - libm::lgamma(total)
}

/// Log posterior under a Dirichlet(`gamma`) prior, including the `-ln B(gamma)` constant.
pub fn log_posterior(q: &[f64], x: &[f64], r: &DMatrix<f64>, gamma: &[f64]) -> Result<f64> {
    if gamma.len() != q.len() {
        return Err(Error::dim(format!(
            "{} concentration values for {} segments",
            gamma.len(),
            q.len()
        )));
    }
    let ll = log_likelihood(q, x, r)?;
    let mut prior = -ln_multivariate_beta(gamma);
    for (qj, gj) in q.iter().zip(gamma) {
        if *gj != 1.0 {
            prior += (gj - 1.0) * qj.ln();
        }
    }
    Ok(ll + prior)
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

    #[test]
    fn likelihood_identity_case() {
        let id = DMatrix::identity(2, 2);
        let v = log_likelihood(&[0.5, 0.5], &[1.0, 1.0], &id).unwrap();
        assert!((v - (-1.386294361119891)).abs() < 1e-12);
        assert_eq!(
            log_likelihood(&[0.0, 1.0], &[1.0, 0.0], &id).unwrap(),
            f64::NEG_INFINITY
        );
        assert!(log_likelihood(&[1.0], &[1.0, 0.0], &id).is_err());
    }

    #[test]
    fn likelihood_matches_scalar_sum_on_benchmark() {
        let r = benchmark_r();
        let p = [0.16, 0.12, 0.16, 0.12, 0.28, 0.16];
        let x: Vec<f64> = p.iter().map(|v| v * 1e6).collect();
        // independent scalar evaluation from the hand-computed mixture
        let expected: f64 = x.iter().zip(&p).map(|(xi, pi)| xi * pi.ln()).sum();
        let got = log_likelihood(&[0.2, 0.2, 0.6], &x, &r).unwrap();
        assert!((got - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn kl_examples() {
        let r = benchmark_r();
        let q = [0.3, 0.3, 0.4];
        let p = mix(&r, &q);
        assert!(kl_divergence(&q, &p, &r).unwrap().abs() < 1e-15);

        let id = DMatrix::identity(2, 2);
        let v = kl_divergence(&[0.25, 0.75], &[0.5, 0.5], &id).unwrap();
        assert!((v - 0.143841036225890).abs() < 1e-12);
    }

    #[test]
    fn kl_and_likelihood_are_linked() {
        let r = benchmark_r();
        let p_hat = [0.1, 0.2, 0.15, 0.05, 0.3, 0.2];
        let a = 12_345.0;
        let x: Vec<f64> = p_hat.iter().map(|p| p * a).collect();
        let entropy_term: f64 = p_hat.iter().map(|p| p * p.ln()).sum();
        for q in [[0.2, 0.3, 0.5], [0.6, 0.2, 0.2], [1.0 / 3.0; 3]] {
            let kl = kl_divergence(&q, &p_hat, &r).unwrap();
            let ll = log_likelihood(&q, &x, &r).unwrap();
            assert!((kl - (entropy_term - ll / a)).abs() < 1e-12);
        }
    }

    #[test]
    fn multivariate_beta_of_ones() {
        // B(1, 1, 1) = Gamma(1)^3 / Gamma(3) = 1/2
        assert!((ln_multivariate_beta(&[1.0, 1.0, 1.0]) - 0.5f64.ln()).abs() < 1e-14);
    }
}
