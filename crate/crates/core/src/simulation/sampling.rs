//! Random draws used by the simulation study.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma};

use crate::error::{Error, Result};

/// Multinomial counts via sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized>(total: u64, probabilities: &[f64], rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probabilities.len()];
    let mut remaining = total;
    let mut mass: f64 = probabilities.iter().sum();
    for (i, &p) in probabilities.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probabilities.len() {
            counts[i] = remaining;
            break;
        }
        let cond = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, cond)
            .expect("conditional probability lies in [0, 1]")
            .sample(rng);
        counts[i] = draw;
        remaining -= draw;
        mass -= p;
    }
    counts
}

/// One Dirichlet(`concentration`) draw via normalized unit-scale gamma variates.
pub fn sample_dirichlet<R: Rng + ?Sized>(concentration: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut draws = Vec::with_capacity(concentration.len());
    for &c in concentration {
        let gamma = Gamma::new(c, 1.0)
            .map_err(|_| Error::input(format!("invalid Dirichlet concentration {c}")))?;
        draws.push(gamma.sample(rng));
    }
    let total: f64 = draws.iter().sum();
    if !(total > 0.0) {
        return Err(Error::input("Dirichlet draw underflowed to zero"));
    }
    Ok(draws.into_iter().map(|g| g / total).collect())
}

/// Replaces each column `r0_j` with a draw from Dirichlet(`alpha_r * r0_j`).
pub fn dirichlet_perturb_columns<R: Rng + ?Sized>(
    r0: &DMatrix<f64>,
    alpha_r: f64,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if !(alpha_r > 0.0) {
        return Err(Error::input(format!("alpha_r must be positive, got {alpha_r}")));
    }
    if r0.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::input("column perturbation needs strictly positive entries"));
    }
    let mut r = r0.clone();
    for j in 0..r0.ncols() {
        let conc: Vec<f64> = r0.column(j).iter().map(|v| alpha_r * v).collect();
        let draw = sample_dirichlet(&conc, rng)?;
        for (i, v) in draw.into_iter().enumerate() {
            r[(i, j)] = v;
        }
    }
    Ok(r)
}

/// Redistributes the total `sum(f0)` across segments by a Dirichlet(`alpha_f * f0 / sum(f0)`) draw.
pub fn dirichlet_perturb_frequencies<R: Rng + ?Sized>(
    f0: &[f64],
    alpha_f: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(alpha_f > 0.0) {
        return Err(Error::input(format!("alpha_f must be positive, got {alpha_f}")));
    }
    if f0.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::input("frequency perturbation needs positive frequencies"));
    }
    let total: f64 = f0.iter().sum();
    let conc: Vec<f64> = f0.iter().map(|v| alpha_f * v / total).collect();
    Ok(sample_dirichlet(&conc, rng)?.into_iter().map(|w| w * total).collect())
}
