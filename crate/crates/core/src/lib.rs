//! Estimation of the number and segment distribution of unmonitored retail
//! customers from basket-type mixtures.
//!
//! Monitored (loyalty-card) transactions reveal, per customer segment, the
//! distribution of basket types and the mean visit frequency. Unmonitored
//! receipts only reveal basket types; their segment mix is recovered by
//! simplex-constrained estimation and converted into a unique-customer count.

pub mod clustering;
pub mod error;
pub mod estimators;
pub mod model;
pub mod pipeline;
pub mod simplex;
pub mod simulation;
pub mod stats;

pub use error::{Error, ErrorKind, Result};
pub use estimators::{
    kl_divergence, log_likelihood, ls_estimate, map_estimate, mle_estimate, Fit,
    OptimizerSettings, PriorSpec,
};
pub use model::{
    estimate_monitored, mixture_probabilities, naive_estimate, square_invert_estimate,
    tabulate_counts, unique_customers, CountsTable, EstimationResult, EstimatorKind,
    ProbabilityModel,
};
