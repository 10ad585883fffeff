//! Gap counting between consecutive prime divisors, its dependent-Bernoulli
//! model, and the moment diagnostics that compare the two.

// `!(x > 0.0)` is the intended way to reject NaN alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gap_counter;
pub mod model;
pub mod params;
pub mod policy;
pub mod primes;
pub mod records;
pub mod sieve_check;
pub mod stats;
pub mod sum;

pub use error::{Error, Result};
pub use gap_counter::{
    delta_sum_of, intro_gap_count, segmented_sweep, DivisorList, MomentAccumulator, Statistic,
    SweepConfig, SweepResult,
};
pub use model::{
    exact_moments_by_enumeration, model_h, model_mean_and_variance, monte_carlo, sample_s_n,
    stein_diagnostics, JointLaw, ModelPrediction, SteinReport,
};
pub use params::GapParameters;
pub use policy::CutoffPolicy;
pub use primes::PrimeTable;
pub use sieve_check::{joint_empirical, joint_predicted, JointDeltaQuery};
pub use stats::{gaussian_moment, ks_distance, normal_cdf, recenter, Histogram};
