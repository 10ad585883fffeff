//! The dependent-Bernoulli model of the delta statistics.
//!
//! Independent `X_q ~ Bernoulli(1/q)` model divisibility of a random integer
//! by each prime `q`; `B_p = X_p * prod_{p < q <= p^(e^z)} (1 - X_q)` models
//! `delta_{p,z}`, and `S_N = sum_{p <= N} B_p` models the truncated delta
//! sum. `B_p` and `B_q` are dependent exactly when `q` falls in the gap
//! interval of `p` (a *linked* pair), in which case `E[B_p B_q] = 0`.
//!
//! This module computes the exact finite quantities:
//!
//! ```text
//! h_p  = (1/p) prod_{p < q <= p^(e^z)} (1 - 1/q)
//! c_N  = sum_{p <= N} h_p
//! s_N^2 = sum_{p <= N} h_p (1 - h_p) - 2 sum_{p < q <= min(N, p^(e^z))} h_p h_q
//! ```
//!
//! Submodules add Monte Carlo sampling of `S_N`, exact enumeration of the
//! joint law of `(B_p)_{p <= N}`, and Stein diagnostics built on it.

mod enumeration;
mod sampling;
mod stein;

pub use enumeration::{exact_moments_by_enumeration, Atom, ExactMoments, JointLaw, LawConstruction, MAX_ATOMS};
pub use sampling::{
    monte_carlo, sample_s_n, AllSelected, BernoulliSelector, FixedSelection, MonteCarloResult,
    NoneSelected, PrimeSelector,
};
pub use stein::{stein_diagnostics, stein_from_law, SteinGridPoint, SteinReport, STEIN_GRID};

use num::{BigInt, BigRational, One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::GapParameters;
use crate::primes::PrimeTable;
use crate::sum::CompensatedSum;

/// How `ln prod (1 - 1/q)` is evaluated past the end of the prime table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailPolicy {
    /// The table must cover every gap interval; otherwise out-of-range.
    #[default]
    Exact,
    /// Beyond the table limit `L`, `sum_{L < q <= x} ln(1 - 1/q)` is replaced
    /// by Mertens' estimate `-(ln ln x - ln ln L)`. Absolute error in the log
    /// is `O(1 / ln^2 L)`; used only for asymptotic comparisons at large N.
    MertensExtension,
}

/// `h_p = E[B_p]`.
pub fn model_h(p: u64, params: &GapParameters, table: &PrimeTable) -> Result<f64> {
    let range = table.primes_in_gap_interval(p, params)?;
    Ok(table.log1m_sum(range).exp() / p as f64)
}

fn model_h_with_tail(
    idx: usize,
    params: &GapParameters,
    table: &PrimeTable,
    tail: TailPolicy,
) -> Result<f64> {
    let p = table.primes()[idx];
    match tail {
        TailPolicy::Exact => model_h(p, params, table),
        TailPolicy::MertensExtension => {
            let t = params.threshold(p);
            if t <= table.limit() {
                return model_h(p, params, table);
            }
            let inside = table.log1m_sum(idx + 1..table.len());
            let lnln_limit = (table.limit() as f64).ln().ln();
            let lnln_end = params.z() + (p as f64).ln().ln();
            Ok((inside - (lnln_end - lnln_limit)).exp() / p as f64)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelPrediction {
    #[serde(rename = "N")]
    pub cutoff: u64,
    pub z: f64,
    /// Primes `p <= N`.
    #[serde(skip)]
    pub primes: Vec<u64>,
    /// `h[i] = E[B_{primes[i]}]`.
    #[serde(skip)]
    pub h: Vec<f64>,
    pub c_n: f64,
    pub s2_n: f64,
    pub asym_mean: f64,
    pub asym_var: f64,
}

impl ModelPrediction {
    pub fn h_of(&self, p: u64) -> Option<f64> {
        self.primes.binary_search(&p).ok().map(|i| self.h[i])
    }
}

/// Asymptotic mean `e^{-z} ln ln N`.
pub fn asymptotic_mean(n: f64, params: &GapParameters) -> f64 {
    (-params.z()).exp() * n.ln().ln()
}

/// Asymptotic variance `(1 - 2z e^{-z}) e^{-z} ln ln N`.
pub fn asymptotic_variance(n: f64, params: &GapParameters) -> f64 {
    let e = (-params.z()).exp();
    (1.0 - 2.0 * params.z() * e) * e * n.ln().ln()
}

/// Exact `c_N` and `s_N^2` from the finite identities, in `O(pi(N))`.
pub fn model_mean_and_variance(
    n: u64,
    params: &GapParameters,
    table: &PrimeTable,
) -> Result<ModelPrediction> {
    model_mean_and_variance_with(n, params, table, TailPolicy::Exact)
}

pub fn model_mean_and_variance_with(
    n: u64,
    params: &GapParameters,
    table: &PrimeTable,
    tail: TailPolicy,
) -> Result<ModelPrediction> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("N must be >= 2, got {n}")));
    }
    if n > table.limit() {
        return Err(Error::OutOfRange(format!(
            "N = {n} exceeds prime table limit {}",
            table.limit()
        )));
    }
    let count = table.count_le(n);
    let primes = table.primes()[..count].to_vec();
    let h = (0..count)
        .map(|i| model_h_with_tail(i, params, table, tail))
        .collect::<Result<Vec<f64>>>()?;

    let mut h_prefix = Vec::with_capacity(count);
    let mut acc = CompensatedSum::new();
    for &x in &h {
        acc.add(x);
        h_prefix.push(acc.value());
    }
    let h_range = |a: usize, b: usize| -> f64 {
        if a >= b {
            0.0
        } else if a == 0 {
            h_prefix[b - 1]
        } else {
            h_prefix[b - 1] - h_prefix[a - 1]
        }
    };

    let mut var = CompensatedSum::new();
    for (i, (&p, &hp)) in primes.iter().zip(&h).enumerate() {
        var.add(hp * (1.0 - hp));
        // linked partners q in (p, min(N, p^(e^z))]
        let t = params.threshold(p).min(n);
        let end = primes.partition_point(|&q| q <= t);
        var.add(-2.0 * hp * h_range(i + 1, end));
    }
    let nf = n as f64;
    Ok(ModelPrediction {
        cutoff: n,
        z: params.z(),
        primes,
        h,
        c_n: acc.value(),
        s2_n: var.value(),
        asym_mean: asymptotic_mean(nf, params),
        asym_var: asymptotic_variance(nf, params),
    })
}

/// `h_p` as an exact rational.
pub fn exact_h(p: u64, params: &GapParameters, table: &PrimeTable) -> Result<BigRational> {
    let range = table.primes_in_gap_interval(p, params)?;
    let mut num = BigInt::one();
    let mut den = BigInt::from(p);
    for &q in &table.primes()[range] {
        num *= q - 1;
        den *= q;
    }
    Ok(BigRational::new(num, den))
}

/// `c_N` and `s_N^2` from the same finite identities, in exact rationals.
pub fn exact_mean_and_variance(
    n: u64,
    params: &GapParameters,
    table: &PrimeTable,
) -> Result<(BigRational, BigRational)> {
    let count = table.count_le(n);
    let primes = &table.primes()[..count];
    let h = primes
        .iter()
        .map(|&p| exact_h(p, params, table))
        .collect::<Result<Vec<_>>>()?;
    let mut mean = BigRational::zero();
    let mut var = BigRational::zero();
    let two = BigRational::from_integer(2.into());
    for (i, &p) in primes.iter().enumerate() {
        mean += &h[i];
        var += &h[i] * (BigRational::one() - &h[i]);
        for j in i + 1..count {
            if params.in_gap_interval(p, primes[j]) {
                var -= &two * &h[i] * &h[j];
            }
        }
    }
    Ok((mean, var))
}

pub(crate) fn rational_to_f64(x: &BigRational) -> f64 {
    use num::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}
