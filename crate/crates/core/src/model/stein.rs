//! Stein normal-approximation diagnostics for `S_N`, evaluated exactly on
//! the enumerated joint law.
//!
//! With `Y_p = B_p - h_p`, `Z_p = Y_p / s_N` and the neighbourhoods
//! `T_p = {q <= N prime : p^(e^-z) <= q <= p^(e^z)}`, the bound reads
//!
//! ```text
//! |P[S_N <= c_N + b s_N] - Phi(b)| <= 4 (Psi_1 + Psi_2 + Psi_3)
//! Psi_1   = E[sum_t |E[Z_t | Z_s, s not in T_t]|]
//! Psi_2^2 = E[sum_t |Z_t| (sum_{s in T_t} Z_s)^2]
//! Psi_3^2 = E[(sum_t sum_{s in T_t} (Z_t Z_s - E[Z_t Z_s]))^2]
//! ```
//!
//! `Psi_1` vanishes because `Z_t` is independent of `{Z_s : s not in T_t}`;
//! it is reported as 0 and also recomputed from the law as a check.

use std::collections::HashMap;

use num::{BigRational, Signed, Zero};
use serde::{Deserialize, Serialize};

use super::enumeration::{bit, JointLaw};
use crate::error::{Error, Result};
use crate::params::GapParameters;
use crate::primes::PrimeTable;
use crate::stats::{ks_distance_weighted, normal_cdf};
use super::rational_to_f64;

/// Grid of `b` values: `-3.0, -2.9, ..., 3.0`.
pub const STEIN_GRID: (i32, i32) = (-30, 30);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteinGridPoint {
    pub b: f64,
    pub cdf: f64,
    pub phi: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteinReport {
    #[serde(rename = "N")]
    pub cutoff: u64,
    pub z: f64,
    pub c_n: f64,
    pub s2_n: f64,
    /// Always 0: the neighbourhoods capture all dependence.
    pub psi1: f64,
    /// `Psi_1` recomputed from conditional expectations on the law.
    pub psi1_enumerated: f64,
    pub psi2: f64,
    pub psi3: f64,
    /// `E[sum_t Z_t sum_{s in T_t} Z_s]`; must be exactly 1.
    pub normalization: f64,
    pub normalization_exact: bool,
    pub bound: f64,
    pub max_grid_gap: f64,
    /// Supremum over all real `b` (Kolmogorov distance of the standardized law).
    pub sup_gap: f64,
    pub holds_on_grid: bool,
    pub grid: Vec<SteinGridPoint>,
}

/// `T_p` as bit masks over the primes of the law.
fn neighbourhoods(primes: &[u64], params: &GapParameters) -> Vec<u64> {
    let e_minus = (-params.z()).exp();
    primes
        .iter()
        .map(|&p| {
            let lp = (p as f64).ln();
            let mut mask = 0u64;
            for (j, &q) in primes.iter().enumerate() {
                let lq = (q as f64).ln();
                if lq >= e_minus * lp && lq <= params.exp_z() * lp {
                    mask |= 1 << j;
                }
            }
            mask
        })
        .collect()
}

pub fn stein_diagnostics(n: u64, params: &GapParameters, table: &PrimeTable) -> Result<SteinReport> {
    let law = JointLaw::lumped(n, params, table)?;
    stein_from_law(&law)
}

pub fn stein_from_law(law: &JointLaw) -> Result<SteinReport> {
    let params = law.params();
    let primes = law.primes();
    let k = primes.len();
    let h: Vec<BigRational> = (0..k).map(|i| law.mean_b(i)).collect();
    let moments = law.moments(2);
    let s2 = moments.central[2].clone();
    if !s2.is_positive() {
        return Err(Error::InvalidArgument("S_N is degenerate (zero variance)".into()));
    }
    let s2_f = rational_to_f64(&s2);
    let s = s2_f.sqrt();
    let c_n = moments.mean.clone();
    let hood = neighbourhoods(primes, params);
    let y = |b: u64, i: usize| bit(b, i) - &h[i];

    // normalization: E[sum_t Y_t sum_{s in T_t} Y_s] == s_N^2
    let pair_sum = |b: u64| -> BigRational {
        let mut acc = BigRational::zero();
        for (t, &mask) in hood.iter().enumerate() {
            let yt = y(b, t);
            for s_ in (0..k).filter(|&j| mask >> j & 1 == 1) {
                acc += &yt * y(b, s_);
            }
        }
        acc
    };
    let normalization = law.expect(pair_sum);

    // E[Y_t Y_s] for s in T_t
    let mut cov: HashMap<(usize, usize), BigRational> = HashMap::new();
    for (t, &mask) in hood.iter().enumerate() {
        for j in (0..k).filter(|&j| mask >> j & 1 == 1) {
            cov.insert((t, j), law.expect(|b| y(b, t) * y(b, j)));
        }
    }

    let psi2_sq_y = law.expect(|b| {
        let mut acc = BigRational::zero();
        for (t, &mask) in hood.iter().enumerate() {
            let local: BigRational = (0..k).filter(|&j| mask >> j & 1 == 1).map(|j| y(b, j)).sum();
            acc += y(b, t).abs() * &local * &local;
        }
        acc
    });
    let psi3_sq_y = law.expect(|b| {
        let mut acc = BigRational::zero();
        for (t, &mask) in hood.iter().enumerate() {
            for j in (0..k).filter(|&j| mask >> j & 1 == 1) {
                acc += y(b, t) * y(b, j) - &cov[&(t, j)];
            }
        }
        &acc * &acc
    });

    // Psi_1 from the law: sum over t and over classes of outcomes agreeing
    // on (B_s)_{s not in T_t} of |sum P(w) Y_t(w)|
    let mut psi1_y = BigRational::zero();
    for (t, &mask) in hood.iter().enumerate() {
        let outside = !mask & ((1u64 << k) - 1);
        let mut classes: HashMap<u64, BigRational> = HashMap::new();
        for (b, p) in law.outcomes() {
            *classes.entry(b & outside).or_insert_with(BigRational::zero) += p * y(*b, t);
        }
        psi1_y += classes.values().map(|v| v.abs()).sum::<BigRational>();
    }

    let psi1_enumerated = rational_to_f64(&psi1_y) / s;
    let psi2 = (rational_to_f64(&psi2_sq_y) / (s2_f * s)).sqrt();
    let psi3 = (rational_to_f64(&psi3_sq_y) / (s2_f * s2_f)).sqrt();
    let psi1 = 0.0;
    let bound = 4.0 * (psi1 + psi2 + psi3);

    let dist = law.s_distribution();
    let c_f = rational_to_f64(&c_n);
    let standardized: Vec<(f64, f64)> = dist
        .iter()
        .map(|(v, p)| {
            let centered = BigRational::from_integer((*v).into()) - &c_n;
            (rational_to_f64(&centered) / s, rational_to_f64(p))
        })
        .collect();
    let mut grid = Vec::new();
    for step in STEIN_GRID.0..=STEIN_GRID.1 {
        let b = step as f64 / 10.0;
        let cdf: f64 = standardized.iter().filter(|(x, _)| *x <= b).map(|(_, p)| p).sum();
        let phi = normal_cdf(b);
        grid.push(SteinGridPoint { b, cdf, phi, gap: (cdf - phi).abs() });
    }
    let max_grid_gap = grid.iter().map(|g| g.gap).fold(0.0, f64::max);
    let sup_gap = ks_distance_weighted(&standardized, 0.0, 1.0)?;
    Ok(SteinReport {
        cutoff: law.cutoff(),
        z: params.z(),
        c_n: c_f,
        s2_n: s2_f,
        psi1,
        psi1_enumerated,
        psi2,
        psi3,
        normalization: rational_to_f64(&(&normalization / &s2)),
        normalization_exact: normalization == s2,
        bound,
        max_grid_gap,
        sup_gap,
        holds_on_grid: grid.iter().all(|g| g.gap <= bound),
        grid,
    })
}
