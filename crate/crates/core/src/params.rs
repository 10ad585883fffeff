//! The gap threshold `z` and the interval rule it induces.
//!
//! A prime `q` lies in the gap interval of `p` when `p < q <= p^(e^z)`. The
//! comparison is carried out as `ln q <= e^z * ln p` in double precision,
//! and every consumer in this crate (sweeps, model, sieve checks) goes
//! through the same predicate so the classification is consistent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapParameters {
    z: f64,
    exp_z: f64,
}

impl GapParameters {
    pub fn new(z: f64) -> Result<Self> {
        if !z.is_finite() || z < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "gap threshold z must be finite and >= 0, got {z}"
            )));
        }
        Ok(GapParameters { z, exp_z: z.exp() })
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    #[inline]
    pub fn exp_z(&self) -> f64 {
        self.exp_z
    }

    /// `ln` of the upper end of the gap interval of `p`.
    #[inline]
    pub fn log_bound(&self, p: u64) -> f64 {
        self.exp_z * (p as f64).ln()
    }

    /// `q <= p^(e^z)` under the double-precision rule. Does not check `q > p`.
    #[inline]
    pub fn within_reach(&self, p: u64, q: u64) -> bool {
        (q as f64).ln() <= self.log_bound(p)
    }

    /// `q` in the half-open interval `(p, p^(e^z)]`.
    #[inline]
    pub fn in_gap_interval(&self, p: u64, q: u64) -> bool {
        q > p && self.within_reach(p, q)
    }

    /// Largest integer `t` with `ln t <= e^z ln p` (so the gap interval of
    /// `p` is `(p, t]`). Saturates at `u64::MAX` when the bound lies beyond
    /// the integer range.
    pub fn threshold(&self, p: u64) -> u64 {
        let bound = self.log_bound(p);
        if bound >= (u64::MAX as f64).ln() {
            return u64::MAX;
        }
        let mut t = bound.exp().floor() as u64;
        while t > 1 && (t as f64).ln() > bound {
            t -= 1;
        }
        while let Some(next) = t.checked_add(1) {
            if (next as f64).ln() <= bound {
                t = next;
            } else {
                break;
            }
        }
        t
    }
}
