//! Normalized moments, Gaussian reference values and distributional
//! distances for integer-valued statistics.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gap_counter::MomentAccumulator;
use crate::sum::CompensatedSum;

/// Value -> count histogram of an integer statistic.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<(i64, u64)>", into = "Vec<(i64, u64)>")]
pub struct Histogram {
    bins: BTreeMap<i64, u64>,
}

impl Histogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: i64, count: u64) {
        if count > 0 {
            *self.bins.entry(value).or_insert(0) += count;
        }
    }

    pub fn merge(&mut self, other: &Histogram) {
        for (&v, &c) in &other.bins {
            self.add(v, c);
        }
    }

    pub fn total(&self) -> u64 {
        self.bins.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// `(value, count)` in increasing value order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, u64)> + '_ {
        self.bins.iter().map(|(&v, &c)| (v, c))
    }

    pub fn mean(&self) -> f64 {
        let s: CompensatedSum = self.iter().map(|(v, c)| v as f64 * c as f64).collect();
        s.value() / self.total() as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let s: CompensatedSum =
            self.iter().map(|(v, c)| c as f64 * (v as f64 - mu).powi(2)).collect();
        s.value() / self.total() as f64
    }
}

impl From<Vec<(i64, u64)>> for Histogram {
    fn from(v: Vec<(i64, u64)>) -> Self {
        let mut h = Histogram::new();
        for (value, count) in v {
            h.add(value, count);
        }
        h
    }
}

impl From<Histogram> for Vec<(i64, u64)> {
    fn from(h: Histogram) -> Self {
        h.bins.into_iter().collect()
    }
}

/// `r`-th moment of the standard normal: 0 for odd `r`, `(r - 1)!!` for even.
pub fn gaussian_moment(r: u32) -> f64 {
    if r % 2 == 1 {
        return 0.0;
    }
    (1..r).step_by(2).map(|k| k as f64).product()
}

/// Re-expands power sums about `new_shift` with the binomial theorem.
pub fn recenter(acc: &MomentAccumulator, new_shift: f64) -> MomentAccumulator {
    let old = acc.power_sums();
    if new_shift == acc.shift() {
        return acc.clone();
    }
    let d = acc.shift() - new_shift;
    let mut out = Vec::with_capacity(old.len());
    for r in 0..old.len() {
        // sum_k C(r, k) d^(r-k) P_k
        let mut s = CompensatedSum::new();
        let mut binom = 1.0f64;
        for (k, &pk) in old.iter().enumerate().take(r + 1) {
            if k > 0 {
                binom = binom * (r + 1 - k) as f64 / k as f64;
            }
            s.add(binom * d.powi((r - k) as i32) * pk);
        }
        out.push(s.value());
    }
    out[0] = acc.count() as f64;
    MomentAccumulator::from_parts(acc.count(), new_shift, &out)
        .expect("power sums are non-empty")
}

/// Standard normal CDF.
pub fn normal_cdf(b: f64) -> f64 {
    0.5 * libm::erfc(-b / std::f64::consts::SQRT_2)
}

/// Kolmogorov distance between a histogram and `N(mean, sd^2)`.
pub fn ks_distance(hist: &Histogram, mean: f64, sd: f64) -> Result<f64> {
    let total = hist.total();
    if total == 0 {
        return Err(Error::InvalidArgument("empty distribution".into()));
    }
    let t = total as f64;
    let points: Vec<(f64, f64)> = hist.iter().map(|(v, c)| (v as f64, c as f64 / t)).collect();
    ks_distance_weighted(&points, mean, sd)
}

/// Kolmogorov distance for a discrete law given as `(value, probability)`
/// pairs in increasing value order. The supremum is attained at a jump, so
/// both one-sided limits of the empirical CDF are compared at every point.
pub fn ks_distance_weighted(points: &[(f64, f64)], mean: f64, sd: f64) -> Result<f64> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::InvalidArgument(format!("sd must be > 0, got {sd}")));
    }
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty distribution".into()));
    }
    if !points.windows(2).all(|w| w[0].0 < w[1].0) {
        return Err(Error::InvalidArgument("support points must be increasing".into()));
    }
    let mut below = CompensatedSum::new();
    let mut worst = 0.0f64;
    for &(x, w) in points {
        let phi = normal_cdf((x - mean) / sd);
        let left = below.value();
        below.add(w);
        let right = below.value();
        worst = worst.max((left - phi).abs()).max((right - phi).abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMomentReport {
    pub n: u64,
    pub z: f64,
    pub r: u32,
    pub raw_centered: f64,
    pub normalizer: f64,
    pub normalized: f64,
    pub reference: f64,
}

impl NormalizedMomentReport {
    pub fn abs_error(&self) -> f64 {
        (self.normalized - self.reference).abs()
    }
}

/// Normalized moments `E[(X - shift)^r] / normalizer^(r/2)` for
/// `r = 1..=r_max`, against the Gaussian reference.
pub fn normalized_moments(
    acc: &MomentAccumulator,
    normalizer: f64,
    n: u64,
    z: f64,
) -> Result<Vec<NormalizedMomentReport>> {
    if !(normalizer > 0.0) || !normalizer.is_finite() {
        return Err(Error::InvalidArgument(format!("normalizer must be > 0, got {normalizer}")));
    }
    if acc.count() == 0 {
        return Err(Error::InvalidArgument("empty accumulator".into()));
    }
    Ok((1..=acc.r_max() as u32)
        .map(|r| {
            let raw = acc.moment(r as usize);
            NormalizedMomentReport {
                n,
                z,
                r,
                raw_centered: raw,
                normalizer,
                normalized: raw / normalizer.powf(r as f64 / 2.0),
                reference: gaussian_moment(r),
            }
        })
        .collect())
}

#[derive(Serialize)]
struct MomentRow {
    n: u64,
    z: f64,
    r: u32,
    normalized_moment: f64,
    gaussian_reference: f64,
    abs_error: f64,
}

/// CSV with columns `n,z,r,normalized_moment,gaussian_reference,abs_error`.
pub fn write_moment_csv<W: Write>(w: W, rows: &[NormalizedMomentReport]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(MomentRow {
            n: row.n,
            z: row.z,
            r: row.r,
            normalized_moment: row.normalized,
            gaussian_reference: row.reference,
            abs_error: row.abs_error(),
        })?;
    }
    out.flush()?;
    Ok(())
}
