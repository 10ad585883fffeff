//! Per-integer prime-divisor lists, the gap statistics built on them, and
//! the segmented sweep that streams them over `[1, n]`.
//!
//! Two statistics are exposed:
//!
//! * [`delta_sum_of`]: `sum_p delta_{p,z}(m)`, where `delta_{p,z}(m) = 1` when
//!   `p | m` and no prime in `(p, p^(e^z)]` divides `m`. Optionally truncated
//!   to `p <= cutoff`.
//! * [`intro_gap_count`]: the number of consecutive prime divisors with
//!   `ln ln p_{i+1} - ln ln p_i > z`.
//!
//! The largest prime divisor always satisfies its delta condition, so for
//! `m > 1` the delta sum is one more than the gap count.

use std::time::Instant;

use arrayvec::ArrayVec;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::GapParameters;
use crate::primes::sieve_primes;
use crate::stats::Histogram;
use crate::sum::CompensatedSum;

/// `omega(m) <= 15` for every `m < 2^64` (the product of the first 16 primes
/// exceeds `u64::MAX`).
pub const MAX_DIVISORS: usize = 15;

/// Largest `n` accepted by [`segmented_sweep`].
pub const MAX_SWEEP_N: u64 = 1_000_000_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DivisorList {
    m: u64,
    primes: ArrayVec<u64, MAX_DIVISORS>,
}

impl DivisorList {
    /// Validates that `primes` is strictly increasing, that each entry is a
    /// divisor of `m`, and that their product divides `m`.
    pub fn new(m: u64, primes: &[u64]) -> Result<Self> {
        if m == 0 {
            return Err(Error::Malformed("m must be positive".into()));
        }
        if primes.len() > MAX_DIVISORS {
            return Err(Error::Malformed(format!("more than {MAX_DIVISORS} prime divisors")));
        }
        if !primes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Malformed("prime divisors not strictly increasing".into()));
        }
        let mut rest = m;
        for &p in primes {
            if p < 2 || !rest.is_multiple_of(p) {
                return Err(Error::Malformed(format!("{p} does not divide {m}")));
            }
            rest /= p;
        }
        Ok(DivisorList { m, primes: primes.iter().copied().collect() })
    }

    /// Distinct prime divisors by trial division.
    pub fn by_trial_division(m: u64) -> Self {
        assert!(m > 0, "m must be positive");
        let mut primes = ArrayVec::new();
        let mut rest = m;
        let mut d = 2u64;
        while d.saturating_mul(d) <= rest {
            if rest.is_multiple_of(d) {
                primes.push(d);
                while rest.is_multiple_of(d) {
                    rest /= d;
                }
            }
            d += if d == 2 { 1 } else { 2 };
        }
        if rest > 1 {
            primes.push(rest);
        }
        DivisorList { m, primes }
    }

    #[inline]
    pub fn m(&self) -> u64 {
        self.m
    }

    #[inline]
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// `omega(m)`.
    #[inline]
    pub fn omega(&self) -> usize {
        self.primes.len()
    }
}

/// `sum_{p <= cutoff} delta_{p,z}(m)`; `cutoff = None` means no truncation.
///
/// Only the next larger divisor of `m` can fall in `(p, p^(e^z)]` first, so
/// no prime table is needed.
pub fn delta_sum_of(divs: &DivisorList, params: &GapParameters, cutoff: Option<u64>) -> u32 {
    let ps = divs.primes();
    let Some(&first) = ps.first() else {
        return 0;
    };
    let exp_z = params.exp_z();
    let mut total = 0;
    let mut ln_p = (first as f64).ln();
    for i in 0..ps.len() {
        if cutoff.is_some_and(|c| ps[i] > c) {
            break;
        }
        match ps.get(i + 1) {
            Some(&q) => {
                let ln_q = (q as f64).ln();
                if ln_q > exp_z * ln_p {
                    total += 1;
                }
                ln_p = ln_q;
            }
            None => total += 1,
        }
    }
    total
}

/// `#{1 <= i < omega(m) : ln ln p_{i+1} - ln ln p_i > z}`.
pub fn intro_gap_count(divs: &DivisorList, params: &GapParameters) -> u32 {
    divs.primes()
        .windows(2)
        .filter(|w| (w[1] as f64).ln().ln() - (w[0] as f64).ln().ln() > params.z())
        .count() as u32
}

/// Which per-integer statistic a sweep accumulates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    #[default]
    DeltaSum,
    GapCount,
}

impl std::str::FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta-sum" => Ok(Statistic::DeltaSum),
            "gap-count" => Ok(Statistic::GapCount),
            _ => Err(Error::InvalidArgument(format!("unknown statistic {s:?}"))),
        }
    }
}

/// Streaming power sums `sum (x - shift)^r` for `r = 0..=r_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentAccumulator {
    count: u64,
    shift: f64,
    sums: Vec<CompensatedSum>,
}

impl MomentAccumulator {
    pub fn new(shift: f64, r_max: usize) -> Self {
        MomentAccumulator { count: 0, shift, sums: vec![CompensatedSum::new(); r_max + 1] }
    }

    /// Rebuilds an accumulator from serialized power sums.
    pub fn from_parts(count: u64, shift: f64, power_sums: &[f64]) -> Result<Self> {
        if power_sums.is_empty() {
            return Err(Error::Malformed("power_sums must contain at least r = 0".into()));
        }
        let sums = power_sums
            .iter()
            .map(|&v| {
                let mut s = CompensatedSum::new();
                s.add(v);
                s
            })
            .collect();
        Ok(MomentAccumulator { count, shift, sums })
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.push_weighted(x, 1);
    }

    /// Adds `weight` copies of `x`.
    pub fn push_weighted(&mut self, x: f64, weight: u64) {
        if weight == 0 {
            return;
        }
        let d = x - self.shift;
        let w = weight as f64;
        let mut pow = 1.0;
        for s in &mut self.sums {
            s.add(w * pow);
            pow *= d;
        }
        self.count += weight;
    }

    pub fn from_histogram(hist: &Histogram, shift: f64, r_max: usize) -> Self {
        let mut acc = MomentAccumulator::new(shift, r_max);
        for (v, c) in hist.iter() {
            acc.push_weighted(v as f64, c);
        }
        acc
    }

    /// Merges `other` into `self`. Both must share `shift` and `r_max`.
    pub fn merge(&mut self, other: &MomentAccumulator) -> Result<()> {
        if self.shift != other.shift || self.sums.len() != other.sums.len() {
            return Err(Error::InvalidArgument(
                "cannot merge accumulators with different shift or r_max".into(),
            ));
        }
        self.count += other.count;
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.merge(b);
        }
        Ok(())
    }

    #[inline]
    pub fn count(&self) -> u64 {
        self.count
    }

    #[inline]
    pub fn shift(&self) -> f64 {
        self.shift
    }

    #[inline]
    pub fn r_max(&self) -> usize {
        self.sums.len() - 1
    }

    pub fn power_sums(&self) -> Vec<f64> {
        self.sums.iter().map(CompensatedSum::value).collect()
    }

    pub fn power_sum(&self, r: usize) -> f64 {
        self.sums[r].value()
    }

    /// `power_sum(r) / count`: the `r`-th moment about `shift`.
    pub fn moment(&self, r: usize) -> f64 {
        self.power_sum(r) / self.count as f64
    }
}

/// Limiting center `e^{-z} ln ln n`.
pub fn theorem_center(n: f64, params: &GapParameters) -> f64 {
    (-params.z()).exp() * n.ln().ln()
}

/// Limiting variance proxy `(1 - 2z e^{-z}) e^{-z} ln ln n`.
pub fn theorem_variance(n: f64, params: &GapParameters) -> f64 {
    let e = (-params.z()).exp();
    (1.0 - 2.0 * params.z() * e) * e * n.ln().ln()
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub n: u64,
    pub params: GapParameters,
    /// `None`: no truncation.
    pub cutoff: Option<u64>,
    pub r_max: usize,
    /// Accumulation shift; `None` uses [`theorem_center`].
    pub shift: Option<f64>,
    pub segment_size: usize,
    pub statistic: Statistic,
}

impl SweepConfig {
    pub fn new(n: u64, params: GapParameters, r_max: usize) -> Self {
        SweepConfig {
            n,
            params,
            cutoff: None,
            r_max,
            shift: None,
            segment_size: 1 << 15,
            statistic: Statistic::DeltaSum,
        }
    }

    pub fn resolved_shift(&self) -> f64 {
        self.shift.unwrap_or_else(|| theorem_center(self.n as f64, &self.params))
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("n must be >= 2, got {}", self.n)));
        }
        if self.n > MAX_SWEEP_N {
            return Err(Error::ResourceCap(format!("n = {} exceeds {MAX_SWEEP_N}", self.n)));
        }
        if self.segment_size < 2 {
            return Err(Error::InvalidArgument("segment_size must be >= 2".into()));
        }
        if self.cutoff.is_some_and(|c| c < 2) {
            return Err(Error::InvalidArgument("cutoff must be >= 2".into()));
        }
        if self.cutoff.is_some() && self.statistic == Statistic::GapCount {
            return Err(Error::InvalidArgument("cutoff applies only to the delta sum".into()));
        }
        if !self.resolved_shift().is_finite() {
            return Err(Error::InvalidArgument("shift must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub n: u64,
    pub params: GapParameters,
    pub cutoff: Option<u64>,
    pub statistic: Statistic,
    pub accumulator: MomentAccumulator,
    pub histogram: Histogram,
    pub wall_time_s: f64,
}

/// Reusable per-segment factorization buffers.
pub struct SegmentFactorizer {
    max_m: u64,
    sieving: Vec<u64>,
    prod: Vec<u64>,
    lists: Vec<DivisorList>,
}

impl SegmentFactorizer {
    /// Prepares to factor integers up to `n` (sieving primes `<= sqrt(n)`).
    pub fn new(n: u64, segment_size: usize) -> Result<Self> {
        Self::with_primes(sieve_primes(n.isqrt()), n, segment_size)
    }

    fn with_primes(sieving: Vec<u64>, max_m: u64, segment_size: usize) -> Result<Self> {
        let mut f = SegmentFactorizer { max_m, sieving, prod: Vec::new(), lists: Vec::new() };
        f.prod
            .try_reserve_exact(segment_size)
            .and_then(|_| f.lists.try_reserve_exact(segment_size))
            .map_err(|e| Error::ResourceCap(format!("segment buffers: {e}")))?;
        Ok(f)
    }

    /// Distinct prime divisors of every `m` in `[lo, hi)`, `lo >= 1`.
    ///
    /// Sieves by every prime `<= sqrt(hi - 1)` and its powers; whatever
    /// cofactor remains is a single prime larger than all sieved ones.
    pub fn factor(&mut self, lo: u64, hi: u64) -> Result<&[DivisorList]> {
        assert!(lo >= 1 && lo <= hi);
        if hi - 1 > self.max_m {
            return Err(Error::InvalidArgument(format!(
                "factorizer prepared for m <= {}, asked for [{lo}, {hi})",
                self.max_m
            )));
        }
        let len = (hi - lo) as usize;
        self.prod.clear();
        self.prod.resize(len, 1);
        self.lists.clear();
        self.lists.extend((lo..hi).map(|m| DivisorList { m, primes: ArrayVec::new() }));
        let root = (hi - 1).isqrt();
        for &p in self.sieving.iter().take_while(|&&p| p <= root) {
            let first = lo.div_ceil(p) * p;
            let mut m = first;
            while m < hi {
                let i = (m - lo) as usize;
                self.lists[i].primes.try_push(p).map_err(|_| {
                    Error::ResourceCap(format!("more than {MAX_DIVISORS} prime divisors of {m}"))
                })?;
                self.prod[i] *= p;
                m += p;
            }
            let mut pk = p;
            while let Some(next) = pk.checked_mul(p).filter(|&x| x < hi) {
                pk = next;
                let mut m = lo.div_ceil(pk) * pk;
                while m < hi {
                    self.prod[(m - lo) as usize] *= p;
                    m += pk;
                }
            }
        }
        for (list, &prod) in self.lists.iter_mut().zip(&self.prod) {
            if prod < list.m {
                let rest = list.m / prod;
                list.primes.try_push(rest).map_err(|_| {
                    Error::ResourceCap(format!("more than {MAX_DIVISORS} prime divisors"))
                })?;
            }
        }
        Ok(&self.lists)
    }
}

/// Calls `f` with the divisor list of every `m` in `[lo, hi)`, in order.
pub fn for_each_divisor_list<F>(lo: u64, hi: u64, segment_size: usize, mut f: F) -> Result<()>
where
    F: FnMut(&DivisorList),
{
    let lo = lo.max(1);
    if hi <= lo {
        return Ok(());
    }
    let mut fac = SegmentFactorizer::new(hi - 1, segment_size)?;
    let mut start = lo;
    while start < hi {
        let end = hi.min(start.saturating_add(segment_size as u64));
        for d in fac.factor(start, end)? {
            f(d);
        }
        start = end;
    }
    Ok(())
}

/// Value of the configured statistic for one integer.
#[inline]
pub fn statistic_of(divs: &DivisorList, cfg: &SweepConfig) -> u32 {
    match cfg.statistic {
        Statistic::DeltaSum => delta_sum_of(divs, &cfg.params, cfg.cutoff),
        Statistic::GapCount => intro_gap_count(divs, &cfg.params),
    }
}

/// Streams the configured statistic over every `m` in `[1, n]`.
///
/// Segments are processed in parallel on the current rayon pool. Each
/// segment produces an integer histogram; the histograms are summed exactly
/// and the power sums are formed once from the merged histogram, so the
/// result does not depend on the segment size or the worker count.
pub fn segmented_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let started = Instant::now();
    let sieving = sieve_primes(cfg.n.isqrt());
    let seg = cfg.segment_size as u64;
    let segments = cfg.n.div_ceil(seg);

    let counts = (0..segments)
        .into_par_iter()
        .map_init(
            || SegmentFactorizer::with_primes(sieving.clone(), cfg.n, cfg.segment_size),
            |fac, k| -> Result<[u64; MAX_DIVISORS + 1]> {
                let fac = fac.as_mut().map_err(|e| Error::ResourceCap(e.to_string()))?;
                let lo = 1 + k * seg;
                let hi = (lo + seg).min(cfg.n + 1);
                let mut counts = [0u64; MAX_DIVISORS + 1];
                for d in fac.factor(lo, hi)? {
                    counts[statistic_of(d, cfg) as usize] += 1;
                }
                Ok(counts)
            },
        )
        .try_reduce(
            || [0u64; MAX_DIVISORS + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;

    let mut histogram = Histogram::new();
    for (v, &c) in counts.iter().enumerate() {
        histogram.add(v as i64, c);
    }
    let accumulator = MomentAccumulator::from_histogram(&histogram, cfg.resolved_shift(), cfg.r_max);
    Ok(SweepResult {
        n: cfg.n,
        params: cfg.params,
        cutoff: cfg.cutoff,
        statistic: cfg.statistic,
        accumulator,
        histogram,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}
