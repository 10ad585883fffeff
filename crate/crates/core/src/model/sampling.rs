//! Monte Carlo sampling of `S_N`.
//!
//! Only the selected primes (`X_q = 1`) matter, and there are about
//! `ln ln x` of them below `x`, so the sampler jumps from one selected prime
//! to the next: the probability that none of the primes at indices
//! `from..=j` is selected is `exp(L[j] - L[from - 1])` with `L` the
//! `ln(1 - 1/q)` prefix sums, and the next selected index is found by
//! inverting that survival function with one uniform draw and a binary
//! search.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::params::GapParameters;
use crate::primes::PrimeTable;
use crate::stats::Histogram;

/// Source of the selected primes `{q : X_q = 1}`, queried in increasing order.
pub trait PrimeSelector {
    /// Smallest selected index in `from..end`.
    fn next_selected(&mut self, table: &PrimeTable, from: usize, end: usize) -> Option<usize>;
}

/// Independent `X_q ~ Bernoulli(1/q)`.
pub struct BernoulliSelector<R> {
    rng: R,
}

impl<R: Rng> BernoulliSelector<R> {
    pub fn new(rng: R) -> Self {
        BernoulliSelector { rng }
    }
}

impl<R: Rng> PrimeSelector for BernoulliSelector<R> {
    fn next_selected(&mut self, table: &PrimeTable, from: usize, end: usize) -> Option<usize> {
        if from >= end {
            return None;
        }
        let prefix = table.log1m_prefix();
        let base = if from == 0 { 0.0 } else { prefix[from - 1] };
        let u: f64 = self.rng.sample(Open01);
        let target = base + u.ln();
        let k = prefix[from..end].partition_point(|&v| v > target);
        (from + k < end).then_some(from + k)
    }
}

/// Every `X_q = 1`.
pub struct AllSelected;

impl PrimeSelector for AllSelected {
    fn next_selected(&mut self, _: &PrimeTable, from: usize, end: usize) -> Option<usize> {
        (from < end).then_some(from)
    }
}

/// Every `X_q = 0`.
pub struct NoneSelected;

impl PrimeSelector for NoneSelected {
    fn next_selected(&mut self, _: &PrimeTable, _: usize, _: usize) -> Option<usize> {
        None
    }
}

/// A fixed set of selected primes.
pub struct FixedSelection {
    primes: Vec<u64>,
}

impl FixedSelection {
    pub fn new(mut primes: Vec<u64>) -> Self {
        primes.sort_unstable();
        primes.dedup();
        FixedSelection { primes }
    }
}

impl PrimeSelector for FixedSelection {
    fn next_selected(&mut self, table: &PrimeTable, from: usize, end: usize) -> Option<usize> {
        let all = table.primes();
        if from >= end {
            return None;
        }
        let lo = all[from];
        let i = self.primes.partition_point(|&p| p < lo);
        let p = *self.primes.get(i)?;
        let j = table.index_of(p)?;
        (j < end).then_some(j)
    }
}

/// One draw of `S_N = sum_{p <= N} B_p`.
pub fn sample_s_n<S: PrimeSelector>(
    n: u64,
    params: &GapParameters,
    table: &PrimeTable,
    selector: &mut S,
) -> Result<u32> {
    let reach = params.threshold(n.max(2));
    if reach > table.limit() {
        return Err(Error::OutOfRange(format!(
            "gap interval of N = {n} ends at {reach}, beyond table limit {}",
            table.limit()
        )));
    }
    let primes = table.primes();
    let n_end = table.count_le(n);
    let reach_end = table.count_le(reach);
    let mut s = 0;
    let mut cur = selector.next_selected(table, 0, reach_end);
    while let Some(i) = cur {
        if i >= n_end {
            break;
        }
        let p = primes[i];
        let next = selector.next_selected(table, i + 1, reach_end);
        if next.is_none_or(|j| !params.within_reach(p, primes[j])) {
            s += 1;
        }
        cur = next;
    }
    Ok(s)
}

#[derive(Clone, Debug)]
pub struct MonteCarloResult {
    pub seed: u64,
    pub trials: u64,
    pub histogram: Histogram,
}

impl MonteCarloResult {
    pub fn mean(&self) -> f64 {
        self.histogram.mean()
    }

    /// Unbiased sample variance.
    pub fn sample_variance(&self) -> f64 {
        let n = self.trials as f64;
        self.histogram.variance() * n / (n - 1.0)
    }
}

/// The generator for trial `index`: ChaCha8 keyed by `seed`, one stream per
/// trial, so every trial sees the same numbers regardless of scheduling.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `trials` independent draws of `S_N`, in parallel on the current rayon pool.
pub fn monte_carlo(
    n: u64,
    params: &GapParameters,
    table: &PrimeTable,
    seed: u64,
    trials: u64,
) -> Result<MonteCarloResult> {
    if trials < 2 {
        return Err(Error::InvalidArgument("need at least 2 trials".into()));
    }
    // fail fast on headroom before spawning work
    sample_s_n(n, params, table, &mut NoneSelected)?;
    const CHUNK: u64 = 4096;
    let chunks = trials.div_ceil(CHUNK);
    let histogram = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<Histogram> {
            let mut h = Histogram::new();
            for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut sel = BernoulliSelector::new(trial_rng(seed, i));
                h.add(sample_s_n(n, params, table, &mut sel)? as i64, 1);
            }
            Ok(h)
        })
        .try_reduce(Histogram::new, |mut a, b| {
            a.merge(&b);
            Ok(a)
        })?;
    Ok(MonteCarloResult { seed, trials, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn g(z: f64) -> GapParameters {
        GapParameters::new(z).unwrap()
    }

    #[test]
    fn forced_outcomes() {
        let t = PrimeTable::build(100_000).unwrap();
        for z in [0.0, LN2] {
            assert_eq!(sample_s_n(100, &g(z), &t, &mut NoneSelected).unwrap(), 0);
        }
        // all selected: B_p = 1 iff (p, p^(e^z)] holds no prime
        let all_z0 = sample_s_n(100, &g(0.0), &t, &mut AllSelected).unwrap();
        assert_eq!(all_z0, 25);
        let direct = t.primes()[..t.count_le(100)]
            .iter()
            .filter(|&&p| t.primes_in_gap_interval(p, &g(LN2)).unwrap().is_empty())
            .count() as u32;
        assert_eq!(direct, 0);
        assert_eq!(sample_s_n(100, &g(LN2), &t, &mut AllSelected).unwrap(), direct);

        let mut sel = FixedSelection::new(vec![2]);
        assert_eq!(sample_s_n(3, &g(0.0), &t, &mut sel).unwrap(), 1);
        // 2 and 3 selected, linked at z = ln 2: only B_3 survives
        let mut sel = FixedSelection::new(vec![2, 3]);
        assert_eq!(sample_s_n(3, &g(LN2), &t, &mut sel).unwrap(), 1);
        // 3 and 7 selected: 7 kills B_3 at z = ln 2, and 7 > N
        let mut sel = FixedSelection::new(vec![3, 7]);
        assert_eq!(sample_s_n(3, &g(LN2), &t, &mut sel).unwrap(), 0);
    }

    #[test]
    fn headroom_error() {
        let t = PrimeTable::build(1000).unwrap();
        assert!(matches!(
            sample_s_n(100, &g(LN2), &t, &mut NoneSelected),
            Err(Error::OutOfRange(_))
        ));
    }

    #[test]
    fn selector_marginals() {
        // each X_q should fire with frequency ~ 1/q
        let t = PrimeTable::build(100).unwrap();
        let end = t.len();
        let trials = 200_000u64;
        let mut hits = vec![0u64; end];
        for i in 0..trials {
            let mut sel = BernoulliSelector::new(trial_rng(11, i));
            let mut cur = sel.next_selected(&t, 0, end);
            while let Some(j) = cur {
                hits[j] += 1;
                cur = sel.next_selected(&t, j + 1, end);
            }
        }
        for (j, &p) in t.primes().iter().enumerate() {
            let q = 1.0 / p as f64;
            let se = (q * (1.0 - q) / trials as f64).sqrt();
            let freq = hits[j] as f64 / trials as f64;
            assert!((freq - q).abs() < 5.0 * se, "p={p}: {freq} vs {q}");
        }
    }

    #[test]
    fn reproducible_across_pools() {
        let t = PrimeTable::build(1_000_000).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| monte_carlo(1000, &g(LN2), &t, 42, 20_000).unwrap().histogram)
        };
        assert_eq!(run(1), run(3));
    }
}
