//! Prime tables with prefix sums for O(1) Mertens-type queries.
//!
//! A [`PrimeTable`] stores every prime up to `limit` together with running
//! sums of `1/p` and of `ln(1 - 1/p)`. Sums over a prime interval and the
//! products `prod (1 - 1/q)` reduce to a difference of two prefix entries.
//!
//! # On-disk cache
//!
//! A table can be cached in a small binary file, all integers little-endian:
//!
//! | bytes | content                                         |
//! |-------|-------------------------------------------------|
//! | 8     | magic `OMZPRIME`                                |
//! | 4     | format version (`u32`, currently 1)             |
//! | 8     | `limit` (`u64`)                                 |
//! | 8     | prime count (`u64`)                             |
//! | ...   | one unsigned LEB128 varint per prime: `p_i - p_{i-1}` (with `p_{-1} = 0`) |
//!
//! Prefix sums are not stored; they are recomputed on load.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::params::GapParameters;
use crate::sum::CompensatedSum;

pub const CACHE_MAGIC: &[u8; 8] = b"OMZPRIME";
pub const CACHE_VERSION: u32 = 1;

/// Largest table the sieve will build (bit sieve of ~625 MB).
pub const MAX_TABLE_LIMIT: u64 = 10_000_000_000;

#[derive(Clone, Debug)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
    inv_prefix: Vec<f64>,
    log1m_prefix: Vec<f64>,
}

/// Odd-only bit sieve. Returns all primes `<= limit`.
pub fn sieve_primes(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    // bit i represents 2i + 1
    let half = (limit as usize).div_ceil(2);
    let mut composite = vec![0u64; half.div_ceil(64)];
    composite[0] |= 1; // 1 is not prime
    let mut i = 1usize;
    loop {
        let p = 2 * i + 1;
        if p.saturating_mul(p) > limit as usize {
            break;
        }
        if composite[i >> 6] & (1 << (i & 63)) == 0 {
            let mut j = p * p / 2;
            while j < half {
                composite[j >> 6] |= 1 << (j & 63);
                j += p;
            }
        }
        i += 1;
    }
    let mut primes = Vec::with_capacity(estimate_pi(limit));
    primes.push(2);
    for (w, &word) in composite.iter().enumerate() {
        let mut free = !word;
        while free != 0 {
            let b = free.trailing_zeros() as usize;
            let idx = (w << 6) | b;
            if idx >= half {
                break;
            }
            primes.push(2 * idx as u64 + 1);
            free &= free - 1;
        }
    }
    primes
}

fn estimate_pi(limit: u64) -> usize {
    if limit < 17 {
        return 8;
    }
    let x = limit as f64;
    (1.26 * x / x.ln()) as usize
}

impl PrimeTable {
    pub fn build(limit: u64) -> Result<Self> {
        if limit < 2 {
            return Err(Error::InvalidArgument(format!(
                "prime table limit must be >= 2, got {limit}"
            )));
        }
        if limit > MAX_TABLE_LIMIT {
            return Err(Error::ResourceCap(format!(
                "prime table limit {limit} exceeds cap {MAX_TABLE_LIMIT}"
            )));
        }
        Ok(Self::from_primes_unchecked(limit, sieve_primes(limit)))
    }

    fn from_primes_unchecked(limit: u64, primes: Vec<u64>) -> Self {
        let mut inv_prefix = Vec::with_capacity(primes.len());
        let mut log1m_prefix = Vec::with_capacity(primes.len());
        let mut inv = CompensatedSum::new();
        let mut log1m = CompensatedSum::new();
        for &p in &primes {
            let x = 1.0 / p as f64;
            inv.add(x);
            log1m.add((-x).ln_1p());
            inv_prefix.push(inv.value());
            log1m_prefix.push(log1m.value());
        }
        PrimeTable { limit, primes, inv_prefix, log1m_prefix }
    }

    #[inline]
    pub fn limit(&self) -> u64 {
        self.limit
    }

    #[inline]
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.primes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn inv_prefix(&self) -> &[f64] {
        &self.inv_prefix
    }

    pub fn log1m_prefix(&self) -> &[f64] {
        &self.log1m_prefix
    }

    /// Number of primes `<= x` (`pi(x)`), valid for `x <= limit`.
    #[inline]
    pub fn count_le(&self, x: u64) -> usize {
        self.primes.partition_point(|&p| p <= x)
    }

    pub fn index_of(&self, p: u64) -> Option<usize> {
        self.primes.binary_search(&p).ok()
    }

    pub fn contains(&self, p: u64) -> bool {
        self.index_of(p).is_some()
    }

    fn check_covers(&self, x: u64, what: &str) -> Result<()> {
        if x > self.limit {
            Err(Error::OutOfRange(format!(
                "{what} {x} exceeds prime table limit {}",
                self.limit
            )))
        } else {
            Ok(())
        }
    }

    /// Index range of the primes `q` with `p < q <= p^(e^z)`.
    pub fn primes_in_gap_interval(&self, p: u64, params: &GapParameters) -> Result<Range<usize>> {
        let idx = self.index_of(p).ok_or_else(|| {
            if p > self.limit {
                Error::OutOfRange(format!("{p} exceeds prime table limit {}", self.limit))
            } else {
                Error::InvalidArgument(format!("{p} is not prime"))
            }
        })?;
        let t = params.threshold(p);
        self.check_covers(t, "gap interval end")?;
        Ok(idx + 1..self.count_le(t))
    }

    /// Sum of `1/p` over an index range.
    #[inline]
    pub fn inv_sum(&self, range: Range<usize>) -> f64 {
        prefix_diff(&self.inv_prefix, range)
    }

    /// Sum of `ln(1 - 1/p)` over an index range.
    #[inline]
    pub fn log1m_sum(&self, range: Range<usize>) -> f64 {
        prefix_diff(&self.log1m_prefix, range)
    }

    /// `sum_{lo <= p <= hi} 1/p`.
    pub fn mertens_sum(&self, lo: u64, hi: u64) -> Result<f64> {
        if lo < 2 || lo > hi {
            return Err(Error::InvalidArgument(format!(
                "mertens_sum needs 2 <= lo <= hi, got lo={lo}, hi={hi}"
            )));
        }
        self.check_covers(hi, "upper end")?;
        let a = self.primes.partition_point(|&p| p < lo);
        let b = self.count_le(hi);
        Ok(self.inv_sum(a..b))
    }

    /// `ln prod_{lo <= p < hi} (1 - 1/p)`.
    pub fn log_mertens_product(&self, lo: u64, hi: u64) -> Result<f64> {
        if lo > hi {
            return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi})")));
        }
        self.check_covers(hi.saturating_sub(1), "upper end")?;
        let a = self.primes.partition_point(|&p| p < lo);
        let b = self.primes.partition_point(|&p| p < hi);
        Ok(self.log1m_sum(a..b))
    }

    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&self.limit.to_le_bytes())?;
        w.write_all(&(self.primes.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.primes.len() * 2);
        let mut prev = 0u64;
        for &p in &self.primes {
            write_varint(&mut buf, p - prev);
            prev = p;
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::Malformed("bad prime cache magic".into()));
        }
        let version = u32::from_le_bytes(read_array(&mut r)?);
        if version != CACHE_VERSION {
            return Err(Error::Malformed(format!("unsupported prime cache version {version}")));
        }
        let limit = u64::from_le_bytes(read_array(&mut r)?);
        let count = u64::from_le_bytes(read_array(&mut r)?);
        if !(2..=MAX_TABLE_LIMIT).contains(&limit) {
            return Err(Error::Malformed(format!("prime cache limit {limit} out of range")));
        }
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        let mut primes = Vec::with_capacity(count.min(1 << 28) as usize);
        let mut pos = 0usize;
        let mut prev = 0u64;
        for _ in 0..count {
            let delta = read_varint(&body, &mut pos)?;
            if delta == 0 {
                return Err(Error::Malformed("prime cache is not strictly increasing".into()));
            }
            prev = prev
                .checked_add(delta)
                .ok_or_else(|| Error::Malformed("prime cache overflow".into()))?;
            primes.push(prev);
        }
        if pos != body.len() {
            return Err(Error::Malformed("trailing bytes in prime cache".into()));
        }
        if primes.first() != Some(&2) || prev > limit {
            return Err(Error::Malformed("prime cache content inconsistent with header".into()));
        }
        Ok(Self::from_primes_unchecked(limit, primes))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_cache(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_cache(std::io::BufReader::new(f))
    }

    /// Loads the cache at `path` when it covers `limit`, otherwise builds the
    /// table and refreshes the cache.
    pub fn load_or_build(path: &Path, limit: u64) -> Result<Self> {
        if let Ok(t) = Self::load(path) {
            if t.limit >= limit {
                return Ok(t);
            }
        }
        let t = Self::build(limit)?;
        t.save(path)?;
        Ok(t)
    }
}

#[inline]
fn prefix_diff(prefix: &[f64], range: Range<usize>) -> f64 {
    if range.start >= range.end {
        return 0.0;
    }
    let hi = prefix[range.end - 1];
    if range.start == 0 {
        hi
    } else {
        hi - prefix[range.start - 1]
    }
}

fn read_array<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut a = [0u8; N];
    r.read_exact(&mut a)?;
    Ok(a)
}

fn write_varint(buf: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        buf.push((v as u8) | 0x80);
        v >>= 7;
    }
    buf.push(v as u8);
}

fn read_varint(buf: &[u8], pos: &mut usize) -> Result<u64> {
    let mut v = 0u64;
    let mut shift = 0;
    loop {
        let b = *buf
            .get(*pos)
            .ok_or_else(|| Error::Malformed("truncated prime cache".into()))?;
        *pos += 1;
        if shift >= 64 {
            return Err(Error::Malformed("varint too long".into()));
        }
        v |= u64::from(b & 0x7f) << shift;
        if b & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

/// Deterministic trial-division primality test.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn small_tables() {
        assert_eq!(PrimeTable::build(10).unwrap().primes(), &[2, 3, 5, 7]);
        assert_eq!(PrimeTable::build(2).unwrap().primes(), &[2]);
        assert_eq!(PrimeTable::build(3).unwrap().primes(), &[2, 3]);
        assert!(matches!(PrimeTable::build(1), Err(Error::InvalidArgument(_))));
        assert!(matches!(PrimeTable::build(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn pi_of_a_million() {
        // independent count by trial division
        let brute = (2..=1_000_000u64).filter(|&n| is_prime(n)).count();
        assert_eq!(brute, 78_498);
        let t = PrimeTable::build(1_000_000).unwrap();
        assert_eq!(t.len(), brute);
        assert!(t.primes().windows(2).all(|w| w[0] < w[1]));
        assert!(t.inv_prefix().windows(2).all(|w| w[0] < w[1]));
        assert!(t.log1m_prefix().windows(2).all(|w| w[0] > w[1]));
        assert_eq!(t.inv_prefix().len(), t.len());
        assert_eq!(t.log1m_prefix().len(), t.len());
    }

    #[test]
    fn every_entry_is_prime() {
        let t = PrimeTable::build(200_000).unwrap();
        assert!(t.primes().iter().all(|&p| is_prime(p)));
    }

    #[test]
    fn gap_interval_examples() {
        let t = PrimeTable::build(1000).unwrap();
        let g = GapParameters::new(LN2).unwrap();
        let r = t.primes_in_gap_interval(2, &g).unwrap();
        assert_eq!(&t.primes()[r], &[3]);
        let r = t.primes_in_gap_interval(3, &g).unwrap();
        assert_eq!(&t.primes()[r], &[5, 7]);
        let zero = GapParameters::new(0.0).unwrap();
        for &p in &t.primes()[..20] {
            assert!(t.primes_in_gap_interval(p, &zero).unwrap().is_empty());
        }
    }

    #[test]
    fn gap_interval_errors() {
        let t = PrimeTable::build(100).unwrap();
        let g = GapParameters::new(LN2).unwrap();
        assert!(matches!(t.primes_in_gap_interval(11, &g), Err(Error::OutOfRange(_))));
        assert!(matches!(t.primes_in_gap_interval(9, &g), Err(Error::InvalidArgument(_))));
        assert!(matches!(t.primes_in_gap_interval(101, &g), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn gap_interval_monotone_in_z() {
        let t = PrimeTable::build(2_000_000).unwrap();
        let zs = [0.0, 0.2, 0.5, LN2, 1.0];
        for &p in &t.primes()[..40] {
            let mut prev_end = 0;
            for z in zs {
                let g = GapParameters::new(z).unwrap();
                let r = t.primes_in_gap_interval(p, &g).unwrap();
                assert_eq!(r.start, t.index_of(p).unwrap() + 1);
                assert!(r.end >= prev_end);
                prev_end = r.end;
            }
        }
    }

    #[test]
    fn mertens_sum_examples() {
        let t = PrimeTable::build(1_000_000).unwrap();
        let exact = 1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 5.0 + 1.0 / 7.0;
        assert!((t.mertens_sum(2, 10).unwrap() - exact).abs() < 1e-15);
        assert!((exact - 1.176_190_476_190_476).abs() < 1e-12);
        assert!((t.mertens_sum(7, 7).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert!(t.mertens_sum(11, 10).is_err());
        assert!(t.mertens_sum(1, 10).is_err());
        assert!(matches!(t.mertens_sum(2, 2_000_000), Err(Error::OutOfRange(_))));

        // direct summation oracle
        let direct: f64 = t.primes().iter().rev().map(|&p| 1.0 / p as f64).sum();
        let s = t.mertens_sum(2, 1_000_000).unwrap();
        assert!((s - direct).abs() < 1e-12);
        let lnln = (1e6f64).ln().ln();
        assert!((s - (lnln + 0.2615)).abs() <= 1.0 / (1e6f64).ln() + 0.01);
    }

    #[test]
    fn mertens_sum_bounded_deviation() {
        let t = PrimeTable::build(10_000_000).unwrap();
        for k in 2..=7 {
            let x = 10u64.pow(k);
            let dev = t.mertens_sum(2, x).unwrap() - (x as f64).ln().ln() - 0.2615;
            assert!(dev.abs() <= 0.5, "T=10^{k}: deviation {dev}");
        }
    }

    #[test]
    fn dimension_one_sieve_condition() {
        let t = PrimeTable::build(10_000_000).unwrap();
        let grid: Vec<u64> = (0..=70).map(|k| (2.0 * 10f64.powf(k as f64 / 10.0)) as u64).collect();
        for (i, &w) in grid.iter().enumerate() {
            for &y in &grid[i + 1..] {
                let y = y.min(10_000_000);
                if y <= w {
                    continue;
                }
                let lhs = (-t.log_mertens_product(w, y).unwrap()).exp();
                let rhs = 3.0 * (y as f64).ln() / (w as f64).ln();
                assert!(lhs <= rhs, "w={w} y={y}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn cache_round_trip_file() {
        let t = PrimeTable::build(100_000).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("primes.bin");
        t.save(&path).unwrap();
        let u = PrimeTable::load(&path).unwrap();
        assert_eq!(u.limit(), t.limit());
        assert_eq!(u.primes(), t.primes());
        assert_eq!(u.inv_prefix(), t.inv_prefix());
        let v = PrimeTable::load_or_build(&path, 50_000).unwrap();
        assert_eq!(v.limit(), 100_000);
        let w = PrimeTable::load_or_build(&path, 200_000).unwrap();
        assert_eq!(w.limit(), 200_000);
        assert_eq!(PrimeTable::load(&path).unwrap().limit(), 200_000);
    }

    #[test]
    fn cache_header_layout() {
        let t = PrimeTable::build(10).unwrap();
        let mut buf = Vec::new();
        t.write_cache(&mut buf).unwrap();
        let mut expected = b"OMZPRIME".to_vec();
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&10u64.to_le_bytes());
        expected.extend_from_slice(&4u64.to_le_bytes());
        expected.extend_from_slice(&[2, 1, 2, 2]);
        assert_eq!(buf, expected);
    }

    #[test]
    fn cache_rejects_corruption() {
        let t = PrimeTable::build(1000).unwrap();
        let mut buf = Vec::new();
        t.write_cache(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(PrimeTable::read_cache(&bad[..]).is_err());
        let truncated = &buf[..buf.len() - 1];
        assert!(PrimeTable::read_cache(truncated).is_err());
        let mut trailing = buf.clone();
        trailing.push(1);
        assert!(PrimeTable::read_cache(&trailing[..]).is_err());
    }

    proptest! {
        #[test]
        fn cache_round_trip(limit in 2u64..20_000) {
            let t = PrimeTable::build(limit).unwrap();
            let mut buf = Vec::new();
            t.write_cache(&mut buf).unwrap();
            let u = PrimeTable::read_cache(&buf[..]).unwrap();
            prop_assert_eq!(u.primes(), t.primes());
            prop_assert_eq!(u.limit(), limit);
        }

        #[test]
        fn sieve_matches_trial_division(limit in 2u64..3000) {
            let expect: Vec<u64> = (2..=limit).filter(|&n| is_prime(n)).collect();
            prop_assert_eq!(sieve_primes(limit), expect);
        }
    }
}
