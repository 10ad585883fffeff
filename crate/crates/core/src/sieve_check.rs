//! Exact counts of `E_{m <= n}[delta_{p_1,z}(m) ... delta_{p_u,z}(m)]`
//! against the product the model predicts for them.

use std::io::Write;

use num::rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::model_h;
use crate::params::GapParameters;
use crate::primes::{is_prime, sieve_primes, PrimeTable};

pub const MAX_TUPLE: usize = 3;
pub const MAX_N: u64 = 1_000_000_000;
pub const MAX_EXCLUDED: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct JointDeltaQuery {
    primes: Vec<u64>,
    params: GapParameters,
    n: u64,
}

impl JointDeltaQuery {
    pub fn new(primes: Vec<u64>, params: GapParameters, n: u64) -> Result<Self> {
        if primes.is_empty() || primes.len() > MAX_TUPLE {
            return Err(Error::InvalidArgument(format!(
                "tuple must hold 1..={MAX_TUPLE} primes, got {}",
                primes.len()
            )));
        }
        if !primes.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument("tuple must be strictly increasing".into()));
        }
        if let Some(&p) = primes.iter().find(|&&p| !is_prime(p)) {
            return Err(Error::InvalidArgument(format!("{p} is not prime")));
        }
        if n == 0 || n > MAX_N {
            return Err(Error::ResourceCap(format!("n must be in 1..={MAX_N}, got {n}")));
        }
        Ok(JointDeltaQuery { primes, params, n })
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn params(&self) -> &GapParameters {
        &self.params
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// Some consecutive pair has `p_{i+1} <= p_i^(e^z)`.
    pub fn is_linked(&self) -> bool {
        self.primes.windows(2).any(|w| self.params.within_reach(w[0], w[1]))
    }

    /// Primes in the union of the gap intervals, capped at `n`.
    fn excluded(&self) -> Result<Vec<u64>> {
        let top = self.primes.iter().map(|&p| self.params.threshold(p)).max().unwrap_or(0).min(self.n);
        let estimate = if top < 3 { 0.0 } else { top as f64 / (top as f64).ln() };
        if estimate > 1.3 * MAX_EXCLUDED as f64 {
            return Err(Error::ResourceCap(format!("excluded prime set up to {top} is too large")));
        }
        let all = sieve_primes(top);
        let out: Vec<u64> = all
            .into_iter()
            .filter(|&q| self.primes.iter().any(|&p| self.params.in_gap_interval(p, q)))
            .collect();
        if out.len() > MAX_EXCLUDED {
            return Err(Error::ResourceCap(format!(
                "{} excluded primes exceeds {MAX_EXCLUDED}",
                out.len()
            )));
        }
        Ok(out)
    }
}

/// `#{m <= n : p_i | m for all i, and no excluded prime divides m} / n`.
///
/// Walks the multiples `m = k P` of `P = p_1 ... p_u` and strikes out every
/// `k` that an excluded prime divides.
pub fn joint_empirical(q: &JointDeltaQuery) -> Result<Ratio<u64>> {
    let excluded = q.excluded()?;
    let product = q.primes.iter().try_fold(1u64, |acc, &p| acc.checked_mul(p));
    let count = match product {
        Some(prod) if prod <= q.n => {
            if excluded.iter().any(|&e| prod % e == 0) {
                0
            } else {
                let k_max = (q.n / prod) as usize;
                let mut alive = vec![true; k_max + 1];
                alive[0] = false;
                for &e in &excluded {
                    let e = e as usize;
                    let mut k = e;
                    while k <= k_max {
                        alive[k] = false;
                        k += e;
                    }
                }
                alive.iter().filter(|&&a| a).count() as u64
            }
        }
        _ => 0,
    };
    Ok(Ratio::new(count, q.n))
}

/// `prod_i (1/p_i) prod_{p_i < q <= p_i^(e^z)} (1 - 1/q)`, or 0 for a
/// linked tuple.
pub fn joint_predicted(q: &JointDeltaQuery, table: &PrimeTable) -> Result<f64> {
    let mut value = 1.0;
    for &p in &q.primes {
        value *= model_h(p, &q.params, table)?;
    }
    if q.is_linked() {
        return Ok(0.0);
    }
    Ok(value)
}

/// Acceptance envelope `|empirical - predicted| <= rel * predicted + abs_coeff / sqrt(n)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub rel: f64,
    pub abs_coeff: f64,
}

impl Envelope {
    pub fn allows(&self, empirical: f64, predicted: f64, n: u64) -> bool {
        (empirical - predicted).abs() <= self.rel * predicted + self.abs_coeff / (n as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SieveCheckRow {
    pub primes: Vec<u64>,
    pub z: f64,
    pub n: u64,
    pub count: u64,
    pub empirical: f64,
    pub predicted: f64,
    pub linked: bool,
}

impl SieveCheckRow {
    pub fn abs_error(&self) -> f64 {
        (self.empirical - self.predicted).abs()
    }

    pub fn rel_error(&self) -> f64 {
        if self.predicted == 0.0 {
            if self.empirical == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.abs_error() / self.predicted
        }
    }
}

pub fn check_query(q: &JointDeltaQuery, table: &PrimeTable) -> Result<SieveCheckRow> {
    let emp = joint_empirical(q)?;
    Ok(SieveCheckRow {
        primes: q.primes.clone(),
        z: q.params.z(),
        n: q.n,
        count: emp.numer() * (q.n / emp.denom()),
        empirical: *emp.numer() as f64 / *emp.denom() as f64,
        predicted: joint_predicted(q, table)?,
        linked: q.is_linked(),
    })
}

/// Every increasing tuple of `1..=u_max` primes `<= max_p`.
pub fn all_tuples(max_p: u64, u_max: usize) -> Vec<Vec<u64>> {
    let ps = sieve_primes(max_p);
    let mut out: Vec<Vec<u64>> = Vec::new();
    let mut frontier: Vec<Vec<u64>> = ps.iter().map(|&p| vec![p]).collect();
    for _ in 0..u_max.min(MAX_TUPLE) {
        out.extend(frontier.iter().cloned());
        frontier = frontier
            .iter()
            .flat_map(|t| {
                let last = *t.last().unwrap();
                ps.iter().filter(move |&&p| p > last).map(move |&p| {
                    let mut v = t.clone();
                    v.push(p);
                    v
                })
            })
            .collect();
    }
    out
}

/// Runs a batch in parallel; rows come back in input order.
pub fn check_batch(queries: &[JointDeltaQuery], table: &PrimeTable) -> Result<Vec<SieveCheckRow>> {
    queries.par_iter().map(|q| check_query(q, table)).collect()
}

/// CSV: `p1,p2,p3,z,n,empirical,predicted,abs_error,rel_error`.
pub fn write_csv<W: Write>(w: W, rows: &[SieveCheckRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["p1", "p2", "p3", "z", "n", "empirical", "predicted", "abs_error", "rel_error"])?;
    for r in rows {
        let mut rec: Vec<String> = (0..MAX_TUPLE)
            .map(|i| r.primes.get(i).map(|p| p.to_string()).unwrap_or_default())
            .collect();
        rec.extend([
            r.z.to_string(),
            r.n.to_string(),
            r.empirical.to_string(),
            r.predicted.to_string(),
            r.abs_error().to_string(),
            r.rel_error().to_string(),
        ]);
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn g(z: f64) -> GapParameters {
        GapParameters::new(z).unwrap()
    }

    fn q(ps: &[u64], z: f64, n: u64) -> JointDeltaQuery {
        JointDeltaQuery::new(ps.to_vec(), g(z), n).unwrap()
    }

    #[test]
    fn empirical_examples() {
        assert_eq!(joint_empirical(&q(&[2], 0.0, 100)).unwrap(), Ratio::new(50, 100));
        let direct = (1..=100u64).filter(|m| m % 2 == 0 && m % 3 != 0).count() as u64;
        assert_eq!(direct, 34);
        assert_eq!(joint_empirical(&q(&[2], LN2, 100)).unwrap(), Ratio::new(34, 100));
        // linked: 3 lies in (2, 4]
        let linked = q(&[2, 3], LN2, 1000);
        assert!(linked.is_linked());
        assert_eq!(joint_empirical(&linked).unwrap(), Ratio::new(0, 1000));
    }

    #[test]
    fn empirical_matches_definition() {
        use crate::gap_counter::DivisorList;
        // brute force over m via the delta definition
        let n = 3000u64;
        for (ps, z) in [(vec![2u64, 5], LN2), (vec![3], 0.5), (vec![2, 7, 53], LN2), (vec![5, 11], 0.0)] {
            let params = g(z);
            let brute = (1..=n)
                .filter(|&m| {
                    let d = DivisorList::by_trial_division(m);
                    ps.iter().all(|&p| {
                        d.primes().contains(&p)
                            && !d.primes().iter().any(|&r| params.in_gap_interval(p, r))
                    })
                })
                .count() as u64;
            assert_eq!(joint_empirical(&q(&ps, z, n)).unwrap(), Ratio::new(brute, n), "{ps:?}");
        }
    }

    #[test]
    fn predicted_examples() {
        let t = PrimeTable::build(100_000).unwrap();
        assert!((joint_predicted(&q(&[2], LN2, 100), &t).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        for &p in &[2u64, 3, 5, 97] {
            assert_eq!(joint_predicted(&q(&[p], 0.0, 100), &t).unwrap(), 1.0 / p as f64);
            assert_eq!(
                joint_predicted(&q(&[p], LN2, 100), &t).unwrap(),
                model_h(p, &g(LN2), &t).unwrap()
            );
        }
        // the gap interval of 11 at z = ln 2 is (11, 121]
        let mut expect = (1.0 / 3.0) * (1.0 / 11.0);
        for &r in &t.primes()[t.count_le(11)..t.count_le(121)] {
            expect *= 1.0 - 1.0 / r as f64;
        }
        let got = joint_predicted(&q(&[2, 11], LN2, 100), &t).unwrap();
        assert!((got - expect).abs() < 1e-15 * expect.max(1e-300) * 10.0);
        assert_eq!(joint_predicted(&q(&[2, 3], LN2, 100), &t).unwrap(), 0.0);
    }

    #[test]
    fn query_validation() {
        assert!(JointDeltaQuery::new(vec![], g(0.0), 10).is_err());
        assert!(JointDeltaQuery::new(vec![2, 3, 5, 7], g(0.0), 10).is_err());
        assert!(JointDeltaQuery::new(vec![3, 2], g(0.0), 10).is_err());
        assert!(JointDeltaQuery::new(vec![4], g(0.0), 10).is_err());
        assert!(JointDeltaQuery::new(vec![2], g(0.0), MAX_N + 1).is_err());
    }

    #[test]
    fn excluded_cap() {
        let big = JointDeltaQuery::new(vec![97], g(3.0), MAX_N).unwrap();
        assert!(matches!(joint_empirical(&big), Err(Error::ResourceCap(_))));
    }

    #[test]
    fn tuples_enumeration() {
        let t = all_tuples(10, 2);
        assert_eq!(t.len(), 4 + 6);
        assert!(t.contains(&vec![3, 7]));
    }

    #[test]
    fn csv_layout() {
        let t = PrimeTable::build(1000).unwrap();
        let rows = check_batch(&[q(&[2], LN2, 100), q(&[2, 5], LN2, 100)], &t).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "p1,p2,p3,z,n,empirical,predicted,abs_error,rel_error");
        assert!(lines[1].starts_with("2,,,"));
        assert!(lines[2].starts_with("2,5,,"));
        assert_eq!(rows[0].count, 34);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn table() -> &'static PrimeTable {
            static T: std::sync::OnceLock<PrimeTable> = std::sync::OnceLock::new();
            T.get_or_init(|| PrimeTable::build(1_000_000).unwrap())
        }

        fn tuple() -> impl Strategy<Value = Vec<u64>> {
            proptest::sample::subsequence(sieve_primes(60), 1..=3)
        }

        proptest! {
            #[test]
            fn single_prime_prediction_is_h(i in 0usize..168, z in 0.0f64..1.0) {
                let p = sieve_primes(1000)[i];
                let params = g(z);
                prop_assume!(params.threshold(p) <= table().limit());
                let query = JointDeltaQuery::new(vec![p], params, 10).unwrap();
                prop_assert_eq!(joint_predicted(&query, table()).unwrap(), model_h(p, &params, table()).unwrap());
            }

            #[test]
            fn empirical_counts_the_definition(ps in tuple(), z in 0.0f64..1.2, n in 1u64..4000) {
                use crate::gap_counter::DivisorList;
                let params = g(z);
                let query = JointDeltaQuery::new(ps.clone(), params, n).unwrap();
                let brute = (1..=n)
                    .filter(|&m| {
                        let d = DivisorList::by_trial_division(m);
                        ps.iter().all(|&p| {
                            d.primes().contains(&p)
                                && !d.primes().iter().any(|&r| params.in_gap_interval(p, r))
                        })
                    })
                    .count() as u64;
                let emp = joint_empirical(&query).unwrap();
                prop_assert_eq!(*emp.numer() * (n / *emp.denom()), brute);
                if query.is_linked() {
                    prop_assert_eq!(brute, 0);
                    prop_assert_eq!(joint_predicted(&query, table()).unwrap(), 0.0);
                }
            }
        }
    }
}
