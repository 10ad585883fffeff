//! Exact joint law of `(B_p)_{p <= N}` by enumerating every outcome of the
//! underlying independent Bernoulli variables.
//!
//! Two constructions are available. [`LawConstruction::PerPrime`] enumerates
//! every `X_q` with `q <= M` individually: the direct brute force, limited to
//! 24 primes. [`LawConstruction::Lumped`] keeps every `X_p` with `p <= N`
//! individual but merges the primes in `(N, N^(e^z)]` into blocks cut at the
//! gap-interval ends `p^(e^z)`; each `B_p` only asks whether *some* prime in
//! such a block is selected, so a block acts as one Bernoulli variable with
//! success probability `1 - prod (1 - 1/q)`. The resulting law is the same,
//! and the number of enumerated variables stays at most `2 pi(N)`.
//!
//! Probabilities are exact rationals throughout.

use std::collections::HashMap;
use std::ops::{AddAssign, Mul};

use num::{BigInt, BigRational, BigUint, One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::GapParameters;
use crate::primes::PrimeTable;

/// Hard cap on the number of enumerated Bernoulli variables.
pub const MAX_ATOMS: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawConstruction {
    PerPrime,
    Lumped,
}

/// One enumerated Bernoulli variable: "some prime of `primes` is selected".
#[derive(Clone, Debug)]
pub struct Atom {
    pub primes: Vec<u64>,
    pub prob: BigRational,
}

#[derive(Clone, Debug)]
pub struct JointLaw {
    params: GapParameters,
    cutoff: u64,
    primes: Vec<u64>,
    atoms: Vec<Atom>,
    construction: LawConstruction,
    /// `(mask, probability)` with bit `i` of the mask set when `B_{primes[i]} = 1`.
    outcomes: Vec<(u64, BigRational)>,
}

fn selection_prob(primes: &[u64]) -> BigRational {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for &q in primes {
        num *= q - 1;
        den *= q;
    }
    BigRational::one() - BigRational::new(num, den)
}

fn largest_prime_le(table: &PrimeTable, n: u64) -> Result<u64> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("N must be >= 2, got {n}")));
    }
    if n > table.limit() {
        return Err(Error::OutOfRange(format!("N = {n} beyond table limit {}", table.limit())));
    }
    Ok(table.primes()[table.count_le(n) - 1])
}

impl JointLaw {
    /// Brute force over every prime `q <= m`; needs `m >= N^(e^z)`.
    pub fn per_prime(m: u64, n: u64, params: &GapParameters, table: &PrimeTable) -> Result<Self> {
        let top = largest_prime_le(table, n)?;
        let reach = params.threshold(top);
        if m < reach {
            return Err(Error::InvalidArgument(format!(
                "enumeration cutoff M = {m} does not cover N^(e^z) = {reach}"
            )));
        }
        if m > table.limit() {
            return Err(Error::OutOfRange(format!("M = {m} beyond table limit {}", table.limit())));
        }
        let k = table.count_le(m);
        if k > MAX_ATOMS {
            return Err(Error::ResourceCap(format!(
                "{k} primes up to M = {m}, enumeration capped at {MAX_ATOMS}"
            )));
        }
        let atoms = table.primes()[..k]
            .iter()
            .map(|&q| Atom { primes: vec![q], prob: BigRational::new(1.into(), q.into()) })
            .collect();
        Self::from_atoms(n, params, table, atoms, LawConstruction::PerPrime)
    }

    /// Primes `<= N` individually, primes in `(N, N^(e^z)]` lumped into blocks.
    pub fn lumped(n: u64, params: &GapParameters, table: &PrimeTable) -> Result<Self> {
        let top = largest_prime_le(table, n)?;
        let reach = params.threshold(top);
        if reach > table.limit() {
            return Err(Error::OutOfRange(format!(
                "N^(e^z) = {reach} beyond table limit {}",
                table.limit()
            )));
        }
        let below = &table.primes()[..table.count_le(n)];
        let mut atoms: Vec<Atom> = below
            .iter()
            .map(|&q| Atom { primes: vec![q], prob: BigRational::new(1.into(), q.into()) })
            .collect();
        let mut cuts: Vec<u64> = below.iter().map(|&p| params.threshold(p)).filter(|&t| t > n).collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut lo = n;
        for hi in cuts {
            let block = &table.primes()[table.count_le(lo)..table.count_le(hi)];
            if !block.is_empty() {
                atoms.push(Atom { primes: block.to_vec(), prob: selection_prob(block) });
            }
            lo = hi;
        }
        if atoms.len() > MAX_ATOMS {
            return Err(Error::ResourceCap(format!(
                "{} enumerated variables, capped at {MAX_ATOMS}",
                atoms.len()
            )));
        }
        Self::from_atoms(n, params, table, atoms, LawConstruction::Lumped)
    }

    /// Per-prime brute force when `pi(M) <= 24`, otherwise the lumped law.
    pub fn build(m: u64, n: u64, params: &GapParameters, table: &PrimeTable) -> Result<Self> {
        if m <= table.limit() && table.count_le(m) <= MAX_ATOMS {
            Self::per_prime(m, n, params, table)
        } else {
            let top = largest_prime_le(table, n)?;
            if m < params.threshold(top) {
                return Err(Error::InvalidArgument(format!(
                    "enumeration cutoff M = {m} does not cover N^(e^z)"
                )));
            }
            Self::lumped(n, params, table)
        }
    }

    fn from_atoms(
        n: u64,
        params: &GapParameters,
        table: &PrimeTable,
        atoms: Vec<Atom>,
        construction: LawConstruction,
    ) -> Result<Self> {
        let primes = table.primes()[..table.count_le(n)].to_vec();
        // atom index of each p <= N, and the atoms lying in its gap interval
        let mut own = Vec::with_capacity(primes.len());
        let mut kill = Vec::with_capacity(primes.len());
        for &p in &primes {
            own.push(atoms.iter().position(|a| a.primes == [p]).expect("p <= N is an atom"));
            let mut mask = 0u32;
            for (a, atom) in atoms.iter().enumerate() {
                let inside = atom.primes.iter().filter(|&&q| params.in_gap_interval(p, q)).count();
                if inside > 0 {
                    if inside != atom.primes.len() {
                        return Err(Error::InvalidArgument(
                            "atom straddles a gap-interval boundary".into(),
                        ));
                    }
                    mask |= 1 << a;
                }
            }
            kill.push(mask);
        }
        let b_mask = |sel: u32| -> u64 {
            let mut b = 0u64;
            for i in 0..primes.len() {
                if sel >> own[i] & 1 == 1 && sel & kill[i] == 0 {
                    b |= 1 << i;
                }
            }
            b
        };

        let dens: Vec<BigUint> = atoms.iter().map(|a| a.prob.denom().to_biguint().unwrap()).collect();
        let nums: Vec<BigUint> = atoms.iter().map(|a| a.prob.numer().to_biguint().unwrap()).collect();
        let denominator: BigUint = dens.iter().product();
        let fits = denominator.bits() < 127;
        let outcomes = if fits {
            let pairs: Vec<(u128, u128)> = nums
                .iter()
                .zip(&dens)
                .map(|(a, d)| (to_u128(a), to_u128(&(d - a))))
                .collect();
            tally(&pairs, &b_mask)
                .into_iter()
                .map(|(b, w)| (b, BigUint::from(w)))
                .collect::<HashMap<_, _>>()
        } else {
            let pairs: Vec<(BigUint, BigUint)> =
                nums.iter().zip(&dens).map(|(a, d)| (a.clone(), d - a)).collect();
            tally(&pairs, &b_mask)
        };
        let den = BigInt::from(denominator);
        let mut outcomes: Vec<(u64, BigRational)> = outcomes
            .into_iter()
            .map(|(b, w)| (b, BigRational::new(BigInt::from(w), den.clone())))
            .collect();
        outcomes.sort_by_key(|(b, _)| *b);
        Ok(JointLaw { params: *params, cutoff: n, primes, atoms, construction, outcomes })
    }

    pub fn params(&self) -> &GapParameters {
        &self.params
    }

    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    /// Primes `p <= N`; bit `i` of an outcome mask refers to `primes()[i]`.
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn construction(&self) -> LawConstruction {
        self.construction
    }

    pub fn outcomes(&self) -> &[(u64, BigRational)] {
        &self.outcomes
    }

    pub fn total_probability(&self) -> BigRational {
        self.outcomes.iter().map(|(_, p)| p).sum()
    }

    pub fn expect<F: Fn(u64) -> BigRational>(&self, f: F) -> BigRational {
        self.outcomes.iter().map(|(b, p)| f(*b) * p).sum()
    }

    pub fn index_of(&self, p: u64) -> Option<usize> {
        self.primes.binary_search(&p).ok()
    }

    /// `E[B_{primes[i]}]`.
    pub fn mean_b(&self, i: usize) -> BigRational {
        self.expect(|b| bit(b, i))
    }

    /// Law of `S_N` as `(value, probability)`, increasing in value.
    pub fn s_distribution(&self) -> Vec<(u32, BigRational)> {
        let mut dist: Vec<BigRational> = vec![BigRational::zero(); self.primes.len() + 1];
        for (b, p) in &self.outcomes {
            dist[b.count_ones() as usize] += p;
        }
        dist.into_iter()
            .enumerate()
            .filter(|(_, p)| !p.is_zero())
            .map(|(s, p)| (s as u32, p))
            .collect()
    }

    /// Mean and central moments `E[(S_N - E S_N)^r]`, `r = 0..=r_max`.
    pub fn moments(&self, r_max: usize) -> ExactMoments {
        let dist = self.s_distribution();
        let mean: BigRational = dist.iter().map(|(s, p)| p * BigRational::from_integer((*s).into())).sum();
        let central = (0..=r_max)
            .map(|r| {
                dist.iter()
                    .map(|(s, p)| {
                        let d = BigRational::from_integer((*s).into()) - &mean;
                        num::pow(d, r) * p
                    })
                    .sum()
            })
            .collect();
        ExactMoments { construction: self.construction, atoms: self.atoms.len(), mean, central }
    }
}

pub(crate) fn bit(mask: u64, i: usize) -> BigRational {
    if mask >> i & 1 == 1 {
        BigRational::one()
    } else {
        BigRational::zero()
    }
}

fn to_u128(x: &BigUint) -> u128 {
    let digits = x.to_u64_digits();
    digits.iter().rev().fold(0u128, |acc, &d| (acc << 64) | d as u128)
}

/// Depth-first walk over all `2^K` selections, carrying the integer weight
/// `prod (num_a or den_a - num_a)`, tallied by B-mask.
fn tally<W, F>(pairs: &[(W, W)], b_mask: &F) -> HashMap<u64, W>
where
    W: Clone + Zero + One + AddAssign + for<'a> Mul<&'a W, Output = W>,
    F: Fn(u32) -> u64,
{
    fn walk<W, F>(pairs: &[(W, W)], depth: usize, sel: u32, w: W, b_mask: &F, out: &mut HashMap<u64, W>)
    where
        W: Clone + Zero + One + AddAssign + for<'a> Mul<&'a W, Output = W>,
        F: Fn(u32) -> u64,
    {
        if w.is_zero() {
            return;
        }
        if depth == pairs.len() {
            *out.entry(b_mask(sel)).or_insert_with(W::zero) += w;
            return;
        }
        let (on, off) = &pairs[depth];
        walk(pairs, depth + 1, sel | 1 << depth, w.clone() * on, b_mask, out);
        walk(pairs, depth + 1, sel, w * off, b_mask, out);
    }
    let mut out = HashMap::new();
    walk(pairs, 0, 0, W::one(), b_mask, &mut out);
    out
}

#[derive(Clone, Debug)]
pub struct ExactMoments {
    pub construction: LawConstruction,
    pub atoms: usize,
    pub mean: BigRational,
    /// `central[r] = E[(S_N - E S_N)^r]`.
    pub central: Vec<BigRational>,
}

/// Exact mean and central moments of `S_N` by outcome enumeration.
///
/// Every prime up to `m` is enumerated individually when there are at most
/// [`MAX_ATOMS`] of them; otherwise the lumped construction is used. `m`
/// must cover `N^(e^z)`.
pub fn exact_moments_by_enumeration(
    m: u64,
    n: u64,
    params: &GapParameters,
    table: &PrimeTable,
    r_max: usize,
) -> Result<ExactMoments> {
    Ok(JointLaw::build(m, n, params, table)?.moments(r_max))
}
