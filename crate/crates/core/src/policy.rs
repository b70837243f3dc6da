//! Degree scheduling for decode-or-discard transmission.
//!
//! When the receiver already knows `r` of the `k` codeword symbols, a fresh
//! degree-`d` encoding symbol decodes exactly when its index set contains
//! `d-1` known positions and one unknown. This module provides:
//!
//! * `revealing_probability` — the hypergeometric probability of that event,
//!   generic over the scalar type (floats for simulation, [`crate::Exact`]
//!   for zero-tolerance checks);
//! * `optimal_degree` — the closed-form smallest degree maximizing it;
//! * `brute_force_optimal_degree` — an independent exact-arithmetic argmax
//!   scan used as the oracle for the closed form;
//! * analytic bound calculators for expected symbol counts and feedback
//!   message counts;
//! * [`DegreePolicy`] — the precomputed schedule for one `(k, γ)` session.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::scalar::{from_count, ratio, Scalar};
use crate::Exact;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("codeword length k must be positive")]
    ZeroCodewordLength,
    #[error("known-symbol count r={r} must be less than k={k}")]
    RankOutOfRange { r: u64, k: u64 },
    #[error("degree d={d} must lie in [1, k={k}]")]
    DegreeOutOfRange { d: u64, k: u64 },
    #[error("truncation fraction must satisfy 0 < gamma < 1/2, got {0}")]
    GammaOutOfRange(String),
    #[error(
        "gamma could not be parsed from {0:?}: expected a decimal like 0.1 or a fraction like 1/10"
    )]
    GammaParse(String),
    #[error("degree schedule requires k >= 4/gamma^2 (k={k}, need at least {needed})")]
    TruncationTooAggressive { k: u64, needed: u64 },
}

/// Truncation fraction `γ ∈ (0, 1/2)`, kept as an exact rational so block
/// lengths, recovery targets and erasure weights never suffer float rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gamma {
    num: u64,
    den: u64,
}

/// Widest accepted numerator/denominator; keeps every derived integer
/// (block length, `4/γ²` minimum, `2/γ` cap) inside u64 arithmetic.
const GAMMA_MAX_DEN: u64 = 1_000_000_000;

impl Gamma {
    pub fn new(num: u64, den: u64) -> Result<Self, PolicyError> {
        if den == 0 || num == 0 || num > GAMMA_MAX_DEN || den > GAMMA_MAX_DEN || 2 * num >= den {
            return Err(PolicyError::GammaOutOfRange(format!("{num}/{den}")));
        }
        let g = gcd(num, den);
        Ok(Gamma {
            num: num / g,
            den: den / g,
        })
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn numer(&self) -> u64 {
        self.num
    }

    pub fn denom(&self) -> u64 {
        self.den
    }

    /// `⌊γk⌋`: the number of codeword positions the truncated protocol
    /// deliberately leaves unknown.
    pub fn miss_count(&self, k: u64) -> u64 {
        (self.num as u128 * k as u128 / self.den as u128) as u64
    }

    /// `⌈(1-γ)k⌉ = k - ⌊γk⌋`: the recovery target of the truncated protocol.
    pub fn target(&self, k: u64) -> u64 {
        k - self.miss_count(k)
    }

    /// `⌈k' / (1-2γ)⌉`: block length of the rate-`1-2γ` precode.
    pub fn block_length(&self, k_prime: u64) -> u64 {
        let num = k_prime as u128 * self.den as u128;
        let den = (self.den - 2 * self.num) as u128;
        u64::try_from(num.div_ceil(den)).expect("block length fits u64")
    }

    /// `⌊2/γ⌋`, the schedule-wide cap on the top degree.
    pub fn degree_cap(&self) -> u64 {
        2 * self.den / self.num
    }

    /// Smallest `k` with `k ≥ 4/γ²`, the precondition for the schedule to
    /// advance by single-degree increments throughout the truncated range.
    pub fn min_block_length(&self) -> u64 {
        let num = 4 * self.den as u128 * self.den as u128;
        let den = self.num as u128 * self.num as u128;
        u64::try_from(num.div_ceil(den)).expect("schedule minimum fits u64")
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for Gamma {
    type Err = PolicyError;

    /// Accepts `"1/10"` or a plain decimal such as `"0.1"`; both are exact.
    fn from_str(s: &str) -> Result<Self, PolicyError> {
        let parse_err = || PolicyError::GammaParse(s.to_string());
        if let Some((n, d)) = s.split_once('/') {
            let num: u64 = n.trim().parse().map_err(|_| parse_err())?;
            let den: u64 = d.trim().parse().map_err(|_| parse_err())?;
            return Gamma::new(num, den);
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if frac_part.len() > 9 || !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return Err(parse_err());
        }
        let int_val: u64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| parse_err())?
        };
        let den = 10u64.pow(frac_part.len() as u32);
        let frac_val: u64 = if frac_part.is_empty() {
            0
        } else {
            frac_part.parse().map_err(|_| parse_err())?
        };
        Gamma::new(int_val * den + frac_val, den)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn check_rank(k: u64, r: u64) -> Result<(), PolicyError> {
    if k == 0 {
        return Err(PolicyError::ZeroCodewordLength);
    }
    if r >= k {
        return Err(PolicyError::RankOutOfRange { r, k });
    }
    Ok(())
}

/// Smallest degree maximizing the revealing probability at `r` of `k` known.
///
/// The maximizer is `⌊(k+1)/(k-r)⌋` except when `(k-r)` divides `(r+1)`: there
/// the probability ties between `(r+1)/(k-r)` and the next degree, and the
/// smaller one wins (fewer XORs per processed symbol). The `r = k-1` endpoint
/// falls out of the same rule as `d = k`.
pub fn optimal_degree(k: u64, r: u64) -> Result<u64, PolicyError> {
    check_rank(k, r)?;
    let remaining = k - r;
    if (r + 1).is_multiple_of(remaining) {
        Ok((r + 1) / remaining)
    } else {
        Ok((k + 1) / remaining)
    }
}

/// Probability that a uniform degree-`d` subset of the `k` positions has
/// exactly one unknown member when `r` positions are known:
/// `C(r, d-1) * (k-r) / C(k, d)`, evaluated as a product of small ratios.
pub fn revealing_probability<T: Scalar>(k: u64, r: u64, d: u64) -> Result<T, PolicyError> {
    check_rank(k, r)?;
    if d == 0 || d > k {
        return Err(PolicyError::DegreeOutOfRange { d, k });
    }
    if d - 1 > r {
        return Ok(T::zero());
    }
    // C(r, d-1) * (k-r) / C(k, d) = d*(k-r)/(k-d+1) * prod_{i=0}^{d-2} (r-i)/(k-i)
    let mut p: T = from_count::<T>(d) * from_count::<T>(k - r) / from_count::<T>(k - d + 1);
    for i in 0..d.saturating_sub(1) {
        p = p * ratio::<T>(r - i, k - i);
    }
    Ok(p)
}

/// Exhaustive argmax of the revealing probability over `d ∈ [1, k]`, in exact
/// big-integer arithmetic, ties broken toward the smallest degree.
///
/// Independent oracle for [`optimal_degree`]: it never consults the closed
/// form, it walks the probabilities as unreduced fractions
/// `d*(k-r)*falling(r, d-1) / falling(k, d)` and cross-multiplies to compare.
pub fn brute_force_optimal_degree(k: u64, r: u64) -> Result<u64, PolicyError> {
    check_rank(k, r)?;
    // d = 1: numerator (k-r), denominator k.
    let mut best_d = 1u64;
    let mut best_num = BigUint::from(k - r);
    let mut best_den = BigUint::from(k);
    // falling(r, d-1) and falling(k, d) maintained incrementally.
    let mut known_falling = BigUint::one();
    let mut total_falling = BigUint::from(k);
    for d in 2..=k {
        if d > r + 1 {
            break; // probability is zero from here on; cannot beat the best
        }
        known_falling *= r - (d - 2);
        total_falling *= k - (d - 1);
        let num = &known_falling * (d * (k - r));
        // p(d) > p(best) <=> num/total > best_num/best_den
        if &num * &best_den > &best_num * &total_falling {
            best_d = d;
            best_num = num;
            best_den = total_falling.clone();
        }
    }
    Ok(best_d)
}

/// Slack constant `4e + 1` absorbed into the analytic symbol-count bounds so
/// the acceptance thresholds are reproducible.
pub fn bound_slack<T: num_traits::Float>() -> T {
    let four = T::from(4.0).expect("constant");
    four * T::one().exp() + T::one()
}

/// Upper bound on the expected number of processed encoding symbols needed to
/// reach the `⌈(1-γ)k⌉` recovery target: `2k - eγk + (4e + 1)`.
pub fn expected_symbols_bound<T: num_traits::Float>(k: u64, gamma: T) -> Result<T, PolicyError> {
    if k == 0 {
        return Err(PolicyError::ZeroCodewordLength);
    }
    let half = T::from(0.5).expect("constant");
    if !(gamma > T::zero() && gamma < half) {
        return Err(PolicyError::GammaOutOfRange(format!(
            "{}",
            gamma.to_f64().unwrap_or(f64::NAN)
        )));
    }
    let k = T::from(k as f64).expect("k representable");
    let two = T::from(2.0).expect("constant");
    Ok(two * k - T::one().exp() * gamma * k + bound_slack::<T>())
}

/// End-to-end symbol-count bound for a `k'`-symbol message sent through the
/// composed code: `(1+γ)·2k' + (4e + 1)`.
pub fn composed_symbols_bound(k_prime: u64, gamma: f64) -> f64 {
    (1.0 + gamma) * 2.0 * k_prime as f64 + bound_slack::<f64>()
}

/// Exact number of feedback messages a lossless zero-latency session emits:
/// one per degree transition over `r ∈ [1, target]` plus the termination
/// message. Always at most `⌊2/γ⌋ + 1`.
pub fn feedback_budget(k: u64, gamma: Gamma) -> Result<u64, PolicyError> {
    if k == 0 {
        return Err(PolicyError::ZeroCodewordLength);
    }
    let target = gamma.target(k);
    let mut transitions = 0u64;
    let mut prev = optimal_degree(k, 0)?;
    for r in 1..=target.min(k - 1) {
        let d = optimal_degree(k, r)?;
        if d != prev {
            transitions += 1;
            prev = d;
        }
    }
    Ok(transitions + 1)
}

/// Precomputed degree schedule for one `(k, γ)` session.
///
/// Construction requires `k ≥ 4/γ²`; under that precondition the schedule
/// rises by exactly one degree per transition all the way to `target`, which
/// is what lets a single-bit "increment" acknowledgement keep the sender in
/// sync.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreePolicy {
    k: u64,
    gamma: Gamma,
    target: u64,
    max_degree: u64,
    /// Ascending `r` values at which the degree increments by one.
    transitions: Vec<u64>,
}

impl DegreePolicy {
    pub fn new(k: u64, gamma: Gamma) -> Result<Self, PolicyError> {
        if k == 0 {
            return Err(PolicyError::ZeroCodewordLength);
        }
        let needed = gamma.min_block_length();
        if k < needed {
            return Err(PolicyError::TruncationTooAggressive { k, needed });
        }
        let target = gamma.target(k);
        debug_assert!(target < k, "k >= 4/gamma^2 implies at least one miss");
        let mut transitions = Vec::new();
        let mut prev = optimal_degree(k, 0)?;
        for r in 1..=target {
            let d = optimal_degree(k, r)?;
            if d != prev {
                debug_assert_eq!(d, prev + 1, "schedule must step by single degrees");
                transitions.push(r);
                prev = d;
            }
        }
        let max_degree = prev;
        debug_assert!(max_degree <= gamma.degree_cap());
        Ok(DegreePolicy {
            k,
            gamma,
            target,
            max_degree,
            transitions,
        })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn gamma(&self) -> Gamma {
        self.gamma
    }

    /// `⌈(1-γ)k⌉`: processing stops once this many positions are known.
    pub fn target(&self) -> u64 {
        self.target
    }

    /// Degree in effect when the schedule is exhausted (`r = target`).
    pub fn max_degree(&self) -> u64 {
        self.max_degree
    }

    /// Ascending `r` values at which the degree increments.
    pub fn transitions(&self) -> &[u64] {
        &self.transitions
    }

    /// Degree the schedule prescribes at `r` known symbols, `r ≤ target`.
    pub fn degree_at(&self, r: u64) -> u64 {
        debug_assert!(r <= self.target);
        optimal_degree(self.k, r).expect("r <= target < k")
    }

    /// Total feedback messages of a lossless zero-latency session:
    /// every transition plus the termination message.
    pub fn feedback_budget(&self) -> u64 {
        self.transitions.len() as u64 + 1
    }
}

/// Rigorous rational bounds `(lo, hi)` with `lo < 1/e < hi`, from the series
/// `e = Σ 1/n!` truncated after `terms` terms (remainder under `2/(terms+1)!`).
pub fn one_over_e_bounds(terms: u64) -> (Exact, Exact) {
    let mut factorial = BigUint::one();
    let mut sum_num = BigUint::zero(); // running numerator over `factorial`
    for n in 0..=terms {
        if n > 0 {
            factorial *= n;
            sum_num *= n;
        }
        sum_num += BigUint::one();
    }
    let to_exact = |n: BigUint, d: BigUint| Exact::new(n.into(), d.into());
    // e_lo = sum, e_hi = sum + 2/(terms+1)!
    let e_lo = to_exact(sum_num.clone(), factorial.clone());
    let e_hi = to_exact(
        &sum_num * (terms + 1) + BigUint::from(2u32),
        factorial * (terms + 1),
    );
    (e_hi.recip(), e_lo.recip())
}

/// Certify `p ≥ 1/e` in exact arithmetic. Escalates the series precision in
/// the (never observed) event that `p` lands inside the bounding interval.
pub fn at_least_one_over_e(p: &Exact) -> bool {
    for terms in [30u64, 60, 120, 240] {
        let (lo, hi) = one_over_e_bounds(terms);
        if *p >= hi {
            return true;
        }
        if *p < lo {
            return false;
        }
    }
    panic!("1/e bounds at 240 series terms failed to separate p = {p}");
}
