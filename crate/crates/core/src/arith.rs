//! Multiplicative arithmetic for moduli up to `2^63 - 1`.
//!
//! Covers factorization and the usual multiplicative functions, the density
//! `psi(q)` of primitive characters, the local product `P_q(s)` correcting
//! for coprimality to `q`, the size condition on the prime divisors of `q`
//! under which the moment asymptotic is stated, and the Rankin-Selberg
//! constant estimator.

use num_complex::Complex64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::eigenform::EigenformCoefficients;
use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Largest accepted input to [`factorize`].
pub const MAX_FACTORIZABLE: u64 = i64::MAX as u64;

const TRIAL_DIVISION_LIMIT: u64 = 1_000_000;

/// Prime factorization `value = prod p^e`, primes strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Factorization {
    value: u64,
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    /// Builds a factorization from `(prime, exponent)` pairs. The pairs are
    /// sorted and merged; primality is the caller's responsibility.
    pub fn from_factors(mut factors: Vec<(u64, u32)>) -> Result<Self> {
        factors.retain(|&(_, e)| e > 0);
        factors.sort_unstable();
        let mut merged: Vec<(u64, u32)> = Vec::with_capacity(factors.len());
        for (p, e) in factors {
            if p < 2 {
                return Err(Error::InvalidArgument(format!("{p} is not a prime")));
            }
            match merged.last_mut() {
                Some((last, exp)) if *last == p => *exp += e,
                _ => merged.push((p, e)),
            }
        }
        let mut value: u64 = 1;
        for &(p, e) in &merged {
            for _ in 0..e {
                value = value
                    .checked_mul(p)
                    .filter(|&v| v <= MAX_FACTORIZABLE)
                    .ok_or_else(|| {
                        Error::Overflow("factorization value exceeds 2^63 - 1".into())
                    })?;
            }
        }
        Ok(Self {
            value,
            factors: merged,
        })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.factors.iter().map(|&(p, _)| p)
    }

    /// Number of distinct prime factors, `nu(q)`.
    pub fn num_distinct_primes(&self) -> usize {
        self.factors.len()
    }

    pub fn is_squarefree(&self) -> bool {
        self.factors.iter().all(|&(_, e)| e == 1)
    }

    pub fn mobius(&self) -> i64 {
        if self.is_squarefree() {
            if self.factors.len().is_multiple_of(2) {
                1
            } else {
                -1
            }
        } else {
            0
        }
    }

    pub fn euler_phi(&self) -> u64 {
        self.factors
            .iter()
            .map(|&(p, e)| (p - 1) * p.pow(e - 1))
            .product()
    }

    pub fn divisor_count(&self) -> u64 {
        self.factors
            .iter()
            .map(|&(_, e)| u64::from(e) + 1)
            .product()
    }

    /// All positive divisors in increasing order.
    pub fn divisors(&self) -> Vec<u64> {
        let mut divs = vec![1u64];
        for &(p, e) in &self.factors {
            let base = divs.len();
            let mut pk = 1u64;
            for _ in 0..e {
                pk *= p;
                for i in 0..base {
                    divs.push(divs[i] * pk);
                }
            }
        }
        divs.sort_unstable();
        divs
    }

    /// Squarefree divisors with their factorizations, increasing.
    pub fn squarefree_divisors(&self) -> Vec<Factorization> {
        let r = self.factors.len();
        let mut out: Vec<Factorization> = (0u64..(1u64 << r))
            .map(|mask| {
                let factors: Vec<(u64, u32)> = (0..r)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| (self.factors[i].0, 1))
                    .collect();
                let value = factors.iter().map(|&(p, _)| p).product();
                Factorization { value, factors }
            })
            .collect();
        out.sort_by_key(|f| f.value);
        out
    }

    /// Factorization of a divisor `d` of this value.
    pub fn divisor(&self, d: u64) -> Result<Factorization> {
        if d == 0 || !self.value.is_multiple_of(d) {
            return Err(Error::InvalidArgument(format!(
                "{d} does not divide {}",
                self.value
            )));
        }
        let mut rest = d;
        let mut factors = Vec::new();
        for &(p, _) in &self.factors {
            let mut e = 0;
            while rest.is_multiple_of(p) {
                rest /= p;
                e += 1;
            }
            if e > 0 {
                factors.push((p, e));
            }
        }
        Ok(Factorization { value: d, factors })
    }

    pub fn is_coprime_to(&self, n: u64) -> bool {
        self.factors.iter().all(|&(p, _)| !n.is_multiple_of(p))
    }
}

/// Factors `n` by wheel trial division up to `10^6`, then Pollard rho.
pub fn factorize(n: u64) -> Result<Factorization> {
    if n == 0 {
        return Err(Error::Domain {
            op: "factorize",
            value: "0".into(),
            reason: "zero has no factorization",
        });
    }
    if n > MAX_FACTORIZABLE {
        return Err(Error::Domain {
            op: "factorize",
            value: n.to_string(),
            reason: "exceeds 2^63 - 1",
        });
    }
    let mut rest = n;
    let mut primes = Vec::new();
    let mut take = |p: u64, rest: &mut u64| {
        while (*rest).is_multiple_of(p) {
            *rest /= p;
            primes.push(p);
        }
    };
    for p in [2, 3, 5] {
        take(p, &mut rest);
    }
    const WHEEL: [u64; 8] = [4, 2, 4, 2, 4, 6, 2, 6];
    let mut d = 7u64;
    let mut i = 0;
    while d <= TRIAL_DIVISION_LIMIT && d * d <= rest {
        take(d, &mut rest);
        d += WHEEL[i];
        i = (i + 1) % WHEEL.len();
    }
    if rest > 1 {
        let mut stack = vec![rest];
        while let Some(m) = stack.pop() {
            if m == 1 {
                continue;
            }
            if is_prime(m) {
                primes.push(m);
            } else {
                let f = pollard_brent(m);
                stack.push(f);
                stack.push(m / f);
            }
        }
    }
    primes.sort_unstable();
    let mut factors: Vec<(u64, u32)> = Vec::new();
    for p in primes {
        match factors.last_mut() {
            Some((last, e)) if *last == p => *e += 1,
            _ => factors.push((p, 1)),
        }
    }
    Ok(Factorization { value: n, factors })
}

#[inline]
fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Returns a nontrivial factor of the odd composite `n`.
fn pollard_brent(n: u64) -> u64 {
    if n.is_multiple_of(2) {
        return 2;
    }
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut ys) = (2u64, 2u64, 2u64);
        let mut q = 1u64;
        let mut g = 1u64;
        let mut r = 1u64;
        const BATCH: u64 = 128;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..BATCH.min(r - k) {
                    y = f(y);
                    q = mul_mod(q, x.abs_diff(y), n);
                }
                g = gcd(q, n);
                k += BATCH;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return g;
        }
        c += 1;
    }
}

/// Number of divisors `d(n)` for `0 <= n <= limit` (entry 0 is 0).
pub fn divisor_count_table(limit: usize) -> Vec<u32> {
    let mut d = vec![0u32; limit + 1];
    for i in 1..=limit {
        let mut j = i;
        while j <= limit {
            d[j] += 1;
            j += i;
        }
    }
    d
}

/// Smallest prime factor for `0 <= n <= limit` (entries 0 and 1 are 0).
pub fn smallest_prime_factor_table(limit: usize) -> Vec<u32> {
    let mut spf = vec![0u32; limit + 1];
    let mut i = 2;
    while i <= limit {
        if spf[i] == 0 {
            let mut j = i;
            while j <= limit {
                if spf[j] == 0 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
        i += 1;
    }
    spf
}

/// `psi(q)` as an exact rational: `q psi(q)` counts primitive characters mod `q`.
pub fn psi(q: &Factorization) -> Ratio<i128> {
    q.factors()
        .iter()
        .fold(Ratio::from_integer(1), |acc, &(p, e)| {
            let p = p as i128;
            let local = if e == 1 {
                Ratio::new(p - 2, p)
            } else {
                Ratio::new((p - 1) * (p - 1), p * p)
            };
            acc * local
        })
}

/// Exact count `q psi(q)` of primitive characters mod `q`.
pub fn primitive_character_count(q: &Factorization) -> u64 {
    q.factors()
        .iter()
        .map(|&(p, e)| {
            if e == 1 {
                p.saturating_sub(2)
            } else {
                (p - 1) * (p - 1) * p.pow(e - 2)
            }
        })
        .product()
}

/// Value of the local product at `s`, with the log-derivative at `s = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerProductValue {
    pub at_s: Complex64,
    /// `P_q'(1) / P_q(1)`; only filled when evaluated at `s = 1`.
    pub log_derivative_at_1: Option<f64>,
}

impl EulerProductValue {
    /// `P_q'(1)`, when the log-derivative is available.
    pub fn derivative_at_1(&self) -> Option<f64> {
        self.log_derivative_at_1.map(|ld| ld * self.at_s.re)
    }
}

/// One factor `(1 - X)^2 (1 - (a^2 - 2) X + X^2) / (1 - X^2)` with `X = p^{-s}`,
/// simplified to `(1 - X)(1 - bX + X^2)/(1 + X)`.
fn local_p_factor(x: Complex64, b: f64) -> Complex64 {
    (1.0 - x) * (1.0 - b * x + x * x) / (1.0 + x)
}

/// `P_q(s) = prod_{p | q} (1 - p^-s)^2 (1 - (a(p)^2 - 2) p^-s + p^-2s) (1 - p^-2s)^-1`.
///
/// Requires `Re(s) > 1/2`. At `s = 1` the log-derivative is obtained by
/// differentiating each factor as a polynomial in `p^-s`.
pub fn euler_product_p(
    q: &Factorization,
    s: Complex64,
    coeffs: &EigenformCoefficients,
) -> Result<EulerProductValue> {
    if s.re <= 0.5 {
        return Err(Error::Domain {
            op: "euler_product_p",
            value: format!("{s}"),
            reason: "requires Re(s) > 1/2",
        });
    }
    let mut at_s = Complex64::new(1.0, 0.0);
    for p in q.primes() {
        let ap = coeffs.try_a(p)?;
        let x = Complex64::new(p as f64, 0.0).powc(-s);
        at_s *= local_p_factor(x, ap * ap - 2.0);
    }
    let log_derivative_at_1 = if s == Complex64::new(1.0, 0.0) {
        let mut acc = NeumaierSum::new();
        for p in q.primes() {
            let ap = coeffs.try_a(p)?;
            let b = ap * ap - 2.0;
            let x = 1.0 / p as f64;
            // d/dX log F(X), then dX/ds = -log(p) X.
            let dlog_dx =
                -1.0 / (1.0 - x) + (2.0 * x - b) / (1.0 - b * x + x * x) - 1.0 / (1.0 + x);
            acc.add(-(p as f64).ln() * x * dlog_dx);
        }
        Some(acc.value())
    } else {
        None
    };
    Ok(EulerProductValue {
        at_s,
        log_derivative_at_1,
    })
}

/// Diagnostic for the prime-divisor size condition on `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub q: u64,
    pub x_threshold: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Smallest modulus for which `log log log q` is used.
pub const MIN_CONDITION_MODULUS: u64 = 17;

/// Evaluates `sum_{p | q, p > x} 1/p <= (log log q)^-10` with
/// `x = exp(log log q / (200 log log log q))`.
///
/// At computable sizes `x` is barely above 1, so the condition fails for
/// every `q` with a small prime factor. This does not block any moment
/// computation.
pub fn check_assumption(q: &Factorization) -> Result<ConditionReport> {
    if q.value() < MIN_CONDITION_MODULUS {
        return Err(Error::Domain {
            op: "check_assumption",
            value: q.value().to_string(),
            reason: "needs q >= 17 for the iterated logarithms",
        });
    }
    let llq = (q.value() as f64).ln().ln();
    let lllq = llq.ln();
    let x_threshold = (llq / (200.0 * lllq)).exp();
    let lhs = q
        .primes()
        .filter(|&p| p as f64 > x_threshold)
        .map(|p| 1.0 / p as f64)
        .collect::<NeumaierSum>()
        .value();
    let rhs = llq.powi(-10);
    Ok(ConditionReport {
        q: q.value(),
        x_threshold,
        lhs,
        rhs,
        holds: lhs <= rhs,
    })
}

/// `(log q)^0.05`, the split between small and large divisors.
pub fn divisor_split_threshold(q: u64) -> f64 {
    (q as f64).ln().powf(0.05)
}

/// `sum_{d | q, d >= (log q)^0.05} |mu(d)| prod_{p | d} (1 + 10/sqrt p) / d`.
pub fn divisor_condition_sum(q: &Factorization) -> Result<f64> {
    if q.value() < 3 {
        return Err(Error::Domain {
            op: "divisor_condition_sum",
            value: q.value().to_string(),
            reason: "needs q >= 3",
        });
    }
    Ok(divisor_condition_sum_above(
        q,
        divisor_split_threshold(q.value()),
    ))
}

/// Same sum with an explicit lower bound on `d`.
pub fn divisor_condition_sum_above(q: &Factorization, threshold: f64) -> f64 {
    q.squarefree_divisors()
        .iter()
        .filter(|d| d.value() as f64 >= threshold)
        .map(|d| {
            let weight: f64 = d.primes().map(|p| 1.0 + 10.0 / (p as f64).sqrt()).product();
            weight / d.value() as f64
        })
        .collect::<NeumaierSum>()
        .value()
}

/// How the Rankin-Selberg constant is estimated from partial sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KMethod {
    /// `2 sum_{n <= N} a(n)^2 / N`.
    PartialSum,
    /// Two partial-sum estimates at `N` and `N/2` combined to cancel an
    /// error term of size `N^-2/5`.
    Richardson,
}

/// Cutoff used when no override is given.
pub const DEFAULT_K_CUTOFF: usize = 400_000;

/// Exponent of the assumed error `E(N) ~ N^-2/5` in the partial-sum estimate.
const RANKIN_SELBERG_ERROR_EXPONENT: f64 = 0.4;

/// `K = 2 lim sum_{n <= N} a(n)^2 / N`, estimated at a finite cutoff.
pub fn estimate_k(coeffs: &EigenformCoefficients, cutoff: usize) -> Result<f64> {
    if cutoff == 0 {
        return Err(Error::Domain {
            op: "estimate_k",
            value: "0".into(),
            reason: "cutoff must be positive",
        });
    }
    if cutoff > coeffs.len() {
        return Err(Error::TableTooShort {
            required: cutoff,
            available: coeffs.len(),
        });
    }
    let sum = (1..=cutoff)
        .map(|n| {
            let a = coeffs.a(n);
            a * a
        })
        .collect::<NeumaierSum>()
        .value();
    Ok(2.0 * sum / cutoff as f64)
}

/// [`estimate_k`] with the chosen extrapolation.
pub fn estimate_k_with(
    coeffs: &EigenformCoefficients,
    cutoff: usize,
    method: KMethod,
) -> Result<f64> {
    match method {
        KMethod::PartialSum => estimate_k(coeffs, cutoff),
        KMethod::Richardson => {
            let full = estimate_k(coeffs, cutoff)?;
            let half = estimate_k(coeffs, (cutoff / 2).max(1))?;
            let r = 2f64.powf(RANKIN_SELBERG_ERROR_EXPONENT);
            Ok((r * full - half) / (r - 1.0))
        }
    }
}
