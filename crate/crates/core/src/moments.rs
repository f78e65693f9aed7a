//! The second moment `sum*_{chi mod q} |L(f x chi, 1/2)|^2` over primitive
//! characters, by three routes:
//!
//! * direct: every central value from the approximate functional equation;
//! * double sum: orthogonality turns the moment into
//!   `sum_{d | q} mu(d) phi(q/d) sum_{n = m mod q/d, (nm, q) = 1}
//!   a(n) a(m) / sqrt(nm) V(nm / q^2)`;
//! * main term: `K P_q(1) psi(q) q log q`.
//!
//! Parallel reductions use fixed chunk boundaries and merge compensated
//! partial sums in chunk order, so every number is independent of the
//! thread count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{
    check_assumption, divisor_condition_sum, divisor_split_threshold, estimate_k_with,
    euler_product_p, factorize, psi, ConditionReport, Factorization, KMethod, DEFAULT_K_CUTOFF,
    MIN_CONDITION_MODULUS,
};
use crate::characters::CharacterGroup;
use crate::eigenform::{EigenformCoefficients, MAX_DELTA_TERMS};
use crate::error::{Error, Result};
use crate::lvalue::{afe_length, AfeOptions, AfeTerms};
use crate::special::VTable;
use crate::sum::NeumaierSum;

/// Characters per work unit in the direct sweep.
const CHARACTER_CHUNK: usize = 16;
/// Outer indices `n` per work unit in the double sum.
const PAIR_CHUNK: usize = 256;

/// Shared interpolated `V` for each weight.
pub fn v_table(weight: u32) -> Result<Arc<VTable>> {
    static TABLES: OnceLock<Mutex<HashMap<u32, Arc<VTable>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = tables.lock().expect("table cache poisoned").get(&weight) {
        return Ok(t.clone());
    }
    let table = Arc::new(VTable::new(weight)?);
    tables
        .lock()
        .expect("table cache poisoned")
        .insert(weight, table.clone());
    Ok(table)
}

fn check_modulus(q: u64) -> Result<Factorization> {
    if q < 3 {
        return Err(Error::Domain {
            op: "moment",
            value: q.to_string(),
            reason: "needs q >= 3",
        });
    }
    factorize(q)
}

fn merge_in_order(parts: Vec<NeumaierSum>) -> f64 {
    let mut total = NeumaierSum::new();
    for p in &parts {
        total.merge(p);
    }
    total.value()
}

/// Sum of `|L(f x chi, 1/2)|^2` over the primitive characters modulo `q`.
pub fn second_moment_direct(coeffs: &EigenformCoefficients, q: u64, tol: f64) -> Result<f64> {
    check_modulus(q)?;
    let group = CharacterGroup::new(q)?;
    let terms = AfeTerms::new(
        coeffs,
        q,
        Complex64::new(0.0, 0.0),
        tol,
        &AfeOptions::default(),
    )?;
    primitive_square_sum(&group, &terms)
}

/// `sum* |L|^2` with each pair `(chi, conj chi)` evaluated once.
fn primitive_square_sum(group: &CharacterGroup, terms: &AfeTerms) -> Result<f64> {
    let reps: Vec<(u64, f64)> = group
        .primitive_characters()
        .filter_map(|chi| {
            let bar = chi.conj().index();
            match chi.index().cmp(&bar) {
                std::cmp::Ordering::Less => Some((chi.index(), 2.0)),
                std::cmp::Ordering::Equal => Some((chi.index(), 1.0)),
                std::cmp::Ordering::Greater => None,
            }
        })
        .collect();
    let parts = reps
        .par_chunks(CHARACTER_CHUNK)
        .map(|chunk| {
            let mut acc = NeumaierSum::new();
            for &(index, multiplicity) in chunk {
                let chi = group.character(index)?;
                acc.add(multiplicity * terms.evaluate(&chi)?.norm_sqr());
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_in_order(parts))
}

/// The double-sum route with its decompositions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoubleSum {
    pub total: f64,
    /// `d < (log q)^0.05`.
    pub small_divisor_part: f64,
    pub large_divisor_part: f64,
    /// Terms `n = m` inside the small-divisor part.
    pub diagonal_part: f64,
    /// Terms `n != m` inside the small-divisor part.
    pub off_diagonal_part: f64,
    pub divisor_threshold: f64,
    /// Pairs with `nm / q^2 > cutoff` are dropped; `V(cutoff) <= tol`.
    pub cutoff: f64,
    pub max_product: u64,
}

/// Largest `nm` the double sum will need for modulus `q` and tolerance `tol`.
pub fn double_sum_length(weight: u32, q: u64, tol: f64) -> Result<u64> {
    let cutoff = v_table(weight)?.cutoff_for(tol);
    Ok((cutoff * (q as f64) * (q as f64)).floor() as u64)
}

/// Route via orthogonality; `max_terms` caps the coefficient range used.
pub fn second_moment_double_sum(
    coeffs: &EigenformCoefficients,
    q: u64,
    tol: f64,
    max_terms: usize,
) -> Result<DoubleSum> {
    let fq = check_modulus(q)?;
    let table = v_table(coeffs.weight())?;
    let cutoff = table.cutoff_for(tol);
    let qf = q as f64;
    let q2 = qf * qf;
    let max_product = (cutoff * q2).floor() as u64;
    if max_product as usize > max_terms.min(MAX_DELTA_TERMS) {
        return Err(Error::Budget(format!(
            "double sum for q = {q} needs coefficients up to {max_product}, budget is {}",
            max_terms.min(MAX_DELTA_TERMS)
        )));
    }
    let len = max_product as usize;
    if len > coeffs.len() {
        return Err(Error::TableTooShort {
            required: len,
            available: coeffs.len(),
        });
    }
    // b(n) = a(n)/sqrt(n) on units, 0 elsewhere.
    let b: Vec<f64> = (0..=len)
        .map(|n| {
            if n == 0 || !fq.is_coprime_to(n as u64) {
                0.0
            } else {
                coeffs.a(n) / (n as f64).sqrt()
            }
        })
        .collect();
    let root = (max_product as f64).sqrt().floor() as usize;
    let outer: Vec<usize> = (1..=root).collect();

    let diagonal = merge_in_order(
        outer
            .par_chunks(PAIR_CHUNK)
            .map(|chunk| {
                let mut acc = NeumaierSum::new();
                for &n in chunk {
                    if b[n] != 0.0 {
                        acc.add(b[n] * b[n] * table.eval((n * n) as f64 / q2));
                    }
                }
                acc
            })
            .collect(),
    );

    let threshold = divisor_split_threshold(q);
    let mut small = NeumaierSum::new();
    let mut large = NeumaierSum::new();
    let mut diag_small = NeumaierSum::new();
    let mut off_small = NeumaierSum::new();
    for d in fq.squarefree_divisors() {
        let ell = (q / d.value()) as usize;
        let weight = (d.mobius() * fq.divisor(ell as u64)?.euler_phi() as i64) as f64;
        // sum over n < m, m = n mod ell, nm <= max_product
        let off = merge_in_order(
            outer
                .par_chunks(PAIR_CHUNK)
                .map(|chunk| {
                    let mut acc = NeumaierSum::new();
                    for &n in chunk {
                        if b[n] == 0.0 {
                            continue;
                        }
                        let top = (max_product / n as u64) as usize;
                        let mut inner = NeumaierSum::new();
                        let mut m = n + ell;
                        while m <= top {
                            if b[m] != 0.0 {
                                inner.add(b[m] * table.eval((n * m) as f64 / q2));
                            }
                            m += ell;
                        }
                        acc.add(b[n] * inner.value());
                    }
                    acc
                })
                .collect(),
        );
        let term = weight * (diagonal + 2.0 * off);
        if (d.value() as f64) < threshold {
            small.add(term);
            diag_small.add(weight * diagonal);
            off_small.add(weight * 2.0 * off);
        } else {
            large.add(term);
        }
    }
    let small_divisor_part = small.value();
    let large_divisor_part = large.value();
    Ok(DoubleSum {
        total: small_divisor_part + large_divisor_part,
        small_divisor_part,
        large_divisor_part,
        diagonal_part: diag_small.value(),
        off_diagonal_part: off_small.value(),
        divisor_threshold: threshold,
        cutoff,
        max_product,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalSum {
    /// `sum_{(n, q) = 1} a(n)^2 / n V(n^2 / q^2)`.
    pub value: f64,
    /// `K P_q(1) log q`.
    pub prediction: f64,
    pub k_used: f64,
}

/// The diagonal sum against its leading-order prediction.
pub fn diagonal_sum(
    coeffs: &EigenformCoefficients,
    q: u64,
    tol: f64,
    k: f64,
) -> Result<DiagonalSum> {
    let fq = check_modulus(q)?;
    let table = v_table(coeffs.weight())?;
    let qf = q as f64;
    let top = (qf * table.cutoff_for(tol).sqrt()).floor() as usize;
    if top > coeffs.len() {
        return Err(Error::TableTooShort {
            required: top,
            available: coeffs.len(),
        });
    }
    let value = (1..=top)
        .filter(|&n| fq.is_coprime_to(n as u64))
        .map(|n| {
            let a = coeffs.a(n);
            a * a / n as f64 * table.eval((n as f64 / qf).powi(2))
        })
        .collect::<NeumaierSum>()
        .value();
    let p1 = euler_product_p(&fq, Complex64::new(1.0, 0.0), coeffs)?
        .at_s
        .re;
    Ok(DiagonalSum {
        value,
        prediction: k * p1 * qf.ln(),
        k_used: k,
    })
}

/// `K` from the partial sums of `a(n)^2` at the default cutoff.
pub fn default_k(coeffs: &EigenformCoefficients) -> Result<f64> {
    estimate_k_with(coeffs, DEFAULT_K_CUTOFF, KMethod::Richardson)
}

/// `K P_q(1) psi(q) q log q`.
pub fn main_term(coeffs: &EigenformCoefficients, q: u64, k: f64) -> Result<f64> {
    let fq = check_modulus(q)?;
    let p1 = euler_product_p(&fq, Complex64::new(1.0, 0.0), coeffs)?
        .at_s
        .re;
    let psi = psi(&fq);
    let psi = *psi.numer() as f64 / *psi.denom() as f64;
    let qf = q as f64;
    Ok(k * p1 * psi * qf * qf.ln())
}

/// `sum_{chi mod q} |L(f x chi, 1/2)|^2` over every character, imprimitive
/// ones included. A character induced from `chi*` modulo `d | q` has
/// `L(f x chi, 1/2) = L(f x chi*, 1/2) prod_{p | q} (1 - a(p) chi*(p)/sqrt(p) + chi*(p)^2/p)`.
pub fn full_group_moment(coeffs: &EigenformCoefficients, q: u64, tol: f64) -> Result<f64> {
    let fq = factorize(q)?;
    let zero = Complex64::new(0.0, 0.0);
    let mut total = NeumaierSum::new();
    for d in fq.divisors() {
        let group = CharacterGroup::new(d)?;
        let terms = AfeTerms::new(coeffs, d, zero, tol, &AfeOptions::default())?;
        let indices: Vec<u64> = group.primitive_characters().map(|c| c.index()).collect();
        let parts = indices
            .par_chunks(CHARACTER_CHUNK)
            .map(|chunk| {
                let mut acc = NeumaierSum::new();
                for &i in chunk {
                    let chi = group.character(i)?;
                    let mut value = terms.evaluate(&chi)?;
                    for p in fq.primes() {
                        let c = chi.value(p as i64);
                        let pf = p as f64;
                        value *= 1.0 - coeffs.try_a(p)? * c / pf.sqrt() + c * c / pf;
                    }
                    acc.add(value.norm_sqr());
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        total.add(merge_in_order(parts));
    }
    Ok(total.value())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentOptions {
    pub tol: f64,
    /// Replaces the estimated `K` in an extra ratio.
    pub k_override: Option<f64>,
    /// Largest coefficient index any route may use.
    pub max_terms: usize,
}

impl Default for MomentOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            k_override: None,
            max_terms: MAX_DELTA_TERMS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub q: u64,
    pub tol: f64,
    pub primitive_characters: u64,
    pub direct: f64,
    /// Absent when the double sum would exceed the coefficient budget.
    pub double_sum: Option<DoubleSum>,
    pub double_sum_skipped: Option<String>,
    pub diagonal: DiagonalSum,
    pub main_term: f64,
    pub k_used: f64,
    /// `direct / main_term`; absent when the main term vanishes.
    pub ratio: Option<f64>,
    pub k_override: Option<f64>,
    pub ratio_with_override: Option<f64>,
    pub p_q_1: f64,
    pub p_q_log_derivative_1: f64,
    pub condition: Option<ConditionReport>,
    pub divisor_condition_sum: f64,
    pub afe_truncation: usize,
}

/// Wall-clock seconds per stage; kept out of [`MomentReport`] so reports
/// stay reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub direct: f64,
    pub double_sum: f64,
    pub diagonal: f64,
    pub main_term: f64,
}

/// Coefficients needed by [`moment_report`] for `q`, ignoring the double sum.
pub fn required_terms(weight: u32, q: u64, tol: f64) -> Result<usize> {
    let needed = afe_length(
        weight,
        q,
        Complex64::new(0.0, 0.0),
        tol,
        &AfeOptions::default(),
    )?;
    let diag = ((q as f64) * v_table(weight)?.cutoff_for(tol).sqrt()).ceil() as usize;
    Ok(needed.max(diag).max(DEFAULT_K_CUTOFF))
}

/// Every route for one modulus. `k` is the Rankin-Selberg constant to use.
pub fn moment_report(
    coeffs: &EigenformCoefficients,
    q: u64,
    k: f64,
    options: &MomentOptions,
) -> Result<(MomentReport, StageTimings)> {
    let fq = check_modulus(q)?;
    let mut timings = StageTimings::default();
    let clock = std::time::Instant::now;

    let t = clock();
    let needed = required_terms(coeffs.weight(), q, options.tol)?;
    if needed > options.max_terms {
        return Err(Error::Budget(format!(
            "q = {q} needs {needed} coefficients, budget is {}",
            options.max_terms
        )));
    }
    let group = CharacterGroup::new(q)?;
    let terms = AfeTerms::new(
        coeffs,
        q,
        Complex64::new(0.0, 0.0),
        options.tol,
        &AfeOptions::default(),
    )?;
    let direct = primitive_square_sum(&group, &terms)?;
    timings.direct = t.elapsed().as_secs_f64();

    let t = clock();
    let (double_sum, double_sum_skipped) =
        match second_moment_double_sum(coeffs, q, options.tol, options.max_terms) {
            Ok(d) => (Some(d), None),
            Err(e @ (Error::Budget(_) | Error::TableTooShort { .. })) => {
                (None, Some(e.to_string()))
            }
            Err(e) => return Err(e),
        };
    timings.double_sum = t.elapsed().as_secs_f64();

    let t = clock();
    let diagonal = diagonal_sum(coeffs, q, options.tol, k)?;
    timings.diagonal = t.elapsed().as_secs_f64();

    let t = clock();
    let main = main_term(coeffs, q, k)?;
    let ratio_for = |m: f64| if m > 0.0 { Some(direct / m) } else { None };
    let ratio = ratio_for(main);
    let ratio_with_override = match options.k_override {
        Some(k2) => ratio_for(main_term(coeffs, q, k2)?),
        None => None,
    };
    let p = euler_product_p(&fq, Complex64::new(1.0, 0.0), coeffs)?;
    let condition = if q >= MIN_CONDITION_MODULUS {
        Some(check_assumption(&fq)?)
    } else {
        None
    };
    timings.main_term = t.elapsed().as_secs_f64();

    let report = MomentReport {
        q,
        tol: options.tol,
        primitive_characters: crate::arith::primitive_character_count(&fq),
        direct,
        double_sum,
        double_sum_skipped,
        diagonal,
        main_term: main,
        k_used: k,
        ratio,
        k_override: options.k_override,
        ratio_with_override,
        p_q_1: p.at_s.re,
        p_q_log_derivative_1: p.log_derivative_at_1.unwrap_or(0.0),
        condition,
        divisor_condition_sum: divisor_condition_sum(&fq)?,
        afe_truncation: terms.truncation(),
    };
    Ok((report, timings))
}

/// Least-squares fit of `K_1, K_2` in
/// `D(q) - K P_q(1) log q ~ K_1 P_q(1) + K_2 P_q'(1)` over a set of moduli.
/// Each entry is `(D(q), P_q(1), P_q'(1), log q)`.
pub fn fit_secondary_constants(points: &[(f64, f64, f64, f64)], k: f64) -> Result<(f64, f64)> {
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(d, p, dp, log_q) in points {
        let y = d - k * p * log_q;
        s11 += p * p;
        s12 += p * dp;
        s22 += dp * dp;
        r1 += p * y;
        r2 += dp * y;
    }
    let det = s11 * s22 - s12 * s12;
    if points.len() < 2 || det.abs() <= 1e-12 * (s11 * s22).max(f64::MIN_POSITIVE) {
        return Err(Error::InvalidArgument(
            "fit needs moduli with independent P_q(1), P_q'(1)".into(),
        ));
    }
    Ok(((r1 * s22 - r2 * s12) / det, (s11 * r2 - s12 * r1) / det))
}
