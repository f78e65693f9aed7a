//! Central values of `L(f x chi, s)` for primitive `chi`.
//!
//! On `Re(s) = 0` the value `L(f x chi, 1/2 + s)` comes from the two-term
//! approximate functional equation with balance `X`:
//!
//! ```text
//! sum a(n) chi(n) n^{-1/2-s} W_s(n/(qX))
//!   + iota gamma(s) sum a(n) conj(chi)(n) n^{-1/2+s} W_{-s}(nX/q),
//! gamma(s) = (2pi)^{2s} Gamma(k/2-s) / (q^{2s} Gamma(k/2+s)).
//! ```
//!
//! Both sums are truncated where a rigorous tail bound, built from
//! `|a(n)| <= d(n) <= 2 sqrt(n)` and a majorant for `|W_s|`, drops below the
//! requested tolerance.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::characters::{DirichletCharacter, NOT_A_UNIT};
use crate::eigenform::EigenformCoefficients;
use crate::error::{Error, Result};
use crate::special::{log_gamma, AfeWeight, Kernel, SmoothKernel};
use crate::sum::ComplexSum;

/// How the approximate functional equation is set up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AfeOptions {
    pub weight: AfeWeight,
    /// Fixed abscissa for both `W` kernels; `None` places it per argument.
    pub contour: Option<f64>,
    /// Balance `X > 0` between the two sums.
    pub balance: f64,
}

impl Default for AfeOptions {
    fn default() -> Self {
        Self {
            weight: AfeWeight::Unit,
            contour: None,
            balance: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LValueResult {
    pub value: Complex64,
    pub s: Complex64,
    pub q: u64,
    /// Largest `n` used in either sum.
    pub truncation_n: usize,
    pub tail_bound: f64,
    /// `log(N / q) / log q`, so that `N = q^{1 + eps}`.
    pub eps_trunc: f64,
    pub params_used: Vec<SmoothKernel>,
}

fn check_critical_line(s: Complex64) -> Result<()> {
    if s.re != 0.0 || !s.im.is_finite() {
        return Err(Error::Domain {
            op: "l_value_afe",
            value: format!("{s}"),
            reason: "requires Re(s) = 0",
        });
    }
    Ok(())
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|j| (j as f64).ln()).sum()
}

/// `log` of `int_Y^inf Gamma(a, v) dv = (a-1)! e^-Y sum_{i<a} (a-i) Y^i / i!`.
fn ln_integrated_upper_gamma(a: u32, y: f64) -> f64 {
    let mut term = 1.0;
    let mut acc = a as f64;
    for i in 1..a {
        term *= y / i as f64;
        acc += (a - i) as f64 * term;
    }
    ln_factorial(a - 1) - y + acc.ln()
}

/// Bound on `sum_{n > N} |a(n)| n^{-1/2} |W_s(n/Q)|` for one sum of scale `Q`.
fn ln_tail_bound(weight: AfeWeight, a: u32, ln_abs_gamma: f64, scale: f64, n: f64) -> f64 {
    match weight {
        // |W_s(x)| <= Gamma(a, 2 pi x) / |Gamma(a + s)|
        AfeWeight::Unit => {
            let y = 2.0 * PI * n / scale;
            (2.0 * scale / (2.0 * PI)).ln() + ln_integrated_upper_gamma(a, y) - ln_abs_gamma
        }
        // |W_s(x)| <= K_c x^-c on every line c > 0
        AfeWeight::Gaussian => {
            let mut best = f64::INFINITY;
            let mut c = 1.25;
            while c <= 40.0 {
                let ln_kc = log_gamma(Complex64::new(a as f64 + c, 0.0))
                    .map(|g| g.re)
                    .unwrap_or(f64::INFINITY)
                    + c * c
                    - c * (2.0 * PI).ln()
                    - (2.0 * PI.sqrt() * c).ln()
                    - ln_abs_gamma;
                let v = 2f64.ln() + ln_kc + c * scale.ln() + (1.0 - c) * n.ln() - (c - 1.0).ln();
                best = best.min(v);
                c += 0.25;
            }
            best
        }
    }
}

/// Smallest `N` with tail bound at most `target`.
fn truncation_for(weight: AfeWeight, a: u32, ln_abs_gamma: f64, scale: f64, target: f64) -> f64 {
    let ln_target = target.ln();
    let ok = |n: f64| ln_tail_bound(weight, a, ln_abs_gamma, scale, n) <= ln_target;
    let mut hi = scale.max(1.0);
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e18 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 0.5 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi.ceil().max(1.0)
}

/// Truncation points and gamma factors for one `(q, s)`.
struct Plan {
    a: u32,
    ln_gamma_plus: Complex64,
    ln_gamma_minus: Complex64,
    gamma_ratio: Complex64,
    scale_first: f64,
    scale_second: f64,
    n_first: f64,
    n_second: f64,
}

impl Plan {
    fn new(weight: u32, q: u64, s: Complex64, tol: f64, options: &AfeOptions) -> Result<Self> {
        check_critical_line(s)?;
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        if !(options.balance > 0.0 && options.balance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "balance must be positive, got {}",
                options.balance
            )));
        }
        let a = weight / 2;
        let qf = q as f64;
        let ln_gamma_plus = log_gamma(a as f64 + s)?;
        let ln_gamma_minus = log_gamma(a as f64 - s)?;
        let gamma_ratio = (2.0 * s * (2.0 * PI / qf).ln() + ln_gamma_minus - ln_gamma_plus).exp();
        let scale_first = qf * options.balance;
        let scale_second = qf / options.balance;
        let n_first = truncation_for(options.weight, a, ln_gamma_plus.re, scale_first, tol / 2.0);
        let n_second = truncation_for(
            options.weight,
            a,
            ln_gamma_minus.re,
            scale_second,
            tol / 2.0,
        );
        Ok(Self {
            a,
            ln_gamma_plus,
            ln_gamma_minus,
            gamma_ratio,
            scale_first,
            scale_second,
            n_first,
            n_second,
        })
    }
}

/// Number of coefficients [`AfeTerms::new`] needs.
pub fn afe_length(
    weight: u32,
    q: u64,
    s: Complex64,
    tol: f64,
    options: &AfeOptions,
) -> Result<usize> {
    let plan = Plan::new(weight, q, s, tol, options)?;
    let n = plan.n_first.max(plan.n_second);
    if !n.is_finite() {
        return Err(Error::Budget(format!(
            "no finite truncation for q = {q} at tolerance {tol}"
        )));
    }
    Ok(n as usize)
}

/// Coefficients needed by [`fe_residual`].
pub fn fe_residual_length(weight: u32, q: u64, s: Complex64, tol: f64) -> Result<usize> {
    let right = AfeOptions {
        balance: RESIDUAL_BALANCE,
        ..AfeOptions::default()
    };
    Ok(afe_length(weight, q, s, tol, &AfeOptions::default())?
        .max(afe_length(weight, q, -s, tol, &right)?))
}

/// Character-independent part of the approximate functional equation for
/// one modulus and one `s`: the weighted coefficients of both sums.
#[derive(Debug, Clone)]
pub struct AfeTerms {
    q: u64,
    s: Complex64,
    weight: u32,
    /// `gamma(s)`.
    gamma_ratio: Complex64,
    /// `a(n) n^{-1/2-s} W_s(n/(qX))` at index `n - 1`.
    first: Vec<Complex64>,
    /// `a(n) n^{-1/2+s} W_{-s}(nX/q)` at index `n - 1`.
    second: Vec<Complex64>,
    tail_bound: f64,
    kernels: Vec<SmoothKernel>,
}

impl AfeTerms {
    pub fn new(
        coeffs: &EigenformCoefficients,
        q: u64,
        s: Complex64,
        tol: f64,
        options: &AfeOptions,
    ) -> Result<Self> {
        let plan = Plan::new(coeffs.weight(), q, s, tol, options)?;
        let needed = plan.n_first.max(plan.n_second);
        if !needed.is_finite() || needed > coeffs.len() as f64 {
            return Err(Error::TableTooShort {
                required: if needed.is_finite() {
                    needed as usize
                } else {
                    usize::MAX
                },
                available: coeffs.len(),
            });
        }
        let Plan {
            a,
            ln_gamma_plus,
            ln_gamma_minus,
            gamma_ratio,
            scale_first,
            scale_second,
            n_first,
            n_second,
        } = plan;
        let k = coeffs.weight();
        let tail_bound = ln_tail_bound(options.weight, a, ln_gamma_plus.re, scale_first, n_first)
            .exp()
            + ln_tail_bound(options.weight, a, ln_gamma_minus.re, scale_second, n_second).exp();

        let spec = |shift: Complex64| {
            let base = match options.weight {
                AfeWeight::Unit => SmoothKernel::w_unit(k, shift),
                AfeWeight::Gaussian => SmoothKernel::w(k, shift),
            };
            match options.contour {
                Some(c) => base.with_contour(c),
                None => base,
            }
        };
        let kernels = vec![spec(s), spec(-s)];
        let plus = Kernel::new(kernels[0])?;
        let minus = Kernel::new(kernels[1])?;
        let first = (1..=n_first as usize)
            .map(|n| {
                let nf = n as f64;
                let w = plus.eval(nf / scale_first)?;
                Ok(coeffs.a(n) * (-(0.5 + s) * nf.ln()).exp() * w)
            })
            .collect::<Result<Vec<_>>>()?;
        let second = (1..=n_second as usize)
            .map(|n| {
                let nf = n as f64;
                let w = minus.eval(nf / scale_second)?;
                Ok(coeffs.a(n) * ((-0.5 + s) * nf.ln()).exp() * w)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            q,
            s,
            weight: k,
            gamma_ratio,
            first,
            second,
            tail_bound,
            kernels,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn truncation(&self) -> usize {
        self.first.len().max(self.second.len())
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn gamma_ratio(&self) -> Complex64 {
        self.gamma_ratio
    }

    pub fn kernels(&self) -> &[SmoothKernel] {
        &self.kernels
    }

    /// The two sums `(A, B)` for `chi`, with `L = A + iota gamma B`.
    pub fn partial_sums(&self, chi: &DirichletCharacter<'_>) -> Result<(Complex64, Complex64)> {
        if chi.modulus() != self.q {
            return Err(Error::InvalidArgument(format!(
                "character modulus {} does not match {}",
                chi.modulus(),
                self.q
            )));
        }
        let group = chi.group();
        let order = group.exponent() as u32;
        let phases = chi.phase_table();
        let q = self.q as usize;
        let sum = |terms: &[Complex64], conjugate: bool| {
            let mut acc = ComplexSum::new();
            for (i, t) in terms.iter().enumerate() {
                let j = phases[(i + 1) % q];
                if j == NOT_A_UNIT {
                    continue;
                }
                let j = if conjugate { (order - j) % order } else { j };
                acc.add(t * group.root(j));
            }
            acc.value()
        };
        Ok((sum(&self.first, false), sum(&self.second, true)))
    }

    /// `L(f x chi, 1/2 + s)`.
    pub fn evaluate(&self, chi: &DirichletCharacter<'_>) -> Result<Complex64> {
        let iota = chi.root_number(self.weight)?;
        let (a, b) = self.partial_sums(chi)?;
        Ok(a + iota * self.gamma_ratio * b)
    }

    fn result(&self, value: Complex64) -> LValueResult {
        let n = self.truncation();
        let qf = self.q as f64;
        let eps_trunc = if self.q > 1 {
            ((n as f64) / qf).ln() / qf.ln()
        } else {
            f64::NAN
        };
        LValueResult {
            value,
            s: self.s,
            q: self.q,
            truncation_n: n,
            tail_bound: self.tail_bound,
            eps_trunc,
            params_used: self.kernels.clone(),
        }
    }
}

fn require_primitive(chi: &DirichletCharacter<'_>) -> Result<()> {
    if !chi.is_primitive() {
        return Err(Error::NotPrimitive {
            modulus: chi.modulus(),
            conductor: chi.conductor(),
        });
    }
    Ok(())
}

/// `L(f x chi, 1/2 + s)` with the default options.
pub fn l_value_afe(
    coeffs: &EigenformCoefficients,
    chi: &DirichletCharacter<'_>,
    s: Complex64,
    tol: f64,
) -> Result<LValueResult> {
    l_value_afe_with(coeffs, chi, s, tol, &AfeOptions::default())
}

pub fn l_value_afe_with(
    coeffs: &EigenformCoefficients,
    chi: &DirichletCharacter<'_>,
    s: Complex64,
    tol: f64,
    options: &AfeOptions,
) -> Result<LValueResult> {
    require_primitive(chi)?;
    let terms = AfeTerms::new(coeffs, chi.modulus(), s, tol, options)?;
    let value = terms.evaluate(chi)?;
    Ok(terms.result(value))
}

/// Balance used for the right side in [`fe_residual`], so that the two
/// sides come from genuinely different truncated sums.
const RESIDUAL_BALANCE: f64 = 2.0;

/// Relative defect in
/// `(q/2pi)^s Gamma(k/2+s) L(chi, 1/2+s) = iota (q/2pi)^-s Gamma(k/2-s) L(conj chi, 1/2-s)`.
///
/// The left side uses balance 1 and the right side balance 2. The
/// denominator is `|LHS| + |RHS|` plus the size of the completed sums
/// themselves, so that forced zeros do not turn rounding noise into an
/// order-one residual.
pub fn fe_residual(
    coeffs: &EigenformCoefficients,
    chi: &DirichletCharacter<'_>,
    s: Complex64,
    tol: f64,
) -> Result<f64> {
    require_primitive(chi)?;
    check_critical_line(s)?;
    let q = chi.modulus();
    let a = (coeffs.weight() / 2) as f64;
    let ln_q2pi = (q as f64 / (2.0 * PI)).ln();
    let iota = chi.root_number(coeffs.weight())?;

    let left_terms = AfeTerms::new(coeffs, q, s, tol, &AfeOptions::default())?;
    let (la, lb) = left_terms.partial_sums(chi)?;
    let left_l = la + iota * left_terms.gamma_ratio() * lb;
    let left_factor = (s * ln_q2pi + log_gamma(a + s)?).exp();

    let chi_bar = chi.conj();
    let right_options = AfeOptions {
        balance: RESIDUAL_BALANCE,
        ..AfeOptions::default()
    };
    let right_terms = AfeTerms::new(coeffs, q, -s, tol, &right_options)?;
    let iota_bar = chi_bar.root_number(coeffs.weight())?;
    let (ra, rb) = right_terms.partial_sums(&chi_bar)?;
    let right_l = ra + iota_bar * right_terms.gamma_ratio() * rb;
    let right_factor = iota * (-s * ln_q2pi + log_gamma(a - s)?).exp();

    let lhs = left_factor * left_l;
    let rhs = right_factor * right_l;
    let size = left_factor.norm() * (la.norm() + lb.norm())
        + right_factor.norm() * (ra.norm() + rb.norm());
    Ok((lhs - rhs).norm() / (lhs.norm() + rhs.norm() + 1e-12 * size + 1e-300))
}

/// `1 - a(p) chi(p) p^{-s-1/2} + chi(p)^2 p^{-2s-1}`.
pub fn euler_local_factor(
    coeffs: &EigenformCoefficients,
    chi: &DirichletCharacter<'_>,
    p: u64,
    s: Complex64,
) -> Result<Complex64> {
    let c = chi.value(p as i64);
    if c == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let ap = coeffs.try_a(p)?;
    let ln_p = (p as f64).ln();
    let x = (-(s + 0.5) * ln_p).exp();
    Ok(1.0 - ap * c * x + c * c * x * x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialSum {
    pub value: Complex64,
    /// Bound on `sum_{n > N} d(n) n^{-Re s}`.
    pub tail_bound: f64,
}

/// `sum_{n <= N} a(n) chi(n) n^-s` for `Re(s) >= 3/2`.
pub fn l_series_partial(
    coeffs: &EigenformCoefficients,
    chi: &DirichletCharacter<'_>,
    s: Complex64,
    n: usize,
) -> Result<PartialSum> {
    if !(s.re >= 1.5) {
        return Err(Error::Domain {
            op: "l_series_partial",
            value: format!("{s}"),
            reason: "requires Re(s) >= 3/2",
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one term".into()));
    }
    if n > coeffs.len() {
        return Err(Error::TableTooShort {
            required: n,
            available: coeffs.len(),
        });
    }
    let mut acc = ComplexSum::new();
    for m in 1..=n {
        let c = chi.value(m as i64);
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        acc.add(coeffs.a(m) * c * (-s * (m as f64).ln()).exp());
    }
    // Partial summation with sum_{m <= t} d(m) <= t (log t + 1).
    let sigma = s.re;
    let nf = n as f64;
    let tail_bound = sigma
        * nf.powf(1.0 - sigma)
        * ((nf.ln() + 1.0) / (sigma - 1.0) + 1.0 / ((sigma - 1.0) * (sigma - 1.0)));
    Ok(PartialSum {
        value: acc.value(),
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::divisor_count_table;
    use crate::characters::CharacterGroup;
    use crate::eigenform::delta_coefficients;
    use rand::{Rng, SeedableRng};
    use std::sync::OnceLock;

    fn delta() -> &'static EigenformCoefficients {
        static C: OnceLock<EigenformCoefficients> = OnceLock::new();
        C.get_or_init(|| delta_coefficients(20_000).unwrap())
    }

    fn zero() -> Complex64 {
        Complex64::new(0.0, 0.0)
    }

    #[test]
    fn forced_zero_mod_3() {
        let g = CharacterGroup::new(3).unwrap();
        let chi = g.primitive_characters().next().unwrap();
        assert!(chi.is_real());
        assert!((chi.root_number(12).unwrap() + 1.0).norm() < 1e-12);
        let r = l_value_afe(delta(), &chi, zero(), 1e-8).unwrap();
        assert!(r.value.norm() <= 1e-6);
        assert!(r.tail_bound <= 1e-8);
    }

    #[test]
    fn forced_zero_for_every_odd_sign_quadratic() {
        let mut checked = 0;
        for q in 3..120u64 {
            let g = CharacterGroup::new(q).unwrap();
            for chi in g.primitive_characters().filter(|c| c.is_real()) {
                if (chi.root_number(12).unwrap() + 1.0).norm() < 1e-9 {
                    let v = l_value_afe(delta(), &chi, zero(), 1e-8).unwrap().value;
                    assert!(v.norm() <= 1e-6, "q = {q}: {v}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 5);
    }

    #[test]
    fn truncation_and_contour_independence() {
        let g = CharacterGroup::new(37).unwrap();
        let chi = g.primitive_characters().nth(5).unwrap();
        let a = l_value_afe(delta(), &chi, zero(), 1e-8).unwrap();
        let b = l_value_afe(delta(), &chi, zero(), 1e-10).unwrap();
        assert!((a.value - b.value).norm() <= 2e-8);
        assert!(b.truncation_n >= a.truncation_n);
        let at = |c| {
            let opts = AfeOptions {
                contour: Some(c),
                ..AfeOptions::default()
            };
            l_value_afe_with(delta(), &chi, zero(), 1e-10, &opts)
                .unwrap()
                .value
        };
        assert!((at(0.5) - at(1.5)).norm() <= 1e-9);
    }

    #[test]
    fn balance_does_not_change_value() {
        let g = CharacterGroup::new(29).unwrap();
        let s = Complex64::new(0.0, 0.4);
        for chi in g.primitive_characters().take(6) {
            let v1 = l_value_afe(delta(), &chi, s, 1e-10).unwrap().value;
            for x in [0.5, 3.0] {
                let opts = AfeOptions {
                    balance: x,
                    ..AfeOptions::default()
                };
                let vx = l_value_afe_with(delta(), &chi, s, 1e-10, &opts)
                    .unwrap()
                    .value;
                assert!((v1 - vx).norm() <= 1e-8, "X = {x}");
            }
        }
    }

    #[test]
    fn gaussian_weight_agrees_at_small_modulus() {
        let g = CharacterGroup::new(5).unwrap();
        let opts = AfeOptions {
            weight: AfeWeight::Gaussian,
            ..AfeOptions::default()
        };
        for chi in g.primitive_characters() {
            let unit = l_value_afe(delta(), &chi, zero(), 1e-8).unwrap();
            let gauss = l_value_afe_with(delta(), &chi, zero(), 1e-3, &opts).unwrap();
            assert!((unit.value - gauss.value).norm() <= 1e-3);
            assert!(gauss.truncation_n > 20 * unit.truncation_n);
        }
    }

    #[test]
    fn functional_equation_examples() {
        let g = CharacterGroup::new(13).unwrap();
        for chi in g.primitive_characters() {
            let r0 = fe_residual(delta(), &chi, zero(), 1e-8).unwrap();
            let r1 = fe_residual(delta(), &chi, Complex64::new(0.0, 0.7), 1e-8).unwrap();
            assert!(r0 <= 1e-6 && r1 <= 1e-6, "{} {r0} {r1}", chi.index());
        }
        let g = CharacterGroup::new(12).unwrap();
        let imprimitive = g.characters().find(|c| !c.is_primitive()).unwrap();
        assert!(fe_residual(delta(), &imprimitive, zero(), 1e-8).is_err());
        assert!(l_value_afe(delta(), &imprimitive, zero(), 1e-8).is_err());
        let chi = CharacterGroup::new(5).unwrap();
        let chi = chi.primitive_characters().next().unwrap();
        assert!(l_value_afe(delta(), &chi, Complex64::new(0.1, 0.0), 1e-8).is_err());
    }

    #[test]
    fn functional_equation_random() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let shifts = [zero(), Complex64::new(0.0, 0.3), Complex64::new(0.0, 1.0)];
        let mut done = 0;
        while done < 20 {
            let q = rng.gen_range(3..=200u64);
            let g = CharacterGroup::new(q).unwrap();
            let prim: Vec<_> = g.primitive_characters().map(|c| c.index()).collect();
            if prim.is_empty() {
                continue;
            }
            let chi = g.character(prim[rng.gen_range(0..prim.len())]).unwrap();
            let s = shifts[rng.gen_range(0..3)];
            let r = fe_residual(delta(), &chi, s, 1e-8).unwrap();
            assert!(r <= 1e-6, "q = {q}, chi = {}, s = {s}: {r}", chi.index());
            done += 1;
        }
    }

    #[test]
    fn conjugation_symmetry() {
        for q in [7u64, 16, 45] {
            let g = CharacterGroup::new(q).unwrap();
            for chi in g.primitive_characters() {
                let v = l_value_afe(delta(), &chi, zero(), 1e-10).unwrap().value;
                let w = l_value_afe(delta(), &chi.conj(), zero(), 1e-10)
                    .unwrap()
                    .value;
                assert!((v.conj() - w).norm() <= 1e-9);
                assert!((v.norm_sqr() - w.norm_sqr()).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn table_too_short() {
        let short = delta().truncated(50);
        let g = CharacterGroup::new(101).unwrap();
        let chi = g.primitive_characters().next().unwrap();
        assert!(matches!(
            l_value_afe(&short, &chi, zero(), 1e-8),
            Err(Error::TableTooShort { .. })
        ));
    }

    #[test]
    fn local_factor_examples() {
        let g = CharacterGroup::new(9).unwrap();
        let principal = g.principal();
        let f = euler_local_factor(delta(), &principal, 2, zero()).unwrap();
        let a2 = -24.0 / 2f64.powf(5.5);
        assert!((f - Complex64::new(1.0 - a2 / 2f64.sqrt() + 0.5, 0.0)).norm() < 1e-15);
        assert_eq!(
            euler_local_factor(delta(), &principal, 3, zero()).unwrap(),
            Complex64::new(1.0, 0.0)
        );

        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        let primes: Vec<u64> = (2..2000u64)
            .filter(|&p| crate::arith::is_prime(p))
            .collect();
        for _ in 0..10_000 {
            let q = rng.gen_range(1..60u64);
            let g = CharacterGroup::new(q).unwrap();
            let chi = g.character(rng.gen_range(0..g.size())).unwrap();
            let p = primes[rng.gen_range(0..primes.len())];
            let f = euler_local_factor(delta(), &chi, p, zero()).unwrap();
            let pf = p as f64;
            assert!(f.norm() <= 1.0 + 2.0 / pf.sqrt() + 1.0 / pf + 1e-12);
            assert!(f.norm() <= 1.0 + 10.0 / pf.sqrt());
        }
    }

    #[test]
    fn series_partial_sums() {
        let trivial = CharacterGroup::new(1).unwrap();
        let one = trivial.principal();
        let s3 = Complex64::new(3.0, 0.0);
        let first = l_series_partial(delta(), &one, s3, 1).unwrap();
        assert_eq!(first.value, Complex64::new(1.0, 0.0));
        let a = l_series_partial(delta(), &one, s3, 1000).unwrap();
        let b = l_series_partial(delta(), &one, s3, 2000).unwrap();
        assert!((a.value - b.value).norm() <= a.tail_bound);
        assert!(l_series_partial(delta(), &one, Complex64::new(1.2, 0.0), 10).is_err());

        let g = CharacterGroup::new(11).unwrap();
        let d = divisor_count_table(20_000);
        for chi in g.characters() {
            let s2 = Complex64::new(2.0, 0.0);
            let a = l_series_partial(delta(), &chi, s2, 2_000).unwrap();
            let b = l_series_partial(delta(), &chi, s2, 20_000).unwrap();
            assert!((a.value - b.value).norm() <= a.tail_bound);
            // The closed-form tail dominates the actual divisor sum it bounds.
            let actual: f64 = (2_001..=20_000)
                .map(|n| d[n] as f64 / (n as f64).powi(2))
                .sum();
            assert!(actual <= a.tail_bound);
        }
    }

    /// Direct evaluation of the unit-weight kernel majorant tail against the
    /// closed form used for truncation.
    #[test]
    fn tail_bound_formula() {
        let a = 6;
        for y in [5.0, 20.0, 45.0] {
            // Integrate Gamma(6, v) over [y, y + 80] by Simpson.
            let upper = |v: f64| {
                (-v) * 1.0
                    + (0..6)
                        .map(|j| v.powi(j) / (1..=j).product::<i32>().max(1) as f64)
                        .sum::<f64>()
                        .ln()
                    + ln_factorial(5)
            };
            let n = 4000;
            let h = 80.0 / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let w = if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * upper(y + i as f64 * h).exp();
            }
            let numeric = acc * h / 3.0;
            let closed = ln_integrated_upper_gamma(a, y).exp();
            assert!(
                (numeric - closed).abs() <= 1e-8 * closed,
                "{numeric} vs {closed}"
            );
        }
    }
}
