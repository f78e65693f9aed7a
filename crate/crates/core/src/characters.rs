//! Dirichlet characters modulo `q`.
//!
//! `(Z/qZ)*` is split by CRT into cyclic components: one per odd prime
//! power, and for `2^e` the factor `<-1>` (when `e >= 2`) together with
//! `<5>` (when `e >= 3`). A character is an exponent vector against the
//! fixed generators; values come from discrete-log tables, so evaluating
//! `chi(n)` is a handful of table lookups.

use std::f64::consts::TAU;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::arith::{factorize, Factorization};
use crate::error::{Error, Result};
use crate::sum::ComplexSum;

/// Largest modulus accepted by [`CharacterGroup::new`].
pub const MAX_MODULUS: u64 = 10_000_000;

/// Marker for non-units in discrete-log and phase tables.
pub const NOT_A_UNIT: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct Component {
    /// The prime `p` and the prime power `p^e` this component lives in.
    pub prime: u64,
    pub prime_power: u64,
    /// Generator lifted to `(Z/qZ)*` (congruent to 1 modulo `q / p^e`).
    pub generator: u64,
    pub order: u64,
    /// Discrete logarithm of each residue modulo `p^e`.
    dlog: Vec<u32>,
}

impl Component {
    #[inline]
    fn log_of(&self, n: u64) -> u32 {
        self.dlog[(n % self.prime_power) as usize]
    }
}

#[derive(Debug)]
pub struct CharacterGroup {
    modulus: u64,
    factorization: Factorization,
    components: Vec<Component>,
    /// Least common multiple of the component orders.
    exponent: u64,
    size: u64,
    /// `e(j / exponent)`.
    unit_roots: Vec<Complex64>,
    /// `e(a / q)`, filled on first Gauss sum.
    additive_roots: OnceLock<Vec<Complex64>>,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    acc
}

/// `e(j / n)`, exact at the quarter turns.
fn root_of_unity(j: u64, n: u64) -> Complex64 {
    if (4 * j).is_multiple_of(n) {
        return match 4 * j / n {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    Complex64::from_polar(1.0, TAU * j as f64 / n as f64)
}

/// Inverse of `a` modulo `m` for coprime `a, m`.
fn inv_mod(a: u64, m: u64) -> u64 {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let k = r0 / r1;
        (r0, r1) = (r1, r0 - k * r1);
        (t0, t1) = (t1, t0 - k * t1);
    }
    t0.rem_euclid(m as i128) as u64
}

/// The element congruent to `g` modulo `pe` and to 1 modulo `q / pe`.
fn crt_lift(g: u64, pe: u64, q: u64) -> u64 {
    let rest = q / pe;
    if rest == 1 {
        return g % q;
    }
    // x = 1 + rest * t with rest * t = g - 1 (mod pe)
    let t = ((g + pe - 1) % pe) * inv_mod(rest % pe, pe) % pe;
    (1 + rest * t) % q
}

fn primitive_root_mod_prime(p: u64) -> u64 {
    let f = factorize(p - 1).expect("p - 1 >= 1");
    (2..p)
        .find(|&g| f.primes().all(|r| pow_mod(g, (p - 1) / r, p) != 1))
        .expect("primes have primitive roots")
}

fn cyclic_component(p: u64, e: u32, q: u64) -> Component {
    let pe = p.pow(e);
    let order = (p - 1) * p.pow(e - 1);
    let mut g = primitive_root_mod_prime(p);
    if e >= 2 && pow_mod(g, p - 1, p * p) == 1 {
        g += p;
    }
    let mut dlog = vec![NOT_A_UNIT; pe as usize];
    let mut x = 1u64;
    for k in 0..order {
        dlog[x as usize] = k as u32;
        x = x * g % pe;
    }
    Component {
        prime: p,
        prime_power: pe,
        generator: crt_lift(g, pe, q),
        order,
        dlog,
    }
}

/// Components of `(Z/2^e Z)*`: `<-1>` for `e >= 2`, `<5>` for `e >= 3`.
fn two_components(e: u32, q: u64) -> Vec<Component> {
    let pe = 1u64 << e;
    match e {
        1 => Vec::new(),
        2 => {
            let mut dlog = vec![NOT_A_UNIT; 4];
            dlog[1] = 0;
            dlog[3] = 1;
            vec![Component {
                prime: 2,
                prime_power: 4,
                generator: crt_lift(3, 4, q),
                order: 2,
                dlog,
            }]
        }
        _ => {
            let order5 = pe / 4;
            let mut sign = vec![NOT_A_UNIT; pe as usize];
            let mut five = vec![NOT_A_UNIT; pe as usize];
            let mut x = 1u64;
            for b in 0..order5 {
                sign[x as usize] = 0;
                five[x as usize] = b as u32;
                let neg = pe - x;
                sign[neg as usize] = 1;
                five[neg as usize] = b as u32;
                x = x * 5 % pe;
            }
            vec![
                Component {
                    prime: 2,
                    prime_power: pe,
                    generator: crt_lift(pe - 1, pe, q),
                    order: 2,
                    dlog: sign,
                },
                Component {
                    prime: 2,
                    prime_power: pe,
                    generator: crt_lift(5, pe, q),
                    order: order5,
                    dlog: five,
                },
            ]
        }
    }
}

impl CharacterGroup {
    pub fn new(q: u64) -> Result<Self> {
        if q == 0 || q > MAX_MODULUS {
            return Err(Error::Domain {
                op: "build_group",
                value: q.to_string(),
                reason: "modulus must lie in 1..=10^7",
            });
        }
        let factorization = factorize(q)?;
        let mut components = Vec::new();
        for &(p, e) in factorization.factors() {
            if p == 2 {
                components.extend(two_components(e, q));
            } else {
                components.push(cyclic_component(p, e, q));
            }
        }
        let exponent = components
            .iter()
            .fold(1u64, |acc, c| acc / gcd(acc, c.order) * c.order);
        let size = components.iter().map(|c| c.order).product();
        let unit_roots = (0..exponent).map(|j| root_of_unity(j, exponent)).collect();
        Ok(Self {
            modulus: q,
            factorization,
            components,
            exponent,
            size,
            unit_roots,
            additive_roots: OnceLock::new(),
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Number of characters, `phi(q)`.
    pub fn size(&self) -> u64 {
        self.size
    }

    /// Exponent of the group; character values are `exponent`-th roots of unity.
    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    /// `e(j / exponent)`.
    #[inline]
    pub fn root(&self, j: u32) -> Complex64 {
        self.unit_roots[j as usize]
    }

    fn additive_roots(&self) -> &[Complex64] {
        self.additive_roots.get_or_init(|| {
            let q = self.modulus;
            (0..q).map(|a| root_of_unity(a, q)).collect()
        })
    }

    /// Exponent vector of the character with the given enumeration index
    /// (lexicographic, first component most significant).
    pub fn exponents_of(&self, index: u64) -> Result<Vec<u64>> {
        if index >= self.size {
            return Err(Error::InvalidArgument(format!(
                "character index {index} out of range for modulus {} ({} characters)",
                self.modulus, self.size
            )));
        }
        let mut rest = index;
        let mut ex = vec![0u64; self.components.len()];
        for (slot, c) in ex.iter_mut().zip(&self.components).rev() {
            *slot = rest % c.order;
            rest /= c.order;
        }
        Ok(ex)
    }

    pub fn index_of(&self, exponents: &[u64]) -> u64 {
        exponents
            .iter()
            .zip(&self.components)
            .fold(0, |acc, (&e, c)| acc * c.order + e)
    }

    pub fn character(&self, index: u64) -> Result<DirichletCharacter<'_>> {
        let exponents = self.exponents_of(index)?;
        Ok(self.from_exponents(exponents))
    }

    fn from_exponents(&self, exponents: Vec<u64>) -> DirichletCharacter<'_> {
        let index = self.index_of(&exponents);
        let conductor = self.conductor_of(&exponents);
        DirichletCharacter {
            group: self,
            index,
            exponents,
            conductor,
            gauss_sum: OnceLock::new(),
        }
    }

    pub fn characters(&self) -> impl Iterator<Item = DirichletCharacter<'_>> + '_ {
        (0..self.size).map(move |i| self.from_exponents(self.exponents_of(i).expect("in range")))
    }

    pub fn primitive_characters(&self) -> impl Iterator<Item = DirichletCharacter<'_>> + '_ {
        self.characters().filter(|c| c.is_primitive())
    }

    /// The principal character (index 0).
    pub fn principal(&self) -> DirichletCharacter<'_> {
        self.from_exponents(vec![0; self.components.len()])
    }

    /// Conductor from the component exponents.
    ///
    /// For an odd prime power the local character factors through `p^f`
    /// exactly when it kills `g^{phi(p^f)}`, the generator of the kernel of
    /// reduction to `p^f`. For the 2-part the kernels are `<5>` at `f = 2`
    /// and `<5^{2^{f-2}}>` for `f >= 3`.
    fn conductor_of(&self, exponents: &[u64]) -> u64 {
        let mut conductor = 1u64;
        let mut i = 0;
        while i < self.components.len() {
            let c = &self.components[i];
            if c.prime == 2 {
                let e = c.prime_power.trailing_zeros();
                let sign = exponents[i];
                let (five, five_order) = if e >= 3 {
                    i += 1;
                    (exponents[i], self.components[i].order)
                } else {
                    (0, 1)
                };
                conductor *= if five != 0 {
                    let v = five.trailing_zeros().min(e - 2);
                    debug_assert!(five < five_order);
                    1u64 << (e - v)
                } else if sign != 0 {
                    4
                } else {
                    1
                };
            } else {
                let x = exponents[i];
                let p = c.prime;
                let mut f_pow = 1u64;
                let mut phi_f = 1u64;
                // smallest p^f whose kernel generator g^{phi(p^f)} is killed
                while x != 0 && !(x * phi_f).is_multiple_of(c.order) {
                    phi_f = if f_pow == 1 { p - 1 } else { phi_f * p };
                    f_pow *= p;
                }
                conductor *= f_pow;
            }
            i += 1;
        }
        conductor
    }

    /// Phase index of `n` for the exponent vector, or `None` for non-units.
    #[inline]
    fn phase(&self, exponents: &[u64], n: u64) -> Option<u32> {
        let mut acc = 0u64;
        for (c, &x) in self.components.iter().zip(exponents) {
            let l = c.log_of(n);
            if l == NOT_A_UNIT {
                return None;
            }
            acc = (acc + x * (self.exponent / c.order) % self.exponent * l as u64) % self.exponent;
        }
        Some(acc as u32)
    }
}

/// A character of `(Z/qZ)*` with its conductor; the Gauss sum is computed
/// once on first use.
#[derive(Debug)]
pub struct DirichletCharacter<'g> {
    group: &'g CharacterGroup,
    index: u64,
    exponents: Vec<u64>,
    conductor: u64,
    gauss_sum: OnceLock<Complex64>,
}

impl Clone for DirichletCharacter<'_> {
    fn clone(&self) -> Self {
        let gauss_sum = OnceLock::new();
        if let Some(&g) = self.gauss_sum.get() {
            let _ = gauss_sum.set(g);
        }
        Self {
            group: self.group,
            index: self.index,
            exponents: self.exponents.clone(),
            conductor: self.conductor,
            gauss_sum,
        }
    }
}

impl<'g> DirichletCharacter<'g> {
    pub fn group(&self) -> &'g CharacterGroup {
        self.group
    }

    pub fn modulus(&self) -> u64 {
        self.group.modulus
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    pub fn conductor(&self) -> u64 {
        self.conductor
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor == self.group.modulus
    }

    pub fn is_principal(&self) -> bool {
        self.exponents.iter().all(|&x| x == 0)
    }

    /// `chi = conj(chi)`.
    pub fn is_real(&self) -> bool {
        self.exponents
            .iter()
            .zip(&self.group.components)
            .all(|(&x, c)| (2 * x) % c.order == 0)
    }

    pub fn conj(&self) -> DirichletCharacter<'g> {
        let ex = self
            .exponents
            .iter()
            .zip(&self.group.components)
            .map(|(&x, c)| (c.order - x) % c.order)
            .collect();
        self.group.from_exponents(ex)
    }

    /// `chi(n)` for any integer `n`.
    pub fn value(&self, n: i64) -> Complex64 {
        let q = self.group.modulus;
        let r = n.rem_euclid(q as i64) as u64;
        if gcd(r, q) != 1 {
            return Complex64::new(0.0, 0.0);
        }
        match self.group.phase(&self.exponents, r) {
            Some(j) => self.group.root(j),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// Phase index of `chi(r)` for every residue `0 <= r < q`;
    /// [`NOT_A_UNIT`] where `gcd(r, q) > 1`.
    pub fn phase_table(&self) -> Vec<u32> {
        let q = self.group.modulus;
        (0..q)
            .map(|r| {
                if gcd(r, q) != 1 {
                    NOT_A_UNIT
                } else {
                    self.group.phase(&self.exponents, r).unwrap_or(NOT_A_UNIT)
                }
            })
            .collect()
    }

    /// `chi(-1)`, either 1 or -1.
    pub fn parity(&self) -> i32 {
        if self.value(-1).re > 0.0 {
            1
        } else {
            -1
        }
    }

    /// `tau(chi) = sum_{a mod q} chi(a) e(a/q)`.
    pub fn gauss_sum(&self) -> Complex64 {
        *self.gauss_sum.get_or_init(|| {
            let roots = self.group.additive_roots();
            let table = self.phase_table();
            table
                .iter()
                .zip(roots)
                .filter(|(&j, _)| j != NOT_A_UNIT)
                .map(|(&j, &e)| self.group.root(j) * e)
                .collect::<ComplexSum>()
                .value()
        })
    }

    /// `i^k tau(chi)^2 / q`, defined for primitive characters.
    pub fn root_number(&self, weight: u32) -> Result<Complex64> {
        if !self.is_primitive() {
            return Err(Error::NotPrimitive {
                modulus: self.modulus(),
                conductor: self.conductor,
            });
        }
        if !weight.is_multiple_of(2) {
            return Err(Error::InvalidArgument("weight must be even".into()));
        }
        let ik = if (weight / 2).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        let g = self.gauss_sum();
        Ok(ik * g * g / self.modulus() as f64)
    }
}

/// Right side of the orthogonality relation for primitive characters:
/// `sum_{d | q, n = m mod q/d} mu(d) phi(q/d)`.
pub fn orthogonality_rhs(n: i64, m: i64, q: &Factorization) -> Result<i64> {
    let qv = q.value();
    if !q.is_coprime_to(n.unsigned_abs()) || !q.is_coprime_to(m.unsigned_abs()) {
        return Err(Error::Domain {
            op: "orthogonality_rhs",
            value: format!("({n}, {m}, {qv})"),
            reason: "needs gcd(nm, q) = 1",
        });
    }
    let mut total = 0i64;
    for d in q.squarefree_divisors() {
        let ell = qv / d.value();
        if (n - m).rem_euclid(ell as i64) == 0 {
            let phi = q.divisor(ell)?.euler_phi() as i64;
            total += d.mobius() * phi;
        }
    }
    Ok(total)
}

/// Left side, summed directly over primitive characters.
pub fn orthogonality_lhs(group: &CharacterGroup, n: i64, m: i64) -> Complex64 {
    group
        .primitive_characters()
        .map(|chi| chi.value(n) * chi.value(m).conj())
        .collect::<ComplexSum>()
        .value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::primitive_character_count;
    use rand::{Rng, SeedableRng};

    fn near(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    /// Brute force: smallest d | q with chi(n) = 1 for all units n = 1 mod d.
    fn brute_conductor(chi: &DirichletCharacter) -> u64 {
        let q = chi.modulus();
        let one = Complex64::new(1.0, 0.0);
        crate::arith::factorize(q)
            .unwrap()
            .divisors()
            .into_iter()
            .find(|&d| {
                (0..q)
                    .filter(|&n| gcd(n, q) == 1 && n % d == 1 % d)
                    .all(|n| near(chi.value(n as i64), one, 1e-9))
            })
            .unwrap()
    }

    #[test]
    fn group_structure_examples() {
        let g1 = CharacterGroup::new(1).unwrap();
        assert_eq!(g1.size(), 1);
        assert!(g1.principal().is_primitive());

        let g5 = CharacterGroup::new(5).unwrap();
        assert_eq!(g5.components().len(), 1);
        assert_eq!(g5.components()[0].order, 4);
        assert_eq!(g5.components()[0].generator, 2);

        let g8 = CharacterGroup::new(8).unwrap();
        let gens: Vec<(u64, u64)> = g8
            .components()
            .iter()
            .map(|c| (c.generator, c.order))
            .collect();
        assert_eq!(gens, vec![(7, 2), (5, 2)]);

        assert!(CharacterGroup::new(0).is_err());
    }

    #[test]
    fn component_orders_multiply_to_phi() {
        for q in 1..=600u64 {
            let g = CharacterGroup::new(q).unwrap();
            assert_eq!(g.size(), g.factorization().euler_phi(), "q = {q}");
        }
    }

    #[test]
    fn generators_have_stated_orders() {
        for q in [5u64, 8, 12, 16, 45, 64, 99, 360, 1024, 2310] {
            let g = CharacterGroup::new(q).unwrap();
            for c in g.components() {
                assert_eq!(pow_mod(c.generator, c.order, q), 1);
                for r in crate::arith::factorize(c.order).unwrap().primes() {
                    assert_ne!(pow_mod(c.generator, c.order / r, q), 1, "q={q}");
                }
            }
        }
    }

    #[test]
    fn values_are_multiplicative_and_vanish_off_units() {
        for q in [7u64, 12, 16, 45, 100] {
            let g = CharacterGroup::new(q).unwrap();
            for chi in g.characters() {
                for n in 0..q as i64 {
                    let v = chi.value(n);
                    if gcd(n as u64, q) == 1 {
                        assert!((v.norm() - 1.0).abs() < 1e-12);
                    } else {
                        assert_eq!(v, Complex64::new(0.0, 0.0));
                    }
                    for m in 0..q as i64 {
                        assert!(near(chi.value(n * m), v * chi.value(m), 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn conductor_examples() {
        let g = CharacterGroup::new(12).unwrap();
        assert_eq!(g.principal().conductor(), 1);
        assert!(!g.principal().is_primitive());

        let g5 = CharacterGroup::new(5).unwrap();
        let quad = g5
            .characters()
            .find(|c| c.is_real() && !c.is_principal())
            .unwrap();
        assert_eq!(quad.conductor(), 5);
        assert!(quad.is_primitive());

        // mod 6 the only nonprincipal character is induced from mod 3
        let g6 = CharacterGroup::new(6).unwrap();
        let chi = g6.characters().find(|c| !c.is_principal()).unwrap();
        assert_eq!(chi.conductor(), 3);
        assert!(near(chi.value(5), Complex64::new(-1.0, 0.0), 1e-15));
    }

    #[test]
    fn conductor_matches_brute_force() {
        for q in (2..=130u64).chain([144, 192, 200, 256, 243, 360]) {
            let g = CharacterGroup::new(q).unwrap();
            for chi in g.characters() {
                assert_eq!(
                    chi.conductor(),
                    brute_conductor(&chi),
                    "q={q} idx={}",
                    chi.index()
                );
            }
        }
    }

    #[test]
    fn primitive_census_small() {
        for q in 1..=400u64 {
            let g = CharacterGroup::new(q).unwrap();
            let count = g.primitive_characters().count() as u64;
            assert_eq!(
                count,
                primitive_character_count(g.factorization()),
                "q = {q}"
            );
        }
    }

    #[test]
    fn gauss_sum_examples() {
        let g5 = CharacterGroup::new(5).unwrap();
        let quad5 = g5
            .characters()
            .find(|c| c.is_real() && !c.is_principal())
            .unwrap();
        assert!(near(
            quad5.gauss_sum(),
            Complex64::new(5f64.sqrt(), 0.0),
            1e-12
        ));

        let g3 = CharacterGroup::new(3).unwrap();
        let quad3 = g3.character(1).unwrap();
        assert!(near(
            quad3.gauss_sum(),
            Complex64::new(0.0, 3f64.sqrt()),
            1e-12
        ));

        for q in 1..=100u64 {
            let g = CharacterGroup::new(q).unwrap();
            let mu = g.factorization().mobius() as f64;
            assert!(
                near(g.principal().gauss_sum(), Complex64::new(mu, 0.0), 1e-9),
                "q={q}"
            );
        }
    }

    #[test]
    fn root_number_examples() {
        let g5 = CharacterGroup::new(5).unwrap();
        let quad5 = g5
            .characters()
            .find(|c| c.is_real() && !c.is_principal())
            .unwrap();
        assert!(near(
            quad5.root_number(12).unwrap(),
            Complex64::new(1.0, 0.0),
            1e-12
        ));
        let g3 = CharacterGroup::new(3).unwrap();
        assert!(near(
            g3.character(1).unwrap().root_number(12).unwrap(),
            Complex64::new(-1.0, 0.0),
            1e-12
        ));
        assert!(matches!(
            g5.principal().root_number(12),
            Err(Error::NotPrimitive { .. })
        ));
    }

    #[test]
    fn gauss_sum_of_conjugate() {
        for q in 3..=200u64 {
            let g = CharacterGroup::new(q).unwrap();
            for chi in g.primitive_characters() {
                let lhs = chi.conj().gauss_sum();
                let rhs = chi.parity() as f64 * chi.gauss_sum().conj();
                assert!(near(lhs, rhs, 1e-9), "q={q}");
                assert!((chi.gauss_sum().norm_sqr() - q as f64).abs() <= 1e-8 * q as f64);
                assert!((chi.root_number(12).unwrap().norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn orthogonality_examples() {
        let f = |q| crate::arith::factorize(q).unwrap();
        for q in [3u64, 5, 12, 45, 100] {
            let fq = f(q);
            let expected = primitive_character_count(&fq) as i64;
            assert_eq!(orthogonality_rhs(1, 1, &fq).unwrap(), expected);
        }
        assert_eq!(orthogonality_rhs(2, 1, &f(5)).unwrap(), -1);
        let g5 = CharacterGroup::new(5).unwrap();
        assert!(near(
            orthogonality_lhs(&g5, 2, 1),
            Complex64::new(-1.0, 0.0),
            1e-12
        ));

        let g12 = CharacterGroup::new(12).unwrap();
        let rhs = orthogonality_rhs(5, 1, &f(12)).unwrap();
        assert!(near(
            orthogonality_lhs(&g12, 5, 1),
            Complex64::new(rhs as f64, 0.0),
            1e-12
        ));
        assert!(orthogonality_rhs(2, 1, &f(12)).is_err());
    }

    #[test]
    fn orthogonality_random_triples() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(99);
        let mut done = 0;
        while done < 200 {
            let q = rng.gen_range(1..=300u64);
            let n = rng.gen_range(-1000..1000i64);
            let m = rng.gen_range(-1000..1000i64);
            if gcd(n.unsigned_abs(), q) != 1 || gcd(m.unsigned_abs(), q) != 1 {
                continue;
            }
            let g = CharacterGroup::new(q).unwrap();
            let lhs = orthogonality_lhs(&g, n, m);
            let rhs = orthogonality_rhs(n, m, g.factorization()).unwrap();
            let tol = 1e-8 * g.size() as f64;
            assert!(
                near(lhs, Complex64::new(rhs as f64, 0.0), tol),
                "q={q} n={n} m={m}"
            );
            done += 1;
        }
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let g = CharacterGroup::new(24).unwrap();
        let ex: Vec<Vec<u64>> = g.characters().map(|c| c.exponents().to_vec()).collect();
        let mut sorted = ex.clone();
        sorted.sort();
        assert_eq!(ex, sorted);
        for (i, c) in g.characters().enumerate() {
            assert_eq!(c.index(), i as u64);
            assert_eq!(c.conj().conj().index(), c.index());
        }
    }
}
