//! Hecke eigenvalues of a level-one eigenform.
//!
//! The built-in form is the discriminant `Delta` (weight 12), whose
//! coefficients `tau(n)` are produced exactly from the product expansion
//! `Delta = x prod (1 - x^n)^24`. Other level-one forms enter through their
//! prime eigenvalues and [`hecke_extend`].

mod ntt;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::arith::{divisor_count_table, smallest_prime_factor_table};
use crate::error::{Error, Result};

/// Largest table [`delta_coefficients`] will build.
pub const MAX_DELTA_TERMS: usize = 1 << (ntt::MAX_TRANSFORM_LOG2 - 1);

/// Normalized coefficients `a(n) = lambda(n) / n^{(k-1)/2}`, `a(1) = 1`,
/// together with the exact integer eigenvalues when they are known.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenformCoefficients {
    weight: u32,
    /// Index `n` holds `a(n)`; index 0 is unused and zero.
    a: Vec<f64>,
    /// Exact `tau(n)` for `1 <= n < tau.len()`; may stop short of `a` once
    /// values leave the `i128` range. Empty for forms given by real data.
    tau: Vec<i128>,
}

impl EigenformCoefficients {
    fn check_weight(weight: u32) -> Result<()> {
        if weight < 12 || !weight.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "weight must be an even integer >= 12, got {weight}"
            )));
        }
        Ok(())
    }

    /// Wraps normalized coefficients `a(1), a(2), ...`.
    pub fn from_normalized(weight: u32, values: Vec<f64>) -> Result<Self> {
        Self::check_weight(weight)?;
        let mut a = Vec::with_capacity(values.len() + 1);
        a.push(0.0);
        a.extend(values);
        Ok(Self {
            weight,
            a,
            tau: Vec::new(),
        })
    }

    /// Builds the table from exact eigenvalues `lambda(1), lambda(2), ...`.
    pub fn from_exact(weight: u32, values: Vec<i128>) -> Result<Self> {
        Self::check_weight(weight)?;
        if values.first().is_some_and(|&t| t != 1) {
            return Err(Error::InvalidArgument("first eigenvalue must be 1".into()));
        }
        let half = (weight as f64 - 1.0) / 2.0;
        let mut a = Vec::with_capacity(values.len() + 1);
        a.push(0.0);
        let mut tau = Vec::with_capacity(values.len() + 1);
        tau.push(0);
        for (i, &t) in values.iter().enumerate() {
            a.push(normalize(t as f64, (i + 1) as f64, half));
            tau.push(t);
        }
        Ok(Self { weight, a, tau })
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    /// Number of coefficients `N`.
    pub fn len(&self) -> usize {
        self.a.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `a(n)` for `1 <= n <= len()`.
    #[inline]
    pub fn a(&self, n: usize) -> f64 {
        self.a[n]
    }

    pub fn try_a(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidArgument("coefficients start at n = 1".into()));
        }
        self.a.get(n as usize).copied().ok_or(Error::TableTooShort {
            required: n as usize,
            available: self.len(),
        })
    }

    /// Slice indexed by `n`; entry 0 is a zero placeholder.
    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    /// Exact eigenvalue, if known.
    pub fn tau(&self, n: usize) -> Option<i128> {
        if n == 0 {
            return None;
        }
        self.tau.get(n).copied()
    }

    /// Number of leading coefficients with an exact eigenvalue.
    pub fn exact_len(&self) -> usize {
        self.tau.len().saturating_sub(1)
    }

    /// The first `n` coefficients.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            weight: self.weight,
            a: self.a[..=n].to_vec(),
            tau: self.tau[..self.tau.len().min(n + 1)].to_vec(),
        }
    }
}

#[inline]
fn normalize(value: f64, n: f64, half: f64) -> f64 {
    value / n.powf(half)
}

/// Exact `tau(n)`, `1 <= n <= terms`, from `x prod (1 - x^m)^24`.
///
/// The product is formed as the eighth power of
/// `prod (1 - x^m)^3 = sum (-1)^j (2j+1) x^{j(j+1)/2}` by three truncated
/// squarings, carried out modulo five NTT primes and recombined by CRT.
/// Coefficients beyond the `i128` range keep their normalized value only.
pub fn delta_coefficients(terms: usize) -> Result<EigenformCoefficients> {
    if terms == 0 {
        return Err(Error::InvalidArgument(
            "need at least one coefficient".into(),
        ));
    }
    if terms > MAX_DELTA_TERMS {
        return Err(Error::Budget(format!(
            "{terms} coefficients requested; at most {MAX_DELTA_TERMS} supported"
        )));
    }
    let residues = ntt::eta24_residues(terms);
    let garner = ntt::Garner::new();
    let mut a = Vec::with_capacity(terms + 1);
    a.push(0.0);
    let mut tau = Vec::with_capacity(terms + 1);
    tau.push(0i128);
    let mut exact_run = true;
    for i in 0..terms {
        let r = garner.reconstruct(std::array::from_fn(|j| residues[j][i]));
        let n = (i + 1) as f64;
        match (exact_run, r.exact) {
            (true, Some(t)) => tau.push(t),
            _ => exact_run = false,
        }
        a.push(normalize(r.approx, n, 5.5));
    }
    Ok(EigenformCoefficients { weight: 12, a, tau })
}

/// Result of extending prime eigenvalues to all `n <= N`.
#[derive(Debug, Clone)]
pub struct HeckeExtension {
    pub coeffs: EigenformCoefficients,
    /// Primes with `|a(p)| > 2`.
    pub deligne_warnings: Vec<u64>,
}

/// Fills `a(n)` for `n <= terms` from normalized prime eigenvalues using
/// multiplicativity and `a(p^{j+1}) = a(p) a(p^j) - a(p^{j-1})`.
pub fn hecke_extend(
    prime_values: &BTreeMap<u64, f64>,
    terms: usize,
    weight: u32,
) -> Result<HeckeExtension> {
    EigenformCoefficients::check_weight(weight)?;
    let spf = smallest_prime_factor_table(terms);
    let mut a = vec![0.0f64; terms + 1];
    let mut deligne_warnings = Vec::new();
    if terms >= 1 {
        a[1] = 1.0;
    }
    for n in 2..=terms {
        let p = spf[n] as usize;
        let mut rest = n;
        let mut pk = 1usize;
        while rest % p == 0 {
            rest /= p;
            pk *= p;
        }
        a[n] = if rest > 1 {
            a[pk] * a[rest]
        } else if pk == p {
            let ap = *prime_values
                .get(&(p as u64))
                .ok_or(Error::MissingPrime(p as u64))?;
            if ap.abs() > 2.0 {
                deligne_warnings.push(p as u64);
            }
            ap
        } else {
            let prev = pk / p;
            a[p] * a[prev] - a[prev / p]
        };
    }
    Ok(HeckeExtension {
        coeffs: EigenformCoefficients {
            weight,
            a,
            tau: Vec::new(),
        },
        deligne_warnings,
    })
}

/// Every `n` with `|a(n)| > d(n) + 1e-12`.
pub fn verify_deligne(coeffs: &EigenformCoefficients) -> Vec<u64> {
    let d = divisor_count_table(coeffs.len());
    (1..=coeffs.len())
        .filter(|&n| coeffs.a(n).abs() > d[n] as f64 + 1e-12)
        .map(|n| n as u64)
        .collect()
}

/// Parses `p a(p)` lines; blank lines and lines starting with `#` are skipped.
pub fn parse_prime_file(text: &str) -> Result<BTreeMap<u64, f64>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let bad = || Error::Parse(format!("line {}: expected `p a_p`", lineno + 1));
        let p: u64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let ap: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if parts.next().is_some() || !ap.is_finite() {
            return Err(bad());
        }
        out.insert(p, ap);
    }
    Ok(out)
}

const CACHE_MAGIC: &[u8; 4] = b"TAU1";

/// Writes the exact eigenvalues: `TAU1`, weight (u32 LE), count (u64 LE),
/// then that many `i128` LE values.
pub fn write_tau_cache<W: Write>(
    mut out: W,
    coeffs: &EigenformCoefficients,
) -> std::io::Result<()> {
    let count = coeffs.exact_len();
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&coeffs.weight.to_le_bytes())?;
    out.write_all(&(count as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(count * 16);
    for t in &coeffs.tau[1..=count] {
        buf.extend_from_slice(&t.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()
}

/// Reads a table written by [`write_tau_cache`].
pub fn read_tau_cache<R: Read>(mut input: R) -> Result<EigenformCoefficients> {
    let io = |e: std::io::Error| Error::Parse(format!("tau cache: {e}"));
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(io)?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Parse("tau cache: bad magic".into()));
    }
    let mut w = [0u8; 4];
    input.read_exact(&mut w).map_err(io)?;
    let mut n = [0u8; 8];
    input.read_exact(&mut n).map_err(io)?;
    let count = u64::from_le_bytes(n) as usize;
    let mut bytes = vec![
        0u8;
        count
            .checked_mul(16)
            .ok_or_else(|| Error::Parse("tau cache: bad length".into()))?
    ];
    input.read_exact(&mut bytes).map_err(io)?;
    let values = bytes
        .chunks_exact(16)
        .map(|c| i128::from_le_bytes(c.try_into().expect("16-byte chunk")))
        .collect();
    EigenformCoefficients::from_exact(u32::from_le_bytes(w), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Independent expansion: multiply by (1 - x^m) twenty-four times per m.
    fn tau_by_direct_product(terms: usize) -> Vec<i128> {
        let mut series = vec![0i128; terms];
        series[0] = 1;
        for m in 1..terms {
            for _ in 0..24 {
                for i in (m..terms).rev() {
                    series[i] -= series[i - m];
                }
            }
        }
        series
    }

    fn gcd(mut a: usize, mut b: usize) -> usize {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    }

    #[test]
    fn tau_small_values() {
        let c = delta_coefficients(12).unwrap();
        assert_eq!(c.tau(1), Some(1));
        assert_eq!(c.tau(2), Some(-24));
        assert_eq!(c.tau(3), Some(252));
        assert_eq!(c.tau(6), Some(-6048));
        assert_eq!(c.tau(6), Some(c.tau(2).unwrap() * c.tau(3).unwrap()));
        assert_eq!(c.tau(12), Some(-370944));
        assert_eq!(c.a(1), 1.0);
    }

    #[test]
    fn matches_direct_product_oracle() {
        let oracle = tau_by_direct_product(400);
        let c = delta_coefficients(400).unwrap();
        for n in 1..=400 {
            assert_eq!(c.tau(n), Some(oracle[n - 1]), "n = {n}");
        }
    }

    #[test]
    fn hecke_relations_hold_exactly() {
        let c = delta_coefficients(100_000).unwrap();
        assert_eq!(c.exact_len(), 100_000);
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let mut checked = 0;
        while checked < 10_000 {
            let m = rng.gen_range(1..=316usize);
            let n = rng.gen_range(1..=100_000 / m);
            if gcd(m, n) != 1 {
                continue;
            }
            assert_eq!(c.tau(m * n), Some(c.tau(m).unwrap() * c.tau(n).unwrap()));
            checked += 1;
        }
        let spf = smallest_prime_factor_table(100_000);
        for p in (2..=316usize).filter(|&p| spf[p] as usize == p) {
            let p11 = (p as i128).pow(11);
            let mut pj = p;
            while pj * p <= 100_000 {
                // tau(p^{j+1}) = tau(p) tau(p^j) - p^11 tau(p^{j-1})
                let lhs = c.tau(pj * p).unwrap();
                let rhs = c.tau(p).unwrap() * c.tau(pj).unwrap() - p11 * c.tau(pj / p).unwrap();
                assert_eq!(lhs, rhs);
                pj *= p;
            }
        }
    }

    #[test]
    fn deligne_clean_for_delta() {
        let c = delta_coefficients(100_000).unwrap();
        assert!(verify_deligne(&c).is_empty());
        assert!(verify_deligne(&c.truncated(1)).is_empty());
    }

    #[test]
    fn deligne_flags_synthetic_violation() {
        let c = EigenformCoefficients::from_normalized(12, vec![1.0, 3.0, 0.5]).unwrap();
        assert_eq!(verify_deligne(&c), vec![2]);
    }

    #[test]
    fn rankin_selberg_envelope() {
        let c = delta_coefficients(100_000).unwrap();
        for x in [1_000usize, 10_000, 100_000] {
            let mean: f64 = (1..=x).map(|n| c.a(n) * c.a(n)).sum::<f64>() / x as f64;
            // The envelope bounds K = 2 * mean; the plain mean sits near 0.38.
            assert!((0.5..=2.5).contains(&(2.0 * mean)), "x = {x}: {mean}");
        }
    }

    #[test]
    fn hecke_extend_reproduces_delta() {
        let c = delta_coefficients(5_000).unwrap();
        let spf = smallest_prime_factor_table(5_000);
        let primes: BTreeMap<u64, f64> = (2..=5_000usize)
            .filter(|&p| spf[p] as usize == p)
            .map(|p| (p as u64, c.a(p)))
            .collect();
        let ext = hecke_extend(&primes, 5_000, 12).unwrap();
        assert!(ext.deligne_warnings.is_empty());
        assert_eq!(ext.coeffs.a(1), 1.0);
        let a4 = c.a(2) * c.a(2) - 1.0;
        assert!((ext.coeffs.a(4) - a4).abs() < 1e-15);
        assert!((a4 - (-23.0 / 32.0)).abs() < 1e-15);
        assert_eq!(ext.coeffs.a(12), ext.coeffs.a(4) * ext.coeffs.a(3));
        for n in 1..=5_000 {
            assert!((ext.coeffs.a(n) - c.a(n)).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn hecke_extend_errors_and_warnings() {
        let mut primes = BTreeMap::new();
        primes.insert(2, 3.0);
        assert_eq!(
            hecke_extend(&primes, 2, 12).unwrap().deligne_warnings,
            vec![2]
        );
        assert_eq!(
            hecke_extend(&primes, 3, 12).unwrap_err(),
            Error::MissingPrime(3)
        );
        assert_eq!(hecke_extend(&primes, 1, 12).unwrap().coeffs.a(1), 1.0);
    }

    #[test]
    fn prime_file_parsing() {
        let text = "# weight 16\n2 0.5\n\n3   -1.25\n";
        let m = parse_prime_file(text).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[&3], -1.25);
        assert!(parse_prime_file("2").is_err());
        assert!(parse_prime_file("2 x").is_err());
    }

    #[test]
    fn cache_roundtrip() {
        let c = delta_coefficients(500).unwrap();
        let mut buf = Vec::new();
        write_tau_cache(&mut buf, &c).unwrap();
        assert_eq!(&buf[..4], b"TAU1");
        assert_eq!(buf.len(), 4 + 4 + 8 + 500 * 16);
        let back = read_tau_cache(&buf[..]).unwrap();
        assert_eq!(back, c);
        assert!(read_tau_cache(&b"TAU2"[..]).is_err());
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(delta_coefficients(0).is_err());
        assert!(matches!(
            delta_coefficients(MAX_DELTA_TERMS + 1),
            Err(Error::Budget(_))
        ));
    }
}
