//! Exact power-series arithmetic modulo word-sized NTT primes, with CRT
//! reconstruction of signed coefficients.

/// Primes `c * 2^25 + 1 < 2^32` with a primitive root each. Their product is
/// about `2^158`, enough for signed values of magnitude below `2^157`.
pub(crate) const MODULI: [(u64, u64); 5] = [
    (4_194_304_001, 3),
    (3_892_314_113, 3),
    (3_489_660_929, 3),
    (3_221_225_473, 5),
    (2_885_681_153, 3),
];

/// Largest transform length supported by every modulus.
pub(crate) const MAX_TRANSFORM_LOG2: u32 = 25;

#[inline]
fn pow_mod<const P: u64>(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    base %= P;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % P;
        }
        base = base * base % P;
        exp >>= 1;
    }
    acc
}

/// `table[h + k] = w_{2h}^k` for every power of two `h < n`, where `w_{2h}`
/// is a primitive `2h`-th root of unity (inverted when `invert`).
fn root_table<const P: u64, const G: u64>(n: usize, invert: bool) -> Vec<u32> {
    let mut table = vec![0u32; n.max(2)];
    let mut h = 1;
    while h < n {
        let mut w = pow_mod::<P>(G, (P - 1) / (2 * h) as u64);
        if invert {
            w = pow_mod::<P>(w, P - 2);
        }
        let mut x = 1u64;
        for slot in &mut table[h..2 * h] {
            *slot = x as u32;
            x = x * w % P;
        }
        h <<= 1;
    }
    table
}

/// Decimation in frequency: natural order in, bit-reversed order out.
fn forward<const P: u64>(a: &mut [u32], roots: &[u32]) {
    let mut h = a.len() / 2;
    while h >= 1 {
        let tw = &roots[h..2 * h];
        for chunk in a.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for ((x, y), &w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
                let u = *x as u64;
                let v = *y as u64;
                let s = u + v;
                *x = if s >= P { s - P } else { s } as u32;
                let d = if u >= v { u - v } else { u + P - v };
                *y = (d * w as u64 % P) as u32;
            }
        }
        h /= 2;
    }
}

/// Decimation in time: bit-reversed order in, natural order out, scaled by `1/n`.
fn inverse<const P: u64>(a: &mut [u32], roots: &[u32]) {
    let n = a.len();
    let mut h = 1;
    while h < n {
        let tw = &roots[h..2 * h];
        for chunk in a.chunks_exact_mut(2 * h) {
            let (lo, hi) = chunk.split_at_mut(h);
            for ((x, y), &w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
                let u = *x as u64;
                let v = *y as u64 * w as u64 % P;
                let s = u + v;
                *x = if s >= P { s - P } else { s } as u32;
                *y = if u >= v { u - v } else { u + P - v } as u32;
            }
        }
        h <<= 1;
    }
    let n_inv = pow_mod::<P>(n as u64, P - 2);
    for x in a.iter_mut() {
        *x = (*x as u64 * n_inv % P) as u32;
    }
}

#[cfg(test)]
fn transform<const P: u64, const G: u64>(a: &mut [u32], invert: bool) {
    // Natural-order transform for tests: forward then undo the bit reversal.
    let n = a.len();
    if invert {
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                a.swap(i, j);
            }
        }
        inverse::<P>(a, &root_table::<P, G>(n, true));
    } else {
        forward::<P>(a, &root_table::<P, G>(n, false));
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                a.swap(i, j);
            }
        }
    }
}

/// Squares the series `series` (length `L`) modulo `P`, truncated to length `L`.
#[cfg(test)]
fn square_truncated<const P: u64, const G: u64>(series: &mut Vec<u32>) {
    let len = series.len();
    let size = (2 * len - 1).next_power_of_two();
    square_with::<P>(
        series,
        &root_table::<P, G>(size, false),
        &root_table::<P, G>(size, true),
    );
    debug_assert_eq!(series.len(), len);
}

fn square_with<const P: u64>(series: &mut Vec<u32>, fwd: &[u32], inv: &[u32]) {
    let len = series.len();
    series.resize(fwd.len(), 0);
    forward::<P>(series, fwd);
    for x in series.iter_mut() {
        let v = *x as u64;
        *x = (v * v % P) as u32;
    }
    inverse::<P>(series, inv);
    series.truncate(len);
}

/// Coefficients of `prod_{m >= 1} (1 - x^m)^24` modulo `P`, length `len`.
fn eta24_mod<const P: u64, const G: u64>(len: usize) -> Vec<u32> {
    // prod (1 - x^m)^3 = sum_j (-1)^j (2j + 1) x^{j(j+1)/2}
    let mut series = vec![0u32; len];
    let mut j = 0u64;
    loop {
        let e = (j * (j + 1) / 2) as usize;
        if e >= len {
            break;
        }
        let c = (2 * j + 1) % P;
        series[e] = if j.is_multiple_of(2) { c } else { (P - c) % P } as u32;
        j += 1;
    }
    let size = (2 * len - 1).next_power_of_two();
    let fwd = root_table::<P, G>(size, false);
    let inv = root_table::<P, G>(size, true);
    for _ in 0..3 {
        square_with::<P>(&mut series, &fwd, &inv);
    }
    series
}

pub(crate) fn eta24_residues(len: usize) -> Vec<Vec<u32>> {
    macro_rules! run {
        ($i:expr) => {{
            const P: u64 = MODULI[$i].0;
            const G: u64 = MODULI[$i].1;
            eta24_mod::<P, G>(len)
        }};
    }
    vec![run!(0), run!(1), run!(2), run!(3), run!(4)]
}

/// Balanced mixed-radix reconstruction from residues modulo [`MODULI`].
pub(crate) struct Garner {
    /// `inv[j][i] = m_j^{-1} mod m_i` for `j < i`.
    inv: [[u64; 5]; 5],
}

/// A reconstructed integer: exact when it fits in `i128`, always as `f64`.
pub(crate) struct Reconstructed {
    pub exact: Option<i128>,
    pub approx: f64,
}

impl Garner {
    pub fn new() -> Self {
        let mut inv = [[0u64; 5]; 5];
        for i in 0..5 {
            let mi = MODULI[i].0;
            for (j, row) in inv.iter_mut().enumerate().take(i) {
                let mj = MODULI[j].0 % mi;
                row[i] = pow_mod_dyn(mj, mi - 2, mi);
            }
        }
        Self { inv }
    }

    pub fn reconstruct(&self, residues: [u32; 5]) -> Reconstructed {
        let mut digits = [0i64; 5];
        for i in 0..5 {
            let mi = MODULI[i].0;
            let mut t = residues[i] as u64 % mi;
            for j in 0..i {
                let vj = digits[j].rem_euclid(mi as i64) as u64;
                t = (t + mi - vj) % mi * self.inv[j][i] % mi;
            }
            digits[i] = if t > mi / 2 {
                t as i64 - mi as i64
            } else {
                t as i64
            };
        }
        let mut exact: Option<i128> = Some(digits[4] as i128);
        let mut approx = digits[4] as f64;
        for i in (0..4).rev() {
            let m = MODULI[i].0;
            exact = exact
                .and_then(|h| h.checked_mul(m as i128))
                .and_then(|h| h.checked_add(digits[i] as i128));
            approx = approx * m as f64 + digits[i] as f64;
        }
        if let Some(x) = exact {
            approx = x as f64;
        }
        Reconstructed { exact, approx }
    }
}

fn pow_mod_dyn(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moduli_support_transform_length() {
        for (p, _) in MODULI {
            assert_eq!((p - 1) % (1 << MAX_TRANSFORM_LOG2), 0);
            assert!(p < 1 << 32);
        }
    }

    #[test]
    fn transform_roundtrip_and_convolution() {
        const P: u64 = MODULI[0].0;
        const G: u64 = MODULI[0].1;
        let a: Vec<u32> = (0..16).map(|i| (i * 7 + 3) as u32).collect();
        let mut b = a.clone();
        transform::<P, G>(&mut b, false);
        transform::<P, G>(&mut b, true);
        assert_eq!(a, b);

        let mut s = vec![1u32, 2, 3];
        square_truncated::<P, G>(&mut s);
        // (1 + 2x + 3x^2)^2 = 1 + 4x + 10x^2 + ...
        assert_eq!(s, vec![1, 4, 10]);
    }

    #[test]
    fn garner_recovers_signed_values() {
        let g = Garner::new();
        for v in [
            0i128,
            1,
            -1,
            252,
            -6048,
            i64::MAX as i128 * 977,
            -(1i128 << 120) + 17,
        ] {
            let residues: [u32; 5] =
                std::array::from_fn(|i| v.rem_euclid(MODULI[i].0 as i128) as u32);
            let r = g.reconstruct(residues);
            assert_eq!(r.exact, Some(v));
        }
        // Beyond i128: only the float survives.
        let big = 3.0e40f64;
        let residues: [u32; 5] = std::array::from_fn(|i| {
            // 3e40 = 3 * 10^40 computed modulo m_i.
            let m = MODULI[i].0;
            3 * pow_mod_dyn(10, 40, m) % m
        })
        .map(|x| x as u32);
        let r = g.reconstruct(residues);
        assert!(r.exact.is_none());
        assert!((r.approx - big).abs() / big < 1e-14);
    }
}
