//! Compensated accumulation.
//!
//! Every long floating-point reduction in the crate goes through these
//! accumulators in a fixed order, so results do not depend on how work was
//! split across threads as long as the chunk boundaries are fixed.

use num_complex::Complex64;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub const fn new() -> Self {
        Self {
            sum: 0.0,
            compensation: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Folds another accumulator in, keeping its compensation term.
    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of complex values (independent accumulators per part).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub const fn new() -> Self {
        Self {
            re: NeumaierSum::new(),
            im: NeumaierSum::new(),
        }
    }

    #[inline]
    pub fn add(&mut self, value: Complex64) {
        self.re.add(value.re);
        self.im.add(value.im);
    }

    pub fn merge(&mut self, other: &ComplexSum) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

impl FromIterator<Complex64> for ComplexSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut acc = ComplexSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Sums `values` in order with compensation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<NeumaierSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_low_bits() {
        let values = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(compensated_sum(values), 2.0);
        assert_eq!(values.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (1..2000).map(|i| 1.0 / i as f64).collect();
        let whole = compensated_sum(xs.iter().copied());
        let mut left: NeumaierSum = xs[..700].iter().copied().collect();
        let right: NeumaierSum = xs[700..].iter().copied().collect();
        left.merge(&right);
        assert!((left.value() - whole).abs() <= 1e-15 * whole);
    }

    #[test]
    fn complex_parts_are_independent() {
        let acc: ComplexSum = (0..10)
            .map(|i| Complex64::new(i as f64, -(i as f64)))
            .collect();
        assert_eq!(acc.value(), Complex64::new(45.0, -45.0));
    }
}
