//! Complex log-gamma, the gamma quotient `G`, and the Mellin kernels
//!
//! ```text
//! V(x)   = 1/(pi i)  int_(c) G(y) x^-y dy/y,
//! W_s(x) = 1/(2pi i) int_(c) Gamma(k/2+s+y)/Gamma(k/2+s) w(y) (2pi x)^-y dy/y,
//! ```
//!
//! where `G(y) = Gamma(k/2+y)^2 / ((2pi)^{2y} Gamma(k/2)^2)` and the weight
//! `w(y)` is either `e^{y^2}` ([`AfeWeight::Gaussian`]) or 1
//! ([`AfeWeight::Unit`]). Both integrals are evaluated by the trapezoid rule on
//! a vertical line. When no abscissa is fixed, the line is moved to the
//! saddle of the integrand for the given `x`, picking up the residue at
//! `y = 0` if it lands to the left of the origin.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 5.242_187_5;
const LANCZOS_SERIES_START: f64 = 0.999_999_999_999_997_1;
const LANCZOS: [f64; 14] = [
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_746,
    -0.491_913_816_097_620_2,
    3.399_464_998_481_189e-5,
    4.652_362_892_704_858e-5,
    -9.837_447_530_487_956e-5,
    1.580_887_032_249_125e-4,
    -2.102_644_417_241_048_8e-4,
    2.174_396_181_152_126_5e-4,
    -1.643_181_065_367_639e-4,
    8.441_822_398_385_275e-5,
    -2.619_083_840_158_140_8e-5,
    3.689_918_265_953_162_5e-6,
];
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const MAX_RECURRENCE_STEPS: f64 = 1.0e6;

fn lanczos_log_gamma(z: Complex64) -> Complex64 {
    let tmp = z + LANCZOS_G;
    let head = (z + 0.5) * tmp.ln() - tmp;
    let mut ser = Complex64::new(LANCZOS_SERIES_START, 0.0);
    let mut y = z;
    for c in LANCZOS {
        y += 1.0;
        ser += c / y;
    }
    head + LN_SQRT_2PI + ser.ln() - z.ln()
}

/// `log Gamma(z)`, analytic on the plane cut along the negative real axis
/// and real on the positive axis.
pub fn log_gamma(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain {
            op: "log_gamma",
            value: format!("{z}"),
            reason: "argument must be finite",
        });
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0 {
        return Err(Error::Pole(format!("log_gamma at {}", z.re)));
    }
    if z.re >= 0.5 {
        return Ok(lanczos_log_gamma(z));
    }
    let steps = (0.5 - z.re).ceil();
    if steps > MAX_RECURRENCE_STEPS {
        return Err(Error::Domain {
            op: "log_gamma",
            value: format!("{z}"),
            reason: "real part too far left",
        });
    }
    // log Gamma(z) = log Gamma(z + m) - sum_{j < m} log(z + j)
    let mut w = z;
    let mut shift = Complex64::new(0.0, 0.0);
    for _ in 0..steps as u64 {
        shift += w.ln();
        w += 1.0;
    }
    Ok(lanczos_log_gamma(w) - shift)
}

fn check_weight(k: u32) -> Result<()> {
    if k == 0 || !k.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "weight must be a positive even integer, got {k}"
        )));
    }
    Ok(())
}

fn ln_g(s: Complex64, k: u32) -> Result<Complex64> {
    let a = (k / 2) as f64;
    let ln_2pi = (2.0 * PI).ln();
    Ok(2.0 * log_gamma(a + s)? - 2.0 * log_gamma(Complex64::new(a, 0.0))? - 2.0 * s * ln_2pi)
}

/// `G(s) = Gamma(k/2 + s)^2 / ((2 pi)^{2s} Gamma(k/2)^2)`.
pub fn gamma_factor_g(s: Complex64, k: u32) -> Result<Complex64> {
    check_weight(k)?;
    Ok(ln_g(s, k)?.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    V,
    W,
}

/// Extra factor in the `W` integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AfeWeight {
    /// `e^{y^2}`.
    Gaussian,
    /// 1; then `W_s(x) = Gamma(k/2+s, 2 pi x) / Gamma(k/2+s)`.
    Unit,
}

/// Quadrature description for one kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothKernel {
    pub kind: KernelKind,
    pub weight: u32,
    /// Abscissa `c > 0` of the line; `None` places it per argument.
    pub contour: Option<f64>,
    /// Truncation height `T`; `None` derives it from the integrand decay.
    pub height: Option<f64>,
    pub step: f64,
    /// `s` in `W_s`; zero for `V`.
    pub shift: Complex64,
    /// Ignored for `V`.
    pub afe_weight: AfeWeight,
}

impl SmoothKernel {
    pub fn v(weight: u32) -> Self {
        Self {
            kind: KernelKind::V,
            weight,
            contour: None,
            height: None,
            step: 0.05,
            shift: Complex64::new(0.0, 0.0),
            afe_weight: AfeWeight::Unit,
        }
    }

    /// `W_s` with the Gaussian factor `e^{y^2}`.
    pub fn w(weight: u32, shift: Complex64) -> Self {
        Self {
            kind: KernelKind::W,
            weight,
            contour: None,
            height: None,
            step: 0.02,
            shift,
            afe_weight: AfeWeight::Gaussian,
        }
    }

    /// `W_s` without the Gaussian factor.
    pub fn w_unit(weight: u32, shift: Complex64) -> Self {
        Self {
            afe_weight: AfeWeight::Unit,
            step: 0.05,
            ..Self::w(weight, shift)
        }
    }

    pub fn with_contour(self, c: f64) -> Self {
        Self {
            contour: Some(c),
            ..self
        }
    }

    pub fn with_height(self, t: f64) -> Self {
        Self {
            height: Some(t),
            ..self
        }
    }

    pub fn with_step(self, h: f64) -> Self {
        Self { step: h, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        check_weight(self.weight)?;
        let bad = |reason: &'static str, value: String| {
            Err(Error::Domain {
                op: "SmoothKernel",
                value,
                reason,
            })
        };
        if let Some(c) = self.contour {
            if !(c > 0.0 && c.is_finite()) {
                return bad("contour abscissa must be positive", c.to_string());
            }
        }
        if let Some(t) = self.height {
            if !(t > 0.0 && t.is_finite()) {
                return bad("truncation height must be positive", t.to_string());
            }
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return bad("step must be positive", self.step.to_string());
        }
        match self.kind {
            KernelKind::V if self.shift != Complex64::new(0.0, 0.0) => {
                bad("V takes no shift", self.shift.to_string())
            }
            KernelKind::W if (self.weight / 2) as f64 + self.shift.re <= 0.0 => {
                bad("needs k/2 + Re(s) > 0", self.shift.to_string())
            }
            _ => Ok(()),
        }
    }
}

/// Integrand tail below `e^-DECAY` of its peak is dropped.
const DECAY: f64 = 40.0;
/// Largest height tried before giving up.
const MAX_HEIGHT: f64 = 4000.0;
/// Placed abscissae stay this far from poles.
const POLE_MARGIN: f64 = 0.5;
/// Upper end of the placed abscissa range.
const MAX_ABSCISSA: f64 = 30.0;
/// Grid for placed abscissae.
const ABSCISSA_QUANTUM: f64 = 0.5;
/// Largest accepted absolute quadrature error estimate.
const QUADRATURE_TOLERANCE: f64 = 1e-9;
/// Steps between exact recomputations of the rotating phase.
const RENORMALIZE_EVERY: usize = 64;

/// Trapezoid nodes on one line `Re y = c`.
#[derive(Debug)]
struct Nodes {
    c: f64,
    step: f64,
    /// Index of `t = 0`.
    first: i64,
    /// `prefactor * h * Phi(y_j) / y_j`.
    main: Vec<Complex64>,
    /// `-prefactor * h * Phi(y_j)`, the `d/d log x` integrand; only for `V`.
    deriv: Vec<Complex64>,
}

/// A kernel ready for repeated evaluation. Node tables are built on demand
/// and shared; evaluation is safe from several threads.
#[derive(Debug)]
pub struct Kernel {
    spec: SmoothKernel,
    /// `k/2 + s` (`k/2` for `V`).
    base: Complex64,
    ln_gamma_base: Complex64,
    /// Admissible placed abscissae and the integrand's log size at `t = 0`
    /// before the `x^-y` factor.
    profile: Vec<(f64, f64)>,
    tables: Mutex<HashMap<u64, Arc<Nodes>>>,
}

impl Kernel {
    pub fn new(spec: SmoothKernel) -> Result<Self> {
        spec.validate()?;
        let a = (spec.weight / 2) as f64;
        let base = match spec.kind {
            KernelKind::V => Complex64::new(a, 0.0),
            KernelKind::W => a + spec.shift,
        };
        let ln_gamma_base = log_gamma(base)?;
        let mut kernel = Self {
            spec,
            base,
            ln_gamma_base,
            profile: Vec::new(),
            tables: Mutex::new(HashMap::new()),
        };
        if spec.contour.is_none() {
            let lo = -base.re + POLE_MARGIN;
            let mut c = (lo / ABSCISSA_QUANTUM).ceil() * ABSCISSA_QUANTUM;
            while c <= MAX_ABSCISSA {
                if c.abs() >= POLE_MARGIN {
                    let y = Complex64::new(c, 0.0);
                    let size = kernel.ln_phi(y)?.re - c.abs().ln();
                    kernel.profile.push((c, size));
                }
                c += ABSCISSA_QUANTUM;
            }
        }
        Ok(kernel)
    }

    pub fn spec(&self) -> &SmoothKernel {
        &self.spec
    }

    /// `log` of the integrand without `z^-y / y`.
    fn ln_phi(&self, y: Complex64) -> Result<Complex64> {
        match self.spec.kind {
            KernelKind::V => {
                let ln_2pi = (2.0 * PI).ln();
                Ok(2.0 * (log_gamma(self.base + y)? - self.ln_gamma_base) - 2.0 * y * ln_2pi)
            }
            KernelKind::W => {
                let mut v = log_gamma(self.base + y)? - self.ln_gamma_base;
                if self.spec.afe_weight == AfeWeight::Gaussian {
                    v += y * y;
                }
                Ok(v)
            }
        }
    }

    fn prefactor(&self) -> f64 {
        match self.spec.kind {
            KernelKind::V => 1.0 / PI,
            KernelKind::W => 0.5 / PI,
        }
    }

    fn residue(&self) -> f64 {
        match self.spec.kind {
            KernelKind::V => 2.0,
            KernelKind::W => 1.0,
        }
    }

    /// `z` in `z^-y`.
    fn base_point(&self, x: f64) -> f64 {
        match self.spec.kind {
            KernelKind::V => x,
            KernelKind::W => 2.0 * PI * x,
        }
    }

    fn abscissa_for(&self, ln_z: f64) -> f64 {
        if let Some(c) = self.spec.contour {
            return c;
        }
        self.profile
            .iter()
            .map(|&(c, size)| (c, size - c * ln_z))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(c, _)| c)
            .unwrap_or(1.0)
    }

    fn height_for(&self, c: f64) -> Result<f64> {
        if let Some(t) = self.spec.height {
            return Ok(t);
        }
        let size = |t: f64| -> Result<f64> {
            let y = Complex64::new(c, t);
            Ok(self.ln_phi(y)?.re - y.norm().ln())
        };
        let mut peak = size(0.0)?;
        let mut t = 0.0;
        let mut quiet = 0;
        while t < MAX_HEIGHT {
            t += 0.5;
            let v = size(t)?.max(size(-t)?);
            peak = peak.max(v);
            if v < peak - DECAY {
                quiet += 1;
                if quiet >= 4 {
                    return Ok(t);
                }
            } else {
                quiet = 0;
            }
        }
        Err(Error::Quadrature(format!(
            "integrand on Re y = {c} does not decay below height {MAX_HEIGHT}"
        )))
    }

    fn nodes(&self, c: f64) -> Result<Arc<Nodes>> {
        let key = c.to_bits();
        if let Some(n) = self.tables.lock().expect("kernel cache poisoned").get(&key) {
            return Ok(n.clone());
        }
        let height = self.height_for(c)?;
        let h = self.spec.step;
        let half = (height / h).ceil() as i64;
        let pref = self.prefactor() * h;
        let with_deriv = self.spec.kind == KernelKind::V;
        let mut main = Vec::with_capacity((2 * half + 1) as usize);
        let mut deriv = Vec::new();
        for j in -half..=half {
            let y = Complex64::new(c, j as f64 * h);
            let phi = self.ln_phi(y)?.exp();
            main.push(pref * phi / y);
            if with_deriv {
                deriv.push(-pref * phi);
            }
        }
        let nodes = Arc::new(Nodes {
            c,
            step: h,
            first: -half,
            main,
            deriv,
        });
        self.tables
            .lock()
            .expect("kernel cache poisoned")
            .insert(key, nodes.clone());
        Ok(nodes)
    }

    /// `sum_j w_j z^{-y_j}` together with an error estimate.
    fn sum(nodes: &Nodes, weights: &[Complex64], ln_z: f64) -> (Complex64, f64) {
        let mut all = Complex64::new(0.0, 0.0);
        let mut even = Complex64::new(0.0, 0.0);
        let mut scale = 0.0;
        let omega = -nodes.step * ln_z;
        let rotate = Complex64::from_polar(1.0, omega);
        let mut phase = Complex64::new(0.0, 0.0);
        for (i, w) in weights.iter().enumerate() {
            let j = nodes.first + i as i64;
            if i % RENORMALIZE_EVERY == 0 {
                phase = Complex64::from_polar(1.0, omega * j as f64);
            } else {
                phase *= rotate;
            }
            let term = w * phase;
            all += term;
            if j % 2 == 0 {
                even += term;
            }
            scale += w.norm();
        }
        let magnitude = (-nodes.c * ln_z).exp();
        let value = all * magnitude;
        let scale = scale * magnitude;
        let diff = (all - 2.0 * even).norm() * magnitude;
        let estimate = if scale > 0.0 {
            diff * (diff / scale).min(1.0) + 1e-15 * scale
        } else {
            0.0
        };
        (value, estimate)
    }

    fn check_x(&self, x: f64) -> Result<()> {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::Domain {
                op: "kernel",
                value: x.to_string(),
                reason: "argument must be positive and finite",
            });
        }
        Ok(())
    }

    fn accept(&self, x: f64, c: f64, estimate: f64) -> Result<()> {
        if estimate > QUADRATURE_TOLERANCE || !estimate.is_finite() {
            return Err(Error::Quadrature(format!(
                "kernel {:?} at x = {x}, c = {c}: error estimate {estimate:e}",
                self.spec.kind
            )));
        }
        Ok(())
    }

    /// Kernel value at `x > 0`.
    pub fn eval(&self, x: f64) -> Result<Complex64> {
        self.check_x(x)?;
        let ln_z = self.base_point(x).ln();
        let c = self.abscissa_for(ln_z);
        let nodes = self.nodes(c)?;
        let (mut value, estimate) = Self::sum(&nodes, &nodes.main, ln_z);
        self.accept(x, c, estimate)?;
        if c < 0.0 {
            value += self.residue();
        }
        Ok(value)
    }

    /// `V(x)` and `x V'(x)`; only for `V` kernels.
    pub fn eval_with_log_derivative(&self, x: f64) -> Result<(f64, f64)> {
        if self.spec.kind != KernelKind::V {
            return Err(Error::InvalidArgument(
                "log-derivative is only provided for V".into(),
            ));
        }
        self.check_x(x)?;
        let ln_z = x.ln();
        let c = self.abscissa_for(ln_z);
        let nodes = self.nodes(c)?;
        let (value, e1) = Self::sum(&nodes, &nodes.main, ln_z);
        let (deriv, e2) = Self::sum(&nodes, &nodes.deriv, ln_z);
        self.accept(x, c, e1.max(e2))?;
        let value = if c < 0.0 {
            value + self.residue()
        } else {
            value
        };
        Ok((value.re, deriv.re))
    }
}

/// Largest imaginary part tolerated in a real kernel value.
const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// `V(x)` by direct quadrature.
pub fn kernel_v(x: f64, params: &SmoothKernel) -> Result<f64> {
    if params.kind != KernelKind::V {
        return Err(Error::InvalidArgument("expected a V kernel".into()));
    }
    let v = Kernel::new(*params)?.eval(x)?;
    if v.im.abs() > IMAGINARY_TOLERANCE {
        return Err(Error::Quadrature(format!(
            "V({x}) has imaginary part {:e}",
            v.im
        )));
    }
    Ok(v.re)
}

/// `W_s(x)` by direct quadrature, `s = params.shift`.
pub fn kernel_w(x: f64, params: &SmoothKernel) -> Result<Complex64> {
    if params.kind != KernelKind::W {
        return Err(Error::InvalidArgument("expected a W kernel".into()));
    }
    Kernel::new(*params)?.eval(x)
}

/// `V` on a geometric grid, interpolated by cubic Hermite polynomials in
/// `(log x, log V)` using exact derivatives at the knots.
#[derive(Debug, Clone)]
pub struct VTable {
    weight: u32,
    ln_x_min: f64,
    ln_step: f64,
    ln_v: Vec<f64>,
    /// `d log V / d log x`.
    slope: Vec<f64>,
}

impl VTable {
    pub const X_MIN: f64 = 1e-6;
    pub const X_MAX: f64 = 64.0;
    pub const RATIO: f64 = 1.002;

    pub fn new(weight: u32) -> Result<Self> {
        let kernel = Kernel::new(SmoothKernel::v(weight))?;
        let ln_x_min = Self::X_MIN.ln();
        let ln_step = Self::RATIO.ln();
        let knots = ((Self::X_MAX.ln() - ln_x_min) / ln_step).ceil() as usize + 1;
        let mut ln_v = Vec::with_capacity(knots);
        let mut slope = Vec::with_capacity(knots);
        for i in 0..knots {
            let x = (ln_x_min + i as f64 * ln_step).exp();
            let (v, dv) = kernel.eval_with_log_derivative(x)?;
            if v <= 0.0 {
                return Err(Error::Quadrature(format!("V({x}) = {v} is not positive")));
            }
            ln_v.push(v.ln());
            slope.push(dv / v);
        }
        Ok(Self {
            weight,
            ln_x_min,
            ln_step,
            ln_v,
            slope,
        })
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    /// Upper end of the grid; `V` is treated as 0 beyond it.
    pub fn x_max(&self) -> f64 {
        (self.ln_x_min + (self.ln_v.len() - 1) as f64 * self.ln_step).exp()
    }

    /// Interpolated `V(x)`: 2 below the grid, 0 above it.
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x.ln() - self.ln_x_min) / self.ln_step;
        if u < 0.0 {
            return 2.0;
        }
        let i = u as usize;
        if i + 1 >= self.ln_v.len() {
            return 0.0;
        }
        let t = u - i as f64;
        let (p0, p1) = (self.ln_v[i], self.ln_v[i + 1]);
        let (m0, m1) = (
            self.slope[i] * self.ln_step,
            self.slope[i + 1] * self.ln_step,
        );
        let t2 = t * t;
        let t3 = t2 * t;
        let ln_v = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        ln_v.exp()
    }

    /// Smallest grid point `X` with `V(x) <= bound` for all `x >= X`.
    pub fn cutoff_for(&self, bound: f64) -> f64 {
        let ln_bound = bound.ln();
        let i = self
            .ln_v
            .iter()
            .position(|&v| v <= ln_bound)
            .unwrap_or(self.ln_v.len() - 1);
        (self.ln_x_min + i as f64 * self.ln_step).exp()
    }
}
