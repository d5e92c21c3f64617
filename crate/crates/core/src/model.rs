//! Exciting functions, rate functions and the validated Hawkes model.
//!
//! A model pairs a non-increasing kernel `h` with a positive, non-decreasing,
//! Lipschitz rate function `λ`. The intensity of the process at time `t` is
//! `λ(Σ_{τ<t} h(t − τ))`. Construction enforces the stability condition
//! `α·‖h‖₁ < 1`, where `α` is the Lipschitz constant of `λ`.
//!
//! Every cached integral is computed in closed form for its family.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of points on the deterministic monotonicity check grid.
pub const CHECK_GRID_POINTS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),
    #[error("assumption violation: {0}")]
    AssumptionViolation(String),
    #[error("stability violation: alpha * |h|_1 = {product} >= 1")]
    StabilityViolation { product: f64 },
    #[error("invalid history: {0}")]
    InvalidHistory(String),
    #[error("config parse error: {0}")]
    Parse(String),
}

/// Parametric family of an exciting function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `h(t) = a·e^{−b t}`
    Exponential { a: f64, b: f64 },
    /// `h(t) = c·(t + t0)^{−p}` with `p > 2`
    PowerLaw { c: f64, p: f64, t0: f64 },
    /// `h ≡ 0`
    Zero,
}

/// A validated exciting function with its cached integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kernel {
    family: KernelFamily,
    value_at_zero: f64,
    l1_norm: f64,
    first_moment: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily) -> Result<Self, ModelError> {
        let finite_nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(ModelError::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        let (value_at_zero, l1_norm, first_moment) = match family {
            KernelFamily::Exponential { a, b } => {
                finite_nonneg("a", a)?;
                if !(b.is_finite() && b > 0.0) {
                    return Err(ModelError::InvalidParameter(format!("decay rate b must be > 0, got {b}")));
                }
                (a, a / b, a / (b * b))
            }
            KernelFamily::PowerLaw { c, p, t0 } => {
                finite_nonneg("c", c)?;
                if !(p.is_finite() && p > 2.0) {
                    return Err(ModelError::InvalidParameter(format!(
                        "power-law exponent p must be > 2 for a finite first moment, got {p}"
                    )));
                }
                if t0 == 0.0 {
                    return Err(ModelError::UnsupportedKernel("power-law kernel with t0 = 0 has h(0) = inf".into()));
                }
                if !(t0.is_finite() && t0 > 0.0) {
                    return Err(ModelError::InvalidParameter(format!("power-law offset t0 must be > 0, got {t0}")));
                }
                (c * t0.powf(-p), c * t0.powf(1.0 - p) / (p - 1.0), c * t0.powf(2.0 - p) / ((p - 1.0) * (p - 2.0)))
            }
            KernelFamily::Zero => (0.0, 0.0, 0.0),
        };
        if !value_at_zero.is_finite() {
            return Err(ModelError::UnsupportedKernel(format!("h(0) is not finite ({value_at_zero})")));
        }
        let kernel = Kernel { family, value_at_zero, l1_norm, first_moment };
        kernel.check_grid()?;
        Ok(kernel)
    }

    pub fn exponential(a: f64, b: f64) -> Result<Self, ModelError> {
        Self::new(KernelFamily::Exponential { a, b })
    }

    pub fn power_law(c: f64, p: f64, t0: f64) -> Result<Self, ModelError> {
        Self::new(KernelFamily::PowerLaw { c, p, t0 })
    }

    pub fn zero() -> Self {
        Kernel { family: KernelFamily::Zero, value_at_zero: 0.0, l1_norm: 0.0, first_moment: 0.0 }
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn value_at_zero(&self) -> f64 {
        self.value_at_zero
    }

    /// `‖h‖₁ = ∫₀^∞ h(t) dt`
    pub fn l1_norm(&self) -> f64 {
        self.l1_norm
    }

    /// `∫₀^∞ t·h(t) dt`
    pub fn first_moment(&self) -> f64 {
        self.first_moment
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.family, KernelFamily::Zero) || self.value_at_zero == 0.0
    }

    /// Evaluates `h(t)`. Negative lags evaluate to zero (the kernel is causal).
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self.family {
            KernelFamily::Exponential { a, b } => a * (-b * t).exp(),
            KernelFamily::PowerLaw { c, p, t0 } => c * (t + t0).powf(-p),
            KernelFamily::Zero => 0.0,
        }
    }

    /// Checked evaluation of `h(t)` for `t ≥ 0`.
    pub fn eval(&self, t: f64) -> Result<f64, ModelError> {
        check_lag(t)?;
        Ok(self.value(t))
    }

    /// Tail integral `H(t) = ∫_t^∞ h(s) ds`.
    pub fn tail_integral(&self, t: f64) -> Result<f64, ModelError> {
        check_lag(t)?;
        Ok(match self.family {
            KernelFamily::Exponential { a, b } => a / b * (-b * t).exp(),
            KernelFamily::PowerLaw { c, p, t0 } => c * (t + t0).powf(1.0 - p) / (p - 1.0),
            KernelFamily::Zero => 0.0,
        })
    }

    /// Tail first moment `∫_t^∞ s·h(s) ds`.
    pub fn tail_first_moment(&self, t: f64) -> Result<f64, ModelError> {
        check_lag(t)?;
        Ok(match self.family {
            KernelFamily::Exponential { a, b } => a * (-b * t).exp() * (t / b + 1.0 / (b * b)),
            KernelFamily::PowerLaw { c, p, t0 } => {
                // substitute u = s + t0
                let u = t + t0;
                c * (u.powf(2.0 - p) / (p - 2.0) - t0 * u.powf(1.0 - p) / (p - 1.0))
            }
            KernelFamily::Zero => 0.0,
        })
    }

    fn check_grid(&self) -> Result<(), ModelError> {
        let mut prev = self.value(0.0);
        for t in check_grid() {
            let v = self.value(t);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ModelError::AssumptionViolation(format!(
                    "h({t}) = {v} is not a finite non-negative number"
                )));
            }
            if v > prev {
                return Err(ModelError::AssumptionViolation(format!("h is increasing near t = {t}")));
            }
            prev = v;
        }
        Ok(())
    }
}

/// Parametric family of a rate function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum RateFamily {
    /// `λ(z) = ν + slope·z`
    Linear {
        nu: f64,
        #[serde(default = "unit_slope")]
        slope: f64,
    },
    /// `λ(z) = ν + α·z/(1 + z)`
    Saturating { nu: f64, alpha: f64 },
    /// `λ(z) = ν + α·min(z, cap)`
    ClippedLinear { nu: f64, alpha: f64, cap: f64 },
}

fn unit_slope() -> f64 {
    1.0
}

/// A validated rate function with its Lipschitz constant and base value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFunction {
    family: RateFamily,
    lipschitz: f64,
    base: f64,
}

impl RateFunction {
    pub fn new(family: RateFamily) -> Result<Self, ModelError> {
        let (nu, lipschitz) = match family {
            RateFamily::Linear { nu, slope } => (nu, slope),
            RateFamily::Saturating { nu, alpha } => (nu, alpha),
            RateFamily::ClippedLinear { nu, alpha, cap } => {
                if !(cap.is_finite() && cap > 0.0) {
                    return Err(ModelError::InvalidParameter(format!("cap must be > 0, got {cap}")));
                }
                (nu, alpha)
            }
        };
        if !(nu.is_finite() && nu > 0.0) {
            return Err(ModelError::InvalidParameter(format!("baseline nu must be > 0, got {nu}")));
        }
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(ModelError::AssumptionViolation(format!(
                "rate gain must be finite and >= 0 for an increasing rate, got {lipschitz}"
            )));
        }
        let rate = RateFunction { family, lipschitz, base: nu };
        rate.check_grid()?;
        Ok(rate)
    }

    pub fn linear(nu: f64) -> Result<Self, ModelError> {
        Self::new(RateFamily::Linear { nu, slope: 1.0 })
    }

    pub fn linear_with_slope(nu: f64, slope: f64) -> Result<Self, ModelError> {
        Self::new(RateFamily::Linear { nu, slope })
    }

    pub fn saturating(nu: f64, alpha: f64) -> Result<Self, ModelError> {
        Self::new(RateFamily::Saturating { nu, alpha })
    }

    pub fn clipped_linear(nu: f64, alpha: f64, cap: f64) -> Result<Self, ModelError> {
        Self::new(RateFamily::ClippedLinear { nu, alpha, cap })
    }

    pub fn family(&self) -> RateFamily {
        self.family
    }

    /// Lipschitz constant `α`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `λ(0)`
    pub fn base(&self) -> f64 {
        self.base
    }

    /// `true` for `λ(z) = ν + slope·z`.
    pub fn is_linear(&self) -> bool {
        matches!(self.family, RateFamily::Linear { .. })
    }

    #[inline]
    pub fn value(&self, z: f64) -> f64 {
        match self.family {
            RateFamily::Linear { nu, slope } => nu + slope * z,
            RateFamily::Saturating { nu, alpha } => nu + alpha * z / (1.0 + z),
            RateFamily::ClippedLinear { nu, alpha, cap } => nu + alpha * z.min(cap),
        }
    }

    /// `∫₀^dt λ(s0·e^{−decay·u}) du`, the exact compensator increment between
    /// events for an exponential kernel whose excitation starts at `s0`.
    pub fn integral_along_decay(&self, s0: f64, decay: f64, dt: f64) -> f64 {
        if dt <= 0.0 {
            return 0.0;
        }
        // s0·(1 − e^{−b·dt}) / b
        let linear_part = |s: f64| -s * (-decay * dt).exp_m1() / decay;
        match self.family {
            RateFamily::Linear { nu, slope } => nu * dt + slope * linear_part(s0),
            RateFamily::Saturating { nu, alpha } => {
                let end = s0 * (-decay * dt).exp();
                nu * dt + alpha / decay * (s0.ln_1p() - end.ln_1p())
            }
            RateFamily::ClippedLinear { nu, alpha, cap } => {
                if s0 <= cap {
                    nu * dt + alpha * linear_part(s0)
                } else {
                    let saturated = (s0 / cap).ln() / decay;
                    if dt <= saturated {
                        (nu + alpha * cap) * dt
                    } else {
                        let rest = dt - saturated;
                        nu * dt + alpha * cap * saturated - alpha * cap * (-decay * rest).exp_m1() / decay
                    }
                }
            }
        }
    }

    fn check_grid(&self) -> Result<(), ModelError> {
        let mut prev_z = 0.0;
        let mut prev = self.value(0.0);
        if !(prev > 0.0) {
            return Err(ModelError::AssumptionViolation(format!("lambda(0) = {prev} is not positive")));
        }
        for z in check_grid() {
            let v = self.value(z);
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::AssumptionViolation(format!("lambda({z}) = {v} is not positive")));
            }
            if v < prev {
                return Err(ModelError::AssumptionViolation(format!("lambda is decreasing near z = {z}")));
            }
            let ratio = (v - prev) / (z - prev_z);
            // allow a few ulps of rounding in the difference of nearby values
            let slack = 8.0 * f64::EPSILON * v.abs().max(1.0);
            if v - prev > self.lipschitz * (z - prev_z) * (1.0 + 1e-9) + slack {
                return Err(ModelError::AssumptionViolation(format!(
                    "sampled Lipschitz ratio {ratio} exceeds alpha = {}",
                    self.lipschitz
                )));
            }
            prev = v;
            prev_z = z;
        }
        Ok(())
    }
}

/// A Hawkes model whose kernel and rate satisfy the stability condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HawkesModel {
    kernel: Kernel,
    rate: RateFunction,
    stability_margin: f64,
}

impl HawkesModel {
    pub fn new(kernel: Kernel, rate: RateFunction) -> Result<Self, ModelError> {
        let product = rate.lipschitz() * kernel.l1_norm();
        if !(product < 1.0) {
            return Err(ModelError::StabilityViolation { product });
        }
        Ok(HawkesModel { kernel, rate, stability_margin: 1.0 - product })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn rate(&self) -> &RateFunction {
        &self.rate
    }

    /// `1 − α‖h‖₁`, strictly positive.
    pub fn stability_margin(&self) -> f64 {
        self.stability_margin
    }

    /// `α‖h‖₁`, the contraction ratio of the coupling series.
    pub fn contraction(&self) -> f64 {
        self.rate.lipschitz() * self.kernel.l1_norm()
    }

    /// Intensity for a given excitation sum.
    #[inline]
    pub fn intensity(&self, excitation: f64) -> f64 {
        self.rate.value(excitation)
    }

    /// Parses a model from TOML text with `[kernel]` and `[rate]` tables.
    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        let spec: ModelSpec = toml::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
        spec.build()
    }
}

/// Checks both families and the stability condition.
pub fn validate_model(kernel: Kernel, rate: RateFunction) -> Result<HawkesModel, ModelError> {
    HawkesModel::new(kernel, rate)
}

/// Serializable description of a model, as found in config files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kernel: KernelFamily,
    pub rate: RateFamily,
}

impl ModelSpec {
    pub fn build(&self) -> Result<HawkesModel, ModelError> {
        validate_model(Kernel::new(self.kernel)?, RateFunction::new(self.rate)?)
    }
}

impl From<&HawkesModel> for ModelSpec {
    fn from(model: &HawkesModel) -> Self {
        ModelSpec { kernel: model.kernel.family, rate: model.rate.family }
    }
}

/// Past events on `(−B, 0]`, the conditioning configuration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    times: Vec<f64>,
}

impl History {
    pub fn new(times: Vec<f64>) -> Result<Self, ModelError> {
        if let Some(bad) = times.iter().find(|t| !(t.is_finite() && **t <= 0.0)) {
            return Err(ModelError::InvalidHistory(format!("history times must be finite and <= 0, got {bad}")));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::InvalidHistory("history times must be strictly increasing".into()));
        }
        Ok(History { times })
    }

    pub fn empty() -> Self {
        History::default()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// `B` such that all history lies in `(−B, 0]`.
    pub fn depth(&self) -> f64 {
        self.times.first().map_or(0.0, |t| -t)
    }
}

fn check_lag(t: f64) -> Result<(), ModelError> {
    if t >= 0.0 && !t.is_nan() {
        Ok(())
    } else {
        Err(ModelError::Domain(format!("lag must be >= 0, got {t}")))
    }
}

/// Log-spaced check grid on `[1e−6, 1e6]`.
fn check_grid() -> impl Iterator<Item = f64> {
    let (lo, hi) = (-6.0f64, 6.0f64);
    (0..CHECK_GRID_POINTS).map(move |i| {
        let frac = i as f64 / (CHECK_GRID_POINTS - 1) as f64;
        10f64.powf(lo + (hi - lo) * frac)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kernel_values() {
        let k = Kernel::exponential(1.0, 1.0).unwrap();
        assert_eq!(k.eval(0.0).unwrap(), 1.0);
        assert_eq!(Kernel::zero().eval(3.7).unwrap(), 0.0);
        let k = Kernel::exponential(1.0, 2.0).unwrap();
        let t = 2f64.ln() / 2.0;
        assert_relative_eq!(k.eval(t).unwrap(), 0.5, max_relative = 1e-15);
        assert!(matches!(k.eval(-1e-9), Err(ModelError::Domain(_))));
    }

    #[test]
    fn tail_integral_values() {
        let k = Kernel::exponential(1.0, 1.0).unwrap();
        assert_eq!(k.tail_integral(0.0).unwrap(), 1.0);
        assert_eq!(Kernel::zero().tail_integral(2.0).unwrap(), 0.0);
        let k = Kernel::exponential(1.0, 2.0).unwrap();
        // frozen from composite quadrature of e^{-2s} on [1, 40]
        assert_relative_eq!(k.tail_integral(1.0).unwrap(), 0.067_667_641_618_306_35, max_relative = 1e-12);
    }

    #[test]
    fn validation_margins() {
        let m = validate_model(Kernel::exponential(1.0, 2.0).unwrap(), RateFunction::linear(1.0).unwrap()).unwrap();
        assert_relative_eq!(m.stability_margin(), 0.5);
        let m = validate_model(Kernel::exponential(1.0, 1.0).unwrap(), RateFunction::saturating(0.5, 0.4).unwrap())
            .unwrap();
        assert_relative_eq!(m.stability_margin(), 0.6, max_relative = 1e-15);
        let err =
            validate_model(Kernel::exponential(2.0, 1.0).unwrap(), RateFunction::linear(1.0).unwrap()).unwrap_err();
        assert!(matches!(err, ModelError::StabilityViolation { .. }));
        assert!(err.to_string().contains("stability"));
    }

    #[test]
    fn rejects_bad_families() {
        assert!(matches!(Kernel::power_law(1.0, 3.0, 0.0), Err(ModelError::UnsupportedKernel(_))));
        assert!(Kernel::power_law(1.0, 2.0, 1.0).is_err());
        assert!(Kernel::exponential(1.0, 0.0).is_err());
        assert!(Kernel::exponential(-1.0, 1.0).is_err());
        assert!(RateFunction::linear(0.0).is_err());
        assert!(matches!(RateFunction::saturating(1.0, -0.5), Err(ModelError::AssumptionViolation(_))));
        assert!(RateFunction::clipped_linear(1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn rate_values() {
        assert_eq!(RateFunction::linear(1.0).unwrap().value(3.0), 4.0);
        assert_relative_eq!(RateFunction::saturating(0.5, 0.4).unwrap().value(1.0), 0.7);
        let r = RateFunction::clipped_linear(1.0, 0.5, 2.0).unwrap();
        assert_eq!(r.value(1.0), 1.5);
        assert_eq!(r.value(10.0), 2.0);
    }

    #[test]
    fn integral_along_decay_matches_midpoint_rule() {
        let rates = [
            RateFunction::linear_with_slope(0.7, 0.9).unwrap(),
            RateFunction::saturating(0.5, 0.4).unwrap(),
            RateFunction::clipped_linear(1.0, 0.5, 0.8).unwrap(),
            RateFunction::clipped_linear(1.0, 0.5, 5.0).unwrap(),
        ];
        let (s0, b, dt) = (2.5, 1.3, 1.7);
        for r in rates {
            let n = 200_000;
            let h = dt / n as f64;
            let numeric: f64 = (0..n).map(|i| r.value(s0 * (-b * (i as f64 + 0.5) * h).exp()) * h).sum();
            assert_relative_eq!(r.integral_along_decay(s0, b, dt), numeric, max_relative = 1e-8);
        }
    }

    #[test]
    fn history_validation() {
        assert!(History::new(vec![-2.0, -1.0, 0.0]).is_ok());
        assert!(History::new(vec![-1.0, -1.0]).is_err());
        assert!(History::new(vec![0.5]).is_err());
        assert_eq!(History::new(vec![-3.0, -1.0]).unwrap().depth(), 3.0);
    }

    #[test]
    fn parses_toml_with_line_context() {
        let m = HawkesModel::from_toml_str(
            "[kernel]\nfamily = \"exponential\"\na = 1.0\nb = 2.0\n[rate]\nfamily = \"linear\"\nnu = 1.0\n",
        )
        .unwrap();
        assert_eq!(m.rate().lipschitz(), 1.0);
        let err = HawkesModel::from_toml_str("[kernel]\nfamily = \"exponential\"\na = \n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }
}
