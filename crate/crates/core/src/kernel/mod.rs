//! Volterra kernels of convolution type, k(t, s) = κ(t − s).
//!
//! Every family is stored through its radial profile κ, so the identity
//! ∂k/∂t = −∂k/∂s holds by construction. Integrals across the diagonal
//! are evaluated in closed form for the power families; tabulated kernels
//! are integrated after the substitution ρ = r^α, which turns the r^{α−1}
//! singularity into a smooth integrand.

mod audit;
mod tabulated;

pub use audit::{verify_assumption_a1, A1Report, Witness};
pub use tabulated::TabulatedKernel;

use crate::error::{Error, Result};

/// Relative tolerance used for derivative identities.
pub const DERIVATIVE_RTOL: f64 = 1e-4;

/// Tolerance for closed-form algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-12;

/// The radial profile κ of a convolution kernel k(t, s) = κ(t − s).
#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    /// κ(r) = r^{α−1}, singular at the diagonal for α < 1.
    PowerSingular { alpha: f64 },
    /// κ(r) = value.
    Constant { value: f64 },
    /// κ(r) = (r + ε)^{α−1}; the ε-regularized power kernel.
    ShiftedPower { alpha: f64, eps: f64 },
    /// Sampled κ with a declared r^{α−1} singularity.
    CustomConvolution(TabulatedKernel),
}

/// A kernel family together with the constants it declares for admissibility.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Declared exponent ᾱ in ∫ₛᵗ|k(t,u)|du ≤ c(t−s)^ᾱ.
    pub alpha_bar: f64,
    /// Declared integrability exponent p₀ in ∫₀ᵗ|k(t,u)|^{p₀}du ≤ c.
    pub p0: f64,
    /// Declared constant c.
    pub c: f64,
}

fn default_p0(alpha: f64) -> f64 {
    // Largest admissible range is (1, 1/(1−α)); prefer 2 when it fits.
    if alpha >= 1.0 || (1.0 - alpha) * 2.0 < 1.0 {
        2.0
    } else {
        0.5 * (1.0 + 1.0 / (1.0 - alpha))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!(
            "kernel exponent must lie in (0, 1], got {alpha}"
        )));
    }
    Ok(())
}

/// (base + width)^e − base^e without cancellation for base > 0.
pub(crate) fn pow_increment(base: f64, width: f64, exponent: f64) -> f64 {
    if width == 0.0 {
        return 0.0;
    }
    if base == 0.0 {
        return width.powf(exponent);
    }
    base.powf(exponent) * (exponent * (width / base).ln_1p()).exp_m1()
}

impl KernelSpec {
    pub fn power_singular(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(KernelSpec {
            family: KernelFamily::PowerSingular { alpha },
            alpha_bar: alpha,
            p0: default_p0(alpha),
            c: 1.0,
        })
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::domain("constant kernel value must be finite"));
        }
        Ok(KernelSpec {
            family: KernelFamily::Constant { value },
            alpha_bar: 1.0,
            p0: 2.0,
            c: value.abs().max(1.0),
        })
    }

    pub fn shifted_power(alpha: f64, eps: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::domain(format!("shift must be positive, got {eps}")));
        }
        Ok(KernelSpec {
            family: KernelFamily::ShiftedPower { alpha, eps },
            alpha_bar: 1.0,
            p0: 2.0,
            c: 1.0,
        })
    }

    pub fn custom(table: TabulatedKernel) -> Self {
        let alpha = table.alpha();
        KernelSpec {
            family: KernelFamily::CustomConvolution(table),
            alpha_bar: alpha,
            p0: default_p0(alpha),
            c: 1.0,
        }
    }

    /// Replace the declared admissibility constants.
    pub fn with_declared(mut self, alpha_bar: f64, p0: f64, c: f64) -> Result<Self> {
        if !(p0 > 1.0) {
            return Err(Error::domain(format!("p0 must exceed 1, got {p0}")));
        }
        if !(c > 0.0) {
            return Err(Error::domain(format!("c must be positive, got {c}")));
        }
        if !alpha_bar.is_finite() {
            return Err(Error::domain("alpha_bar must be finite"));
        }
        self.alpha_bar = alpha_bar;
        self.p0 = p0;
        self.c = c;
        Ok(self)
    }

    /// The exponent α of the r^{α−1} behaviour, if the family has one.
    pub fn power_exponent(&self) -> Option<f64> {
        match &self.family {
            KernelFamily::PowerSingular { alpha } | KernelFamily::ShiftedPower { alpha, .. } => {
                Some(*alpha)
            }
            KernelFamily::CustomConvolution(t) => Some(t.alpha()),
            KernelFamily::Constant { .. } => None,
        }
    }

    /// Whether the kernel carries the singular exponent α.
    pub fn is_power_family(&self) -> bool {
        self.power_exponent().is_some()
    }

    /// PowerSingular kernels are admissible only for α ∈ (1/2, 1).
    pub fn is_a1_admissible(&self) -> bool {
        match &self.family {
            KernelFamily::PowerSingular { alpha } => *alpha > 0.5 && *alpha < 1.0,
            KernelFamily::CustomConvolution(t) => t.alpha() > 0.5,
            KernelFamily::Constant { .. } | KernelFamily::ShiftedPower { .. } => true,
        }
    }

    /// True when κ(0) is finite, i.e. k extends continuously to s = t.
    pub fn is_smooth_on_diagonal(&self) -> bool {
        match &self.family {
            KernelFamily::PowerSingular { .. } => false,
            KernelFamily::Constant { .. } | KernelFamily::ShiftedPower { .. } => true,
            KernelFamily::CustomConvolution(t) => t.shift() > 0.0 || t.alpha() >= 1.0,
        }
    }

    /// κ(r) for r ≥ 0 (r = 0 only when smooth on the diagonal).
    pub fn profile(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(match &self.family {
            KernelFamily::PowerSingular { alpha } => r.powf(alpha - 1.0),
            KernelFamily::Constant { value } => *value,
            KernelFamily::ShiftedPower { alpha, eps } => (r + eps).powf(alpha - 1.0),
            KernelFamily::CustomConvolution(t) => t.profile(r)?,
        })
    }

    /// κ′(r), which equals ∂k/∂t(t, t − r).
    pub fn profile_dt(&self, r: f64) -> Result<f64> {
        self.check_radius(r)?;
        Ok(match &self.family {
            KernelFamily::PowerSingular { alpha } => (alpha - 1.0) * r.powf(alpha - 2.0),
            KernelFamily::Constant { .. } => 0.0,
            KernelFamily::ShiftedPower { alpha, eps } => (alpha - 1.0) * (r + eps).powf(alpha - 2.0),
            KernelFamily::CustomConvolution(t) => t.profile_dt(r)?,
        })
    }

    /// ∫_{lo}^{hi} κ(r) dr for 0 ≤ lo ≤ hi; exact at lo = 0 for power families.
    pub fn profile_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        Self::check_interval(lo, hi)?;
        if lo == hi {
            return Ok(0.0);
        }
        let width = hi - lo;
        Ok(match &self.family {
            KernelFamily::PowerSingular { alpha } => pow_increment(lo, width, *alpha) / alpha,
            KernelFamily::Constant { value } => value * width,
            KernelFamily::ShiftedPower { alpha, eps } => {
                pow_increment(lo + eps, width, *alpha) / alpha
            }
            KernelFamily::CustomConvolution(t) => t.integral(lo, hi, false)?,
        })
    }

    /// ∫_{lo}^{hi} |κ(r)| dr.
    pub fn profile_abs_integral(&self, lo: f64, hi: f64) -> Result<f64> {
        match &self.family {
            KernelFamily::Constant { value } => {
                Self::check_interval(lo, hi)?;
                Ok(value.abs() * (hi - lo))
            }
            KernelFamily::CustomConvolution(t) => {
                Self::check_interval(lo, hi)?;
                t.integral(lo, hi, true)
            }
            // Power profiles are positive.
            _ => self.profile_integral(lo, hi),
        }
    }

    /// κ(hi) − κ(lo) = ∫_{lo}^{hi} κ′(r) dr, cancellation-free for power families.
    pub(crate) fn profile_increment(&self, lo: f64, hi: f64) -> Result<f64> {
        Self::check_interval(lo, hi)?;
        if lo == hi {
            return Ok(0.0);
        }
        self.check_radius(lo)?;
        let width = hi - lo;
        Ok(match &self.family {
            KernelFamily::PowerSingular { alpha } => pow_increment(lo, width, alpha - 1.0),
            KernelFamily::Constant { .. } => 0.0,
            KernelFamily::ShiftedPower { alpha, eps } => {
                pow_increment(lo + eps, width, alpha - 1.0)
            }
            KernelFamily::CustomConvolution(t) => t.profile(hi)? - t.profile(lo)?,
        })
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::domain("kernel evaluated at or past the diagonal"));
        }
        if r == 0.0 && !self.is_smooth_on_diagonal() {
            return Err(Error::domain("kernel evaluated at or past the diagonal"));
        }
        Ok(())
    }

    fn check_interval(lo: f64, hi: f64) -> Result<()> {
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::domain(format!(
                "invalid integration interval [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    fn check_pair(t: f64, s: f64) -> Result<()> {
        if !(s >= 0.0 && t >= s && t.is_finite()) {
            return Err(Error::domain("kernel evaluated at or past the diagonal"));
        }
        Ok(())
    }

    /// k(t, s).
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        Self::check_pair(t, s)?;
        self.profile(t - s)
    }

    /// ∂k/∂t(t, s).
    pub fn dt(&self, t: f64, s: f64) -> Result<f64> {
        Self::check_pair(t, s)?;
        self.profile_dt(t - s)
    }

    /// ∫_{u0}^{u1} k(t, u) du for 0 ≤ u0 ≤ u1 ≤ t; u1 = t is handled exactly.
    pub fn segment_integral(&self, t: f64, u0: f64, u1: f64) -> Result<f64> {
        if !(u0 >= 0.0 && u0 <= u1 && u1 <= t) {
            return Err(Error::domain(format!(
                "segment [{u0}, {u1}] must satisfy 0 <= u0 <= u1 <= t = {t}"
            )));
        }
        self.profile_integral(t - u1, t - u0)
    }

    /// ∫_{u0}^{u1} ∂k/∂t(t, u) du = k(t, u0) − k(t, u1) for u1 < t.
    pub fn dt_segment_integral(&self, t: f64, u0: f64, u1: f64) -> Result<f64> {
        if !(u0 >= 0.0 && u0 <= u1) {
            return Err(Error::domain(format!(
                "segment [{u0}, {u1}] must satisfy 0 <= u0 <= u1"
            )));
        }
        if u1 >= t && !(self.is_smooth_on_diagonal() && u1 == t) {
            return Err(Error::domain(
                "singular endpoint: weight undefined at the diagonal",
            ));
        }
        // r = t − u maps [u0, u1] onto [t−u1, t−u0] and ∂ₜk(t,u) = κ′(r).
        self.profile_increment(t - u1, t - u0)
    }

    /// The kernel k(t + ε, s).
    pub fn shifted(&self, eps: f64) -> Result<KernelSpec> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::domain(format!("shift must be positive, got {eps}")));
        }
        let family = match &self.family {
            KernelFamily::PowerSingular { alpha } => KernelFamily::ShiftedPower { alpha: *alpha, eps },
            KernelFamily::Constant { value } => KernelFamily::Constant { value: *value },
            KernelFamily::ShiftedPower { alpha, eps: e1 } => KernelFamily::ShiftedPower {
                alpha: *alpha,
                eps: e1 + eps,
            },
            KernelFamily::CustomConvolution(t) => KernelFamily::CustomConvolution(t.shifted(eps)),
        };
        Ok(KernelSpec {
            family,
            alpha_bar: self.alpha_bar,
            p0: self.p0,
            c: self.c,
        })
    }
}
