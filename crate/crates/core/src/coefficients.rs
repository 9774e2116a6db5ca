//! Drift b(t,x), diffusion σ(t,x) and outer kernel g(t,s), drawn from a
//! closed menu of parameterized families with declared regularity constants.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::stats::fit_rate;

/// A scalar coefficient f(t, x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Coefficient {
    /// f = v
    Constant { v: f64 },
    /// f = a0 + a1·x
    Linear { a0: f64, a1: f64 },
    /// f = v·t^β + a1·x
    #[serde(alias = "time_holder2")]
    TimeHolder { v: f64, beta: f64, a1: f64 },
    /// f = a0 + a1·sin(x)
    AffineSin { a0: f64, a1: f64 },
}

impl Coefficient {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match *self {
            Coefficient::Constant { v } => v,
            Coefficient::Linear { a0, a1 } => a0 + a1 * x,
            Coefficient::TimeHolder { v, beta, a1 } => v * t.powf(beta) + a1 * x,
            Coefficient::AffineSin { a0, a1 } => a0 + a1 * x.sin(),
        }
    }

    /// Exact Lipschitz constant in x.
    pub fn lipschitz_x(&self) -> f64 {
        match *self {
            Coefficient::Constant { .. } => 0.0,
            Coefficient::Linear { a1, .. }
            | Coefficient::TimeHolder { a1, .. }
            | Coefficient::AffineSin { a1, .. } => a1.abs(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Coefficient::Constant { v } => v == 0.0,
            Coefficient::Linear { a0, a1 } | Coefficient::AffineSin { a0, a1 } => {
                a0 == 0.0 && a1 == 0.0
            }
            Coefficient::TimeHolder { v, a1, .. } => v == 0.0 && a1 == 0.0,
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let finite = match *self {
            Coefficient::Constant { v } => v.is_finite(),
            Coefficient::Linear { a0, a1 } | Coefficient::AffineSin { a0, a1 } => {
                a0.is_finite() && a1.is_finite()
            }
            Coefficient::TimeHolder { v, beta, a1 } => {
                if !(beta > 0.0) {
                    return Err(Error::domain(format!(
                        "{name}: time exponent must be positive, got {beta}"
                    )));
                }
                v.is_finite() && beta.is_finite() && a1.is_finite()
            }
        };
        if !finite {
            return Err(Error::domain(format!("{name}: parameters must be finite")));
        }
        Ok(())
    }
}

/// The outer kernel g(t, s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OuterKernel {
    One,
    /// g = c0 + c1·t + c2·s
    Affine { c0: f64, c1: f64, c2: f64 },
    /// g = e^{λ(t−s)}
    Exp { lambda: f64 },
}

impl OuterKernel {
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        match *self {
            OuterKernel::One => 1.0,
            OuterKernel::Affine { c0, c1, c2 } => c0 + c1 * t + c2 * s,
            OuterKernel::Exp { lambda } => (lambda * (t - s)).exp(),
        }
    }

    /// ∂g/∂t(t, s).
    pub fn dt(&self, t: f64, s: f64) -> f64 {
        match *self {
            OuterKernel::One => 0.0,
            OuterKernel::Affine { c1, .. } => c1,
            OuterKernel::Exp { lambda } => lambda * (lambda * (t - s)).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            OuterKernel::One => true,
            OuterKernel::Affine { c0, c1, c2 } => c0.is_finite() && c1.is_finite() && c2.is_finite(),
            OuterKernel::Exp { lambda } => lambda.is_finite(),
        };
        if !ok {
            return Err(Error::domain("g: parameters must be finite"));
        }
        Ok(())
    }
}

/// b, σ and g with their declared constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSet {
    pub b: Coefficient,
    pub sigma: Coefficient,
    pub g: OuterKernel,
    /// Declared Lipschitz and linear-growth constant L.
    pub lipschitz: f64,
    /// Declared time-Hölder exponent of b.
    pub beta1: f64,
    /// Declared time-Hölder exponent of σ at t = 0.
    pub beta2: f64,
}

impl CoefficientSet {
    pub fn validate(&self) -> Result<()> {
        self.b.validate("b")?;
        self.sigma.validate("sigma")?;
        self.g.validate()?;
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::domain(format!(
                "Lipschitz constant must be positive, got {}",
                self.lipschitz
            )));
        }
        if !self.beta1.is_finite() {
            return Err(Error::domain("beta1 must be finite"));
        }
        if !(self.beta2 > 0.0 && self.beta2.is_finite()) {
            return Err(Error::domain(format!("beta2 must be positive, got {}", self.beta2)));
        }
        Ok(())
    }

    pub fn drift_eval(&self, t: f64, x: f64) -> f64 {
        self.b.eval(t, x)
    }

    pub fn diffusion_eval(&self, t: f64, x: f64) -> f64 {
        self.sigma.eval(t, x)
    }

    pub fn g_eval(&self, t: f64, s: f64) -> f64 {
        self.g.eval(t, s)
    }

    pub fn g_dt_eval(&self, t: f64, s: f64) -> f64 {
        self.g.dt(t, s)
    }
}

/// The data of one equation: kernel, coefficients, x0 and horizon T.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kernel: KernelSpec,
    pub coeffs: CoefficientSet,
    pub x0: f64,
    pub horizon: f64,
    /// Skip the β₁ > 1 − α and kernel admissibility checks.
    pub allow_assumption_violation: bool,
}

impl ProblemSpec {
    pub fn new(kernel: KernelSpec, coeffs: CoefficientSet, x0: f64, horizon: f64) -> Result<Self> {
        Self::build(kernel, coeffs, x0, horizon, false)
    }

    /// Construct without enforcing β₁ > 1 − α, for violation studies.
    pub fn new_allowing_violation(
        kernel: KernelSpec,
        coeffs: CoefficientSet,
        x0: f64,
        horizon: f64,
    ) -> Result<Self> {
        Self::build(kernel, coeffs, x0, horizon, true)
    }

    fn build(
        kernel: KernelSpec,
        coeffs: CoefficientSet,
        x0: f64,
        horizon: f64,
        allow: bool,
    ) -> Result<Self> {
        coeffs.validate()?;
        if !x0.is_finite() {
            return Err(Error::domain("x0 must be finite"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        let problem = ProblemSpec {
            kernel,
            coeffs,
            x0,
            horizon,
            allow_assumption_violation: allow,
        };
        if !allow {
            problem.check_beta1()?;
        }
        Ok(problem)
    }

    pub(crate) fn check_beta1(&self) -> Result<()> {
        if let Some(alpha) = self.kernel.power_exponent() {
            if !(self.coeffs.beta1 > 1.0 - alpha) {
                return Err(Error::Precondition(format!(
                    "beta1 = {} must exceed 1 - alpha = {}",
                    self.coeffs.beta1,
                    1.0 - alpha
                )));
            }
        }
        Ok(())
    }

    /// The same data on a shorter or longer horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        Self::build(
            self.kernel.clone(),
            self.coeffs,
            self.x0,
            horizon,
            self.allow_assumption_violation,
        )
    }

    /// The reference problem: α = 0.75, b = 1 − x/2, σ = 1 + sin(x)/2,
    /// g ≡ 1, x0 = 0, T = 1.
    pub fn benchmark() -> Self {
        let coeffs = CoefficientSet {
            b: Coefficient::Linear { a0: 1.0, a1: -0.5 },
            sigma: Coefficient::AffineSin { a0: 1.0, a1: 0.5 },
            g: OuterKernel::One,
            lipschitz: 2.5,
            beta1: 1.0,
            beta2: 1.0,
        };
        let kernel = KernelSpec::power_singular(0.75).expect("valid exponent");
        ProblemSpec::new(kernel, coeffs, 0.0, 1.0).expect("valid benchmark")
    }
}

/// Relative discrepancy allowed between declared and fitted constants.
pub const DISCREPANCY_TOL: f64 = 0.1;

/// Dyadic separations |t − s| = 2^{−k}·T, k = 1..=10.
const SEPARATION_LEVELS: i32 = 10;

/// Half-width of the sampled x range.
const X_RANGE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    /// max over b and σ of |f(t,x) − f(t,y)|/|x − y|.
    pub fitted_lipschitz: f64,
    /// max over b and σ of |f(t,x)|/(1 + |x|).
    pub fitted_growth: f64,
    /// Slope of the time modulus of b; `None` when b does not depend on t.
    pub fitted_beta1: Option<f64>,
    /// Slope of |σ(t,x) − σ(0,x)| against t; `None` when σ does not depend on t.
    pub fitted_beta2: Option<f64>,
    pub declared_lipschitz: f64,
    pub declared_beta1: f64,
    pub declared_beta2: f64,
    pub lipschitz_flag: bool,
    pub growth_flag: bool,
    pub beta1_flag: bool,
    pub beta2_flag: bool,
}

impl RegularityReport {
    pub fn any_flag(&self) -> bool {
        self.lipschitz_flag || self.growth_flag || self.beta1_flag || self.beta2_flag
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * u
}

/// Max over sampled x of |f(s + δ, x) − f(s, x)| for s among `starts`.
fn time_modulus(f: &Coefficient, starts: &[f64], delta: f64, xs: &[f64]) -> f64 {
    let mut best = 0.0f64;
    for &s in starts {
        for &x in xs {
            best = best.max((f.eval(s + delta, x) - f.eval(s, x)).abs());
        }
    }
    best
}

fn fitted_exponent(points: &[(f64, f64)]) -> Result<Option<f64>> {
    let kept: Vec<_> = points.iter().filter(|(_, m)| *m > 0.0).collect();
    if kept.len() < 3 {
        return Ok(None);
    }
    let xs: Vec<f64> = kept.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = kept.iter().map(|p| p.1).collect();
    Ok(Some(fit_rate(&xs, &ys)?.slope))
}

fn exponent_flag(fitted: Option<f64>, declared: f64) -> bool {
    fitted.is_some_and(|f| (f - declared).abs() > DISCREPANCY_TOL * declared.abs())
}

/// Sample the coefficients and fit their regularity constants.
pub fn estimate_regularity(
    coeffs: &CoefficientSet,
    samples: usize,
    horizon: f64,
) -> Result<RegularityReport> {
    if samples < 1000 {
        return Err(Error::domain(format!(
            "regularity estimate needs at least 1000 samples, got {samples}"
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::domain("horizon must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f_c0ef);
    let mut lipschitz = 0.0f64;
    let mut growth = 0.0f64;
    for _ in 0..samples {
        let t = uniform(&mut rng, 0.0, horizon);
        let x = uniform(&mut rng, -X_RANGE, X_RANGE);
        let y = uniform(&mut rng, -X_RANGE, X_RANGE);
        for f in [&coeffs.b, &coeffs.sigma] {
            let (fx, fy) = (f.eval(t, x), f.eval(t, y));
            if x != y {
                lipschitz = lipschitz.max((fx - fy).abs() / (x - y).abs());
            }
            growth = growth.max(fx.abs() / (1.0 + x.abs()));
        }
    }

    let per_level = (samples / SEPARATION_LEVELS as usize).max(1);
    let xs: Vec<f64> = (0..per_level.min(64))
        .map(|_| uniform(&mut rng, -X_RANGE, X_RANGE))
        .collect();
    let mut b_mod = Vec::new();
    let mut s_mod = Vec::new();
    for k in 1..=SEPARATION_LEVELS {
        let delta = horizon * 2f64.powi(-k);
        let mut starts = vec![0.0];
        starts.extend((0..per_level / xs.len().max(1)).map(|_| uniform(&mut rng, 0.0, horizon - delta)));
        b_mod.push((delta, time_modulus(&coeffs.b, &starts, delta, &xs)));
        s_mod.push((delta, time_modulus(&coeffs.sigma, &[0.0], delta, &xs)));
    }
    let fitted_beta1 = fitted_exponent(&b_mod)?;
    let fitted_beta2 = fitted_exponent(&s_mod)?;

    let declared = coeffs.lipschitz;
    Ok(RegularityReport {
        fitted_lipschitz: lipschitz,
        fitted_growth: growth,
        fitted_beta1,
        fitted_beta2,
        declared_lipschitz: declared,
        declared_beta1: coeffs.beta1,
        declared_beta2: coeffs.beta2,
        lipschitz_flag: lipschitz > (1.0 + DISCREPANCY_TOL) * declared,
        growth_flag: growth > (1.0 + DISCREPANCY_TOL) * declared,
        beta1_flag: exponent_flag(fitted_beta1, coeffs.beta1),
        beta2_flag: exponent_flag(fitted_beta2, coeffs.beta2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(b: Coefficient, sigma: Coefficient, l: f64) -> CoefficientSet {
        CoefficientSet { b, sigma, g: OuterKernel::One, lipschitz: l, beta1: 1.0, beta2: 1.0 }
    }

    #[test]
    fn drift_examples() {
        assert_eq!(Coefficient::Constant { v: 1.0 }.eval(0.4, -3.0), 1.0);
        assert_eq!(Coefficient::Linear { a0: 0.0, a1: 1.0 }.eval(0.3, 2.5), 2.5);
        let th = Coefficient::TimeHolder { v: 2.0, beta: 0.6, a1: 0.0 };
        assert_close!(th.eval(0.25, 7.0), 2.0 * 0.25f64.powf(0.6), 1e-15);
        assert_close!(th.eval(0.25, 7.0), 0.8706, 1e-4);
    }

    #[test]
    fn diffusion_examples() {
        assert_eq!(Coefficient::AffineSin { a0: 1.0, a1: 0.5 }.eval(0.9, 0.0), 1.0);
        let th2 = Coefficient::TimeHolder { v: 1.0, beta: 0.5, a1: 0.0 };
        assert_close!(th2.eval(0.04, 1.0), 0.2, 1e-15);
    }

    #[test]
    fn outer_kernel_examples() {
        assert_eq!((OuterKernel::One.eval(0.3, 0.1), OuterKernel::One.dt(0.3, 0.1)), (1.0, 0.0));
        let e = OuterKernel::Exp { lambda: 1.0 };
        assert_eq!((e.eval(0.4, 0.4), e.dt(0.4, 0.4)), (1.0, 1.0));
        let a = OuterKernel::Affine { c0: 0.0, c1: 2.0, c2: 0.0 };
        assert_eq!((a.eval(0.5, 0.1), a.dt(0.5, 0.1)), (1.0, 2.0));
    }

    #[test]
    fn serde_names_and_alias() {
        let c: Coefficient =
            serde_json::from_str(r#"{"kind":"time_holder2","v":1,"beta":0.5,"a1":0}"#).unwrap();
        assert_eq!(c, Coefficient::TimeHolder { v: 1.0, beta: 0.5, a1: 0.0 });
        let bad = serde_json::from_str::<Coefficient>(r#"{"kind":"constant","v":1,"w":2}"#);
        assert!(bad.is_err());
        let g: OuterKernel = serde_json::from_str(r#"{"kind":"one"}"#).unwrap();
        assert_eq!(g, OuterKernel::One);
        let cs = ProblemSpec::benchmark().coeffs;
        let back: CoefficientSet = serde_json::from_str(&serde_json::to_string(&cs).unwrap()).unwrap();
        assert_eq!(back, cs);
    }

    #[test]
    fn beta1_enforced_for_power_kernels() {
        let k = KernelSpec::power_singular(0.75).unwrap();
        let mut c = ProblemSpec::benchmark().coeffs;
        c.beta1 = 0.2;
        let err = ProblemSpec::new(k.clone(), c, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert!(ProblemSpec::new_allowing_violation(k, c, 0.0, 1.0).is_ok());
        // constant kernels carry no singular exponent
        assert!(ProblemSpec::new(KernelSpec::constant(1.0).unwrap(), c, 0.0, 1.0).is_ok());
    }

    #[test]
    fn invalid_sets_are_rejected() {
        let mut c = ProblemSpec::benchmark().coeffs;
        c.lipschitz = 0.0;
        assert!(c.validate().is_err());
        let mut c = ProblemSpec::benchmark().coeffs;
        c.beta2 = -1.0;
        assert!(c.validate().is_err());
        let k = KernelSpec::constant(1.0).unwrap();
        assert!(ProblemSpec::new(k, ProblemSpec::benchmark().coeffs, 0.0, 0.0).is_err());
    }

    #[test]
    fn regularity_constant_drift() {
        let c = set(Coefficient::Constant { v: 1.0 }, Coefficient::Constant { v: 0.5 }, 1.0);
        let r = estimate_regularity(&c, 1000, 1.0).unwrap();
        assert_eq!(r.fitted_lipschitz, 0.0);
        assert!(r.fitted_growth <= 1.0);
        assert_eq!(r.fitted_beta1, None);
        assert!(!r.any_flag());
    }

    #[test]
    fn regularity_recovers_time_exponents() {
        let mut c = set(
            Coefficient::TimeHolder { v: 2.0, beta: 0.6, a1: 0.5 },
            Coefficient::TimeHolder { v: 1.0, beta: 0.5, a1: 0.0 },
            2.5,
        );
        c.beta1 = 0.6;
        c.beta2 = 0.5;
        let r = estimate_regularity(&c, 5000, 1.0).unwrap();
        let b1 = r.fitted_beta1.unwrap();
        assert!((0.55..=0.65).contains(&b1), "{b1}");
        assert!((r.fitted_beta2.unwrap() - 0.5).abs() <= 0.05);
        assert!(!r.beta1_flag && !r.beta2_flag);
    }

    #[test]
    fn regularity_flags_understated_lipschitz() {
        let c = set(Coefficient::Linear { a0: 0.0, a1: 3.0 }, Coefficient::Constant { v: 1.0 }, 1.0);
        let r = estimate_regularity(&c, 1000, 1.0).unwrap();
        assert!(r.lipschitz_flag);
        assert!((r.fitted_lipschitz - 3.0).abs() < 1e-9);
        assert!(estimate_regularity(&c, 999, 1.0).is_err());
    }

    #[test]
    fn benchmark_constants_hold() {
        let r = estimate_regularity(&ProblemSpec::benchmark().coeffs, 10_000, 1.0).unwrap();
        assert!(!r.any_flag(), "{r:?}");
    }
}
