use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coefficients::{CoefficientSet, ProblemSpec};
use crate::error::{Error, Result};
use crate::kernel::{KernelSpec, TabulatedKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CltRate,
    RegularizationRate,
    ItoEquivalence,
    PropertySuite,
    KernelAudit,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::CltRate => "clt_rate",
            ExperimentKind::RegularizationRate => "regularization_rate",
            ExperimentKind::ItoEquivalence => "ito_equivalence",
            ExperimentKind::PropertySuite => "property_suite",
            ExperimentKind::KernelAudit => "kernel_audit",
        }
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    PowerSingular { alpha: f64 },
    Constant { value: f64 },
    ShiftedPower { alpha: f64, eps: f64 },
    /// `csv` holds `radius,value[,derivative]` rows; relative paths are
    /// resolved against the directory of the config file.
    Custom { csv: PathBuf, alpha: f64 },
}

/// Overrides for the admissibility constants a kernel declares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredConstants {
    pub alpha_bar: f64,
    pub p0: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kernel: KernelConfig,
    #[serde(default)]
    pub declared: Option<DeclaredConstants>,
    pub coefficients: CoefficientSet,
    pub x0: f64,
    pub horizon: f64,
    #[serde(default)]
    pub allow_assumption_violation: bool,
}

/// Values start·ratio^k, k = 0..count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricGrid {
    pub start: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_ratio() -> f64 {
    0.5
}

fn default_count() -> usize {
    6
}

impl GeometricGrid {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.start * self.ratio.powi(k as i32))
            .collect()
    }
}

/// Pass/fail thresholds. These are design constants, not derived values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// CLT: require slope ≥ theory − 2·stderr − margin.
    pub clt_slope_margin: f64,
    /// CLT: distances within this multiple of the noise floor count as noise.
    pub clt_noise_factor: f64,
    /// CLT: independent m-samples averaged into the noise floor.
    pub clt_noise_replicates: usize,
    /// Regularization: |slope − α| bound; defaults to 0.02 without noise and
    /// 0.15 with noise.
    pub reg_slope_tol: Option<f64>,
    /// Itô equivalence: largest mean sup-discrepancy at the finest grid.
    pub ito_max_discrepancy: f64,
    /// Properties: relative drift of Hölder ratios between the two finest grids.
    pub holder_drift: f64,
    /// Properties: relative drift of moments against the finest grid.
    pub moment_drift: f64,
    /// Properties: |ratio − 1| for the pure Brownian control at p = 2.
    pub brownian_holder_tol: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            clt_slope_margin: 0.05,
            clt_noise_factor: 3.0,
            clt_noise_replicates: 16,
            reg_slope_tol: None,
            ito_max_discrepancy: 5e-2,
            holder_drift: 0.2,
            moment_drift: 0.1,
            brownian_holder_tol: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditParams {
    pub grid_density: usize,
    pub regularity_samples: usize,
}

impl Default for AuditParams {
    fn default() -> Self {
        AuditParams { grid_density: 64, regularity_samples: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub problem: ProblemConfig,
    /// Step counts n. CLT uses the first; the regularization run the last.
    #[serde(default)]
    pub grids: Vec<usize>,
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    /// The a-grid (CLT) or ε-grid (regularization).
    #[serde(default)]
    pub geometric_grid: Option<GeometricGrid>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub audit: AuditParams,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

fn default_ensemble() -> usize {
    1000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Smallest ensemble accepted for experiments with noise.
pub const MIN_STOCHASTIC_ENSEMBLE: usize = 100;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form. The
    /// output directory is left out: it says where results go, not what they are.
    pub fn config_hash(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        let canonical = serde_json::to_string(&value)?;
        let digest = Sha256::digest(canonical.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        let spec = match &self.problem.kernel {
            KernelConfig::PowerSingular { alpha } => KernelSpec::power_singular(*alpha)?,
            KernelConfig::Constant { value } => KernelSpec::constant(*value)?,
            KernelConfig::ShiftedPower { alpha, eps } => KernelSpec::shifted_power(*alpha, *eps)?,
            KernelConfig::Custom { csv, alpha } => {
                let path = match (&self.base_dir, csv.is_relative()) {
                    (Some(dir), true) => dir.join(csv),
                    _ => csv.clone(),
                };
                KernelSpec::custom(TabulatedKernel::from_csv_path(path, *alpha)?)
            }
        };
        match self.problem.declared {
            Some(d) => spec.with_declared(d.alpha_bar, d.p0, d.c),
            None => Ok(spec),
        }
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let p = &self.problem;
        let kernel = self.kernel()?;
        if p.allow_assumption_violation {
            ProblemSpec::new_allowing_violation(kernel, p.coefficients, p.x0, p.horizon)
        } else {
            ProblemSpec::new(kernel, p.coefficients, p.x0, p.horizon)
        }
    }

    /// True when σ ≡ 0, so every path is the same deterministic solution.
    pub fn is_deterministic(&self) -> bool {
        self.problem.coefficients.sigma.is_zero()
    }

    /// Structural checks that do not need the problem to be built.
    pub fn validate(&self) -> Result<()> {
        use ExperimentKind::*;
        let kind = self.experiment;
        if kind != KernelAudit {
            if self.grids.is_empty() {
                return Err(Error::config("grids must list at least one step count"));
            }
            if let Some(n) = self.grids.iter().find(|&&n| n < 2) {
                return Err(Error::config(format!("grid step counts must be >= 2, got {n}")));
            }
            // the Hölder scan needs a full ensemble even without noise
            let needs_ensemble = !self.is_deterministic() || kind == PropertySuite;
            if needs_ensemble && self.ensemble_size < MIN_STOCHASTIC_ENSEMBLE {
                return Err(Error::config(format!(
                    "ensemble_size must be >= {MIN_STOCHASTIC_ENSEMBLE} for stochastic experiments, got {}",
                    self.ensemble_size
                )));
            }
            if self.ensemble_size < 1 {
                return Err(Error::config("ensemble_size must be positive"));
            }
        }
        if matches!(kind, ItoEquivalence | PropertySuite) {
            let mut sorted = self.grids.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted != self.grids {
                return Err(Error::config("grids must be strictly increasing"));
            }
            let finest = self.grids[self.grids.len() - 1];
            if let Some(n) = self.grids.iter().find(|&&n| !(finest % n == 0 && (finest / n).is_power_of_two())) {
                return Err(Error::config(format!(
                    "grid {n} is not a power-of-two coarsening of {finest}"
                )));
            }
            if kind == PropertySuite && self.grids.len() < 2 {
                return Err(Error::config("property suite needs at least two grids"));
            }
        }
        if matches!(kind, CltRate | RegularizationRate) {
            let label = if kind == CltRate { "a-grid" } else { "ε-grid" };
            let g = self
                .geometric_grid
                .ok_or_else(|| Error::config(format!("{label} is missing")))?;
            if g.count == 0 {
                return Err(Error::config(format!("{label} is empty")));
            }
            if !(g.start > 0.0 && g.start.is_finite()) {
                return Err(Error::config(format!("{label} start must be positive")));
            }
            if !(g.ratio > 0.0 && g.ratio < 1.0) {
                return Err(Error::config(format!(
                    "{label} must be strictly decreasing: ratio in (0, 1), got {}",
                    g.ratio
                )));
            }
            if g.count < 3 {
                return Err(Error::config("rate fit requires ≥ 3 points"));
            }
            if kind == CltRate && g.start > self.problem.horizon {
                return Err(Error::config("a-grid must lie within the horizon"));
            }
        }
        if kind == CltRate && self.thresholds.clt_noise_replicates < 2 {
            return Err(Error::config("clt_noise_replicates must be >= 2"));
        }
        if kind == KernelAudit && self.audit.grid_density < 16 {
            return Err(Error::config("audit grid_density must be >= 16"));
        }
        if kind == KernelAudit && self.audit.regularity_samples < 1000 {
            return Err(Error::config("audit regularity_samples must be >= 1000"));
        }
        Ok(())
    }

    /// Full validation including construction of the kernel and problem.
    pub fn check(&self) -> Result<ProblemSpec> {
        self.validate()?;
        self.problem_spec()
    }
}
