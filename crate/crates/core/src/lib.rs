//! Simulation and verification of stochastic Volterra integral equations
//!
//! ```text
//! X_t = x0 + ∫₀ᵗ k(t,s) b(s,X_s) ds + ∫₀ᵗ g(t,s) σ(s,X_s) dB_s
//! ```
//!
//! with weakly singular kernels such as k(t,s) = (t−s)^{α−1}. The crate
//! provides kernels with exact cell integrals, a closed menu of drift and
//! diffusion coefficients, solvers for the direct, regularized and Itô
//! differential forms on shared Brownian paths, and the Monte Carlo
//! estimators used to check moment bounds and convergence rates.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{} vs {} (tol {})", a, b, tol);
    }};
}

pub mod coefficients;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod rng;
pub mod solver;
pub mod stats;

pub use coefficients::{Coefficient, CoefficientSet, OuterKernel, ProblemSpec};
pub use error::{Error, Result};
pub use kernel::{KernelFamily, KernelSpec};
pub use solver::{BrownianPath, PathSeed, Scheme, SimulationGrid, Trajectory};
