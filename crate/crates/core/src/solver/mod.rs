//! Left-point Euler schemes for the direct, regularized and Itô forms.
//!
//! All schemes share one uniform grid and one Brownian path. Kernel weights
//! depend only on the lag i − j, so each scheme stores them once in reversed
//! order and the history sum at step i is a single contiguous dot product.
//! The stochastic history Σ g(t_i,t_j)σ_jΔB_j is kept as running sums, which
//! is exact in exact arithmetic for the three outer-kernel families.

mod brownian;
mod export;

pub use brownian::{sample_brownian, BrownianPath, PathSeed};
pub use export::write_trajectories_csv;

use serde::Serialize;

use crate::coefficients::{OuterKernel, ProblemSpec};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;

/// Uniform grid t_i = i·T/n, i = 0..=n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimulationGrid {
    steps: usize,
    horizon: f64,
}

impl SimulationGrid {
    pub fn new(steps: usize, horizon: f64) -> Result<Self> {
        if steps < 2 {
            return Err(Error::domain(format!("grid needs at least 2 steps, got {steps}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        Ok(SimulationGrid { steps, horizon })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.horizon / self.steps as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Scheme {
    Volterra,
    Regularized { eps: f64 },
    ItoSingular,
    ItoRegular,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::Volterra => f.write_str("volterra"),
            Scheme::Regularized { eps } => write!(f, "regularized(eps={eps})"),
            Scheme::ItoSingular => f.write_str("ito_singular"),
            Scheme::ItoRegular => f.write_str("ito_regular"),
        }
    }
}

/// Drift corrections recorded by the Itô schemes at t_i.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepAux {
    /// φ(t_i) for the singular form, K(t_i) for the regular form.
    pub phi: f64,
    /// G(t_i) = Σ_{j<i} ∂ₜg(t_i,t_j)σ(t_j,X_j)ΔB_j.
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: SimulationGrid,
    values: Vec<f64>,
    scheme: Scheme,
    aux: Option<Vec<StepAux>>,
}

impl Trajectory {
    pub fn new(
        grid: SimulationGrid,
        values: Vec<f64>,
        scheme: Scheme,
        aux: Option<Vec<StepAux>>,
    ) -> Self {
        debug_assert_eq!(values.len(), grid.steps() + 1);
        Trajectory { grid, values, scheme, aux }
    }

    pub fn grid(&self) -> SimulationGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn terminal(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn aux(&self) -> Option<&[StepAux]> {
        self.aux.as_deref()
    }

    /// Largest |X_i − Y_i| against another trajectory on the same grid.
    pub fn sup_distance(&self, other: &Trajectory) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::domain("trajectories do not share one grid"));
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}

/// Σ aᵢbᵢ with a fixed 8-lane reduction tree.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Σ wⱼ(bⱼ − c), so that constant b gives exactly zero.
fn centered_dot(w: &[f64], b: &[f64], c: f64) -> f64 {
    debug_assert_eq!(w.len(), b.len());
    let mut acc = [0.0f64; 8];
    let (cw, cb) = (w.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = cw
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * (y - c))
        .sum();
    for (x, y) in cw.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * (y[k] - c);
        }
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// Running form of Σ_{j<i} g(t_i,t_j)vⱼ and Σ_{j<i} ∂ₜg(t_i,t_j)vⱼ.
#[derive(Debug, Clone)]
struct NoiseHistory {
    outer: OuterKernel,
    growth: f64,
    s0: f64,
    s1: f64,
}

impl NoiseHistory {
    fn new(outer: OuterKernel, dt: f64) -> Self {
        let growth = match outer {
            OuterKernel::Exp { lambda } => (lambda * dt).exp(),
            _ => 1.0,
        };
        NoiseHistory { outer, growth, s0: 0.0, s1: 0.0 }
    }

    /// Add term j with value v at time t_j, advancing to t_{j+1}.
    fn push(&mut self, t_j: f64, v: f64) {
        match self.outer {
            OuterKernel::One => self.s0 += v,
            OuterKernel::Affine { .. } => {
                self.s0 += v;
                self.s1 += t_j * v;
            }
            OuterKernel::Exp { .. } => self.s0 = self.growth * (self.s0 + v),
        }
    }

    fn value(&self, t: f64) -> f64 {
        match self.outer {
            OuterKernel::One | OuterKernel::Exp { .. } => self.s0,
            OuterKernel::Affine { c0, c1, c2 } => (c0 + c1 * t) * self.s0 + c2 * self.s1,
        }
    }

    fn dt_value(&self) -> f64 {
        match self.outer {
            OuterKernel::One => 0.0,
            OuterKernel::Affine { c1, .. } => c1 * self.s0,
            OuterKernel::Exp { lambda } => lambda * self.s0,
        }
    }
}

fn check_finite(step: usize, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { step, value })
    }
}

/// Cell weights ω_m = ∫_{(m−1)Δ}^{mΔ} κ, m = n..1 (reversed).
fn reversed_cell_weights(kernel: &KernelSpec, grid: SimulationGrid) -> Result<Vec<f64>> {
    let (n, dt) = (grid.steps(), grid.dt());
    (0..n)
        .map(|k| {
            let m = (n - k) as f64;
            kernel.profile_integral((m - 1.0) * dt, m * dt)
        })
        .collect()
}

/// W_m = ∫ over one cell of ∂ₜk at lag m ≥ 2, reversed; slot m = 1 is zero.
fn reversed_dt_weights(kernel: &KernelSpec, grid: SimulationGrid) -> Result<Vec<f64>> {
    let (n, dt) = (grid.steps(), grid.dt());
    (0..n)
        .map(|k| {
            let m = n - k;
            if m < 2 {
                return Ok(0.0);
            }
            let m = m as f64;
            kernel.profile_increment((m - 1.0) * dt, m * dt)
        })
        .collect()
}

fn check_path(problem: &ProblemSpec, path: &BrownianPath) -> Result<()> {
    let h = path.grid().horizon();
    if (h - problem.horizon).abs() > 1e-12 * problem.horizon {
        return Err(Error::Precondition(format!(
            "path horizon {h} differs from problem horizon {}",
            problem.horizon
        )));
    }
    Ok(())
}

fn check_kernel(problem: &ProblemSpec, kernel: &KernelSpec) -> Result<()> {
    if !problem.allow_assumption_violation
        && !kernel.is_a1_admissible()
        && !kernel.is_smooth_on_diagonal()
    {
        return Err(Error::Precondition(
            "kernel is neither admissible nor smooth on the diagonal".into(),
        ));
    }
    Ok(())
}

/// A scheme prepared for one problem and grid; reusable across paths.
#[derive(Debug, Clone)]
pub struct Solver {
    problem: ProblemSpec,
    kernel: KernelSpec,
    grid: SimulationGrid,
    scheme: Scheme,
    /// Volterra: ω reversed. Itô singular: W reversed. Itô regular: κ′(mΔ)Δ reversed.
    weights: Vec<f64>,
    /// Itô forms only: the coefficient of b(t_i, X_i)Δ-type drift at each step.
    diagonal: Vec<f64>,
}

impl Solver {
    pub fn new(problem: &ProblemSpec, grid: SimulationGrid, scheme: Scheme) -> Result<Self> {
        if (grid.horizon() - problem.horizon).abs() > 1e-12 * problem.horizon {
            return Err(Error::Precondition(format!(
                "grid horizon {} differs from problem horizon {}",
                grid.horizon(),
                problem.horizon
            )));
        }
        let (n, dt) = (grid.steps(), grid.dt());
        let base = &problem.kernel;
        let (kernel, weights, diagonal) = match scheme {
            Scheme::Volterra => {
                check_kernel(problem, base)?;
                (base.clone(), reversed_cell_weights(base, grid)?, Vec::new())
            }
            Scheme::Regularized { eps } => {
                let k = base.shifted(eps)?;
                let w = reversed_cell_weights(&k, grid)?;
                (k, w, Vec::new())
            }
            Scheme::ItoSingular => {
                check_kernel(problem, base)?;
                if !problem.allow_assumption_violation {
                    problem.check_beta1()?;
                }
                let w = reversed_dt_weights(base, grid)?;
                let mut diag = Vec::with_capacity(n);
                // k(0,0) is undefined for singular kernels: use ∫₀^{t₁} k(u,0)du.
                diag.push(base.profile_integral(0.0, dt)?);
                for i in 1..n {
                    diag.push(base.profile(grid.time(i))? * dt);
                }
                (base.clone(), w, diag)
            }
            Scheme::ItoRegular => {
                if !base.is_smooth_on_diagonal() {
                    return Err(Error::Precondition(
                        "regular form requires a smooth diagonal".into(),
                    ));
                }
                let w = (0..n)
                    .map(|k| base.profile_dt((n - k) as f64 * dt).map(|d| d * dt))
                    .collect::<Result<Vec<_>>>()?;
                let diag = vec![base.profile(0.0)? * dt; n];
                (base.clone(), w, diag)
            }
        };
        Ok(Solver { problem: problem.clone(), kernel, grid, scheme, weights, diagonal })
    }

    pub fn grid(&self) -> SimulationGrid {
        self.grid
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    /// The kernel actually integrated (shifted for the regularized scheme).
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn solve(&self, path: &BrownianPath) -> Result<Trajectory> {
        if path.grid() != self.grid {
            return Err(Error::Precondition(format!(
                "path has {} steps, solver expects {}",
                path.grid().steps(),
                self.grid.steps()
            )));
        }
        match self.scheme {
            Scheme::Volterra | Scheme::Regularized { .. } => self.direct(path.increments()),
            Scheme::ItoSingular | Scheme::ItoRegular => self.ito(path.increments()),
        }
    }

    fn direct(&self, db: &[f64]) -> Result<Trajectory> {
        let (n, grid) = (self.grid.steps(), self.grid);
        let c = &self.problem.coeffs;
        let x0 = self.problem.x0;
        let mut values = Vec::with_capacity(n + 1);
        let mut drift = Vec::with_capacity(n);
        let mut noise = NoiseHistory::new(c.g, grid.dt());
        values.push(x0);
        drift.push(c.b.eval(0.0, x0));
        noise.push(0.0, c.sigma.eval(0.0, x0) * db[0]);
        for i in 1..=n {
            let t = grid.time(i);
            let x = x0 + dot(&drift, &self.weights[n - i..]) + noise.value(t);
            let x = check_finite(i, x)?;
            values.push(x);
            if i < n {
                drift.push(c.b.eval(t, x));
                noise.push(t, c.sigma.eval(t, x) * db[i]);
            }
        }
        Ok(Trajectory::new(grid, values, self.scheme, None))
    }

    fn ito(&self, db: &[f64]) -> Result<Trajectory> {
        let (n, grid) = (self.grid.steps(), self.grid);
        let (dt, c) = (grid.dt(), &self.problem.coeffs);
        let mut values = Vec::with_capacity(n + 1);
        let mut drift = Vec::with_capacity(n + 1);
        let mut aux = Vec::with_capacity(n + 1);
        let mut noise = NoiseHistory::new(c.g, dt);
        let mut x = self.problem.x0;
        values.push(x);
        for i in 0..=n {
            let t = grid.time(i);
            let b = c.b.eval(t, x);
            let correction = self.correction(&drift, b, i);
            let g_term = noise.dt_value();
            aux.push(StepAux { phi: correction, g: g_term });
            if i == n {
                break;
            }
            drift.push(b);
            let v = c.sigma.eval(t, x) * db[i];
            x += self.diagonal[i] * b + (correction + g_term) * dt + c.g.eval(t, t) * v;
            x = check_finite(i + 1, x)?;
            values.push(x);
            noise.push(t, v);
        }
        Ok(Trajectory::new(grid, values, self.scheme, Some(aux)))
    }

    /// φ(t_i) (singular form) or K(t_i) (regular form) from b_0..b_{i−1} and b_i.
    fn correction(&self, history: &[f64], b_now: f64, i: usize) -> f64 {
        let n = self.grid.steps();
        match self.scheme {
            Scheme::ItoSingular => {
                if i < 2 {
                    return 0.0;
                }
                // −Σ_{j≤i−2} W_{i−j}(b_i − b_j); the cell next to t_i is dropped.
                let s = centered_dot(&self.weights[n - i..n - 1], &history[..i - 1], b_now);
                s + 0.0
            }
            Scheme::ItoRegular => {
                if i == 0 {
                    return 0.0;
                }
                dot(history, &self.weights[n - i..])
            }
            _ => 0.0,
        }
    }
}

/// Direct scheme: X_i = x0 + Σ_{j<i} ω_{ij} b_j + Σ_{j<i} g(t_i,t_j) σ_j ΔB_j.
pub fn solve_volterra(problem: &ProblemSpec, path: &BrownianPath) -> Result<Trajectory> {
    check_path(problem, path)?;
    Solver::new(problem, path.grid(), Scheme::Volterra)?.solve(path)
}

/// Direct scheme with the kernel k(t + ε, s).
pub fn solve_regularized(problem: &ProblemSpec, eps: f64, path: &BrownianPath) -> Result<Trajectory> {
    check_path(problem, path)?;
    Solver::new(problem, path.grid(), Scheme::Regularized { eps })?.solve(path)
}

/// Euler–Maruyama on dX = (k(t,0)b + φ + G)dt + g(t,t)σ dB.
pub fn solve_ito_form(problem: &ProblemSpec, path: &BrownianPath) -> Result<Trajectory> {
    check_path(problem, path)?;
    Solver::new(problem, path.grid(), Scheme::ItoSingular)?.solve(path)
}

/// Euler–Maruyama on dX = (k(t,t)b + K + G)dt + g(t,t)σ dB for smooth kernels.
pub fn solve_ito_regular(problem: &ProblemSpec, path: &BrownianPath) -> Result<Trajectory> {
    check_path(problem, path)?;
    Solver::new(problem, path.grid(), Scheme::ItoRegular)?.solve(path)
}

/// Discrete φ(t_i) = −Σ_{j<i−1} W_{ij}[b(t_i,X_i) − b(t_j,X_j)] along `traj`.
pub fn phi_at(problem: &ProblemSpec, traj: &Trajectory, i: usize) -> Result<f64> {
    let grid = traj.grid();
    if i > grid.steps() {
        return Err(Error::domain(format!("step {i} beyond grid of {} steps", grid.steps())));
    }
    if i < 2 {
        return Ok(0.0);
    }
    let b = &problem.coeffs.b;
    let dt = grid.dt();
    let b_now = b.eval(grid.time(i), traj.values()[i]);
    let mut w = Vec::with_capacity(i - 1);
    let mut hist = Vec::with_capacity(i - 1);
    for j in 0..i - 1 {
        let m = (i - j) as f64;
        w.push(problem.kernel.profile_increment((m - 1.0) * dt, m * dt)?);
        hist.push(b.eval(grid.time(j), traj.values()[j]));
    }
    Ok(centered_dot(&w, &hist, b_now) + 0.0)
}

#[cfg(test)]
mod tests;
