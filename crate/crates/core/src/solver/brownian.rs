use serde::Serialize;

use super::SimulationGrid;
use crate::error::{Error, Result};
use crate::rng::NormalStream;

/// Reproducibility token of one path: master seed and path index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct PathSeed {
    pub master: u64,
    pub path: u64,
}

impl PathSeed {
    pub fn new(master: u64, path: u64) -> Self {
        PathSeed { master, path }
    }
}

/// Brownian increments ΔB_i over a uniform grid.
///
/// Increments are rounded to a dyadic lattice of spacing about 2^{−44}·√T.
/// Sums and differences of lattice values are then exact in f64, so bridge
/// refinement followed by coarsening returns the original increments bit for
/// bit.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: SimulationGrid,
    increments: Vec<f64>,
    seed: PathSeed,
    level: u64,
}

fn lattice(horizon: f64) -> f64 {
    2f64.powi(horizon.sqrt().log2().ceil() as i32 - 44)
}

fn snap(x: f64, q: f64) -> f64 {
    (x / q).round() * q
}

/// Independent N(0, Δ) increments; draw i comes from counter (seed, i).
pub fn sample_brownian(grid: SimulationGrid, seed: PathSeed) -> BrownianPath {
    let q = lattice(grid.horizon());
    let sd = grid.dt().sqrt();
    let increments = NormalStream::new(seed.master, seed.path)
        .take(grid.steps())
        .map(|z| snap(sd * z, q))
        .collect();
    BrownianPath { grid, increments, seed, level: 0 }
}

impl BrownianPath {
    pub fn grid(&self) -> SimulationGrid {
        self.grid
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn seed(&self) -> PathSeed {
        self.seed
    }

    /// Halve the step by Brownian-bridge midpoint insertion.
    pub fn refine(&self) -> Result<BrownianPath> {
        let grid = SimulationGrid::new(2 * self.grid.steps(), self.grid.horizon())?;
        let q = lattice(grid.horizon());
        let half_sd = 0.5 * self.grid.dt().sqrt();
        let level = self.level + 1;
        let mut stream = NormalStream::keyed(self.seed.master, level, self.seed.path);
        let mut increments = Vec::with_capacity(grid.steps());
        for &d in &self.increments {
            let z = stream.next().unwrap_or_default();
            let first = snap(0.5 * d + half_sd * z, q);
            increments.push(first);
            increments.push(d - first);
        }
        Ok(BrownianPath { grid, increments, seed: self.seed, level })
    }

    /// Double the step by summing adjacent increment pairs.
    pub fn coarsen(&self) -> Result<BrownianPath> {
        let n = self.grid.steps();
        if n % 2 != 0 {
            return Err(Error::domain(format!("cannot coarsen a grid of {n} steps")));
        }
        let grid = SimulationGrid::new(n / 2, self.grid.horizon())?;
        let increments = self.increments.chunks_exact(2).map(|p| p[0] + p[1]).collect();
        Ok(BrownianPath {
            grid,
            increments,
            seed: self.seed,
            level: self.level.saturating_sub(1),
        })
    }

    /// Coarsen repeatedly down to `steps`, which must divide the step count
    /// by a power of two.
    pub fn coarsen_to(&self, steps: usize) -> Result<BrownianPath> {
        let mut path = self.clone();
        while path.grid.steps() > steps {
            path = path.coarsen()?;
        }
        if path.grid.steps() != steps {
            return Err(Error::domain(format!(
                "{} steps do not coarsen to {steps}",
                self.grid.steps()
            )));
        }
        Ok(path)
    }
}
