//! Estimators over Monte Carlo samples: 1-Wasserstein distance to a normal
//! law, absolute moments, Hölder ratios over dyadic pairs and log-log rate
//! fits. Every estimator is a deterministic function of its input.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::solver::Trajectory;

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

/// A labelled, non-empty set of finite observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    label: String,
}

impl Sample {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("sample must not be empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "sample contains non-finite value at index {i}"
            )));
        }
        Ok(Sample { values, label: label.into() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Target law N(mean, std²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalTarget {
    pub mean: f64,
    pub std: f64,
}

impl NormalTarget {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(std >= 0.0) || !mean.is_finite() || !std.is_finite() {
            return Err(Error::domain("normal target needs finite mean and std >= 0"));
        }
        Ok(NormalTarget { mean, std })
    }
}

/// Standard normal quantiles at the midpoints (i − 1/2)/m.
pub fn midpoint_normal_quantiles(m: usize) -> Vec<f64> {
    let normal = Normal::standard();
    (1..=m)
        .map(|i| normal.inverse_cdf((i as f64 - 0.5) / m as f64))
        .collect()
}

/// 1-Wasserstein distance between the empirical law of `sample` and the
/// target, by the quantile coupling at probability midpoints.
pub fn wasserstein_to_normal(sample: &Sample, target: NormalTarget) -> Result<f64> {
    let m = sample.len();
    if m < 2 {
        return Err(Error::domain("Wasserstein estimate needs at least two values"));
    }
    let mut sorted = sample.values.clone();
    sorted.sort_by(f64::total_cmp);
    let z = midpoint_normal_quantiles(m);
    let total = compensated_sum(
        sorted
            .iter()
            .zip(&z)
            .map(|(x, z)| (x - (target.mean + target.std * z)).abs()),
    );
    Ok(total / m as f64)
}

/// (1/m) Σ |xᵢ|^p.
pub fn empirical_moment(sample: &Sample, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::domain(format!("moment order must be >= 1, got {p}")));
    }
    let total = compensated_sum(sample.values.iter().map(|x| x.abs().powf(p)));
    Ok(total / sample.len() as f64)
}

/// Sample mean and its standard error s/√m.
pub fn mc_mean_with_se(sample: &Sample) -> Result<(f64, f64)> {
    let m = sample.len();
    if m < 2 {
        return Err(Error::domain("standard error needs at least two values"));
    }
    let mean = compensated_sum(sample.values.iter().copied()) / m as f64;
    let ss = compensated_sum(sample.values.iter().map(|x| (x - mean) * (x - mean)));
    let var = ss / (m - 1) as f64;
    Ok((mean, (var / m as f64).sqrt()))
}

/// The largest Hölder ratio found by [`holder_scan`], with its pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderScan {
    pub ratio: f64,
    pub s: f64,
    pub t: f64,
}

/// Smallest admissible pair separation, in grid steps.
pub const HOLDER_MIN_SEPARATION: usize = 4;

/// Mean over trajectories of |X_t − X_s|^p / |t − s|^{p/2}, maximized over
/// dyadic pairs (jδ, (j+1)δ) with δ = 2^k Δ ≥ 4Δ.
pub fn holder_scan(ensemble: &[Trajectory], p: f64) -> Result<HolderScan> {
    if !(p >= 1.0) {
        return Err(Error::domain(format!("moment order must be >= 1, got {p}")));
    }
    if ensemble.len() < 100 {
        return Err(Error::domain("Hölder scan needs an ensemble of at least 100 paths"));
    }
    let grid = ensemble[0].grid();
    if ensemble.iter().any(|tr| tr.grid() != grid) {
        return Err(Error::domain("trajectories do not share one grid"));
    }
    let n = grid.steps();
    let mut best = HolderScan { ratio: 0.0, s: 0.0, t: 0.0 };
    let mut found = false;
    let mut sep = HOLDER_MIN_SEPARATION;
    while sep <= n {
        let width = grid.time(sep);
        for j in 0..n / sep {
            let (a, b) = (j * sep, (j + 1) * sep);
            let mean = compensated_sum(
                ensemble
                    .iter()
                    .map(|tr| (tr.values()[b] - tr.values()[a]).abs().powf(p)),
            ) / ensemble.len() as f64;
            let ratio = mean / width.powf(0.5 * p);
            if !found || ratio > best.ratio {
                best = HolderScan { ratio, s: grid.time(a), t: grid.time(b) };
                found = true;
            }
        }
        sep *= 2;
    }
    if !found {
        return Err(Error::domain(format!(
            "grid with {n} steps has no pair separated by {HOLDER_MIN_SEPARATION} steps"
        )));
    }
    Ok(best)
}

/// Ratio value of [`holder_scan`].
pub fn holder_ratio_scan(ensemble: &[Trajectory], p: f64) -> Result<f64> {
    holder_scan(ensemble, p).map(|h| h.ratio)
}

/// Least-squares line through (log x, log y).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
}

pub fn fit_rate(xs: &[f64], ys: &[f64]) -> Result<RateFit> {
    if xs.len() != ys.len() {
        return Err(Error::domain("rate fit needs equally many x and y values"));
    }
    if xs.len() < 3 {
        return Err(Error::domain("rate fit requires ≥ 3 points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::domain("rate fit requires positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = compensated_sum(lx.iter().copied()) / k;
    let my = compensated_sum(ly.iter().copied()) / k;
    let sxx = compensated_sum(lx.iter().map(|x| (x - mx) * (x - mx)));
    if !(sxx > 0.0) {
        return Err(Error::domain("rate fit needs at least two distinct x values"));
    }
    let sxy = compensated_sum(lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)));
    let syy = compensated_sum(ly.iter().map(|y| (y - my) * (y - my)));
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = compensated_sum(
        lx.iter()
            .zip(&ly)
            .map(|(x, y)| (y - intercept - slope * x).powi(2)),
    )
    .max(0.0);
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    let slope_stderr = (sse / (k - 2.0) / sxx).sqrt();
    Ok(RateFit { slope, intercept, r_squared, slope_stderr })
}

/// One estimator output, in the shape written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub estimator: String,
    pub parameters: String,
    pub value: f64,
    pub stderr: Option<f64>,
}

pub fn write_estimates_csv<W: std::io::Write>(writer: W, rows: &[EstimateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::NormalStream;
    use crate::solver::{Scheme, SimulationGrid};

    fn normals(seed: u64, m: usize) -> Vec<f64> {
        NormalStream::new(seed, 0).take(m).collect()
    }

    fn self_coupled(mean: f64, std: f64, m: usize) -> Sample {
        let z = midpoint_normal_quantiles(m);
        Sample::new(z.iter().map(|z| mean + std * z).collect(), "q").unwrap()
    }

    #[test]
    fn wasserstein_self_coupling_is_zero() {
        let s = self_coupled(0.3, 1.7, 1000);
        let d = wasserstein_to_normal(&s, NormalTarget::new(0.3, 1.7).unwrap()).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn wasserstein_translation() {
        let m = 1000;
        let z = midpoint_normal_quantiles(m);
        let mu = 0.625;
        let s = Sample::new(z.iter().map(|z| z + mu).collect(), "shift").unwrap();
        let d = wasserstein_to_normal(&s, NormalTarget::new(0.0, 1.0).unwrap()).unwrap();
        assert!((d - mu).abs() < 1e-14);
    }

    #[test]
    fn wasserstein_point_mass_is_mean_absolute_deviation() {
        let s = Sample::new(vec![-1.0, 0.0, 3.0], "pm").unwrap();
        let d = wasserstein_to_normal(&s, NormalTarget::new(0.0, 0.0).unwrap()).unwrap();
        assert!((d - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn wasserstein_of_normal_sample_is_small() {
        let s = Sample::new(normals(7, 100_000), "n").unwrap();
        let d = wasserstein_to_normal(&s, NormalTarget::new(0.0, 1.0).unwrap()).unwrap();
        assert!(d <= 0.02, "{d}");
    }

    #[test]
    fn wasserstein_rejects_tiny_samples() {
        let s = Sample::new(vec![1.0], "one").unwrap();
        assert!(wasserstein_to_normal(&s, NormalTarget::new(0.0, 1.0).unwrap()).is_err());
        assert!(Sample::new(vec![], "empty").is_err());
        assert!(Sample::new(vec![f64::NAN], "nan").is_err());
    }

    #[test]
    fn moment_examples() {
        let zeros = Sample::new(vec![0.0; 10], "z").unwrap();
        assert_eq!(empirical_moment(&zeros, 3.5).unwrap(), 0.0);
        let pm = Sample::new(vec![-1.0, 1.0], "pm").unwrap();
        assert_eq!(empirical_moment(&pm, 3.0).unwrap(), 1.0);
        let s = Sample::new(normals(11, 100_000), "n").unwrap();
        let m2 = empirical_moment(&s, 2.0).unwrap();
        assert!((m2 - 1.0).abs() <= 0.02, "{m2}");
        let direct: f64 = s.values().iter().map(|x| x * x).sum::<f64>() / s.len() as f64;
        assert!((m2 - direct).abs() < 1e-12);
        assert!(empirical_moment(&s, 0.5).is_err());
    }

    #[test]
    fn mean_with_se_examples() {
        let s = Sample::new(vec![5.0, 5.0, 5.0], "c").unwrap();
        assert_eq!(mc_mean_with_se(&s).unwrap(), (5.0, 0.0));
        let s = Sample::new(vec![0.0, 2.0], "two").unwrap();
        let (m, se) = mc_mean_with_se(&s).unwrap();
        assert_eq!(m, 1.0);
        assert!((se - 1.0).abs() < 1e-15);
        let s = Sample::new(normals(3, 100_000), "n").unwrap();
        let (_, se) = mc_mean_with_se(&s).unwrap();
        let expected = 1.0 / 100_000f64.sqrt();
        assert!((se / expected - 1.0).abs() < 0.15, "{se}");
    }

    #[test]
    fn rate_fit_examples() {
        let xs = [0.5, 0.25, 0.125, 0.0625, 0.03125];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(0.25)).collect();
        let f = fit_rate(&xs, &ys).unwrap();
        assert!((f.slope - 0.25).abs() < 1e-14);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-13);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.slope_stderr < 1e-12);

        let flat = fit_rate(&xs, &[2.0; 5]).unwrap();
        assert!(flat.slope.abs() < 1e-15);
        assert_eq!(flat.r_squared, 1.0);

        // alternating 1% perturbation of an exact power law
        let noisy: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| x.powf(0.25) * (1.0 + if i % 2 == 0 { 0.01 } else { -0.01 }))
            .collect();
        let f = fit_rate(&xs, &noisy).unwrap();
        assert!((0.24..=0.26).contains(&f.slope), "{}", f.slope);
        assert!(f.slope_stderr > 0.0);

        assert!(fit_rate(&xs[..2], &ys[..2]).is_err());
        assert!(fit_rate(&[1.0, 2.0, -1.0], &[1.0, 1.0, 1.0]).is_err());
    }

    fn constant_ensemble(n: usize, paths: usize, value: f64) -> Vec<Trajectory> {
        let grid = SimulationGrid::new(n, 1.0).unwrap();
        (0..paths)
            .map(|_| Trajectory::new(grid, vec![value; n + 1], Scheme::Volterra, None))
            .collect()
    }

    #[test]
    fn holder_constant_paths_give_zero() {
        let ens = constant_ensemble(64, 100, 2.0);
        assert_eq!(holder_ratio_scan(&ens, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn holder_single_pair_grid() {
        let grid = SimulationGrid::new(4, 2.0).unwrap();
        let ens: Vec<Trajectory> = (0..100)
            .map(|i| {
                let end = (i % 7) as f64 - 3.0;
                Trajectory::new(grid, vec![0.0, 9.0, -9.0, 9.0, end], Scheme::Volterra, None)
            })
            .collect();
        let direct: f64 =
            (0..100).map(|i| ((i % 7) as f64 - 3.0).powi(2)).sum::<f64>() / 100.0 / 2.0;
        let h = holder_scan(&ens, 2.0).unwrap();
        assert!((h.ratio - direct).abs() < 1e-14);
        assert_eq!((h.s, h.t), (0.0, 2.0));
    }

    #[test]
    fn holder_rejects_mismatched_grids() {
        let mut ens = constant_ensemble(16, 100, 0.0);
        ens.extend(constant_ensemble(32, 1, 0.0));
        assert!(holder_ratio_scan(&ens, 2.0).is_err());
        assert!(holder_ratio_scan(&constant_ensemble(16, 10, 0.0), 2.0).is_err());
    }

    #[test]
    fn estimate_rows_serialize() {
        let mut buf = Vec::new();
        let rows = [EstimateRow {
            estimator: "moment".into(),
            parameters: "p=2".into(),
            value: 1.5,
            stderr: None,
        }];
        write_estimates_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "estimator,parameters,value,stderr\nmoment,p=2,1.5,\n"
        );
    }
}
