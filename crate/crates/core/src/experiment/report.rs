use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentKind;
use crate::error::Result;
use crate::stats::RateFit;

/// One measured value at one parameter point (a, ε, n or p).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Measurement {
    pub quantity: String,
    pub parameter: f64,
    pub steps: usize,
    pub value: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub check: String,
    pub threshold: String,
    pub measured: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config_hash: String,
    pub seed: u64,
    pub measurements: Vec<Measurement>,
    pub fits: Vec<(String, RateFit)>,
    pub verdicts: Vec<Verdict>,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub(crate) fn new(experiment: ExperimentKind, config_hash: String, seed: u64) -> Self {
        ExperimentReport {
            experiment,
            config_hash,
            seed,
            measurements: Vec::new(),
            fits: Vec::new(),
            verdicts: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub(crate) fn measure(
        &mut self,
        quantity: &str,
        parameter: f64,
        steps: usize,
        value: f64,
        stderr: Option<f64>,
    ) {
        self.measurements.push(Measurement {
            quantity: quantity.to_string(),
            parameter,
            steps,
            value,
            stderr,
        });
    }

    pub(crate) fn fit(&mut self, name: &str, fit: RateFit) {
        self.measure(&format!("{name}_slope"), 0.0, 0, fit.slope, Some(fit.slope_stderr));
        self.measure(&format!("{name}_intercept"), 0.0, 0, fit.intercept, None);
        self.measure(&format!("{name}_r_squared"), 0.0, 0, fit.r_squared, None);
        self.fits.push((name.to_string(), fit));
    }

    pub(crate) fn verdict(&mut self, check: &str, threshold: String, measured: f64, pass: bool) {
        self.verdicts.push(Verdict { check: check.to_string(), threshold, measured, pass });
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Measurements with the given quantity name, in insertion order.
    pub fn values_of(&self, quantity: &str) -> Vec<&Measurement> {
        self.measurements.iter().filter(|m| m.quantity == quantity).collect()
    }

    pub fn verdict_named(&self, check: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.check == check)
    }

    pub fn fit_named(&self, name: &str) -> Option<&RateFit> {
        self.fits.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn write_measurements<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "config_hash", "seed", "experiment", "quantity", "parameter", "steps", "value", "stderr",
        ])?;
        for m in &self.measurements {
            w.write_record([
                self.config_hash.clone(),
                self.seed.to_string(),
                self.experiment.to_string(),
                m.quantity.clone(),
                m.parameter.to_string(),
                m.steps.to_string(),
                m.value.to_string(),
                m.stderr.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_verdicts<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["config_hash", "seed", "check", "threshold", "measured", "pass"])?;
        for v in &self.verdicts {
            w.write_record([
                self.config_hash.clone(),
                self.seed.to_string(),
                v.check.clone(),
                v.threshold.clone(),
                v.measured.to_string(),
                if v.pass { "pass" } else { "fail" }.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write `measurements.csv`, `verdicts.csv` and `meta.txt` into `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_measurements(std::fs::File::create(dir.join("measurements.csv"))?)?;
        self.write_verdicts(std::fs::File::create(dir.join("verdicts.csv"))?)?;
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut meta = std::fs::File::create(dir.join("meta.txt"))?;
        writeln!(meta, "experiment: {}", self.experiment)?;
        writeln!(meta, "config_hash: {}", self.config_hash)?;
        writeln!(meta, "seed: {}", self.seed)?;
        writeln!(meta, "volterra-core: {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(meta, "timestamp_unix: {stamp}")?;
        writeln!(meta, "passed: {}", self.passed())?;
        for note in &self.notes {
            writeln!(meta, "note: {note}")?;
        }
        Ok(())
    }
}
