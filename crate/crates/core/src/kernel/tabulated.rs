use std::io::Read;
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

const QUADRATURE_DEGREE: usize = 10;

fn legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(QUADRATURE_DEGREE).unwrap()))
}

/// A convolution profile κ given by samples on a radius grid.
///
/// The samples are stored in factored form κ(r) = r^{α−1} h(r), with h
/// interpolated linearly between radii and held constant below the first
/// radius. The declared exponent α therefore fixes the behaviour at the
/// diagonal exactly. An optional derivative column is factored the same
/// way as κ′(r) = r^{α−2} h₁(r); without it κ′ is derived from h.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    radius: Vec<f64>,
    regular: Vec<f64>,
    regular_dt: Option<Vec<f64>>,
    alpha: f64,
    shift: f64,
}

impl TabulatedKernel {
    pub fn new(
        radius: Vec<f64>,
        value: Vec<f64>,
        derivative: Option<Vec<f64>>,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(format!(
                "tabulated kernel exponent must lie in (0, 1], got {alpha}"
            )));
        }
        if radius.len() < 2 || radius.len() != value.len() {
            return Err(Error::domain(
                "tabulated kernel needs at least two (radius, value) rows",
            ));
        }
        if let Some(d) = &derivative {
            if d.len() != radius.len() {
                return Err(Error::domain("derivative column length mismatch"));
            }
        }
        if radius.windows(2).any(|w| !(w[1] > w[0])) || !(radius[0] >= 0.0) {
            return Err(Error::domain("radii must be non-negative and strictly increasing"));
        }
        if alpha < 1.0 && radius[0] == 0.0 {
            return Err(Error::domain(
                "singular tabulated kernel cannot be sampled at radius 0",
            ));
        }
        let all = value.iter().chain(derivative.iter().flatten());
        if all.chain(&radius).any(|v| !v.is_finite()) {
            return Err(Error::domain("tabulated kernel contains non-finite entries"));
        }
        let regular = radius
            .iter()
            .zip(&value)
            .map(|(r, v)| v * r.powf(1.0 - alpha))
            .collect();
        let dt_exponent = Self::dt_exponent_for(alpha);
        let regular_dt = derivative.map(|d| {
            radius
                .iter()
                .zip(&d)
                .map(|(r, v)| v * r.powf(dt_exponent))
                .collect()
        });
        Ok(TabulatedKernel {
            radius,
            regular,
            regular_dt,
            alpha,
            shift: 0.0,
        })
    }

    /// Read `radius,value[,derivative]` rows. A header row is optional.
    pub fn from_csv_reader<R: Read>(reader: R, alpha: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut radius = Vec::new();
        let mut value = Vec::new();
        let mut deriv = Vec::new();
        let mut columns = None;
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(str::parse::<f64>).collect();
            let row = match parsed {
                Ok(row) => row,
                Err(_) if line == 0 => continue,
                Err(e) => {
                    return Err(Error::domain(format!("kernel csv row {}: {e}", line + 1)))
                }
            };
            let width = *columns.get_or_insert(row.len());
            if !(2..=3).contains(&width) || row.len() != width {
                return Err(Error::domain(format!(
                    "kernel csv row {} must have 2 or 3 consistent columns",
                    line + 1
                )));
            }
            radius.push(row[0]);
            value.push(row[1]);
            if width == 3 {
                deriv.push(row[2]);
            }
        }
        let derivative = (columns == Some(3)).then_some(deriv);
        Self::new(radius, value, derivative, alpha)
    }

    pub fn from_csv_path(path: impl AsRef<Path>, alpha: f64) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::from_csv_reader(file, alpha)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Largest radius r with κ(r) defined (accounts for the shift).
    pub fn max_radius(&self) -> f64 {
        self.radius[self.radius.len() - 1] - self.shift
    }

    pub(crate) fn shifted(&self, eps: f64) -> Self {
        let mut out = self.clone();
        out.shift += eps;
        out
    }

    fn dt_exponent_for(alpha: f64) -> f64 {
        if alpha < 1.0 {
            2.0 - alpha
        } else {
            0.0
        }
    }

    /// Linear interpolation of `table` at absolute radius y, with its slope.
    fn interpolate(&self, table: &[f64], y: f64) -> Result<(f64, f64)> {
        let last = self.radius.len() - 1;
        let rmax = self.radius[last];
        if y > rmax * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "radius {y} outside tabulated range (max {rmax})"
            )));
        }
        if y <= self.radius[0] {
            return Ok((table[0], 0.0));
        }
        let k = self.radius.partition_point(|&r| r < y).clamp(1, last);
        let (r0, r1) = (self.radius[k - 1], self.radius[k]);
        let slope = (table[k] - table[k - 1]) / (r1 - r0);
        Ok((table[k - 1] + slope * (y - r0).min(r1 - r0), slope))
    }

    pub(crate) fn profile(&self, r: f64) -> Result<f64> {
        let y = r + self.shift;
        let (h, _) = self.interpolate(&self.regular, y)?;
        Ok(y.powf(self.alpha - 1.0) * h)
    }

    pub(crate) fn profile_dt(&self, r: f64) -> Result<f64> {
        let y = r + self.shift;
        match &self.regular_dt {
            Some(table) => {
                let (h1, _) = self.interpolate(table, y)?;
                Ok(y.powf(-Self::dt_exponent_for(self.alpha)) * h1)
            }
            None => {
                let (h, dh) = self.interpolate(&self.regular, y)?;
                let a = self.alpha;
                Ok((a - 1.0) * y.powf(a - 2.0) * h + y.powf(a - 1.0) * dh)
            }
        }
    }

    /// ∫_{lo}^{hi} κ (or |κ|) dr via ρ = y^α, split at the sample radii.
    pub(crate) fn integral(&self, lo: f64, hi: f64, absolute: bool) -> Result<f64> {
        if lo == hi {
            return Ok(0.0);
        }
        let (ya, yb) = (lo + self.shift, hi + self.shift);
        if yb > self.radius[self.radius.len() - 1] * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "radius {hi} outside tabulated range (max {})",
                self.max_radius()
            )));
        }
        let a = self.alpha;
        let mut cuts = vec![ya];
        cuts.extend(self.radius.iter().copied().filter(|&r| r > ya && r < yb));
        cuts.push(yb);
        let rule = legendre();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (p0, p1) = (w[0].powf(a), w[1].powf(a));
            let piece = rule.integrate(p0, p1, |rho| {
                let y = rho.powf(1.0 / a);
                let h = self
                    .interpolate(&self.regular, y.min(yb))
                    .map(|(h, _)| h)
                    .unwrap_or(f64::NAN);
                if absolute {
                    h.abs()
                } else {
                    h
                }
            });
            total += piece / a;
        }
        if !total.is_finite() {
            return Err(Error::domain("tabulated kernel integral is not finite"));
        }
        Ok(total)
    }
}
