//! Fields on the cylinder `(0, inf) x S^{d-1}` in the variable `s = r^alpha`.
//!
//! Radial derivatives use fourth-order differences in `t = ln s`; angular
//! derivatives on `S^1` are spectral. The weighted operator is
//!
//! ```text
//! L w = alpha^2 w'' + alpha^2 (n-1) w'/s + Lap_theta w / s^2
//! ```
//!
//! and integrals are taken against `dmu = s^{n-1} ds dtheta`.

use std::f64::consts::PI;
use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::params::ParamSet;

pub const DEFAULT_ANGULAR: usize = 256;

/// How the angular dependence of a field is represented.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngularRep {
    /// No angular dependence (any `d`).
    Radial,
    /// Uniform grid of `m` points on `S^1` (`d = 2` only).
    PeriodicGrid { m: usize },
    /// Radial coefficient of one spherical harmonic of degree `k`.
    SingleHarmonic { k: u32 },
}

impl AngularRep {
    pub fn stride(&self) -> usize {
        match *self {
            AngularRep::PeriodicGrid { m } => m,
            _ => 1,
        }
    }

    pub fn has_angles(&self) -> bool {
        matches!(self, AngularRep::PeriodicGrid { .. })
    }
}

/// Eigenvalue of `-Lap` on `S^{d-1}` for degree-`k` harmonics.
pub fn harmonic_eigenvalue(k: u32, d: u32) -> f64 {
    let k = k as f64;
    k * (k + d as f64 - 2.0)
}

/// Radial interval `(r_lo, r_hi)` in the cylinder variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasureRegion {
    pub r_lo: f64,
    pub r_hi: f64,
}

impl MeasureRegion {
    pub fn new(r_lo: f64, r_hi: f64) -> Result<Self> {
        if !(r_lo < r_hi) || !r_lo.is_finite() || !r_hi.is_finite() {
            return Err(Error::InvalidInput(format!(
                "region needs r_lo < r_hi (got {r_lo}, {r_hi})"
            )));
        }
        Ok(MeasureRegion { r_lo, r_hi })
    }

    pub fn full(grid: &RadialGrid) -> Self {
        MeasureRegion {
            r_lo: grid.r_min(),
            r_hi: grid.r_max(),
        }
    }
}

/// A sampled field; `values` are row-major, radial index then angle.
#[derive(Clone, Debug)]
pub struct CylinderField {
    grid: RadialGrid,
    angular: AngularRep,
    values: Vec<f64>,
    params: ParamSet,
}

impl CylinderField {
    pub fn new(
        grid: RadialGrid,
        angular: AngularRep,
        values: Vec<f64>,
        params: ParamSet,
    ) -> Result<Self> {
        if let AngularRep::PeriodicGrid { m } = angular {
            if params.d != 2 {
                return Err(Error::UnsupportedAngularRep(format!(
                    "periodic angular grid needs d = 2 (got d = {})",
                    params.d
                )));
            }
            if m == 0 {
                return Err(Error::InvalidGrid("empty angular grid".into()));
            }
        }
        if values.len() != grid.count() * angular.stride() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                grid.count() * angular.stride(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite sample {} at index {i}",
                values[i]
            )));
        }
        if !params.has_finite_dimension() {
            return Err(Error::InvalidInput(
                "cylinder fields need a finite intrinsic dimension (p > 2)".into(),
            ));
        }
        Ok(CylinderField {
            grid,
            angular,
            values,
            params,
        })
    }

    /// Samples `f(s, theta)` at every node; `theta = 0` for non-grid representations.
    pub fn from_fn(
        grid: &RadialGrid,
        angular: AngularRep,
        params: &ParamSet,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let m = angular.stride();
        let mut values = Vec::with_capacity(grid.count() * m);
        for &s in grid.nodes() {
            for j in 0..m {
                let theta = if angular.has_angles() {
                    2.0 * PI * j as f64 / m as f64
                } else {
                    0.0
                };
                values.push(f(s, theta));
            }
        }
        CylinderField::new(grid.clone(), angular, values, *params)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn angular(&self) -> AngularRep {
        self.angular
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stride(&self) -> usize {
        self.angular.stride()
    }

    pub fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.stride() as f64
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.stride() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.stride();
        &self.values[i * m..(i + 1) * m]
    }

    /// A field on the same grid with new samples.
    pub fn with_values(&self, values: Vec<f64>) -> CylinderField {
        debug_assert_eq!(values.len(), self.values.len());
        CylinderField {
            grid: self.grid.clone(),
            angular: self.angular,
            values,
            params: self.params,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> CylinderField {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise `f(s, value)`.
    pub fn map_with_radius(&self, f: impl Fn(f64, f64) -> f64) -> CylinderField {
        let m = self.stride();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(k, &v)| f(self.grid.node(k / m), v))
            .collect();
        self.with_values(values)
    }

    pub fn zip_with(&self, other: &CylinderField, f: impl Fn(f64, f64) -> f64) -> CylinderField {
        debug_assert_eq!(self.values.len(), other.values.len());
        self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max of `|value|` over rows away from the radial ends.
    pub fn max_abs_interior(&self) -> f64 {
        let m = self.stride();
        (0..self.grid.count())
            .filter(|&i| self.grid.is_interior(i))
            .flat_map(|i| self.values[i * m..(i + 1) * m].iter())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Max of `|value|` over interior rows with `s` in `[lo, hi]`.
    pub fn max_abs_in(&self, lo: f64, hi: f64) -> f64 {
        let m = self.stride();
        (0..self.grid.count())
            .filter(|&i| self.grid.is_interior(i))
            .filter(|&i| {
                let s = self.grid.node(i);
                s >= lo && s <= hi
            })
            .flat_map(|i| self.values[i * m..(i + 1) * m].iter())
            .fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn ensure_positive(&self) -> Result<()> {
        match self.values.iter().position(|&v| !(v > 0.0)) {
            Some(index) => Err(Error::NonPositiveSample {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn require_pointwise(&self, what: &str) -> Result<()> {
        match self.angular {
            AngularRep::SingleHarmonic { k } if k > 0 => Err(Error::UnsupportedAngularRep(
                format!("{what} is nonlinear and mixes harmonic sectors (k = {k})"),
            )),
            _ => Ok(()),
        }
    }

    fn check_resolution(&self) -> Result<()> {
        if self.grid.count() < 6 {
            return Err(Error::GridTooCoarse(format!(
                "{} radial nodes",
                self.grid.count()
            )));
        }
        if let AngularRep::PeriodicGrid { m } = self.angular {
            if m < 4 {
                return Err(Error::GridTooCoarse(format!("{m} angular nodes")));
            }
        }
        Ok(())
    }

    /// `(w', w'')` in the cylinder radial variable.
    pub fn radial_derivatives(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_resolution()?;
        Ok(self.grid.d_ds_and_d2_ds2(&self.values, self.stride()))
    }

    pub fn radial_derivative(&self) -> Result<Vec<f64>> {
        self.check_resolution()?;
        Ok(self.grid.d_ds(&self.values, self.stride()))
    }

    /// `order`-th angular derivative; zero for radial representations.
    pub fn angular_derivative(&self, order: u32) -> Result<Vec<f64>> {
        self.check_resolution()?;
        match self.angular {
            AngularRep::PeriodicGrid { m } => Ok(spectral_derivative(&self.values, m, order)),
            _ => Ok(vec![0.0; self.values.len()]),
        }
    }

    /// `Lap_theta w`: spectral on `S^1`, `-lambda_k w` for a single harmonic.
    pub fn angular_laplacian(&self) -> Result<Vec<f64>> {
        match self.angular {
            AngularRep::Radial => Ok(vec![0.0; self.values.len()]),
            AngularRep::PeriodicGrid { .. } => self.angular_derivative(2),
            AngularRep::SingleHarmonic { k } => {
                let lam = harmonic_eigenvalue(k, self.params.d);
                Ok(self.values.iter().map(|v| -lam * v).collect())
            }
        }
    }

    /// Writes `r,theta,value` rows (`r,value` for non-grid representations).
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let m = self.stride();
        if self.angular.has_angles() {
            writeln!(out, "r,theta,value")?;
        } else {
            writeln!(out, "r,value")?;
        }
        for i in 0..self.grid.count() {
            let s = self.grid.node(i);
            for j in 0..m {
                let v = self.values[i * m + j];
                if self.angular.has_angles() {
                    writeln!(out, "{},{},{}", fmt17(s), fmt17(self.angle(j)), fmt17(v))?;
                } else {
                    writeln!(out, "{},{}", fmt17(s), fmt17(v))?;
                }
            }
        }
        Ok(())
    }
}

/// Float with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Samples read back from a field CSV, before they are tied to a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldTable {
    pub radii: Vec<f64>,
    /// `None` for the two-column radial layout.
    pub angles: Option<Vec<f64>>,
    pub values: Vec<f64>,
}

fn csv_number(field: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("line {line}: non-finite value '{field}'")));
    }
    Ok(v)
}

/// Reads the layout written by [`CylinderField::write_csv`].
pub fn parse_field_csv(text: &str) -> Result<FieldTable> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    let with_angles = match header {
        "r,theta,value" => true,
        "r,value" => false,
        other => return Err(Error::Parse(format!("unrecognised header '{other}'"))),
    };
    let width = if with_angles { 3 } else { 2 };
    let mut radii: Vec<f64> = Vec::new();
    let mut angles: Vec<f64> = Vec::new();
    let mut values = Vec::new();
    let mut col = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != width {
            return Err(Error::Parse(format!(
                "line {lineno}: expected {width} columns, got {}",
                parts.len()
            )));
        }
        let r = csv_number(parts[0], lineno)?;
        let v = csv_number(parts[width - 1], lineno)?;
        let new_row = radii.last().is_none_or(|&last| r != last);
        if new_row {
            if let Some(&last) = radii.last() {
                if !(r > last) {
                    return Err(Error::Parse(format!("line {lineno}: radii must increase")));
                }
                if with_angles && col != angles.len() {
                    return Err(Error::Parse(format!("line {lineno}: ragged angular row")));
                }
            }
            radii.push(r);
            col = 0;
        } else if !with_angles {
            return Err(Error::Parse(format!("line {lineno}: repeated radius {r}")));
        }
        if with_angles {
            let th = csv_number(parts[1], lineno)?;
            if radii.len() == 1 {
                if angles.last().is_some_and(|&last| !(th > last)) {
                    return Err(Error::Parse(format!("line {lineno}: angles must increase")));
                }
                angles.push(th);
            } else if angles.get(col) != Some(&th) {
                return Err(Error::Parse(format!("line {lineno}: angle {th} out of pattern")));
            }
            col += 1;
        }
        values.push(v);
    }
    if radii.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    if with_angles && col != angles.len() {
        return Err(Error::Parse("ragged final angular row".into()));
    }
    Ok(FieldTable {
        radii,
        angles: with_angles.then_some(angles),
        values,
    })
}

impl CylinderField {
    /// Rebuilds a field from a table whose radii form a log-uniform grid and
    /// whose angles (if any) are the uniform grid `2 pi j / m`.
    pub fn from_table(table: &FieldTable, ps: &ParamSet) -> Result<Self> {
        let count = table.radii.len();
        if count < 2 {
            return Err(Error::InvalidGrid("a field table needs at least two radii".into()));
        }
        let grid = RadialGrid::new(table.radii[0], table.radii[count - 1], count)?;
        if let Some(i) = (0..count)
            .find(|&i| (grid.node(i) - table.radii[i]).abs() > 1e-12 * grid.node(i))
        {
            return Err(Error::InvalidGrid(format!(
                "radius {} at row {i} is off the log-uniform grid",
                table.radii[i]
            )));
        }
        let angular = match &table.angles {
            None => AngularRep::Radial,
            Some(th) => {
                let m = th.len();
                let step = 2.0 * PI / m as f64;
                if th.iter().enumerate().any(|(j, &t)| (t - j as f64 * step).abs() > 1e-12) {
                    return Err(Error::InvalidGrid("angles are not a uniform grid from 0".into()));
                }
                AngularRep::PeriodicGrid { m }
            }
        };
        CylinderField::new(grid, angular, table.values.clone(), *ps)
    }
}

/// Spectral `order`-th derivative of each row of length `m`.
pub(crate) fn spectral_derivative(values: &[f64], m: usize, order: u32) -> Vec<f64> {
    if order == 0 {
        return values.to_vec();
    }
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mult: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let freq = if j <= m / 2 { j as f64 } else { j as f64 - m as f64 };
            if m % 2 == 0 && j == m / 2 && order % 2 == 1 {
                return Complex::new(0.0, 0.0);
            }
            Complex::new(0.0, freq).powu(order) / m as f64
        })
        .collect();
    let mut out = Vec::with_capacity(values.len());
    let mut buf = vec![Complex::new(0.0, 0.0); m];
    for row in values.chunks(m) {
        for (b, &v) in buf.iter_mut().zip(row) {
            *b = Complex::new(v, 0.0);
        }
        fwd.process(&mut buf);
        for (b, c) in buf.iter_mut().zip(&mult) {
            *b *= c;
        }
        inv.process(&mut buf);
        out.extend(buf.iter().map(|c| c.re));
    }
    out
}

/// Samples `w(s, theta) = u(s^{1/alpha}, theta)` on the grid.
///
/// For a single-harmonic representation the sampler returns the radial
/// coefficient and the angle argument is 0.
pub fn to_cylinder(
    u_sampler: impl Fn(f64, f64) -> f64,
    ps: &ParamSet,
    grid: &RadialGrid,
    angular: AngularRep,
) -> Result<CylinderField> {
    let inv_alpha = 1.0 / ps.alpha;
    CylinderField::from_fn(grid, angular, ps, |s, theta| {
        u_sampler(s.powf(inv_alpha), theta)
    })
}

/// Euclidean radius corresponding to cylinder node `s`.
pub fn euclidean_radius(ps: &ParamSet, s: f64) -> f64 {
    s.powf(1.0 / ps.alpha)
}

/// Components of `D w = (alpha w', grad_theta w / s)` and `|D w|^2`.
#[derive(Clone, Debug)]
pub struct CylGradient {
    pub radial_part: CylinderField,
    /// `d_theta w / s` on `S^1`; for a single harmonic the coefficient
    /// `sqrt(lambda_k) w / s` of the normalised angular gradient.
    pub angular_part: CylinderField,
    /// `alpha^2 w'^2 + |grad_theta w|^2 / s^2`; sphere-averaged for a single harmonic.
    pub square_norm: CylinderField,
}

pub fn grad_cyl(w: &CylinderField) -> Result<CylGradient> {
    let alpha = w.params.alpha;
    let ws = w.radial_derivative()?;
    let m = w.stride();
    let radial: Vec<f64> = ws.iter().map(|v| alpha * v).collect();
    let angular: Vec<f64> = match w.angular {
        AngularRep::Radial => vec![0.0; ws.len()],
        AngularRep::PeriodicGrid { .. } => {
            let wt = w.angular_derivative(1)?;
            wt.iter()
                .enumerate()
                .map(|(k, v)| v / w.grid.node(k / m))
                .collect()
        }
        AngularRep::SingleHarmonic { k } => {
            let lam = harmonic_eigenvalue(k, w.params.d).sqrt();
            w.values
                .iter()
                .enumerate()
                .map(|(i, v)| lam * v / w.grid.node(i))
                .collect()
        }
    };
    let sq: Vec<f64> = radial
        .iter()
        .zip(&angular)
        .map(|(a, b)| a * a + b * b)
        .collect();
    Ok(CylGradient {
        radial_part: w.with_values(radial),
        angular_part: w.with_values(angular),
        square_norm: w.with_values(sq),
    })
}

/// `L w`.
pub fn apply_l(w: &CylinderField) -> Result<CylinderField> {
    let a2 = w.params.alpha * w.params.alpha;
    let nm1 = w.params.n - 1.0;
    let (ws, wss) = w.radial_derivatives()?;
    let lap = w.angular_laplacian()?;
    let m = w.stride();
    let values = (0..w.values.len())
        .map(|k| {
            let s = w.grid.node(k / m);
            a2 * (wss[k] + nm1 * ws[k] / s) + lap[k] / (s * s)
        })
        .collect();
    Ok(w.with_values(values))
}

/// `int_region f dmu`, with the sphere area for radial fields and the
/// periodic trapezoid rule on `S^1`.
pub fn integrate_mu(f: &CylinderField, region: &MeasureRegion) -> Result<f64> {
    let weights = f
        .grid
        .quadrature_weights(region.r_lo, region.r_hi, f.params.n - 1.0)?;
    let m = f.stride();
    let (angular_factor, use_rows) = match f.angular {
        AngularRep::Radial => (f.params.sphere_area(), true),
        AngularRep::SingleHarmonic { k: 0 } => (f.params.sphere_area(), true),
        // a non-constant harmonic has zero mean over the sphere
        AngularRep::SingleHarmonic { .. } => (0.0, false),
        AngularRep::PeriodicGrid { m } => (2.0 * PI / m as f64, true),
    };
    if !use_rows {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (i, &wi) in weights.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let row_sum: f64 = f.values[i * m..(i + 1) * m].iter().sum();
        total += wi * row_sum;
    }
    Ok(total * angular_factor)
}

pub fn integrate_mu_full(f: &CylinderField) -> Result<f64> {
    integrate_mu(f, &MeasureRegion::full(&f.grid))
}

/// `L w + w^{p-1}`; zero for solutions of the cylinder equation.
pub fn residual_eq_w(w: &CylinderField) -> Result<CylinderField> {
    w.require_pointwise("the cylinder equation residual")?;
    w.ensure_positive()?;
    let pm1 = w.params.p_exp - 1.0;
    let lw = apply_l(w)?;
    Ok(lw.zip_with(w, |l, v| l + v.powf(pm1)))
}

/// `alpha^{1-2/p} (int |w|^p dmu)^{2/p} / int |D w|^2 dmu` over the whole grid.
pub fn ckn_rayleigh(w: &CylinderField) -> Result<f64> {
    w.require_pointwise("the Rayleigh quotient")?;
    w.ensure_positive()?;
    let p = w.params.p_exp;
    let num = integrate_mu_full(&w.map(|v| v.powf(p)))?;
    let den = integrate_mu_full(&grad_cyl(w)?.square_norm)?;
    if !(den > 0.0) || !den.is_finite() || !num.is_finite() {
        return Err(Error::DegenerateDenominator);
    }
    Ok(w.params.alpha.powf(1.0 - 2.0 / p) * num.powf(2.0 / p) / den)
}
