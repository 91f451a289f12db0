//! Integral estimates as measurable growth laws.
//!
//! Every "for all R" statement is sampled on dyadic radii and summarised by a
//! least-squares log-log fit. Integrals "over (0, R)" start at the first grid
//! node; the change from halving that start is reported where it matters.

use serde::Serialize;

use crate::cylfield::{apply_l, grad_cyl, integrate_mu, CylinderField, MeasureRegion};
use crate::error::{Error, Result};
use crate::fit::{fit_loglog, LogLogFit};
use crate::grid::gauss_legendre;
use crate::params::ParamSet;
use crate::pressure::{bochner_decomposition, pressure_of, PressureField};

/// `sup |S'|` for the quintic smoothstep `S(t) = 6t^5 - 15t^4 + 10t^3`.
pub const CUTOFF_PROFILE_CONSTANT: f64 = 15.0 / 8.0;

/// Fewest radii accepted by the growth fits.
pub const MIN_RADII: usize = 6;

/// `eta(r) = S((2R - r)/R)`: one on `[0, R]`, zero beyond `2R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cutoff {
    pub radius: f64,
    pub s_power: f64,
    /// `sup |eta'| * R`.
    pub c_profile: f64,
}

pub fn make_cutoff(radius: f64, s_power: f64) -> Result<Cutoff> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidInput(format!("cutoff radius {radius} must be positive")));
    }
    if !(s_power >= 2.0 && s_power.is_finite()) {
        return Err(Error::InvalidInput(format!("cutoff power {s_power} must be >= 2")));
    }
    Ok(Cutoff {
        radius,
        s_power,
        c_profile: CUTOFF_PROFILE_CONSTANT,
    })
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (6.0 * t - 15.0))
}

fn smoothstep_slope(t: f64) -> f64 {
    if !(0.0..=1.0).contains(&t) {
        return 0.0;
    }
    30.0 * t * t * (1.0 - t) * (1.0 - t)
}

impl Cutoff {
    pub fn eta(&self, r: f64) -> f64 {
        smoothstep((2.0 * self.radius - r) / self.radius)
    }

    pub fn eta_prime(&self, r: f64) -> f64 {
        -smoothstep_slope((2.0 * self.radius - r) / self.radius) / self.radius
    }

    /// `int_{(R,2R)} |eta'|^{n-1} eta^{s-n+1} dmu` for a radial measure of
    /// intrinsic dimension `n` on `S^{d-1}`.
    pub fn young_mass(&self, ps: &ParamSet) -> f64 {
        let n = ps.n;
        let e = self.s_power - n + 1.0;
        let f = |r: f64| {
            self.eta_prime(r).abs().powf(n - 1.0) * self.eta(r).powf(e) * r.powf(n - 1.0)
        };
        ps.sphere_area() * gauss_legendre(f, self.radius, 2.0 * self.radius, 64)
    }

    /// Samples `eta^power` on the grid of `like`.
    fn power_field(&self, like: &CylinderField, power: f64) -> CylinderField {
        like.map_with_radius(|s, _| self.eta(s).powf(power))
    }

    fn slope_square_field(&self, like: &CylinderField) -> CylinderField {
        like.map_with_radius(|s, _| {
            let d = self.eta_prime(s);
            d * d
        })
    }
}

fn product(a: &CylinderField, b: &CylinderField) -> CylinderField {
    a.zip_with(b, |x, y| x * y)
}

fn require_symmetric(ps: &ParamSet) -> Result<()> {
    if !ps.is_symmetric() {
        return Err(Error::RegimeViolation {
            alpha: ps.alpha,
            threshold: ps.fs_threshold,
        });
    }
    Ok(())
}

fn require_radii(radii: &[f64], grid_max: f64, factor: f64) -> Result<()> {
    if radii.len() < MIN_RADII {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_RADII} radii, got {}",
            radii.len()
        )));
    }
    if let Some(&r) = radii.iter().find(|&&r| !(r > 0.0) || factor * r > grid_max * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput(format!(
            "radius {r} needs the grid to reach {}, but it ends at {grid_max}",
            factor * r
        )));
    }
    Ok(())
}

fn up_to(f: &CylinderField, hi: f64) -> Result<f64> {
    integrate_mu(f, &MeasureRegion::new(f.grid().r_min(), hi)?)
}

fn annulus(f: &CylinderField, lo: f64, hi: f64) -> Result<f64> {
    integrate_mu(f, &MeasureRegion::new(lo, hi)?)
}

/// `P^{1-n} k[P]` with `k` summed from its decomposition.
fn defect_density(pf: &PressureField) -> Result<CylinderField> {
    let k = bochner_decomposition(pf)?.sum();
    Ok(product(&pf.weight(), &k))
}

/// `P^{1-n} |DP|^2`.
fn gradient_density(pf: &PressureField) -> CylinderField {
    product(&pf.weight(), &pf.grad_square())
}

/// Both sides of the cutoff integral inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IntIneqSides {
    /// `int P^{1-n} k[P] eta^s dmu`
    pub lhs: f64,
    /// `int P^{1-n} |DP|^2 |eta'|^2 dmu`
    pub rhs_weighted: f64,
    /// `lhs / rhs_weighted`, the smallest constant that works here.
    pub ratio: f64,
}

pub fn int_ineq_sides(pf: &PressureField, cut: &Cutoff) -> Result<IntIneqSides> {
    let field = pf.field();
    require_symmetric(field.params())?;
    let hi = 2.0 * cut.radius;
    let eta_s = cut.power_field(field, cut.s_power);
    let lhs = up_to(&product(&defect_density(pf)?, &eta_s), hi)?;
    let slope2 = cut.slope_square_field(field);
    let rhs_weighted = annulus(&product(&gradient_density(pf), &slope2), cut.radius, hi)?;
    Ok(IntIneqSides {
        lhs,
        rhs_weighted,
        ratio: lhs / rhs_weighted,
    })
}

/// Comparison with `A s^{2-n}` outside the sphere `{s = rho}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LowerBound {
    /// `rho^{n-2} min_theta w(rho, theta)`.
    #[serde(rename = "A")]
    pub a: f64,
    /// The grid radius used as `rho` (first node at or beyond the request).
    pub rho: f64,
    /// `min (w - A s^{2-n})` over `s >= rho`.
    pub min_margin: f64,
    /// Log-log slope of `min_theta w` over the last decade of the grid.
    pub tail_slope: f64,
}

/// Relative slack allowed in `L w <= 0`, measured against the size of the
/// individual terms of `L w` at each node.
pub const SUPERHARMONIC_SLACK: f64 = 1e-7;

pub fn superharmonic_lower_bound(w: &CylinderField, rho: f64) -> Result<LowerBound> {
    w.ensure_positive()?;
    let grid = w.grid();
    let ps = w.params();
    let n = ps.n;
    let first = grid
        .nodes()
        .iter()
        .position(|&s| s >= rho * (1.0 - 1e-12))
        .ok_or_else(|| Error::InvalidInput(format!("rho={rho} beyond the grid")))?;
    let lw = apply_l(w)?;
    let (ws, wss) = w.radial_derivatives()?;
    let lap = w.angular_laplacian()?;
    let a2 = ps.alpha * ps.alpha;
    let m = w.stride();
    for i in first..grid.count() {
        if !grid.is_interior(i) {
            continue;
        }
        let s = grid.node(i);
        for j in 0..m {
            let k = i * m + j;
            let scale = a2 * (wss[k].abs() + (n - 1.0) * (ws[k] / s).abs()) + lap[k].abs() / (s * s);
            if lw.values()[k] > SUPERHARMONIC_SLACK * scale {
                return Err(Error::NotSuperharmonic {
                    index: k,
                    value: lw.values()[k],
                });
            }
        }
    }
    let row_min = |i: usize| w.row(i).iter().copied().fold(f64::INFINITY, f64::min);
    let rho_used = grid.node(first);
    let a = rho_used.powf(n - 2.0) * row_min(first);
    let mut min_margin = f64::INFINITY;
    for i in first..grid.count() {
        let s = grid.node(i);
        let bound = a * s.powf(2.0 - n);
        for &v in w.row(i) {
            min_margin = min_margin.min(v - bound);
        }
    }
    let lo = grid.r_max() / 10.0;
    let (xs, ys): (Vec<f64>, Vec<f64>) = (0..grid.count())
        .filter(|&i| grid.is_interior(i) && grid.node(i) >= lo)
        .map(|i| (grid.node(i), row_min(i)))
        .unzip();
    let tail_slope = fit_loglog(&xs, &ys)?.slope;
    Ok(LowerBound {
        a,
        rho: rho_used,
        min_margin,
        tail_slope,
    })
}

/// Growth exponent bound of the weak energy estimate.
pub fn weak_energy_beta(n: f64, t: f64) -> f64 {
    if t > -2.0 {
        -(n - 2.0) * t / 2.0
    } else {
        -(n - 2.0) * (1.0 + t)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakEnergy {
    pub t: f64,
    pub beta: f64,
    pub radii: Vec<f64>,
    /// `int_{(0,R)} w^{p+t} dmu`
    pub values_a: Vec<f64>,
    /// `int_{(0,R)} w^t |Dw|^2 dmu`
    pub values_b: Vec<f64>,
    pub fit_a: LogLogFit,
    pub fit_b: LogLogFit,
    /// Relative change of the largest-radius values when the inner end is doubled.
    pub r_min_sensitivity: f64,
}

impl WeakEnergy {
    pub fn fitted_exponents(&self) -> (f64, f64) {
        (self.fit_a.slope, self.fit_b.slope)
    }

    /// Both fitted exponents are at most `beta + slack`.
    pub fn within(&self, slack: f64) -> bool {
        self.fit_a.slope <= self.beta + slack && self.fit_b.slope <= self.beta + slack
    }
}

pub fn weak_energy(w: &CylinderField, t: f64, radii: &[f64]) -> Result<WeakEnergy> {
    if !(t < -1.0) {
        return Err(Error::BadExponent(t));
    }
    w.ensure_positive()?;
    let grid = w.grid();
    require_radii(radii, grid.r_max(), 1.0)?;
    let ps = w.params();
    let n = ps.n;
    let pt = ps.p_exp + t;
    let fa = w.map(|v| v.powf(pt));
    let grad = grad_cyl(w)?;
    let fb = w.zip_with(&grad.square_norm, |v, g| v.powf(t) * g);
    let mut values_a = Vec::with_capacity(radii.len());
    let mut values_b = Vec::with_capacity(radii.len());
    for &r in radii {
        values_a.push(up_to(&fa, r)?);
        values_b.push(up_to(&fb, r)?);
    }
    let last = *radii.last().expect("radii checked non-empty");
    let shifted = MeasureRegion::new(2.0 * grid.r_min(), last)?;
    let total = values_a[radii.len() - 1] + values_b[radii.len() - 1];
    let shifted_total = integrate_mu(&fa, &shifted)? + integrate_mu(&fb, &shifted)?;
    Ok(WeakEnergy {
        t,
        beta: weak_energy_beta(n, t),
        radii: radii.to_vec(),
        fit_a: fit_loglog(radii, &values_a)?,
        fit_b: fit_loglog(radii, &values_b)?,
        values_a,
        values_b,
        r_min_sensitivity: (total - shifted_total).abs() / total.abs(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Teo1Chain {
    pub radii: Vec<f64>,
    /// `int_{(0,R)} P^{1-n} |DP|^2 dmu`
    pub grad_integrals: Vec<f64>,
    /// `R^{-2} int_{(0,2R)} P^{1-n} |DP|^2 dmu`
    pub defect_bounds: Vec<f64>,
    /// `int_{(0,2R)} P^{1-n} k[P] dmu`
    pub defects: Vec<f64>,
    pub growth: LogLogFit,
    pub decay: LogLogFit,
}

impl Teo1Chain {
    pub fn grad_integral_growth(&self) -> f64 {
        self.growth.slope
    }

    pub fn defect_decay(&self) -> f64 {
        self.decay.slope
    }

    /// Growth below 2, so the `R^{-2}` bound on the defect tends to zero.
    pub fn closes(&self) -> bool {
        self.growth.slope < 2.0 && self.decay.slope < 0.0
    }
}

pub fn teo1_chain(pf: &PressureField, radii: &[f64]) -> Result<Teo1Chain> {
    let field = pf.field();
    let ps = field.params();
    require_symmetric(ps)?;
    if !(ps.n > 2.0 && ps.n < 4.0) {
        return Err(Error::RangeViolation(format!("need 2 < n < 4, got n={}", ps.n)));
    }
    require_radii(radii, field.grid().r_max(), 2.0)?;
    let g = gradient_density(pf);
    let k = defect_density(pf)?;
    let mut grad_integrals = Vec::with_capacity(radii.len());
    let mut defect_bounds = Vec::with_capacity(radii.len());
    let mut defects = Vec::with_capacity(radii.len());
    for &r in radii {
        grad_integrals.push(up_to(&g, r)?);
        defect_bounds.push(up_to(&g, 2.0 * r)? / (r * r));
        defects.push(up_to(&k, 2.0 * r)?);
    }
    Ok(Teo1Chain {
        growth: fit_loglog(radii, &grad_integrals)?,
        decay: fit_loglog(radii, &defect_bounds)?,
        radii: radii.to_vec(),
        grad_integrals,
        defect_bounds,
        defects,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Teo2Chain {
    pub radii: Vec<f64>,
    /// `int_{(R,2R)} P^{1-n} |DP|^2 dmu`, the annulus term of the proof.
    pub tail_energy: Vec<f64>,
    /// `int_{(R,2R)} |Dw|^2 dmu`
    pub dirichlet_tail: Vec<f64>,
    /// `int_{(0,R)} P^{1-n} k[P] dmu`
    pub defects: Vec<f64>,
    /// `R^{-2}` times the annulus term, which bounds the defect.
    pub defect_bounds: Vec<f64>,
    /// `None` when the tail vanishes identically.
    pub tail_fit: Option<LogLogFit>,
    pub dirichlet_fit: Option<LogLogFit>,
    /// The defect at the largest radius.
    pub defect_limit: f64,
}

/// Slope below which dyadic annulus energies count as summable.
pub const FINITE_ENERGY_SLOPE: f64 = -0.1;

/// Treats values at rounding level relative to `scale` as vanishing.
fn optional_fit(xs: &[f64], ys: &[f64], scale: f64) -> Result<Option<LogLogFit>> {
    let floor = f64::EPSILON * f64::EPSILON * scale.abs();
    if ys.iter().any(|&v| v.abs() <= floor) {
        return Ok(None);
    }
    fit_loglog(xs, ys).map(Some)
}

pub fn teo2_chain(w: &CylinderField, radii: &[f64]) -> Result<Teo2Chain> {
    require_radii(radii, w.grid().r_max(), 2.0)?;
    let grad = grad_cyl(w)?;
    let mut dirichlet_tail = Vec::with_capacity(radii.len());
    for &r in radii {
        dirichlet_tail.push(annulus(&grad.square_norm, r, 2.0 * r)?);
    }
    let full = integrate_mu(&grad.square_norm, &MeasureRegion::full(w.grid()))?;
    let dirichlet_fit = optional_fit(radii, &dirichlet_tail, full)?;
    if let Some(f) = dirichlet_fit {
        if !(f.slope < FINITE_ENERGY_SLOPE) {
            return Err(Error::NotFiniteEnergy(f.slope));
        }
    }
    let pf = pressure_of(w)?;
    let g = gradient_density(&pf);
    let k = defect_density(&pf)?;
    let mut tail_energy = Vec::with_capacity(radii.len());
    let mut defects = Vec::with_capacity(radii.len());
    let mut defect_bounds = Vec::with_capacity(radii.len());
    for &r in radii {
        let tail = annulus(&g, r, 2.0 * r)?;
        tail_energy.push(tail);
        defect_bounds.push(tail / (r * r));
        defects.push(up_to(&k, r)?);
    }
    Ok(Teo2Chain {
        tail_fit: optional_fit(radii, &tail_energy, integrate_mu(&g, &MeasureRegion::full(w.grid()))?)?,
        dirichlet_fit,
        defect_limit: *defects.last().expect("radii checked non-empty"),
        radii: radii.to_vec(),
        tail_energy,
        dirichlet_tail,
        defects,
        defect_bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::{bubble_cylinder, bubble_cylinder_on, BubbleSpec};
    use crate::cylfield::AngularRep;
    use crate::fit::dyadic;
    use crate::grid::RadialGrid;
    use crate::params::{derive_params, sphere_area};
    use crate::pressure::from_pressure;

    #[test]
    fn cutoff_shape() {
        let c = make_cutoff(3.0, 4.0).unwrap();
        assert_eq!(c.eta(3.0), 1.0);
        assert_eq!(c.eta(1.0), 1.0);
        assert_eq!(c.eta(6.0), 0.0);
        assert!((c.eta(4.5) - 0.5).abs() < 1e-15);
        assert!((c.eta_prime(4.5).abs() * 3.0 - CUTOFF_PROFILE_CONSTANT).abs() < 1e-14);
        let sup = (0..=3000)
            .map(|k| c.eta_prime(3.0 + k as f64 * 1e-3).abs())
            .fold(0.0, f64::max);
        assert!(sup * 3.0 <= CUTOFF_PROFILE_CONSTANT + 1e-15);
        assert!(make_cutoff(-1.0, 2.0).is_err());
        assert!(make_cutoff(1.0, 1.5).is_err());
    }

    #[test]
    fn cutoff_young_mass_is_linear_in_radius() {
        for (a, b, d) in [(-0.1, 0.1, 2), (0.0, 0.0, 3), (0.0, 1.0 / 7.0, 3)] {
            let ps = derive_params(a, b, d).unwrap();
            let masses: Vec<f64> = dyadic(1.0, 6)
                .iter()
                .map(|&r| make_cutoff(r, 4.0).unwrap().young_mass(&ps))
                .collect();
            let fit = fit_loglog(&dyadic(1.0, 6), &masses).unwrap();
            assert!((fit.slope - 1.0).abs() < 1e-10);
            let c = masses[0];
            assert!(masses.iter().zip(dyadic(1.0, 6)).all(|(m, r)| *m <= c * r * (1.0 + 1e-10)));
        }
    }

    #[test]
    fn int_ineq_on_bubble() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let pf = pressure_of(&bubble_cylinder(&ps).unwrap()).unwrap();
        let radii = dyadic(4.0, 6);
        let rhs: Vec<f64> = radii
            .iter()
            .map(|&r| {
                let sides = int_ineq_sides(&pf, &make_cutoff(r, 2.0).unwrap()).unwrap();
                assert!(sides.lhs.abs() < 1e-8 && sides.rhs_weighted > 0.0);
                sides.rhs_weighted
            })
            .collect();
        let fit = fit_loglog(&radii, &rhs).unwrap();
        assert!((fit.slope - (2.0 - ps.n)).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn int_ineq_needs_symmetric_regime() {
        // d = 3, n = 6 beyond the threshold alpha = sqrt(2/5)
        let ps = derive_params(-1.2, -0.7, 3).unwrap();
        assert!(!ps.is_symmetric());
        let g = RadialGrid::new(0.1, 10.0, 64).unwrap();
        let w = bubble_cylinder_on(&ps, &g, AngularRep::Radial, 1.0).unwrap();
        let pf = pressure_of(&w).unwrap();
        assert!(matches!(
            int_ineq_sides(&pf, &make_cutoff(1.0, 2.0).unwrap()),
            Err(Error::RegimeViolation { .. })
        ));
    }

    #[test]
    fn int_ineq_reports_for_non_solution() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let g = RadialGrid::new(0.1, 100.0, 512).unwrap();
        let lin = CylinderField::from_fn(&g, AngularRep::Radial, &ps, |s, _| s).unwrap();
        let sides = int_ineq_sides(&from_pressure(&lin).unwrap(), &make_cutoff(2.0, 2.0).unwrap())
            .unwrap();
        assert!(sides.lhs > 0.0 && sides.rhs_weighted > 0.0 && sides.ratio.is_finite());
    }

    #[test]
    fn lower_bound_for_bubble_and_harmonic() {
        let ps = derive_params(0.0, 0.0, 3).unwrap();
        let w = bubble_cylinder(&ps).unwrap();
        let lb = superharmonic_lower_bound(&w, 1.0).unwrap();
        let spec = BubbleSpec::unit(&ps).unwrap();
        let expect = lb.rho * spec.cylinder_jet(lb.rho).0;
        assert!((lb.a - expect).abs() < 1e-14);
        assert!((lb.rho - 1.0).abs() < 1e-2);
        assert!((lb.a - 0.930_605).abs() < 1e-2);
        assert!(lb.min_margin >= -1e-10);
        assert!((lb.tail_slope - (2.0 - ps.n)).abs() < 1e-3);

        let h = CylinderField::from_fn(w.grid(), AngularRep::Radial, &ps, |s, _| s.powf(2.0 - ps.n))
            .unwrap();
        let lb = superharmonic_lower_bound(&h, 1.0).unwrap();
        assert!((lb.a - 1.0).abs() < 1e-14);
        assert!(lb.min_margin.abs() < 1e-14);

        let mixed = w.zip_with(&h, |a, b| a + 0.1 * b);
        let lb = superharmonic_lower_bound(&mixed, 1.0).unwrap();
        assert!(lb.min_margin >= -1e-10);
    }

    #[test]
    fn lower_bound_rejects_subharmonic() {
        let ps = derive_params(0.0, 0.0, 3).unwrap();
        let g = RadialGrid::new(0.5, 10.0, 128).unwrap();
        let w = CylinderField::from_fn(&g, AngularRep::Radial, &ps, |s, _| 1.0 + s * s).unwrap();
        assert!(matches!(
            superharmonic_lower_bound(&w, 1.0),
            Err(Error::NotSuperharmonic { .. })
        ));
    }

    #[test]
    fn weak_energy_exponents() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let w = bubble_cylinder(&ps).unwrap();
        let radii = dyadic(16.0, 6);
        let e = weak_energy(&w, -1.5, &radii).unwrap();
        assert_eq!(e.beta, 3.0);
        // w^{p+t} dmu ~ s^{-1} ds: logarithmic growth
        assert!(e.fit_a.slope < 0.5 && (e.fit_b.slope - 2.0).abs() < 0.05);
        assert!(e.within(0.1), "{:?}", e.fitted_exponents());
        let e = weak_energy(&w, -2.5, &radii).unwrap();
        assert_eq!(e.beta, 6.0);
        assert!((e.fit_a.slope - 4.0).abs() < 0.05 && e.within(0.1), "{:?}", e.fitted_exponents());
        assert!(matches!(weak_energy(&w, -1.0, &radii), Err(Error::BadExponent(_))));
        assert!(weak_energy(&w, -2.0, &radii[..3]).is_err());
    }

    #[test]
    fn teo1_growth_matches_four_minus_n() {
        let ps = derive_params(0.0, 0.0, 3).unwrap();
        let grid = RadialGrid::with_default_spacing(1e-3, 1e5).unwrap();
        let w = bubble_cylinder_on(&ps, &grid, AngularRep::Radial, 1.0).unwrap();
        let chain = teo1_chain(&pressure_of(&w).unwrap(), &dyadic(256.0, 7)).unwrap();
        assert!((chain.grad_integral_growth() - 1.0).abs() < 0.05);
        assert!(chain.closes());
        assert!(chain.defects.iter().all(|d| d.abs() < 1e-8));

        let ps6 = derive_params(-0.5, 0.0, 3).unwrap();
        let w6 = bubble_cylinder(&ps6).unwrap();
        assert!(matches!(
            teo1_chain(&pressure_of(&w6).unwrap(), &dyadic(4.0, 6)),
            Err(Error::RangeViolation(_))
        ));
    }

    #[test]
    fn teo2_tail_decay() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let w = bubble_cylinder(&ps).unwrap();
        let chain = teo2_chain(&w, &dyadic(8.0, 6)).unwrap();
        let tail = chain.tail_fit.unwrap();
        assert!((tail.slope - (4.0 - ps.n)).abs() < 0.05, "{tail:?}");
        let dir = chain.dirichlet_fit.unwrap();
        assert!((dir.slope - (2.0 - ps.n)).abs() < 0.05);
        assert!(chain.defect_limit.abs() < 1e-8);
    }

    #[test]
    fn teo2_compact_support_and_divergent_energy() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let g = RadialGrid::new(0.01, 300.0, 1024).unwrap();
        let bump = CylinderField::from_fn(&g, AngularRep::Radial, &ps, |s, _| {
            let c = make_cutoff(1.0, 2.0).unwrap();
            1e-3 + c.eta(s)
        })
        .unwrap();
        let chain = teo2_chain(&bump, &dyadic(4.0, 6)).unwrap();
        assert!(chain.dirichlet_tail.iter().all(|&v| v.abs() < 1e-20));
        assert!(chain.dirichlet_fit.is_none());

        // w = s^{-1} has |Dw|^2 dmu ~ s^{n-5} ds, growing for n = 6
        let slow = CylinderField::from_fn(&g, AngularRep::Radial, &ps, |s, _| 1.0 / s).unwrap();
        assert!(matches!(
            teo2_chain(&slow, &dyadic(1.0, 6)),
            Err(Error::NotFiniteEnergy(_))
        ));
    }

    #[test]
    fn measure_of_cutoff_annulus() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let g = RadialGrid::new(0.5, 8.0, 1024).unwrap();
        let c = make_cutoff(2.0, 2.0).unwrap();
        let f = c.slope_square_field(&CylinderField::from_fn(&g, AngularRep::Radial, &ps, |_, _| 0.0).unwrap());
        let quad = annulus(&f, 2.0, 4.0).unwrap();
        let oracle = sphere_area(3)
            * gauss_legendre(|r| c.eta_prime(r).powi(2) * r.powf(ps.n - 1.0), 2.0, 4.0, 200);
        assert!((quad / oracle - 1.0).abs() < 1e-9);
    }
}
