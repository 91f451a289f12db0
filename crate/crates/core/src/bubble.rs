//! The explicit extremal family and its scalings.
//!
//! In Euclidean variables `U(r) = c0 (1 + r^{2 alpha})^{-(n-2)/2}`, in
//! cylinder variables `w(s) = c0 (1 + s^2)^{-(n-2)/2}`. Scaling by `lambda`
//! acts as `u -> lambda^kappa u(lambda x)`, `kappa = a_c - a`.

use crate::cylfield::{AngularRep, CylinderField};
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::params::ParamSet;

/// A member of the extremal family.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BubbleSpec {
    pub ps: ParamSet,
    pub lambda: f64,
    pub c0: f64,
}

/// `c0 = (d (p-2) kappa^2 / (1+a-b))^{1/(p-2)}`.
pub fn bubble_prefactor(ps: &ParamSet) -> f64 {
    let d = ps.d as f64;
    let pm2 = ps.p_exp - 2.0;
    (d * pm2 * ps.kappa * ps.kappa / (1.0 + ps.a - ps.b)).powf(1.0 / pm2)
}

fn require_bubble_params(ps: &ParamSet) -> Result<()> {
    if !(ps.n.is_finite() && ps.n > 2.0 && ps.alpha > 0.0) {
        return Err(Error::SubcriticalRange {
            p: ps.p_exp,
            p_star: crate::params::sobolev_exponent(ps.d),
        });
    }
    Ok(())
}

impl BubbleSpec {
    pub fn new(ps: &ParamSet, lambda: f64) -> Result<Self> {
        require_bubble_params(ps)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "scaling parameter must be positive, got {lambda}"
            )));
        }
        Ok(BubbleSpec {
            ps: *ps,
            lambda,
            c0: bubble_prefactor(ps),
        })
    }

    /// The unscaled bubble, `lambda = 1`.
    pub fn unit(ps: &ParamSet) -> Result<Self> {
        Self::new(ps, 1.0)
    }

    fn exponent(&self) -> f64 {
        self.ps.lambda_ef()
    }

    /// `(u, u', u'')` in the Euclidean radius, differentiated analytically.
    pub fn euclidean_jet(&self, radius: f64) -> (f64, f64, f64) {
        let two_alpha = 2.0 * self.ps.alpha;
        let big_l = self.exponent();
        let amp = self.lambda.powf(self.ps.kappa) * self.c0;
        let x = self.lambda * radius;
        let g = x.powf(two_alpha);
        let base = (1.0 + g).powf(-big_l);
        let u = amp * base;
        if radius == 0.0 {
            return (u, f64::NAN, f64::NAN);
        }
        // g' = 2 alpha g / r,  g'' = 2 alpha (2 alpha - 1) g / r^2
        let gp = two_alpha * g / radius;
        let gpp = two_alpha * (two_alpha - 1.0) * g / (radius * radius);
        let inv = 1.0 / (1.0 + g);
        let du = -big_l * u * inv * gp;
        let d2u = u * (big_l * (big_l + 1.0) * inv * inv * gp * gp - big_l * inv * gpp);
        (u, du, d2u)
    }

    /// `(w, w', w'')` of the scaled bubble in the cylinder variable.
    pub fn cylinder_jet(&self, s: f64) -> (f64, f64, f64) {
        let big_l = self.exponent();
        let mu2 = self.lambda.powf(2.0 * self.ps.alpha);
        let amp = self.lambda.powf(self.ps.kappa) * self.c0;
        let q = 1.0 + mu2 * s * s;
        let w = amp * q.powf(-big_l);
        let qp = 2.0 * mu2 * s;
        let qpp = 2.0 * mu2;
        let inv = 1.0 / q;
        let dw = -big_l * w * inv * qp;
        let d2w = w * (big_l * (big_l + 1.0) * inv * inv * qp * qp - big_l * inv * qpp);
        (w, dw, d2w)
    }
}

/// `lambda^kappa U(lambda r)`; at `r = 0` this is `lambda^kappa c0`.
pub fn eval_bubble(spec: &BubbleSpec, radius: f64) -> f64 {
    spec.euclidean_jet(radius).0
}

/// `r^{-2a}(u'' + (d-1-2a) u'/r) + r^{-bp} u^{p-1}` for a radial profile
/// given by its value and first two derivatives at `radius`.
pub fn radial_residual(ps: &ParamSet, radius: f64, u: f64, du: f64, d2u: f64) -> f64 {
    let d = ps.d as f64;
    let lin = radius.powf(-2.0 * ps.a) * (d2u + (d - 1.0 - 2.0 * ps.a) * du / radius);
    lin + radius.powf(-ps.b * ps.p_exp) * u.powf(ps.p_exp - 1.0)
}

/// The Euclidean equation residual of the bubble, from analytic derivatives.
pub fn residual_euclidean(spec: &BubbleSpec, radius: f64) -> f64 {
    let (u, du, d2u) = spec.euclidean_jet(radius);
    radial_residual(&spec.ps, radius, u, du, d2u)
}

/// Residual divided by the largest of its three terms. At large `r` the two
/// linear terms nearly cancel and can exceed the nonlinear one by orders of
/// magnitude.
pub fn relative_residual_euclidean(spec: &BubbleSpec, radius: f64) -> f64 {
    let ps = &spec.ps;
    let (u, du, d2u) = spec.euclidean_jet(radius);
    let weight = radius.powf(-2.0 * ps.a);
    let scale = (weight * d2u)
        .abs()
        .max((weight * (ps.d as f64 - 1.0 - 2.0 * ps.a) * du / radius).abs())
        .max(radius.powf(-ps.b * ps.p_exp) * u.powf(ps.p_exp - 1.0));
    radial_residual(ps, radius, u, du, d2u) / scale
}

/// Residual of the cylinder equation `-L w = w^{p-1}` from analytic derivatives.
pub fn residual_cylinder_analytic(spec: &BubbleSpec, s: f64) -> f64 {
    let ps = &spec.ps;
    let (w, dw, d2w) = spec.cylinder_jet(s);
    let a2 = ps.alpha * ps.alpha;
    a2 * (d2w + (ps.n - 1.0) * dw / s) + w.powf(ps.p_exp - 1.0)
}

/// `kappa = a_c - a`, the exponent with `u -> lambda^kappa u(lambda x)` a symmetry.
pub fn scaling_exponent(ps: &ParamSet) -> f64 {
    ps.kappa
}

/// The unit bubble on the default grid, radial representation.
pub fn bubble_cylinder(ps: &ParamSet) -> Result<CylinderField> {
    bubble_cylinder_on(ps, &RadialGrid::default(), AngularRep::Radial, 1.0)
}

/// The `lambda`-scaled bubble `lambda^kappa c0 (1 + lambda^{2 alpha} s^2)^{-(n-2)/2}`,
/// constant in angle.
pub fn bubble_cylinder_on(
    ps: &ParamSet,
    grid: &RadialGrid,
    angular: AngularRep,
    lambda: f64,
) -> Result<CylinderField> {
    let spec = BubbleSpec::new(ps, lambda)?;
    CylinderField::from_fn(grid, angular, ps, |s, _| spec.cylinder_jet(s).0)
}

/// Leading coefficient `A` of the bubble pressure `A (1 + s^2)`.
pub fn pressure_coefficient(ps: &ParamSet) -> Result<f64> {
    require_bubble_params(ps)?;
    Ok((ps.n - 1.0) * bubble_prefactor(ps).powf(-2.0 / (ps.n - 2.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cylfield::{apply_l, ckn_rayleigh, residual_eq_w};
    use crate::params::derive_params;

    fn sets() -> Vec<ParamSet> {
        [
            (0.0, 0.0, 3),
            (-0.5, 0.0, 3),
            (0.0, 0.4, 3),
            (-0.1, 0.1, 2),
            (0.3, 0.5, 4),
        ]
        .iter()
        .map(|&(a, b, d)| derive_params(a, b, d).unwrap())
        .collect()
    }

    #[test]
    fn values_at_known_points() {
        let ps = derive_params(0.0, 0.0, 3).unwrap();
        let b = BubbleSpec::unit(&ps).unwrap();
        assert!((b.c0 - 3f64.powf(0.25)).abs() < 1e-15);
        assert!((eval_bubble(&b, 0.0) - 1.316_074_012_952_492).abs() < 1e-14);
        assert!((eval_bubble(&b, 1.0) - 3f64.powf(0.25) / 2f64.sqrt()).abs() < 1e-15);

        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let b = BubbleSpec::unit(&ps).unwrap();
        assert!((b.c0 - 6.0).abs() < 1e-13);
        assert!((eval_bubble(&b, 1.0) - 1.5).abs() < 1e-13);
    }

    #[test]
    fn euclidean_residual_vanishes() {
        for ps in sets() {
            let b = BubbleSpec::new(&ps, 1.7).unwrap();
            for r in [1e-3, 0.1, 1.0, 10.0, 1e3] {
                let rel = relative_residual_euclidean(&b, r);
                assert!(rel.abs() < 1e-11, "{ps:?} r={r}: {rel}");
            }
        }
    }

    #[test]
    fn residual_detects_non_solutions() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let c = 2.0;
        let r = 1.3;
        let res = radial_residual(&ps, r, c, 0.0, 0.0);
        let expect = c.powf(ps.p_exp - 1.0) * r.powf(-ps.b * ps.p_exp);
        assert!((res - expect).abs() < 1e-14);

        let mut doubled = BubbleSpec::unit(&ps).unwrap();
        doubled.c0 *= 2.0;
        assert!(residual_euclidean(&doubled, 1.0) > 0.0);
    }

    #[test]
    fn bubble_is_decreasing() {
        for ps in sets() {
            let b = BubbleSpec::new(&ps, 0.8).unwrap();
            let mut last = eval_bubble(&b, 0.0);
            assert!((last - 0.8f64.powf(ps.kappa) * b.c0).abs() < 1e-14 * last);
            for k in 1..200 {
                let v = eval_bubble(&b, 0.05 * k as f64);
                assert!(v < last);
                last = v;
            }
        }
    }

    #[test]
    fn cylinder_matches_euclidean() {
        for ps in sets() {
            let b = BubbleSpec::unit(&ps).unwrap();
            let w = bubble_cylinder(&ps).unwrap();
            for (i, &s) in w.grid().nodes().iter().enumerate().step_by(7) {
                let u = eval_bubble(&b, s.powf(1.0 / ps.alpha));
                let rel = (w.value(i, 0) - u).abs() / u;
                assert!(rel < 1e-12, "{rel}");
            }
        }
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let w = bubble_cylinder(&ps).unwrap();
        let s = 2.0;
        let i = w.grid().nearest_index(s);
        let s = w.grid().node(i);
        assert!((w.value(i, 0) - 6.0 * (1.0 + s * s).powi(-2)).abs() < 1e-13);
    }

    #[test]
    fn cylinder_residual_small() {
        for ps in sets() {
            let w = bubble_cylinder(&ps).unwrap();
            let res = residual_eq_w(&w).unwrap();
            let scale = w.map(|v| v.powf(ps.p_exp - 1.0)).max_abs();
            // sample roundoff is amplified by 1/(h s)^2 below s ~ 0.05
            assert!(res.max_abs_in(0.05, 1e3) / scale < 1e-8);
            let spec = BubbleSpec::unit(&ps).unwrap();
            for &s in w.grid().nodes() {
                let r = residual_cylinder_analytic(&spec, s) / scale;
                assert!(r.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tail_slope() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let spec = BubbleSpec::unit(&ps).unwrap();
        let (s1, s2) = (1e3, 2e3);
        let slope = (spec.cylinder_jet(s2).0 / spec.cylinder_jet(s1).0).ln() / 2f64.ln();
        assert!((slope - (2.0 - ps.n)).abs() < 1e-3);
        let lim = spec.cylinder_jet(1e5).0 * 1e5f64.powf(ps.n - 2.0);
        assert!((lim / spec.c0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn scaling_preserves_solutions() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        assert_eq!(scaling_exponent(&ps), 1.0);
        assert_eq!(scaling_exponent(&derive_params(0.0, 0.0, 3).unwrap()), 0.5);
        let b = BubbleSpec::new(&ps, 2.0).unwrap();
        assert!(relative_residual_euclidean(&b, 1.0).abs() < 1e-10);
    }

    #[test]
    fn rayleigh_scale_invariant() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let g = RadialGrid::default();
        let base = ckn_rayleigh(&bubble_cylinder(&ps).unwrap()).unwrap();
        for lambda in [0.5, 2.0, 5.0] {
            let w = bubble_cylinder_on(&ps, &g, AngularRep::Radial, lambda).unwrap();
            let q = ckn_rayleigh(&w).unwrap();
            assert!((q / base - 1.0).abs() < 1e-6, "{lambda}: {q} vs {base}");
        }
    }

    #[test]
    fn rayleigh_matches_sobolev_ratio() {
        // 1/S with S = d(d-2)/4 |S^d|^{2/d} the sharp Sobolev constant in d = 3
        let ps = derive_params(0.0, 0.0, 3).unwrap();
        let sharp = 0.75 * crate::params::sphere_area(4).powf(2.0 / 3.0);
        let coarse = RadialGrid::new(1e-4, 1e7, 2048).unwrap();
        let fine = RadialGrid::new(1e-4, 1e7, 4096).unwrap();
        let q1 = ckn_rayleigh(&bubble_cylinder_on(&ps, &coarse, AngularRep::Radial, 1.0).unwrap())
            .unwrap();
        let q2 = ckn_rayleigh(&bubble_cylinder_on(&ps, &fine, AngularRep::Radial, 1.0).unwrap())
            .unwrap();
        assert!((q1 / q2 - 1.0).abs() < 1e-4);
        assert!((q2 * sharp - 1.0).abs() < 1e-4, "{}", q2 * sharp);
    }

    #[test]
    fn pressure_coefficient_closed_form() {
        let ps = derive_params(0.0, 0.0, 3).unwrap();
        let a = pressure_coefficient(&ps).unwrap();
        assert!((a - 2.0 / 3f64.sqrt()).abs() < 1e-14);
        for ps in sets() {
            let a = pressure_coefficient(&ps).unwrap();
            let alt = (ps.n - 1.0) / (ps.alpha * (ps.n * (ps.n - 2.0)).sqrt());
            assert!((a / alt - 1.0).abs() < 1e-13);
        }
        let w = bubble_cylinder(&ps).unwrap();
        let lw = apply_l(&w).unwrap();
        assert!(lw.max_abs_interior().is_finite());
    }
}
