//! The pressure `P = (n-1) w^{-2/(n-2)}` and its Bochner quantity
//!
//! ```text
//! k[P] = 1/2 L|DP|^2 - <DP, D LP> - (LP)^2 / n
//! ```
//!
//! together with the three-term decomposition of `k`, the sphere inequality
//! on `S^1`, the divergence form of `P^{1-n} k` and the rigidity defect.

use serde::Serialize;

use crate::cylfield::{
    apply_l, integrate_mu, spectral_derivative, AngularRep, CylinderField, MeasureRegion,
};
use crate::error::{Error, Result};

/// A positive pressure with cached derivatives.
#[derive(Clone, Debug)]
pub struct PressureField {
    p: CylinderField,
    source_w: CylinderField,
    n: f64,
    /// `P'`
    ds: Vec<f64>,
    /// `P''`
    dss: Vec<f64>,
    /// `d_theta P`
    dt: Vec<f64>,
    /// `Lap_theta P`
    dtt: Vec<f64>,
    /// `d_theta P'`
    dst: Vec<f64>,
}

fn require_dimension(f: &CylinderField) -> Result<f64> {
    let n = f.params().n;
    if !(n.is_finite() && n > 2.0) {
        return Err(Error::RangeViolation(format!(
            "pressure needs a finite intrinsic dimension n > 2, got {n}"
        )));
    }
    Ok(n)
}

/// `P = (n-1) w^{-2/(n-2)}`.
pub fn pressure_of(w: &CylinderField) -> Result<PressureField> {
    w.require_pointwise("the pressure transform")?;
    w.ensure_positive()?;
    let n = require_dimension(w)?;
    let e = -2.0 / (n - 2.0);
    let p = w.map(|v| (n - 1.0) * v.powf(e));
    PressureField::build(p, w.clone(), n)
}

/// Wraps a given positive pressure; the source `w` is recovered by inversion.
pub fn from_pressure(p: &CylinderField) -> Result<PressureField> {
    p.require_pointwise("the pressure transform")?;
    p.ensure_positive()?;
    let n = require_dimension(p)?;
    let e = -(n - 2.0) / 2.0;
    let w = p.map(|v| (v / (n - 1.0)).powf(e));
    PressureField::build(p.clone(), w, n)
}

impl PressureField {
    fn build(p: CylinderField, source_w: CylinderField, n: f64) -> Result<Self> {
        let (ds, dss) = p.radial_derivatives()?;
        let dt = p.angular_derivative(1)?;
        let dtt = p.angular_laplacian()?;
        let dst = p.grid().d_ds(&dt, p.stride());
        Ok(PressureField {
            p,
            source_w,
            n,
            ds,
            dss,
            dt,
            dtt,
            dst,
        })
    }

    pub fn field(&self) -> &CylinderField {
        &self.p
    }

    pub fn source_w(&self) -> &CylinderField {
        &self.source_w
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    fn alpha2(&self) -> f64 {
        let a = self.p.params().alpha;
        a * a
    }

    fn radius(&self, k: usize) -> f64 {
        self.p.grid().node(k / self.p.stride())
    }

    /// `|DP|^2 = alpha^2 P'^2 + (d_theta P)^2 / s^2`.
    pub fn grad_square(&self) -> CylinderField {
        let a2 = self.alpha2();
        let values = (0..self.ds.len())
            .map(|k| {
                let s = self.radius(k);
                a2 * self.ds[k] * self.ds[k] + self.dt[k] * self.dt[k] / (s * s)
            })
            .collect();
        self.p.with_values(values)
    }

    /// `L P` from the cached derivatives.
    pub fn l_p(&self) -> CylinderField {
        let a2 = self.alpha2();
        let nm1 = self.n - 1.0;
        let values = (0..self.ds.len())
            .map(|k| {
                let s = self.radius(k);
                a2 * (self.dss[k] + nm1 * self.ds[k] / s) + self.dtt[k] / (s * s)
            })
            .collect();
        self.p.with_values(values)
    }

    /// `P^{1-n}`.
    pub fn weight(&self) -> CylinderField {
        let e = 1.0 - self.n;
        self.p.map(|v| v.powf(e))
    }
}

/// `L P - 2(n-1)^2/((n-2) P) - (n/2)|DP|^2 / P`.
pub fn residual_eq_p(pf: &PressureField) -> CylinderField {
    let n = pf.n;
    let c = 2.0 * (n - 1.0) * (n - 1.0) / (n - 2.0);
    let lp = pf.l_p();
    let g = pf.grad_square();
    let values = (0..lp.values().len())
        .map(|k| {
            let p = pf.p.values()[k];
            lp.values()[k] - c / p - 0.5 * n * g.values()[k] / p
        })
        .collect();
    pf.p.with_values(values)
}

/// `k[P]`, with `|DP|^2` and `L P` differentiated again on the grid.
pub fn bochner_k(pf: &PressureField) -> Result<CylinderField> {
    let g = pf.grad_square();
    let q = pf.l_p();
    let lg = apply_l(&g)?;
    let m = q.stride();
    let qs = q.grid().d_ds(q.values(), m);
    let qt = q.angular_derivative(1)?;
    let a2 = pf.alpha2();
    let n = pf.n;
    let values = (0..qs.len())
        .map(|k| {
            let s = pf.radius(k);
            let inner = a2 * pf.ds[k] * qs[k] + pf.dt[k] * qt[k] / (s * s);
            let qk = q.values()[k];
            0.5 * lg.values()[k] - inner - qk * qk / n
        })
        .collect();
    Ok(pf.p.with_values(values))
}

/// The three summands of `k[P]`.
#[derive(Clone, Debug)]
pub struct BochnerDecomposition {
    /// `((n-1)/n) alpha^4 (P'' - P'/s - Lap_theta P / (alpha^2 (n-1) s^2))^2`
    pub term_radial_hessian: CylinderField,
    /// `2 alpha^2 s^{-2} (d_theta P' - d_theta P / s)^2`
    pub term_mixed: CylinderField,
    /// `s^{-4} k_S[P]`
    pub term_sphere: CylinderField,
}

impl BochnerDecomposition {
    pub fn sum(&self) -> CylinderField {
        let a = &self.term_radial_hessian;
        let b = &self.term_mixed;
        let c = &self.term_sphere;
        a.with_values(
            (0..a.values().len())
                .map(|k| a.values()[k] + b.values()[k] + c.values()[k])
                .collect(),
        )
    }
}

/// Rows of the sphere Bochner quantity on `S^1`:
/// `1/2 (P_th^2)_thth - P_th P_ththth - P_thth^2/(n-1) - (n-2) alpha^2 P_th^2`.
fn sphere_k_rows(values: &[f64], m: usize, n: f64, alpha2: f64) -> Vec<f64> {
    let pt = spectral_derivative(values, m, 1);
    let ptt = spectral_derivative(values, m, 2);
    let pttt = spectral_derivative(values, m, 3);
    let sq: Vec<f64> = pt.iter().map(|v| v * v).collect();
    let sq_tt = spectral_derivative(&sq, m, 2);
    (0..values.len())
        .map(|k| {
            0.5 * sq_tt[k]
                - pt[k] * pttt[k]
                - ptt[k] * ptt[k] / (n - 1.0)
                - (n - 2.0) * alpha2 * sq[k]
        })
        .collect()
}

pub fn bochner_decomposition(pf: &PressureField) -> Result<BochnerDecomposition> {
    let a2 = pf.alpha2();
    let n = pf.n;
    let len = pf.ds.len();
    let sphere = match pf.p.angular() {
        AngularRep::PeriodicGrid { m } => sphere_k_rows(pf.p.values(), m, n, a2),
        AngularRep::Radial | AngularRep::SingleHarmonic { k: 0 } => vec![0.0; len],
        other => {
            return Err(Error::UnsupportedAngularRep(format!(
                "decomposition needs a radial field or a grid on S^1, got {other:?}"
            )))
        }
    };
    let mut hess = Vec::with_capacity(len);
    let mut mixed = Vec::with_capacity(len);
    let mut sph = Vec::with_capacity(len);
    for k in 0..len {
        let s = pf.radius(k);
        let s2 = s * s;
        let h = pf.dss[k] - pf.ds[k] / s - pf.dtt[k] / (a2 * (n - 1.0) * s2);
        hess.push((n - 1.0) / n * a2 * a2 * h * h);
        let x = pf.dst[k] - pf.dt[k] / s;
        mixed.push(2.0 * a2 / s2 * x * x);
        sph.push(sphere[k] / (s2 * s2));
    }
    Ok(BochnerDecomposition {
        term_radial_hessian: pf.p.with_values(hess),
        term_mixed: pf.p.with_values(mixed),
        term_sphere: pf.p.with_values(sph),
    })
}

/// Both sides of the sphere inequality at one radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SphereBochner {
    pub k_sphere_integral: f64,
    pub rhs_bound: f64,
    pub margin: f64,
}

/// `int_{S^1} P^{1-n} k_S[P] dtheta` against
/// `(n-2)((d-1)/(n-1) - alpha^2) int_{S^1} P^{1-n} P_th^2 dtheta` for one
/// periodic sample row.
pub fn sphere_bochner_row(row: &[f64], n: f64, alpha: f64, d: u32) -> SphereBochner {
    let m = row.len();
    let a2 = alpha * alpha;
    let ks = sphere_k_rows(row, m, n, a2);
    let pt = spectral_derivative(row, m, 1);
    let dtheta = 2.0 * std::f64::consts::PI / m as f64;
    let mut lhs = 0.0;
    let mut grad = 0.0;
    for j in 0..m {
        let wgt = row[j].powf(1.0 - n);
        lhs += wgt * ks[j];
        grad += wgt * pt[j] * pt[j];
    }
    lhs *= dtheta;
    grad *= dtheta;
    let rhs = (n - 2.0) * ((d as f64 - 1.0) / (n - 1.0) - a2) * grad;
    SphereBochner {
        k_sphere_integral: lhs,
        rhs_bound: rhs,
        margin: lhs - rhs,
    }
}

pub fn sphere_bochner(pf: &PressureField, radius_index: usize) -> Result<SphereBochner> {
    match pf.p.angular() {
        AngularRep::PeriodicGrid { .. } => {}
        other => {
            return Err(Error::UnsupportedAngularRep(format!(
                "the sphere inequality needs a grid on S^1, got {other:?}"
            )))
        }
    }
    if radius_index >= pf.p.grid().count() {
        return Err(Error::InvalidInput(format!(
            "radius index {radius_index} outside grid of {} nodes",
            pf.p.grid().count()
        )));
    }
    let ps = pf.p.params();
    Ok(sphere_bochner_row(
        pf.p.row(radius_index),
        pf.n,
        ps.alpha,
        ps.d,
    ))
}

/// `P^{1-n} k[P] - div V` with
/// `V = P^{1-n}(1/2 D|DP|^2 - (1/n) L P DP)` and the weighted divergence
/// `div V = alpha^2 (X' + (n-1) X/s) + Y_theta / s^2` on the components
/// `X = V_r / alpha`, `Y = s V_theta`.
pub fn divergence_form_residual(pf: &PressureField) -> Result<CylinderField> {
    let k = bochner_k(pf)?;
    let g = pf.grad_square();
    let q = pf.l_p();
    let m = g.stride();
    let grid = g.grid();
    let gs = grid.d_ds(g.values(), m);
    let gt = g.angular_derivative(1)?;
    let n = pf.n;
    let w = pf.weight();
    let len = gs.len();
    let mut x = Vec::with_capacity(len);
    let mut y = Vec::with_capacity(len);
    for i in 0..len {
        let f = w.values()[i];
        let qi = q.values()[i];
        x.push(f * (0.5 * gs[i] - qi * pf.ds[i] / n));
        y.push(f * (0.5 * gt[i] - qi * pf.dt[i] / n));
    }
    let xs = grid.d_ds(&x, m);
    let yt = g.with_values(y).angular_derivative(1)?;
    let a2 = pf.alpha2();
    let values = (0..len)
        .map(|i| {
            let s = pf.radius(i);
            let div = a2 * (xs[i] + (n - 1.0) * x[i] / s) + yt[i] / (s * s);
            w.values()[i] * k.values()[i] - div
        })
        .collect();
    Ok(pf.p.with_values(values))
}

fn weighted_integral(pf: &PressureField, f: &CylinderField, region: &MeasureRegion) -> Result<f64> {
    let w = pf.weight();
    integrate_mu(&w.zip_with(f, |a, b| a * b), region)
}

/// `int_region P^{1-n} k[P] dmu`, with `k` summed from its decomposition.
///
/// The decomposition is quadratic in the derivative errors and stays clean
/// where `k` vanishes; [`rigidity_defect_direct`] differentiates twice more.
pub fn rigidity_defect(pf: &PressureField, region: &MeasureRegion) -> Result<f64> {
    let k = bochner_decomposition(pf)?.sum();
    weighted_integral(pf, &k, region)
}

/// `int_region P^{1-n} k[P] dmu` with `k` from [`bochner_k`].
pub fn rigidity_defect_direct(pf: &PressureField, region: &MeasureRegion) -> Result<f64> {
    let k = bochner_k(pf)?;
    weighted_integral(pf, &k, region)
}

/// The defect split along the decomposition, plus the directly computed value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DefectBreakdown {
    pub total: f64,
    pub direct: f64,
    pub radial_hessian: f64,
    pub mixed: f64,
    pub sphere: f64,
}

pub fn rigidity_breakdown(pf: &PressureField, region: &MeasureRegion) -> Result<DefectBreakdown> {
    let dec = bochner_decomposition(pf)?;
    let radial_hessian = weighted_integral(pf, &dec.term_radial_hessian, region)?;
    let mixed = weighted_integral(pf, &dec.term_mixed, region)?;
    let sphere = weighted_integral(pf, &dec.term_sphere, region)?;
    Ok(DefectBreakdown {
        total: radial_hessian + mixed + sphere,
        direct: rigidity_defect_direct(pf, region)?,
        radial_hessian,
        mixed,
        sphere,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubble::{bubble_cylinder, bubble_cylinder_on, pressure_coefficient};
    use crate::grid::RadialGrid;
    use crate::params::{derive_params, sphere_area, ParamSet};
    use std::f64::consts::PI;

    fn sobolev3() -> ParamSet {
        derive_params(0.0, 0.0, 3).unwrap()
    }

    fn plane6() -> ParamSet {
        // d = 2, n = 6, alpha = 1/2
        derive_params(-1.0, -1.0 / 3.0, 2).unwrap()
    }

    #[test]
    fn pressure_of_closed_forms() {
        let ps = sobolev3();
        let pf = pressure_of(&bubble_cylinder(&ps).unwrap()).unwrap();
        let a = pressure_coefficient(&ps).unwrap();
        assert!((a - 1.154_700_538_379_251_5).abs() < 1e-14);
        for (i, &s) in pf.field().grid().nodes().iter().enumerate() {
            let exact = a * (1.0 + s * s);
            assert!((pf.field().value(i, 0) - exact).abs() <= 1e-13 * exact);
        }

        let g = RadialGrid::new(0.5, 4.0, 64).unwrap();
        let one = CylinderField::from_fn(&g, AngularRep::Radial, &ps, |_, _| 1.0).unwrap();
        let pf = pressure_of(&one).unwrap();
        assert!(pf.field().values().iter().all(|&v| v == 2.0));

        let ps6 = derive_params(-0.5, 0.0, 3).unwrap();
        let h = CylinderField::from_fn(&g, AngularRep::Radial, &ps6, |s, _| s.powf(-4.0)).unwrap();
        let pf = pressure_of(&h).unwrap();
        for (i, &s) in g.nodes().iter().enumerate() {
            assert!((pf.field().value(i, 0) / (5.0 * s * s) - 1.0).abs() < 1e-13);
        }
        let back = from_pressure(pf.field()).unwrap();
        for (x, y) in back.source_w().values().iter().zip(h.values()) {
            assert!((x / y - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn pressure_rejects_non_positive() {
        let ps = sobolev3();
        let g = RadialGrid::new(0.5, 4.0, 32).unwrap();
        let w = CylinderField::from_fn(&g, AngularRep::Radial, &ps, |s, _| 2.0 - s).unwrap();
        assert!(matches!(pressure_of(&w), Err(Error::NonPositiveSample { .. })));
    }

    #[test]
    fn equation_residual_for_bubble_and_constant() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let g = RadialGrid::new(0.1, 10.0, 512).unwrap();
        let w = bubble_cylinder_on(&ps, &g, AngularRep::Radial, 1.0).unwrap();
        let pf = pressure_of(&w).unwrap();
        let res = residual_eq_p(&pf);
        let scale = pf.l_p().max_abs_interior();
        assert!(res.max_abs_interior() / scale < 1e-8);

        let c = CylinderField::from_fn(&g, AngularRep::Radial, &ps, |_, _| 3.0).unwrap();
        let pf = from_pressure(&c).unwrap();
        let res = residual_eq_p(&pf);
        let expect = -2.0 * 25.0 / (4.0 * 3.0);
        assert!(res.values().iter().all(|v| (v - expect).abs() < 1e-9));
    }

    #[test]
    fn bochner_of_quadratic_and_linear() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let g = RadialGrid::new(0.2, 5.0, 512).unwrap();
        let a = 1.7;
        let quad = CylinderField::from_fn(&g, AngularRep::Radial, &ps, |s, _| a * (1.0 + s * s))
            .unwrap();
        let k = bochner_k(&from_pressure(&quad).unwrap()).unwrap();
        assert!(k.max_abs_interior() < 1e-8 * a * a);

        let lin = CylinderField::from_fn(&g, AngularRep::Radial, &ps, |s, _| s).unwrap();
        let pf = from_pressure(&lin).unwrap();
        let k = bochner_k(&pf).unwrap();
        let a4 = ps.alpha.powi(4);
        for i in (0..g.count()).filter(|&i| g.is_interior(i)) {
            let s = g.node(i);
            let exact = (ps.n - 1.0) / ps.n * a4 / (s * s);
            assert!((k.value(i, 0) - exact).abs() < 1e-7 * exact);
            assert!(k.value(i, 0) >= 0.0);
        }
        let dec = bochner_decomposition(&pf).unwrap();
        assert!(dec.term_mixed.max_abs() == 0.0 && dec.term_sphere.max_abs() == 0.0);
    }

    fn wavy(ps: &ParamSet, count: usize) -> PressureField {
        let g = RadialGrid::new(0.5, 4.0, count).unwrap();
        let f = CylinderField::from_fn(&g, AngularRep::PeriodicGrid { m: 32 }, ps, |s, th| {
            let t = s.ln();
            (1.0 + s * s)
                * (1.0 + 0.3 * th.cos() * (1.3 * t).sin() + 0.2 * (2.0 * th + 0.4).sin() * t.cos())
        })
        .unwrap();
        from_pressure(&f).unwrap()
    }

    #[test]
    fn decomposition_matches_bochner() {
        let ps = plane6();
        let errs: Vec<f64> = [33, 65, 129]
            .iter()
            .map(|&count| {
                let pf = wavy(&ps, count);
                let k = bochner_k(&pf).unwrap();
                let sum = bochner_decomposition(&pf).unwrap().sum();
                k.zip_with(&sum, |a, b| a - b).max_abs_in(0.8, 2.5)
            })
            .collect();
        let order = (errs[1] / errs[2]).log2();
        assert!(errs[2] < 1e-5 && order > 3.5, "{errs:?}");
    }

    #[test]
    fn divergence_identity_on_bubble() {
        let ps = plane6();
        let errs: Vec<f64> = [33, 65, 129]
            .iter()
            .map(|&count| {
                let g = RadialGrid::new(0.5, 4.0, count).unwrap();
                let w = bubble_cylinder_on(&ps, &g, AngularRep::PeriodicGrid { m: 8 }, 1.0)
                    .unwrap();
                divergence_form_residual(&pressure_of(&w).unwrap())
                    .unwrap()
                    .max_abs_in(0.8, 2.5)
            })
            .collect();
        let order = (errs[1] / errs[2]).log2();
        assert!(order > 3.5, "{errs:?}");
    }

    #[test]
    fn sphere_inequality_examples() {
        let flat = vec![2.0; 16];
        let r = sphere_bochner_row(&flat, 6.0, 0.5, 2);
        assert!(r.k_sphere_integral.abs() < 1e-14 && r.rhs_bound.abs() < 1e-14);
        let m = 64;
        let row: Vec<f64> = (0..m)
            .map(|j| 2.0 + (2.0 * PI * j as f64 / m as f64).cos())
            .collect();
        let r = sphere_bochner_row(&row, 6.0, 0.5, 2);
        assert!(r.margin >= 0.0, "{r:?}");

        let ps = plane6();
        let g = RadialGrid::new(0.5, 4.0, 16).unwrap();
        let f = CylinderField::from_fn(&g, AngularRep::PeriodicGrid { m }, &ps, |_, th| {
            2.0 + th.cos()
        })
        .unwrap();
        let pf = from_pressure(&f).unwrap();
        let at = sphere_bochner(&pf, 3).unwrap();
        assert!((at.margin - r.margin).abs() < 1e-12);
        let radial = from_pressure(&CylinderField::from_fn(&g, AngularRep::Radial, &ps, |_, _| 1.0).unwrap())
            .unwrap();
        assert!(matches!(
            sphere_bochner(&radial, 0),
            Err(Error::UnsupportedAngularRep(_))
        ));
    }

    #[test]
    fn defect_of_bubble_vanishes() {
        for ps in [sobolev3(), derive_params(-0.5, 0.0, 3).unwrap(), plane6()] {
            let w = bubble_cylinder(&ps).unwrap();
            let pf = pressure_of(&w).unwrap();
            let full = MeasureRegion::full(w.grid());
            let b = rigidity_breakdown(&pf, &full).unwrap();
            assert!(b.total.abs() < 1e-8, "{ps:?} {b:?}");
            assert!(b.direct.abs() < 1e-6, "{b:?}");
            assert!(b.radial_hessian >= 0.0 && b.mixed >= 0.0);
        }
    }

    #[test]
    fn defect_of_linear_pressure() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let g = RadialGrid::new(0.5, 4.0, 1024).unwrap();
        let lin = CylinderField::from_fn(&g, AngularRep::Radial, &ps, |s, _| s).unwrap();
        let pf = from_pressure(&lin).unwrap();
        let region = MeasureRegion::new(1.0, 2.0).unwrap();
        let d = rigidity_defect(&pf, &region).unwrap();
        let direct = rigidity_defect_direct(&pf, &region).unwrap();
        assert!((direct - d).abs() < 1e-8 * d);
        // integrand s^{1-n} (n-1)/n alpha^4 s^{-2} s^{n-1} = c s^{-2}
        let n = ps.n;
        let exact = sphere_area(3) * (n - 1.0) / n * ps.alpha.powi(4) * 0.5;
        assert!((d - exact).abs() < 1e-10 * exact, "{d} {exact}");
    }

    #[test]
    fn defect_is_additive() {
        let ps = plane6();
        let pf = wavy(&ps, 257);
        let whole = rigidity_defect(&pf, &MeasureRegion::new(0.8, 3.0).unwrap()).unwrap();
        let left = rigidity_defect(&pf, &MeasureRegion::new(0.8, 1.37).unwrap()).unwrap();
        let right = rigidity_defect(&pf, &MeasureRegion::new(1.37, 3.0).unwrap()).unwrap();
        assert!((whole - left - right).abs() < 1e-12 * whole.abs().max(1.0));
    }
}
