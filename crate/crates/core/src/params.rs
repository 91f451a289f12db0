//! Parameter calculus for the weighted critical family.
//!
//! Everything downstream reads the derived quantities stored in [`ParamSet`]:
//! the critical exponent `p`, the Emden-Fowler exponent `alpha`, the intrinsic
//! dimension `n` and the Felli-Schneider threshold `sqrt((d-1)/(n-1))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for equality tests between derived quantities.
pub const REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Symmetric,
    SymmetryBreaking,
}

/// Whether the endpoints `p = 2` and `p = 2*` are accepted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Every triple allowed by the weight constraints, endpoints included.
    #[default]
    Closed,
    /// Additionally require `p` in the open range `(2, 2*)`.
    Open,
}

/// An admissible `(a, b, d)` triple together with all derived quantities.
///
/// Serialized as a flat JSON object. Non-finite values (the intrinsic
/// dimension at the Hardy endpoint `b = a + 1`) serialize as `null`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParamSet {
    pub a: f64,
    pub b: f64,
    pub d: u32,
    pub a_c: f64,
    pub p_exp: f64,
    pub alpha: f64,
    pub n: f64,
    pub fs_threshold: f64,
    pub regime: Regime,
    pub kappa: f64,
}

fn rel_close(x: f64, y: f64, tol: f64) -> bool {
    if x.is_infinite() || y.is_infinite() {
        return x == y;
    }
    (x - y).abs() <= tol * x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

/// Upper end of the exponent range, `2d/(d-2)`, infinite for `d = 2`.
pub fn sobolev_exponent(d: u32) -> f64 {
    if d <= 2 {
        f64::INFINITY
    } else {
        2.0 * d as f64 / (d as f64 - 2.0)
    }
}

/// Derives a [`ParamSet`] with both exponent endpoints accepted.
pub fn derive_params(a: f64, b: f64, d: u32) -> Result<ParamSet> {
    derive_params_with(a, b, d, Strictness::Closed)
}

pub fn derive_params_with(a: f64, b: f64, d: u32, strictness: Strictness) -> Result<ParamSet> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInput(format!(
            "weights must be finite (a={a}, b={b})"
        )));
    }
    if d < 2 {
        return Err(Error::InvalidInput(format!("dimension d={d} must be >= 2")));
    }
    if d == 2 {
        if !(a < b && b <= a + 1.0) {
            return Err(Error::ConstraintAB {
                a,
                b,
                d,
                rule: "a < b <= a+1 for d = 2",
            });
        }
    } else if !(a <= b && b <= a + 1.0) {
        return Err(Error::ConstraintAB {
            a,
            b,
            d,
            rule: "a <= b <= a+1 for d >= 3",
        });
    }
    let df = d as f64;
    let a_c = (df - 2.0) / 2.0;
    if a >= a_c {
        return Err(Error::ConstraintAC { a, a_c });
    }

    let p_exp = 2.0 * df / (df - 2.0 + 2.0 * (b - a));
    let gap = 1.0 + a - b;
    let kappa = a_c - a;
    let alpha = gap * kappa / (kappa + b);
    let n = if gap > 0.0 { df / gap } else { f64::INFINITY };
    let fs_threshold = ((df - 1.0) / (n - 1.0)).sqrt();
    let regime = if alpha <= fs_threshold * (1.0 + REL_TOL) {
        Regime::Symmetric
    } else {
        Regime::SymmetryBreaking
    };

    if strictness == Strictness::Open {
        let p_star = sobolev_exponent(d);
        let strictly_above_two = p_exp > 2.0 && !rel_close(p_exp, 2.0, REL_TOL);
        let strictly_below_star = p_exp < p_star && !rel_close(p_exp, p_star, REL_TOL);
        if !(strictly_above_two && strictly_below_star) {
            return Err(Error::SubcriticalRange { p: p_exp, p_star });
        }
    }

    Ok(ParamSet {
        a,
        b,
        d,
        a_c,
        p_exp,
        alpha,
        n,
        fs_threshold,
        regime,
        kappa,
    })
}

impl ParamSet {
    /// `p` computed from the intrinsic dimension, `2n/(n-2)`.
    pub fn p_from_n(&self) -> f64 {
        2.0 * self.n / (self.n - 2.0)
    }

    /// `(n-2)/2`, the decay rate of the soliton in logarithmic variables.
    pub fn lambda_ef(&self) -> f64 {
        (self.n - 2.0) / 2.0
    }

    pub fn is_symmetric(&self) -> bool {
        self.regime == Regime::Symmetric
    }

    /// True when `p` lies strictly inside `(2, 2*)`.
    pub fn is_strictly_subcritical(&self) -> bool {
        derive_params_with(self.a, self.b, self.d, Strictness::Open).is_ok()
    }

    /// True when `p > 2`, i.e. the intrinsic dimension is finite.
    pub fn has_finite_dimension(&self) -> bool {
        self.n.is_finite()
    }

    /// Area of the unit sphere `S^{d-1}`.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.d)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("ParamSet serializes")
    }

    /// Parses a JSON object carrying at least `a`, `b` and `d`.
    ///
    /// The set is re-derived from the triple; any derived field present in the
    /// input must agree with the re-derived value to [`REL_TOL`].
    pub fn from_json(text: &str) -> Result<ParamSet> {
        #[derive(Deserialize)]
        struct Record {
            a: f64,
            b: f64,
            d: u32,
            a_c: Option<f64>,
            p_exp: Option<f64>,
            alpha: Option<f64>,
            n: Option<f64>,
            fs_threshold: Option<f64>,
            regime: Option<Regime>,
            kappa: Option<f64>,
        }
        let rec: Record = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let ps = derive_params(rec.a, rec.b, rec.d)?;
        let checks = [
            ("a_c", rec.a_c, ps.a_c),
            ("p_exp", rec.p_exp, ps.p_exp),
            ("alpha", rec.alpha, ps.alpha),
            ("n", rec.n, ps.n),
            ("fs_threshold", rec.fs_threshold, ps.fs_threshold),
            ("kappa", rec.kappa, ps.kappa),
        ];
        for (name, given, derived) in checks {
            if let Some(v) = given {
                if !rel_close(v, derived, REL_TOL) {
                    return Err(Error::Parse(format!(
                        "field {name}={v} disagrees with derived value {derived}"
                    )));
                }
            }
        }
        if let Some(r) = rec.regime {
            if r != ps.regime {
                return Err(Error::Parse(format!(
                    "regime {r:?} disagrees with derived {:?}",
                    ps.regime
                )));
            }
        }
        Ok(ps)
    }
}

/// `|S^{m-1}| = 2 pi^{m/2} / Gamma(m/2)` for integer `m >= 1`.
pub fn sphere_area(m: u32) -> f64 {
    use std::f64::consts::PI;
    match m {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (m as f64 - 2.0) * sphere_area(m - 2),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DecayThresholds {
    /// Decay exponent (in the cylinder radial variable) below which the
    /// pointwise-decay rigidity statement applies; `+inf` when `n <= 4`.
    pub sigma_star: f64,
    /// Exponent `-(n-2)/2`, the finite-energy decay rate of radial solutions.
    pub finite_energy_sigma: f64,
}

pub fn decay_thresholds(ps: &ParamSet) -> DecayThresholds {
    decay_thresholds_for_n(ps.n)
}

pub fn decay_thresholds_for_n(n: f64) -> DecayThresholds {
    let sigma_star = if n > 4.0 {
        // normalise -0.0 to 0.0 at n = 6
        -(n - 2.0) * (n - 6.0) / (2.0 * (n - 4.0)) + 0.0
    } else {
        f64::INFINITY
    };
    DecayThresholds {
        sigma_star,
        finite_energy_sigma: -(n - 2.0) / 2.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultTag {
    Teo1,
    Teo2,
    Teo3,
    Cor1,
    Cor2,
}

/// Classification statements whose hypotheses hold for the given data.
///
/// Every statement needs the symmetric regime and `p` strictly inside
/// `(2, 2*)`. The two corollaries are listed only when none of the theorems
/// already covers the input: their hypotheses are special cases of the
/// theorem hypotheses, so they are reported as the fallback route.
pub fn applicable_results(
    ps: &ParamSet,
    observed_sigma: Option<f64>,
    finite_energy: bool,
) -> Vec<ResultTag> {
    let mut tags = Vec::new();
    if !ps.is_symmetric() || !ps.is_strictly_subcritical() {
        return tags;
    }
    let n = ps.n;
    let thr = decay_thresholds(ps);
    if n > 2.0 && n < 4.0 {
        tags.push(ResultTag::Teo1);
    }
    if finite_energy {
        tags.push(ResultTag::Teo2);
    }
    if n >= 4.0 {
        if let Some(sigma) = observed_sigma {
            if sigma < thr.sigma_star {
                tags.push(ResultTag::Teo3);
            }
        }
    }
    if tags.is_empty() {
        if let Some(sigma) = observed_sigma {
            if sigma <= thr.finite_energy_sigma {
                tags.push(ResultTag::Cor1);
            }
            if n > 2.0 && n <= 6.0 && sigma <= 0.0 {
                tags.push(ResultTag::Cor2);
            }
        }
    }
    tags.sort();
    tags
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sobolev_case_d4() {
        let ps = derive_params(0.0, 0.0, 4).unwrap();
        assert_eq!(ps.a_c, 1.0);
        assert_eq!(ps.p_exp, 4.0);
        assert_eq!(ps.alpha, 1.0);
        assert_eq!(ps.n, 4.0);
        assert_eq!(ps.fs_threshold, 1.0);
        assert_eq!(ps.regime, Regime::Symmetric);
    }

    #[test]
    fn hardy_sobolev_example() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        assert_eq!(ps.a_c, 0.5);
        assert!((ps.p_exp - 3.0).abs() < 1e-15);
        assert!((ps.alpha - 0.5).abs() < 1e-15);
        assert!((ps.n - 6.0).abs() < 1e-15);
        assert!((ps.fs_threshold - (0.4f64).sqrt()).abs() < 1e-15);
        assert!((ps.fs_threshold - 0.632456).abs() < 1e-6);
        assert_eq!(ps.regime, Regime::Symmetric);
        assert!((ps.p_from_n() - ps.p_exp).abs() < 1e-14 * ps.p_exp);
    }

    #[test]
    fn rejects_a_at_critical_value() {
        match derive_params(0.5, 0.6, 3) {
            Err(Error::ConstraintAC { a_c, .. }) => assert_eq!(a_c, 0.5),
            other => panic!("expected ConstraintAC, got {other:?}"),
        }
    }

    #[test]
    fn rejects_equal_weights_in_the_plane() {
        assert!(matches!(
            derive_params(0.0, 0.0, 2),
            Err(Error::ConstraintAB { .. })
        ));
        assert!(matches!(
            derive_params(0.0, 1.5, 3),
            Err(Error::ConstraintAB { .. })
        ));
        assert!(matches!(
            derive_params(0.0, -0.1, 3),
            Err(Error::ConstraintAB { .. })
        ));
    }

    #[test]
    fn endpoints_depend_on_strictness() {
        // p = 2* at a = b
        assert!(derive_params(0.0, 0.0, 3).is_ok());
        assert!(matches!(
            derive_params_with(0.0, 0.0, 3, Strictness::Open),
            Err(Error::SubcriticalRange { .. })
        ));
        // p = 2 at b = a + 1
        let hardy = derive_params(-1.0, 0.0, 3).unwrap();
        assert_eq!(hardy.p_exp, 2.0);
        assert!(hardy.n.is_infinite());
        assert!(matches!(
            derive_params_with(-1.0, 0.0, 3, Strictness::Open),
            Err(Error::SubcriticalRange { .. })
        ));
        assert!(derive_params_with(-0.5, 0.0, 3, Strictness::Open).is_ok());
    }

    #[test]
    fn sphere_areas() {
        use std::f64::consts::PI;
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn thresholds() {
        let t6 = decay_thresholds_for_n(6.0);
        assert_eq!(t6.sigma_star, 0.0);
        assert!(t6.sigma_star.is_sign_positive());
        let t8 = decay_thresholds_for_n(8.0);
        assert_eq!(t8.sigma_star, -1.5);
        assert_eq!(t8.finite_energy_sigma, -3.0);
        assert!(t8.sigma_star > t8.finite_energy_sigma);
        assert_eq!(decay_thresholds_for_n(3.0).sigma_star, f64::INFINITY);
        assert_eq!(decay_thresholds_for_n(4.0).sigma_star, f64::INFINITY);
        assert!(decay_thresholds_for_n(4.0 + 1e-9).sigma_star > 1e8);
    }

    #[test]
    fn results_low_dimension() {
        // d = 2, b = a + 1/3 gives n = 3 with p strictly subcritical
        let ps = derive_params(-0.2, -0.2 + 1.0 / 3.0, 2).unwrap();
        assert!((ps.n - 3.0).abs() < 1e-12);
        assert!(ps.is_symmetric());
        assert_eq!(applicable_results(&ps, None, false), vec![ResultTag::Teo1]);
    }

    #[test]
    fn results_n6_with_decay() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        assert_eq!(
            applicable_results(&ps, Some(-0.1), false),
            vec![ResultTag::Teo3]
        );
        // merely bounded: the sharp inequality sigma < 0 fails, cor2 covers it
        assert_eq!(applicable_results(&ps, Some(0.0), false), vec![ResultTag::Cor2]);
        assert_eq!(
            applicable_results(&ps, None, true),
            vec![ResultTag::Teo2]
        );
        assert!(applicable_results(&ps, Some(0.5), false).is_empty());
    }

    #[test]
    fn results_symmetry_breaking_is_empty() {
        // d = 3, n = 5 (b = a + 0.4); large negative a pushes alpha above threshold
        let ps = derive_params(-3.0, -2.6, 3).unwrap();
        assert!((ps.n - 5.0).abs() < 1e-12);
        assert_eq!(ps.regime, Regime::SymmetryBreaking);
        assert!(applicable_results(&ps, Some(-10.0), true).is_empty());
    }

    #[test]
    fn json_roundtrip_and_field_names() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let text = ps.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "a",
            "b",
            "d",
            "a_c",
            "p_exp",
            "alpha",
            "n",
            "fs_threshold",
            "regime",
            "kappa",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["regime"], "Symmetric");
        assert_eq!(ParamSet::from_json(&text).unwrap(), ps);
        assert!(ParamSet::from_json(r#"{"a":0,"b":0,"d":3,"n":4}"#).is_err());
    }
}
