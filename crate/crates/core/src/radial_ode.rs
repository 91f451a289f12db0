//! Singular shooting for the radial cylinder equation.
//!
//! `alpha^2 (w'' + (n-1) w'/s) + w^{p-1} = 0` becomes autonomous in
//! `t = ln s` for `v = s^Lambda w`:
//!
//! `alpha^2 (v'' - Lambda^2 v) + v^{p-1} = 0`,
//!
//! with first integral `E = alpha^2 (v'^2 - Lambda^2 v^2)/2 + |v|^p/p`. Regular
//! solutions leave the origin with `E = 0`, so drift in `E` is the integrator
//! error; it is reported and removed after every step, which keeps the decaying
//! branch from being swamped by the growing mode `e^{Lambda t}`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::bubble_prefactor;
use crate::cylfield::fmt17;
use crate::error::{Error, Result};
use crate::params::ParamSet;

/// Where the series start is evaluated.
pub const SERIES_START: f64 = 1e-6;
/// Relative local error tolerance of the integrator.
pub const STEP_TOLERANCE: f64 = 1e-10;
pub const BLOW_UP_FACTOR: f64 = 1e6;
pub const TOUCH_ZERO_FACTOR: f64 = 1e-12;
/// A profile counts as a scaled bubble below this sup relative error.
pub const MATCH_TOLERANCE: f64 = 1e-6;

/// Largest `|E|` (relative to the size of its terms) that is projected away.
const PROJECTION_WINDOW: f64 = 1e-6;
const MAX_STEPS: usize = 1_000_000;
/// Terminal log-slope tolerance for [`Classification::DecaysLikeBubble`].
const TAIL_SLOPE_TOLERANCE: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Classification {
    DecaysLikeBubble,
    BlowsUp,
    TouchesZero,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfileSample {
    pub s: f64,
    pub w: f64,
    pub w_prime: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialProfile {
    pub ps: ParamSet,
    pub w0: f64,
    pub samples: Vec<ProfileSample>,
    pub classification: Classification,
    /// Largest relative first-integral drift over a single step, before projection.
    pub energy_drift: f64,
}

impl RadialProfile {
    pub fn last(&self) -> &ProfileSample {
        self.samples.last().expect("profiles hold at least the start sample")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "s,w,w_prime")?;
        for p in &self.samples {
            writeln!(out, "{},{},{}", fmt17(p.s), fmt17(p.w), fmt17(p.w_prime))?;
        }
        Ok(())
    }
}

/// Two-term expansion `w0 - w0^{p-1} s^2 / (2 n alpha^2)` and its derivative.
pub fn series_start(ps: &ParamSet, w0: f64, s: f64) -> (f64, f64) {
    let c = w0.powf(ps.p_exp - 1.0) / (2.0 * ps.n * ps.alpha * ps.alpha);
    (w0 - c * s * s, -2.0 * c * s)
}

#[derive(Clone, Copy)]
struct Autonomous {
    a2: f64,
    lam: f64,
    p: f64,
}

impl Autonomous {
    fn new(ps: &ParamSet) -> Self {
        Autonomous {
            a2: ps.alpha * ps.alpha,
            lam: (ps.n - 2.0) / 2.0,
            p: ps.p_exp,
        }
    }

    fn nonlinear(&self, v: f64) -> f64 {
        v.abs().powf(self.p - 2.0) * v
    }

    /// State `(v, u)` with `u = v' - Lambda v = e^{Lambda t} s w'`, which avoids
    /// the cancellation in `v' - Lambda v` near the origin.
    fn rhs(&self, y: [f64; 2]) -> [f64; 2] {
        [y[1] + self.lam * y[0], -self.lam * y[1] - self.nonlinear(y[0]) / self.a2]
    }

    fn energy(&self, y: [f64; 2]) -> f64 {
        0.5 * self.a2 * y[1] * (y[1] + 2.0 * self.lam * y[0]) + y[0].abs().powf(self.p) / self.p
    }

    fn energy_scale(&self, y: [f64; 2]) -> f64 {
        0.5 * self.a2 * (y[1] * y[1] + 2.0 * self.lam * (y[0] * y[1]).abs())
            + y[0].abs().powf(self.p) / self.p
    }

    /// Newton steps along `grad E` back to `E = 0`.
    fn project(&self, mut y: [f64; 2]) -> [f64; 2] {
        for _ in 0..3 {
            let e = self.energy(y);
            let gv = self.a2 * self.lam * y[1] + self.nonlinear(y[0]);
            let gu = self.a2 * (y[1] + self.lam * y[0]);
            let g2 = gv * gv + gu * gu;
            if e == 0.0 || g2 == 0.0 {
                break;
            }
            y[0] -= e * gv / g2;
            y[1] -= e * gu / g2;
        }
        y
    }
}

// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One embedded step: the fifth-order solution and the scaled error norm.
fn dopri_step(f: &Autonomous, y: [f64; 2], h: f64) -> ([f64; 2], f64) {
    let mut k = [[0.0; 2]; 7];
    for i in 0..7 {
        let mut yi = y;
        for (j, kj) in k.iter().enumerate().take(i) {
            yi[0] += h * A[i][j] * kj[0];
            yi[1] += h * A[i][j] * kj[1];
        }
        k[i] = f.rhs(yi);
    }
    let mut y5 = y;
    let mut err = 0.0f64;
    for c in 0..2 {
        let mut e = 0.0;
        for i in 0..7 {
            y5[c] += h * B5[i] * k[i][c];
            e += h * (B5[i] - B4[i]) * k[i][c];
        }
        let sc = STEP_TOLERANCE * y[c].abs().max(y5[c].abs()) + f64::MIN_POSITIVE;
        err = err.max((e / sc).abs());
    }
    (y5, err)
}

fn sample(lam: f64, t: f64, y: [f64; 2]) -> ProfileSample {
    let s = t.exp();
    let w = (-lam * t).exp() * y[0];
    ProfileSample {
        s,
        w,
        w_prime: (-(lam + 1.0) * t).exp() * y[1],
    }
}

fn require_finite_n(ps: &ParamSet) -> Result<()> {
    if !(ps.n.is_finite() && ps.n > 2.0 && ps.alpha > 0.0) {
        return Err(Error::SubcriticalRange {
            p: ps.p_exp,
            p_star: crate::params::sobolev_exponent(ps.d),
        });
    }
    Ok(())
}

pub fn shoot(ps: &ParamSet, w0: f64, s_max: f64) -> Result<RadialProfile> {
    require_finite_n(ps)?;
    if !(w0 > 0.0 && w0.is_finite()) {
        return Err(Error::InvalidInput(format!("amplitude w0={w0} must be positive")));
    }
    if !(s_max > SERIES_START && s_max.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "s_max={s_max} must exceed the series start {SERIES_START}"
        )));
    }
    let f = Autonomous::new(ps);
    let lam = f.lam;
    let (w, dw) = series_start(ps, w0, SERIES_START);
    let mut t = SERIES_START.ln();
    let t_end = s_max.ln();
    let sl = SERIES_START.powf(lam);
    let mut y = [sl * w, sl * SERIES_START * dw];
    let mut samples = vec![sample(lam, t, y)];
    let mut energy_drift = 0.0f64;
    let mut h = 1e-3;
    let mut classification = Classification::Undetermined;
    let mut steps = 0;
    while t < t_end {
        steps += 1;
        if steps > MAX_STEPS || h < 1e-14 * (1.0 + t.abs()) {
            return Err(Error::StepFailure { s: t.exp(), step: h });
        }
        let h_try = h.min(t_end - t);
        let (y_new, err) = dopri_step(&f, y, h_try);
        if !err.is_finite() || !y_new[0].is_finite() || !y_new[1].is_finite() {
            h = h_try * 0.2;
            continue;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err > 1.0 {
            h = h_try * factor;
            continue;
        }
        t = if h_try == t_end - t { t_end } else { t + h_try };
        let drift = f.energy(y_new).abs() / f.energy_scale(y_new);
        energy_drift = energy_drift.max(drift);
        y = if drift <= PROJECTION_WINDOW { f.project(y_new) } else { y_new };
        h = h_try * factor;
        let pt = sample(lam, t, y);
        samples.push(pt);
        if pt.w > BLOW_UP_FACTOR * w0 {
            classification = Classification::BlowsUp;
            break;
        }
        if pt.w <= 0.0 || pt.w * pt.s.max(1.0).powf(ps.n - 2.0) < TOUCH_ZERO_FACTOR * w0 {
            classification = Classification::TouchesZero;
            break;
        }
    }
    if classification == Classification::Undetermined {
        let slope = y[1] / y[0];
        if (slope - (2.0 - ps.n)).abs() < TAIL_SLOPE_TOLERANCE {
            classification = Classification::DecaysLikeBubble;
        }
    }
    Ok(RadialProfile {
        ps: *ps,
        w0,
        samples,
        classification,
        energy_drift,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BubbleMatch {
    /// Euclidean scale of the matching bubble.
    pub lambda_fit: f64,
    /// Cylinder scale `mu = lambda^alpha`: the bubble is `mu^Lambda c0 (1 + mu^2 s^2)^{-Lambda}`.
    pub mu: f64,
    pub sup_rel_error: f64,
}

fn scaled_bubble(c0: f64, lam: f64, mu: f64, s: f64) -> f64 {
    c0 * mu.powf(lam) * (1.0 + mu * mu * s * s).powf(-lam)
}

/// Gauss-Newton in `ln mu` on the log residuals of the whole mesh.
pub fn match_bubble(profile: &RadialProfile) -> Result<BubbleMatch> {
    if profile.classification != Classification::DecaysLikeBubble {
        return Err(Error::NotDecaying(profile.classification));
    }
    let ps = &profile.ps;
    let lam = (ps.n - 2.0) / 2.0;
    let c0 = bubble_prefactor(ps);
    let mut x = (profile.w0 / c0).ln() / lam;
    for _ in 0..100 {
        let mu2 = (2.0 * x).exp();
        let (mut num, mut den) = (0.0, 0.0);
        for p in &profile.samples {
            let q = mu2 * p.s * p.s;
            let r = p.w.ln() - c0.ln() - lam * x + lam * q.ln_1p();
            let j = -lam + 2.0 * lam * q / (1.0 + q);
            num += j * r;
            den += j * j;
        }
        let dx = -num / den;
        x += dx;
        if dx.abs() < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    let mu = x.exp();
    let sup_rel_error = profile
        .samples
        .iter()
        .map(|p| (p.w / scaled_bubble(c0, lam, mu, p.s) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(BubbleMatch {
        lambda_fit: mu.powf(1.0 / ps.alpha),
        mu,
        sup_rel_error,
    })
}

/// `count` amplitudes log-spaced between `lo c0` and `hi c0`.
pub fn amplitude_grid(ps: &ParamSet, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let c0 = bubble_prefactor(ps);
    if count == 1 {
        return vec![lo * c0];
    }
    (0..count)
        .map(|k| c0 * lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub w0: f64,
    pub classification: Classification,
    pub lambda_fit: Option<f64>,
    pub sup_rel_error: Option<f64>,
    pub energy_drift: f64,
    pub matched: bool,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RigiditySweep {
    pub ps: ParamSet,
    pub s_max: f64,
    pub symmetric_regime: bool,
    pub rows: Vec<SweepRow>,
    pub matched: usize,
    pub decaying: usize,
    /// No classification changes between neighbouring amplitudes.
    pub classification_continuous: bool,
}

impl RigiditySweep {
    /// Every decaying profile matched a scaled bubble.
    pub fn all_decaying_matched(&self) -> bool {
        self.matched == self.decaying
    }
}

fn sweep_row(ps: &ParamSet, w0: f64, s_max: f64) -> SweepRow {
    let failed = |classification, energy_drift, msg: String| SweepRow {
        w0,
        classification,
        lambda_fit: None,
        sup_rel_error: None,
        energy_drift,
        matched: false,
        failure: Some(msg),
    };
    let profile = match shoot(ps, w0, s_max) {
        Ok(p) => p,
        Err(e) => return failed(Classification::Undetermined, f64::NAN, e.to_string()),
    };
    match match_bubble(&profile) {
        Ok(m) => SweepRow {
            w0,
            classification: profile.classification,
            lambda_fit: Some(m.lambda_fit),
            sup_rel_error: Some(m.sup_rel_error),
            energy_drift: profile.energy_drift,
            matched: m.sup_rel_error < MATCH_TOLERANCE,
            failure: None,
        },
        Err(e) => failed(profile.classification, profile.energy_drift, e.to_string()),
    }
}

/// Shoots and matches every amplitude; failures are listed, not raised.
pub fn radial_rigidity_sweep(ps: &ParamSet, w0_grid: &[f64], s_max: f64) -> RigiditySweep {
    let rows: Vec<SweepRow> = w0_grid.par_iter().map(|&w0| sweep_row(ps, w0, s_max)).collect();
    let decaying = rows
        .iter()
        .filter(|r| r.classification == Classification::DecaysLikeBubble)
        .count();
    let matched = rows.iter().filter(|r| r.matched).count();
    let classification_continuous = rows.windows(2).all(|w| w[0].classification == w[1].classification);
    RigiditySweep {
        ps: *ps,
        s_max,
        symmetric_regime: ps.is_symmetric(),
        rows,
        matched,
        decaying,
        classification_continuous,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::convergence_order;
    use crate::params::derive_params;

    fn closed_form_error(ps: &ParamSet, s_max: f64) -> f64 {
        let c0 = bubble_prefactor(ps);
        let lam = (ps.n - 2.0) / 2.0;
        let prof = shoot(ps, c0, s_max).unwrap();
        assert_eq!(prof.classification, Classification::DecaysLikeBubble);
        prof.samples
            .iter()
            .map(|p| (p.w / scaled_bubble(c0, lam, 1.0, p.s) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn bubble_amplitude_reproduces_closed_form() {
        for (a, b, d) in [(0.0, 0.0, 3), (-0.5, 0.0, 3), (0.0, 0.4, 3), (-0.1, 0.1, 2), (0.0, 0.625, 3)] {
            let ps = derive_params(a, b, d).unwrap();
            let err = closed_form_error(&ps, 1e3);
            assert!(err < 1e-6, "({a},{b},{d}): {err}");
        }
    }

    #[test]
    fn closed_form_derivative_matches() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let c0 = bubble_prefactor(&ps);
        let prof = shoot(&ps, c0, 100.0).unwrap();
        for p in prof.samples.iter().step_by(17) {
            let q = 1.0 + p.s * p.s;
            let expect = -4.0 * c0 * p.s * q.powi(-3);
            assert!((p.w_prime - expect).abs() <= 1e-6 * expect.abs() + 1e-14);
        }
    }

    #[test]
    fn scaled_amplitudes_match_bubbles() {
        let ps = derive_params(-0.5, 0.0, 3).unwrap();
        let c0 = bubble_prefactor(&ps);
        for f in [0.3, 0.5, 2.0, 5.0] {
            let prof = shoot(&ps, f * c0, 1e3).unwrap();
            assert_eq!(prof.classification, Classification::DecaysLikeBubble);
            let m = match_bubble(&prof).unwrap();
            assert!(m.sup_rel_error < 1e-6, "{f}: {m:?}");
            // amplitude fixes the scale: w0 = mu^Lambda c0
            assert!((m.mu.powf(2.0) - f).abs() < 1e-6 * f);
        }
        let m = match_bubble(&shoot(&ps, c0, 1e3).unwrap()).unwrap();
        assert!((m.lambda_fit - 1.0).abs() < 1e-8);
    }

    #[test]
    fn series_consistency_order() {
        let ps = derive_params(0.0, 0.0, 3).unwrap();
        let w0 = 1.3;
        let ss = [0.0125, 0.025, 0.05, 0.1];
        let errs: Vec<f64> = ss
            .iter()
            .map(|&s| {
                let prof = shoot(&ps, w0, s).unwrap();
                let last = prof.last();
                assert!((last.s - s).abs() < 1e-15);
                (last.w - series_start(&ps, w0, s).0).abs()
            })
            .collect();
        let order = convergence_order(&ss, &errs).unwrap();
        assert!(order >= 3.8, "{order} {errs:?}");
    }

    #[test]
    fn energy_drift_is_at_tolerance() {
        let ps = derive_params(0.0, 0.0, 3).unwrap();
        let prof = shoot(&ps, 2.0, 1e3).unwrap();
        assert!(prof.energy_drift < 1e-8, "{}", prof.energy_drift);
    }

    #[test]
    fn not_decaying_rejected() {
        let ps = derive_params(0.0, 0.0, 3).unwrap();
        let mut prof = shoot(&ps, 1.0, 10.0).unwrap();
        prof.classification = Classification::BlowsUp;
        assert_eq!(
            match_bubble(&prof),
            Err(Error::NotDecaying(Classification::BlowsUp))
        );
        assert!(shoot(&ps, -1.0, 10.0).is_err());
        assert!(shoot(&ps, 1.0, 1e-7).is_err());
    }

    #[test]
    fn sweeps_match_in_and_out_of_regime() {
        for (a, b, d) in [(0.0, 0.0, 3), (-0.5, 0.0, 3), (-0.8, -0.3, 3)] {
            let ps = derive_params(a, b, d).unwrap();
            let grid = amplitude_grid(&ps, 0.3, 5.0, 10);
            let sweep = radial_rigidity_sweep(&ps, &grid, 1e3);
            assert_eq!(sweep.matched, 10, "{sweep:?}");
            assert!(sweep.all_decaying_matched() && sweep.classification_continuous);
            assert_eq!(sweep.symmetric_regime, ps.is_symmetric());
        }
        assert!(!derive_params(-0.8, -0.3, 3).unwrap().is_symmetric());
    }

    #[test]
    fn csv_has_single_header() {
        let ps = derive_params(0.0, 0.0, 3).unwrap();
        let prof = shoot(&ps, 1.0, 1.0).unwrap();
        let mut buf = Vec::new();
        prof.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("s,w,w_prime"));
        assert_eq!(text.lines().count(), prof.samples.len() + 1);
    }
}
