//! Linearized stability of the radial extremal in spherical-harmonic sectors.
//!
//! In `t = ln s` with `w = s^{-Lambda} v(t, theta)` the cylinder equation reads
//! `alpha^2 (v_tt - Lambda^2 v) + Delta_theta v + v^{p-1} = 0`, and the bubble
//! becomes the soliton `v*(t) = c0 (2 cosh t)^{-Lambda}`. Linearizing in the
//! sector of the spherical harmonics of degree `k` gives
//!
//! `-alpha^2 phi'' + (alpha^2 Lambda^2 + k(k+d-2) - (p-1) v*^{p-2}) phi`,
//!
//! discretized with Dirichlet ends at `+-T` by the three-point stencil and
//! diagonalized by Sturm bisection.

use rayon::prelude::*;
use serde::Serialize;

use crate::bubble::bubble_prefactor;
use crate::error::{Error, Result};
use crate::params::{derive_params_with, ParamSet, Strictness};

pub const DEFAULT_NODES: usize = 2001;
/// `T = DEFAULT_T_FACTOR / Lambda`.
pub const DEFAULT_T_FACTOR: f64 = 20.0;
/// Accepted Richardson uncertainty, relative to `max(1, |eigenvalue|)`.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-6;
/// Relative width at which the crossing bisection stops.
const CROSSING_TOLERANCE: f64 = 1e-9;

fn lambda_ef(ps: &ParamSet) -> f64 {
    (ps.n - 2.0) / 2.0
}

fn require_soliton(ps: &ParamSet) -> Result<()> {
    if !(ps.n.is_finite() && ps.n > 2.0 && ps.alpha > 0.0) {
        return Err(Error::SubcriticalRange {
            p: ps.p_exp,
            p_star: crate::params::sobolev_exponent(ps.d),
        });
    }
    Ok(())
}

/// `c0 (2 cosh t)^{-Lambda}`, evaluated without overflow.
pub fn soliton_profile(ps: &ParamSet, t: f64) -> f64 {
    let lam = lambda_ef(ps);
    let x = t.abs();
    bubble_prefactor(ps) * (-lam * (x + (-2.0 * x).exp().ln_1p())).exp()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectorOperator {
    pub ps: ParamSet,
    pub k: u32,
    /// `k (k + d - 2)`.
    pub lambda_k: f64,
    pub t_max: f64,
    /// Interior nodes; the mesh width is `2T / (nodes + 1)`.
    pub nodes: usize,
    pub potential: Vec<f64>,
}

impl SectorOperator {
    pub fn new(ps: &ParamSet, k: u32) -> Result<Self> {
        require_soliton(ps)?;
        Self::with_mesh(ps, k, DEFAULT_T_FACTOR / lambda_ef(ps), DEFAULT_NODES)
    }

    pub fn with_mesh(ps: &ParamSet, k: u32, t_max: f64, nodes: usize) -> Result<Self> {
        require_soliton(ps)?;
        if !(t_max > 0.0 && t_max.is_finite()) || nodes < 8 {
            return Err(Error::InvalidInput(format!(
                "sector mesh needs T > 0 and at least 8 nodes (T={t_max}, N={nodes})"
            )));
        }
        let lambda_k = k as f64 * (k as f64 + ps.d as f64 - 2.0);
        let lam = lambda_ef(ps);
        let base = ps.alpha * ps.alpha * lam * lam + lambda_k;
        let h = 2.0 * t_max / (nodes + 1) as f64;
        let potential = (1..=nodes)
            .map(|i| {
                let t = -t_max + i as f64 * h;
                base - (ps.p_exp - 1.0) * soliton_profile(ps, t).powf(ps.p_exp - 2.0)
            })
            .collect();
        Ok(SectorOperator {
            ps: *ps,
            k,
            lambda_k,
            t_max,
            nodes,
            potential,
        })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.t_max / (self.nodes + 1) as f64
    }

    /// Same interval, mesh width halved.
    pub fn refined(&self) -> Result<Self> {
        Self::with_mesh(&self.ps, self.k, self.t_max, 2 * self.nodes + 1)
    }

    fn off_diagonal(&self) -> f64 {
        let h = self.step();
        -self.ps.alpha * self.ps.alpha / (h * h)
    }

    fn diagonal(&self, i: usize) -> f64 {
        -2.0 * self.off_diagonal() + self.potential[i]
    }

    /// Number of eigenvalues below `x` (Sturm count of the LDL^T pivots).
    pub fn count_below(&self, x: f64) -> usize {
        let e2 = self.off_diagonal().powi(2);
        let mut q = self.diagonal(0) - x;
        let mut count = usize::from(q < 0.0);
        for i in 1..self.nodes {
            if q == 0.0 {
                q = f64::EPSILON * e2.sqrt();
            }
            q = self.diagonal(i) - x - e2 / q;
            count += usize::from(q < 0.0);
        }
        count
    }

    /// The `index`-th eigenvalue (from zero) of the discrete operator.
    pub fn eigenvalue(&self, index: usize) -> Result<f64> {
        if index >= self.nodes {
            return Err(Error::InvalidInput(format!(
                "eigenvalue index {index} with only {} nodes",
                self.nodes
            )));
        }
        let e = self.off_diagonal().abs();
        let (mut lo, mut hi) = (0..self.nodes)
            .map(|i| self.diagonal(i))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(d - 2.0 * e), hi.max(d + 2.0 * e))
            });
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EigenEstimate {
    pub value: f64,
    pub uncertainty: f64,
    /// Raw eigenvalues at mesh widths `h`, `h/2`, `h/4`.
    pub raw: [f64; 3],
}

/// Two Richardson levels over three nested meshes (error expansion in `h^2`).
pub fn extrapolated_eigenvalue(op: &SectorOperator, index: usize) -> Result<EigenEstimate> {
    let op2 = op.refined()?;
    let op4 = op2.refined()?;
    let raw = [op.eigenvalue(index)?, op2.eigenvalue(index)?, op4.eigenvalue(index)?];
    let r1a = (4.0 * raw[1] - raw[0]) / 3.0;
    let r1b = (4.0 * raw[2] - raw[1]) / 3.0;
    let value = (16.0 * r1b - r1a) / 15.0;
    let uncertainty = (value - r1b).abs();
    if !value.is_finite() || uncertainty > CONVERGENCE_TOLERANCE * value.abs().max(1.0) {
        return Err(Error::ConvergenceFailure(format!(
            "sector k={} index {index}: estimate {value} with uncertainty {uncertainty}",
            op.k
        )));
    }
    Ok(EigenEstimate {
        value,
        uncertainty,
        raw,
    })
}

pub fn lowest_eigenvalue(op: &SectorOperator) -> Result<EigenEstimate> {
    extrapolated_eigenvalue(op, 0)
}

/// The translation mode `v*'` of the radial sector. It has one node, so it
/// sits above the ground state `v*`-like mode.
pub fn zero_mode_eigenvalue(ps: &ParamSet) -> Result<EigenEstimate> {
    extrapolated_eigenvalue(&SectorOperator::new(ps, 0)?, 1)
}

/// The `(a, b)` point with intrinsic dimension `n` and the given `alpha`,
/// on the line `b = a + 1 - d/n`.
pub fn path_point(d: u32, n: f64, alpha: f64) -> Result<ParamSet> {
    let a_c = (d as f64 - 2.0) / 2.0;
    let shift = 1.0 - d as f64 / n;
    let kappa = alpha * n * (a_c + shift) / d as f64;
    let a = a_c - kappa;
    derive_params_with(a, a + shift, d, Strictness::Open)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Crossing {
    pub alpha_star_numeric: f64,
    pub alpha_star_formula: f64,
    pub relative_gap: f64,
    /// `a` on the path at the numeric crossing.
    pub a_star: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CrossingMesh {
    pub t_factor: f64,
    pub nodes: usize,
}

impl Default for CrossingMesh {
    fn default() -> Self {
        CrossingMesh {
            t_factor: DEFAULT_T_FACTOR,
            nodes: DEFAULT_NODES,
        }
    }
}

fn sector_one(d: u32, n: f64, alpha: f64, mesh: CrossingMesh) -> Result<f64> {
    let ps = path_point(d, n, alpha)?;
    let op = SectorOperator::with_mesh(&ps, 1, mesh.t_factor / lambda_ef(&ps), mesh.nodes)?;
    Ok(lowest_eigenvalue(&op)?.value)
}

pub fn fs_crossing(d: u32, n: f64, alpha_range: (f64, f64)) -> Result<Crossing> {
    fs_crossing_with(d, n, alpha_range, CrossingMesh::default())
}

/// Bisects the sign change of the lowest `k = 1` eigenvalue along the path.
/// Path points outside the open exponent range count as no sign change.
pub fn fs_crossing_with(d: u32, n: f64, alpha_range: (f64, f64), mesh: CrossingMesh) -> Result<Crossing> {
    let (mut lo, mut hi) = alpha_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite() && n > 2.0) {
        return Err(Error::InvalidInput(format!(
            "need 0 < alpha_lo < alpha_hi and n > 2 (got {alpha_range:?}, n={n})"
        )));
    }
    let ends: Vec<Result<f64>> = [lo, hi].par_iter().map(|&a| sector_one(d, n, a, mesh)).collect();
    let (f_lo, f_hi) = match (&ends[0], &ends[1]) {
        (Ok(x), Ok(y)) => (*x, *y),
        (Err(Error::ConvergenceFailure(m)), _) | (_, Err(Error::ConvergenceFailure(m))) => {
            return Err(Error::ConvergenceFailure(m.clone()))
        }
        _ => return Err(Error::NoSignChange),
    };
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoSignChange);
    }
    let rising = f_lo < 0.0;
    while hi - lo > CROSSING_TOLERANCE * hi {
        let mid = 0.5 * (lo + hi);
        let f = sector_one(d, n, mid, mesh)?;
        if (f < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    let formula = ((d as f64 - 1.0) / (n - 1.0)).sqrt();
    Ok(Crossing {
        alpha_star_numeric: alpha,
        alpha_star_formula: formula,
        relative_gap: (alpha - formula).abs() / formula,
        a_star: path_point(d, n, alpha)?.a,
    })
}
