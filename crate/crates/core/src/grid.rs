//! Log-uniform radial grids, fourth-order finite differences in `t = ln s`
//! and cubic-exact composite quadrature.

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_R_MIN: f64 = 1e-3;
pub const DEFAULT_R_MAX: f64 = 1e3;
pub const DEFAULT_COUNT: usize = 2048;
pub const MIN_COUNT: usize = 16;

/// Rows at each end excluded from max-residual reports.
pub const BOUNDARY_ROWS: usize = 4;

/// Finite-difference weights for the derivatives of order `0..=max_order`
/// at `x0` from samples at `xs` (Fornberg's recursion).
///
/// Returns `w[m][j]`, the weight of sample `j` for derivative order `m`.
pub fn fornberg_weights(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// A stencil: first node index and weights (already divided by `h^order`).
#[derive(Clone, Debug)]
struct Stencil {
    start: usize,
    weights: Vec<f64>,
}

/// Fourth-order stencils in a uniform variable with spacing `h`.
#[derive(Clone, Debug)]
struct StencilSet {
    first: Vec<Stencil>,
    second: Vec<Stencil>,
}

impl StencilSet {
    fn new(count: usize, h: f64) -> Self {
        let make = |order: usize, width_edge: usize| -> Vec<Stencil> {
            let scale = h.powi(order as i32);
            let centered: Vec<f64> = {
                let xs: Vec<f64> = (-2..=2).map(|k| k as f64).collect();
                fornberg_weights(0.0, &xs, order)[order]
                    .iter()
                    .map(|w| w / scale)
                    .collect()
            };
            (0..count)
                .map(|i| {
                    if i >= 2 && i + 2 < count {
                        Stencil {
                            start: i - 2,
                            weights: centered.clone(),
                        }
                    } else {
                        let start = if i < 2 { 0 } else { count - width_edge };
                        let xs: Vec<f64> = (0..width_edge).map(|k| (start + k) as f64).collect();
                        let w = fornberg_weights(i as f64, &xs, order)[order]
                            .iter()
                            .map(|w| w / scale)
                            .collect();
                        Stencil { start, weights: w }
                    }
                })
                .collect()
        };
        StencilSet {
            first: make(1, 5),
            second: make(2, 6),
        }
    }
}

/// Log-uniform radial grid in the cylinder variable `s`.
#[derive(Clone, Debug)]
pub struct RadialGrid {
    r_min: f64,
    r_max: f64,
    count: usize,
    t0: f64,
    h: f64,
    nodes: Vec<f64>,
    stencils: StencilSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            r_min: DEFAULT_R_MIN,
            r_max: DEFAULT_R_MAX,
            count: DEFAULT_COUNT,
        }
    }
}

impl PartialEq for RadialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.r_min == other.r_min && self.r_max == other.r_max && self.count == other.count
    }
}

impl Default for RadialGrid {
    fn default() -> Self {
        RadialGrid::new(DEFAULT_R_MIN, DEFAULT_R_MAX, DEFAULT_COUNT).expect("default grid is valid")
    }
}

impl RadialGrid {
    pub fn new(r_min: f64, r_max: f64, count: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_min.is_finite()) {
            return Err(Error::InvalidGrid(format!("r_min={r_min} must be positive")));
        }
        if !(r_max > r_min && r_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "r_max={r_max} must exceed r_min={r_min}"
            )));
        }
        if count < MIN_COUNT {
            return Err(Error::InvalidGrid(format!(
                "count={count} below minimum {MIN_COUNT}"
            )));
        }
        let t0 = r_min.ln();
        let h = (r_max.ln() - t0) / (count - 1) as f64;
        let mut nodes: Vec<f64> = (0..count).map(|i| (t0 + i as f64 * h).exp()).collect();
        nodes[0] = r_min;
        nodes[count - 1] = r_max;
        Ok(RadialGrid {
            r_min,
            r_max,
            count,
            t0,
            h,
            nodes,
            stencils: StencilSet::new(count, h),
        })
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        RadialGrid::new(spec.r_min, spec.r_max, spec.count)
    }

    /// Same log spacing as the default grid over a different range.
    pub fn with_default_spacing(r_min: f64, r_max: f64) -> Result<Self> {
        let h0 = (DEFAULT_R_MAX.ln() - DEFAULT_R_MIN.ln()) / (DEFAULT_COUNT - 1) as f64;
        let count = ((r_max.ln() - r_min.ln()) / h0).round() as usize + 1;
        RadialGrid::new(r_min, r_max, count.max(MIN_COUNT))
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            r_min: self.r_min,
            r_max: self.r_max,
            count: self.count,
        }
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Spacing in `t = ln s`.
    pub fn log_step(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn log_node(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    /// Index of the node closest to `s` in log distance.
    pub fn nearest_index(&self, s: f64) -> usize {
        let x = ((s.ln() - self.t0) / self.h).round();
        x.clamp(0.0, (self.count - 1) as f64) as usize
    }

    /// Rows excluded from max-residual reports.
    pub fn is_interior(&self, i: usize) -> bool {
        i >= BOUNDARY_ROWS && i + BOUNDARY_ROWS < self.count
    }

    /// `d/dt` of columns laid out row-major with `stride` samples per row.
    pub fn d_dt(&self, values: &[f64], stride: usize) -> Vec<f64> {
        apply_stencils(&self.stencils.first, values, stride)
    }

    pub fn d2_dt2(&self, values: &[f64], stride: usize) -> Vec<f64> {
        apply_stencils(&self.stencils.second, values, stride)
    }

    /// First derivative in `s`.
    pub fn d_ds(&self, values: &[f64], stride: usize) -> Vec<f64> {
        let mut out = self.d_dt(values, stride);
        for (i, row) in out.chunks_mut(stride).enumerate() {
            let inv = 1.0 / self.nodes[i];
            row.iter_mut().for_each(|v| *v *= inv);
        }
        out
    }

    /// First and second derivatives in `s`.
    pub fn d_ds_and_d2_ds2(&self, values: &[f64], stride: usize) -> (Vec<f64>, Vec<f64>) {
        let ft = self.d_dt(values, stride);
        let ftt = self.d2_dt2(values, stride);
        let mut first = vec![0.0; values.len()];
        let mut second = vec![0.0; values.len()];
        for i in 0..self.count {
            let s = self.nodes[i];
            let inv = 1.0 / s;
            let inv2 = inv * inv;
            for j in 0..stride {
                let k = i * stride + j;
                first[k] = ft[k] * inv;
                second[k] = (ftt[k] - ft[k]) * inv2;
            }
        }
        (first, second)
    }

    /// Node weights `W` with `sum_i W_i g(s_i) ~ int_{lo}^{hi} g(s) s^power ds`.
    ///
    /// `g` is interpolated by local quintics in `t = ln s` and the power weight
    /// is integrated exactly against the interpolant, so the rule is exact
    /// whenever `g` is a polynomial of degree five in `t`.
    pub fn quadrature_weights(&self, lo: f64, hi: f64, power: f64) -> Result<Vec<f64>> {
        let tol = 1e-12;
        if !(lo < hi) || lo < self.r_min * (1.0 - tol) || hi > self.r_max * (1.0 + tol) {
            return Err(Error::RegionOutsideGrid {
                lo,
                hi,
                min: self.r_min,
                max: self.r_max,
            });
        }
        let last = (self.count - 1) as f64;
        let x_lo = ((lo.ln() - self.t0) / self.h).clamp(0.0, last);
        let x_hi = ((hi.ln() - self.t0) / self.h).clamp(0.0, last);
        let mut w = vec![0.0; self.count];
        let first_cell = (x_lo.floor() as usize).min(self.count - 2);
        let last_cell = ((x_hi.ceil() as usize).max(1) - 1).min(self.count - 2);
        let q = power + 1.0;
        for cell in first_cell..=last_cell {
            let a = (x_lo - cell as f64).max(0.0);
            let b = (x_hi - cell as f64).min(1.0);
            if b <= a {
                continue;
            }
            let start = cell.saturating_sub(QUAD_POINTS / 2 - 1).min(self.count - QUAD_POINTS);
            let offs: [f64; QUAD_POINTS] =
                std::array::from_fn(|k| (start + k) as f64 - cell as f64);
            let mid = 0.5 * (a + b);
            let half = 0.5 * (b - a);
            let t_cell = self.t0 + cell as f64 * self.h;
            for (xi, gw) in GAUSS6.iter() {
                let x = mid + half * xi;
                let weight = half * gw * self.h * (q * (t_cell + x * self.h)).exp();
                for k in 0..QUAD_POINTS {
                    let mut l = 1.0;
                    for m in 0..QUAD_POINTS {
                        if m != k {
                            l *= (x - offs[m]) / (offs[k] - offs[m]);
                        }
                    }
                    w[start + k] += weight * l;
                }
            }
        }
        Ok(w)
    }
}

/// Interpolation points per cell in the product quadrature.
const QUAD_POINTS: usize = 6;

/// Six-point Gauss-Legendre nodes and weights on `[-1, 1]`.
const GAUSS6: [(f64, f64); 6] = [
    (-0.932_469_514_203_152_0, 0.171_324_492_379_170_3),
    (-0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (-0.238_619_186_083_196_9, 0.467_913_934_572_691_0),
    (0.238_619_186_083_196_9, 0.467_913_934_572_691_0),
    (0.661_209_386_466_264_5, 0.360_761_573_048_138_6),
    (0.932_469_514_203_152_0, 0.171_324_492_379_170_3),
];

/// Composite six-point Gauss-Legendre rule for `int_a^b f` on `cells` equal cells.
pub fn gauss_legendre(f: impl Fn(f64) -> f64, a: f64, b: f64, cells: usize) -> f64 {
    let width = (b - a) / cells as f64;
    let mut total = 0.0;
    for c in 0..cells {
        let mid = a + (c as f64 + 0.5) * width;
        for (xi, w) in GAUSS6.iter() {
            total += w * f(mid + 0.5 * width * xi);
        }
    }
    0.5 * width * total
}

fn apply_stencils(stencils: &[Stencil], values: &[f64], stride: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for (i, st) in stencils.iter().enumerate() {
        let row = &mut out[i * stride..(i + 1) * stride];
        for (k, &w) in st.weights.iter().enumerate() {
            let src = &values[(st.start + k) * stride..(st.start + k + 1) * stride];
            for (o, &v) in row.iter_mut().zip(src) {
                *o += w * v;
            }
        }
    }
    out
}
