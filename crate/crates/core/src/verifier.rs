//! Finite-difference residuals of the governing system
//!
//! ```text
//! u_ty = (u² - u_x)_xy + 2 u_xx
//! v_t  = u_x + 2 u v_x
//! ```
//!
//! All first derivatives use the fourth-order five-point central stencil; mixed
//! partials nest it, so the x-reach of the first residual is four steps.

use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampler::Window;
use crate::solutions::{u1_v1, u2_v2, Ansatz, SolutionParams};

/// Default step in every coordinate.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Fraction of masked points above which a verification run is rejected.
pub const MAX_MASKED_FRACTION: f64 = 0.5;


#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("{masked} of {total} points masked; the window overlaps the singular set")]
    TooManyMasked { masked: usize, total: usize },
    #[error("grid needs at least one point per axis, got {nx}x{ny}")]
    BadResolution { nx: usize, ny: usize },
    #[error("steps must be positive and finite, got {0:?}")]
    BadSteps([f64; 3]),
}

/// Scalar type a residual can be computed in.
pub trait FieldValue:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn from_real(x: f64) -> Self;
    fn magnitude(self) -> f64;
}

impl FieldValue for f64 {
    fn zero() -> Self {
        0.0
    }

    fn from_real(x: f64) -> Self {
        x
    }

    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl FieldValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }

    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }

    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// A pair of fields `(u, v)` evaluable anywhere near the verification window.
/// `None` marks a point that cannot be evaluated.
pub trait FieldPair: Sync {
    type Value: FieldValue;

    fn uv(&self, x: f64, y: f64, t: f64) -> Option<(Self::Value, Self::Value)>;
}

/// Real coth-branch solution `(u₂, v₂)`.
pub struct CothPair<'a, A: ?Sized> {
    pub delta: f64,
    pub family: &'a A,
}

impl<A: Ansatz + Sync + ?Sized> FieldPair for CothPair<'_, A> {
    type Value = f64;

    fn uv(&self, x: f64, y: f64, t: f64) -> Option<(f64, f64)> {
        let params = SolutionParams::new(self.delta, t).ok()?;
        u2_v2(&params, self.family, x, y).ok()
    }
}

/// Complex tanh-branch solution `(u₁, v₁)`.
pub struct TanhPair<'a, A: ?Sized> {
    pub delta: f64,
    pub family: &'a A,
}

impl<A: Ansatz + Sync + ?Sized> FieldPair for TanhPair<'_, A> {
    type Value = Complex64;

    fn uv(&self, x: f64, y: f64, t: f64) -> Option<(Complex64, Complex64)> {
        let params = SolutionParams::new(self.delta, t).ok()?;
        u1_v1(&params, self.family, x, y).ok()
    }
}

/// `u ≡ u0`, `v ≡ v0`.
pub struct ConstantPair {
    pub u: f64,
    pub v: f64,
}

impl FieldPair for ConstantPair {
    type Value = f64;

    fn uv(&self, _x: f64, _y: f64, _t: f64) -> Option<(f64, f64)> {
        Some((self.u, self.v))
    }
}

/// Adds `amplitude · x` to `u`; used to check that the verifier notices
/// non-solutions.
pub struct Perturbed<F> {
    pub inner: F,
    pub amplitude: f64,
}

impl<F: FieldPair> FieldPair for Perturbed<F> {
    type Value = F::Value;

    fn uv(&self, x: f64, y: f64, t: f64) -> Option<(F::Value, F::Value)> {
        let (u, v) = self.inner.uv(x, y, t)?;
        Some((u + F::Value::from_real(self.amplitude * x), v))
    }
}

/// Steps `(hx, hy, ht)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Steps {
    pub hx: f64,
    pub hy: f64,
    pub ht: f64,
}

impl Steps {
    pub fn uniform(h: f64) -> Self {
        Self { hx: h, hy: h, ht: h }
    }

    pub fn halved(&self) -> Self {
        Self {
            hx: 0.5 * self.hx,
            hy: 0.5 * self.hy,
            ht: 0.5 * self.ht,
        }
    }

    fn check(&self) -> Result<(), VerifyError> {
        let all = [self.hx, self.hy, self.ht];
        if all.iter().all(|h| h.is_finite() && *h > 0.0) {
            Ok(())
        } else {
            Err(VerifyError::BadSteps(all))
        }
    }
}

impl Default for Steps {
    fn default() -> Self {
        Self::uniform(DEFAULT_STEP)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_abs_res_eq1a: f64,
    pub max_abs_res_eq1b: f64,
    /// Grid location of each maximum, `[x, y]`.
    pub worst_point_eq1a: Option<[f64; 2]>,
    pub worst_point_eq1b: Option<[f64; 2]>,
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub t: f64,
    pub steps: Steps,
    pub points_checked: usize,
    pub points_masked: usize,
}

/// `[1, -8, 0, 8, -1] / 12`, paired so that constants cancel exactly.
fn d1<V: FieldValue>(f: [V; 5]) -> V {
    ((f[3] - f[1]) * 8.0 - (f[4] - f[0])) * (1.0 / 12.0)
}

/// `[-1, 16, -30, 16, -1] / 12`.
fn d2<V: FieldValue>(f: [V; 5]) -> V {
    ((f[1] + f[3]) * 16.0 - (f[0] + f[4]) - f[2] * 30.0) * (1.0 / 12.0)
}

fn coord(base: f64, offset: i32, h: f64) -> f64 {
    base + f64::from(offset) * h
}

/// Signed residuals of both equations at one point; `eval(i, j, k)` returns the
/// fields at `(x + i hx, y + j hy, t + k ht)`.
fn residual_from_offsets<V: FieldValue>(
    steps: &Steps,
    mut eval: impl FnMut(i32, i32, i32) -> Option<(V, V)>,
) -> Option<(V, V)> {
    // (t = 0 plane) x offsets -4..=4, y offsets -2..=2
    let mut plane = [[(V::zero(), V::zero()); 5]; 9];
    for (a, row) in plane.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = eval(a as i32 - 4, b as i32 - 2, 0)?;
        }
    }
    // (x = 0) y offsets -2..=2, t offsets -2..=2
    let mut yt = [[(V::zero(), V::zero()); 5]; 5];
    for (b, row) in yt.iter_mut().enumerate() {
        for (k, cell) in row.iter_mut().enumerate() {
            *cell = if k == 2 {
                plane[4][b]
            } else {
                eval(0, b as i32 - 2, k as i32 - 2)?
            };
        }
    }
    let u = |a: usize, b: usize| plane[a][b].0;
    let Steps { hx, hy, ht } = *steps;

    let ux_at = |a: usize, b: usize| -> V { d1(std::array::from_fn(|c| u(a + c - 2, b))) * (1.0 / hx) };

    // (u² - u_x)_xy: y-derivative on each of the five x-columns, then x
    let flux_y: [V; 5] = std::array::from_fn(|i| {
        let a = i + 2;
        d1(std::array::from_fn(|j| u(a, j) * u(a, j) - ux_at(a, j)))
    });
    let flux_xy = d1(flux_y) * (1.0 / (hx * hy));

    let u_t: [V; 5] = std::array::from_fn(|j| d1(std::array::from_fn(|k| yt[j][k].0)));
    let u_ty = d1(u_t) * (1.0 / (hy * ht));

    let u_xx = d2(std::array::from_fn(|c| u(c + 2, 2))) * (1.0 / (hx * hx));
    let v_x = d1(std::array::from_fn(|c| plane[c + 2][2].1)) * (1.0 / hx);
    let u_x = ux_at(4, 2);
    let v_t = d1(std::array::from_fn(|k| yt[2][k].1)) * (1.0 / ht);

    let centre = plane[4][2].0;
    let eq1a = u_ty - flux_xy - u_xx * 2.0;
    let eq1b = v_t - u_x - centre * v_x * 2.0;
    Some((eq1a, eq1b))
}

/// Signed residuals `(eq1a, eq1b)` at one point, or `None` if any stencil
/// evaluation fails.
pub fn point_residual<F: FieldPair + ?Sized>(
    fields: &F,
    x: f64,
    y: f64,
    t: f64,
    steps: &Steps,
) -> Option<(F::Value, F::Value)> {
    residual_from_offsets(steps, |i, j, k| {
        fields.uv(coord(x, i, steps.hx), coord(y, j, steps.hy), coord(t, k, steps.ht))
    })
}

fn node(min: f64, max: f64, n: usize, i: usize) -> f64 {
    if n == 1 {
        0.5 * (min + max)
    } else {
        min + (max - min) * i as f64 / (n - 1) as f64
    }
}

/// Grid nodes (endpoints included) of the verification window.
pub fn grid_nodes(window: &Window, nx: usize, ny: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
    (0..ny).flat_map(move |j| {
        let y = node(window.y_min, window.y_max, ny, j);
        (0..nx).map(move |i| (node(window.x_min, window.x_max, nx, i), y))
    })
}

/// Running maximum in which a NaN, once seen, sticks.
fn raise(max: &mut f64, at: &mut Option<[f64; 2]>, value: f64, point: [f64; 2]) {
    if max.is_nan() {
        return;
    }
    if at.is_none() || value.is_nan() || value > *max {
        *max = value;
        *at = Some(point);
    }
}

/// Maximum residuals of the governing system over an `nx × ny` node grid.
pub fn residual_eq1<F: FieldPair + ?Sized>(
    fields: &F,
    window: &Window,
    nx: usize,
    ny: usize,
    t: f64,
    steps: Steps,
) -> Result<ResidualReport, VerifyError> {
    if nx == 0 || ny == 0 {
        return Err(VerifyError::BadResolution { nx, ny });
    }
    steps.check()?;
    let points: Vec<(f64, f64)> = grid_nodes(window, nx, ny).collect();
    let results: Vec<Option<(f64, f64)>> = points
        .par_iter()
        .map(|&(x, y)| point_residual(fields, x, y, t, &steps).map(|(a, b)| (a.magnitude(), b.magnitude())))
        .collect();

    let total = points.len();
    let masked = results.iter().filter(|r| r.is_none()).count();
    if masked as f64 > MAX_MASKED_FRACTION * total as f64 {
        return Err(VerifyError::TooManyMasked { masked, total });
    }

    let mut report = ResidualReport {
        max_abs_res_eq1a: 0.0,
        max_abs_res_eq1b: 0.0,
        worst_point_eq1a: None,
        worst_point_eq1b: None,
        window: *window,
        nx,
        ny,
        t,
        steps,
        points_checked: total - masked,
        points_masked: masked,
    };
    for (&(x, y), r) in points.iter().zip(&results) {
        let Some((a, b)) = *r else { continue };
        raise(&mut report.max_abs_res_eq1a, &mut report.worst_point_eq1a, a, [x, y]);
        raise(&mut report.max_abs_res_eq1b, &mut report.worst_point_eq1b, b, [x, y]);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Step sets used, coarsest first.
    pub steps: Vec<Steps>,
    pub max_res_eq1a: Vec<f64>,
    pub max_res_eq1b: Vec<f64>,
    /// `log2(R(h) / R(h/2))` of the maximum residual, per halving. Meaningful
    /// when the fields are an exact solution, so that `R` is pure truncation.
    pub residual_order_eq1a: Vec<f64>,
    pub residual_order_eq1b: Vec<f64>,
    /// `log2(Δ(h) / Δ(h/2))` with `Δ(h) = max |R_h - R_{h/2}|` pointwise; the
    /// stencil order whether or not the residual itself converges to zero.
    pub self_convergence_order_eq1a: Option<f64>,
    pub self_convergence_order_eq1b: Option<f64>,
}

type PointResidual<V> = Option<(V, V)>;

/// Residuals at `steps`, `steps/2`, `steps/4` and the observed orders.
pub fn convergence_study<F: FieldPair + ?Sized>(
    fields: &F,
    window: &Window,
    nx: usize,
    ny: usize,
    t: f64,
    steps: Steps,
) -> Result<ConvergenceReport, VerifyError> {
    let ladder = [steps, steps.halved(), steps.halved().halved()];
    let points: Vec<(f64, f64)> = grid_nodes(window, nx, ny).collect();
    let per_step: Vec<Vec<PointResidual<F::Value>>> = ladder
        .iter()
        .map(|s| points.par_iter().map(|&(x, y)| point_residual(fields, x, y, t, s)).collect())
        .collect();

    let mut max_a = Vec::new();
    let mut max_b = Vec::new();
    for s in &ladder {
        let r = residual_eq1(fields, window, nx, ny, t, *s)?;
        max_a.push(r.max_abs_res_eq1a);
        max_b.push(r.max_abs_res_eq1b);
    }
    let order = |m: &[f64]| m.windows(2).map(|w| (w[0] / w[1]).log2()).collect::<Vec<_>>();

    let delta = |coarse: &[PointResidual<F::Value>], fine: &[PointResidual<F::Value>]| {
        let mut da = 0.0_f64;
        let mut db = 0.0_f64;
        for (c, f) in coarse.iter().zip(fine) {
            if let (Some(c), Some(f)) = (c, f) {
                da = da.max((c.0 - f.0).magnitude());
                db = db.max((c.1 - f.1).magnitude());
            }
        }
        (da, db)
    };
    let (a01, b01) = delta(&per_step[0], &per_step[1]);
    let (a12, b12) = delta(&per_step[1], &per_step[2]);
    let ratio = |num: f64, den: f64| (num > 0.0 && den > 0.0).then(|| (num / den).log2());

    Ok(ConvergenceReport {
        steps: ladder.to_vec(),
        residual_order_eq1a: order(&max_a),
        residual_order_eq1b: order(&max_b),
        max_res_eq1a: max_a,
        max_res_eq1b: max_b,
        self_convergence_order_eq1a: ratio(a01, a12),
        self_convergence_order_eq1b: ratio(b01, b12),
    })
}

/// Field values captured at every stencil point of a verification grid and
/// replayed by exact coordinate lookup (no interpolation).
pub struct SampledPair<V> {
    values: HashMap<(u64, u64, u64), Option<(V, V)>>,
}

impl<V: FieldValue> SampledPair<V> {
    pub fn capture<F: FieldPair<Value = V> + ?Sized>(
        fields: &F,
        window: &Window,
        nx: usize,
        ny: usize,
        t: f64,
        steps: &Steps,
    ) -> Self {
        let mut values = HashMap::new();
        for (x, y) in grid_nodes(window, nx, ny) {
            let _ = residual_from_offsets::<V>(steps, |i, j, k| {
                let p = (coord(x, i, steps.hx), coord(y, j, steps.hy), coord(t, k, steps.ht));
                let value = *values
                    .entry((p.0.to_bits(), p.1.to_bits(), p.2.to_bits()))
                    .or_insert_with(|| fields.uv(p.0, p.1, p.2));
                // keep walking the full stencil even past a masked point
                Some(value.unwrap_or((V::zero(), V::zero())))
            });
        }
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<V: FieldValue> FieldPair for SampledPair<V> {
    type Value = V;

    fn uv(&self, x: f64, y: f64, t: f64) -> Option<(V, V)> {
        self.values.get(&(x.to_bits(), y.to_bits(), t.to_bits())).copied().flatten()
    }
}
