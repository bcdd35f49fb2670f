//! Comparison of the closed-form gradient `U` against numeric `∂u₂/∂y` and `∂v₂/∂x`.
//!
//! This is a report, not a check: nothing here asserts that the two agree.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sampler::Window;
use crate::solutions::{gradient_u, u2_v2, Ansatz, GradientVariant, SolutionParams};

const D1: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];

pub const DEFAULT_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientSample {
    pub x: f64,
    pub y: f64,
    pub u2_y: f64,
    pub v2_x: f64,
    pub literal_x: f64,
    pub consistent_psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub max_abs: f64,
    /// Largest `|a - b| / max(|a|, |b|)` over points where either is nonzero.
    pub max_rel: f64,
    pub rms: f64,
}

impl Discrepancy {
    fn between(pairs: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut max_abs, mut max_rel, mut sum_sq, mut n) = (0.0f64, 0.0f64, 0.0, 0usize);
        for (a, b) in pairs {
            let d = (a - b).abs();
            max_abs = max_abs.max(d);
            let scale = a.abs().max(b.abs());
            if scale > 0.0 {
                max_rel = max_rel.max(d / scale);
            }
            sum_sq += d * d;
            n += 1;
        }
        let rms = if n == 0 { 0.0 } else { (sum_sq / n as f64).sqrt() };
        Self { max_abs, max_rel, rms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub window: Window,
    pub nx: usize,
    pub ny: usize,
    pub delta: f64,
    pub t: f64,
    pub step: f64,
    pub points_checked: usize,
    pub points_masked: usize,
    /// `U` (argument `x + φ`) against numeric `∂u₂/∂y`.
    pub literal_vs_u2y: Discrepancy,
    /// `U` (argument `ψ + φ`) against numeric `∂u₂/∂y`.
    pub consistent_vs_u2y: Discrepancy,
    /// Numeric `∂u₂/∂y` against numeric `∂v₂/∂x`.
    pub u2y_vs_v2x: Discrepancy,
    pub samples: Vec<GradientSample>,
}

fn sample_at<A: Ansatz + Sync + ?Sized>(
    params: &SolutionParams,
    family: &A,
    x: f64,
    y: f64,
    h: f64,
) -> Option<GradientSample> {
    let mut u2_y = 0.0;
    let mut v2_x = 0.0;
    for (k, w) in D1.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        let o = (k as f64 - 2.0) * h;
        u2_y += w * u2_v2(params, family, x, y + o).ok()?.0;
        v2_x += w * u2_v2(params, family, x + o, y).ok()?.1;
    }
    Some(GradientSample {
        x,
        y,
        u2_y: u2_y / h,
        v2_x: v2_x / h,
        literal_x: gradient_u(params, family, GradientVariant::LiteralX, x, y).ok()?,
        consistent_psi: gradient_u(params, family, GradientVariant::ConsistentPsi, x, y).ok()?,
    })
}

/// Evaluates all four quantities on an `nx × ny` grid (inclusive endpoints).
pub fn gradient_consistency<A: Ansatz + Sync + ?Sized>(
    params: &SolutionParams,
    family: &A,
    window: &Window,
    nx: usize,
    ny: usize,
    step: f64,
) -> ConsistencyReport {
    let node = |lo: f64, hi: f64, n: usize, i: usize| if n == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
    let total = nx * ny;
    let samples: Vec<GradientSample> = (0..total)
        .into_par_iter()
        .filter_map(|k| {
            let x = node(window.x_min, window.x_max, nx, k % nx);
            let y = node(window.y_min, window.y_max, ny, k / nx);
            sample_at(params, family, x, y, step)
        })
        .collect();
    ConsistencyReport {
        window: *window,
        nx,
        ny,
        delta: params.delta(),
        t: params.t(),
        step,
        points_checked: samples.len(),
        points_masked: total - samples.len(),
        literal_vs_u2y: Discrepancy::between(samples.iter().map(|s| (s.literal_x, s.u2_y))),
        consistent_vs_u2y: Discrepancy::between(samples.iter().map(|s| (s.consistent_psi, s.u2_y))),
        u2y_vs_v2x: Discrepancy::between(samples.iter().map(|s| (s.u2_y, s.v2_x))),
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::{AnsatzFamily, AnsatzKind};

    #[test]
    fn report_covers_every_point() {
        let f = AnsatzFamily::new(AnsatzKind::TypeIII);
        let p = SolutionParams::new(1.0, 0.0).unwrap();
        let w = Window::new(0.5, 1.5, 0.5, 1.5).unwrap();
        let r = gradient_consistency(&p, &f, &w, 5, 4, DEFAULT_STEP);
        assert_eq!(r.points_checked + r.points_masked, 20);
        assert_eq!(r.samples.len(), r.points_checked);
        assert_eq!(r.samples[0].x, 0.5);
        assert_eq!(r.samples.last().unwrap().y, 1.5);
    }

    // independent sympy differentiation of the printed u₂ at (0.7, 0.9), t = 0
    #[test]
    fn numeric_cross_derivatives_match_symbolic_values() {
        let f = AnsatzFamily::new(AnsatzKind::TypeIII);
        let p = SolutionParams::new(1.0, 0.0).unwrap();
        let s = sample_at(&p, &f, 0.7, 0.9, DEFAULT_STEP).unwrap();
        assert!((s.u2_y - s.v2_x).abs() < 1e-7);
        assert!((s.u2_y - 0.025112).abs() < 1e-5);
        assert!((s.literal_x - 0.043542).abs() < 1e-5);
        assert!((s.consistent_psi - 0.026634).abs() < 1e-5);
    }

    #[test]
    fn discrepancy_arithmetic() {
        let d = Discrepancy::between([(1.0, 1.5), (0.0, 0.0), (-2.0, -2.0)].into_iter());
        assert_eq!(d.max_abs, 0.5);
        assert!((d.max_rel - 1.0 / 3.0).abs() < 1e-15);
        assert!((d.rms - (0.25f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
