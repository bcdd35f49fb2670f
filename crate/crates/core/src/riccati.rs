//! Riccati equation `ζ' = δζ + ζ²`, its closed-form branches, and the
//! coefficient functions of the truncated projective ansatz
//!
//! ```text
//! u = a1 + b1 ζ(q) + c1 sqrt(δζ + ζ²)
//! v = a2 + b2 ζ(q) + c2 sqrt(δζ + ζ²)
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{coth_guarded, DEFAULT_POLE_GUARD};

/// Default central-difference step for residual self-checks.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum RiccatiError {
    #[error("q = {q} lies within {limit} of the pole at q = 0")]
    NearPole { q: f64, limit: f64 },
    #[error("finite-difference step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("degenerate phase: q_x = 0")]
    DegeneratePhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchKind {
    /// δ > 0
    Coth,
    /// δ < 0
    Tanh,
    /// δ = 0
    Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiccatiBranch {
    delta: f64,
    kind: BranchKind,
}

impl RiccatiBranch {
    pub fn new(delta: f64) -> Self {
        let kind = if delta > 0.0 {
            BranchKind::Coth
        } else if delta < 0.0 {
            BranchKind::Tanh
        } else {
            BranchKind::Rational
        };
        Self { delta, kind }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kind(&self) -> BranchKind {
        self.kind
    }

    /// Whether the branch is singular at `q = 0`.
    pub fn has_pole(&self) -> bool {
        !matches!(self.kind, BranchKind::Tanh)
    }
}

/// The branch solution ζ(q), or `None` at a pole.
pub fn zeta(branch: RiccatiBranch, q: f64) -> Option<f64> {
    if !q.is_finite() {
        return None;
    }
    let d = branch.delta;
    match branch.kind {
        BranchKind::Coth => coth_guarded(0.5 * d * q, DEFAULT_POLE_GUARD).map(|c| -0.5 * d * (1.0 + c)),
        BranchKind::Tanh => Some(-0.5 * d * (1.0 + (0.5 * d * q).tanh())),
        BranchKind::Rational => {
            if q.abs() < DEFAULT_POLE_GUARD {
                None
            } else {
                Some(-1.0 / q)
            }
        }
    }
}

fn checked_zeta(branch: RiccatiBranch, q: f64, h: f64) -> Result<f64, RiccatiError> {
    zeta(branch, q).ok_or(RiccatiError::NearPole { q, limit: 10.0 * h })
}

fn check_step(branch: RiccatiBranch, q: f64, h: f64) -> Result<(), RiccatiError> {
    if !(h.is_finite() && h > 0.0) {
        return Err(RiccatiError::BadStep(h));
    }
    if branch.has_pole() && q.abs() <= 10.0 * h {
        return Err(RiccatiError::NearPole { q, limit: 10.0 * h });
    }
    Ok(())
}

/// `|ζ'(q) - δζ(q) - ζ(q)²|` with ζ' from a second-order central difference.
pub fn riccati_residual(branch: RiccatiBranch, q: f64, h: f64) -> Result<f64, RiccatiError> {
    check_step(branch, q, h)?;
    let plus = checked_zeta(branch, q + h, h)?;
    let minus = checked_zeta(branch, q - h, h)?;
    let z = checked_zeta(branch, q, h)?;
    let derivative = (plus - minus) / (2.0 * h);
    Ok((derivative - branch.delta * z - z * z).abs())
}

/// Like [`riccati_residual`] but with one Richardson extrapolation step
/// (steps `h` and `h/2`), which lifts the derivative to fourth order.
pub fn riccati_residual_richardson(branch: RiccatiBranch, q: f64, h: f64) -> Result<f64, RiccatiError> {
    check_step(branch, q, h)?;
    let central = |step: f64| -> Result<f64, RiccatiError> {
        let plus = checked_zeta(branch, q + step, h)?;
        let minus = checked_zeta(branch, q - step, h)?;
        Ok((plus - minus) / (2.0 * step))
    };
    let coarse = central(h)?;
    let fine = central(0.5 * h)?;
    let derivative = (4.0 * fine - coarse) / 3.0;
    let z = checked_zeta(branch, q, h)?;
    Ok((derivative - branch.delta * z - z * z).abs())
}

/// The phase `q` and every partial derivative that enters the coefficient
/// functions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SeparatedPhase {
    pub q: f64,
    pub q_x: f64,
    pub q_y: f64,
    pub q_t: f64,
    pub q_xx: f64,
    pub q_xy: f64,
    pub q_xt: f64,
    pub q_xxx: f64,
    pub q_xxy: f64,
    pub q_xxxy: f64,
}

impl SeparatedPhase {
    /// Phase of the form `q = ψ(x, t) + φ(y)`: every mixed x–y partial is zero.
    #[allow(clippy::too_many_arguments)]
    pub fn separated(q: f64, q_x: f64, q_y: f64, q_t: f64, q_xx: f64, q_xt: f64, q_xxx: f64) -> Self {
        Self {
            q,
            q_x,
            q_y,
            q_t,
            q_xx,
            q_xt,
            q_xxx,
            ..Self::default()
        }
    }

    pub fn is_separated(&self) -> bool {
        self.q_xy == 0.0 && self.q_xxy == 0.0 && self.q_xxxy == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub a1: f64,
    pub b1: f64,
    pub c1: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
}

/// Coefficient functions of the truncated ansatz at one point.
pub fn coefficients(phase: &SeparatedPhase, delta: f64) -> Result<CoefficientSet, RiccatiError> {
    let SeparatedPhase {
        q_x,
        q_y,
        q_t,
        q_xx,
        q_xy,
        q_xt,
        q_xxx,
        q_xxy,
        q_xxxy,
        ..
    } = *phase;
    if q_x == 0.0 {
        return Err(RiccatiError::DegeneratePhase);
    }
    let a1 = -0.25 * (-2.0 * q_t + 2.0 * q_xx + delta * q_x * q_x) / q_x;
    let b1 = -0.5 * q_x;
    let c1 = 0.5 * q_x;
    let a2 = -0.5 * q_y;
    let b2 = 0.5 * q_y;

    let qx2 = q_x * q_x;
    let bracket = qx2 * q_x * q_xy * delta - 2.0 * q_x * q_xy * q_xxx
        + 2.0 * q_x * q_xxy * q_t
        + 2.0 * q_x * q_xy * q_xt
        + 2.0 * q_xxxy * qx2
        - 2.0 * q_xy * qx2
        + 2.0 * q_xy * q_t * q_x
        + 4.0 * q_xy * q_xx
        - 4.0 * q_xx * q_xy * q_t
        - 4.0 * q_xx * q_xxy * q_x;
    let c2 = -0.25 * bracket / qx2;

    Ok(CoefficientSet { a1, b1, c1, a2, b2, c2 })
}
