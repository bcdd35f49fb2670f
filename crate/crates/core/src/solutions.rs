//! Separated ansatz families `q = ψ(x, t) + φ(y)` and the closed-form BLP
//! fields built from them: the complex pair `(u₁, v₁)` (tanh branch), the real
//! pair `(u₂, v₂)` (coth branch) and the cross-derivative field `U`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{coth_guarded, csch_guarded, jacobi_sn_cn_dn, EllipticModulus};

/// Guard radius around `x + t = 0` (or `x = 0`), `y = 0`, and hyperbolic poles.
pub const SINGULARITY_GUARD: f64 = 1e-9;

/// Default relative step for numeric ψ/φ derivatives.
pub const DEFAULT_NUMERIC_STEP: f64 = 1e-3;

/// Modulus used by the elliptic family unless overridden.
pub const DEFAULT_ELLIPTIC_MODULUS: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Singularity {
    /// `log` argument of ψ vanishes.
    PsiLog,
    /// `log` argument of φ vanishes.
    PhiLog,
    /// coth/csch pole of the hyperbolic argument.
    HyperbolicPole,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum PointError {
    #[error("point masked near {0:?}")]
    Masked(Singularity),
    #[error("degenerate phase: psi_x = 0")]
    DegeneratePhase,
}

impl PointError {
    pub fn is_masked(&self) -> bool {
        matches!(self, PointError::Masked(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ParamError {
    #[error("delta must be finite and nonzero, got {0}")]
    BadDelta(f64),
    #[error("time slice must be finite, got {0}")]
    BadTime(f64),
    #[error("numeric derivative step must lie in (0, 0.1], got {0}")]
    BadStep(f64),
}

/// δ and the time slice `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct SolutionParams {
    delta: f64,
    t: f64,
}

#[derive(Deserialize)]
struct RawParams {
    delta: f64,
    t: f64,
}

impl TryFrom<RawParams> for SolutionParams {
    type Error = ParamError;

    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        Self::new(raw.delta, raw.t)
    }
}

impl SolutionParams {
    pub fn new(delta: f64, t: f64) -> Result<Self, ParamError> {
        if !delta.is_finite() || delta == 0.0 {
            return Err(ParamError::BadDelta(delta));
        }
        if !t.is_finite() {
            return Err(ParamError::BadTime(t));
        }
        Ok(Self { delta, t })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn t(&self) -> f64 {
        self.t
    }
}

impl Default for SolutionParams {
    fn default() -> Self {
        Self { delta: 1.0, t: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnsatzKind {
    /// Exponential envelope around `cos(log s²) + sin(log s²)`.
    TypeI,
    /// Exponential envelope around Jacobi `dn`/`sn` of `sin²`/`cos²(log ·²)`.
    TypeII,
    /// Rational envelope `s/(1+s⁴)` times `sin²`/`cos²(log ·²)`.
    TypeIII,
}

impl AnsatzKind {
    pub fn from_index(index: u8) -> Option<Self> {
        match index {
            1 => Some(Self::TypeI),
            2 => Some(Self::TypeII),
            3 => Some(Self::TypeIII),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::TypeI => "type-I",
            Self::TypeII => "type-II",
            Self::TypeIII => "type-III",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DerivativeMode {
    Analytic,
    /// Fourth-order central differences with step `step · min(1, d)`, where `d`
    /// is the distance to the nearest log singularity.
    Numeric { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnsatzFamily {
    pub kind: AnsatzKind,
    /// Only read by [`AnsatzKind::TypeII`].
    pub modulus: EllipticModulus,
    pub derivative_mode: DerivativeMode,
}

/// Partial derivatives of ψ at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiDerivs {
    pub psi_x: f64,
    pub psi_xx: f64,
    pub psi_t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GradientVariant {
    /// Hyperbolic argument `δ(x + φ)/2`.
    LiteralX,
    /// Hyperbolic argument `δ(ψ + φ)/2`, matching `(u₂, v₂)`.
    ConsistentPsi,
}

impl GradientVariant {
    pub fn label(&self) -> &'static str {
        match self {
            Self::LiteralX => "literal",
            Self::ConsistentPsi => "consistent",
        }
    }
}

fn elliptic_term(a: f64, s: f64, modulus: EllipticModulus) -> f64 {
    let log = (a * a).ln();
    let (sin_l, cos_l) = log.sin_cos();
    // Arguments lie in [0, 1], well inside the accurate range.
    let dn = jacobi_sn_cn_dn(sin_l * sin_l, modulus).map(|j| j.dn).unwrap_or(f64::NAN);
    let sn = jacobi_sn_cn_dn(cos_l * cos_l, modulus).map(|j| j.sn).unwrap_or(f64::NAN);
    1.0 + (1.0 - s * (s + dn + sn)).exp()
}

fn rational_envelope(s: f64) -> f64 {
    s / (1.0 + s.powi(4))
}

fn d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn d2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h * h)
}

impl AnsatzFamily {
    pub fn new(kind: AnsatzKind) -> Self {
        let derivative_mode = match kind {
            AnsatzKind::TypeII => DerivativeMode::Numeric { step: DEFAULT_NUMERIC_STEP },
            _ => DerivativeMode::Analytic,
        };
        Self {
            kind,
            modulus: EllipticModulus::new(DEFAULT_ELLIPTIC_MODULUS).expect("default modulus is valid"),
            derivative_mode,
        }
    }

    pub fn with_modulus(mut self, modulus: EllipticModulus) -> Self {
        self.modulus = modulus;
        self
    }

    pub fn with_derivative_mode(mut self, mode: DerivativeMode) -> Result<Self, ParamError> {
        if let DerivativeMode::Numeric { step } = mode {
            if !(step > 0.0 && step <= 0.1) {
                return Err(ParamError::BadStep(step));
            }
        }
        self.derivative_mode = mode;
        Ok(self)
    }

    /// Coordinate whose vanishing makes ψ's logarithm singular.
    fn psi_log_coordinate(&self, x: f64, t: f64) -> f64 {
        match self.kind {
            AnsatzKind::TypeII => x,
            _ => x + t,
        }
    }

    fn psi_unchecked(&self, x: f64, t: f64) -> f64 {
        match self.kind {
            AnsatzKind::TypeI => {
                let s = x + t;
                let (sin_l, cos_l) = (s * s).ln().sin_cos();
                1.0 + (-s * (s + cos_l + sin_l)).exp()
            }
            AnsatzKind::TypeII => elliptic_term(x, x + t, self.modulus),
            AnsatzKind::TypeIII => {
                let s = x + t;
                let sin_l = (s * s).ln().sin();
                1.0 + rational_envelope(s) * sin_l * sin_l
            }
        }
    }

    fn phi_unchecked(&self, y: f64, t: f64) -> f64 {
        match self.kind {
            AnsatzKind::TypeI => {
                let (sin_l, cos_l) = (y * y).ln().sin_cos();
                1.0 + (-y * (y + cos_l + sin_l)).exp()
            }
            AnsatzKind::TypeII => elliptic_term(y, y + t, self.modulus),
            AnsatzKind::TypeIII => {
                let cos_l = (y * y).ln().cos();
                1.0 + rational_envelope(y) * cos_l * cos_l
            }
        }
    }

    fn check_psi(&self, x: f64, t: f64) -> Result<(), PointError> {
        let d = self.psi_log_coordinate(x, t).abs();
        if d.is_nan() || d < SINGULARITY_GUARD {
            return Err(PointError::Masked(Singularity::PsiLog));
        }
        Ok(())
    }

    fn check_phi(&self, y: f64) -> Result<(), PointError> {
        if y.is_nan() || y.abs() < SINGULARITY_GUARD {
            return Err(PointError::Masked(Singularity::PhiLog));
        }
        Ok(())
    }

    pub fn psi(&self, x: f64, t: f64) -> Result<f64, PointError> {
        self.check_psi(x, t)?;
        Ok(self.psi_unchecked(x, t))
    }

    pub fn phi(&self, y: f64, t: f64) -> Result<f64, PointError> {
        self.check_phi(y)?;
        Ok(self.phi_unchecked(y, t))
    }

    fn effective_mode(&self) -> DerivativeMode {
        match (self.kind, self.derivative_mode) {
            (AnsatzKind::TypeII, DerivativeMode::Analytic) => DerivativeMode::Numeric { step: DEFAULT_NUMERIC_STEP },
            (_, mode) => mode,
        }
    }

    /// Absolute step for a numeric derivative at distance `dist` from the
    /// singular coordinate; fails if the 4-step window would reach the guard.
    fn numeric_step(step: f64, dist: f64, singularity: Singularity) -> Result<f64, PointError> {
        let h = step * dist.min(1.0);
        if dist - 4.0 * h < SINGULARITY_GUARD {
            return Err(PointError::Masked(singularity));
        }
        Ok(h)
    }

    pub fn psi_derivs(&self, x: f64, t: f64) -> Result<PsiDerivs, PointError> {
        self.check_psi(x, t)?;
        match self.effective_mode() {
            DerivativeMode::Analytic => Ok(self.psi_derivs_analytic(x, t)),
            DerivativeMode::Numeric { step } => {
                let dist = self.psi_log_coordinate(x, t).abs();
                let h = Self::numeric_step(step, dist, Singularity::PsiLog)?;
                let in_x = |xx: f64| self.psi_unchecked(xx, t);
                let psi_x = d1(in_x, x, h);
                let psi_xx = d2(in_x, x, h);
                let psi_t = d1(|tt: f64| self.psi_unchecked(x, tt), t, h);
                Ok(PsiDerivs { psi_x, psi_xx, psi_t })
            }
        }
    }

    pub fn phi_y(&self, y: f64, t: f64) -> Result<f64, PointError> {
        self.check_phi(y)?;
        match self.effective_mode() {
            DerivativeMode::Analytic => Ok(self.phi_y_analytic(y)),
            DerivativeMode::Numeric { step } => {
                let h = Self::numeric_step(step, y.abs(), Singularity::PhiLog)?;
                Ok(d1(|yy: f64| self.phi_unchecked(yy, t), y, h))
            }
        }
    }

    fn psi_derivs_analytic(&self, x: f64, t: f64) -> PsiDerivs {
        let s = x + t;
        match self.kind {
            AnsatzKind::TypeI => {
                // ψ = 1 + E, E = exp(-s(s + cos L + sin L)), L = ln s².
                let (sin_l, cos_l) = (s * s).ln().sin_cos();
                let e = (-s * (s + cos_l + sin_l)).exp();
                let g = 2.0 * s + 3.0 * cos_l - sin_l;
                let g_s = 2.0 - (6.0 * sin_l + 2.0 * cos_l) / s;
                let psi_x = -e * g;
                PsiDerivs {
                    psi_x,
                    psi_xx: e * (g * g - g_s),
                    psi_t: psi_x,
                }
            }
            AnsatzKind::TypeIII => {
                // ψ = 1 + r(s) S(s), r = s/(1+s⁴), S = sin² L.
                let s4 = s.powi(4);
                let den = 1.0 + s4;
                let r = s / den;
                let r_s = (1.0 - 3.0 * s4) / (den * den);
                let r_ss = (12.0 * s4 * s.powi(3) - 20.0 * s.powi(3)) / (den * den * den);
                let l = (s * s).ln();
                let sin_l = l.sin();
                let (sin_2l, cos_2l) = (2.0 * l).sin_cos();
                let big_s = sin_l * sin_l;
                let big_s_s = 2.0 * sin_2l / s;
                let big_s_ss = (8.0 * cos_2l - 2.0 * sin_2l) / (s * s);
                let psi_x = r_s * big_s + r * big_s_s;
                PsiDerivs {
                    psi_x,
                    psi_xx: r_ss * big_s + 2.0 * r_s * big_s_s + r * big_s_ss,
                    psi_t: psi_x,
                }
            }
            AnsatzKind::TypeII => unreachable!("elliptic family is numeric-only"),
        }
    }

    fn phi_y_analytic(&self, y: f64) -> f64 {
        match self.kind {
            AnsatzKind::TypeI => {
                let (sin_l, cos_l) = (y * y).ln().sin_cos();
                let e = (-y * (y + cos_l + sin_l)).exp();
                -e * (2.0 * y + 3.0 * cos_l - sin_l)
            }
            AnsatzKind::TypeIII => {
                let y4 = y.powi(4);
                let den = 1.0 + y4;
                let l = (y * y).ln();
                let cos_l = l.cos();
                let r = y / den;
                let r_y = (1.0 - 3.0 * y4) / (den * den);
                r_y * cos_l * cos_l - r * 2.0 * (2.0 * l).sin() / y
            }
            AnsatzKind::TypeII => unreachable!("elliptic family is numeric-only"),
        }
    }
}

/// A separated phase `q = ψ(x, t) + φ(y)` with the partial derivatives the
/// closed-form fields need.
pub trait Ansatz {
    fn psi(&self, x: f64, t: f64) -> Result<f64, PointError>;
    fn phi(&self, y: f64, t: f64) -> Result<f64, PointError>;
    fn psi_derivs(&self, x: f64, t: f64) -> Result<PsiDerivs, PointError>;
    fn phi_y(&self, y: f64, t: f64) -> Result<f64, PointError>;
}

impl Ansatz for AnsatzFamily {
    fn psi(&self, x: f64, t: f64) -> Result<f64, PointError> {
        AnsatzFamily::psi(self, x, t)
    }

    fn phi(&self, y: f64, t: f64) -> Result<f64, PointError> {
        AnsatzFamily::phi(self, y, t)
    }

    fn psi_derivs(&self, x: f64, t: f64) -> Result<PsiDerivs, PointError> {
        AnsatzFamily::psi_derivs(self, x, t)
    }

    fn phi_y(&self, y: f64, t: f64) -> Result<f64, PointError> {
        AnsatzFamily::phi_y(self, y, t)
    }
}

/// Everything `U` needs at one point. ψ-parts depend on `x` only and φ-parts on
/// `y` only, so grid sweeps can compute them once per column/row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientParts {
    pub x: f64,
    pub psi: f64,
    pub psi_x: f64,
    pub phi: f64,
    pub phi_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiParts {
    pub psi: f64,
    pub psi_x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiParts {
    pub phi: f64,
    pub phi_y: f64,
}

pub fn psi_parts<A: Ansatz + ?Sized>(params: &SolutionParams, family: &A, x: f64) -> Result<PsiParts, PointError> {
    let psi = family.psi(x, params.t)?;
    let psi_x = family.psi_derivs(x, params.t)?.psi_x;
    Ok(PsiParts { psi, psi_x })
}

pub fn phi_parts<A: Ansatz + ?Sized>(params: &SolutionParams, family: &A, y: f64) -> Result<PhiParts, PointError> {
    let phi = family.phi(y, params.t)?;
    let phi_y = family.phi_y(y, params.t)?;
    Ok(PhiParts { phi, phi_y })
}

/// `-(1/8) ψ_x φ_y δ² csch z (csch z + coth z)` from precomputed parts.
pub fn gradient_from_parts(
    params: &SolutionParams,
    variant: GradientVariant,
    x: f64,
    psi: PsiParts,
    phi: PhiParts,
) -> Result<f64, PointError> {
    let delta = params.delta;
    let lead = match variant {
        GradientVariant::LiteralX => x,
        GradientVariant::ConsistentPsi => psi.psi,
    };
    let z = 0.5 * delta * (lead + phi.phi);
    let pole = PointError::Masked(Singularity::HyperbolicPole);
    let csch = csch_guarded(z, SINGULARITY_GUARD).ok_or(pole)?;
    let coth = coth_guarded(z, SINGULARITY_GUARD).ok_or(pole)?;
    Ok(-0.125 * psi.psi_x * phi.phi_y * delta * delta * csch * (csch + coth))
}

/// The cross-derivative field `U` at `(x, y)`.
pub fn gradient_u<A: Ansatz + ?Sized>(
    params: &SolutionParams,
    family: &A,
    variant: GradientVariant,
    x: f64,
    y: f64,
) -> Result<f64, PointError> {
    let psi = psi_parts(params, family, x)?;
    let phi = phi_parts(params, family, y)?;
    gradient_from_parts(params, variant, x, psi, phi)
}

struct PhaseAt {
    psi: f64,
    d: PsiDerivs,
    phi: f64,
    phi_y: f64,
}

fn phase_at<A: Ansatz + ?Sized>(params: &SolutionParams, family: &A, x: f64, y: f64) -> Result<PhaseAt, PointError> {
    let psi = family.psi(x, params.t)?;
    let phi = family.phi(y, params.t)?;
    let d = family.psi_derivs(x, params.t)?;
    let phi_y = family.phi_y(y, params.t)?;
    if d.psi_x == 0.0 {
        return Err(PointError::DegeneratePhase);
    }
    Ok(PhaseAt { psi, d, phi, phi_y })
}

/// Complex tanh-branch pair `(u₁, v₁)`. `tanh² - 1 = -sech²` is negative, so the
/// principal square root is `i·sech` and both fields are complex.
pub fn u1_v1<A: Ansatz + ?Sized>(
    params: &SolutionParams,
    family: &A,
    x: f64,
    y: f64,
) -> Result<(Complex64, Complex64), PointError> {
    let p = phase_at(params, family, x, y)?;
    let delta = params.delta;
    let z = 0.5 * delta * (p.psi + p.phi);
    let tanh = z.tanh();
    let sech = 1.0 / z.cosh();
    let radical = Complex64::new(-sech * sech, 0.0).sqrt();
    let product = radical * tanh;
    let base = 0.5 * (-p.d.psi_xx + p.d.psi_t) / p.d.psi_x;
    let u = Complex64::new(base, 0.0) + product * (0.25 * p.d.psi_x * delta);
    let v = (product + 1.0) * (0.25 * delta * p.phi_y);
    Ok((u, v))
}

/// Real coth-branch pair `(u₂, v₂)`. `sqrt(coth² - 1)` is taken as `|csch|`.
pub fn u2_v2<A: Ansatz + ?Sized>(params: &SolutionParams, family: &A, x: f64, y: f64) -> Result<(f64, f64), PointError> {
    let p = phase_at(params, family, x, y)?;
    let delta = params.delta;
    let z = 0.5 * delta * (p.psi + p.phi);
    let pole = PointError::Masked(Singularity::HyperbolicPole);
    let coth = coth_guarded(z, SINGULARITY_GUARD).ok_or(pole)?;
    let csch = csch_guarded(z, SINGULARITY_GUARD).ok_or(pole)?;
    let product = coth * csch.abs();
    let base = 0.5 * (-p.d.psi_xx + p.d.psi_t) / p.d.psi_x;
    let u = base + 0.25 * p.d.psi_x * delta * product;
    let v = 0.25 * delta * p.phi_y * (1.0 + product);
    Ok((u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn params() -> SolutionParams {
        SolutionParams::new(1.0, 0.0).unwrap()
    }

    fn numeric(kind: AnsatzKind) -> AnsatzFamily {
        AnsatzFamily::new(kind)
            .with_derivative_mode(DerivativeMode::Numeric { step: DEFAULT_NUMERIC_STEP })
            .unwrap()
    }

    #[test]
    fn params_reject_zero_delta() {
        assert!(matches!(SolutionParams::new(0.0, 0.0), Err(ParamError::BadDelta(_))));
        assert!(serde_json::from_str::<SolutionParams>(r#"{"delta":0.0,"t":0.0}"#).is_err());
        let p: SolutionParams = serde_json::from_str(r#"{"delta":2.0,"t":1.0}"#).unwrap();
        assert_eq!((p.delta(), p.t()), (2.0, 1.0));
    }

    #[test]
    fn type_three_psi_at_unit_argument() {
        let f = AnsatzFamily::new(AnsatzKind::TypeIII);
        assert_eq!(f.psi(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(f.phi(1.0, 0.4).unwrap(), 1.5);
    }

    #[test]
    fn type_one_decays_to_one() {
        let f = AnsatzFamily::new(AnsatzKind::TypeI);
        assert_abs_diff_eq!(f.psi(40.0, 0.0).unwrap(), 1.0, epsilon = 1e-300);
        assert_abs_diff_eq!(f.phi(40.0, 0.0).unwrap(), 1.0, epsilon = 1e-300);
    }

    // 30-digit compositions of the elliptic oracle (mpmath, m = 0.49).
    #[test]
    fn type_two_matches_composition_reference() {
        let f = AnsatzFamily::new(AnsatzKind::TypeII);
        assert_abs_diff_eq!(f.psi(0.3, 0.0).unwrap(), 2.599_645_909_854_436, epsilon = 1e-12);
        assert_abs_diff_eq!(f.phi(0.5, 0.0).unwrap(), 2.371_435_705_636_917_3, epsilon = 1e-12);
        // log uses x alone while the polynomial part uses x + t
        assert_abs_diff_eq!(f.psi(0.3, 0.2).unwrap(), 2.016_437_463_389_579_3, epsilon = 1e-12);
    }

    #[test]
    fn log_singularities_are_masked() {
        let f = AnsatzFamily::new(AnsatzKind::TypeI);
        assert_eq!(f.psi(0.5, -0.5), Err(PointError::Masked(Singularity::PsiLog)));
        assert_eq!(f.phi(0.0, 0.0), Err(PointError::Masked(Singularity::PhiLog)));
        let f2 = AnsatzFamily::new(AnsatzKind::TypeII);
        assert!(f2.psi(0.5, -0.5).is_ok());
        assert_eq!(f2.psi(0.0, 0.5), Err(PointError::Masked(Singularity::PsiLog)));
    }

    #[test]
    fn analytic_and_numeric_derivatives_agree() {
        for kind in [AnsatzKind::TypeI, AnsatzKind::TypeIII] {
            let a = AnsatzFamily::new(kind);
            let n = numeric(kind);
            for &x in &[-1.7, -0.33, 0.0123, 0.4, 0.9, 2.5] {
                let (da, dn) = (a.psi_derivs(x, 0.1).unwrap(), n.psi_derivs(x, 0.1).unwrap());
                assert_relative_eq!(da.psi_x, dn.psi_x, max_relative = 1e-6, epsilon = 1e-9);
                assert_relative_eq!(da.psi_xx, dn.psi_xx, max_relative = 1e-6, epsilon = 1e-7);
                assert_relative_eq!(da.psi_t, dn.psi_t, max_relative = 1e-6, epsilon = 1e-9);
                let (pa, pn) = (a.phi_y(x, 0.1).unwrap(), n.phi_y(x, 0.1).unwrap());
                assert_relative_eq!(pa, pn, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn type_three_extremum_has_flat_slope() {
        // ψ - 1 = r(x) sin²(ln x²) has a double zero (a minimum) where ln x² = -π.
        let x = (-std::f64::consts::PI / 2.0).exp();
        let a = AnsatzFamily::new(AnsatzKind::TypeIII);
        let n = numeric(AnsatzKind::TypeIII);
        assert_abs_diff_eq!(a.psi_derivs(x, 0.0).unwrap().psi_x, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(n.psi_derivs(x, 0.0).unwrap().psi_x, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn elliptic_family_forces_numeric_mode() {
        let f = AnsatzFamily::new(AnsatzKind::TypeII).with_derivative_mode(DerivativeMode::Analytic).unwrap();
        let d = f.psi_derivs(0.3, 0.0).unwrap();
        let h = 1e-5;
        let fd = (f.psi(0.3 + h, 0.0).unwrap() - f.psi(0.3 - h, 0.0).unwrap()) / (2.0 * h);
        assert_relative_eq!(d.psi_x, fd, max_relative = 1e-6);
    }

    #[test]
    fn bad_numeric_step() {
        let f = AnsatzFamily::new(AnsatzKind::TypeI);
        assert!(f.with_derivative_mode(DerivativeMode::Numeric { step: 0.0 }).is_err());
        assert!(f.with_derivative_mode(DerivativeMode::Numeric { step: 0.5 }).is_err());
    }

    /// ψ = x² + x + t/2, φ = 3y: lets tests place ψ + φ anywhere.
    struct Quadratic;

    impl Ansatz for Quadratic {
        fn psi(&self, x: f64, t: f64) -> Result<f64, PointError> {
            Ok(x * x + x + 0.5 * t)
        }
        fn phi(&self, y: f64, _t: f64) -> Result<f64, PointError> {
            Ok(3.0 * y)
        }
        fn psi_derivs(&self, x: f64, _t: f64) -> Result<PsiDerivs, PointError> {
            Ok(PsiDerivs { psi_x: 2.0 * x + 1.0, psi_xx: 2.0, psi_t: 0.5 })
        }
        fn phi_y(&self, _y: f64, _t: f64) -> Result<f64, PointError> {
            Ok(3.0)
        }
    }

    #[test]
    fn u1_v1_real_where_phase_sum_vanishes() {
        // ψ(0.5) = 0.75, φ(-0.25) = -0.75
        let (u, v) = u1_v1(&params(), &Quadratic, 0.5, -0.25).unwrap();
        assert_eq!(u, Complex64::new(-0.375, 0.0));
        assert_eq!(v, Complex64::new(0.75, 0.0));
    }

    #[test]
    fn u1_v1_are_complex_elsewhere() {
        let (u, v) = u1_v1(&params(), &Quadratic, 0.5, 0.1).unwrap();
        assert!(u.im.abs() > 1e-3 && v.im.abs() > 1e-3);
    }

    #[test]
    fn u2_v2_collapse_far_from_pole() {
        let (u, v) = u2_v2(&params(), &Quadratic, 0.5, 20.0).unwrap();
        assert_abs_diff_eq!(u, -0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn u2_v2_sign_near_positive_pole() {
        let (_, v) = u2_v2(&params(), &Quadratic, 0.5, -0.24).unwrap();
        assert!(v > 0.75);
        assert_eq!(
            u2_v2(&params(), &Quadratic, 0.5, -0.25),
            Err(PointError::Masked(Singularity::HyperbolicPole))
        );
    }

    #[test]
    fn degenerate_phase_is_reported() {
        assert_eq!(u2_v2(&params(), &Quadratic, -0.5, 1.0), Err(PointError::DegeneratePhase));
        assert!(u1_v1(&params(), &Quadratic, -0.5, 1.0).is_err());
    }

    #[test]
    fn gradient_vanishes_with_psi_x() {
        let u = gradient_u(&params(), &Quadratic, GradientVariant::LiteralX, -0.5, 1.0).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn gradient_at_log_three() {
        let ln3 = 3.0_f64.ln();
        let y = (2.0 * ln3 - 0.5) / 3.0;
        let u = gradient_u(&params(), &Quadratic, GradientVariant::LiteralX, 0.5, y).unwrap();
        assert_abs_diff_eq!(u, -3.0 / 16.0 * 2.0 * 3.0, epsilon = 1e-12);
        // consistent variant uses ψ = 0.75 instead of x = 0.5
        let y = (2.0 * ln3 - 0.75) / 3.0;
        let u = gradient_u(&params(), &Quadratic, GradientVariant::ConsistentPsi, 0.5, y).unwrap();
        assert_abs_diff_eq!(u, -3.0 / 16.0 * 2.0 * 3.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_masks_pole() {
        let y = -0.5 / 3.0;
        assert_eq!(
            gradient_u(&params(), &Quadratic, GradientVariant::LiteralX, 0.5, y),
            Err(PointError::Masked(Singularity::HyperbolicPole))
        );
    }

    #[test]
    fn coth_radical_is_real() {
        for &z in &[1e-6, 0.3, -0.7, 4.0, -25.0] {
            let c = 1.0 / f64::tanh(z);
            assert_eq!(Complex64::new(c * c - 1.0, 0.0).sqrt().im, 0.0);
        }
    }

    #[test]
    fn masking_audit() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let p = params();
        let mut rng = StdRng::seed_from_u64(0x2545_f491);
        for kind in [AnsatzKind::TypeI, AnsatzKind::TypeII, AnsatzKind::TypeIII] {
            let f = AnsatzFamily::new(kind);
            for i in 0..10_000 {
                // every fourth coordinate is pushed next to an axis
                let near = |v: f64, k: usize| if k.is_multiple_of(4) { v * 3e-9 } else { v * 0.05 };
                let x = near(rng.gen_range(-1.0..1.0), i);
                let y = near(rng.gen_range(-1.0..1.0), i + 2);
                match gradient_u(&p, &f, GradientVariant::LiteralX, x, y) {
                    Err(PointError::Masked(which)) => {
                        let d = match which {
                            Singularity::PsiLog => x.abs(),
                            Singularity::PhiLog => y.abs(),
                            Singularity::HyperbolicPole => (x + f.phi(y, 0.0).unwrap()).abs() / 2.0,
                        };
                        assert!(d < 1.01 * SINGULARITY_GUARD, "{kind:?} {x} {y} {which:?}");
                    }
                    Err(e) => panic!("unexpected {e}"),
                    Ok(v) => {
                        assert!(v.is_finite());
                        assert!(x.abs() >= SINGULARITY_GUARD && y.abs() >= SINGULARITY_GUARD);
                    }
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn bracket(z: f64) -> f64 {
            let cs = csch_guarded(z, SINGULARITY_GUARD).unwrap();
            cs + coth_guarded(z, SINGULARITY_GUARD).unwrap()
        }

        proptest! {
            #[test]
            fn bracket_is_half_angle_coth(mag in 1e-6..30.0f64, neg in prop::bool::ANY) {
                let z = if neg { -mag } else { mag };
                let half = 1.0 / (0.5 * z).tanh();
                prop_assert!((bracket(z) - half).abs() <= 1e-12 * half.abs());
            }

            #[test]
            fn z_factor_is_even(z in 1e-6..30.0f64) {
                let f = |z: f64| csch_guarded(z, SINGULARITY_GUARD).unwrap() * bracket(z);
                prop_assert!((f(z) - f(-z)).abs() <= 1e-12 * f(z).abs());
            }
        }
    }
}
