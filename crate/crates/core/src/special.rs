//! Jacobi elliptic functions and pole-guarded hyperbolic reciprocals.
//!
//! The elliptic functions take a *modulus* `k` (not the parameter `m = k²`).
//! Callers that work with the parameter convention should pass `m.sqrt()`.

use thiserror::Error;

/// Default guard radius for [`csch_guarded`] and [`coth_guarded`], in argument units.
pub const DEFAULT_POLE_GUARD: f64 = 1e-12;

/// Relative tolerance on successive arithmetic-geometric means.
const AGM_TOLERANCE: f64 = 1e-15;
const AGM_MAX_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpecialError {
    #[error("elliptic modulus {0} outside [0, 1]")]
    ModulusOutOfRange(f64),
    #[error("non-finite elliptic argument {0}")]
    NonFiniteArgument(f64),
}

/// Jacobi modulus `k` with `0 <= k <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct EllipticModulus(f64);

impl EllipticModulus {
    pub fn new(k: f64) -> Result<Self, SpecialError> {
        if k.is_finite() && (0.0..=1.0).contains(&k) {
            Ok(Self(k))
        } else {
            Err(SpecialError::ModulusOutOfRange(k))
        }
    }

    /// Builds the modulus from the parameter `m = k²`.
    pub fn from_parameter(m: f64) -> Result<Self, SpecialError> {
        if m.is_finite() && (0.0..=1.0).contains(&m) {
            Ok(Self(m.sqrt()))
        } else {
            Err(SpecialError::ModulusOutOfRange(m))
        }
    }

    pub fn k(self) -> f64 {
        self.0
    }

    pub fn parameter(self) -> f64 {
        self.0 * self.0
    }
}

impl TryFrom<f64> for EllipticModulus {
    type Error = SpecialError;

    fn try_from(k: f64) -> Result<Self, Self::Error> {
        Self::new(k)
    }
}

impl From<EllipticModulus> for f64 {
    fn from(m: EllipticModulus) -> f64 {
        m.0
    }
}

/// The triple `(sn, cn, dn)` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiTriple {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

/// Jacobi elliptic functions `sn`, `cn`, `dn` of argument `u` and modulus `k`.
///
/// Uses the descending Landen (AGM) scheme: run the arithmetic-geometric mean
/// from `(1, k')`, scale the amplitude by `2^N a_N`, then walk the amplitude back
/// down through the recorded `c_n / a_n` ratios. `dn` follows from `cn`.
pub fn jacobi_sn_cn_dn(u: f64, modulus: EllipticModulus) -> Result<JacobiTriple, SpecialError> {
    if !u.is_finite() {
        return Err(SpecialError::NonFiniteArgument(u));
    }
    let k = modulus.k();
    if k == 0.0 {
        let (s, c) = u.sin_cos();
        return Ok(JacobiTriple { sn: s, cn: c, dn: 1.0 });
    }
    if k == 1.0 {
        let sech = 1.0 / u.cosh();
        return Ok(JacobiTriple { sn: u.tanh(), cn: sech, dn: sech });
    }

    // k' = sqrt(1 - k²), written as sqrt((1-k)(1+k)) to keep digits near k = 1.
    let kprime = ((1.0 - k) * (1.0 + k)).sqrt();
    let mut a = 1.0_f64;
    let mut b = kprime;
    let mut ratios = [0.0_f64; AGM_MAX_STEPS];
    let mut steps = 0;
    let mut scale = 1.0_f64;
    while steps < AGM_MAX_STEPS {
        let a_next = 0.5 * (a + b);
        let c_next = 0.5 * (a - b);
        let b_next = (a * b).sqrt();
        ratios[steps] = c_next / a_next;
        steps += 1;
        scale *= 2.0;
        let converged = (a_next - b_next).abs() <= AGM_TOLERANCE * a_next;
        a = a_next;
        b = b_next;
        if converged {
            break;
        }
    }

    let mut amp = scale * a * u;
    for n in (0..steps).rev() {
        amp = 0.5 * (amp + (ratios[n] * amp.sin()).asin());
    }
    let (sn, cn) = amp.sin_cos();
    // dn² = k'² + k²cn² has no cancellation, unlike cn / cos(φ₁ - φ₀) near cn = 0.
    let dn = kprime.hypot(k * cn);
    Ok(JacobiTriple { sn, cn, dn })
}

/// `1/sinh(z)`, or `None` inside the guard radius around the pole at zero.
pub fn csch_guarded(z: f64, guard: f64) -> Option<f64> {
    if !z.is_finite() || z.abs() < guard {
        None
    } else {
        Some(1.0 / z.sinh())
    }
}

/// `cosh(z)/sinh(z)`, or `None` inside the guard radius around the pole at zero.
pub fn coth_guarded(z: f64, guard: f64) -> Option<f64> {
    if !z.is_finite() || z.abs() < guard {
        None
    } else {
        Some(1.0 / z.tanh())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k07() -> EllipticModulus {
        EllipticModulus::new(0.7).unwrap()
    }

    #[test]
    fn origin_values() {
        let j = jacobi_sn_cn_dn(0.0, k07()).unwrap();
        assert_eq!((j.sn, j.cn, j.dn), (0.0, 1.0, 1.0));
    }

    #[test]
    fn zero_modulus_is_circular() {
        let j = jacobi_sn_cn_dn(1.2, EllipticModulus::new(0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(j.sn, 1.2_f64.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(j.cn, 1.2_f64.cos(), epsilon = 1e-15);
        assert_eq!(j.dn, 1.0);
    }

    // Reference values from a 30-digit AGM evaluation (mpmath ellipfun, m = 0.49).
    #[test]
    fn matches_high_precision_reference() {
        let cases = [
            (0.8, [0.691_468_324_641_427_2, 0.722_406_780_157_535_5, 0.875_052_605_532_154_9]),
            (-3.7, [0.008_611_844_637_538_83, -0.999_962_917_378_409, 0.999_981_829_687_244_9]),
            (12.5, [-0.954_118_288_314_633_5, -0.299_429_944_901_230_5, 0.744_266_459_698_904_8]),
            (45.0, [0.627_083_052_800_975_6, 0.778_952_402_197_855, 0.898_507_514_713_152_7]),
            (-16.611_268_390_609_51, [-0.999_999_999_871_991_4, -1.600_053_964_483_52e-5, 0.714_142_842_942_116_5]),
        ];
        for (u, [sn, cn, dn]) in cases {
            let j = jacobi_sn_cn_dn(u, k07()).unwrap();
            assert_abs_diff_eq!(j.sn, sn, epsilon = 1e-12);
            assert_abs_diff_eq!(j.cn, cn, epsilon = 1e-12);
            assert_abs_diff_eq!(j.dn, dn, epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_modulus_limits() {
        let one = EllipticModulus::new(1.0).unwrap();
        for i in -50..=50 {
            let u = i as f64 * 0.1;
            let j = jacobi_sn_cn_dn(u, one).unwrap();
            assert_abs_diff_eq!(j.sn, u.tanh(), epsilon = 1e-12);
            assert_abs_diff_eq!(j.dn, 1.0 / u.cosh(), epsilon = 1e-12);
        }
    }

    #[test]
    fn near_unit_modulus_stays_accurate() {
        let k = EllipticModulus::new(1.0 - 1e-9).unwrap();
        let j = jacobi_sn_cn_dn(2.0, k).unwrap();
        assert_abs_diff_eq!(j.sn, 2.0_f64.tanh(), epsilon = 1e-8);
        assert_abs_diff_eq!(j.sn * j.sn + j.cn * j.cn, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn domain_errors() {
        assert!(EllipticModulus::new(1.5).is_err());
        assert!(EllipticModulus::new(-0.1).is_err());
        assert!(EllipticModulus::new(f64::NAN).is_err());
        assert!(matches!(
            jacobi_sn_cn_dn(f64::INFINITY, k07()),
            Err(SpecialError::NonFiniteArgument(_))
        ));
    }

    #[test]
    fn parameter_convention() {
        let k = EllipticModulus::from_parameter(0.49).unwrap();
        assert_abs_diff_eq!(k.k(), 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(k07().parameter(), 0.49, epsilon = 1e-15);
    }

    #[test]
    fn guarded_hyperbolics() {
        let ln3 = 3.0_f64.ln();
        assert_abs_diff_eq!(csch_guarded(ln3, 1e-9).unwrap(), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(csch_guarded(-ln3, 1e-9).unwrap(), -0.75, epsilon = 1e-15);
        assert_eq!(csch_guarded(0.0, 1e-9), None);
        assert_abs_diff_eq!(coth_guarded(ln3, 1e-9).unwrap(), 1.25, epsilon = 1e-15);
        assert_eq!(coth_guarded(0.0, 1e-9), None);
        assert_abs_diff_eq!(coth_guarded(20.0, 1e-9).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(coth_guarded(f64::NAN, 1e-9), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn moduli() -> impl Strategy<Value = f64> {
            prop_oneof![Just(0.0), Just(0.7), Just(1.0), 0.0..=1.0f64]
        }

        proptest! {
            #[test]
            fn pythagorean_identities(u in -5.0..5.0f64, k in moduli()) {
                let m = EllipticModulus::new(k).unwrap();
                let j = jacobi_sn_cn_dn(u, m).unwrap();
                prop_assert!((j.sn * j.sn + j.cn * j.cn - 1.0).abs() < 1e-12);
                prop_assert!((j.dn * j.dn + k * k * j.sn * j.sn - 1.0).abs() < 1e-12);
            }

            #[test]
            fn parity(u in -50.0..50.0f64, k in moduli()) {
                let m = EllipticModulus::new(k).unwrap();
                let p = jacobi_sn_cn_dn(u, m).unwrap();
                let n = jacobi_sn_cn_dn(-u, m).unwrap();
                prop_assert!((p.sn + n.sn).abs() < 1e-13);
                prop_assert!((p.cn - n.cn).abs() < 1e-13);
                prop_assert!((p.dn - n.dn).abs() < 1e-13);
            }

            #[test]
            fn hyperbolic_identity_and_oddness(z in 1e-3..30.0f64, sign in prop::bool::ANY) {
                let z = if sign { z } else { -z };
                let cs = csch_guarded(z, DEFAULT_POLE_GUARD).unwrap();
                let ct = coth_guarded(z, DEFAULT_POLE_GUARD).unwrap();
                prop_assert!((ct * ct - cs * cs - 1.0).abs() < 1e-12 * ct * ct);
                prop_assert_eq!(csch_guarded(-z, DEFAULT_POLE_GUARD).unwrap(), -cs);
                prop_assert_eq!(coth_guarded(-z, DEFAULT_POLE_GUARD).unwrap(), -ct);
            }
        }
    }
}
