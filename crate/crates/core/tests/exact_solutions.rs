//! The closed-form pairs checked against the governing system at generic points.

use blp_core::sampler::Window;
use blp_core::solutions::{AnsatzFamily, AnsatzKind};
use blp_core::verifier::{residual_eq1, CothPair, Steps, TanhPair};

const TOL: f64 = 1e-5;

fn around(x: f64, y: f64) -> Window {
    Window::new(x - 0.01, x + 0.01, y - 0.01, y + 0.01).unwrap()
}

#[test]
fn real_pair_annihilates_system_at_generic_points() {
    let family = AnsatzFamily::new(AnsatzKind::TypeIII);
    for (x, y) in [(0.7, 0.9), (1.3, 0.6)] {
        let r = residual_eq1(&CothPair { delta: 1.0, family: &family }, &around(x, y), 3, 3, 0.0, Steps::default())
            .unwrap();
        assert!(r.max_abs_res_eq1a < TOL && r.max_abs_res_eq1b < TOL, "({x}, {y}): {r:?}");
    }
}

#[test]
fn complex_pair_annihilates_system_at_generic_points() {
    let family = AnsatzFamily::new(AnsatzKind::TypeIII);
    for (x, y) in [(0.7, 0.9), (1.3, 0.6)] {
        let r = residual_eq1(&TanhPair { delta: -1.0, family: &family }, &around(x, y), 3, 3, 0.0, Steps::default())
            .unwrap();
        assert!(r.max_abs_res_eq1a < TOL && r.max_abs_res_eq1b < TOL, "({x}, {y}): {r:?}");
    }
}
