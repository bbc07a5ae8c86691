use flipflop_core::legendre::{annual_mean_insolation, GaussLegendre};
use flipflop_core::{insolation_coeffs, legendre_antiderivative, legendre_eval};
use proptest::prelude::*;

#[test]
fn projection_reproduces_direct_insolation() {
    // M = 4 is close to the full distribution away from the poles
    let model = insolation_coeffs(23.5, 4).unwrap();
    for y in [-0.8, -0.3, 0.0, 0.5, 0.7] {
        let direct = annual_mean_insolation(y, 23.5);
        assert!((model.insolation(y).unwrap() - direct).abs() < 5e-3, "y = {y}");
    }
}

#[test]
fn mean_over_sphere_is_one() {
    let rule = GaussLegendre::new(64);
    let mean = 0.5 * rule.integrate(-1.0, 1.0, |y| annual_mean_insolation(y, 23.5));
    assert!((mean - 1.0).abs() < 1e-6, "{mean}");
}

#[test]
fn bad_inputs() {
    assert!(insolation_coeffs(90.0, 1).is_err());
    assert!(insolation_coeffs(23.5, 0).is_err());
    assert!(legendre_eval(2, 1.5).is_err());
    let model = insolation_coeffs(23.5, 1).unwrap();
    assert!(model.integral(0.4, 0.2).is_err());
}

proptest! {
    #[test]
    fn integral_is_additive(a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0) {
        let mut v = [a, b, c];
        v.sort_by(f64::total_cmp);
        let model = insolation_coeffs(23.5, 2).unwrap();
        let whole = model.integral(v[0], v[2]).unwrap();
        let parts = model.integral(v[0], v[1]).unwrap() + model.integral(v[1], v[2]).unwrap();
        prop_assert!((whole - parts).abs() < 1e-13);
    }

    #[test]
    fn antiderivative_vanishes_at_one(k in 1usize..8) {
        prop_assert!(legendre_antiderivative(2 * k, 1.0).unwrap().abs() < 1e-13);
        prop_assert!(legendre_antiderivative(2 * k, -1.0).unwrap().abs() < 1e-13);
    }

    #[test]
    fn legendre_bounded(k in 0usize..10, y in -1.0f64..=1.0) {
        prop_assert!(legendre_eval(2 * k, y).unwrap().abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn truncated_insolation_positive(y in -1.0f64..=1.0, beta in 5.0f64..40.0) {
        let model = insolation_coeffs(beta, 1).unwrap();
        prop_assert!(model.insolation(y).unwrap() > 0.0);
    }
}
