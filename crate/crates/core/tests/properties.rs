use proptest::prelude::*;

use tomo_core::forward::{averaged_xray_projection, correct_xray_projection};
use tomo_core::geometry::{chord_length, exit_parameter, Domain, Ray};
use tomo_core::noise::{characteristic_functional, effective_coefficients, ColoredNoise};
use tomo_core::pointsrc::{delta_b, g_factor};
use tomo_core::recon::FilterSpec;

proptest! {
    #[test]
    fn chord_is_twice_exit_parameter(
        radius in 0.2f64..3.0,
        phi in 0.0f64..6.2,
        frac in -0.99f64..0.99,
    ) {
        let d = Domain::new(radius);
        let ray = Ray::new(phi, frac * radius);
        let tau = exit_parameter(&d, &ray).unwrap();
        let l = chord_length(&d, &ray);
        prop_assert!((l - 2.0 * tau).abs() < 1e-12 * radius.max(1.0));
    }

    #[test]
    fn covariance_is_symmetric_and_decaying(
        h in 0.0f64..2.0,
        alpha in 0.05f64..50.0,
        s in -5.0f64..5.0,
        t in -5.0f64..5.0,
    ) {
        let n = ColoredNoise::new(h, alpha).unwrap();
        let c = n.covariance(s, t);
        prop_assert!((c - n.covariance(t, s)).abs() < 1e-15 * (1.0 + c.abs()));
        prop_assert!(c <= n.variance() + 1e-15);
        prop_assert!(c >= 0.0);
    }

    #[test]
    fn boundary_factor_stays_in_unit_interval(
        h in 1e-6f64..2.0,
        alpha in 0.05f64..50.0,
        delta in 1e-6f64..20.0,
    ) {
        // exp{(h/a)(e^{-a d} - 1)} in (e^{-h/a}, 1] for d > 0, checked in
        // log space to dodge the cancellation in exp(h d) exp(-h d).
        let n = ColoredNoise::new(h, alpha).unwrap();
        let log_factor = characteristic_functional(&n, 0.0, delta).ln() - h * delta;
        let slack = 1e-12 * (1.0 + h * delta);
        prop_assert!(log_factor <= slack);
        prop_assert!(log_factor >= -h / alpha - slack);
    }

    #[test]
    fn renormalization_identity(
        h in 0.0f64..2.0,
        alpha in 0.05f64..50.0,
        mubar in -1.0f64..2.0,
    ) {
        let n = ColoredNoise::new(h, alpha).unwrap();
        let c = effective_coefficients(&n, mubar);
        prop_assert!((c.mu_star - (mubar - h)).abs() < 1e-15);
        prop_assert!((c.velocity - (1.0 - h / alpha)).abs() < 1e-12);
    }

    #[test]
    fn xray_correction_round_trips(
        h in 0.0f64..0.5,
        alpha in 0.2f64..20.0,
        l in 0.01f64..3.0,
        mustar_integral in 0.0f64..2.0,
    ) {
        let n = ColoredNoise::new(h, alpha).unwrap();
        let mubar_integral = mustar_integral + h * l;
        let g = averaged_xray_projection(1.0, mubar_integral, &n, l);
        let back = correct_xray_projection(g, 1.0, &n, l).unwrap();
        prop_assert!((back - mustar_integral).abs() < 1e-12 * (1.0 + mustar_integral));
    }

    #[test]
    fn averaged_xray_respects_jensen(
        h in 1e-4f64..0.5,
        alpha in 0.2f64..20.0,
        l in 0.01f64..3.0,
        mubar in 0.0f64..1.0,
    ) {
        let n = ColoredNoise::new(h, alpha).unwrap();
        let g = averaged_xray_projection(1.0, mubar * l, &n, l);
        prop_assert!(g >= (-mubar * l).exp());
        prop_assert!(g <= 1.0 + 1e-12 || mubar * l < h * l);
    }

    #[test]
    fn g_factor_in_unit_interval(
        h in 0.0f64..2.0,
        alpha in 0.1f64..20.0,
        r in 0.0f64..0.9,
        angle in 0.0f64..6.2,
        phi in 0.0f64..6.2,
    ) {
        let n = ColoredNoise::new(h, alpha).unwrap();
        let y0 = [r * angle.cos(), r * angle.sin()];
        let g = g_factor(&n, &Domain::new(1.0), y0, phi).unwrap();
        prop_assert!(g > 0.0 && g <= 1.0);
    }

    #[test]
    fn filter_is_bounded_by_ramp(b in 0.5f64..500.0, eta in -600.0f64..600.0) {
        let f = FilterSpec::ramp(b);
        let v = f.eval(eta);
        prop_assert!(v >= 0.0);
        prop_assert!(v <= eta.abs() / (2.0 * std::f64::consts::PI).sqrt() + 1e-15);
        if eta.abs() > b {
            prop_assert!(v == 0.0);
        }
    }

    #[test]
    fn delta_b_small_argument_limit(b in 1.0f64..200.0) {
        let near = delta_b(1e-9 / b, b);
        let at_zero = delta_b(0.0, b);
        prop_assert!((near / at_zero - 1.0).abs() < 1e-6);
    }
}
