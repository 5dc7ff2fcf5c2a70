//! End-to-end acceptance suite. Each test exercises one validated claim via
//! the experiment runner and prints a single pass/fail line; run with
//! `--nocapture` to see them.

use std::time::Instant;

use tomo::config::ExperimentConfig;
use tomo::experiments::{run_experiment, Report};

fn run(name: &str) -> Report {
    let dir = tempfile::tempdir().expect("tempdir");
    let cfg = ExperimentConfig::default();
    run_experiment(name, &cfg, dir.path()).expect(name)
}

fn verdict(n: u32, what: &str, pass: bool) {
    println!("criterion {n} ({what}): {}", if pass { "PASS" } else { "FAIL" });
}

fn details(r: &Report) -> String {
    r.checks
        .iter()
        .map(|c| format!("{}: {:.6} in [{}, {}] -> {}", c.name, c.measured, c.lo, c.hi, c.pass))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_1_kn_oracle_agreement() {
    let t0 = Instant::now();
    let r = run("kn-validate");
    let in_time = t0.elapsed().as_secs_f64() < 60.0;
    verdict(1, "K_n quadrature vs closed forms", r.passed && in_time);
    assert!(r.passed, "{}", details(&r));
    assert!(in_time, "took {:.1} s, budget is 60 s", t0.elapsed().as_secs_f64());
}

#[test]
fn criterion_2_gaussian_averaging_closed_form() {
    let t0 = Instant::now();
    let r = run("mc-attenuation");
    let in_time = t0.elapsed().as_secs_f64() < 30.0;
    verdict(2, "Monte Carlo vs closed-form exponential average", r.passed && in_time);
    assert!(r.passed, "{}", details(&r));
    assert!(in_time, "took {:.1} s, budget is 30 s", t0.elapsed().as_secs_f64());
}

#[test]
fn criterion_3_white_noise_renormalization() {
    let r = run("white-noise-limit");
    verdict(3, "white-noise limit of the mean transmission", r.passed);
    assert!(r.passed, "{}", details(&r));
}

#[test]
fn criterion_4_xray_correction_round_trip() {
    let r = run("xray-roundtrip");
    verdict(4, "transmission correction round trip and FBP of mu*", r.passed);
    assert!(r.passed, "{}", details(&r));
}

#[test]
fn criterion_5_noise_free_psf() {
    let r = run("psf-noise-free");
    verdict(5, "noise-free point spread function", r.passed);
    assert!(r.passed, "{}", details(&r));
}

#[test]
fn criterion_6_point_source_distortion() {
    let r = run("psf-distortion");
    verdict(6, "analytic point-source distortion prediction", r.passed);
    assert!(r.passed, "{}", details(&r));
}

#[test]
fn criterion_7_scatter_perturbation() {
    let r = run("scatter-linearity");
    verdict(7, "first-order scatter linearity and symmetry", r.passed);
    assert!(r.passed, "{}", details(&r));
}

#[test]
fn criterion_8_averaged_transport_residual() {
    let r = run("transport-residual");
    verdict(8, "averaged transport residual convergence", r.passed);
    assert!(r.passed, "{}", details(&r));
}

#[test]
fn criterion_9_series_identity() {
    let worst = (0..8)
        .map(|k| {
            tomo_core::pointsrc::jacobi_anger_check(
                0.3,
                1.0,
                k as f64 * std::f64::consts::TAU / 8.0,
                2.0,
                48,
            )
        })
        .fold(0.0_f64, f64::max);
    let pass = worst < 1e-8;
    verdict(9, "plane-wave series identity", pass);
    assert!(pass, "worst truncated-series residual {worst:.3e} >= 1e-8");
}
