//! Small quadrature toolbox: composite trapezoid on sampled data and an
//! adaptive Simpson rule for oscillatory integrands.

/// Trapezoid weights applied to uniformly sampled values.
pub fn trapezoid(samples: &[f64], h: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = samples[1..n - 1].iter().sum();
            h * (0.5 * (samples[0] + samples[n - 1]) + inner)
        }
    }
}

/// Cumulative trapezoid: `out[k] = int_{x0}^{x_k}` for uniformly spaced
/// samples. `out[0] = 0`.
pub fn cumulative_trapezoid(samples: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(samples.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in samples.windows(2) {
        acc += 0.5 * (w[0] + w[1]) * h;
        out.push(acc);
    }
    out
}

/// Adaptive Simpson with Richardson correction. `tol` is an absolute
/// tolerance on the whole interval; panics never, recursion is depth-capped.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // Seed with a moderately fine composite pass so oscillations shorter
    // than the interval are not mistaken for smoothness.
    let n0 = 64;
    let h = (b - a) / n0 as f64;
    let mut total = 0.0;
    for k in 0..n0 {
        let x0 = a + k as f64 * h;
        let x1 = x0 + h;
        let xm = 0.5 * (x0 + x1);
        let (f0, fm, f1) = (f(x0), f(xm), f(x1));
        let whole = (f0 + 4.0 * fm + f1) * h / 6.0;
        total += simpson_step(f, x0, x1, f0, fm, f1, whole, tol / n0 as f64, 28);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let h = b - a;
    let left = (fa + 4.0 * flm + fm) * h / 12.0;
    let right = (fm + 4.0 * frm + fb) * h / 12.0;
    let split = left + right;
    if depth == 0 || (split - whole).abs() <= 15.0 * tol {
        split + (split - whole) / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Composite Simpson over `n` (even) panels of uniformly sampled values.
pub fn composite_simpson(samples: &[f64], h: f64) -> f64 {
    let n = samples.len() - 1;
    assert!(n >= 2 && n % 2 == 0, "composite Simpson needs an even panel count");
    let mut acc = samples[0] + samples[n];
    for (k, &v) in samples.iter().enumerate().take(n).skip(1) {
        acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn trapezoid_linear_is_exact() {
        let xs: Vec<f64> = (0..=10).map(|k| 2.0 * k as f64 / 10.0).collect();
        assert_relative_eq!(trapezoid(&xs, 0.2), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn cumulative_matches_total() {
        let v: Vec<f64> = (0..=100).map(|k| ((k as f64) * 0.07).sin()).collect();
        let cum = cumulative_trapezoid(&v, 0.07);
        assert_relative_eq!(cum[100], trapezoid(&v, 0.07), epsilon = 1e-12);
    }

    #[test]
    fn adaptive_simpson_oscillatory() {
        // int_0^10 cos(20 x) dx = sin(200)/20
        let v = adaptive_simpson(&|x: f64| (20.0 * x).cos(), 0.0, 10.0, 1e-10);
        assert_relative_eq!(v, (200.0_f64).sin() / 20.0, epsilon = 1e-9);
    }

    #[test]
    fn composite_simpson_quartic() {
        let n = 64;
        let h = 1.0 / n as f64;
        let v: Vec<f64> = (0..=n).map(|k| (k as f64 * h).powi(4)).collect();
        assert_relative_eq!(composite_simpson(&v, h), 0.2, epsilon = 1e-7);
    }
}
