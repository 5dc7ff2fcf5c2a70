//! Analytic point-source distortion theory: the G-factor by which colored
//! noise depresses averaged point-source projections, its Fourier
//! coefficients, the band-limited delta, the K_n Bessel integral family with
//! closed forms, and the predicted reconstruction built from them.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bessel::bessel_j;
use crate::error::{Error, Result};
use crate::geometry::{exit_parameter, Domain, Ray};
use crate::noise::ColoredNoise;
use crate::quad::adaptive_simpson;

/// Source-to-boundary distance along direction `phi` for a source at `y0`.
fn boundary_distance(domain: &Domain, y0: [f64; 2], phi: f64) -> Result<f64> {
    let op = [-phi.sin(), phi.cos()];
    let om = [phi.cos(), phi.sin()];
    let u0 = y0[0] * op[0] + y0[1] * op[1];
    let tau = exit_parameter(domain, &Ray::new(phi, u0))?;
    Ok(tau - (y0[0] * om[0] + y0[1] * om[1]))
}

/// Angle-dependent depression factor of the averaged point-source
/// projection: `G(phi) = exp{(h/a)(e^{-a d(phi)} - 1)}` with `d` the
/// source-to-boundary distance along the view direction. Always in (0, 1].
pub fn g_factor(noise: &ColoredNoise, domain: &Domain, y0: [f64; 2], phi: f64) -> Result<f64> {
    if !domain.contains(y0) {
        return Err(Error::InvalidArgument("source must lie strictly inside the domain".into()));
    }
    let d = boundary_distance(domain, y0, phi)?;
    Ok((noise.h / noise.alpha * ((-noise.alpha * d).exp() - 1.0)).exp())
}

/// `G(phi)` sampled on a uniform angle lattice over `[0, 2pi)`.
#[derive(Clone, Debug)]
pub struct GFactorProfile {
    pub phis: Vec<f64>,
    pub values: Vec<f64>,
    pub y0: [f64; 2],
    pub noise: ColoredNoise,
    pub domain: Domain,
}

pub fn sample_g_factor(
    noise: &ColoredNoise,
    domain: &Domain,
    y0: [f64; 2],
    n_angles: usize,
) -> Result<GFactorProfile> {
    let phis = crate::sinogram::uniform_angles(n_angles);
    let values = phis
        .iter()
        .map(|&phi| g_factor(noise, domain, y0, phi))
        .collect::<Result<Vec<f64>>>()?;
    Ok(GFactorProfile { phis, values, y0, noise: *noise, domain: *domain })
}

/// Fourier coefficients `G_n = (1/2pi) int_0^{2pi} G(phi) e^{-i n phi} dphi`
/// for `n = 0..n_max`. Negative orders follow from `G_{-n} = conj(G_n)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FourierCoeffs {
    pub coeffs: Vec<Complex64>,
}

impl FourierCoeffs {
    pub fn n_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn get(&self, n: usize) -> Complex64 {
        self.coeffs[n]
    }
}

/// Periodic-trapezoid (spectrally accurate) quadrature of the coefficient
/// integrals. Requires at least `8 * n_max` profile samples.
pub fn fourier_coeffs(profile: &GFactorProfile, n_max: usize) -> Result<FourierCoeffs> {
    let m = profile.phis.len();
    if m < 8 * n_max.max(1) {
        return Err(Error::InvalidArgument(format!(
            "need >= {} profile samples for n_max = {n_max}, got {m}",
            8 * n_max.max(1)
        )));
    }
    let mut coeffs = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&phi, &g) in profile.phis.iter().zip(&profile.values) {
            acc += g * Complex64::new(0.0, -(n as f64) * phi).exp();
        }
        coeffs.push(acc / m as f64);
    }
    Ok(FourierCoeffs { coeffs })
}

/// Band-limited delta `delta^b(R) = b J_1(bR) / (2 pi R)`, the ideal
/// reconstructed point profile at filter cutoff `b`; `b^2/(4 pi)` at `R = 0`.
pub fn delta_b(r: f64, b: f64) -> f64 {
    assert!(b > 0.0, "cutoff must be positive");
    let r = r.abs();
    if r * b < 1e-8 {
        b * b / (4.0 * PI)
    } else {
        b * bessel_j(1, b * r) / (2.0 * PI * r)
    }
}

/// Brute-force evaluation of
/// `K_n(R, mu; b) = int_mu^b [(mu+eta)^n + (mu-eta)^n] / eta_t^n J_n(R eta_t) eta deta`
/// with `eta_t = sqrt(eta^2 - mu^2)`. Substituting `eta_t` as the variable
/// removes the endpoint singularity; `mu - eta` is computed as
/// `-eta_t^2/(mu + eta)` to avoid cancellation. This is the oracle against
/// which the closed forms are checked.
pub fn kn_quadrature(n: u32, r: f64, mu: f64, b: f64) -> Result<f64> {
    if !(b > mu) {
        return Err(Error::InvalidArgument(format!("need b > mu, got b={b}, mu={mu}")));
    }
    if !(mu >= 0.0 && r > 0.0 && n >= 1) {
        return Err(Error::InvalidArgument("kn_quadrature needs n >= 1, r > 0, mu >= 0".into()));
    }
    let et_max = (b * b - mu * mu).sqrt();
    let f = |et: f64| -> f64 {
        if et <= 0.0 {
            return 0.0;
        }
        let eta = (et * et + mu * mu).sqrt();
        let p = mu + eta;
        let a = p.powi(n as i32) + (-(et * et) / p).powi(n as i32);
        a / et.powi(n as i32) * bessel_j(n, r * et) * et
    };
    // Cheap first pass to scale the tolerance with the value's magnitude.
    let coarse = adaptive_simpson(&f, 0.0, et_max, 1e-3);
    let tol = 1e-6 * (1.0 + coarse.abs());
    Ok(adaptive_simpson(&f, 0.0, et_max, tol))
}

/// The b-independent parts of the K_n closed forms: `K_{2m-1} -> k1`,
/// `K_{2m} -> (-1)^m 4 pi delta^b(R) + k2`, both up to `O(1/sqrt(b))`.
#[derive(Clone, Copy, Debug)]
pub struct KnClosedForm {
    pub k1: f64,
    pub k2: f64,
}

fn factorial(n: u32) -> u128 {
    (1..=n as u128).product()
}

fn binomial(n: u32, r: u32) -> u128 {
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 1..=r as u128 {
        acc = acc * (n as u128 - r as u128 + i) / i;
    }
    acc
}

/// `j! / d!` for `d <= j`.
fn falling(j: u32, d: u32) -> u128 {
    (d as u128 + 1..=j as u128).product()
}

/// Exact-integer inner sums of the coefficient formulas. Each term
/// `j! top! / ((j+k+1-m)! (2j)! (top-2j)!)` factors as
/// `C(top, 2j) * j!/(j+k+1-m)!`, which keeps the arithmetic in range for
/// every `m <= 16`.
fn coeff_sum(m: u32, k: u32, top: u32, j_hi: u32) -> u128 {
    (m - k - 1..=j_hi)
        .map(|j| binomial(top, 2 * j) * falling(j, j + k + 1 - m))
        .sum()
}

fn c1(m: u32, k: u32) -> f64 {
    let sum = coeff_sum(m, k, 2 * m - 1, m - 1);
    2.0_f64.powi(1 - 2 * k as i32) / factorial(m + k - 1) as f64 * sum as f64
}

fn c2(m: u32, k: u32) -> f64 {
    let sum = coeff_sum(m, k, 2 * m, m);
    2.0_f64.powi(-2 * (k as i32)) / factorial(m + k) as f64 * sum as f64
}

pub fn kn_closed_form(m: u32, r: f64, mu: f64) -> KnClosedForm {
    assert!(m >= 1 && m <= 16, "closed forms tabulated for m in 1..=16");
    assert!(r > 0.0, "closed forms need R > 0");
    let mut k1 = 2.0 * (2 * m - 1) as f64 * mu / r;
    if mu > 0.0 {
        let mut s = 0.0;
        for k in 1..m {
            s += c1(m, k) * (mu * r).powi(2 * (k as i32 - 1));
        }
        k1 += mu.powi(3) * r * s;
    }
    let mut k2 = 4.0 * m as f64 / (r * r);
    if mu > 0.0 {
        let mut s = 0.0;
        for k in 0..m {
            s += c2(m, k) * (mu * r).powi(2 * k as i32);
        }
        k2 += mu * mu * s;
    }
    KnClosedForm { k1, k2 }
}

/// Residual of the noise-shifted Jacobi-Anger-type identity
/// `exp(-mu R sin(t) + i eta R cos(t)) = sum_n i^n r^n J_n(R eta_t) e^{int}`
/// with `r = sqrt((eta+mu)/(eta-mu))`, `eta = sqrt(eta_t^2 + mu^2)`,
/// truncated at `|n| <= n_max`. Self-test of the expansion and of the
/// Bessel evaluator.
pub fn jacobi_anger_check(mu: f64, r: f64, theta_minus_phi: f64, eta_tilde: f64, n_max: u32) -> f64 {
    assert!(eta_tilde > 0.0);
    let eta = (eta_tilde * eta_tilde + mu * mu).sqrt();
    let t = theta_minus_phi;
    let lhs = Complex64::new(-mu * r * t.sin(), eta * r * t.cos()).exp();
    let ratio = ((eta + mu) / (eta - mu)).sqrt();
    let i_unit = Complex64::new(0.0, 1.0);
    let mut rhs = Complex64::new(0.0, 0.0);
    for n in -(n_max as i64)..=n_max as i64 {
        let jn = bessel_j(n.unsigned_abs() as u32, r * eta_tilde)
            * if n < 0 && n % 2 != 0 { -1.0 } else { 1.0 };
        let term = i_unit.powi(n as i32) * ratio.powi(n as i32) * jn
            * (i_unit * (n as f64) * t).exp();
        rhs += term;
    }
    (lhs - rhs).norm()
}

/// Truncated analytic prediction of the reconstructed image around the
/// source: the delta-profile term modulated by even Fourier coefficients of
/// G plus the K-term corrections. Each K_n term is included only where the
/// closed form is valid (`R b >= n`); below that the term tends to zero.
pub fn predicted_reconstruction(
    coeffs: &FourierCoeffs,
    intensity: f64,
    mu_star: f64,
    b: f64,
    x_rel: [f64; 2],
    m_max: usize,
) -> f64 {
    assert!(2 * m_max <= coeffs.n_max(), "need Fourier coefficients up to 2 m_max");
    let r = (x_rel[0] * x_rel[0] + x_rel[1] * x_rel[1]).sqrt();
    let theta = x_rel[1].atan2(x_rel[0]);
    let db = delta_b(r, b);
    let mut val = coeffs.get(0).re * db;
    for m in 1..=m_max {
        let e2m = Complex64::new(0.0, 2.0 * m as f64 * theta).exp();
        val += 2.0 * (e2m * coeffs.get(2 * m)).re * db;
        if r > 1e-12 {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let cf = kn_closed_form(m as u32, r, mu_star.max(0.0));
            if r * b >= (2 * m - 1) as f64 {
                let e_odd = Complex64::new(0.0, (2 * m - 1) as f64 * theta).exp();
                val += -sign * cf.k1 * (e_odd * coeffs.get(2 * m - 1)).im;
            }
            if r * b >= (2 * m) as f64 {
                val += sign * cf.k2 * (e2m * coeffs.get(2 * m)).re;
            }
        }
    }
    intensity * val
}

/// Angle-dependent peak coefficient of the reconstructed point source:
/// `G_0 + 2 sum_m Re(e^{i 2m theta} G_{2m})`, which equals
/// `(G(theta) + G(theta + pi)) / 2` up to truncation. The peak value itself
/// is `I * coefficient * b^2 / (4 pi)`.
pub fn predicted_peak_coefficient(coeffs: &FourierCoeffs, theta: f64) -> f64 {
    let mut val = coeffs.get(0).re;
    let mut m = 1;
    while 2 * m <= coeffs.n_max() {
        let e2m = Complex64::new(0.0, 2.0 * m as f64 * theta).exp();
        val += 2.0 * (e2m * coeffs.get(2 * m)).re;
        m += 1;
    }
    val
}
