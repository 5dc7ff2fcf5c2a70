//! Forward projection operators: deterministic and noise-averaged SPECT,
//! PET and X-ray models, the projection correction, Monte Carlo averaging,
//! and the averaged-transport residual check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{chord_length, exit_parameter, Domain, Grid2D, Ray};
use crate::noise::{effective_coefficients, ColoredNoise, NoisePath};
use crate::pointsrc::g_factor;
use crate::quad::{cumulative_trapezoid, trapezoid};
use crate::sinogram::{Modality, Sinogram};

/// Emission density and mean attenuation on shared-extent grids inside a
/// disk domain.
#[derive(Clone, Debug)]
pub struct Phantom {
    pub emission: Grid2D,
    pub attenuation_mean: Grid2D,
    pub domain: Domain,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PointSource {
    pub y0: [f64; 2],
    pub intensity: f64,
}

/// Uniform sample lattice along the chord of `ray` inside the domain.
/// Returns `(s0, ds, count)` with `count >= 2` nodes at `s0 + k*ds`;
/// `None` when the ray misses the domain or the chord is degenerate.
fn chord_lattice(domain: &Domain, ray: &Ray, step: f64) -> Result<Option<(f64, f64, usize)>> {
    if step <= 0.0 {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let l = chord_length(domain, ray);
    if l <= 0.0 {
        return Ok(None);
    }
    let tau = exit_parameter(domain, ray)?;
    let n = ((l / step).ceil() as usize).max(1);
    Ok(Some((tau - l, l / n as f64, n + 1)))
}

fn sample_mu(grid: &Grid2D, ray: &Ray, s0: f64, ds: f64, count: usize, noise: Option<&NoisePath>) -> Result<Vec<f64>> {
    let mut mu = Vec::with_capacity(count);
    for k in 0..count {
        let s = s0 + k as f64 * ds;
        let [x, y] = ray.point_at(s);
        let mut v = grid.sample(x, y);
        if let Some(path) = noise {
            v += path.value_at(s - s0);
        }
        if !v.is_finite() {
            return Err(Error::NonFinite("attenuation sample"));
        }
        mu.push(v);
    }
    Ok(mu)
}

fn sample_f(grid: &Grid2D, ray: &Ray, s0: f64, ds: f64, count: usize) -> Result<Vec<f64>> {
    let mut f = Vec::with_capacity(count);
    for k in 0..count {
        let s = s0 + k as f64 * ds;
        let [x, y] = ray.point_at(s);
        let v = grid.sample(x, y);
        if !v.is_finite() {
            return Err(Error::NonFinite("emission sample"));
        }
        f.push(v);
    }
    Ok(f)
}

/// Attenuated emission projection
/// `g = int exp(-int_y^exit mu) f(y) dl` along the chord. The nested
/// attenuation integral is a single cumulative sweep, O(N) per ray.
/// `noise` optionally adds a sampled realization of the random attenuation
/// component on top of the mean.
pub fn spect_projection(
    phantom: &Phantom,
    ray: &Ray,
    noise: Option<&NoisePath>,
    step: f64,
) -> Result<f64> {
    let Some((s0, ds, count)) = chord_lattice(&phantom.domain, ray, step)? else {
        return Ok(0.0);
    };
    let mu = sample_mu(&phantom.attenuation_mean, ray, s0, ds, count, noise)?;
    let f = sample_f(&phantom.emission, ray, s0, ds, count)?;
    let cum = cumulative_trapezoid(&mu, ds);
    let total = cum[count - 1];
    let weighted: Vec<f64> = (0..count).map(|k| f[k] * (-(total - cum[k])).exp()).collect();
    Ok(trapezoid(&weighted, ds))
}

/// Coincidence projection: the attenuation factor covers the whole chord and
/// factors out, `g = exp(-int_chord mu) * int_chord f`.
pub fn pet_projection(
    phantom: &Phantom,
    ray: &Ray,
    noise: Option<&NoisePath>,
    step: f64,
) -> Result<f64> {
    let Some((s0, ds, count)) = chord_lattice(&phantom.domain, ray, step)? else {
        return Ok(0.0);
    };
    let mu = sample_mu(&phantom.attenuation_mean, ray, s0, ds, count, noise)?;
    let f = sample_f(&phantom.emission, ray, s0, ds, count)?;
    Ok((-trapezoid(&mu, ds)).exp() * trapezoid(&f, ds))
}

/// Transmission projection `I0 * exp(-int_chord mu)`.
pub fn xray_projection(
    i0: f64,
    attenuation: &Grid2D,
    domain: &Domain,
    ray: &Ray,
    noise: Option<&NoisePath>,
    step: f64,
) -> Result<f64> {
    if i0 <= 0.0 {
        return Err(Error::InvalidArgument(format!("source intensity must be > 0, got {i0}")));
    }
    let Some((s0, ds, count)) = chord_lattice(domain, ray, step)? else {
        return Ok(i0);
    };
    let mu = sample_mu(attenuation, ray, s0, ds, count, noise)?;
    Ok(i0 * (-trapezoid(&mu, ds)).exp())
}

/// Closed-form noise average of the emission projection:
/// `<g> = int exp{(h/a)(e^{-a(tau - s)} - 1)} exp(-int_s^tau mu*) f(s) ds`
/// with `mu* = mubar - h`. Reduces to `spect_projection` when `h = 0`.
pub fn averaged_spect_projection(
    phantom: &Phantom,
    noise: &ColoredNoise,
    ray: &Ray,
    step: f64,
) -> Result<f64> {
    let Some((s0, ds, count)) = chord_lattice(&phantom.domain, ray, step)? else {
        return Ok(0.0);
    };
    let tau = s0 + (count - 1) as f64 * ds;
    let mu = sample_mu(&phantom.attenuation_mean, ray, s0, ds, count, None)?;
    let f = sample_f(&phantom.emission, ray, s0, ds, count)?;
    let mustar: Vec<f64> = mu.iter().map(|&v| v - noise.h).collect();
    let cum = cumulative_trapezoid(&mustar, ds);
    let total = cum[count - 1];
    let weighted: Vec<f64> = (0..count)
        .map(|k| {
            let delta = tau - (s0 + k as f64 * ds);
            let boundary = (noise.h / noise.alpha * ((-noise.alpha * delta).exp() - 1.0)).exp();
            f[k] * boundary * (-(total - cum[k])).exp()
        })
        .collect();
    Ok(trapezoid(&weighted, ds))
}

/// Closed-form noise average of the transmission projection:
/// `<g> = I0 exp{(h/a)(e^{-aL} - 1)} exp(-(int mubar - h L))`.
pub fn averaged_xray_projection(i0: f64, mubar_integral: f64, noise: &ColoredNoise, l: f64) -> f64 {
    assert!(l >= 0.0, "chord length must be nonnegative");
    let boundary = noise.h / noise.alpha * ((-noise.alpha * l).exp() - 1.0);
    i0 * (boundary - (mubar_integral - noise.h * l)).exp()
}

/// Inverts `averaged_xray_projection` for the effective-coefficient
/// integral: `int mu* = -ln(g/I0) + (h/a)(e^{-aL} - 1)`.
pub fn correct_xray_projection(g_avg: f64, i0: f64, noise: &ColoredNoise, l: f64) -> Result<f64> {
    if !(g_avg > 0.0) {
        return Err(Error::ProjectionOutOfRange { value: g_avg, max: i0 });
    }
    if g_avg > i0 * (1.0 + 1e-9) {
        return Err(Error::ProjectionOutOfRange { value: g_avg, max: i0 });
    }
    Ok(-(g_avg / i0).ln() + noise.h / noise.alpha * ((-noise.alpha * l).exp() - 1.0))
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

/// Splitmix-style stream derivation so parallel samples get decorrelated
/// generator seeds from one experiment seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Monte Carlo estimate of the averaged projection over independent noise
/// realizations. Deterministic for a fixed seed: samples are drawn from
/// per-index derived seeds and reduced in index order.
pub fn mc_average_projection(
    phantom: &Phantom,
    noise: &ColoredNoise,
    ray: &Ray,
    modality: Modality,
    n_samples: usize,
    step: f64,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least 2 Monte Carlo samples".into()));
    }
    let chord = chord_length(&phantom.domain, ray);
    let lattice = chord_lattice(&phantom.domain, ray, step)?;
    let values: Vec<f64> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let path = match lattice {
                Some((_, ds, _)) if noise.h > 0.0 => {
                    Some(noise.sample_path(chord, ds, derive_seed(seed, i))?)
                }
                _ => None,
            };
            match modality {
                Modality::Spect => spect_projection(phantom, ray, path.as_ref(), step),
                Modality::Pet => pet_projection(phantom, ray, path.as_ref(), step),
                Modality::Xray => xray_projection(
                    1.0,
                    &phantom.attenuation_mean,
                    &phantom.domain,
                    ray,
                    path.as_ref(),
                    step,
                ),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate { mean, stderr: (var / n).sqrt(), n_samples })
}

/// Whole-sinogram projector over uniform views and offsets. With
/// `stochastic = Some((noise, seed))` each ray gets an independent noise
/// realization from a per-ray derived seed.
pub fn project_sinogram(
    phantom: &Phantom,
    modality: Modality,
    i0: f64,
    n_views: usize,
    n_bins: usize,
    u_max: f64,
    step: f64,
    stochastic: Option<(&ColoredNoise, u64)>,
) -> Result<Sinogram> {
    let mut sino = Sinogram::zeros(n_views, n_bins, u_max, modality);
    let us = sino.us.clone();
    let rows: Vec<Result<Vec<f64>>> = sino
        .phis
        .par_iter()
        .enumerate()
        .map(|(k, &phi)| {
            us.iter()
                .enumerate()
                .map(|(j, &u)| {
                    let ray = Ray::new(phi, u);
                    let path = match stochastic {
                        Some((noise, seed)) if noise.h > 0.0 => {
                            let l = chord_length(&phantom.domain, &ray);
                            if l > 0.0 {
                                let (_, ds, _) = chord_lattice(&phantom.domain, &ray, step)?
                                    .expect("positive chord");
                                Some(noise.sample_path(
                                    l,
                                    ds,
                                    derive_seed(seed, (k * n_bins + j) as u64),
                                )?)
                            } else {
                                None
                            }
                        }
                        _ => None,
                    };
                    match modality {
                        Modality::Spect => spect_projection(phantom, &ray, path.as_ref(), step),
                        Modality::Pet => pet_projection(phantom, &ray, path.as_ref(), step),
                        Modality::Xray => xray_projection(
                            i0,
                            &phantom.attenuation_mean,
                            &phantom.domain,
                            &ray,
                            path.as_ref(),
                            step,
                        ),
                    }
                })
                .collect()
        })
        .collect();
    for (k, row) in rows.into_iter().enumerate() {
        sino.view_mut(k).copy_from_slice(&row?);
    }
    Ok(sino)
}

/// Closed-form averaged sinogram for the given modality.
pub fn averaged_sinogram(
    phantom: &Phantom,
    noise: &ColoredNoise,
    modality: Modality,
    i0: f64,
    n_views: usize,
    n_bins: usize,
    u_max: f64,
    step: f64,
) -> Result<Sinogram> {
    let mut sino = Sinogram::zeros(n_views, n_bins, u_max, modality);
    let us = sino.us.clone();
    let rows: Vec<Result<Vec<f64>>> = sino
        .phis
        .par_iter()
        .map(|&phi| {
            us.iter()
                .map(|&u| {
                    let ray = Ray::new(phi, u);
                    match modality {
                        Modality::Spect => averaged_spect_projection(phantom, noise, &ray, step),
                        Modality::Pet => {
                            let Some((s0, ds, count)) =
                                chord_lattice(&phantom.domain, &ray, step)?
                            else {
                                return Ok(0.0);
                            };
                            let l = (count - 1) as f64 * ds;
                            let mu =
                                sample_mu(&phantom.attenuation_mean, &ray, s0, ds, count, None)?;
                            let f = sample_f(&phantom.emission, &ray, s0, ds, count)?;
                            Ok(averaged_xray_projection(1.0, trapezoid(&mu, ds), noise, l)
                                * trapezoid(&f, ds))
                        }
                        Modality::Xray => {
                            let Some((s0, ds, count)) =
                                chord_lattice(&phantom.domain, &ray, step)?
                            else {
                                return Ok(i0);
                            };
                            let l = (count - 1) as f64 * ds;
                            let mu =
                                sample_mu(&phantom.attenuation_mean, &ray, s0, ds, count, None)?;
                            Ok(averaged_xray_projection(i0, trapezoid(&mu, ds), noise, l))
                        }
                    }
                })
                .collect()
        })
        .collect();
    for (k, row) in rows.into_iter().enumerate() {
        sino.view_mut(k).copy_from_slice(&row?);
    }
    Ok(sino)
}

/// Deterministic point-source sinogram with constant attenuation `mu_star`:
/// the delta deposits `I exp(-mu_star d(phi)) / du` into the nearest offset
/// bin, `d` being the source-to-boundary distance along the view direction.
pub fn point_source_sinogram(
    src: &PointSource,
    mu_star: f64,
    domain: &Domain,
    n_views: usize,
    n_bins: usize,
    u_max: f64,
) -> Result<Sinogram> {
    point_source_sinogram_impl(src, domain, n_views, n_bins, u_max, |_phi, d| {
        (-mu_star * d).exp()
    })
}

/// Noise-averaged point-source sinogram: the deterministic deposit picks up
/// the angle-dependent factor `G(phi)` and uses `mu* = mubar - h`.
pub fn averaged_point_source_sinogram(
    src: &PointSource,
    noise: &ColoredNoise,
    mubar: f64,
    domain: &Domain,
    n_views: usize,
    n_bins: usize,
    u_max: f64,
) -> Result<Sinogram> {
    let mu_star = effective_coefficients(noise, mubar).mu_star;
    let noise = *noise;
    let dom = *domain;
    let y0 = src.y0;
    point_source_sinogram_impl(src, domain, n_views, n_bins, u_max, move |phi, d| {
        let g = g_factor(&noise, &dom, y0, phi).expect("source inside domain");
        g * (-mu_star * d).exp()
    })
}

fn point_source_sinogram_impl(
    src: &PointSource,
    domain: &Domain,
    n_views: usize,
    n_bins: usize,
    u_max: f64,
    factor: impl Fn(f64, f64) -> f64,
) -> Result<Sinogram> {
    if !domain.contains(src.y0) {
        return Err(Error::InvalidArgument("point source must lie inside the domain".into()));
    }
    let mut sino = Sinogram::zeros(n_views, n_bins, u_max, Modality::Spect);
    let du = sino.du();
    for k in 0..n_views {
        let phi = sino.phis[k];
        let om = [phi.cos(), phi.sin()];
        let op = [-phi.sin(), phi.cos()];
        let u0 = src.y0[0] * op[0] + src.y0[1] * op[1];
        let s0 = src.y0[0] * om[0] + src.y0[1] * om[1];
        let tau = exit_parameter(domain, &Ray::new(phi, u0))?;
        let d = tau - s0;
        let j = sino.nearest_bin(u0);
        *sino.at_mut(k, j) += src.intensity * factor(phi, d) / du;
    }
    Ok(sino)
}

/// Max-norm residual of the averaged transport equation on the ray family
/// with direction `phi`: the mean intensity is built from the closed-form
/// averaging kernel, then plugged into the upwind-discretized equation
/// `omega.grad<I> + mubar <I> = f + int h a e^{-a(x-s)} <I>(s) ds`.
pub fn transport_residual_max_norm(
    phantom: &Phantom,
    noise: &ColoredNoise,
    phi: f64,
    step: f64,
) -> Result<f64> {
    if step <= 0.0 {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let rho = phantom.domain.radius;
    let n_rays = (2.0 * rho / step).floor() as usize;
    let worst = (0..n_rays)
        .into_par_iter()
        .map(|iu| -> Result<f64> {
            let u = -rho + (iu as f64 + 0.5) * step;
            let ray = Ray::new(phi, u);
            let Some((s0, ds, count)) = chord_lattice(&phantom.domain, &ray, step)? else {
                return Ok(0.0);
            };
            if (count - 1) as f64 * ds < 4.0 * step {
                return Ok(0.0);
            }
            let mu = sample_mu(&phantom.attenuation_mean, &ray, s0, ds, count, None)?;
            let f = sample_f(&phantom.emission, &ray, s0, ds, count)?;
            let cum_mu = cumulative_trapezoid(&mu, ds);
            // Mean intensity from the averaging kernel:
            // <I>(s_i) = int_{s0}^{s_i} K(s_i - y) f(y) dy with
            // K(d) = exp{h d + (h/a)(e^{-a d} - 1) - int_y^x mubar}.
            let mut intensity = vec![0.0; count];
            for i in 1..count {
                let mut acc = 0.0;
                for j in 0..=i {
                    let d = (i - j) as f64 * ds;
                    let k = (noise.h * d
                        + noise.h / noise.alpha * ((-noise.alpha * d).exp() - 1.0)
                        - (cum_mu[i] - cum_mu[j]))
                        .exp();
                    let w = if j == 0 || j == i { 0.5 } else { 1.0 };
                    acc += w * k * f[j];
                }
                intensity[i] = acc * ds;
            }
            // Memory term M(s_i) = int_{s0}^{s_i} h a e^{-a(s_i-y)} <I>(y) dy.
            let mut worst = 0.0_f64;
            for i in 1..count {
                let mut mem = 0.0;
                for j in 0..=i {
                    let d = (i - j) as f64 * ds;
                    let w = if j == 0 || j == i { 0.5 } else { 1.0 };
                    mem += w * noise.h * noise.alpha * (-noise.alpha * d).exp() * intensity[j];
                }
                mem *= ds;
                let res = (intensity[i] - intensity[i - 1]) / ds + mu[i] * intensity[i]
                    - f[i]
                    - mem;
                worst = worst.max(res.abs());
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(worst.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn uniform_phantom(f: f64, mu: f64) -> Phantom {
        let mut emission = Grid2D::square(128, 1.3);
        emission.fill_with(|_, _| f);
        let mut attenuation = Grid2D::square(128, 1.3);
        attenuation.fill_with(|_, _| mu);
        Phantom { emission, attenuation_mean: attenuation, domain: Domain::new(1.0) }
    }

    #[test]
    fn spect_zero_emission() {
        let p = uniform_phantom(0.0, 0.5);
        assert_eq!(spect_projection(&p, &Ray::new(0.3, 0.1), None, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn spect_unattenuated_constant() {
        let p = uniform_phantom(2.0, 0.0);
        let ray = Ray::new(1.2, 0.6);
        let g = spect_projection(&p, &ray, None, 0.005).unwrap();
        assert_relative_eq!(g, 2.0 * 1.6, max_relative = 1e-6);
    }

    #[test]
    fn spect_constant_attenuation_analytic() {
        // f = c, mu = m on a central chord [-1, 1]:
        // g = c int_{-1}^{1} e^{-m(1-s)} ds = c (1 - e^{-2m}) / m.
        let p = uniform_phantom(1.0, 0.5);
        let g = spect_projection(&p, &Ray::new(0.0, 0.0), None, 0.002).unwrap();
        let want = (1.0 - (-1.0_f64).exp()) / 0.5;
        assert_relative_eq!(g, want, max_relative = 1e-5);
    }

    #[test]
    fn pet_factorizes() {
        let mut p = uniform_phantom(1.0, 0.0);
        p.emission.fill_with(|x, y| (-(x * x + y * y)).exp());
        p.attenuation_mean.fill_with(|x, y| 0.2 + 0.1 * x + 0.05 * y * y);
        let ray = Ray::new(0.7, -0.3);
        let g = pet_projection(&p, &ray, None, 0.004).unwrap();
        let radon = {
            let mut q = p.clone();
            q.attenuation_mean.values.fill(0.0);
            pet_projection(&q, &ray, None, 0.004).unwrap()
        };
        let att =
            xray_projection(1.0, &p.attenuation_mean, &p.domain, &ray, None, 0.004).unwrap();
        assert_relative_eq!(g, radon * att, max_relative = 1e-10);
    }

    #[test]
    fn xray_examples() {
        let p = uniform_phantom(0.0, 0.0);
        let g = xray_projection(2.0, &p.attenuation_mean, &p.domain, &Ray::new(0.1, 0.3), None, 0.01).unwrap();
        assert_relative_eq!(g, 2.0, epsilon = 1e-12);
        let p = uniform_phantom(0.0, 0.5);
        let g = xray_projection(1.0, &p.attenuation_mean, &p.domain, &Ray::new(0.0, 0.0), None, 0.002).unwrap();
        assert_relative_eq!(g, (-1.0_f64).exp(), max_relative = 1e-6);
        let g = xray_projection(3.0, &p.attenuation_mean, &p.domain, &Ray::new(0.0, 1.0), None, 0.01).unwrap();
        assert_relative_eq!(g, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn averaged_xray_closed_form_value() {
        let noise = ColoredNoise::new(0.2, 1.0).unwrap();
        let g = averaged_xray_projection(1.0, 1.0, &noise, 2.0);
        let want = (0.2 * ((-2.0_f64).exp() - 1.0) - 0.6).exp();
        assert_relative_eq!(g, want, epsilon = 1e-14);
        assert_relative_eq!(g, 0.4617, epsilon = 2e-4);
    }

    #[test]
    fn averaged_xray_jensen_direction() {
        let noise = ColoredNoise::new(0.3, 2.0).unwrap();
        for &l in &[0.5, 1.0, 2.0] {
            let mi = 0.5 * l;
            assert!(averaged_xray_projection(1.0, mi, &noise, l) > (-mi).exp());
        }
    }

    #[test]
    fn correction_round_trips() {
        let noise = ColoredNoise::new(0.2, 1.0).unwrap();
        let mustar_integral = 0.6;
        let l = 2.0;
        let mubar_integral = mustar_integral + noise.h * l;
        let g = averaged_xray_projection(1.0, mubar_integral, &noise, l);
        let back = correct_xray_projection(g, 1.0, &noise, l).unwrap();
        assert_relative_eq!(back, mustar_integral, max_relative = 1e-13);
        // noise-free reduces to the plain log transform
        let n0 = ColoredNoise::new(0.0, 1.0).unwrap();
        assert_relative_eq!(
            correct_xray_projection(0.5, 1.0, &n0, 2.0).unwrap(),
            -(0.5_f64).ln(),
            epsilon = 1e-14
        );
        assert_eq!(correct_xray_projection(1.0, 1.0, &n0, 0.0).unwrap(), 0.0);
        assert!(correct_xray_projection(0.0, 1.0, &noise, 1.0).is_err());
        assert!(correct_xray_projection(1.1, 1.0, &noise, 1.0).is_err());
    }

    #[test]
    fn mc_noise_free_is_deterministic() {
        let p = uniform_phantom(1.0, 0.4);
        let noise = ColoredNoise::new(0.0, 1.0).unwrap();
        let ray = Ray::new(0.5, 0.2);
        let est = mc_average_projection(&p, &noise, &ray, Modality::Spect, 16, 0.01, 9).unwrap();
        assert_eq!(est.stderr, 0.0);
        let direct = spect_projection(&p, &ray, None, 0.01).unwrap();
        assert_relative_eq!(est.mean, direct, epsilon = 1e-14);
    }

    #[test]
    fn mc_matches_averaged_xray() {
        let p = uniform_phantom(0.0, 0.5);
        let noise = ColoredNoise::new(0.2, 1.0).unwrap();
        let ray = Ray::new(0.0, 0.0);
        let est = mc_average_projection(&p, &noise, &ray, Modality::Xray, 4000, 0.01, 77).unwrap();
        let want = averaged_xray_projection(1.0, 1.0, &noise, 2.0);
        assert!(
            (est.mean - want).abs() < 3.0 * est.stderr,
            "mean={} want={want} stderr={}",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn mc_is_reproducible() {
        let p = uniform_phantom(0.0, 0.5);
        let noise = ColoredNoise::new(0.2, 1.0).unwrap();
        let ray = Ray::new(0.0, 0.0);
        let a = mc_average_projection(&p, &noise, &ray, Modality::Xray, 200, 0.01, 5).unwrap();
        let b = mc_average_projection(&p, &noise, &ray, Modality::Xray, 200, 0.01, 5).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.stderr, b.stderr);
    }

    #[test]
    fn averaged_spect_reduces_at_zero_h() {
        let mut p = uniform_phantom(1.0, 0.4);
        p.emission.fill_with(|x, y| 1.0 + 0.3 * x - 0.2 * y);
        let noise = ColoredNoise::new(0.0, 1.0).unwrap();
        let ray = Ray::new(1.9, -0.4);
        let avg = averaged_spect_projection(&p, &noise, &ray, 0.005).unwrap();
        let det = spect_projection(&p, &ray, None, 0.005).unwrap();
        assert_relative_eq!(avg, det, max_relative = 1e-12);
    }

    #[test]
    fn averaged_spect_matches_mc() {
        let p = uniform_phantom(1.0, 0.5);
        let noise = ColoredNoise::new(0.2, 1.0).unwrap();
        let ray = Ray::new(0.0, 0.3);
        let avg = averaged_spect_projection(&p, &noise, &ray, 0.01).unwrap();
        let est = mc_average_projection(&p, &noise, &ray, Modality::Spect, 4000, 0.01, 31).unwrap();
        assert!(
            (est.mean - avg).abs() < 3.0 * est.stderr,
            "mc={} closed={avg} stderr={}",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn point_source_sinogram_central() {
        let src = PointSource { y0: [0.0, 0.0], intensity: 1.0 };
        let sino =
            point_source_sinogram(&src, 0.5, &Domain::new(1.0), 8, 64, 1.0, ).unwrap();
        let du = sino.du();
        for k in 0..8 {
            let row = sino.view(k);
            let total: f64 = row.iter().sum();
            assert_relative_eq!(total, (-0.5_f64).exp() / du, max_relative = 1e-12);
        }
    }

    #[test]
    fn averaged_point_source_applies_g_factor() {
        let src = PointSource { y0: [0.0, 0.0], intensity: 1.0 };
        let noise = ColoredNoise::new(1.0, 1.0).unwrap();
        let sino = averaged_point_source_sinogram(&src, &noise, 1.0, &Domain::new(1.0), 4, 64, 1.0)
            .unwrap();
        // centered source: d = 1 for every view, G = exp(e^{-1} - 1),
        // mu* = 1 - 1 = 0.
        let g = ((-1.0_f64).exp() - 1.0).exp();
        let du = sino.du();
        for k in 0..4 {
            let total: f64 = sino.view(k).iter().sum();
            assert_relative_eq!(total, g / du, max_relative = 1e-12);
        }
    }

    #[test]
    fn transport_residual_zero_emission() {
        let p = uniform_phantom(0.0, 0.5);
        let noise = ColoredNoise::new(0.2, 1.0).unwrap();
        assert_eq!(transport_residual_max_norm(&p, &noise, 0.0, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn transport_residual_shrinks_with_step() {
        let mut p = uniform_phantom(0.0, 0.5);
        p.emission.fill_with(|x, y| (-(x * x + y * y) / (2.0 * 0.3 * 0.3)).exp());
        let noise = ColoredNoise::new(0.2, 1.0).unwrap();
        let coarse = transport_residual_max_norm(&p, &noise, 0.0, 0.16).unwrap();
        let fine = transport_residual_max_norm(&p, &noise, 0.0, 0.08).unwrap();
        let ratio = coarse / fine;
        assert!(ratio > 1.5 && ratio < 2.5, "ratio {ratio}");
    }
}
