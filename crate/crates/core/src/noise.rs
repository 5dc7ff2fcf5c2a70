//! Gaussian Markov ("colored") stochastic attenuation component.
//!
//! The random part of the attenuation coefficient is a zero-mean stationary
//! Gaussian process with covariance `h*alpha*exp(-alpha|s - s'|)`, sampled
//! along rays. Averages of `exp(-int mu_tilde)` have a closed form, which is
//! what makes the renormalized effective coefficient `mu* = mubar - h`
//! possible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the colored-noise attenuation component. The marginal
/// variance is `h * alpha`, the correlation radius `1/alpha`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ColoredNoise {
    pub h: f64,
    pub alpha: f64,
}

impl ColoredNoise {
    pub fn new(h: f64, alpha: f64) -> Result<Self> {
        if !(h >= 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise h must be >= 0, got {h}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise alpha must be > 0, got {alpha}"
            )));
        }
        Ok(Self { h, alpha })
    }

    /// Stationary marginal variance `h * alpha`.
    pub fn variance(&self) -> f64 {
        self.h * self.alpha
    }

    /// Covariance `h*alpha*exp(-alpha|s - s'|)` between two points along a ray.
    pub fn covariance(&self, s: f64, s_prime: f64) -> f64 {
        self.variance() * (-self.alpha * (s - s_prime).abs()).exp()
    }

    /// Draws one stationary realization along a segment of the given length.
    ///
    /// Uses the exact Ornstein-Uhlenbeck recursion
    /// `x_{k+1} = rho x_k + sqrt(h alpha (1 - rho^2)) xi_k` with
    /// `rho = exp(-alpha step)`, so the sampled covariance is exact at any
    /// step size. Deterministic for a fixed seed.
    pub fn sample_path(&self, length: f64, step: f64, seed: u64) -> Result<NoisePath> {
        if !(length > 0.0) {
            return Err(Error::InvalidArgument(format!("path length must be > 0, got {length}")));
        }
        if !(step > 0.0) {
            return Err(Error::InvalidArgument(format!("path step must be > 0, got {step}")));
        }
        let n = (length / step).ceil() as usize + 1;
        let mut samples = vec![0.0; n];
        if self.h > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sigma = self.variance().sqrt();
            let rho = (-self.alpha * step).exp();
            let drive = sigma * (1.0 - rho * rho).sqrt();
            let xi0: f64 = StandardNormal.sample(&mut rng);
            let mut x = sigma * xi0;
            samples[0] = x;
            for v in samples.iter_mut().skip(1) {
                let xi: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + drive * xi;
                *v = x;
            }
        }
        Ok(NoisePath { step, samples })
    }
}

/// One realization of the noise along a ray, on a uniform lattice starting
/// at path coordinate 0.
#[derive(Clone, Debug)]
pub struct NoisePath {
    pub step: f64,
    pub samples: Vec<f64>,
}

impl NoisePath {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Linear interpolation at distance `s >= 0` from the path start;
    /// clamped to the last sample beyond the sampled range.
    pub fn value_at(&self, s: f64) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let t = (s / self.step).max(0.0);
        let k = t.floor() as usize;
        if k + 1 >= self.samples.len() {
            return *self.samples.last().unwrap();
        }
        let w = t - k as f64;
        self.samples[k] * (1.0 - w) + self.samples[k + 1] * w
    }
}

/// `< exp(-int_a^b mu_tilde ds) >` for the colored noise: the Gaussian
/// characteristic functional evaluated on a segment indicator. Depends on
/// the segment only through its length `Delta = b - a`.
pub fn characteristic_functional(noise: &ColoredNoise, a: f64, b: f64) -> f64 {
    let delta = b - a;
    debug_assert!(delta >= 0.0);
    (noise.h * delta + noise.h / noise.alpha * ((-noise.alpha * delta).exp() - 1.0)).exp()
}

/// Averaged attenuation factor `< exp(-int (mubar + mu_tilde)) >` over a
/// segment of length `delta`, given the deterministic integral `int mubar`.
pub fn mean_attenuation_factor(
    noise: &ColoredNoise,
    mubar_integral: f64,
    delta: f64,
) -> Result<f64> {
    if delta < 0.0 {
        return Err(Error::InvalidArgument(format!("segment length must be >= 0, got {delta}")));
    }
    Ok(characteristic_functional(noise, 0.0, delta) * (-mubar_integral).exp())
}

/// Renormalized transport coefficients induced by the averaging.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoefficients {
    /// Effective attenuation `mubar - h`.
    pub mu_star: f64,
    /// Effective propagation speed `1 - h/alpha` (in units of the bare speed).
    pub velocity: f64,
    /// Diffusive dissipation coefficient `h/alpha^2`.
    pub dissipation: f64,
}

pub fn effective_coefficients(noise: &ColoredNoise, mubar: f64) -> EffectiveCoefficients {
    EffectiveCoefficients {
        mu_star: mubar - noise.h,
        velocity: 1.0 - noise.h / noise.alpha,
        dissipation: noise.h / (noise.alpha * noise.alpha),
    }
}

/// Validity report for the renormalized description. Reporting only; none
/// of the flags stop a computation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Indices of chords whose `int mu*` came out negative.
    pub negative_mustar_integrals: Vec<usize>,
    /// The correlation radius `1/alpha` is not below the target resolution.
    pub correlation_radius_too_coarse: bool,
    /// `h/alpha` exceeds the weak-noise threshold.
    pub weak_noise_violated: bool,
    pub weak_noise_threshold: f64,
}

impl ConsistencyReport {
    pub fn all_pass(&self) -> bool {
        self.negative_mustar_integrals.is_empty()
            && !self.correlation_radius_too_coarse
            && !self.weak_noise_violated
    }
}

pub const DEFAULT_WEAK_NOISE_THRESHOLD: f64 = 0.1;

pub fn validate_self_consistency(
    noise: &ColoredNoise,
    mustar_integrals: &[f64],
    resolution: f64,
) -> ConsistencyReport {
    validate_self_consistency_with(noise, mustar_integrals, resolution, DEFAULT_WEAK_NOISE_THRESHOLD)
}

pub fn validate_self_consistency_with(
    noise: &ColoredNoise,
    mustar_integrals: &[f64],
    resolution: f64,
    weak_noise_threshold: f64,
) -> ConsistencyReport {
    assert!(resolution > 0.0, "resolution must be positive");
    let negative: Vec<usize> = mustar_integrals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v < 0.0)
        .map(|(i, _)| i)
        .collect();
    ConsistencyReport {
        negative_mustar_integrals: negative,
        correlation_radius_too_coarse: 1.0 / noise.alpha >= resolution,
        weak_noise_violated: noise.h / noise.alpha >= weak_noise_threshold,
        weak_noise_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::trapezoid;
    use approx::assert_relative_eq;

    #[test]
    fn covariance_values() {
        let n = ColoredNoise::new(0.1, 10.0).unwrap();
        assert_relative_eq!(n.covariance(3.0, 3.0), 1.0, epsilon = 1e-14);
        let n0 = ColoredNoise::new(0.0, 1.0).unwrap();
        assert_eq!(n0.covariance(0.0, 5.0), 0.0);
        let n1 = ColoredNoise::new(0.1, 1.0).unwrap();
        assert_relative_eq!(n1.covariance(0.0, 1.0), 0.1 * (-1.0_f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn zero_h_gives_zero_path() {
        let n = ColoredNoise::new(0.0, 1.0).unwrap();
        let p = n.sample_path(2.0, 0.1, 7).unwrap();
        assert!(p.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn path_is_deterministic_in_seed() {
        let n = ColoredNoise::new(0.1, 1.0).unwrap();
        let a = n.sample_path(2.0, 0.01, 42).unwrap();
        let b = n.sample_path(2.0, 0.01, 42).unwrap();
        assert_eq!(a.samples, b.samples);
        let c = n.sample_path(2.0, 0.01, 43).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn lag_covariance_matches_model() {
        // Empirical lag-k covariance over a long path, h=0.1, alpha=1.
        let n = ColoredNoise::new(0.1, 1.0).unwrap();
        let step = 0.1;
        let p = n.sample_path(100_000.0, step, 123).unwrap();
        let m = p.samples.len();
        let mean = p.samples.iter().sum::<f64>() / m as f64;
        for lag in [0usize, 10, 20] {
            let mut acc = 0.0;
            for i in 0..m - lag {
                acc += (p.samples[i] - mean) * (p.samples[i + lag] - mean);
            }
            let emp = acc / (m - lag) as f64;
            let want = n.covariance(0.0, lag as f64 * step);
            // 3 sigma with an OU effective sample size of roughly m*step*alpha/2
            let stderr = n.variance() * (2.0 / (m as f64 * step * n.alpha)).sqrt();
            assert!(
                (emp - want).abs() < 3.5 * stderr,
                "lag {lag}: emp={emp} want={want} stderr={stderr}"
            );
        }
    }

    #[test]
    fn characteristic_functional_closed_form_values() {
        let n0 = ColoredNoise::new(0.0, 1.0).unwrap();
        assert_eq!(characteristic_functional(&n0, 0.0, 3.0), 1.0);
        let n = ColoredNoise::new(0.2, 1.0).unwrap();
        assert_eq!(characteristic_functional(&n, 1.0, 1.0), 1.0);
        let want = (0.4 + 0.2 * ((-2.0_f64).exp() - 1.0)).exp();
        assert_relative_eq!(characteristic_functional(&n, 0.0, 2.0), want, epsilon = 1e-14);
        assert_relative_eq!(want, 1.2549, epsilon = 2e-4);
    }

    #[test]
    fn characteristic_functional_matches_monte_carlo() {
        let n = ColoredNoise::new(0.2, 1.0).unwrap();
        let delta = 2.0;
        let step = 0.01;
        let n_paths = 20_000;
        let mut vals = Vec::with_capacity(n_paths);
        for k in 0..n_paths {
            let p = n.sample_path(delta, step, 1000 + k as u64).unwrap();
            vals.push((-trapezoid(&p.samples, step)).exp());
        }
        let mean = vals.iter().sum::<f64>() / n_paths as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n_paths - 1) as f64;
        let stderr = (var / n_paths as f64).sqrt();
        let want = characteristic_functional(&n, 0.0, delta);
        assert!(
            (mean - want).abs() < 3.0 * stderr,
            "mean={mean} want={want} stderr={stderr}"
        );
    }

    #[test]
    fn attenuation_factor_monotone_bounds() {
        let n = ColoredNoise::new(0.2, 1.0).unwrap();
        for &delta in &[0.1, 0.5, 2.0, 10.0] {
            let f = characteristic_functional(&n, 0.0, delta) * (-n.h * delta).exp();
            assert!(f <= 1.0 && f > (-n.h / n.alpha).exp(), "delta={delta} f={f}");
        }
    }

    #[test]
    fn white_noise_limit() {
        // alpha -> infinity at fixed h renormalizes mubar to mubar - h.
        let n = ColoredNoise::new(0.1, 1e3).unwrap();
        let got = mean_attenuation_factor(&n, 0.6, 2.0).unwrap();
        let want = (-(0.6_f64 - 0.1 * 2.0)).exp();
        assert!((got / want - 1.0).abs() < 1e-3, "got={got} want={want}");
    }

    #[test]
    fn mean_attenuation_factor_noise_free() {
        let n = ColoredNoise::new(0.0, 1.0).unwrap();
        assert_relative_eq!(
            mean_attenuation_factor(&n, 0.6, 2.0).unwrap(),
            (-0.6_f64).exp(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn effective_coefficient_values() {
        let n = ColoredNoise::new(0.1, 10.0).unwrap();
        let c = effective_coefficients(&n, 0.5);
        assert_eq!(c, EffectiveCoefficients { mu_star: 0.4, velocity: 0.99, dissipation: 0.001 });
        let n0 = ColoredNoise::new(0.0, 2.0).unwrap();
        let c0 = effective_coefficients(&n0, 0.5);
        assert_eq!(c0, EffectiveCoefficients { mu_star: 0.5, velocity: 1.0, dissipation: 0.0 });
        let nh = ColoredNoise::new(0.5, 0.5).unwrap();
        let ch = effective_coefficients(&nh, 0.5);
        assert_eq!(ch, EffectiveCoefficients { mu_star: 0.0, velocity: 0.0, dissipation: 2.0 });
    }

    #[test]
    fn consistency_flags() {
        let n = ColoredNoise::new(1.0, 100.0).unwrap();
        let ok = validate_self_consistency(&n, &[0.1, 0.2], 0.1);
        assert!(ok.all_pass());

        let neg = validate_self_consistency(&n, &[0.1, -0.01], 0.1);
        assert_eq!(neg.negative_mustar_integrals, vec![1]);
        assert!(!neg.all_pass());

        let coarse = ColoredNoise::new(0.01, 1.0).unwrap();
        let r = validate_self_consistency(&coarse, &[], 0.5);
        assert!(r.correlation_radius_too_coarse);
        let fine = ColoredNoise::new(0.01, 5.0).unwrap();
        let r = validate_self_consistency(&fine, &[], 0.5);
        assert!(!r.correlation_radius_too_coarse);

        let strong = ColoredNoise::new(1.0, 2.0).unwrap();
        assert!(validate_self_consistency(&strong, &[], 0.1).weak_noise_violated);
    }
}
