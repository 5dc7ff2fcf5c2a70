//! First-order scattering correction: the single-scatter term added to the
//! unscattered intensity, with a separable kernel (scatterer density times
//! an angular profile in the scattering cosine).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{spect_projection, Phantom};
use crate::geometry::{chord_length, exit_parameter, Grid2D, Ray};
use crate::quad::cumulative_trapezoid;

/// Angular scattering profile `beta(cos psi) >= 0`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum AngularKernel {
    /// Constant profile of amplitude `w0`.
    Isotropic { w0: f64 },
    /// Even polynomial in the scattering cosine: `sum_k coeffs[k] * c^(2k)`.
    Poly { coeffs: Vec<f64> },
}

impl AngularKernel {
    pub fn eval(&self, cos_psi: f64) -> f64 {
        match self {
            AngularKernel::Isotropic { w0 } => *w0,
            AngularKernel::Poly { coeffs } => {
                let c2 = cos_psi * cos_psi;
                let mut acc = 0.0;
                let mut p = 1.0;
                for &a in coeffs {
                    acc += a * p;
                    p *= c2;
                }
                acc
            }
        }
    }

    /// Same profile scaled by `c`.
    pub fn scaled(&self, c: f64) -> AngularKernel {
        match self {
            AngularKernel::Isotropic { w0 } => AngularKernel::Isotropic { w0: c * w0 },
            AngularKernel::Poly { coeffs } => {
                AngularKernel::Poly { coeffs: coeffs.iter().map(|a| c * a).collect() }
            }
        }
    }
}

/// Separable scattering kernel `n_s(x) * beta(omega . omega')`.
#[derive(Clone, Debug)]
pub struct ScatterKernel {
    pub density: Grid2D,
    pub angular: AngularKernel,
}

/// Sample lattice from the chord entry point up to ray parameter `s_end`.
fn entry_lattice(phantom: &Phantom, ray: &Ray, s_end: f64, step: f64) -> Result<Option<(f64, f64, usize)>> {
    if step <= 0.0 {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let l = chord_length(&phantom.domain, ray);
    if l <= 0.0 {
        return Ok(None);
    }
    let s_in = exit_parameter(&phantom.domain, ray)? - l;
    if s_end <= s_in {
        return Ok(None);
    }
    let n = (((s_end - s_in) / step).ceil() as usize).max(1);
    Ok(Some((s_in, (s_end - s_in) / n as f64, n + 1)))
}

/// Unscattered intensity at an interior point:
/// `I0_omega(x) = int_entry^x exp(-int_y^x mu) f(y) dl`,
/// the same sweep as the emission projection, stopped at `x`.
pub fn unscattered_intensity(
    phantom: &Phantom,
    x: [f64; 2],
    phi: f64,
    step: f64,
) -> Result<f64> {
    let op = [-phi.sin(), phi.cos()];
    let om = [phi.cos(), phi.sin()];
    let u = x[0] * op[0] + x[1] * op[1];
    let sx = x[0] * om[0] + x[1] * om[1];
    let ray = Ray::new(phi, u);
    let Some((s0, ds, count)) = entry_lattice(phantom, &ray, sx, step)? else {
        return Ok(0.0);
    };
    let mut mu = Vec::with_capacity(count);
    let mut f = Vec::with_capacity(count);
    for k in 0..count {
        let [px, py] = ray.point_at(s0 + k as f64 * ds);
        let m = phantom.attenuation_mean.sample(px, py);
        let e = phantom.emission.sample(px, py);
        if !m.is_finite() || !e.is_finite() {
            return Err(Error::NonFinite("field sample"));
        }
        mu.push(m);
        f.push(e);
    }
    let cum = cumulative_trapezoid(&mu, ds);
    let total = cum[count - 1];
    let mut acc = 0.0;
    for k in 0..count {
        let w = if k == 0 || k == count - 1 { 0.5 } else { 1.0 };
        acc += w * f[k] * (-(total - cum[k])).exp();
    }
    Ok(acc * ds)
}

/// Single-scatter intensity arriving at `x` along direction `phi`:
/// `int_entry^x dl(x') exp(-int_{x'}^x mu) n_s(x')
///  sum_q w_q beta(omega . omega_q) I0_{omega_q}(x')`
/// with uniform angular quadrature weights `w_q = 2 pi / n_angles`.
pub fn first_order_scatter(
    phantom: &Phantom,
    kernel: &ScatterKernel,
    x: [f64; 2],
    phi: f64,
    step: f64,
    n_angles: usize,
) -> Result<f64> {
    if n_angles < 8 {
        return Err(Error::InvalidArgument("need at least 8 scattering angles".into()));
    }
    let op = [-phi.sin(), phi.cos()];
    let om = [phi.cos(), phi.sin()];
    let u = x[0] * op[0] + x[1] * op[1];
    let sx = x[0] * om[0] + x[1] * om[1];
    let ray = Ray::new(phi, u);
    let Some((s0, ds, count)) = entry_lattice(phantom, &ray, sx, step)? else {
        return Ok(0.0);
    };
    let mut mu = Vec::with_capacity(count);
    for k in 0..count {
        let [px, py] = ray.point_at(s0 + k as f64 * ds);
        mu.push(phantom.attenuation_mean.sample(px, py));
    }
    let cum = cumulative_trapezoid(&mu, ds);
    let total = cum[count - 1];
    let w_q = std::f64::consts::TAU / n_angles as f64;
    let mut acc = 0.0;
    for k in 0..count {
        let sp = ray.point_at(s0 + k as f64 * ds);
        let dens = kernel.density.sample(sp[0], sp[1]);
        if dens == 0.0 {
            continue;
        }
        let mut inflow = 0.0;
        for q in 0..n_angles {
            let phi_q = q as f64 * w_q;
            let cos_psi = om[0] * phi_q.cos() + om[1] * phi_q.sin();
            let beta = kernel.angular.eval(cos_psi);
            if beta == 0.0 {
                continue;
            }
            inflow += w_q * beta * unscattered_intensity(phantom, sp, phi_q, step)?;
        }
        let w = if k == 0 || k == count - 1 { 0.5 } else { 1.0 };
        acc += w * dens * inflow * (-(total - cum[k])).exp();
    }
    Ok(acc * ds)
}

/// Detected projection including the first-order scatter term, evaluated at
/// the chord exit point. Reduces bit-identically to the direct projection
/// for a vanishing kernel.
pub fn scattered_projection(
    phantom: &Phantom,
    kernel: &ScatterKernel,
    ray: &Ray,
    step: f64,
    n_angles: usize,
) -> Result<f64> {
    let direct = spect_projection(phantom, ray, None, step)?;
    let l = chord_length(&phantom.domain, ray);
    if l <= 0.0 {
        return Ok(direct);
    }
    let exit = ray.point_at(exit_parameter(&phantom.domain, ray)?);
    let scatter = first_order_scatter(phantom, kernel, exit, ray.phi, step, n_angles)?;
    Ok(direct + scatter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Domain;
    use approx::assert_relative_eq;

    fn symmetric_phantom() -> Phantom {
        let mut emission = Grid2D::square(96, 1.2);
        emission.fill_with(|x, y| (-(x * x + y * y) / 0.18).exp());
        let mut attenuation = Grid2D::square(96, 1.2);
        attenuation.fill_with(|x, y| if x * x + y * y < 1.0 { 0.3 } else { 0.0 });
        Phantom { emission, attenuation_mean: attenuation, domain: Domain::new(1.0) }
    }

    fn uniform_density() -> Grid2D {
        let mut d = Grid2D::square(96, 1.2);
        d.fill_with(|x, y| if x * x + y * y < 1.0 { 1.0 } else { 0.0 });
        d
    }

    #[test]
    fn zero_emission_gives_zero_intensity() {
        let mut p = symmetric_phantom();
        p.emission.values.fill(0.0);
        assert_eq!(unscattered_intensity(&p, [0.2, 0.1], 0.7, 0.01).unwrap(), 0.0);
    }

    #[test]
    fn unattenuated_intensity_is_partial_radon() {
        let mut p = symmetric_phantom();
        p.attenuation_mean.values.fill(0.0);
        p.emission.fill_with(|_, _| 1.0);
        // central ray, evaluation point at s = 0.5: entry at -1, length 1.5
        let v = unscattered_intensity(&p, [0.5, 0.0], 0.0, 0.005).unwrap();
        assert_relative_eq!(v, 1.5, max_relative = 1e-6);
    }

    #[test]
    fn boundary_intensity_equals_projection() {
        let p = symmetric_phantom();
        let ray = Ray::new(0.9, 0.25);
        let tau = exit_parameter(&p.domain, &ray).unwrap();
        let x = ray.point_at(tau);
        let v = unscattered_intensity(&p, x, 0.9, 0.004).unwrap();
        let g = spect_projection(&p, &ray, None, 0.004).unwrap();
        assert_relative_eq!(v, g, max_relative = 1e-12);
    }

    #[test]
    fn zero_kernel_reduces_bit_identically() {
        let p = symmetric_phantom();
        let kernel = ScatterKernel { density: uniform_density(), angular: AngularKernel::Isotropic { w0: 0.0 } };
        let ray = Ray::new(0.3, -0.2);
        let direct = spect_projection(&p, &ray, None, 0.02).unwrap();
        let total = scattered_projection(&p, &kernel, &ray, 0.02, 16).unwrap();
        assert_eq!(direct, total);
    }

    #[test]
    fn scatter_term_linear_in_amplitude() {
        let p = symmetric_phantom();
        let ray = Ray::new(0.0, 0.1);
        let k1 = ScatterKernel { density: uniform_density(), angular: AngularKernel::Isotropic { w0: 0.02 } };
        let k2 = ScatterKernel { density: uniform_density(), angular: k1.angular.scaled(3.0) };
        let direct = spect_projection(&p, &ray, None, 0.02).unwrap();
        let t1 = scattered_projection(&p, &k1, &ray, 0.02, 16).unwrap() - direct;
        let t2 = scattered_projection(&p, &k2, &ray, 0.02, 16).unwrap() - direct;
        assert!(t1 > 0.0);
        assert_relative_eq!(t2, 3.0 * t1, max_relative = 1e-12);
    }

    #[test]
    fn polynomial_kernel_evaluates() {
        let k = AngularKernel::Poly { coeffs: vec![0.5, 0.25] };
        assert_relative_eq!(k.eval(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(k.eval(1.0), 0.75, epsilon = 1e-15);
        assert_relative_eq!(k.eval(-1.0), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn rotational_symmetry() {
        let p = symmetric_phantom();
        let kernel = ScatterKernel { density: uniform_density(), angular: AngularKernel::Isotropic { w0: 0.05 } };
        let a = scattered_projection(&p, &kernel, &Ray::new(0.0, 0.3), 0.01, 32).unwrap();
        let b = scattered_projection(&p, &kernel, &Ray::new(1.3, 0.3), 0.01, 32).unwrap();
        assert!((a / b - 1.0).abs() < 0.01, "a={a} b={b}");
    }
}
