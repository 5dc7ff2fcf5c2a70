//! Rays, the disk domain and deterministic line integrals.
//!
//! Everything downstream (projections, averaged transforms, the G-factor)
//! touches the domain only through the exit parameter `tau` and the chord
//! length `L`, which are closed-form for a disk.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disk region of interest in R^2.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Domain {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Domain {
    pub fn new(radius: f64) -> Self {
        assert!(radius > 0.0, "domain radius must be positive");
        Domain { center: [0.0, 0.0], radius }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy < self.radius * self.radius
    }
}

/// Parallel-beam ray: direction angle `phi`, lateral offset `u` along
/// `omega_perp = (-sin phi, cos phi)`. A point on the ray is
/// `x(s) = u * omega_perp + s * omega`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Ray {
    pub phi: f64,
    pub u: f64,
}

impl Ray {
    pub fn new(phi: f64, u: f64) -> Self {
        Ray { phi, u }
    }

    pub fn direction(&self) -> [f64; 2] {
        [self.phi.cos(), self.phi.sin()]
    }

    pub fn perp(&self) -> [f64; 2] {
        [-self.phi.sin(), self.phi.cos()]
    }

    pub fn point_at(&self, s: f64) -> [f64; 2] {
        let om = self.direction();
        let op = self.perp();
        [self.u * op[0] + s * om[0], self.u * op[1] + s * om[1]]
    }
}

/// Exit parameter `tau(omega, u)`: the s-coordinate where the ray leaves the
/// disk through the boundary point with outward normal satisfying
/// `nu . omega >= 0`. For the centered disk `tau = sqrt(rho^2 - u^2)`.
pub fn exit_parameter(domain: &Domain, ray: &Ray) -> Result<f64> {
    let (u_c, s_c) = center_offsets(domain, ray);
    let du = ray.u - u_c;
    if du.abs() > domain.radius {
        return Err(Error::RayMissesDomain { u: du, radius: domain.radius });
    }
    Ok(s_c + (domain.radius * domain.radius - du * du).sqrt())
}

/// Chord length of the ray inside the disk; zero for rays that miss it.
pub fn chord_length(domain: &Domain, ray: &Ray) -> f64 {
    let (u_c, _) = center_offsets(domain, ray);
    let du = ray.u - u_c;
    let h2 = domain.radius * domain.radius - du * du;
    if h2 <= 0.0 {
        0.0
    } else {
        2.0 * h2.sqrt()
    }
}

fn center_offsets(domain: &Domain, ray: &Ray) -> (f64, f64) {
    let om = ray.direction();
    let op = ray.perp();
    let u_c = domain.center[0] * op[0] + domain.center[1] * op[1];
    let s_c = domain.center[0] * om[0] + domain.center[1] * om[1];
    (u_c, s_c)
}

/// Uniform scalar field sampled on a regular grid, row-major
/// (`values[iy * nx + ix]`). `origin` is the coordinate of the center of
/// cell `(0, 0)`; samples outside the grid read as zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: [f64; 2],
    pub values: Vec<f64>,
}

impl Grid2D {
    pub fn zeros(nx: usize, ny: usize, dx: f64, dy: f64, origin: [f64; 2]) -> Self {
        assert!(nx >= 1 && ny >= 1, "grid must have at least one bin per axis");
        assert!(dx > 0.0 && dy > 0.0, "bin sizes must be positive");
        Grid2D { nx, ny, dx, dy, origin, values: vec![0.0; nx * ny] }
    }

    /// Square grid of `n x n` cells covering `[-extent, extent]^2`.
    pub fn square(n: usize, extent: f64) -> Self {
        let d = 2.0 * extent / n as f64;
        Grid2D::zeros(n, n, d, d, [-extent + 0.5 * d, -extent + 0.5 * d])
    }

    pub fn constant(nx: usize, ny: usize, dx: f64, dy: f64, origin: [f64; 2], c: f64) -> Self {
        let mut g = Grid2D::zeros(nx, ny, dx, dy, origin);
        g.values.fill(c);
        g
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn set(&mut self, ix: usize, iy: usize, v: f64) {
        self.values[iy * self.nx + ix] = v;
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [self.origin[0] + ix as f64 * self.dx, self.origin[1] + iy as f64 * self.dy]
    }

    /// Fill from a function of the cell-center coordinates.
    pub fn fill_with(&mut self, f: impl Fn(f64, f64) -> f64) {
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let [x, y] = self.cell_center(ix, iy);
                self.values[iy * self.nx + ix] = f(x, y);
            }
        }
    }

    /// Bilinear interpolation, zero outside the grid extent.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let fx = (x - self.origin[0]) / self.dx;
        let fy = (y - self.origin[1]) / self.dy;
        if fx < -1.0 || fy < -1.0 || fx > self.nx as f64 || fy > self.ny as f64 {
            return 0.0;
        }
        let ix = fx.floor();
        let iy = fy.floor();
        let tx = fx - ix;
        let ty = fy - iy;
        let read = |i: f64, j: f64| -> f64 {
            if i < 0.0 || j < 0.0 || i >= self.nx as f64 || j >= self.ny as f64 {
                0.0
            } else {
                self.values[j as usize * self.nx + i as usize]
            }
        };
        let v00 = read(ix, iy);
        let v10 = read(ix + 1.0, iy);
        let v01 = read(ix, iy + 1.0);
        let v11 = read(ix + 1.0, iy + 1.0);
        v00 * (1.0 - tx) * (1.0 - ty)
            + v10 * tx * (1.0 - ty)
            + v01 * (1.0 - tx) * ty
            + v11 * tx * ty
    }

    /// Default quadrature step used by the projectors.
    pub fn default_step(&self) -> f64 {
        0.5 * self.dx.min(self.dy)
    }

    /// Write as little-endian f32 binary (row-major) plus a JSON sidecar
    /// describing the lattice. The sidecar lands next to `path` with the
    /// extension replaced by `json`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        let mut buf = Vec::with_capacity(self.values.len() * 4);
        for &v in &self.values {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        f.write_all(&buf)?;
        let sidecar = GridSidecar {
            nx: self.nx,
            ny: self.ny,
            dx: self.dx,
            dy: self.dy,
            origin_x: self.origin[0],
            origin_y: self.origin[1],
        };
        let sp = path.with_extension("json");
        std::fs::write(sp, serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Grid2D> {
        let sp = path.with_extension("json");
        let sidecar: GridSidecar = serde_json::from_str(&std::fs::read_to_string(sp)?)?;
        let mut f = std::fs::File::open(path)?;
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)?;
        let expected = sidecar.nx * sidecar.ny * 4;
        if buf.len() != expected {
            return Err(Error::Format(format!(
                "grid payload is {} bytes, expected {}",
                buf.len(),
                expected
            )));
        }
        let values = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Ok(Grid2D {
            nx: sidecar.nx,
            ny: sidecar.ny,
            dx: sidecar.dx,
            dy: sidecar.dy,
            origin: [sidecar.origin_x, sidecar.origin_y],
            values,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct GridSidecar {
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    origin_x: f64,
    origin_y: f64,
}

/// Composite-trapezoid line integral of the grid field along the ray between
/// parameters `s0 <= s1`, sampled at most `step` apart.
pub fn line_integral(grid: &Grid2D, ray: &Ray, s0: f64, s1: f64, step: f64) -> Result<f64> {
    if s1 < s0 {
        return Err(Error::InvalidArgument(format!("s0={s0} > s1={s1}")));
    }
    if step <= 0.0 {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    if s1 == s0 {
        return Ok(0.0);
    }
    let n = ((s1 - s0) / step).ceil() as usize;
    let h = (s1 - s0) / n as f64;
    let mut acc = 0.0;
    let mut prev = sample_on_ray(grid, ray, s0)?;
    for k in 1..=n {
        let cur = sample_on_ray(grid, ray, s0 + k as f64 * h)?;
        acc += 0.5 * (prev + cur) * h;
        prev = cur;
    }
    Ok(acc)
}

fn sample_on_ray(grid: &Grid2D, ray: &Ray, s: f64) -> Result<f64> {
    let [x, y] = ray.point_at(s);
    let v = grid.sample(x, y);
    if !v.is_finite() {
        return Err(Error::NonFinite("line_integral sample"));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exit_parameter_central_and_offset() {
        let d = Domain::new(1.0);
        assert_relative_eq!(exit_parameter(&d, &Ray::new(0.3, 0.0)).unwrap(), 1.0);
        assert_relative_eq!(exit_parameter(&d, &Ray::new(1.1, 0.6)).unwrap(), 0.8);
        assert!(exit_parameter(&d, &Ray::new(0.0, 1.2)).is_err());
    }

    #[test]
    fn chord_lengths() {
        let d = Domain::new(1.0);
        assert_relative_eq!(chord_length(&d, &Ray::new(0.0, 0.0)), 2.0);
        assert_relative_eq!(chord_length(&d, &Ray::new(2.0, 0.6)), 1.6);
        assert_relative_eq!(chord_length(&d, &Ray::new(0.0, 1.0)), 0.0);
    }

    #[test]
    fn chord_is_twice_exit_parameter_on_centered_disk() {
        let d = Domain::new(1.3);
        for k in 0..50 {
            let u = -1.25 + 0.05 * k as f64;
            if u.abs() >= d.radius {
                continue;
            }
            let r = Ray::new(0.7, u);
            let tau = exit_parameter(&d, &r).unwrap();
            assert_relative_eq!(chord_length(&d, &r), 2.0 * tau, max_relative = 1e-12);
        }
    }

    #[test]
    fn line_integral_constant_field() {
        let g = Grid2D::constant(64, 64, 0.05, 0.05, [-1.575, -1.575], 2.5);
        let ray = Ray::new(0.9, 0.1);
        let v = line_integral(&g, &ray, -0.7, 0.7, 0.01).unwrap();
        assert_relative_eq!(v, 2.5 * 1.4, epsilon = 1e-12);
    }

    #[test]
    fn line_integral_zero_field() {
        let g = Grid2D::zeros(8, 8, 0.5, 0.5, [-1.75, -1.75]);
        let v = line_integral(&g, &Ray::new(0.0, 0.0), -1.0, 1.0, 0.01).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn line_integral_linear_field_exact_for_trapezoid() {
        // f(x, y) = 3x along the x1-axis from 0 to 1 -> 3/2.
        let mut g = Grid2D::square(128, 2.0);
        g.fill_with(|x, _| 3.0 * x);
        let v = line_integral(&g, &Ray::new(0.0, 0.0), 0.0, 1.0, 1e-3).unwrap();
        assert_relative_eq!(v, 1.5, max_relative = 1e-9);
    }

    #[test]
    fn line_integral_additivity() {
        let mut g = Grid2D::square(64, 1.5);
        g.fill_with(|x, y| (1.0 + x * y).exp() * 0.1);
        let ray = Ray::new(0.4, -0.2);
        let whole = line_integral(&g, &ray, -0.9, 0.9, 0.01).unwrap();
        // Split point chosen on a shared sample lattice so both halves see
        // the same nodes.
        let a = line_integral(&g, &ray, -0.9, 0.0, 0.01).unwrap();
        let b = line_integral(&g, &ray, 0.0, 0.9, 0.01).unwrap();
        assert_relative_eq!(whole, a + b, max_relative = 1e-10);
    }

    #[test]
    fn line_integral_step_halving_quarters_error() {
        let mut g = Grid2D::square(256, 1.5);
        g.fill_with(|x, _| x * x);
        let ray = Ray::new(0.0, 0.0);
        let exact = 2.0 / 3.0; // int_{-1}^{1} x^2 dx on the smooth interior
        let coarse = (line_integral(&g, &ray, -1.0, 1.0, 0.08).unwrap() - exact).abs();
        let fine = (line_integral(&g, &ray, -1.0, 1.0, 0.04).unwrap() - exact).abs();
        let ratio = coarse / fine;
        assert!(ratio > 2.5 && ratio < 6.0, "ratio {ratio}");
    }

    #[test]
    fn grid_roundtrip_binary() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.bin");
        let mut g = Grid2D::square(16, 1.0);
        g.fill_with(|x, y| x + 2.0 * y);
        g.write_binary(&p).unwrap();
        let g2 = Grid2D::read_binary(&p).unwrap();
        assert_eq!(g.nx, g2.nx);
        assert_eq!(g.ny, g2.ny);
        for (a, b) in g.values.iter().zip(&g2.values) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}
