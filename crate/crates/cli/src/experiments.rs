//! Experiment runner: each named experiment exercises one validated claim
//! end to end, writes its data files, and produces a machine-readable
//! pass/fail report with the measured values and tolerances.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tomo_core::forward::{
    averaged_point_source_sinogram, averaged_xray_projection, correct_xray_projection,
    derive_seed, point_source_sinogram, transport_residual_max_norm, Phantom, PointSource,
};
use tomo_core::geometry::{Domain, Grid2D, Ray};
use tomo_core::noise::{characteristic_functional, ColoredNoise};
use tomo_core::pointsrc::{
    delta_b, fourier_coeffs, g_factor, jacobi_anger_check, kn_closed_form, kn_quadrature,
    predicted_reconstruction, sample_g_factor,
};
use tomo_core::quad::trapezoid;
use tomo_core::recon::{classical_fbp, exponential_fbp, exponential_fbp_at_points, FilterSpec};
use tomo_core::scatter::{scattered_projection, AngularKernel, ScatterKernel};
use tomo_core::sinogram::{Modality, Sinogram};

use crate::config::ExperimentConfig;

pub const EXPERIMENT_NAMES: &[&str] = &[
    "kn-validate",
    "mc-attenuation",
    "white-noise-limit",
    "psf-noise-free",
    "psf-distortion",
    "xray-roundtrip",
    "scatter-linearity",
    "transport-residual",
];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub lo: f64,
    pub hi: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub config_sha256: String,
    pub seed: u64,
}

impl Report {
    fn new(name: &str, cfg: &ExperimentConfig) -> Self {
        Report {
            experiment: name.to_string(),
            passed: true,
            checks: Vec::new(),
            notes: Vec::new(),
            config_sha256: cfg.sha256(),
            seed: cfg.mc.seed,
        }
    }

    /// Records `lo <= measured <= hi`.
    fn check(&mut self, name: impl Into<String>, measured: f64, lo: f64, hi: f64) {
        let pass = measured >= lo && measured <= hi && measured.is_finite();
        self.passed &= pass;
        self.checks.push(Check { name: name.into(), measured, lo, hi, pass });
    }

    fn check_le(&mut self, name: impl Into<String>, measured: f64, hi: f64) {
        self.check(name, measured, f64::NEG_INFINITY, hi);
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }
}

fn err_str(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn write_text(path: &Path, text: &str) -> Result<(), String> {
    std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Ordinary least-squares slope of `ln y` against `ln x`.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

pub fn run_experiment(
    name: &str,
    cfg: &ExperimentConfig,
    outdir: &Path,
) -> Result<Report, String> {
    std::fs::create_dir_all(outdir).map_err(err_str)?;
    let report = match name {
        "kn-validate" => kn_validate(cfg, outdir)?,
        "mc-attenuation" => mc_attenuation(cfg, outdir)?,
        "white-noise-limit" => white_noise_limit(cfg, outdir)?,
        "psf-noise-free" => psf_noise_free(cfg, outdir)?,
        "psf-distortion" => psf_distortion(cfg, outdir)?,
        "xray-roundtrip" => xray_roundtrip(cfg, outdir)?,
        "scatter-linearity" => scatter_linearity(cfg, outdir)?,
        "transport-residual" => transport_residual(cfg, outdir)?,
        other => {
            return Err(format!(
                "unknown experiment '{other}'; expected one of {}",
                EXPERIMENT_NAMES.join(", ")
            ))
        }
    };
    let path = outdir.join(format!("{name}-report.json"));
    write_text(&path, &serde_json::to_string_pretty(&report).map_err(err_str)?)?;
    Ok(report)
}

/// K_n oracle agreement: brute-force quadrature against the closed forms,
/// with the O(1/sqrt b) decay of the residual; plus the series identity
/// self-test that underpins the derivation.
fn kn_validate(cfg: &ExperimentConfig, outdir: &Path) -> Result<Report, String> {
    let mut report = Report::new("kn-validate", cfg);
    let ms = [1u32, 2, 3];
    let mus = [0.0, 0.15, 0.3];
    let rs = [0.5, 1.0, 2.0];
    let bs = [100.0, 200.0, 400.0];
    let mut tuples = Vec::new();
    for &m in &ms {
        for &mu in &mus {
            for &r in &rs {
                for &b in &bs {
                    tuples.push((m, mu, r, b));
                }
            }
        }
    }
    struct Row {
        m: u32,
        mu: f64,
        r: f64,
        b: f64,
        q_odd: f64,
        q_even: f64,
        closed_odd: f64,
        closed_even: f64,
        k2: f64,
        res_odd: f64,
        res_even: f64,
    }
    let rows: Vec<Row> = tuples
        .par_iter()
        .map(|&(m, mu, r, b)| -> Result<Row, String> {
            let q_odd = kn_quadrature(2 * m - 1, r, mu, b).map_err(err_str)?;
            let q_even = kn_quadrature(2 * m, r, mu, b).map_err(err_str)?;
            let cf = kn_closed_form(m, r, mu);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let closed_even = sign * 4.0 * PI * delta_b(r, b) + cf.k2;
            Ok(Row {
                m,
                mu,
                r,
                b,
                q_odd,
                q_even,
                closed_odd: cf.k1,
                closed_even,
                k2: cf.k2,
                res_odd: q_odd - cf.k1,
                res_even: q_even - closed_even,
            })
        })
        .collect::<Result<Vec<Row>, String>>()?;

    let mut csv = String::from("n,R,mu,b,quadrature,closed_form,residual\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{:.12e},{:.12e},{:.12e}\n",
            2 * row.m - 1,
            row.r,
            row.mu,
            row.b,
            row.q_odd,
            row.closed_odd,
            row.res_odd
        ));
        csv.push_str(&format!(
            "{},{},{},{},{:.12e},{:.12e},{:.12e}\n",
            2 * row.m,
            row.r,
            row.mu,
            row.b,
            row.q_even,
            row.closed_even,
            row.res_even
        ));
    }
    write_text(&outdir.join("kn.csv"), &csv)?;

    // Decay slope of |residual| in b, pooled over the whole grid (points
    // with residuals at round-off are excluded: the odd integrals vanish
    // identically at mu = 0).
    let pooled: Vec<(f64, f64)> = rows
        .iter()
        .flat_map(|row| [(row.b, row.res_odd.abs()), (row.b, row.res_even.abs())])
        .filter(|&(_, r)| r > 1e-10)
        .collect();
    report.check("pooled log-log slope of residual vs b", loglog_slope(&pooled), -0.7, -0.3);

    // Normalized size of the leftover at the largest cutoff. The residual
    // is an oscillatory O(1/sqrt b) envelope, so individual grid points can
    // sit near its crest; the acceptance figure is the grid mean, with the
    // worst point reported alongside.
    let at_b400: Vec<f64> = rows
        .iter()
        .filter(|row| row.b == 400.0)
        .map(|row| {
            let n_odd = row.res_odd.abs() / row.closed_odd.abs().max(1.0);
            let n_even = row.res_even.abs() / row.k2.abs().max(1.0);
            n_odd.max(n_even)
        })
        .collect();
    let mean = at_b400.iter().sum::<f64>() / at_b400.len() as f64;
    let max = at_b400.iter().cloned().fold(0.0, f64::max);
    report.check_le("mean normalized residual at b = 400", mean, 0.05);
    report.note(format!(
        "worst single grid point at b = 400: {max:.4} (oscillatory endpoint envelope; see README)"
    ));

    // Series identity residual at the documented evaluation point.
    let worst_ja = (0..8)
        .map(|k| jacobi_anger_check(0.3, 1.0, k as f64 * TAU / 8.0, 2.0, 48))
        .fold(0.0, f64::max);
    report.check_le("series identity residual (n_max = 48)", worst_ja, 1e-8);
    Ok(report)
}

/// Monte Carlo validation of the closed-form exponential average over
/// exact Ornstein-Uhlenbeck paths.
fn mc_attenuation(cfg: &ExperimentConfig, outdir: &Path) -> Result<Report, String> {
    let mut report = Report::new("mc-attenuation", cfg);
    let delta = 2.0;
    let step = 0.01;
    let n = cfg.mc.samples.max(2);
    let mut csv = String::from("h,alpha,mc_mean,mc_stderr,closed_form,z\n");
    for &h in &[0.05, 0.2] {
        for &alpha in &[1.0, 10.0] {
            let noise = ColoredNoise::new(h, alpha).map_err(err_str)?;
            let stream = (h.to_bits() ^ alpha.to_bits()).rotate_left(17) ^ cfg.mc.seed;
            let vals: Vec<f64> = (0..n as u64)
                .into_par_iter()
                .map(|i| -> Result<f64, String> {
                    let p = noise.sample_path(delta, step, derive_seed(stream, i)).map_err(err_str)?;
                    Ok((-trapezoid(&p.samples, step)).exp())
                })
                .collect::<Result<Vec<f64>, String>>()?;
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            let stderr = (var / n as f64).sqrt();
            let closed = characteristic_functional(&noise, 0.0, delta);
            let z = (mean - closed).abs() / stderr;
            csv.push_str(&format!("{h},{alpha},{mean:.12e},{stderr:.6e},{closed:.12e},{z:.3}\n"));
            report.check_le(format!("z-score (h = {h}, alpha = {alpha})"), z, 3.0);
        }
    }
    write_text(&outdir.join("mc-attenuation.csv"), &csv)?;
    Ok(report)
}

/// White-noise limit: the averaged transmission projection converges to the
/// plain exponential of the renormalized coefficient `mubar - h`.
fn white_noise_limit(cfg: &ExperimentConfig, outdir: &Path) -> Result<Report, String> {
    let mut report = Report::new("white-noise-limit", cfg);
    let noise = ColoredNoise::new(0.1, 1e3).map_err(err_str)?;
    let (mubar, delta) = (0.5, 2.0);
    let closed = averaged_xray_projection(1.0, mubar * delta, &noise, delta);
    let limit = (-(mubar - noise.h) * delta).exp();
    report.check_le(
        "relative deviation of mean projection from exp(-(mubar - h) L)",
        (closed / limit - 1.0).abs(),
        0.005,
    );

    // Independent sanity check: brute-force Monte Carlo at a path step well
    // below the 1/alpha correlation radius.
    let n = cfg.mc.samples.clamp(1000, 10_000);
    let step = 1e-4;
    let vals: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| -> Result<f64, String> {
            let p = noise.sample_path(delta, step, derive_seed(cfg.mc.seed ^ 0xA5A5, i)).map_err(err_str)?;
            Ok((-mubar * delta - trapezoid(&p.samples, step)).exp())
        })
        .collect::<Result<Vec<f64>, String>>()?;
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let stderr = (var / n as f64).sqrt();
    let z = (mean - closed).abs() / stderr;
    report.check_le("Monte Carlo z-score against the closed form", z, 3.5);
    write_text(
        &outdir.join("white-noise-limit.csv"),
        &format!(
            "closed_form,limit,mc_mean,mc_stderr\n{closed:.12e},{limit:.12e},{mean:.12e},{stderr:.6e}\n"
        ),
    )?;
    Ok(report)
}

fn argmax_grid(g: &Grid2D) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            let v = g.at(ix, iy);
            if v > best.2 {
                best = (ix, iy, v);
            }
        }
    }
    best
}

/// Full width at half maximum along the grid row through `(ix, iy)`,
/// with linear interpolation of the crossings.
fn fwhm_along_row(g: &Grid2D, ix: usize, iy: usize) -> f64 {
    let peak = g.at(ix, iy);
    let half = 0.5 * peak;
    let cross = |mut i: i64, dir: i64| -> f64 {
        loop {
            let j = i + dir;
            if j < 0 || j >= g.nx as i64 {
                return i as f64;
            }
            let (a, b) = (g.at(i as usize, iy), g.at(j as usize, iy));
            if b <= half && a > half {
                return i as f64 + dir as f64 * (a - half) / (a - b);
            }
            i = j;
        }
    };
    (cross(ix as i64, 1) - cross(ix as i64, -1)) * g.dx
}

/// Noise-free point spread function of the exponential inversion: peak
/// location, peak amplitude against `b^2 / 4 pi`, and the 1/b width law.
fn psf_noise_free(cfg: &ExperimentConfig, outdir: &Path) -> Result<Report, String> {
    let mut report = Report::new("psf-noise-free", cfg);
    let domain = Domain::new(1.0);
    let (n_views, n_bins) = (360, 256);
    let b = 40.0;
    let grid = Grid2D::square(256, 1.0);
    let mut csv = String::from("mu_star,y0x,y0y,peak,peak_expected,loc_err,fwhm_b,fwhm_2b\n");
    for &mu_star in &[0.0, 0.3] {
        for &y0 in &[[0.0, 0.0], [0.4, 0.0]] {
            let src = PointSource { y0, intensity: 1.0 };
            let sino =
                point_source_sinogram(&src, mu_star, &domain, n_views, n_bins, 1.0).map_err(err_str)?;
            let img = exponential_fbp(&sino, mu_star, &domain, &grid, &FilterSpec::ramp(b), None)
                .map_err(err_str)?;
            let (ix, iy, peak) = argmax_grid(&img.grid);
            let [px, py] = img.grid.cell_center(ix, iy);
            let loc_err = ((px - y0[0]).powi(2) + (py - y0[1]).powi(2)).sqrt();
            let expected = b * b / (4.0 * PI);
            let tag = format!("mu* = {mu_star}, y0 = ({}, {})", y0[0], y0[1]);
            report.check_le(format!("peak location error [{tag}]"), loc_err / img.grid.dx, 1.0);
            report.check(format!("peak / (b^2 / 4 pi) [{tag}]"), peak / expected, 0.9, 1.1);
            let w1 = fwhm_along_row(&img.grid, ix, iy);
            let img2 = exponential_fbp(
                &sino,
                mu_star,
                &domain,
                &grid,
                &FilterSpec::ramp(2.0 * b),
                None,
            )
            .map_err(err_str)?;
            let (jx, jy, _) = argmax_grid(&img2.grid);
            let w2 = fwhm_along_row(&img2.grid, jx, jy);
            report.check(format!("FWHM ratio when b doubles [{tag}]"), w2 / w1, 0.425, 0.575);
            csv.push_str(&format!(
                "{mu_star},{},{},{peak:.6e},{expected:.6e},{loc_err:.3e},{w1:.5e},{w2:.5e}\n",
                y0[0], y0[1]
            ));
        }
    }
    write_text(&outdir.join("psf-noise-free.csv"), &csv)?;
    Ok(report)
}

/// Point-source distortion under colored noise: peak depression by the
/// averaged G-factor, agreement with the truncated analytic prediction,
/// the band-limited-delta bound, and the b^2 scaling of the leading
/// correction term.
fn psf_distortion(cfg: &ExperimentConfig, outdir: &Path) -> Result<Report, String> {
    let mut report = Report::new("psf-distortion", cfg);
    let domain = Domain::new(1.0);
    let y0 = [0.5, 0.0];
    let noise = ColoredNoise::new(0.5, 2.0).map_err(err_str)?;
    let mubar = 0.65;
    let mu_star = mubar - noise.h;
    let b = 40.0;
    let (n_views, n_bins) = (360, 256);
    let src = PointSource { y0, intensity: 1.0 };
    let filter = FilterSpec::ramp(b);
    let sino = averaged_point_source_sinogram(&src, &noise, mubar, &domain, n_views, n_bins, 1.0)
        .map_err(err_str)?;

    // (a) peak depression
    let peak = exponential_fbp_at_points(&sino, mu_star, &domain, &[y0], &filter, None)
        .map_err(err_str)?[0];
    let ideal = b * b / (4.0 * PI);
    let g0 = g_factor(&noise, &domain, y0, 0.0).map_err(err_str)?;
    let g_pi = g_factor(&noise, &domain, y0, PI).map_err(err_str)?;
    let coeff = 0.5 * (g0 + g_pi);
    report.check("measured peak ratio / predicted G average", (peak / ideal) / coeff, 0.9, 1.1);

    // (b) full truncated prediction against the reconstruction near the peak
    let profile = sample_g_factor(&noise, &domain, y0, 4096).map_err(err_str)?;
    let coeffs = fourier_coeffs(&profile, 32).map_err(err_str)?;
    let mut pts = Vec::new();
    let mut rel = Vec::new();
    for kt in 0..16 {
        let theta = kt as f64 * TAU / 16.0;
        for kr in 0..13 {
            let r = 0.004 + (3.8317 / b - 0.004) * kr as f64 / 12.0;
            pts.push([y0[0] + r * theta.cos(), y0[1] + r * theta.sin()]);
            rel.push((r, theta));
        }
    }
    let recon = exponential_fbp_at_points(&sino, mu_star, &domain, &pts, &filter, None)
        .map_err(err_str)?;
    let mut csv = String::from("r,theta,reconstruction,prediction\n");
    let mut worst = 0.0_f64;
    for ((&v, &(r, theta)), _) in recon.iter().zip(&rel).zip(&pts) {
        let pred = predicted_reconstruction(
            &coeffs,
            1.0,
            mu_star,
            b,
            [r * theta.cos(), r * theta.sin()],
            16,
        );
        worst = worst.max((v - pred).abs());
        csv.push_str(&format!("{r:.6},{theta:.6},{v:.8e},{pred:.8e}\n"));
    }
    write_text(&outdir.join("psf-distortion-profile.csv"), &csv)?;
    report.check_le("max |reconstruction - prediction| / peak (R <= 3.83/b)", worst / peak, 0.10);

    // (c) the band-limited-delta bound, up to the discretization floor
    // measured on a noise-free (G = 1) control run of the same pipeline
    let mut grid_pts = Vec::new();
    for i in 0..49 {
        for j in 0..49 {
            let x = -0.95 + 1.9 * i as f64 / 48.0;
            let y = -0.95 + 1.9 * j as f64 / 48.0;
            if x * x + y * y < 0.81 {
                grid_pts.push([x, y]);
            }
        }
    }
    let field = exponential_fbp_at_points(&sino, mu_star, &domain, &grid_pts, &filter, None)
        .map_err(err_str)?;
    let control_sino = point_source_sinogram(&src, mu_star, &domain, n_views, n_bins, 1.0)
        .map_err(err_str)?;
    let control = exponential_fbp_at_points(&control_sino, mu_star, &domain, &grid_pts, &filter, None)
        .map_err(err_str)?;
    let bound = |p: &[f64; 2]| {
        let r = ((p[0] - y0[0]).powi(2) + (p[1] - y0[1]).powi(2)).sqrt();
        delta_b(r, b).abs()
    };
    let viol = grid_pts
        .iter()
        .zip(&field)
        .map(|(p, &v)| v.abs() - bound(p))
        .fold(f64::NEG_INFINITY, f64::max);
    let floor = grid_pts
        .iter()
        .zip(&control)
        .map(|(p, &v)| v.abs() - bound(p))
        .fold(f64::NEG_INFINITY, f64::max);
    report.note(format!("discretization floor of the G = 1 control run: {floor:.4}"));
    report.check_le("bound excess relative to the control floor", viol, floor.max(0.0) + 0.01 * ideal);

    // (d) b^2 scaling of the leading correction term at R ~ pi/b
    let g2 = coeffs.get(2).re;
    let mut scaling = Vec::new();
    let mut csv = String::from("b,k_term,k_term_over_b2\n");
    for &bb in &[20.0, 40.0, 80.0] {
        let r = PI / bb;
        let val = (kn_closed_form(1, r, mu_star).k2 * 2.0 * g2).abs();
        scaling.push((bb, val));
        csv.push_str(&format!("{bb},{val:.8e},{:.8e}\n", val / (bb * bb)));
    }
    write_text(&outdir.join("psf-distortion-kterm.csv"), &csv)?;
    let slope = loglog_slope(&scaling);
    report.check("log-log slope of the first correction term vs b", slope, 1.8, 2.2);
    report.note(format!(
        "measured K-term constant {:.5} b^2 at R = pi/b (reference order of magnitude: 0.12 b^2, radius unspecified)",
        scaling[1].1 / (40.0 * 40.0)
    ));
    Ok(report)
}

fn disk_chord(cx: f64, cy: f64, r: f64, phi: f64, u: f64) -> f64 {
    let uc = -cx * phi.sin() + cy * phi.cos();
    let d = u - uc;
    let h2 = r * r - d * d;
    if h2 <= 0.0 {
        0.0
    } else {
        2.0 * h2.sqrt()
    }
}

/// Transmission correction round trip and the subsequent classical FBP of
/// the corrected data on a piecewise-constant attenuation phantom.
fn xray_roundtrip(cfg: &ExperimentConfig, outdir: &Path) -> Result<Report, String> {
    let mut report = Report::new("xray-roundtrip", cfg);
    let noise = ColoredNoise::new(0.1, 2.0).map_err(err_str)?;
    // disks: (cx, cy, radius, added attenuation)
    let disks = [
        (0.0, 0.0, 1.0, 0.4),
        (-0.3, 0.2, 0.25, 0.3),
        (0.35, -0.1, 0.2, 0.2),
    ];
    let (n_views, n_bins) = (180, 256);
    let mut mustar_sino = Sinogram::zeros(n_views, n_bins, 1.0, Modality::Xray);
    let mut worst_rel = 0.0_f64;
    for k in 0..n_views {
        let phi = mustar_sino.phis[k];
        for j in 0..n_bins {
            let u = mustar_sino.us[j];
            let mubar_int: f64 =
                disks.iter().map(|&(cx, cy, r, a)| a * disk_chord(cx, cy, r, phi, u)).sum();
            let l = disk_chord(0.0, 0.0, 1.0, phi, u);
            let g = averaged_xray_projection(1.0, mubar_int, &noise, l);
            let corrected = correct_xray_projection(g, 1.0, &noise, l).map_err(err_str)?;
            let expected = mubar_int - noise.h * l;
            worst_rel = worst_rel.max((corrected - expected).abs() / (1.0 + expected.abs()));
            *mustar_sino.at_mut(k, j) = corrected;
        }
    }
    report.check_le("round-trip relative error of int mu*", worst_rel, 1e-12);
    mustar_sino.write_csv(&outdir.join("corrected.csv")).map_err(err_str)?;

    let grid = Grid2D::square(128, 1.0);
    let filter = FilterSpec::nyquist(mustar_sino.du());
    let img = classical_fbp(&mustar_sino, &grid, &filter).map_err(err_str)?;
    img.grid.write_binary(&outdir.join("mustar-recon.bin")).map_err(err_str)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let [x, y] = grid.cell_center(ix, iy);
            if x * x + y * y >= 0.64 {
                continue;
            }
            let mut target: f64 = disks
                .iter()
                .filter(|&&(cx, cy, r, _)| (x - cx).powi(2) + (y - cy).powi(2) < r * r)
                .map(|&(_, _, _, a)| a)
                .sum();
            target -= noise.h;
            let diff = img.grid.at(ix, iy) - target;
            num += diff * diff;
            den += target * target;
        }
    }
    report.check_le("interior relative L2 error of reconstructed mu*", (num / den).sqrt(), 0.10);
    Ok(report)
}

/// First-order scatter term: linearity in the kernel amplitude, exact
/// reduction at zero amplitude, and rotational symmetry.
fn scatter_linearity(cfg: &ExperimentConfig, outdir: &Path) -> Result<Report, String> {
    let mut report = Report::new("scatter-linearity", cfg);
    let mut emission = Grid2D::square(128, 1.2);
    emission.fill_with(|x, y| (-(x * x + y * y) / 0.18).exp());
    let mut attenuation = Grid2D::square(128, 1.2);
    attenuation.fill_with(|x, y| if x * x + y * y < 1.0 { 0.3 } else { 0.0 });
    let phantom = Phantom { emission, attenuation_mean: attenuation, domain: Domain::new(1.0) };
    let mut density = Grid2D::square(128, 1.2);
    density.fill_with(|x, y| if x * x + y * y < 1.0 { 1.0 } else { 0.0 });
    let w0 = match cfg.scatter {
        Some(AngularKernel::Isotropic { w0 }) if w0 > 0.0 => w0,
        _ => 0.05,
    };
    let (step, n_angles) = (0.01, 32);
    let ray = Ray::new(0.0, 0.3);

    let direct = tomo_core::forward::spect_projection(&phantom, &ray, None, step).map_err(err_str)?;
    let term = |amp: f64| -> Result<f64, String> {
        let kernel = ScatterKernel {
            density: density.clone(),
            angular: AngularKernel::Isotropic { w0: amp },
        };
        Ok(scattered_projection(&phantom, &kernel, &ray, step, n_angles).map_err(err_str)? - direct)
    };
    let t_full = term(w0)?;
    let t_half = term(0.5 * w0)?;
    report.check(
        "two-point slope ratio under amplitude halving",
        (t_half / (0.5 * w0)) / (t_full / w0),
        0.99,
        1.01,
    );

    let zero_kernel = ScatterKernel {
        density: density.clone(),
        angular: AngularKernel::Isotropic { w0: 0.0 },
    };
    let with_zero =
        scattered_projection(&phantom, &zero_kernel, &ray, step, n_angles).map_err(err_str)?;
    let identical = if with_zero.to_bits() == direct.to_bits() { 1.0 } else { 0.0 };
    report.check("zero kernel reproduces the direct projection bit-identically", identical, 1.0, 1.0);

    let kernel =
        ScatterKernel { density, angular: AngularKernel::Isotropic { w0 } };
    let a = scattered_projection(&phantom, &kernel, &Ray::new(0.0, 0.3), step, n_angles)
        .map_err(err_str)?;
    let b = scattered_projection(&phantom, &kernel, &Ray::new(1.3, 0.3), step, n_angles)
        .map_err(err_str)?;
    report.check("rotational symmetry ratio", a / b, 0.99, 1.01);
    write_text(
        &outdir.join("scatter-linearity.csv"),
        &format!("w0,direct,scatter_term\n{w0},{direct:.12e},{t_full:.12e}\n"),
    )?;
    Ok(report)
}

/// Grid-refinement convergence of the averaged-transport residual.
fn transport_residual(cfg: &ExperimentConfig, outdir: &Path) -> Result<Report, String> {
    let mut report = Report::new("transport-residual", cfg);
    let noise = ColoredNoise::new(0.2, 1.0).map_err(err_str)?;
    let mut emission = Grid2D::square(1024, 1.3);
    emission.fill_with(|x, y| (-(x * x + y * y) / (2.0 * 0.3 * 0.3)).exp());
    let mut attenuation = Grid2D::square(1024, 1.3);
    attenuation.fill_with(|_, _| 0.5);
    let phantom = Phantom { emission, attenuation_mean: attenuation, domain: Domain::new(1.0) };

    let steps = [0.16, 0.08, 0.04, 0.02];
    let norms: Vec<f64> = steps
        .iter()
        .map(|&s| transport_residual_max_norm(&phantom, &noise, 0.0, s).map_err(err_str))
        .collect::<Result<Vec<f64>, String>>()?;
    let mut csv = String::from("step,residual_max_norm\n");
    for (s, n) in steps.iter().zip(&norms) {
        csv.push_str(&format!("{s},{n:.8e}\n"));
    }
    write_text(&outdir.join("transport-residual.csv"), &csv)?;
    for i in 0..3 {
        report.check(
            format!("residual ratio at step {} -> {}", steps[i], steps[i + 1]),
            norms[i] / norms[i + 1],
            1.8,
            2.2,
        );
    }
    report.note(
        "step range chosen above the model-error floor of the averaged \
         transport equation; see README"
            .to_string(),
    );
    Ok(report)
}

/// Writes an 8-bit min-max normalized PGM rendering of a grid.
pub fn write_pgm(grid: &Grid2D, path: &Path) -> Result<(), String> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &grid.values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(err_str)?);
    write!(f, "P5\n{} {}\n255\n", grid.nx, grid.ny).map_err(err_str)?;
    let mut buf = Vec::with_capacity(grid.nx * grid.ny);
    for iy in (0..grid.ny).rev() {
        for ix in 0..grid.nx {
            let v = (grid.at(ix, iy) - lo) / span;
            buf.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    f.write_all(&buf).map_err(err_str)
}
