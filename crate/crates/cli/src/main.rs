//! `tomo`: command line front end for the tomography library. Subcommands
//! cover forward projection, averaged projections, Monte Carlo validation,
//! transmission correction, filtered backprojection, the K_n tables, the
//! analytic point-source prediction, and the named validation experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tomo::config::{ExperimentConfig, PhantomCfg};
use tomo::experiments::{run_experiment, write_pgm, EXPERIMENT_NAMES};
use tomo_core::forward::{
    averaged_sinogram, mc_average_projection, project_sinogram, Phantom, PointSource,
};
use tomo_core::geometry::{Domain, Grid2D, Ray};
use tomo_core::noise::{validate_self_consistency, ColoredNoise};
use tomo_core::pointsrc::{
    delta_b, fourier_coeffs, kn_closed_form, kn_quadrature, predicted_reconstruction,
    sample_g_factor,
};
use tomo_core::recon::{exponential_fbp, FilterSpec};
use tomo_core::sinogram::{Modality, Sinogram};

#[derive(Parser)]
#[command(name = "tomo", version, about = "attenuated Radon transform toolbox")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment configuration JSON; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward-project the configured phantom into a sinogram CSV.
    Project {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        /// Project one stochastic realization instead of the mean phantom.
        #[arg(long)]
        stochastic: bool,
        /// Also write an 8-bit PGM quick look next to the CSV.
        #[arg(long)]
        pgm: bool,
    },
    /// Closed-form noise-averaged sinogram of the configured phantom.
    Average {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "spect")]
        modality: ModalityArg,
        #[arg(long)]
        pgm: bool,
    },
    /// Monte Carlo check of the closed-form average on a single ray.
    McValidate {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        #[arg(long, default_value_t = 0.0)]
        u: f64,
    },
    /// Invert averaged transmission data to line integrals of mu*.
    Correct {
        #[command(flatten)]
        config: ConfigArg,
        /// Averaged transmission sinogram CSV.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        i0: f64,
    },
    /// Exponential filtered backprojection of a sinogram CSV.
    Reconstruct {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        input: PathBuf,
        /// Output grid binary (f32 little endian, JSON sidecar).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        mu_star: f64,
        #[arg(long, default_value_t = 128)]
        grid: usize,
        #[arg(long)]
        pgm: bool,
    },
    /// Tabulate the distortion integrals K_n against their closed forms.
    KnTable {
        #[arg(long, default_value_t = 3)]
        m_max: u32,
        #[arg(long, default_value_t = 0.15)]
        mu: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, default_value_t = 200.0)]
        b: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic prediction of the reconstructed point source under noise.
    PredictPoint {
        #[command(flatten)]
        config: ConfigArg,
        /// Sample offsets from the source, comma separated.
        #[arg(long, default_value = "0.0,0.02,0.05,0.1", value_delimiter = ',')]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        #[arg(long, default_value_t = 16)]
        m_max: u32,
    },
    /// Run a named validation experiment; exits 0 only if it passes.
    Run {
        /// Experiment name, or "all".
        #[arg(long)]
        experiment: String,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModalityArg {
    Spect,
    Pet,
    Xray,
}

impl From<ModalityArg> for Modality {
    fn from(m: ModalityArg) -> Modality {
        match m {
            ModalityArg::Spect => Modality::Spect,
            ModalityArg::Pet => Modality::Pet,
            ModalityArg::Xray => Modality::Xray,
        }
    }
}

fn init_threads() {
    if let Ok(v) = std::env::var("TOMO_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                // Ignore the error if a global pool already exists.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn load_config(arg: &ConfigArg) -> Result<ExperimentConfig, String> {
    match &arg.config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn noise_of(cfg: &ExperimentConfig) -> Result<ColoredNoise, String> {
    ColoredNoise::new(cfg.noise.h, cfg.noise.alpha).map_err(|e| e.to_string())
}

/// Builds the gridded phantom described by the config. A point phantom is
/// rasterized onto a fine grid only where a gridded phantom is required.
fn phantom_of(cfg: &ExperimentConfig) -> Result<Phantom, String> {
    let domain = Domain::new(cfg.domain.radius);
    match &cfg.phantom {
        Some(PhantomCfg::Grids { emission, attenuation }) => {
            let emission = Grid2D::read_binary(emission).map_err(|e| e.to_string())?;
            let attenuation_mean = Grid2D::read_binary(attenuation).map_err(|e| e.to_string())?;
            Ok(Phantom { emission, attenuation_mean, domain })
        }
        Some(PhantomCfg::Point { y0, intensity, mubar }) => {
            let n = 512;
            let mut emission = Grid2D::square(n, cfg.domain.radius);
            // narrow Gaussian of total mass `intensity`, wide enough that
            // ray sampling cannot step over it
            let sigma = 2.0 * emission.dx;
            let (cx, cy, a) = (y0[0], y0[1], intensity / (std::f64::consts::TAU * sigma * sigma));
            emission.fill_with(|x, y| {
                a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * sigma * sigma)).exp()
            });
            let mut attenuation_mean = Grid2D::square(n, cfg.domain.radius);
            let r2 = cfg.domain.radius * cfg.domain.radius;
            let mb = *mubar;
            attenuation_mean.fill_with(|x, y| if x * x + y * y < r2 { mb } else { 0.0 });
            Ok(Phantom { emission, attenuation_mean, domain })
        }
        None => Err("this command needs a 'phantom' section in the config".into()),
    }
}

fn sino_to_grid(s: &Sinogram) -> Grid2D {
    let mut g = Grid2D::zeros(s.n_bins(), s.n_views(), s.du(), s.phis[1] - s.phis[0], [0.0, 0.0]);
    for k in 0..s.n_views() {
        for j in 0..s.n_bins() {
            g.set(j, k, s.at(k, j));
        }
    }
    g
}

fn pgm_path(out: &std::path::Path) -> PathBuf {
    out.with_extension("pgm")
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Project { config, out, stochastic, pgm } => {
            let cfg = load_config(&config)?;
            let phantom = phantom_of(&cfg)?;
            let noise = noise_of(&cfg)?;
            let step = phantom.emission.default_step();
            let stoch = if stochastic { Some((&noise, cfg.mc.seed)) } else { None };
            let sino = project_sinogram(
                &phantom,
                Modality::Spect,
                1.0,
                cfg.acquisition.n_views,
                cfg.acquisition.n_bins,
                cfg.acquisition.u_max,
                step,
                stoch,
            )
            .map_err(|e| e.to_string())?;
            sino.write_csv(&out).map_err(|e| e.to_string())?;
            if pgm {
                write_pgm(&sino_to_grid(&sino), &pgm_path(&out))?;
            }
            println!("wrote {} ({} views x {} bins)", out.display(), sino.n_views(), sino.n_bins());
            Ok(true)
        }
        Command::Average { config, out, modality, pgm } => {
            let cfg = load_config(&config)?;
            let noise = noise_of(&cfg)?;
            let sino = match (&cfg.phantom, modality) {
                // emission of a point source has an exact closed form; the
                // transmission modalities go through the rasterized phantom
                (Some(PhantomCfg::Point { y0, intensity, mubar }), ModalityArg::Spect) => {
                    let src = PointSource { y0: *y0, intensity: *intensity };
                    averaged_point_source(
                        &src,
                        &noise,
                        *mubar,
                        &Domain::new(cfg.domain.radius),
                        &cfg,
                    )?
                }
                _ => {
                    let phantom = phantom_of(&cfg)?;
                    let step = phantom.emission.default_step();
                    averaged_sinogram(
                        &phantom,
                        &noise,
                        modality.into(),
                        1.0,
                        cfg.acquisition.n_views,
                        cfg.acquisition.n_bins,
                        cfg.acquisition.u_max,
                        step,
                    )
                    .map_err(|e| e.to_string())?
                }
            };
            sino.write_csv(&out).map_err(|e| e.to_string())?;
            if pgm {
                write_pgm(&sino_to_grid(&sino), &pgm_path(&out))?;
            }
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::McValidate { config, phi, u } => {
            let cfg = load_config(&config)?;
            let noise = noise_of(&cfg)?;
            let phantom = phantom_of(&cfg)?;
            let ray = Ray::new(phi, u);
            let step = phantom.emission.default_step();
            let closed = tomo_core::forward::averaged_spect_projection(&phantom, &noise, &ray, step)
                .map_err(|e| e.to_string())?;
            let report = validate_self_consistency(
                &noise,
                &[closed.max(0.0)],
                std::f64::consts::PI / cfg.filter.b,
            );
            if report.correlation_radius_too_coarse {
                println!("warning: correlation radius 1/alpha is coarser than the resolution");
            }
            if report.weak_noise_violated {
                println!(
                    "warning: h/alpha exceeds the weak-noise threshold {}",
                    report.weak_noise_threshold
                );
            }
            let est = mc_average_projection(
                &phantom,
                &noise,
                &ray,
                Modality::Spect,
                cfg.mc.samples,
                step,
                cfg.mc.seed,
            )
            .map_err(|e| e.to_string())?;
            let z = if est.stderr > 0.0 {
                (est.mean - closed).abs() / est.stderr
            } else if est.mean == closed {
                0.0
            } else {
                f64::INFINITY
            };
            println!(
                "ray(phi = {phi}, u = {u}): mc mean {:.6e} +- {:.2e}, closed form {closed:.6e}, z = {z:.2}",
                est.mean, est.stderr
            );
            println!("samples {}, seed {}", est.n_samples, cfg.mc.seed);
            Ok(z <= 4.0)
        }
        Command::Correct { config, input, out, i0 } => {
            let cfg = load_config(&config)?;
            let noise = noise_of(&cfg)?;
            let domain = Domain::new(cfg.domain.radius);
            let sino = Sinogram::read_csv(&input, Modality::Xray).map_err(|e| e.to_string())?;
            let mut corrected = sino.clone();
            for k in 0..sino.n_views() {
                let phi = sino.phis[k];
                for j in 0..sino.n_bins() {
                    let ray = Ray::new(phi, sino.us[j]);
                    let l = tomo_core::geometry::chord_length(&domain, &ray);
                    *corrected.at_mut(k, j) = if l > 0.0 {
                        tomo_core::forward::correct_xray_projection(sino.at(k, j), i0, &noise, l)
                            .map_err(|e| e.to_string())?
                    } else {
                        0.0
                    };
                }
            }
            corrected.write_csv(&out).map_err(|e| e.to_string())?;
            println!("wrote {}", out.display());
            Ok(true)
        }
        Command::Reconstruct { config, input, out, mu_star, grid, pgm } => {
            let cfg = load_config(&config)?;
            let domain = Domain::new(cfg.domain.radius);
            let sino = Sinogram::read_csv(&input, Modality::Spect).map_err(|e| e.to_string())?;
            let template = Grid2D::square(grid, cfg.domain.radius);
            let filter = FilterSpec::ramp(cfg.filter.b);
            let img = exponential_fbp(&sino, mu_star, &domain, &template, &filter, None)
                .map_err(|e| e.to_string())?;
            img.grid.write_binary(&out).map_err(|e| e.to_string())?;
            if pgm {
                write_pgm(&img.grid, &pgm_path(&out))?;
            }
            println!("wrote {} ({grid} x {grid}, b = {})", out.display(), cfg.filter.b);
            Ok(true)
        }
        Command::KnTable { m_max, mu, r, b, out } => {
            let mut text = String::from("n,R,mu,b,quadrature,closed_form,residual\n");
            for m in 1..=m_max {
                let q1 = kn_quadrature(2 * m - 1, r, mu, b).map_err(|e| e.to_string())?;
                let q2 = kn_quadrature(2 * m, r, mu, b).map_err(|e| e.to_string())?;
                let cf = kn_closed_form(m, r, mu);
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let c2 = sign * 4.0 * std::f64::consts::PI * delta_b(r, b) + cf.k2;
                text.push_str(&format!(
                    "{},{r},{mu},{b},{q1:.12e},{:.12e},{:.12e}\n",
                    2 * m - 1,
                    cf.k1,
                    q1 - cf.k1
                ));
                text.push_str(&format!(
                    "{},{r},{mu},{b},{q2:.12e},{c2:.12e},{:.12e}\n",
                    2 * m,
                    q2 - c2
                ));
            }
            match out {
                Some(p) => {
                    std::fs::write(&p, &text).map_err(|e| e.to_string())?;
                    println!("wrote {}", p.display());
                }
                None => print!("{text}"),
            }
            Ok(true)
        }
        Command::PredictPoint { config, radii, theta, m_max } => {
            let cfg = load_config(&config)?;
            let Some(PhantomCfg::Point { y0, intensity, mubar }) = cfg.phantom.clone() else {
                return Err("predict-point needs a point phantom in the config".into());
            };
            let noise = noise_of(&cfg)?;
            let domain = Domain::new(cfg.domain.radius);
            let mu_star = mubar - noise.h;
            let profile = sample_g_factor(&noise, &domain, y0, 4096).map_err(|e| e.to_string())?;
            let coeffs = fourier_coeffs(&profile, 32).map_err(|e| e.to_string())?;
            println!("r,theta,prediction");
            for r in radii {
                let x_rel = [r * theta.cos(), r * theta.sin()];
                let v = predicted_reconstruction(
                    &coeffs,
                    intensity,
                    mu_star.max(0.0),
                    cfg.filter.b,
                    x_rel,
                    m_max as usize,
                );
                println!("{r},{theta},{v:.8e}");
            }
            Ok(true)
        }
        Command::Run { experiment, config, out } => {
            let cfg = load_config(&config)?;
            let names: Vec<&str> = if experiment == "all" {
                EXPERIMENT_NAMES.to_vec()
            } else {
                vec![experiment.as_str()]
            };
            let mut all_pass = true;
            for name in names {
                let report = run_experiment(name, &cfg, &out)?;
                for c in &report.checks {
                    println!(
                        "  [{}] {}: {:.6} in [{:.4}, {:.4}]",
                        if c.pass { "ok" } else { "FAIL" },
                        c.name,
                        c.measured,
                        c.lo,
                        c.hi
                    );
                }
                for n in &report.notes {
                    println!("  note: {n}");
                }
                println!(
                    "{name}: {} (config {}, seed {})",
                    if report.passed { "PASS" } else { "FAIL" },
                    &report.config_sha256[..12],
                    report.seed
                );
                all_pass &= report.passed;
            }
            Ok(all_pass)
        }
    }
}

fn averaged_point_source(
    src: &PointSource,
    noise: &ColoredNoise,
    mubar: f64,
    domain: &Domain,
    cfg: &ExperimentConfig,
) -> Result<Sinogram, String> {
    tomo_core::forward::averaged_point_source_sinogram(
        src,
        noise,
        mubar,
        domain,
        cfg.acquisition.n_views,
        cfg.acquisition.n_bins,
        cfg.acquisition.u_max,
    )
    .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
