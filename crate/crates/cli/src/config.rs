//! Experiment configuration: a single JSON file describing the domain,
//! phantom, noise model, acquisition lattice, filter and Monte Carlo
//! settings. Validation reports every offending field by its JSON path.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tomo_core::scatter::AngularKernel;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DomainCfg {
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseCfg {
    pub h: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhantomCfg {
    /// Point source with a constant mean attenuation inside the domain.
    Point { y0: [f64; 2], intensity: f64, mubar: f64 },
    /// Gridded emission and mean attenuation, as f32 binaries with JSON
    /// sidecars.
    Grids { emission: PathBuf, attenuation: PathBuf },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AcquisitionCfg {
    pub n_views: usize,
    pub n_bins: usize,
    pub u_max: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FilterCfg {
    pub b: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McCfg {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub domain: DomainCfg,
    pub noise: NoiseCfg,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomCfg>,
    pub acquisition: AcquisitionCfg,
    pub filter: FilterCfg,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scatter: Option<AngularKernel>,
    pub mc: McCfg,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainCfg { radius: 1.0 },
            noise: NoiseCfg { h: 0.2, alpha: 1.0 },
            phantom: None,
            acquisition: AcquisitionCfg { n_views: 360, n_bins: 256, u_max: 1.0 },
            filter: FilterCfg { b: 40.0 },
            scatter: None,
            mc: McCfg { samples: 100_000, seed: 7 },
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| format!("malformed config: {e}"))?;
        cfg.validate().map_err(|errs| format!("invalid config: {}", errs.join("; ")))?;
        Ok(cfg)
    }

    /// Field-level validation; each message names the offending JSON path.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if !(self.domain.radius > 0.0 && self.domain.radius.is_finite()) {
            errs.push(format!("domain.radius: must be > 0, got {}", self.domain.radius));
        }
        if !(self.noise.h >= 0.0 && self.noise.h.is_finite()) {
            errs.push(format!("noise.h: must be >= 0, got {}", self.noise.h));
        }
        if !(self.noise.alpha > 0.0 && self.noise.alpha.is_finite()) {
            errs.push(format!("noise.alpha: must be > 0, got {}", self.noise.alpha));
        }
        if self.acquisition.n_views < 4 {
            errs.push(format!(
                "acquisition.n_views: must be >= 4, got {}",
                self.acquisition.n_views
            ));
        }
        if self.acquisition.n_bins < 2 {
            errs.push(format!(
                "acquisition.n_bins: must be >= 2, got {}",
                self.acquisition.n_bins
            ));
        }
        if !(self.acquisition.u_max > 0.0) {
            errs.push(format!(
                "acquisition.u_max: must be > 0, got {}",
                self.acquisition.u_max
            ));
        }
        if !(self.filter.b > 0.0) {
            errs.push(format!("filter.b: must be > 0, got {}", self.filter.b));
        }
        if self.mc.samples < 2 {
            errs.push(format!("mc.samples: must be >= 2, got {}", self.mc.samples));
        }
        match &self.phantom {
            Some(PhantomCfg::Point { y0, intensity, mubar }) => {
                if y0[0] * y0[0] + y0[1] * y0[1] >= self.domain.radius * self.domain.radius {
                    errs.push(format!(
                        "phantom.y0: must lie inside the domain of radius {}",
                        self.domain.radius
                    ));
                }
                if !(*intensity > 0.0) {
                    errs.push(format!("phantom.intensity: must be > 0, got {intensity}"));
                }
                if !(*mubar >= 0.0) {
                    errs.push(format!("phantom.mubar: must be >= 0, got {mubar}"));
                }
            }
            Some(PhantomCfg::Grids { .. }) | None => {}
        }
        match &self.scatter {
            Some(AngularKernel::Isotropic { w0 }) => {
                if !(*w0 >= 0.0) {
                    errs.push(format!("scatter.w0: must be >= 0, got {w0}"));
                }
            }
            Some(AngularKernel::Poly { coeffs }) => {
                if coeffs.is_empty() {
                    errs.push("scatter.coeffs: must not be empty".into());
                }
            }
            None => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    /// Hash of the canonical JSON form, embedded in every report so a rerun
    /// can prove it used identical inputs.
    pub fn sha256(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn negative_h_names_the_field() {
        let mut cfg = ExperimentConfig::default();
        cfg.noise.h = -0.1;
        let errs = cfg.validate().unwrap_err();
        assert!(errs.iter().any(|e| e.starts_with("noise.h")), "{errs:?}");
    }

    #[test]
    fn source_outside_domain_is_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.phantom = Some(PhantomCfg::Point { y0: [1.5, 0.0], intensity: 1.0, mubar: 0.5 });
        let errs = cfg.validate().unwrap_err();
        assert!(errs.iter().any(|e| e.starts_with("phantom.y0")), "{errs:?}");
    }

    #[test]
    fn hash_is_stable_and_input_sensitive() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.sha256(), cfg.sha256());
        let mut other = ExperimentConfig::default();
        other.mc.seed = 8;
        assert_ne!(cfg.sha256(), other.sha256());
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.phantom = Some(PhantomCfg::Point { y0: [0.5, 0.0], intensity: 1.0, mubar: 0.65 });
        cfg.scatter = Some(AngularKernel::Isotropic { w0: 0.05 });
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert!(back.validate().is_ok());
        assert_eq!(back.sha256(), cfg.sha256());
    }
}
