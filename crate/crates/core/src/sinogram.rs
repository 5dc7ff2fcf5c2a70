//! Projection data `g(phi, u)` on an angle x offset lattice, with CSV I/O.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Spect,
    Pet,
    Xray,
}

/// Parallel-beam sinogram. `values` is row-major over views, i.e.
/// `values[k * us.len() + j]` is view `k`, offset bin `j`.
#[derive(Clone, Debug)]
pub struct Sinogram {
    pub phis: Vec<f64>,
    pub us: Vec<f64>,
    pub values: Vec<f64>,
    pub modality: Modality,
}

impl Sinogram {
    /// Zero sinogram over `n_views` uniform angles on `[0, 2pi)` and
    /// `n_bins` offset bins centered on `[-u_max, u_max]`.
    pub fn zeros(n_views: usize, n_bins: usize, u_max: f64, modality: Modality) -> Self {
        assert!(n_views >= 1 && n_bins >= 1);
        assert!(u_max > 0.0);
        let phis = uniform_angles(n_views);
        let du = 2.0 * u_max / n_bins as f64;
        let us = (0..n_bins).map(|j| -u_max + (j as f64 + 0.5) * du).collect();
        Sinogram { phis, us, values: vec![0.0; n_views * n_bins], modality }
    }

    pub fn n_views(&self) -> usize {
        self.phis.len()
    }

    pub fn n_bins(&self) -> usize {
        self.us.len()
    }

    /// Offset bin spacing.
    pub fn du(&self) -> f64 {
        if self.us.len() >= 2 {
            self.us[1] - self.us[0]
        } else {
            1.0
        }
    }

    pub fn at(&self, view: usize, bin: usize) -> f64 {
        self.values[view * self.us.len() + bin]
    }

    pub fn at_mut(&mut self, view: usize, bin: usize) -> &mut f64 {
        &mut self.values[view * self.us.len() + bin]
    }

    pub fn view(&self, k: usize) -> &[f64] {
        let n = self.us.len();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn view_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.us.len();
        &mut self.values[k * n..(k + 1) * n]
    }

    /// Nearest offset bin for a continuous offset `u`, clamped to range.
    pub fn nearest_bin(&self, u: f64) -> usize {
        let du = self.du();
        let j = ((u - self.us[0]) / du).round();
        (j.max(0.0) as usize).min(self.us.len() - 1)
    }

    /// Writes `phi,u,value` rows in full double precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "phi,u,value")?;
        for (k, &phi) in self.phis.iter().enumerate() {
            for (j, &u) in self.us.iter().enumerate() {
                writeln!(w, "{:.17e},{:.17e},{:.17e}", phi, u, self.at(k, j))?;
            }
        }
        Ok(())
    }

    /// Reads a `phi,u,value` CSV written by `write_csv` (or compatible:
    /// views grouped together, bins uniform and identical per view).
    pub fn read_csv(path: &Path, modality: Modality) -> Result<Sinogram> {
        let r = BufReader::new(std::fs::File::open(path)?);
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "phi,u,value" => {}
            Some(Err(e)) => return Err(e.into()),
            _ => return Err(Error::Format("expected header 'phi,u,value'".into())),
        }
        let mut phis: Vec<f64> = Vec::new();
        let mut us: Vec<f64> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut first_view_done = false;
        for (ln, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let mut field = |name: &str| -> Result<f64> {
                it.next()
                    .ok_or_else(|| Error::Format(format!("row {}: missing {name}", ln + 2)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("row {}: bad {name}: {e}", ln + 2)))
            };
            let phi = field("phi")?;
            let u = field("u")?;
            let v = field("value")?;
            if phis.last().map_or(true, |&p| p != phi) {
                phis.push(phi);
                if !us.is_empty() {
                    first_view_done = true;
                }
            }
            if !first_view_done {
                us.push(u);
            }
            values.push(v);
        }
        if phis.is_empty() || us.is_empty() {
            return Err(Error::Format("empty sinogram".into()));
        }
        if values.len() != phis.len() * us.len() {
            return Err(Error::Format(format!(
                "{} rows do not factor as {} views x {} bins",
                values.len(),
                phis.len(),
                us.len()
            )));
        }
        Ok(Sinogram { phis, us, values, modality })
    }
}

/// `n` uniform view angles on `[0, 2pi)`.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| k as f64 * std::f64::consts::TAU / n as f64).collect()
}
