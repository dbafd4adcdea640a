//! Trust densities: Gaussian kernel density estimates of question-answer trust
//! within one answer scenario, corrected for the `[0, 1]` support by
//! reflection.
//!
//! Each sample `q` contributes three kernels: itself, its mirror image about 0
//! (`-q`) and its mirror image about 1 (`2 - q`). Only one image per boundary
//! is used.
//!
//! The bandwidth is `gamma / sqrt(N)` with `N` the number of samples in the
//! scenario.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Grid size used when none is requested.
pub const DEFAULT_GRID_POINTS: usize = 512;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("cannot estimate a density from zero samples")]
    NoSamples,
    #[error("grid needs at least 2 points, got {0}")]
    GridTooSmall(usize),
    #[error("kernel constant gamma must be a finite value > 0, got {0}")]
    InvalidGamma(f64),
    #[error("sample {index} is {value}, outside [0, 1]")]
    SampleOutOfRange { index: usize, value: f64 },
}

/// A trust density sampled on a uniform grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustDensity {
    /// Model the samples came from, when known. Used for plot legends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    pub scenario_label: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub sample_count: usize,
}

impl TrustDensity {
    pub fn with_model_name(mut self, name: impl Into<String>) -> Self {
        self.model_name = Some(name.into());
        self
    }

    /// Legend text: `model / scenario`, or just the scenario.
    pub fn label(&self) -> String {
        match &self.model_name {
            Some(m) => format!("{m} / {}", self.scenario_label),
            None => self.scenario_label.clone(),
        }
    }

    /// Writes the `t,f` table.
    pub fn write_csv<W: Write>(&self, mut sink: W) -> std::io::Result<()> {
        writeln!(sink, "t,f")?;
        for (t, f) in self.grid.iter().zip(&self.values) {
            writeln!(sink, "{t},{f}")?;
        }
        sink.flush()
    }
}

/// Kernel bandwidth for `n` samples.
pub fn bandwidth(n: usize, gamma: f64) -> Result<f64, DensityError> {
    if n == 0 {
        return Err(DensityError::NoSamples);
    }
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(DensityError::InvalidGamma(gamma));
    }
    Ok(gamma / (n as f64).sqrt())
}

#[inline]
fn gaussian(u: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * u * u).exp()
}

/// Reflected KDE evaluated at a single point `t`.
pub fn density_at(samples: &[f64], h: f64, t: f64) -> f64 {
    let sum: f64 = samples
        .iter()
        .map(|&q| gaussian((t - q) / h) + gaussian((t + q) / h) + gaussian((t - (2.0 - q)) / h))
        .sum();
    sum / (samples.len() as f64 * h)
}

/// Uniform grid of `points` abscissae from 0 to 1 inclusive.
pub fn unit_grid(points: usize) -> Vec<f64> {
    let last = (points - 1) as f64;
    (0..points)
        .map(|i| {
            if i + 1 == points {
                1.0
            } else {
                i as f64 / last
            }
        })
        .collect()
}

/// Estimates the trust density of one scenario from its trust samples.
pub fn estimate_density(
    scenario_label: impl Into<String>,
    samples: &[f64],
    gamma: f64,
    grid_points: usize,
) -> Result<TrustDensity, DensityError> {
    if grid_points < 2 {
        return Err(DensityError::GridTooSmall(grid_points));
    }
    let h = bandwidth(samples.len(), gamma)?;
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(DensityError::SampleOutOfRange { index, value });
    }
    let grid = unit_grid(grid_points);
    // per-point sums run sequentially over samples, so the result does not
    // depend on how rayon splits the grid
    let values = grid
        .par_iter()
        .map(|&t| density_at(samples, h, t))
        .collect();
    Ok(TrustDensity {
        model_name: None,
        scenario_label: scenario_label.into(),
        grid,
        values,
        bandwidth: h,
        sample_count: samples.len(),
    })
}

/// Trapezoidal integral of the density over its grid.
pub fn integrate_density(d: &TrustDensity) -> f64 {
    d.grid
        .windows(2)
        .zip(d.values.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .sum()
}
