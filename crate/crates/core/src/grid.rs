//! Sampling grids and single time-concentration curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform acquisition time grid: samples at `t_start + k * dt`, `k` in `0..n_samples`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n_samples: usize) -> Result<Self> {
        let grid = TimeGrid {
            t_start,
            dt,
            n_samples,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Default CTP acquisition: 2 s sampling over one minute.
    pub fn default_acquisition() -> Self {
        TimeGrid {
            t_start: 0.0,
            dt: 2.0,
            n_samples: 30,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t_start.is_finite() {
            return Err(Error::InvalidGrid("t_start must be finite".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "dt must be > 0, got {}",
                self.dt
            )));
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidGrid(format!(
                "n_samples must be >= 2, got {}",
                self.n_samples
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_samples).map(|k| self.time(k))
    }

    /// Length of the sampled window, `n_samples * dt`.
    pub fn duration(&self) -> f64 {
        self.n_samples as f64 * self.dt
    }

    /// Same start and spacing, `factor` times as many samples.
    pub fn extended(&self, factor: usize) -> Self {
        TimeGrid {
            n_samples: self.n_samples * factor,
            ..*self
        }
    }

    pub(crate) fn ensure_matches(&self, other: &TimeGrid, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "{what}: {:?} vs {:?}",
                self, other
            )));
        }
        Ok(())
    }
}

/// A single sampled curve: AIF, VOF, tissue TCC or impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    samples: Vec<f64>,
    grid: TimeGrid,
}

impl Curve {
    pub fn new(samples: Vec<f64>, grid: TimeGrid) -> Result<Self> {
        grid.validate()?;
        if samples.len() != grid.n_samples {
            return Err(Error::GridMismatch(format!(
                "curve has {} samples but grid declares {}",
                samples.len(),
                grid.n_samples
            )));
        }
        if let Some(k) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(
                "samples",
                format!("non-finite sample at index {k}"),
            ));
        }
        Ok(Curve { samples, grid })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Curve {
            samples: vec![0.0; grid.n_samples],
            grid,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Rectangle-rule integral `dt * sum(samples)`; unchanged by zero padding.
    pub fn integral(&self) -> f64 {
        self.grid.dt * self.samples.iter().sum::<f64>()
    }

    /// Trapezoid-rule integral over the sampled window.
    pub fn trapezoid_integral(&self) -> f64 {
        trapezoid(&self.samples, self.grid.dt)
    }

    pub fn peak(&self) -> (usize, f64) {
        argmax_earliest(&self.samples)
    }

    pub fn scaled(&self, k: f64) -> Curve {
        Curve {
            samples: self.samples.iter().map(|v| v * k).collect(),
            grid: self.grid,
        }
    }

    /// First `n` samples on the correspondingly shortened grid.
    pub fn truncated(&self, n: usize) -> Result<Curve> {
        if n < 2 || n > self.samples.len() {
            return Err(Error::param(
                "n",
                format!("cannot truncate {} samples to {n}", self.samples.len()),
            ));
        }
        Curve::new(
            self.samples[..n].to_vec(),
            TimeGrid {
                n_samples: n,
                ..self.grid
            },
        )
    }
}

pub(crate) fn trapezoid(samples: &[f64], dt: f64) -> f64 {
    match samples.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = samples[1..n - 1].iter().sum();
            dt * (inner + 0.5 * (samples[0] + samples[n - 1]))
        }
    }
}

/// Index and value of the maximum; the earliest index wins ties.
///
/// Values within a relative `1e-12` of the maximum count as ties so that
/// floating-point noise on flat plateaus does not move the result.
pub(crate) fn argmax_earliest(samples: &[f64]) -> (usize, f64) {
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return (0, max);
    }
    let tol = 1e-12 * max.abs();
    let idx = samples.iter().position(|&v| v >= max - tol).unwrap_or(0);
    (idx, max)
}
