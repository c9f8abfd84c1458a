//! Truncated-SVD deconvolution of tissue curves by the arterial input function.
//!
//! Both variants solve `TCC = dt * (AIF ⊛ irf)` per voxel under the usual
//! indicator-dilution assumptions: intravascular tracer, a stationary and
//! linear system, and an AIF free of partial-volume effects.
//!
//! * [`Method::Ssvd`] builds the lower-triangular Toeplitz matrix of the AIF
//!   and applies its truncated pseudo-inverse. The result is sensitive to
//!   bolus delay between the AIF and the tissue.
//! * [`Method::Csvd`] zero-pads to twice the acquisition length and embeds
//!   the AIF in a circulant matrix. The DFT diagonalises it, so the singular
//!   values are the magnitudes of the AIF spectrum and truncation is a
//!   per-frequency mask. A delay shifts the irf circularly without changing it.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Curve, TimeGrid};
use crate::phantom::CtpSeries;
use crate::volume::{Dims, Mask, VoxelSize};

/// Zero-padding factor of the circulant embedding.
pub const CIRCULANT_PAD: usize = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Lower-triangular Toeplitz operator; sensitive to bolus delay.
    Ssvd,
    /// Zero-padded circulant operator; delay insensitive.
    #[default]
    Csvd,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ssvd => "ssvd",
            Method::Csvd => "csvd",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ssvd" => Ok(Method::Ssvd),
            "csvd" => Ok(Method::Csvd),
            other => Err(Error::param(
                "method",
                format!("unknown method `{other}` (expected ssvd or csvd)"),
            )),
        }
    }
}

/// Per-voxel impulse-response functions.
#[derive(Debug, Clone, PartialEq)]
pub struct IrfMap {
    dims: Dims,
    grid: TimeGrid,
    voxel_size: VoxelSize,
    method: Method,
    lambda_rel: f64,
    /// Voxel-major, `grid.n_samples` per voxel.
    data: Vec<f64>,
}

impl IrfMap {
    pub fn from_voxel_major(
        dims: Dims,
        grid: TimeGrid,
        voxel_size: VoxelSize,
        method: Method,
        lambda_rel: f64,
        data: Vec<f64>,
    ) -> Result<Self> {
        grid.validate()?;
        check_lambda(lambda_rel)?;
        if data.len() != dims.len() * grid.n_samples {
            return Err(Error::ShapeMismatch(format!(
                "{} irf samples for {dims:?} x {}",
                data.len(),
                grid.n_samples
            )));
        }
        Ok(IrfMap {
            dims,
            grid,
            voxel_size,
            method,
            lambda_rel,
            data,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Irf grid; for cSVD this is the zero-padded grid.
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn voxel_size(&self) -> VoxelSize {
        self.voxel_size
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn lambda_rel(&self) -> f64 {
        self.lambda_rel
    }

    pub fn irf(&self, voxel: usize) -> &[f64] {
        let n = self.grid.n_samples;
        &self.data[voxel * n..(voxel + 1) * n]
    }

    pub fn irfs(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.grid.n_samples)
    }

    pub fn as_voxel_major(&self) -> &[f64] {
        &self.data
    }

    /// Rectangle-rule area of one voxel's irf.
    pub fn integral(&self, voxel: usize) -> f64 {
        self.grid.dt * self.irf(voxel).iter().sum::<f64>()
    }
}

fn check_lambda(lambda_rel: f64) -> Result<()> {
    if !(lambda_rel.is_finite() && (0.0..1.0).contains(&lambda_rel)) {
        return Err(Error::param(
            "lambda_rel",
            format!("must lie in [0, 1), got {lambda_rel}"),
        ));
    }
    Ok(())
}

fn check_aif(aif: &Curve) -> Result<()> {
    let (_, peak) = aif.peak();
    if !(peak > 0.0) {
        return Err(Error::UnusableAif("AIF has no positive peak".into()));
    }
    let min = aif.samples().iter().copied().fold(f64::INFINITY, f64::min);
    if min == peak {
        return Err(Error::UnusableAif("AIF is flat".into()));
    }
    Ok(())
}

/// A deconvolution operator built once from the AIF and applied per voxel.
pub enum Deconvolver {
    Toeplitz {
        n: usize,
        /// Row-major truncated pseudo-inverse, `n x n`.
        pinv: Vec<f64>,
        singular_values: Vec<f64>,
    },
    Circulant {
        n: usize,
        len: usize,
        forward: Arc<dyn Fft<f64>>,
        inverse: Arc<dyn Fft<f64>>,
        /// `1 / (dt * AIF_hat)` on retained frequencies, 0 elsewhere.
        filter: Vec<Complex64>,
        singular_values: Vec<f64>,
    },
}

/// Singular values below this are numerically zero even at `lambda_rel = 0`.
fn rank_tolerance(s_max: f64, n: usize) -> f64 {
    s_max * n as f64 * f64::EPSILON
}

impl Deconvolver {
    pub fn new(aif: &Curve, method: Method, lambda_rel: f64) -> Result<Self> {
        check_lambda(lambda_rel)?;
        check_aif(aif)?;
        let dt = aif.grid().dt;
        let a = aif.samples();
        let n = a.len();
        match method {
            Method::Ssvd => {
                let m = DMatrix::from_fn(n, n, |i, j| if i >= j { dt * a[i - j] } else { 0.0 });
                let svd = m.svd(true, true);
                let u = svd.u.as_ref().expect("u requested");
                let v_t = svd.v_t.as_ref().expect("v_t requested");
                let s = &svd.singular_values;
                let s_max = s.iter().copied().fold(0.0, f64::max);
                if !(s_max > 0.0) {
                    return Err(Error::UnusableAif("Toeplitz operator is singular".into()));
                }
                let cutoff = (lambda_rel * s_max).max(rank_tolerance(s_max, n));
                let mut pinv = vec![0.0; n * n];
                for (r, &sigma) in s.iter().enumerate() {
                    if sigma <= 0.0 || sigma < cutoff {
                        continue;
                    }
                    let inv = 1.0 / sigma;
                    for i in 0..n {
                        let vi = v_t[(r, i)] * inv;
                        for j in 0..n {
                            pinv[i * n + j] += vi * u[(j, r)];
                        }
                    }
                }
                Ok(Deconvolver::Toeplitz {
                    n,
                    pinv,
                    singular_values: s.iter().copied().collect(),
                })
            }
            Method::Csvd => {
                let len = CIRCULANT_PAD * n;
                let mut planner = FftPlanner::<f64>::new();
                let forward = planner.plan_fft_forward(len);
                let inverse = planner.plan_fft_inverse(len);
                let mut spec: Vec<Complex64> = a
                    .iter()
                    .map(|&v| Complex64::new(dt * v, 0.0))
                    .chain(std::iter::repeat(Complex64::new(0.0, 0.0)))
                    .take(len)
                    .collect();
                forward.process(&mut spec);
                let singular_values: Vec<f64> = spec.iter().map(|c| c.norm()).collect();
                let s_max = singular_values.iter().copied().fold(0.0, f64::max);
                if !(s_max > 0.0) {
                    return Err(Error::UnusableAif("AIF spectrum vanishes".into()));
                }
                let cutoff = (lambda_rel * s_max).max(rank_tolerance(s_max, len));
                let scale = 1.0 / len as f64;
                let filter = spec
                    .iter()
                    .zip(&singular_values)
                    .map(|(c, &s)| {
                        if s <= 0.0 || s < cutoff {
                            Complex64::new(0.0, 0.0)
                        } else {
                            scale / c
                        }
                    })
                    .collect();
                Ok(Deconvolver::Circulant {
                    n,
                    len,
                    forward,
                    inverse,
                    filter,
                    singular_values,
                })
            }
        }
    }

    /// Number of irf samples produced per voxel.
    pub fn output_len(&self) -> usize {
        match self {
            Deconvolver::Toeplitz { n, .. } => *n,
            Deconvolver::Circulant { len, .. } => *len,
        }
    }

    pub fn singular_values(&self) -> &[f64] {
        match self {
            Deconvolver::Toeplitz {
                singular_values, ..
            }
            | Deconvolver::Circulant {
                singular_values, ..
            } => singular_values,
        }
    }

    /// Deconvolves one tissue curve into `out` (length [`Self::output_len`]).
    pub fn solve_into(&self, tcc: &[f64], out: &mut [f64], scratch: &mut Vec<Complex64>) {
        match self {
            Deconvolver::Toeplitz { n, pinv, .. } => {
                debug_assert_eq!(tcc.len(), *n);
                for (i, o) in out.iter_mut().enumerate() {
                    let row = &pinv[i * n..(i + 1) * n];
                    *o = row.iter().zip(tcc).map(|(p, c)| p * c).sum();
                }
            }
            Deconvolver::Circulant {
                n,
                len,
                forward,
                inverse,
                filter,
                ..
            } => {
                debug_assert_eq!(tcc.len(), *n);
                if tcc.iter().all(|&v| v == 0.0) {
                    out.fill(0.0);
                    return;
                }
                scratch.clear();
                scratch.extend(tcc.iter().map(|&v| Complex64::new(v, 0.0)));
                scratch.resize(*len, Complex64::new(0.0, 0.0));
                forward.process(scratch);
                for (c, h) in scratch.iter_mut().zip(filter) {
                    *c *= h;
                }
                inverse.process(scratch);
                for (o, c) in out.iter_mut().zip(scratch.iter()) {
                    *o = c.re;
                }
            }
        }
    }

    pub fn solve(&self, tcc: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_len()];
        self.solve_into(tcc, &mut out, &mut Vec::new());
        out
    }
}

/// Deconvolves every voxel curve of `series` by `aif`.
pub fn deconvolve(
    series: &CtpSeries,
    aif: &Curve,
    method: Method,
    lambda_rel: f64,
) -> Result<IrfMap> {
    series
        .grid()
        .ensure_matches(aif.grid(), "series grid vs AIF grid")?;
    let op = Deconvolver::new(aif, method, lambda_rel)?;
    let out_len = op.output_len();
    let grid = TimeGrid {
        n_samples: out_len,
        ..*series.grid()
    };
    let mut data = vec![0.0; series.n_voxels() * out_len];
    data.par_chunks_exact_mut(out_len)
        .zip(
            series
                .as_voxel_major()
                .par_chunks_exact(series.grid().n_samples),
        )
        .for_each_init(Vec::new, |scratch, (out, tcc)| {
            op.solve_into(tcc, out, scratch)
        });
    Ok(IrfMap {
        dims: series.dims(),
        grid,
        voxel_size: series.voxel_size(),
        method,
        lambda_rel,
        data,
    })
}

/// Zero-extends `curve` to `factor` times its length.
pub fn pad_curve(curve: &Curve, factor: usize) -> Result<Curve> {
    if factor < 2 {
        return Err(Error::param(
            "factor",
            format!("must be >= 2, got {factor}"),
        ));
    }
    let grid = curve.grid().extended(factor);
    let mut samples = curve.samples().to_vec();
    samples.resize(grid.n_samples, 0.0);
    Curve::new(samples, grid)
}

/// Candidate score for arterial voxels: tall, early and narrow curves win.
///
/// `peak / (first_moment * fwhm)`, with the first moment measured from the
/// start of the acquisition and the width counted as the number of samples
/// at or above half the peak times `dt`. `None` for curves with no positive
/// signal.
pub fn aif_score(curve: &[f64], grid: &TimeGrid) -> Option<f64> {
    let (_, peak) = crate::grid::argmax_earliest(curve);
    if !(peak > 0.0) {
        return None;
    }
    let (mut mass, mut moment) = (0.0, 0.0);
    for (k, &v) in curve.iter().enumerate() {
        let v = v.max(0.0);
        mass += v;
        moment += v * k as f64 * grid.dt;
    }
    let first_moment = moment / mass;
    let width = curve.iter().filter(|&&v| v >= 0.5 * peak).count() as f64 * grid.dt;
    let score = peak / (first_moment * width);
    (score.is_finite() && score > 0.0).then_some(score)
}

/// Picks the highest-scoring voxel curve (see [`aif_score`]); the lowest linear
/// voxel index wins ties.
pub fn select_aif(series: &CtpSeries, candidate_mask: Option<&Mask>) -> Result<Curve> {
    if series.n_voxels() == 0 {
        return Err(Error::NoCandidate("series is empty".into()));
    }
    if let Some(mask) = candidate_mask {
        if mask.dims() != series.dims() {
            return Err(Error::ShapeMismatch(format!(
                "candidate mask {:?} vs series {:?}",
                mask.dims(),
                series.dims()
            )));
        }
        if mask.count() == 0 {
            return Err(Error::NoCandidate("candidate mask is empty".into()));
        }
    }
    let grid = series.grid();
    let mut best: Option<(usize, f64)> = None;
    for (v, curve) in series.curves().enumerate() {
        if candidate_mask.is_some_and(|m| !m[v]) {
            continue;
        }
        if let Some(score) = aif_score(curve, grid) {
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((v, score));
            }
        }
    }
    let (voxel, _) =
        best.ok_or_else(|| Error::NoCandidate("all candidate curves are flat".into()))?;
    Ok(series.voxel_curve(voxel))
}
