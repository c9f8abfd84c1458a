//! Digital brain phantom and the tracer-kinetic forward model.
//!
//! Tissue concentration follows the indicator-dilution convolution
//! `TCC(t) = CBF / 6000 * (AIF ⊛ R)(t - delay)` with CBF in ml/100g/min,
//! so the tissue curve carries the AIF's concentration units. The tracer
//! is assumed to stay intravascular.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Curve, TimeGrid};
use crate::volume::{Dims, Mask, Volume, VoxelSize};

/// Converts CBF in ml/100g/min into a per-second flow fraction.
pub const CBF_UNIT_FACTOR: f64 = 60.0 * 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidueShape {
    /// `R(t) = 1` for `t < mtt`, else 0 (plug flow).
    #[default]
    Boxcar,
    /// `R(t) = exp(-t / mtt)` (well-mixed compartment).
    Exponential,
}

/// Per-tissue hemodynamic parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HemoParams {
    /// ml/100g/min
    pub cbf: f64,
    /// ml/100g
    pub cbv: f64,
    /// Bolus arrival delay relative to the AIF, seconds.
    #[serde(default)]
    pub delay: f64,
    #[serde(default)]
    pub residue_shape: ResidueShape,
}

impl HemoParams {
    pub fn new(cbf: f64, cbv: f64, delay: f64, residue_shape: ResidueShape) -> Result<Self> {
        let p = HemoParams {
            cbf,
            cbv,
            delay,
            residue_shape,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn boxcar(cbf: f64, cbv: f64, delay: f64) -> Self {
        HemoParams {
            cbf,
            cbv,
            delay,
            residue_shape: ResidueShape::Boxcar,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("cbf", self.cbf), ("cbv", self.cbv), ("delay", self.delay)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        if self.cbf > 0.0 && self.cbv <= 0.0 {
            return Err(Error::param("cbv", "must be > 0 when cbf > 0"));
        }
        Ok(())
    }

    /// Mean transit time in seconds (central volume principle), `None` when CBF is zero.
    pub fn mtt(&self) -> Option<f64> {
        (self.cbf > 0.0).then(|| 60.0 * self.cbv / self.cbf)
    }

    fn flow_fraction(&self) -> f64 {
        self.cbf / CBF_UNIT_FACTOR
    }

    /// Residue function at lag `s` seconds (no delay applied).
    pub fn residue(&self, s: f64) -> f64 {
        let Some(mtt) = self.mtt() else { return 0.0 };
        if s < 0.0 {
            return 0.0;
        }
        match self.residue_shape {
            ResidueShape::Boxcar => {
                if s < mtt {
                    1.0
                } else {
                    0.0
                }
            }
            ResidueShape::Exponential => (-s / mtt).exp(),
        }
    }

    /// Exact integral of the delayed residue `R(s - delay)` over `[a, b]`.
    fn delayed_residue_integral(&self, a: f64, b: f64) -> f64 {
        let Some(mtt) = self.mtt() else { return 0.0 };
        let lo = (a - self.delay).max(0.0);
        let hi = b - self.delay;
        if hi <= lo {
            return 0.0;
        }
        match self.residue_shape {
            ResidueShape::Boxcar => (hi.min(mtt) - lo).max(0.0),
            ResidueShape::Exponential => mtt * ((-lo / mtt).exp() - (-hi / mtt).exp()),
        }
    }

    /// Discrete impulse response on the lag axis of `grid`: the flow-scaled
    /// residue averaged over each sampling interval `[l dt, (l+1) dt)`.
    pub fn kernel(&self, grid: &TimeGrid) -> Vec<f64> {
        let f = self.flow_fraction();
        let dt = grid.dt;
        (0..grid.n_samples)
            .map(|l| {
                let a = l as f64 * dt;
                f * self.delayed_residue_integral(a, a + dt) / dt
            })
            .collect()
    }
}

/// Tissue classes of the phantom label volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum Label {
    Background = 0,
    White = 1,
    Gray = 2,
    Penumbra = 3,
    Core = 4,
}

impl Label {
    pub const TISSUE: [Label; 4] = [Label::White, Label::Gray, Label::Penumbra, Label::Core];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Label> {
        Some(match code {
            0 => Label::Background,
            1 => Label::White,
            2 => Label::Gray,
            3 => Label::Penumbra,
            4 => Label::Core,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Background => "background",
            Label::White => "white",
            Label::Gray => "gray",
            Label::Penumbra => "penumbra",
            Label::Core => "core",
        }
    }
}

/// Concentric spherical lesion: a core sphere inside a larger penumbra sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LesionSpec {
    /// Sphere centre in voxel coordinates.
    pub center: [f64; 3],
    pub core_radius_mm: f64,
    pub penumbra_radius_mm: f64,
}

/// Default parameter table: gray and white matter at their healthy values,
/// hypoperfused delayed penumbra, and a core at a quarter of white-matter flow.
pub fn default_params() -> BTreeMap<Label, HemoParams> {
    BTreeMap::from([
        (Label::Gray, HemoParams::boxcar(80.0, 4.0, 0.0)),
        (Label::White, HemoParams::boxcar(20.0, 2.0, 0.0)),
        (Label::Penumbra, HemoParams::boxcar(12.0, 0.8, 8.0)),
        (Label::Core, HemoParams::boxcar(5.0, 1.0 / 3.0, 10.0)),
    ])
}

fn default_brain_fraction() -> f64 {
    0.45
}

fn default_white_fraction() -> f64 {
    0.7
}

/// JSON descriptor of a phantom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub shape: [usize; 3],
    #[serde(default)]
    pub voxel_size: VoxelSize,
    #[serde(default)]
    pub lesion: Option<LesionSpec>,
    #[serde(default = "default_params")]
    pub params: BTreeMap<Label, HemoParams>,
    /// Brain ellipsoid semi-axis as a fraction of the extent along each axis.
    #[serde(default = "default_brain_fraction")]
    pub brain_fraction: f64,
    /// Normalised ellipsoid radius below which tissue is white matter.
    #[serde(default = "default_white_fraction")]
    pub white_fraction: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        let shape = [32, 32, 16];
        PhantomSpec {
            shape,
            voxel_size: VoxelSize::default(),
            lesion: Some(LesionSpec {
                center: [
                    (shape[0] as f64 - 1.0) / 2.0
                        - 0.4 * default_brain_fraction() * shape[0] as f64,
                    (shape[1] as f64 - 1.0) / 2.0,
                    (shape[2] as f64 - 1.0) / 2.0,
                ],
                core_radius_mm: 6.0,
                penumbra_radius_mm: 12.0,
            }),
            params: default_params(),
            brain_fraction: default_brain_fraction(),
            white_fraction: default_white_fraction(),
        }
    }
}

impl PhantomSpec {
    pub fn build(&self) -> Result<GroundTruthPhantom> {
        build_phantom(self)
    }
}

/// Simulation ground truth: tissue labels and the parameters of each label.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPhantom {
    labels: Volume<Label>,
    /// Gray/white class each voxel would have without the lesion.
    normal_labels: Volume<Label>,
    params: BTreeMap<Label, HemoParams>,
    voxel_size: VoxelSize,
    /// Sign of the lesion's x offset from the midline (-1, 0 or 1).
    lesion_side: i8,
}

impl GroundTruthPhantom {
    pub fn dims(&self) -> Dims {
        self.labels.dims()
    }

    pub fn labels(&self) -> &Volume<Label> {
        &self.labels
    }

    pub fn params(&self) -> &BTreeMap<Label, HemoParams> {
        &self.params
    }

    pub fn voxel_size(&self) -> VoxelSize {
        self.voxel_size
    }

    pub fn label_mask(&self, label: Label) -> Mask {
        self.labels.map(|l| *l == label)
    }

    pub fn brain_mask(&self) -> Mask {
        self.labels.map(|l| *l != Label::Background)
    }

    /// Ground-truth core ∪ penumbra.
    pub fn lesion_mask(&self) -> Mask {
        self.labels
            .map(|l| matches!(l, Label::Core | Label::Penumbra))
    }

    /// Normal white matter in the hemisphere opposite the lesion.
    pub fn reference_mask(&self) -> Mask {
        let dims = self.dims();
        let mid = (dims.nx as f64 - 1.0) / 2.0;
        let side = if self.lesion_side == 0 {
            -1.0
        } else {
            f64::from(self.lesion_side)
        };
        Volume::from_fn(dims, |i| {
            let (x, _, _) = dims.coords(i);
            self.labels[i] == Label::White && (x as f64 - mid) * side < 0.0
        })
    }

    /// Per-voxel parameter volume; background voxels read 0.
    pub fn param_volume(&self, f: impl Fn(&HemoParams) -> f64) -> Volume<f64> {
        self.labels
            .map(|l| self.params.get(l).map(&f).unwrap_or(0.0))
    }

    /// CBF each voxel would have if the lesion were absent.
    pub fn normal_cbf(&self) -> Volume<f64> {
        self.normal_labels
            .map(|l| self.params.get(l).map(|p| p.cbf).unwrap_or(0.0))
    }
}

/// Builds the label volume: a brain ellipsoid with a white-matter interior
/// and gray-matter shell, optionally carrying a penumbra sphere around a
/// strictly smaller core sphere.
pub fn make_phantom(
    shape: Dims,
    voxel_size: VoxelSize,
    lesion: Option<&LesionSpec>,
    params: &BTreeMap<Label, HemoParams>,
) -> Result<GroundTruthPhantom> {
    build_phantom(&PhantomSpec {
        shape: shape.as_array(),
        voxel_size,
        lesion: lesion.copied(),
        params: params.clone(),
        brain_fraction: default_brain_fraction(),
        white_fraction: default_white_fraction(),
    })
}

fn build_phantom(spec: &PhantomSpec) -> Result<GroundTruthPhantom> {
    let dims = Dims::from(spec.shape);
    if spec.shape.iter().any(|&n| n < 8) {
        return Err(Error::param(
            "shape",
            format!("every extent must be >= 8, got {:?}", spec.shape),
        ));
    }
    spec.voxel_size.validate()?;
    if !(spec.brain_fraction > 0.0 && spec.brain_fraction <= 0.5) {
        return Err(Error::param("brain_fraction", "must be in (0, 0.5]"));
    }
    if !(spec.white_fraction > 0.0 && spec.white_fraction < 1.0) {
        return Err(Error::param("white_fraction", "must be in (0, 1)"));
    }
    for p in spec.params.values() {
        p.validate()?;
    }

    let center = spec.shape.map(|n| (n as f64 - 1.0) / 2.0);
    let semi = spec.shape.map(|n| spec.brain_fraction * n as f64);
    let normal_labels = Volume::from_fn(dims, |i| {
        let (x, y, z) = dims.coords(i);
        let r2: f64 = [x, y, z]
            .iter()
            .enumerate()
            .map(|(a, &c)| ((c as f64 - center[a]) / semi[a]).powi(2))
            .sum();
        if r2 > 1.0 {
            Label::Background
        } else if r2.sqrt() <= spec.white_fraction {
            Label::White
        } else {
            Label::Gray
        }
    });

    let mut labels = normal_labels.clone();
    let mut lesion_side = 0i8;
    if let Some(lesion) = &spec.lesion {
        check_lesion(lesion, dims, spec.voxel_size, &normal_labels)?;
        let vs = spec.voxel_size.0;
        for i in 0..dims.len() {
            if labels[i] == Label::Background {
                continue;
            }
            let (x, y, z) = dims.coords(i);
            let d = distance_mm([x, y, z], lesion.center, vs);
            if d <= lesion.core_radius_mm {
                labels[i] = Label::Core;
            } else if d <= lesion.penumbra_radius_mm {
                labels[i] = Label::Penumbra;
            }
        }
        let dx = lesion.center[0] - center[0];
        lesion_side = if dx < 0.0 {
            -1
        } else if dx > 0.0 {
            1
        } else {
            0
        };
    }

    for l in Label::TISSUE {
        if labels.as_slice().contains(&l) && !spec.params.contains_key(&l) {
            return Err(Error::MissingLabelParams(l.name().into()));
        }
    }

    Ok(GroundTruthPhantom {
        labels,
        normal_labels,
        params: spec.params.clone(),
        voxel_size: spec.voxel_size,
        lesion_side,
    })
}

fn distance_mm(p: [usize; 3], c: [f64; 3], vs: [f64; 3]) -> f64 {
    (0..3)
        .map(|a| ((p[a] as f64 - c[a]) * vs[a]).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn check_lesion(
    lesion: &LesionSpec,
    dims: Dims,
    vs: VoxelSize,
    brain: &Volume<Label>,
) -> Result<()> {
    let (rc, rp) = (lesion.core_radius_mm, lesion.penumbra_radius_mm);
    if !(rc.is_finite() && rc > 0.0) {
        return Err(Error::InvalidLesion(format!(
            "core radius must be > 0, got {rc}"
        )));
    }
    if !(rp.is_finite() && rp > rc) {
        return Err(Error::InvalidLesion(format!(
            "penumbra radius {rp} mm must exceed core radius {rc} mm"
        )));
    }
    for (a, &n) in dims.as_array().iter().enumerate() {
        let c = lesion.center[a];
        let r_vox = rp / vs.0[a];
        if !c.is_finite() || c - r_vox < 0.0 || c + r_vox > n as f64 - 1.0 {
            return Err(Error::InvalidLesion(format!(
                "penumbra sphere (radius {rp} mm) around {:?} leaves the volume along axis {a}",
                lesion.center
            )));
        }
    }
    for i in 0..dims.len() {
        let (x, y, z) = dims.coords(i);
        if distance_mm([x, y, z], lesion.center, vs.0) <= rp && brain[i] == Label::Background {
            return Err(Error::InvalidLesion(format!(
                "lesion larger than brain: voxel ({x}, {y}, {z}) inside the penumbra sphere lies outside brain tissue"
            )));
        }
    }
    Ok(())
}

/// Gamma-variate arterial input function parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AifParams {
    /// Bolus arrival, seconds.
    pub t0: f64,
    pub alpha: f64,
    /// Seconds; the peak sits at `t0 + alpha * beta`.
    pub beta: f64,
    /// Peak concentration.
    pub amplitude: f64,
}

impl Default for AifParams {
    fn default() -> Self {
        AifParams {
            t0: 10.0,
            alpha: 3.0,
            beta: 1.5,
            amplitude: 1.0,
        }
    }
}

impl AifParams {
    pub fn curve(&self, grid: &TimeGrid) -> Result<Curve> {
        gamma_variate_aif(self.t0, self.alpha, self.beta, self.amplitude, grid)
    }

    /// Closed-form area under the continuous gamma variate.
    pub fn analytic_integral(&self) -> f64 {
        let tp = self.alpha * self.beta;
        self.amplitude * tp * self.alpha.exp() * gamma_fn(self.alpha + 1.0)
            / self.alpha.powf(self.alpha + 1.0)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= self.t0 {
            return 0.0;
        }
        let s = (t - self.t0) / (self.alpha * self.beta);
        self.amplitude * s.powf(self.alpha) * (self.alpha * (1.0 - s)).exp()
    }
}

/// Peak-normalised gamma variate: the value equals `amplitude` at `t0 + alpha * beta`
/// and is zero for `t <= t0`.
pub fn gamma_variate_aif(
    t0: f64,
    alpha: f64,
    beta: f64,
    amplitude: f64,
    grid: &TimeGrid,
) -> Result<Curve> {
    grid.validate()?;
    for (name, v) in [("alpha", alpha), ("beta", beta), ("amplitude", amplitude)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::param(name, format!("must be > 0, got {v}")));
        }
    }
    if !(t0.is_finite() && t0 >= grid.t_start) {
        return Err(Error::param(
            "t0",
            format!("must be >= grid start {}, got {t0}", grid.t_start),
        ));
    }
    let p = AifParams {
        t0,
        alpha,
        beta,
        amplitude,
    };
    Curve::new(grid.times().map(|t| p.value(t)).collect(), *grid)
}

/// Lanczos approximation (g = 7, n = 9), accurate to ~1e-15 for positive arguments.
fn gamma_fn(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = C[0];
        let t = x + G + 0.5;
        for (i, c) in C.iter().enumerate().skip(1) {
            a += c / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// Residue function sampled at lags `k * dt`, `k` in `0..n_samples`.
pub fn residue_curve(params: &HemoParams, grid: &TimeGrid) -> Result<Curve> {
    params.validate()?;
    if params.cbf <= 0.0 {
        return Err(Error::param(
            "cbf",
            "must be > 0 (mean transit time undefined)",
        ));
    }
    Curve::new(
        (0..grid.n_samples)
            .map(|k| params.residue(k as f64 * grid.dt))
            .collect(),
        *grid,
    )
}

/// Tissue curve for one parameter set.
///
/// The AIF is held constant over the interval ending at each sample and the
/// residue is integrated exactly over every interval, so the discrete
/// kernel keeps both the peak (`CBF / 6000`) and the area (`CBV / 100`)
/// of the continuous residue for any delay.
pub fn tissue_curve(params: &HemoParams, aif: &Curve) -> Vec<f64> {
    let grid = aif.grid();
    let kernel = params.kernel(grid);
    causal_convolve(aif.samples(), &kernel, grid.dt)
}

pub(crate) fn causal_convolve(a: &[f64], k: &[f64], dt: f64) -> Vec<f64> {
    let n = a.len();
    (0..n)
        .map(|i| dt * (0..=i).map(|j| a[j] * k[i - j]).sum::<f64>())
        .collect()
}

/// 4-D concentration series, stored voxel-major: each voxel's curve is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct CtpSeries {
    dims: Dims,
    grid: TimeGrid,
    voxel_size: VoxelSize,
    data: Vec<f64>,
}

impl CtpSeries {
    pub fn zeros(dims: Dims, grid: TimeGrid, voxel_size: VoxelSize) -> Self {
        CtpSeries {
            dims,
            grid,
            voxel_size,
            data: vec![0.0; dims.len() * grid.n_samples],
        }
    }

    /// Builds a series from voxel-major data (`data[v * n_t + t]`).
    pub fn from_voxel_major(
        dims: Dims,
        grid: TimeGrid,
        voxel_size: VoxelSize,
        data: Vec<f64>,
    ) -> Result<Self> {
        grid.validate()?;
        voxel_size.validate()?;
        if data.len() != dims.len() * grid.n_samples {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for {:?} x {} time points",
                data.len(),
                dims,
                grid.n_samples
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("data", "series contains non-finite values"));
        }
        Ok(CtpSeries {
            dims,
            grid,
            voxel_size,
            data,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn voxel_size(&self) -> VoxelSize {
        self.voxel_size
    }

    pub fn n_voxels(&self) -> usize {
        self.dims.len()
    }

    pub fn curve(&self, voxel: usize) -> &[f64] {
        let n = self.grid.n_samples;
        &self.data[voxel * n..(voxel + 1) * n]
    }

    pub fn curve_mut(&mut self, voxel: usize) -> &mut [f64] {
        let n = self.grid.n_samples;
        &mut self.data[voxel * n..(voxel + 1) * n]
    }

    pub fn voxel_curve(&self, voxel: usize) -> Curve {
        Curve::new(self.curve(voxel).to_vec(), self.grid).expect("series curves are finite")
    }

    pub fn curves(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.grid.n_samples)
    }

    pub fn as_voxel_major(&self) -> &[f64] {
        &self.data
    }

    /// Overwrites one voxel's curve, e.g. to plant a pure arterial voxel.
    pub fn inject_curve(&mut self, voxel: usize, curve: &Curve) -> Result<()> {
        self.grid.ensure_matches(curve.grid(), "injected curve")?;
        if voxel >= self.n_voxels() {
            return Err(Error::param("voxel", format!("index {voxel} out of range")));
        }
        self.curve_mut(voxel).copy_from_slice(curve.samples());
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> CtpSeries {
        CtpSeries {
            data: self.data.iter().map(|v| v * k).collect(),
            ..self.clone()
        }
    }

    /// Delays every curve by `m` samples, zero-filling the start and dropping the tail.
    pub fn shifted(&self, m: usize) -> CtpSeries {
        let n = self.grid.n_samples;
        let mut out = CtpSeries::zeros(self.dims, self.grid, self.voxel_size);
        for (dst, src) in out.data.chunks_exact_mut(n).zip(self.curves()) {
            if m < n {
                dst[m..].copy_from_slice(&src[..n - m]);
            }
        }
        out
    }
}

/// Simulates the acquisition: one tissue curve per label, copied to every voxel
/// of that label. Background voxels stay identically zero.
pub fn forward_model(
    phantom: &GroundTruthPhantom,
    aif: &Curve,
    grid: &TimeGrid,
) -> Result<CtpSeries> {
    grid.validate()?;
    aif.grid()
        .ensure_matches(grid, "AIF grid vs requested output grid")?;
    let per_label: BTreeMap<Label, Vec<f64>> = phantom
        .params
        .iter()
        .filter(|(l, _)| **l != Label::Background)
        .map(|(l, p)| (*l, tissue_curve(p, aif)))
        .collect();

    let dims = phantom.dims();
    let n = grid.n_samples;
    let mut series = CtpSeries::zeros(dims, *grid, phantom.voxel_size);
    let labels = phantom.labels.as_slice();
    series
        .data
        .par_chunks_exact_mut(n)
        .zip(labels.par_iter())
        .try_for_each(|(dst, label)| {
            if *label == Label::Background {
                return Ok(());
            }
            let tcc = per_label
                .get(label)
                .ok_or_else(|| Error::MissingLabelParams(label.name().into()))?;
            dst.copy_from_slice(tcc);
            Ok(())
        })?;
    Ok(series)
}

/// Adds i.i.d. zero-mean Gaussian noise of standard deviation `sigma` to every sample.
pub fn add_noise(series: &CtpSeries, sigma: f64, seed: u64) -> Result<CtpSeries> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::param("sigma", format!("must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(series.clone());
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::param("sigma", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = series.clone();
    for v in out.data.iter_mut() {
        *v += normal.sample(&mut rng);
    }
    Ok(out)
}
