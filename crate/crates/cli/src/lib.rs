//! Orchestration behind the `ctperf` binary.
//!
//! Each command reads a [`PipelineConfig`] and writes its artifacts under the
//! configured output directory:
//!
//! ```text
//! <out>/phantom/      labels, ground-truth masks and parameters, aif.csv, series
//! <out>/analysis/     irf, perfusion maps, lesion masks, report.{json,csv}, previews
//! <out>/progression/  trajectory.csv, core snapshots, final-infarct masks
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use ctperf_core::io::{self, read_mask, read_scalar, read_series};
use ctperf_core::perfmaps::relative_maps;
use ctperf_core::phantom::CBF_UNIT_FACTOR;
use ctperf_core::progression::{evolve, final_infarct, trajectory};
use ctperf_core::triage::{
    builtin_criteria, largest_component, segment_core_by, segment_perfusion_lesion, CoreRule,
    LesionRule,
};
use ctperf_core::{
    add_noise, deconvolve, evaluate_mismatch, forward_model, select_aif, AifParams, Label,
    LesionMasks, Mask, Method, MismatchCriterion, PerfusionMaps, PhantomSpec, SurvivalModel,
    TimeGrid, TreatmentEvent, Volume, VoxelSize,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

fn default_lambda() -> f64 {
    0.1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("ctperf-out")
}

fn default_horizon() -> f64 {
    360.0
}

fn default_step() -> f64 {
    10.0
}

/// Where the analysis takes its AIF from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AifSource {
    /// The simulated arterial curve written next to the series.
    #[default]
    Known,
    /// Automatic selection over all voxels.
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeconvConfig {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_lambda")]
    pub lambda_rel: f64,
    #[serde(default)]
    pub aif: AifSource,
}

impl Default for DeconvConfig {
    fn default() -> Self {
        DeconvConfig {
            method: Method::default(),
            lambda_rel: default_lambda(),
            aif: AifSource::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationConfig {
    #[serde(default)]
    pub core_rule: CoreRule,
    #[serde(default)]
    pub lesion_rule: LesionRule,
    /// Keep only the largest 6-connected component of each mask.
    #[serde(default)]
    pub largest_component: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgressionConfig {
    #[serde(default)]
    pub model: SurvivalModel,
    /// Minutes since onset.
    #[serde(default = "default_horizon")]
    pub horizon_min: f64,
    #[serde(default = "default_step")]
    pub step_min: f64,
    #[serde(default)]
    pub event: Option<TreatmentEvent>,
    /// Times at which core masks are written.
    #[serde(default)]
    pub snapshots_min: Vec<f64>,
}

impl Default for ProgressionConfig {
    fn default() -> Self {
        ProgressionConfig {
            model: SurvivalModel::default(),
            horizon_min: default_horizon(),
            step_min: default_step(),
            event: None,
            snapshots_min: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub phantom: PhantomSpec,
    #[serde(default = "TimeGrid::default_acquisition")]
    pub grid: TimeGrid,
    #[serde(default)]
    pub aif: AifParams,
    /// Voxel `[x, y, z]` overwritten with the pure AIF before noise is added.
    #[serde(default)]
    pub aif_voxel: Option<[usize; 3]>,
    /// Standard deviation of additive noise, concentration units.
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub deconv: DeconvConfig,
    #[serde(default)]
    pub segmentation: SegmentationConfig,
    /// Inline criteria; the built-in registry when absent.
    #[serde(default)]
    pub criteria: Option<Vec<MismatchCriterion>>,
    /// JSON file holding a criteria list; overrides `criteria`.
    #[serde(default)]
    pub criteria_path: Option<PathBuf>,
    #[serde(default)]
    pub progression: ProgressionConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            phantom: PhantomSpec::default(),
            grid: TimeGrid::default_acquisition(),
            aif: AifParams::default(),
            aif_voxel: None,
            noise_sigma: 0.0,
            seed: None,
            deconv: DeconvConfig::default(),
            segmentation: SegmentationConfig::default(),
            criteria: None,
            criteria_path: None,
            progression: ProgressionConfig::default(),
            output_dir: default_output_dir(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.phantom.voxel_size.validate()?;
        ensure!(
            self.noise_sigma.is_finite() && self.noise_sigma >= 0.0,
            "noise_sigma must be >= 0, got {}",
            self.noise_sigma
        );
        ensure!(
            self.noise_sigma == 0.0 || self.seed.is_some(),
            "a seed is required when noise_sigma > 0 (use --seed or the `seed` field)"
        );
        ensure!(
            (0.0..1.0).contains(&self.deconv.lambda_rel),
            "lambda_rel must lie in [0, 1), got {}",
            self.deconv.lambda_rel
        );
        let frac = |name: &str, t: f64| -> Result<()> {
            ensure!(
                t > 0.0 && t < 1.0,
                "{name} threshold must lie in (0, 1), got {t}"
            );
            Ok(())
        };
        match self.segmentation.core_rule {
            CoreRule::Rcbf(t) => frac("core rcbf", t)?,
            CoreRule::Rcbv(t) => frac("core rcbv", t)?,
        }
        match self.segmentation.lesion_rule {
            LesionRule::Rcbv(t) => frac("lesion rcbv", t)?,
            LesionRule::Tmax(t) | LesionRule::Delay(t) => {
                ensure!(
                    t.is_finite() && t >= 0.0,
                    "lesion time threshold must be >= 0 s, got {t}"
                )
            }
        }
        if let Some(path) = &self.criteria_path {
            ensure!(
                path.is_file(),
                "criteria file {} does not exist",
                path.display()
            );
        }
        for c in self.criteria.iter().flatten() {
            c.validate()?;
        }
        let p = &self.progression;
        p.model.validate()?;
        ensure!(
            p.horizon_min.is_finite() && p.horizon_min >= 0.0,
            "progression horizon must be >= 0 min, got {}",
            p.horizon_min
        );
        ensure!(
            p.step_min > 0.0,
            "progression step must be > 0 min, got {}",
            p.step_min
        );
        if let Some(ev) = &p.event {
            ev.validate()?;
            ensure!(
                ev.ttt <= p.horizon_min,
                "treatment time {} min lies beyond the progression horizon {} min",
                ev.ttt,
                p.horizon_min
            );
        }
        for &t in &p.snapshots_min {
            ensure!(
                (0.0..=p.horizon_min).contains(&t),
                "snapshot time {t} min lies outside [0, {}]",
                p.horizon_min
            );
        }
        Ok(())
    }

    /// The criteria to evaluate: file, then inline list, then the built-in registry.
    pub fn resolved_criteria(&self) -> Result<Vec<MismatchCriterion>> {
        let list = match (&self.criteria_path, &self.criteria) {
            (Some(path), _) => load_criteria(path)?,
            (None, Some(list)) => list.clone(),
            (None, None) => builtin_criteria(),
        };
        for c in &list {
            c.validate()?;
        }
        Ok(list)
    }

    /// Progression sample times `0, step, 2 step, ...` up to and including the horizon.
    pub fn progression_times(&self) -> Vec<f64> {
        let p = &self.progression;
        let n = (p.horizon_min / p.step_min + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * p.step_min).collect();
        if times.last().is_some_and(|&t| t < p.horizon_min) {
            times.push(p.horizon_min);
        }
        times
    }
}

pub fn load_criteria(path: &Path) -> Result<Vec<MismatchCriterion>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading criteria {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing criteria {}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

/// Files written by [`cmd_phantom`].
#[derive(Debug, Clone)]
pub struct PhantomOutputs {
    pub dir: PathBuf,
    pub series: PathBuf,
    pub aif: PathBuf,
    pub brain_mask: PathBuf,
    pub reference_mask: PathBuf,
    pub normal_cbf: PathBuf,
}

/// Builds the phantom, simulates the acquisition and writes ground truth plus series.
pub fn cmd_phantom(cfg: &PipelineConfig) -> Result<PhantomOutputs> {
    cfg.validate()?;
    let dir = cfg.output_dir.join("phantom");
    create_dir(&dir)?;
    let ph = cfg.phantom.build().context("building phantom")?;
    let vs = ph.voxel_size();
    let aif = cfg.aif.curve(&cfg.grid).context("building AIF")?;
    let mut series = forward_model(&ph, &aif, &cfg.grid)?;
    if let Some([x, y, z]) = cfg.aif_voxel {
        let d = ph.dims();
        ensure!(
            x < d.nx && y < d.ny && z < d.nz,
            "aif_voxel {:?} lies outside the volume {:?}",
            [x, y, z],
            d.as_array()
        );
        series.inject_curve(d.index(x, y, z), &aif)?;
    }
    if cfg.noise_sigma > 0.0 {
        series = add_noise(&series, cfg.noise_sigma, cfg.seed.expect("validated"))?;
    }

    io::write_labels(&dir.join("labels.json"), ph.labels(), vs)?;
    for (name, mask) in [
        ("brain_mask", ph.brain_mask()),
        ("core_mask", ph.label_mask(Label::Core)),
        ("penumbra_mask", ph.label_mask(Label::Penumbra)),
        ("lesion_mask", ph.lesion_mask()),
        ("reference_mask", ph.reference_mask()),
    ] {
        io::write_mask(&dir.join(format!("{name}.json")), &mask, vs)?;
    }
    io::write_scalar(
        &dir.join("cbf.json"),
        &ph.param_volume(|p| p.cbf),
        vs,
        unit_meta("ml/100g/min"),
    )?;
    io::write_scalar(
        &dir.join("cbv.json"),
        &ph.param_volume(|p| p.cbv),
        vs,
        unit_meta("ml/100g"),
    )?;
    io::write_scalar(
        &dir.join("delay.json"),
        &ph.param_volume(|p| p.delay),
        vs,
        unit_meta("s"),
    )?;
    io::write_scalar(
        &dir.join("mtt.json"),
        &ph.param_volume(|p| p.mtt().unwrap_or(0.0)),
        vs,
        unit_meta("s"),
    )?;
    io::write_scalar(
        &dir.join("normal_cbf.json"),
        &ph.normal_cbf(),
        vs,
        unit_meta("ml/100g/min"),
    )?;
    io::write_curve_csv(&dir.join("aif.csv"), &aif)?;

    io::write_series(
        &dir.join("series.json"),
        &series,
        unit_meta("concentration"),
    )?;

    Ok(PhantomOutputs {
        series: dir.join("series.json"),
        aif: dir.join("aif.csv"),
        brain_mask: dir.join("brain_mask.json"),
        reference_mask: dir.join("reference_mask.json"),
        normal_cbf: dir.join("normal_cbf.json"),
        dir,
    })
}

fn unit_meta(unit: &str) -> BTreeMap<String, Value> {
    BTreeMap::from([("unit".to_string(), Value::from(unit))])
}

/// AIF for [`cmd_analyze`].
#[derive(Debug, Clone, PartialEq)]
pub enum AifInput {
    Csv(PathBuf),
    Auto,
}

impl std::str::FromStr for AifInput {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(if s == "auto" {
            AifInput::Auto
        } else {
            AifInput::Csv(PathBuf::from(s))
        })
    }
}

/// Inputs of [`cmd_analyze`] beyond the config.
#[derive(Debug, Clone)]
pub struct AnalyzeInputs {
    pub series: PathBuf,
    pub aif: AifInput,
    /// Normal-tissue region used to normalise CBF and CBV.
    pub reference_mask: Option<PathBuf>,
    /// Voxels eligible for segmentation; voxels with any nonzero sample when absent.
    pub brain_mask: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutputs {
    pub dir: PathBuf,
    pub cbf: PathBuf,
    pub core_mask: PathBuf,
    pub lesion_mask: PathBuf,
    pub report: ctperf_core::MismatchReport,
}

#[derive(Debug, Serialize)]
struct MapsManifest {
    method: Method,
    lambda_rel: f64,
    aif: String,
    reference_mask_sha256: String,
    reference_voxels: usize,
    reference_cbf_median: f64,
    reference_cbv_median: f64,
    cbf_unit_constant: f64,
    core_rule: CoreRule,
    lesion_rule: LesionRule,
    largest_component: bool,
}

/// SHA-256 of a mask as one byte per voxel in x-fastest order.
pub fn mask_digest(mask: &Mask) -> String {
    let bytes: Vec<u8> = mask.as_slice().iter().map(|&b| u8::from(b)).collect();
    hex::encode(Sha256::digest(&bytes))
}

/// Deconvolves the series, derives maps, segments and evaluates mismatch.
pub fn cmd_analyze(cfg: &PipelineConfig, inputs: &AnalyzeInputs) -> Result<AnalyzeOutputs> {
    cfg.validate()?;
    let criteria = cfg.resolved_criteria()?;
    let reference_path = inputs
        .reference_mask
        .as_ref()
        .context("a reference mask is required (normal white matter)")?;
    let (series, _) = read_series(&inputs.series)
        .with_context(|| format!("reading {}", inputs.series.display()))?;
    let dims = series.dims();
    let vs = series.voxel_size();

    let (aif, aif_label) = match &inputs.aif {
        AifInput::Csv(p) => (
            io::read_curve_csv(p).with_context(|| format!("reading AIF {}", p.display()))?,
            "csv".to_string(),
        ),
        AifInput::Auto => (
            select_aif(&series, None).context("selecting AIF")?,
            "auto".to_string(),
        ),
    };
    if aif.grid() != series.grid() {
        bail!(
            "AIF grid {:?} does not match series grid {:?}",
            aif.grid(),
            series.grid()
        );
    }
    let (reference, _) = read_mask(reference_path)
        .with_context(|| format!("reading {}", reference_path.display()))?;
    ensure!(
        reference.dims() == dims,
        "reference mask shape does not match the series"
    );
    let brain = match &inputs.brain_mask {
        Some(p) => {
            let (m, _) = read_mask(p).with_context(|| format!("reading {}", p.display()))?;
            ensure!(
                m.dims() == dims,
                "brain mask shape does not match the series"
            );
            m
        }
        None => Volume::from_fn(dims, |v| series.curve(v).iter().any(|&c| c != 0.0)),
    };

    let irf = deconvolve(&series, &aif, cfg.deconv.method, cfg.deconv.lambda_rel)?;
    let maps = PerfusionMaps::derive(&irf, &series, &aif, &brain)?;
    let maps = relative_maps(&maps, &reference)?;
    let seg = &cfg.segmentation;
    let mut core = segment_core_by(&maps, seg.core_rule)?;
    let mut lesion = segment_perfusion_lesion(&maps, seg.lesion_rule)?;
    if seg.largest_component {
        core = largest_component(&core);
        lesion = largest_component(&lesion);
    }
    let masks = LesionMasks::new(core, lesion, vs)?;
    let report = evaluate_mismatch(&masks, &criteria)?;

    let dir = cfg.output_dir.join("analysis");
    create_dir(&dir)?;
    io::write_irf(&dir.join("irf.json"), &irf)?;
    io::write_curve_csv(&dir.join("aif_used.csv"), &aif)?;
    let rcbf = maps.rcbf.as_ref().expect("relative maps computed");
    let rcbv = maps.rcbv.as_ref().expect("relative maps computed");
    let delay = maps.delay.as_ref().expect("delay map computed");
    for (name, vol, unit) in [
        ("tmax", &maps.tmax, "s"),
        ("cbf", &maps.cbf, "ml/100g/min"),
        ("cbv", &maps.cbv, "ml/100g"),
        ("mtt", &maps.mtt, "s"),
        ("rcbf", rcbf, "1"),
        ("rcbv", rcbv, "1"),
        ("delay", delay, "s"),
    ] {
        io::write_scalar(&dir.join(format!("{name}.json")), vol, vs, unit_meta(unit))?;
    }
    io::write_mask(&dir.join("mtt_valid.json"), &maps.mtt_valid, vs)?;
    io::write_mask(&dir.join("brain_mask.json"), &brain, vs)?;
    io::write_mask(&dir.join("core_mask.json"), &masks.core, vs)?;
    io::write_mask(&dir.join("lesion_mask.json"), &masks.perfusion_lesion, vs)?;
    io::write_mask(&dir.join("penumbra_mask.json"), &masks.penumbra, vs)?;

    io::write_json(&dir.join("report.json"), &report)?;
    let csv = format!("{}\n{}\n", report.csv_header(), report.csv_row());
    io::atomic_write(&dir.join("report.csv"), csv.as_bytes())?;

    let manifest = MapsManifest {
        method: irf.method(),
        lambda_rel: irf.lambda_rel(),
        aif: aif_label,
        reference_mask_sha256: mask_digest(&reference),
        reference_voxels: reference.count(),
        reference_cbf_median: ctperf_core::perfmaps::masked_median(&maps.cbf, &reference)?,
        reference_cbv_median: ctperf_core::perfmaps::masked_median(&maps.cbv, &reference)?,
        cbf_unit_constant: CBF_UNIT_FACTOR,
        core_rule: seg.core_rule,
        lesion_rule: seg.lesion_rule,
        largest_component: seg.largest_component,
    };
    io::write_json(&dir.join("maps_manifest.json"), &manifest)?;

    let z = dims.nz / 2;
    let tmax_hi = irf.grid().duration();
    let cbf_hi = brain.indices().map(|v| maps.cbf[v]).fold(0.0, f64::max);
    io::write_pgm_slice(&dir.join("tmax.pgm"), &maps.tmax, z, 0.0, tmax_hi)?;
    io::write_pgm_slice(&dir.join("cbf.pgm"), &maps.cbf, z, 0.0, cbf_hi)?;
    let as_f = |m: &Mask| m.map(|&b| if b { 1.0 } else { 0.0 });
    io::write_pgm_slice(&dir.join("core.pgm"), &as_f(&masks.core), z, 0.0, 1.0)?;
    io::write_pgm_slice(
        &dir.join("lesion.pgm"),
        &as_f(&masks.perfusion_lesion),
        z,
        0.0,
        1.0,
    )?;

    Ok(AnalyzeOutputs {
        cbf: dir.join("cbf.json"),
        core_mask: dir.join("core_mask.json"),
        lesion_mask: dir.join("lesion_mask.json"),
        dir,
        report,
    })
}

/// Inputs of [`cmd_progress`] beyond the config.
#[derive(Debug, Clone)]
pub struct ProgressInputs {
    /// Acute CBF map, ml/100g/min.
    pub cbf: PathBuf,
    /// CBF each voxel would have without the occlusion; tissue is where it is > 0.
    pub normal_cbf: PathBuf,
    /// Acute core and lesion masks for the final-infarct construction.
    pub acute_core: Option<PathBuf>,
    pub acute_lesion: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ProgressOutputs {
    pub dir: PathBuf,
    pub trajectory: Vec<(f64, f64)>,
}

fn time_tag(t: f64) -> String {
    format!("{t}").replace('.', "p")
}

/// Evolves the core over the configured horizon.
pub fn cmd_progress(cfg: &PipelineConfig, inputs: &ProgressInputs) -> Result<ProgressOutputs> {
    cfg.validate()?;
    let p = &cfg.progression;
    let (cbf, h) =
        read_scalar(&inputs.cbf).with_context(|| format!("reading {}", inputs.cbf.display()))?;
    let (normal, _) = read_scalar(&inputs.normal_cbf)
        .with_context(|| format!("reading {}", inputs.normal_cbf.display()))?;
    ensure!(
        cbf.dims() == normal.dims(),
        "CBF and normal-CBF maps differ in shape"
    );
    let vs: VoxelSize = h.voxel_size;

    let times = cfg.progression_times();
    let traj = trajectory(&cbf, &p.model, &times, p.event.as_ref(), &normal, vs)?;

    let dir = cfg.output_dir.join("progression");
    create_dir(&dir)?;
    let mut csv = String::from("t_min,core_ml\n");
    for (t, ml) in &traj {
        csv.push_str(&format!("{t:?},{ml:?}\n"));
    }
    io::atomic_write(&dir.join("trajectory.csv"), csv.as_bytes())?;

    for &t in &p.snapshots_min {
        let ev = p.event.as_ref().filter(|e| e.ttt <= t);
        let state = evolve(&cbf, &p.model, t, ev, &normal)?;
        io::write_mask(
            &dir.join(format!("core_t{}.json", time_tag(t))),
            &state.core_mask,
            vs,
        )?;
    }

    match (&inputs.acute_core, &inputs.acute_lesion) {
        (Some(c), Some(l)) => {
            let (core, _) = read_mask(c).with_context(|| format!("reading {}", c.display()))?;
            let (lesion, _) = read_mask(l).with_context(|| format!("reading {}", l.display()))?;
            io::write_mask(
                &dir.join("final_infarct_reperfused.json"),
                &final_infarct(&core, &lesion, true)?,
                vs,
            )?;
            io::write_mask(
                &dir.join("final_infarct_nonreperfused.json"),
                &final_infarct(&core, &lesion, false)?,
                vs,
            )?;
        }
        (None, None) => {}
        _ => {
            bail!("final-infarct construction needs both the acute core and the acute lesion mask")
        }
    }

    Ok(ProgressOutputs {
        dir,
        trajectory: traj,
    })
}

/// Runs phantom, analyze and progress in sequence.
pub fn cmd_pipeline(
    cfg: &PipelineConfig,
) -> Result<(PhantomOutputs, AnalyzeOutputs, ProgressOutputs)> {
    cfg.validate()?;
    create_dir(&cfg.output_dir)?;
    let mut recorded = cfg.clone();
    recorded.output_dir = PathBuf::from(".");
    io::write_json(&cfg.output_dir.join("config.json"), &recorded)?;

    let ph = cmd_phantom(cfg)?;
    let an = cmd_analyze(
        cfg,
        &AnalyzeInputs {
            series: ph.series.clone(),
            aif: match cfg.deconv.aif {
                AifSource::Known => AifInput::Csv(ph.aif.clone()),
                AifSource::Auto => AifInput::Auto,
            },
            reference_mask: Some(ph.reference_mask.clone()),
            brain_mask: Some(ph.brain_mask.clone()),
        },
    )?;
    let pr = cmd_progress(
        cfg,
        &ProgressInputs {
            cbf: an.cbf.clone(),
            normal_cbf: ph.normal_cbf.clone(),
            acute_core: Some(an.core_mask.clone()),
            acute_lesion: Some(an.lesion_mask.clone()),
        },
    )?;
    Ok((ph, an, pr))
}

/// Criteria registry as pretty JSON.
pub fn criteria_json(criteria: &[MismatchCriterion]) -> Result<String> {
    Ok(serde_json::to_string_pretty(criteria)?)
}
