//! Threshold segmentation of core and perfusion lesion, lesion volumes,
//! mismatch criteria and clinical score validation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::perfmaps::PerfusionMaps;
use crate::volume::{ensure_same_dims, Dims, Mask, Volume, VoxelSize};

pub const DEFAULT_RCBF_THRESHOLD: f64 = 0.30;
pub const DEFAULT_TMAX_THRESHOLD: f64 = 6.0;
pub const DEFAULT_RCBV_THRESHOLD: f64 = 0.60;
pub const DEFAULT_DELAY_THRESHOLD: f64 = 3.0;

/// Rule marking the ischemic core.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoreRule {
    /// `rcbf < threshold`
    Rcbf(f64),
    /// `rcbv < threshold`
    Rcbv(f64),
}

impl Default for CoreRule {
    fn default() -> Self {
        CoreRule::Rcbf(DEFAULT_RCBF_THRESHOLD)
    }
}

/// Rule marking the perfusion lesion (core plus penumbra).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LesionRule {
    /// `tmax >= threshold` seconds
    Tmax(f64),
    /// `rcbv < threshold`
    Rcbv(f64),
    /// `delay > threshold` seconds
    Delay(f64),
}

impl Default for LesionRule {
    fn default() -> Self {
        LesionRule::Tmax(DEFAULT_TMAX_THRESHOLD)
    }
}

fn parse_rule(s: &str) -> Result<(String, Option<f64>)> {
    let (name, value) = match s.split_once(['=', ':']) {
        Some((n, v)) => {
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::param("rule", format!("bad threshold in `{s}`")))?;
            (n, Some(v))
        }
        None => (s, None),
    };
    Ok((name.trim().to_ascii_lowercase(), value))
}

impl FromStr for CoreRule {
    type Err = Error;
    /// `rcbf`, `rcbf=0.3`, `rcbv`, `rcbv=0.6`.
    fn from_str(s: &str) -> Result<Self> {
        match parse_rule(s)? {
            (n, v) if n == "rcbf" => Ok(CoreRule::Rcbf(v.unwrap_or(DEFAULT_RCBF_THRESHOLD))),
            (n, v) if n == "rcbv" => Ok(CoreRule::Rcbv(v.unwrap_or(DEFAULT_RCBV_THRESHOLD))),
            (n, _) => Err(Error::param("core_rule", format!("unknown rule `{n}`"))),
        }
    }
}

impl FromStr for LesionRule {
    type Err = Error;
    /// `tmax`, `tmax=6`, `rcbv=0.6`, `delay=3`.
    fn from_str(s: &str) -> Result<Self> {
        match parse_rule(s)? {
            (n, v) if n == "tmax" => Ok(LesionRule::Tmax(v.unwrap_or(DEFAULT_TMAX_THRESHOLD))),
            (n, v) if n == "rcbv" => Ok(LesionRule::Rcbv(v.unwrap_or(DEFAULT_RCBV_THRESHOLD))),
            (n, v) if n == "delay" => Ok(LesionRule::Delay(v.unwrap_or(DEFAULT_DELAY_THRESHOLD))),
            (n, _) => Err(Error::param("lesion_rule", format!("unknown rule `{n}`"))),
        }
    }
}

fn check_fraction(name: &'static str, t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::param(name, format!("must lie in (0, 1), got {t}")));
    }
    Ok(())
}

fn threshold_mask(
    maps: &PerfusionMaps,
    values: &Volume<f64>,
    pred: impl Fn(f64) -> bool,
) -> Result<Mask> {
    ensure_same_dims(values.dims(), maps.brain.dims())?;
    Ok(Volume::from_fn(values.dims(), |i| {
        maps.brain[i] && pred(values[i])
    }))
}

/// Core as `rcbf < rcbf_threshold` inside the brain mask.
pub fn segment_core(maps: &PerfusionMaps, rcbf_threshold: f64) -> Result<Mask> {
    segment_core_by(maps, CoreRule::Rcbf(rcbf_threshold))
}

pub fn segment_core_by(maps: &PerfusionMaps, rule: CoreRule) -> Result<Mask> {
    match rule {
        CoreRule::Rcbf(t) => {
            check_fraction("rcbf_threshold", t)?;
            let rcbf = maps.rcbf.as_ref().ok_or(Error::MissingMap("rcbf"))?;
            threshold_mask(maps, rcbf, |v| v < t)
        }
        CoreRule::Rcbv(t) => {
            check_fraction("rcbv_threshold", t)?;
            let rcbv = maps.rcbv.as_ref().ok_or(Error::MissingMap("rcbv"))?;
            threshold_mask(maps, rcbv, |v| v < t)
        }
    }
}

/// Perfusion lesion inside the brain mask. Tmax is inclusive, rCBV and delay strict.
pub fn segment_perfusion_lesion(maps: &PerfusionMaps, rule: LesionRule) -> Result<Mask> {
    match rule {
        LesionRule::Tmax(t) => threshold_mask(maps, &maps.tmax, |v| v >= t),
        LesionRule::Rcbv(t) => {
            check_fraction("rcbv_threshold", t)?;
            let rcbv = maps.rcbv.as_ref().ok_or(Error::MissingMap("rcbv"))?;
            threshold_mask(maps, rcbv, |v| v < t)
        }
        LesionRule::Delay(t) => {
            let delay = maps.delay.as_ref().ok_or(Error::MissingMap("delay"))?;
            threshold_mask(maps, delay, |v| v > t)
        }
    }
}

/// `count(mask) * voxel volume`, in ml.
pub fn volume_ml(mask: &Mask, voxel_size: VoxelSize) -> f64 {
    mask.count() as f64 * voxel_size.voxel_ml()
}

/// Keeps only the largest 6-connected component (ties: the one found first in
/// linear order). Opt-in post-processing.
pub fn largest_component(mask: &Mask) -> Mask {
    let dims = mask.dims();
    let mut comp = vec![usize::MAX; dims.len()];
    let mut best: Option<(usize, usize)> = None;
    let mut stack = Vec::new();
    let mut id = 0;
    for seed in mask.indices() {
        if comp[seed] != usize::MAX {
            continue;
        }
        let mut size = 0;
        comp[seed] = id;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            size += 1;
            for j in neighbours6(dims, i) {
                if mask[j] && comp[j] == usize::MAX {
                    comp[j] = id;
                    stack.push(j);
                }
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((id, size));
        }
        id += 1;
    }
    match best {
        Some((keep, _)) => Volume::from_fn(dims, |i| comp[i] == keep),
        None => mask.clone(),
    }
}

fn neighbours6(dims: Dims, i: usize) -> impl Iterator<Item = usize> {
    let (x, y, z) = dims.coords(i);
    let (x, y, z) = (x as isize, y as isize, z as isize);
    [
        (-1, 0, 0),
        (1, 0, 0),
        (0, -1, 0),
        (0, 1, 0),
        (0, 0, -1),
        (0, 0, 1),
    ]
    .into_iter()
    .filter_map(move |(dx, dy, dz)| {
        let (a, b, c) = (x + dx, y + dy, z + dz);
        (a >= 0
            && b >= 0
            && c >= 0
            && (a as usize) < dims.nx
            && (b as usize) < dims.ny
            && (c as usize) < dims.nz)
            .then(|| dims.index(a as usize, b as usize, c as usize))
    })
}

/// Core, perfusion lesion and penumbra with `penumbra = lesion AND NOT core`.
#[derive(Debug, Clone, PartialEq)]
pub struct LesionMasks {
    pub core: Mask,
    pub perfusion_lesion: Mask,
    pub penumbra: Mask,
    pub voxel_size: VoxelSize,
    /// Core voxels that the thresholded lesion missed before the union.
    pub inconsistent_voxels: usize,
}

impl LesionMasks {
    /// Forces the core into the perfusion lesion and derives the penumbra.
    pub fn new(core: Mask, lesion: Mask, voxel_size: VoxelSize) -> Result<Self> {
        ensure_same_dims(core.dims(), lesion.dims())?;
        voxel_size.validate()?;
        let inconsistent_voxels = core.and_not(&lesion)?.count();
        let perfusion_lesion = lesion.or(&core)?;
        let penumbra = perfusion_lesion.and_not(&core)?;
        Ok(LesionMasks {
            core,
            perfusion_lesion,
            penumbra,
            voxel_size,
            inconsistent_voxels,
        })
    }
}

/// Eligibility thresholds: `diff > min_diff_ml`, `ratio > min_ratio`, `core < max_core_ml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchCriterion {
    pub name: String,
    pub min_diff_ml: f64,
    pub min_ratio: f64,
    /// `null` in JSON means no cap.
    #[serde(with = "uncapped")]
    pub max_core_ml: f64,
}

mod uncapped {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl MismatchCriterion {
    pub fn new(
        name: impl Into<String>,
        min_diff_ml: f64,
        min_ratio: f64,
        max_core_ml: f64,
    ) -> Result<Self> {
        let c = MismatchCriterion {
            name: name.into(),
            min_diff_ml,
            min_ratio,
            max_core_ml,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min_diff_ml.is_finite() && self.min_diff_ml >= 0.0) {
            return Err(Error::param(
                "min_diff_ml",
                format!("{}: must be >= 0", self.name),
            ));
        }
        if !(self.min_ratio.is_finite() && self.min_ratio >= 1.0) {
            return Err(Error::param(
                "min_ratio",
                format!("{}: must be >= 1", self.name),
            ));
        }
        if !(self.max_core_ml > 0.0) {
            return Err(Error::param(
                "max_core_ml",
                format!("{}: must be > 0", self.name),
            ));
        }
        Ok(())
    }

    /// Verdict for given volumes; an undefined ratio (both volumes zero) fails.
    pub fn verdict(&self, core_ml: f64, lesion_ml: f64) -> bool {
        let Some(ratio) = mismatch_ratio(core_ml, lesion_ml) else {
            return false;
        };
        lesion_ml - core_ml > self.min_diff_ml
            && ratio > self.min_ratio
            && core_ml < self.max_core_ml
    }
}

/// Built-in registry of mismatch criteria.
pub fn builtin_criteria() -> Vec<MismatchCriterion> {
    vec![
        MismatchCriterion {
            name: "DAWN/DEFUSE3".into(),
            min_diff_ml: 15.0,
            min_ratio: 1.8,
            max_core_ml: 70.0,
        },
        MismatchCriterion {
            name: "EXTEND-strict".into(),
            min_diff_ml: 10.0,
            min_ratio: 1.2,
            max_core_ml: 70.0,
        },
        MismatchCriterion {
            name: "EXTEND-lenient".into(),
            min_diff_ml: 20.0,
            min_ratio: 1.2,
            max_core_ml: 100.0,
        },
        MismatchCriterion {
            name: "DWI-PWI".into(),
            min_diff_ml: 10.0,
            min_ratio: 1.2,
            max_core_ml: f64::INFINITY,
        },
    ]
}

/// `lesion / core`; infinite for a zero core with a lesion, `None` when both are zero.
pub fn mismatch_ratio(core_ml: f64, lesion_ml: f64) -> Option<f64> {
    if core_ml > 0.0 {
        Some(lesion_ml / core_ml)
    } else if lesion_ml > 0.0 {
        Some(f64::INFINITY)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MismatchReport {
    pub core_ml: f64,
    pub lesion_ml: f64,
    pub penumbra_ml: f64,
    pub diff_ml: f64,
    /// Serialized as a number, `"inf"`, or `null` when undefined.
    #[serde(with = "ratio_repr")]
    pub ratio: Option<f64>,
    pub verdicts: BTreeMap<String, bool>,
    pub inconsistent_voxels: usize,
}

mod ratio_repr {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            Some(r) if r.is_finite() => s.serialize_f64(*r),
            Some(_) => s.serialize_str("inf"),
            None => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(v)) => Ok(Some(v)),
            Some(Repr::Text(t)) if t == "inf" => Ok(Some(f64::INFINITY)),
            Some(Repr::Text(t)) => Err(serde::de::Error::custom(format!("bad ratio `{t}`"))),
        }
    }
}

impl MismatchReport {
    pub fn from_volumes(core_ml: f64, lesion_ml: f64, criteria: &[MismatchCriterion]) -> Self {
        MismatchReport {
            core_ml,
            lesion_ml,
            penumbra_ml: lesion_ml - core_ml,
            diff_ml: lesion_ml - core_ml,
            ratio: mismatch_ratio(core_ml, lesion_ml),
            verdicts: criteria
                .iter()
                .map(|c| (c.name.clone(), c.verdict(core_ml, lesion_ml)))
                .collect(),
            inconsistent_voxels: 0,
        }
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec![
            "core_ml".to_string(),
            "lesion_ml".into(),
            "penumbra_ml".into(),
            "diff_ml".into(),
            "ratio".into(),
            "inconsistent_voxels".into(),
        ];
        cols.extend(self.verdicts.keys().cloned());
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let ratio = match self.ratio {
            Some(r) if r.is_finite() => r.to_string(),
            Some(_) => "inf".into(),
            None => String::new(),
        };
        let mut cols = vec![
            self.core_ml.to_string(),
            self.lesion_ml.to_string(),
            self.penumbra_ml.to_string(),
            self.diff_ml.to_string(),
            ratio,
            self.inconsistent_voxels.to_string(),
        ];
        cols.extend(self.verdicts.values().map(|v| v.to_string()));
        cols.join(",")
    }
}

pub fn evaluate_mismatch(
    masks: &LesionMasks,
    criteria: &[MismatchCriterion],
) -> Result<MismatchReport> {
    for c in criteria {
        c.validate()?;
    }
    let core_ml = volume_ml(&masks.core, masks.voxel_size);
    let lesion_ml = volume_ml(&masks.perfusion_lesion, masks.voxel_size);
    let mut report = MismatchReport::from_volumes(core_ml, lesion_ml, criteria);
    report.penumbra_ml = volume_ml(&masks.penumbra, masks.voxel_size);
    report.inconsistent_voxels = masks.inconsistent_voxels;
    Ok(report)
}

/// Modified TICI recanalization grade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mtici {
    Grade0,
    Grade1,
    Grade2a,
    Grade2b,
    Grade2c,
    Grade3,
}

impl Mtici {
    pub const ALL: [Mtici; 6] = [
        Mtici::Grade0,
        Mtici::Grade1,
        Mtici::Grade2a,
        Mtici::Grade2b,
        Mtici::Grade2c,
        Mtici::Grade3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mtici::Grade0 => "0",
            Mtici::Grade1 => "1",
            Mtici::Grade2a => "2a",
            Mtici::Grade2b => "2b",
            Mtici::Grade2c => "2c",
            Mtici::Grade3 => "3",
        }
    }
}

impl fmt::Display for Mtici {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mtici {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mtici::ALL
            .into_iter()
            .find(|g| g.as_str() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidScore {
                field: "mtici",
                reason: format!("`{s}` is not one of 0, 1, 2a, 2b, 2c, 3"),
            })
    }
}

impl Serialize for Mtici {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Mtici {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Text(String),
        }
        let text = match Repr::deserialize(d)? {
            Repr::Int(i) => i.to_string(),
            Repr::Text(t) => t,
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Unvalidated clinical scores as entered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawScores {
    pub mrs: i64,
    pub nihss: i64,
    pub aspects: i64,
    pub mtici: String,
}

/// Range-checked clinical scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClinicalScores {
    /// Modified Rankin Scale, 0 (no symptoms) to 6 (dead).
    pub mrs: u8,
    /// NIH Stroke Scale, 0 to 42.
    pub nihss: u8,
    /// ASPECTS, 10 (no affected region) to 0.
    pub aspects: u8,
    pub mtici: Mtici,
}

fn in_range(field: &'static str, v: i64, hi: i64) -> Result<u8> {
    if (0..=hi).contains(&v) {
        Ok(v as u8)
    } else {
        Err(Error::InvalidScore {
            field,
            reason: format!("{v} outside [0, {hi}]"),
        })
    }
}

pub fn validate_scores(raw: &RawScores) -> Result<ClinicalScores> {
    Ok(ClinicalScores {
        mrs: in_range("mrs", raw.mrs, 6)?,
        nihss: in_range("nihss", raw.nihss, 42)?,
        aspects: in_range("aspects", raw.aspects, 10)?,
        mtici: raw.mtici.parse()?,
    })
}
