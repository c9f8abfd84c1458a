//! Time-dependent infarct growth from a CBF field.
//!
//! Each voxel carries a damage fraction, the integral of
//! `1 / survival_time(cbf(t))` over time since onset; it becomes core once
//! the fraction reaches 1 and never recovers. A treatment event replaces the
//! voxel's flow at the time to treatment by a partial restoration towards
//! its normal flow; the damage accumulated so far carries over.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::triage::{volume_ml, Mtici};
use crate::volume::{ensure_same_dims, Mask, Volume, VoxelSize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    /// Survival time log-linear in CBF between the two anchors.
    #[default]
    LogLinear,
}

/// Survival time as a function of CBF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurvivalModel {
    /// At or above this flow tissue survives indefinitely (ml/100g/min).
    pub cbf_upper: f64,
    /// At or below this flow tissue dies after `t_lower` (ml/100g/min).
    pub cbf_lower: f64,
    /// Minutes.
    pub t_lower: f64,
    /// Survival just below `cbf_upper`, minutes.
    pub t_upper: f64,
    pub interpolation: Interpolation,
}

impl Default for SurvivalModel {
    fn default() -> Self {
        SurvivalModel {
            cbf_upper: 15.0,
            cbf_lower: 10.0,
            t_lower: 30.0,
            t_upper: 150.0,
            interpolation: Interpolation::LogLinear,
        }
    }
}

impl SurvivalModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.cbf_lower.is_finite()
            && self.cbf_upper.is_finite()
            && self.cbf_lower < self.cbf_upper)
        {
            return Err(Error::InvalidModel(format!(
                "need cbf_lower < cbf_upper, got {} and {}",
                self.cbf_lower, self.cbf_upper
            )));
        }
        if !(self.t_lower > 0.0 && self.t_upper.is_finite() && self.t_lower < self.t_upper) {
            return Err(Error::InvalidModel(format!(
                "need 0 < t_lower < t_upper, got {} and {}",
                self.t_lower, self.t_upper
            )));
        }
        Ok(())
    }

    /// Minutes until irreversible damage at constant `cbf`; infinite at or above `cbf_upper`.
    pub fn survival_time(&self, cbf: f64) -> f64 {
        if cbf >= self.cbf_upper {
            f64::INFINITY
        } else if cbf <= self.cbf_lower {
            self.t_lower
        } else {
            let w = (cbf - self.cbf_lower) / (self.cbf_upper - self.cbf_lower);
            let (lo, hi) = (self.t_lower.ln(), self.t_upper.ln());
            (lo + w * (hi - lo)).exp()
        }
    }

    /// Damage accrued per minute, `1 / survival_time`.
    fn damage_rate(&self, cbf: f64) -> f64 {
        let s = self.survival_time(cbf);
        if s.is_finite() {
            1.0 / s
        } else {
            0.0
        }
    }
}

pub fn survival_time(cbf: f64, model: &SurvivalModel) -> f64 {
    model.survival_time(cbf)
}

/// Fraction of the flow deficit restored for each mTICI grade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReperfusionTable(BTreeMap<Mtici, f64>);

impl Default for ReperfusionTable {
    fn default() -> Self {
        ReperfusionTable(BTreeMap::from([
            (Mtici::Grade0, 0.0),
            (Mtici::Grade1, 0.1),
            (Mtici::Grade2a, 0.4),
            (Mtici::Grade2b, 0.7),
            (Mtici::Grade2c, 0.9),
            (Mtici::Grade3, 1.0),
        ]))
    }
}

impl ReperfusionTable {
    pub fn new(fractions: BTreeMap<Mtici, f64>) -> Result<Self> {
        let t = ReperfusionTable(fractions);
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        for g in Mtici::ALL {
            let f = *self
                .0
                .get(&g)
                .ok_or_else(|| Error::InvalidEvent(format!("reperfusion table lacks grade {g}")))?;
            if !(0.0..=1.0).contains(&f) || f < prev {
                return Err(Error::InvalidEvent(format!(
                    "reperfusion fractions must be non-decreasing in [0, 1]; grade {g} has {f}"
                )));
            }
            prev = f;
        }
        Ok(())
    }

    pub fn fraction(&self, grade: Mtici) -> f64 {
        self.0.get(&grade).copied().unwrap_or(0.0)
    }
}

/// Treatment at `ttt` minutes after onset achieving grade `mtici`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentEvent {
    pub ttt: f64,
    pub mtici: Mtici,
    #[serde(default)]
    pub reperfusion: ReperfusionTable,
}

impl TreatmentEvent {
    pub fn new(ttt: f64, mtici: Mtici) -> Self {
        TreatmentEvent {
            ttt,
            mtici,
            reperfusion: ReperfusionTable::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ttt.is_finite() && self.ttt >= 0.0) {
            return Err(Error::InvalidEvent(format!(
                "ttt must be >= 0, got {}",
                self.ttt
            )));
        }
        self.reperfusion.validate()
    }

    /// Flow after treatment. Treatment never lowers flow.
    pub fn restored_cbf(&self, cbf: f64, normal: f64) -> f64 {
        cbf + self.reperfusion.fraction(self.mtici) * (normal - cbf).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProgressionState {
    pub core_mask: Mask,
    /// Minutes since onset.
    pub t: f64,
}

/// Cumulative damage fraction of a single voxel at time `t`.
pub fn damage(
    cbf: f64,
    normal: f64,
    model: &SurvivalModel,
    t: f64,
    event: Option<&TreatmentEvent>,
) -> f64 {
    let before = model.damage_rate(cbf);
    match event {
        None => t * before,
        Some(ev) => {
            let after = model.damage_rate(ev.restored_cbf(cbf, normal));
            ev.ttt * before + (t - ev.ttt) * after
        }
    }
}

/// Core mask at `t` minutes. Tissue is where `normal_cbf_map > 0`.
pub fn evolve(
    cbf_map: &Volume<f64>,
    model: &SurvivalModel,
    t: f64,
    event: Option<&TreatmentEvent>,
    normal_cbf_map: &Volume<f64>,
) -> Result<ProgressionState> {
    model.validate()?;
    ensure_same_dims(cbf_map.dims(), normal_cbf_map.dims())?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::param("t", format!("must be >= 0, got {t}")));
    }
    if let Some(ev) = event {
        ev.validate()?;
        if ev.ttt > t {
            return Err(Error::InvalidEvent(format!(
                "treatment at {} min is after the evaluation time {t} min",
                ev.ttt
            )));
        }
    }
    let core_mask = cbf_map.zip_map(normal_cbf_map, |&cbf, &normal| {
        normal > 0.0 && damage(cbf.max(0.0), normal, model, t, event) >= 1.0
    })?;
    Ok(ProgressionState { core_mask, t })
}

/// Core volume at each time. Before the treatment time the event has no effect.
pub fn trajectory(
    cbf_map: &Volume<f64>,
    model: &SurvivalModel,
    times: &[f64],
    event: Option<&TreatmentEvent>,
    normal_cbf_map: &Volume<f64>,
    voxel_size: VoxelSize,
) -> Result<Vec<(f64, f64)>> {
    times
        .iter()
        .map(|&t| {
            let ev = event.filter(|e| e.ttt <= t);
            let state = evolve(cbf_map, model, t, ev, normal_cbf_map)?;
            Ok((t, volume_ml(&state.core_mask, voxel_size)))
        })
        .collect()
}

/// Follow-up infarct: the acute core for reperfusers, core plus lesion otherwise.
pub fn final_infarct(acute_core: &Mask, acute_lesion: &Mask, reperfused: bool) -> Result<Mask> {
    ensure_same_dims(acute_core.dims(), acute_lesion.dims())?;
    if reperfused {
        Ok(acute_core.clone())
    } else {
        acute_core.or(acute_lesion)
    }
}
