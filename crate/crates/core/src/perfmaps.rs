//! Perfusion parameter maps derived from the irf map and the raw series.

use crate::deconv::IrfMap;
use crate::error::{Error, Result};
use crate::grid::{argmax_earliest, trapezoid, Curve};
use crate::phantom::{CtpSeries, CBF_UNIT_FACTOR};
use crate::volume::{ensure_same_dims, Dims, Mask, Volume, VoxelSize};

/// CBF below which MTT is not computed, ml/100g/min.
pub const MTT_CBF_EPSILON: f64 = 0.01;

/// Derived parameter volumes. `rcbf`, `rcbv` and `delay` are optional because
/// they depend on a reference region or a separate derivation step.
#[derive(Debug, Clone, PartialEq)]
pub struct PerfusionMaps {
    pub voxel_size: VoxelSize,
    /// Voxels that may be segmented.
    pub brain: Mask,
    /// Seconds.
    pub tmax: Volume<f64>,
    /// ml/100g/min.
    pub cbf: Volume<f64>,
    /// ml/100g.
    pub cbv: Volume<f64>,
    /// Seconds; 0 where `mtt_valid` is false.
    pub mtt: Volume<f64>,
    pub mtt_valid: Mask,
    pub rcbf: Option<Volume<f64>>,
    pub rcbv: Option<Volume<f64>>,
    /// Irf onset lag, seconds.
    pub delay: Option<Volume<f64>>,
}

impl PerfusionMaps {
    /// Computes tmax, CBF, CBV, MTT and the delay-time map.
    pub fn derive(irf: &IrfMap, series: &CtpSeries, aif: &Curve, brain: &Mask) -> Result<Self> {
        ensure_same_dims(irf.dims(), series.dims())?;
        ensure_same_dims(brain.dims(), series.dims())?;
        let cbf = cbf_map(irf);
        let cbv = cbv_map(series, aif)?;
        let (mtt, mtt_valid) = mtt_map(&cbf, &cbv)?;
        Ok(PerfusionMaps {
            voxel_size: series.voxel_size(),
            brain: brain.clone(),
            tmax: tmax_map(irf),
            cbf,
            cbv,
            mtt,
            mtt_valid,
            rcbf: None,
            rcbv: None,
            delay: Some(delay_map(irf)),
        })
    }

    pub fn dims(&self) -> Dims {
        self.cbf.dims()
    }
}

/// Time of the irf maximum relative to the start of the irf grid; earliest sample wins ties.
pub fn tmax_map(irf: &IrfMap) -> Volume<f64> {
    let dt = irf.grid().dt;
    let data = irf
        .irfs()
        .map(|r| argmax_earliest(r).0 as f64 * dt)
        .collect();
    Volume::from_vec(irf.dims(), data).expect("one value per voxel")
}

/// `6000 * max_t irf`, clamped at zero.
pub fn cbf_map(irf: &IrfMap) -> Volume<f64> {
    let data = irf
        .irfs()
        .map(|r| (argmax_earliest(r).1 * CBF_UNIT_FACTOR).max(0.0))
        .collect();
    Volume::from_vec(irf.dims(), data).expect("one value per voxel")
}

/// `100 * ∫TCC / ∫AIF` by the trapezoid rule, clamped at zero.
pub fn cbv_map(series: &CtpSeries, aif: &Curve) -> Result<Volume<f64>> {
    series
        .grid()
        .ensure_matches(aif.grid(), "series grid vs AIF grid")?;
    let aif_area = aif.trapezoid_integral();
    if !(aif_area > 0.0) {
        return Err(Error::UnusableAif(format!(
            "AIF integral must be positive, got {aif_area}"
        )));
    }
    let dt = series.grid().dt;
    let data = series
        .curves()
        .map(|c| (100.0 * trapezoid(c, dt) / aif_area).max(0.0))
        .collect();
    Volume::from_vec(series.dims(), data)
}

/// Central volume principle `mtt = 60 * cbv / cbf`. Voxels with
/// `cbf <= MTT_CBF_EPSILON` are stored as 0 and flagged invalid.
pub fn mtt_map(cbf: &Volume<f64>, cbv: &Volume<f64>) -> Result<(Volume<f64>, Mask)> {
    let valid = cbf.map(|&f| f > MTT_CBF_EPSILON);
    let mtt = cbf.zip_map(cbv, |&f, &v| {
        if f > MTT_CBF_EPSILON {
            60.0 * v / f
        } else {
            0.0
        }
    })?;
    Ok((mtt, valid))
}

/// Leading edge of the irf: time of the first sample reaching half the
/// maximum. For a delayed residue this is the bolus delay relative to the AIF.
pub fn delay_map(irf: &IrfMap) -> Volume<f64> {
    let dt = irf.grid().dt;
    let data = irf
        .irfs()
        .map(|r| {
            let (_, peak) = argmax_earliest(r);
            if peak > 0.0 {
                r.iter().position(|&v| v >= 0.5 * peak).unwrap_or(0) as f64 * dt
            } else {
                0.0
            }
        })
        .collect();
    Volume::from_vec(irf.dims(), data).expect("one value per voxel")
}

/// Median of the masked values; the mean of the two middle values for even counts.
pub fn masked_median(values: &Volume<f64>, mask: &Mask) -> Result<f64> {
    ensure_same_dims(values.dims(), mask.dims())?;
    let mut v: Vec<f64> = mask.indices().map(|i| values[i]).collect();
    if v.is_empty() {
        return Err(Error::InvalidReference("reference mask is empty".into()));
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Normalises CBF and CBV by their medians over the reference region.
pub fn relative_maps(maps: &PerfusionMaps, reference_mask: &Mask) -> Result<PerfusionMaps> {
    let ref_cbf = masked_median(&maps.cbf, reference_mask)?;
    let ref_cbv = masked_median(&maps.cbv, reference_mask)?;
    if !(ref_cbf > 0.0) {
        return Err(Error::InvalidReference(format!(
            "median reference CBF must be > 0, got {ref_cbf}"
        )));
    }
    if !(ref_cbv > 0.0) {
        return Err(Error::InvalidReference(format!(
            "median reference CBV must be > 0, got {ref_cbv}"
        )));
    }
    let mut out = maps.clone();
    out.rcbf = Some(maps.cbf.map(|v| v / ref_cbf));
    out.rcbv = Some(maps.cbv.map(|v| v / ref_cbv));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deconv::Method;
    use crate::grid::TimeGrid;

    fn irf_map(curves: &[Vec<f64>]) -> IrfMap {
        let n = curves[0].len();
        IrfMap::from_voxel_major(
            Dims::new(curves.len(), 1, 1),
            TimeGrid::new(0.0, 2.0, n).unwrap(),
            VoxelSize::default(),
            Method::Csvd,
            0.1,
            curves.concat(),
        )
        .unwrap()
    }

    fn maps_1d(cbf: Vec<f64>, cbv: Vec<f64>) -> PerfusionMaps {
        let d = Dims::new(cbf.len(), 1, 1);
        let cbf = Volume::from_vec(d, cbf).unwrap();
        let cbv = Volume::from_vec(d, cbv).unwrap();
        let (mtt, mtt_valid) = mtt_map(&cbf, &cbv).unwrap();
        PerfusionMaps {
            voxel_size: VoxelSize::default(),
            brain: Mask::filled(d, true),
            tmax: Volume::filled(d, 0.0),
            cbf,
            cbv,
            mtt,
            mtt_valid,
            rcbf: None,
            rcbv: None,
            delay: None,
        }
    }

    #[test]
    fn tmax_of_impulse_and_zero() {
        let mut imp = vec![0.0; 10];
        imp[3] = 1.0;
        let m = irf_map(&[imp.clone(), vec![0.0; 10]]);
        let t = tmax_map(&m);
        assert_eq!(t[0], 6.0);
        assert_eq!(t[1], 0.0);
        let scaled = irf_map(&[imp.iter().map(|v| v * 7.5).collect(), vec![0.0; 10]]);
        assert_eq!(tmax_map(&scaled), t);
    }

    #[test]
    fn cbf_scales_and_clamps() {
        let mut r = vec![0.0; 10];
        r[1] = 80.0 / 6000.0;
        let m = irf_map(&[
            r.clone(),
            r.iter().map(|v| v * 2.0).collect(),
            vec![-1.0; 10],
            vec![0.0; 10],
        ]);
        let c = cbf_map(&m);
        assert!((c[0] - 80.0).abs() < 1e-12);
        assert!((c[1] - 160.0).abs() < 1e-12);
        assert_eq!(c[2], 0.0);
        assert_eq!(c[3], 0.0);
    }

    #[test]
    fn cbv_of_aif_itself_is_100() {
        let g = TimeGrid::default_acquisition();
        let aif = crate::phantom::AifParams::default().curve(&g).unwrap();
        let s = CtpSeries::from_voxel_major(
            Dims::new(2, 1, 1),
            g,
            VoxelSize::default(),
            [aif.samples().to_vec(), vec![0.0; 30]].concat(),
        )
        .unwrap();
        let v = cbv_map(&s, &aif).unwrap();
        assert!((v[0] - 100.0).abs() < 1e-12);
        assert_eq!(v[1], 0.0);
        assert!(cbv_map(&s, &Curve::zeros(g)).is_err());
    }

    #[test]
    fn mtt_arithmetic_and_guard() {
        let m = maps_1d(vec![80.0, 20.0, 0.005], vec![4.0, 2.0, 1.0]);
        assert!((m.mtt[0] - 3.0).abs() < 1e-12);
        assert!((m.mtt[1] - 6.0).abs() < 1e-12);
        assert_eq!(m.mtt[2], 0.0);
        assert_eq!(m.mtt_valid.as_slice(), &[true, true, false]);
    }

    #[test]
    fn relative_to_self_and_to_white_matter() {
        let m = maps_1d(vec![80.0, 20.0, 5.0], vec![4.0, 2.0, 1.0]);
        let d = m.dims();
        let own = Mask::from_vec(d, vec![true, false, false]).unwrap();
        assert_eq!(relative_maps(&m, &own).unwrap().rcbf.unwrap()[0], 1.0);
        let white = Mask::from_vec(d, vec![false, true, false]).unwrap();
        let r = relative_maps(&m, &white).unwrap();
        let rcbf = r.rcbf.unwrap();
        assert_eq!(rcbf[0], 4.0);
        assert_eq!(rcbf[2], 0.25);
        assert_eq!(r.cbf, m.cbf);
    }

    #[test]
    fn relative_maps_reject_bad_reference() {
        let m = maps_1d(vec![0.0, 20.0], vec![0.0, 2.0]);
        let d = m.dims();
        assert!(relative_maps(&m, &Mask::filled(d, false)).is_err());
        let zero = Mask::from_vec(d, vec![true, false]).unwrap();
        assert!(matches!(
            relative_maps(&m, &zero),
            Err(Error::InvalidReference(_))
        ));
    }

    #[test]
    fn median_even_and_odd() {
        let d = Dims::new(4, 1, 1);
        let v = Volume::from_vec(d, vec![4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(masked_median(&v, &Mask::filled(d, true)).unwrap(), 2.5);
        let m = Mask::from_vec(d, vec![true, true, true, false]).unwrap();
        assert_eq!(masked_median(&v, &m).unwrap(), 3.0);
    }

    #[test]
    fn delay_is_irf_leading_edge() {
        let mut r = vec![0.0; 12];
        r[4] = 1.0;
        r[5] = 1.0;
        r[6] = 0.5;
        let m = irf_map(&[r, vec![0.0; 12]]);
        let d = delay_map(&m);
        assert_eq!(d[0], 8.0);
        assert_eq!(d[1], 0.0);
    }
}
