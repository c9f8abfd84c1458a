//! On-disk formats.
//!
//! A volume is a JSON header plus a raw little-endian sidecar. Samples are
//! stored x-fastest, then y, z and finally t for 4-D series. Headers carry
//! `shape` (3 or 4 extents), `voxel_size` (mm), `dtype` (`f32le` or `u8`),
//! `grid` (required for 4-D), `data_file` (sidecar name relative to the
//! header) and a free-form `meta` object.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::deconv::{IrfMap, Method};
use crate::error::{Error, Result};
use crate::grid::{Curve, TimeGrid};
use crate::phantom::{CtpSeries, Label};
use crate::volume::{Dims, Mask, Volume, VoxelSize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32le")]
    F32Le,
    #[serde(rename = "u8")]
    U8,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32Le => 4,
            Dtype::U8 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub shape: Vec<usize>,
    pub voxel_size: VoxelSize,
    pub dtype: Dtype,
    pub grid: Option<TimeGrid>,
    pub data_file: String,
    #[serde(default)]
    pub meta: BTreeMap<String, Value>,
}

impl VolumeHeader {
    pub fn dims(&self) -> Dims {
        Dims::new(self.shape[0], self.shape[1], self.shape[2])
    }

    pub fn n_values(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".tmp");
    path.with_file_name(name)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })
}

fn sidecar_name(header_path: &Path) -> String {
    let stem = header_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "volume".into());
    format!("{stem}.raw")
}

fn write_volume(header_path: &Path, mut header: VolumeHeader, payload: Vec<u8>) -> Result<()> {
    header.data_file = sidecar_name(header_path);
    let raw_path = header_path.with_file_name(&header.data_file);
    atomic_write(&raw_path, &payload)?;
    write_json(header_path, &header)
}

fn f32_payload(values: impl Iterator<Item = f64>) -> Vec<u8> {
    values.flat_map(|v| (v as f32).to_le_bytes()).collect()
}

/// Writes a scalar volume as `f32le`.
pub fn write_scalar(
    path: &Path,
    vol: &Volume<f64>,
    voxel_size: VoxelSize,
    meta: BTreeMap<String, Value>,
) -> Result<()> {
    let header = VolumeHeader {
        shape: vol.dims().as_array().to_vec(),
        voxel_size,
        dtype: Dtype::F32Le,
        grid: None,
        data_file: String::new(),
        meta,
    };
    write_volume(path, header, f32_payload(vol.as_slice().iter().copied()))
}

/// Writes a mask as `u8` 0/1.
pub fn write_mask(path: &Path, mask: &Mask, voxel_size: VoxelSize) -> Result<()> {
    let header = VolumeHeader {
        shape: mask.dims().as_array().to_vec(),
        voxel_size,
        dtype: Dtype::U8,
        grid: None,
        data_file: String::new(),
        meta: BTreeMap::new(),
    };
    write_volume(
        path,
        header,
        mask.as_slice().iter().map(|&b| u8::from(b)).collect(),
    )
}

/// Writes a label volume as `u8` codes, recording the code table in `meta`.
pub fn write_labels(path: &Path, labels: &Volume<Label>, voxel_size: VoxelSize) -> Result<()> {
    let codes: BTreeMap<String, Value> = [
        Label::Background,
        Label::White,
        Label::Gray,
        Label::Penumbra,
        Label::Core,
    ]
    .into_iter()
    .map(|l| (l.name().to_string(), Value::from(l.code())))
    .collect();
    let header = VolumeHeader {
        shape: labels.dims().as_array().to_vec(),
        voxel_size,
        dtype: Dtype::U8,
        grid: None,
        data_file: String::new(),
        meta: BTreeMap::from([(
            "labels".to_string(),
            Value::Object(codes.into_iter().collect()),
        )]),
    };
    write_volume(
        path,
        header,
        labels.as_slice().iter().map(|l| l.code()).collect(),
    )
}

fn four_d_payload(dims: Dims, n_t: usize, voxel_major: &[f64]) -> Vec<u8> {
    let n_vox = dims.len();
    f32_payload((0..n_t).flat_map(move |t| (0..n_vox).map(move |v| voxel_major[v * n_t + t])))
}

pub fn write_series(path: &Path, series: &CtpSeries, meta: BTreeMap<String, Value>) -> Result<()> {
    let g = *series.grid();
    let dims = series.dims();
    let mut shape = dims.as_array().to_vec();
    shape.push(g.n_samples);
    let header = VolumeHeader {
        shape,
        voxel_size: series.voxel_size(),
        dtype: Dtype::F32Le,
        grid: Some(g),
        data_file: String::new(),
        meta,
    };
    write_volume(
        path,
        header,
        four_d_payload(dims, g.n_samples, series.as_voxel_major()),
    )
}

pub fn write_irf(path: &Path, irf: &IrfMap) -> Result<()> {
    let g = *irf.grid();
    let dims = irf.dims();
    let mut shape = dims.as_array().to_vec();
    shape.push(g.n_samples);
    let meta = BTreeMap::from([
        ("method".to_string(), Value::from(irf.method().to_string())),
        ("lambda_rel".to_string(), Value::from(irf.lambda_rel())),
    ]);
    let header = VolumeHeader {
        shape,
        voxel_size: irf.voxel_size(),
        dtype: Dtype::F32Le,
        grid: Some(g),
        data_file: String::new(),
        meta,
    };
    write_volume(
        path,
        header,
        four_d_payload(dims, g.n_samples, irf.as_voxel_major()),
    )
}

fn header_err(path: &Path, field: &'static str, reason: impl Into<String>) -> Error {
    Error::Header {
        path: path.into(),
        field,
        reason: reason.into(),
    }
}

fn field<T: for<'de> Deserialize<'de>>(
    path: &Path,
    obj: &serde_json::Map<String, Value>,
    name: &'static str,
) -> Result<T> {
    let v = obj
        .get(name)
        .ok_or_else(|| header_err(path, name, "missing"))?;
    serde_json::from_value(v.clone()).map_err(|e| header_err(path, name, e.to_string()))
}

/// Reads and validates a volume header.
pub fn read_header(path: &Path) -> Result<VolumeHeader> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.into(),
        source: e,
    })?;
    let obj = value
        .as_object()
        .ok_or_else(|| header_err(path, "header", "not a JSON object"))?;
    let shape: Vec<usize> = field(path, obj, "shape")?;
    if !(shape.len() == 3 || shape.len() == 4) || shape.contains(&0) {
        return Err(header_err(
            path,
            "shape",
            format!("expected 3 or 4 positive extents, got {shape:?}"),
        ));
    }
    let voxel_size: VoxelSize = field(path, obj, "voxel_size")?;
    voxel_size
        .validate()
        .map_err(|e| header_err(path, "voxel_size", e.to_string()))?;
    let dtype: Dtype = field(path, obj, "dtype")?;
    let grid: Option<TimeGrid> = match obj.get("grid") {
        None | Some(Value::Null) => None,
        Some(_) => Some(field(path, obj, "grid")?),
    };
    if let Some(g) = &grid {
        g.validate()
            .map_err(|e| header_err(path, "grid", e.to_string()))?;
    }
    if shape.len() == 4 {
        let g = grid.ok_or_else(|| header_err(path, "grid", "required for 4-D volumes"))?;
        if g.n_samples != shape[3] {
            return Err(header_err(
                path,
                "grid",
                format!(
                    "n_samples {} does not match shape[3] {}",
                    g.n_samples, shape[3]
                ),
            ));
        }
    }
    let data_file: String = field(path, obj, "data_file")?;
    if data_file.is_empty() || data_file.contains(['/', '\\']) {
        return Err(header_err(path, "data_file", "must be a plain file name"));
    }
    let meta = match obj.get("meta") {
        None | Some(Value::Null) => BTreeMap::new(),
        Some(_) => field(path, obj, "meta")?,
    };
    Ok(VolumeHeader {
        shape,
        voxel_size,
        dtype,
        grid,
        data_file,
        meta,
    })
}

fn read_payload(path: &Path, header: &VolumeHeader) -> Result<Vec<u8>> {
    let raw_path = path.with_file_name(&header.data_file);
    let bytes = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let expected = header.n_values() * header.dtype.size();
    if bytes.len() != expected {
        return Err(header_err(
            path,
            "shape",
            format!(
                "expects {expected} payload bytes but {} has {}",
                raw_path.display(),
                bytes.len()
            ),
        ));
    }
    Ok(bytes)
}

fn decode_f64(header: &VolumeHeader, bytes: &[u8]) -> Vec<f64> {
    match header.dtype {
        Dtype::F32Le => bytes
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect(),
        Dtype::U8 => bytes.iter().map(|&b| f64::from(b)).collect(),
    }
}

/// Reads a 3-D volume of either dtype as `f64`.
pub fn read_scalar(path: &Path) -> Result<(Volume<f64>, VolumeHeader)> {
    let header = read_header(path)?;
    if header.shape.len() != 3 {
        return Err(header_err(path, "shape", "expected a 3-D volume"));
    }
    let bytes = read_payload(path, &header)?;
    let vol = Volume::from_vec(header.dims(), decode_f64(&header, &bytes))?;
    Ok((vol, header))
}

/// Reads a 3-D volume as a mask (non-zero is true).
pub fn read_mask(path: &Path) -> Result<(Mask, VolumeHeader)> {
    let (vol, header) = read_scalar(path)?;
    Ok((vol.map(|&v| v != 0.0), header))
}

pub fn read_labels(path: &Path) -> Result<(Volume<Label>, VolumeHeader)> {
    let header = read_header(path)?;
    if header.shape.len() != 3 || header.dtype != Dtype::U8 {
        return Err(header_err(path, "dtype", "labels must be a 3-D u8 volume"));
    }
    let bytes = read_payload(path, &header)?;
    let labels = bytes
        .iter()
        .map(|&b| {
            Label::from_code(b)
                .ok_or_else(|| header_err(path, "data_file", format!("unknown label code {b}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((Volume::from_vec(header.dims(), labels)?, header))
}

fn read_4d(path: &Path) -> Result<(VolumeHeader, Vec<f64>)> {
    let header = read_header(path)?;
    if header.shape.len() != 4 {
        return Err(header_err(path, "shape", "expected a 4-D volume"));
    }
    let bytes = read_payload(path, &header)?;
    let flat = decode_f64(&header, &bytes);
    let n_vox = header.dims().len();
    let n_t = header.shape[3];
    let mut voxel_major = vec![0.0; flat.len()];
    for t in 0..n_t {
        for v in 0..n_vox {
            voxel_major[v * n_t + t] = flat[t * n_vox + v];
        }
    }
    Ok((header, voxel_major))
}

pub fn read_series(path: &Path) -> Result<(CtpSeries, VolumeHeader)> {
    let (header, data) = read_4d(path)?;
    let grid = header.grid.expect("validated for 4-D");
    let series = CtpSeries::from_voxel_major(header.dims(), grid, header.voxel_size, data)?;
    Ok((series, header))
}

pub fn read_irf(path: &Path) -> Result<IrfMap> {
    let (header, data) = read_4d(path)?;
    let grid = header.grid.expect("validated for 4-D");
    let method: Method = header
        .meta
        .get("method")
        .and_then(Value::as_str)
        .ok_or_else(|| header_err(path, "meta", "missing `method`"))?
        .parse()
        .map_err(|e: Error| header_err(path, "meta", e.to_string()))?;
    let lambda_rel = header
        .meta
        .get("lambda_rel")
        .and_then(Value::as_f64)
        .ok_or_else(|| header_err(path, "meta", "missing `lambda_rel`"))?;
    IrfMap::from_voxel_major(
        header.dims(),
        grid,
        header.voxel_size,
        method,
        lambda_rel,
        data,
    )
}

/// Writes a curve as CSV with columns `t,value`.
pub fn write_curve_csv(path: &Path, curve: &Curve) -> Result<()> {
    let mut text = String::from("t,value\n");
    for (t, v) in curve.grid().times().zip(curve.samples()) {
        text.push_str(&format!("{t},{v}\n"));
    }
    atomic_write(path, text.as_bytes())
}

/// Reads a `t,value` CSV; the samples must be uniformly spaced.
pub fn read_curve_csv(path: &Path) -> Result<Curve> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad =
        |line: usize, why: &str| Error::param("curve", format!("{}:{line}: {why}", path.display()));
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with(|c: char| c.is_ascii_alphabetic())) {
            continue;
        }
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| bad(n + 1, "expected `t,value`"))?;
        times.push(
            t.trim()
                .parse::<f64>()
                .map_err(|_| bad(n + 1, "bad time"))?,
        );
        values.push(
            v.trim()
                .parse::<f64>()
                .map_err(|_| bad(n + 1, "bad value"))?,
        );
    }
    if times.len() < 2 {
        return Err(bad(0, "need at least two samples"));
    }
    let dt = times[1] - times[0];
    for (k, t) in times.iter().enumerate() {
        if (t - (times[0] + k as f64 * dt)).abs() > 1e-9 * dt.abs().max(1.0) {
            return Err(bad(k + 2, "samples are not uniformly spaced"));
        }
    }
    Curve::new(values, TimeGrid::new(times[0], dt, times.len())?)
}

/// Writes the axial slice `z` of a volume as an 8-bit binary PGM, linearly
/// scaled from `lo..hi` to `0..255`.
pub fn write_pgm_slice(path: &Path, vol: &Volume<f64>, z: usize, lo: f64, hi: f64) -> Result<()> {
    let d = vol.dims();
    if z >= d.nz {
        return Err(Error::param("z", format!("slice {z} out of range")));
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = format!("P5\n{} {}\n255\n", d.nx, d.ny).into_bytes();
    for y in 0..d.ny {
        for x in 0..d.nx {
            let v = (vol.get(x, y, z) - lo) / span;
            bytes.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    atomic_write(path, &bytes)
}
