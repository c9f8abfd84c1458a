//! Dense 3-D voxel volumes stored x-fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spatial extent in voxels along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub const fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Linear index with x varying fastest.
    #[inline]
    pub const fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub const fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let x = idx % self.nx;
        let y = (idx / self.nx) % self.ny;
        let z = idx / (self.nx * self.ny);
        (x, y, z)
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }
}

impl From<[usize; 3]> for Dims {
    fn from(a: [usize; 3]) -> Self {
        Dims::new(a[0], a[1], a[2])
    }
}

/// Physical voxel edge lengths in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoxelSize(pub [f64; 3]);

impl Default for VoxelSize {
    fn default() -> Self {
        VoxelSize([2.0, 2.0, 2.0])
    }
}

impl VoxelSize {
    pub fn validate(&self) -> Result<()> {
        if self.0.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::param(
                "voxel_size",
                format!("all components must be > 0, got {:?}", self.0),
            ))
        }
    }

    /// Volume of one voxel in millilitres (mm^3 / 1000).
    pub fn voxel_ml(&self) -> f64 {
        self.0.iter().product::<f64>() / 1000.0
    }
}

/// A dense scalar volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    dims: Dims,
    data: Vec<T>,
}

/// Boolean voxel mask.
pub type Mask = Volume<bool>;

impl<T: Clone> Volume<T> {
    pub fn filled(dims: Dims, value: T) -> Self {
        Volume {
            dims,
            data: vec![value; dims.len()],
        }
    }
}

impl<T> Volume<T> {
    pub fn from_vec(dims: Dims, data: Vec<T>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Volume { dims, data })
    }

    pub fn from_fn(dims: Dims, f: impl FnMut(usize) -> T) -> Self {
        Volume {
            dims,
            data: (0..dims.len()).map(f).collect(),
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> &T {
        &self.data[self.dims.index(x, y, z)]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Volume<U> {
        Volume {
            dims: self.dims,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn zip_map<U, V>(
        &self,
        other: &Volume<U>,
        mut f: impl FnMut(&T, &U) -> V,
    ) -> Result<Volume<V>> {
        ensure_same_dims(self.dims, other.dims)?;
        Ok(Volume {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(a, b))
                .collect(),
        })
    }
}

impl<T> std::ops::Index<usize> for Volume<T> {
    type Output = T;
    fn index(&self, idx: usize) -> &T {
        &self.data[idx]
    }
}

impl<T> std::ops::IndexMut<usize> for Volume<T> {
    fn index_mut(&mut self, idx: usize) -> &mut T {
        &mut self.data[idx]
    }
}

impl Mask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn and(&self, other: &Mask) -> Result<Mask> {
        self.zip_map(other, |a, b| *a && *b)
    }

    pub fn or(&self, other: &Mask) -> Result<Mask> {
        self.zip_map(other, |a, b| *a || *b)
    }

    pub fn and_not(&self, other: &Mask) -> Result<Mask> {
        self.zip_map(other, |a, b| *a && !*b)
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.dims == other.dims && self.data.iter().zip(&other.data).all(|(a, b)| !*a || *b)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }
}

pub(crate) fn ensure_same_dims(a: Dims, b: Dims) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// Sørensen–Dice overlap of two masks; two empty masks score 1.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    ensure_same_dims(a.dims(), b.dims())?;
    let inter = a.and(b)?.count();
    let total = a.count() + b.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}
