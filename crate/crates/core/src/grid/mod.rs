//! Voxel grids, regions and the reductions shared by the other modules.
//!
//! Storage is a flat row-major buffer with the last axis fastest. A volume
//! with one or two axes is viewed internally as a 3-axis grid whose leading
//! extents are 1, so `[n]` behaves like `[1, 1, n]` and `[ny, nx]` like
//! `[1, ny, nx]`.

mod io;
mod region;

pub use io::{read_volume, read_volume_csv, write_volume, write_volume_csv, VolumeMeta};
pub use region::{
    labels_to_regions, read_label_volume, read_regions_text, region_stats, regions_to_labels,
    write_label_volume, write_regions_text, Region, RegionStats,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extents of a grid padded to three axes, `[nz, ny, nx]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape([usize; 3]);

impl Shape {
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 || dims.contains(&0) {
            return Err(Error::InvalidDims(dims.to_vec()));
        }
        let mut ext = [1usize; 3];
        ext[3 - dims.len()..].copy_from_slice(dims);
        Ok(Shape(ext))
    }

    pub fn extents(&self) -> [usize; 3] {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0[0] * self.0[1] * self.0[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn flat(&self, z: usize, y: usize, x: usize) -> usize {
        (z * self.0[1] + y) * self.0[2] + x
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.0[2];
        let rest = index / self.0[2];
        [rest / self.0[1], rest % self.0[1], x]
    }

    /// Flat index of `index + offset`, or `None` when it leaves the grid.
    #[inline]
    pub fn shifted(&self, index: usize, offset: [i32; 3]) -> Option<usize> {
        let c = self.coords(index);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let v = c[a] as i64 + offset[a] as i64;
            if v < 0 || v >= self.0[a] as i64 {
                return None;
            }
            out[a] = v as usize;
        }
        Some(self.flat(out[0], out[1], out[2]))
    }
}

/// A real-valued image on a regular grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Volume {
    dims: Vec<usize>,
    spacing: Vec<f64>,
    data: Vec<f64>,
    units: String,
}

impl Volume {
    /// Builds a volume with unit spacing and no units label.
    pub fn new(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        Self::with_metadata(dims, vec![1.0; dims.len()], data, String::new())
    }

    pub fn with_metadata(
        dims: &[usize],
        spacing: Vec<f64>,
        data: Vec<f64>,
        units: String,
    ) -> Result<Self> {
        let shape = Shape::from_dims(dims)?;
        if spacing.len() != dims.len() || spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Metadata(format!(
                "spacing {spacing:?} must hold one positive value per axis"
            )));
        }
        if data.len() != shape.len() {
            return Err(Error::SizeMismatch {
                expected: shape.len(),
                actual: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Volume {
            dims: dims.to_vec(),
            spacing,
            data,
            units,
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let n = Shape::from_dims(dims)?.len();
        Self::new(dims, vec![0.0; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn units(&self) -> &str {
        &self.units
    }

    pub fn shape(&self) -> Shape {
        Shape::from_dims(&self.dims).expect("dims validated at construction")
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Mutable access for in-crate kernels that keep values finite.
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Same grid and metadata, different values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::with_metadata(&self.dims, self.spacing.clone(), data, self.units.clone())
    }

    pub fn sum(&self) -> f64 {
        sum(self.data.iter().copied())
    }

    pub fn abs_sum(&self) -> f64 {
        sum(self.data.iter().map(|v| v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Neumaier-compensated sum, accumulated strictly in iteration order.
///
/// The order is fixed, so the same inputs always give the same bits on a
/// given platform.
pub fn sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = NeumaierSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
