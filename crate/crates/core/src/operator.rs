//! The transfer operator: scattering a map of transfer coefficients through
//! the spread mask.
//!
//! Column `i` of the operator is the effective mask of voxel `i` placed on
//! the grid, so every column sums to zero and applying it never changes the
//! image total. The operator is only materialized by [`assemble_dense`],
//! which exists for small reference problems.
//!
//! Update order is fixed: sites in increasing flat index, and within a site
//! the taps in the mask's stored order.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Shape, Volume};
use crate::spread::{BoundaryPolicy, SpreadMask, Stencil};

/// Largest grid [`assemble_dense`] accepts.
pub const DENSE_CAP: usize = 4096;

/// Non-negative transfer coefficients, one per voxel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMap {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl TransferMap {
    pub fn new(dims: &[usize], data: Vec<f64>) -> Result<Self> {
        let shape = Shape::from_dims(dims)?;
        if data.len() != shape.len() {
            return Err(Error::SizeMismatch {
                expected: shape.len(),
                actual: data.len(),
            });
        }
        for (index, &value) in data.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if value < 0.0 {
                return Err(Error::NegativeTransfer { index, value });
            }
        }
        Ok(TransferMap {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let n = Shape::from_dims(dims)?.len();
        Ok(TransferMap {
            dims: dims.to_vec(),
            data: vec![0.0; n],
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Sum of the coefficients, i.e. the L1 norm.
    pub fn total(&self) -> f64 {
        crate::grid::sum(self.data.iter().copied())
    }

    pub fn support_size(&self) -> usize {
        self.data.iter().filter(|&&a| a > 0.0).count()
    }

    pub fn into_volume(self) -> Volume {
        Volume::new(&self.dims, self.data).expect("transfer map is a valid volume")
    }

    pub(crate) fn from_raw(dims: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert!(data.iter().all(|a| *a >= 0.0));
        TransferMap { dims, data }
    }
}

/// Computes `H alpha`.
pub fn apply(mask: &SpreadMask, alpha: &TransferMap, policy: BoundaryPolicy) -> Result<Volume> {
    let shape = Shape::from_dims(alpha.dims())?;
    let stencil = Stencil::new(mask, shape, policy)?;
    let mut out = vec![0.0; shape.len()];
    for (i, &a) in alpha.data().iter().enumerate() {
        if a != 0.0 {
            scatter(&stencil, &mut out, i, a)?;
        }
    }
    Volume::new(alpha.dims(), out)
}

/// Raises voxel `index` of `y` by `delta` (times the centre weight) and
/// lowers its neighbours through the effective mask.
pub fn scatter_site(
    y: &mut Volume,
    mask: &SpreadMask,
    index: usize,
    delta: f64,
    policy: BoundaryPolicy,
) -> Result<()> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::NegativeTransfer {
            index,
            value: delta,
        });
    }
    let shape = y.shape();
    if index >= shape.len() {
        return Err(Error::Config(format!("voxel {index} outside the grid")));
    }
    if delta == 0.0 {
        return Ok(());
    }
    let stencil = Stencil::new(mask, shape, policy)?;
    scatter(&stencil, y.data_mut(), index, delta)
}

/// Hot-loop form of [`scatter_site`] on a prepared stencil.
#[inline]
pub(crate) fn scatter(stencil: &Stencil, y: &mut [f64], index: usize, delta: f64) -> Result<()> {
    stencil.for_each(index, |j, w| y[j] += delta * w)
}

/// The explicit operator matrix, for grids of at most [`DENSE_CAP`] voxels.
pub fn assemble_dense(
    mask: &SpreadMask,
    dims: &[usize],
    policy: BoundaryPolicy,
) -> Result<DMatrix<f64>> {
    let shape = Shape::from_dims(dims)?;
    let n = shape.len();
    if n > DENSE_CAP {
        return Err(Error::TooLarge {
            voxels: n,
            cap: DENSE_CAP,
        });
    }
    let stencil = Stencil::new(mask, shape, policy)?;
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        stencil.for_each(i, |j, w| h[(j, i)] += w)?;
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spread::make_preset;

    #[test]
    fn zero_map_gives_zero_image() {
        let m = make_preset("2d-8").unwrap();
        let a = TransferMap::zeros(&[4, 5]).unwrap();
        let out = apply(&m, &a, BoundaryPolicy::Renormalize).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_unit_transfer_reproduces_the_mask() {
        let m = make_preset("1d-2").unwrap();
        let a = TransferMap::new(&[3], vec![0.0, 1.0, 0.0]).unwrap();
        let out = apply(&m, &a, BoundaryPolicy::Renormalize).unwrap();
        assert_eq!(out.data(), &[-0.5, 1.0, -0.5]);
    }

    #[test]
    fn scatter_one_site() {
        let m = make_preset("1d-2").unwrap();
        let mut y = Volume::new(&[3], vec![2.0, -1.0, 2.0]).unwrap();
        scatter_site(&mut y, &m, 1, 1.0, BoundaryPolicy::Renormalize).unwrap();
        assert_eq!(y.data(), &[1.5, 0.0, 1.5]);
        let before = y.clone();
        scatter_site(&mut y, &m, 0, 0.0, BoundaryPolicy::Reject).unwrap();
        assert_eq!(y, before);
        assert!(matches!(
            scatter_site(&mut y, &m, 0, 1.0, BoundaryPolicy::Reject),
            Err(Error::BoundaryReject { index: 0 })
        ));
        assert!(scatter_site(&mut y, &m, 0, -1.0, BoundaryPolicy::Renormalize).is_err());
    }

    #[test]
    fn dense_line_of_three() {
        let m = make_preset("1d-2").unwrap();
        let h = assemble_dense(&m, &[3], BoundaryPolicy::Renormalize).unwrap();
        #[rustfmt::skip]
        let want = DMatrix::from_row_slice(3, 3, &[
             1.0, -0.5,  0.0,
            -1.0,  1.0, -1.0,
             0.0, -0.5,  1.0,
        ]);
        assert_eq!(h, want);
        for c in 0..3 {
            assert!(h.column(c).sum().abs() <= 1e-14);
        }
        let ones = nalgebra::DVector::from_element(3, 1.0);
        assert!((&h * ones).sum().abs() <= 1e-14);
    }

    #[test]
    fn dense_cap() {
        let m = make_preset("3d-6").unwrap();
        assert!(matches!(
            assemble_dense(&m, &[17, 16, 16], BoundaryPolicy::Renormalize),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn transfer_map_rejects_negatives() {
        assert!(matches!(
            TransferMap::new(&[2], vec![0.0, -1e-3]),
            Err(Error::NegativeTransfer { index: 1, .. })
        ));
    }
}
