//! Mean-preserving removal of negative intensities from volumetric images.
//!
//! Negative voxel values are pushed onto their neighbours through a
//! symmetric, zero-sum spread mask. The result is non-negative, has the same
//! total as the input, and uses the least total transfer that achieves that.
//!
//! ```
//! use negspread::{grid::Volume, solver::{solve, SolverConfig}, spread::make_preset};
//!
//! let x = Volume::new(&[3], vec![2.0, -1.0, 2.0]).unwrap();
//! let s = solve(&x, &make_preset("1d-2").unwrap(), &SolverConfig::default()).unwrap();
//! assert_eq!(s.y.data(), &[1.5, 0.0, 1.5]);
//! ```
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod metrics;
pub mod operator;
pub mod oracle;
pub mod phantom;
pub mod solver;
pub mod spread;

pub use error::{Error, Result};
