//! Region bias/RMSE and radial profiles, with CSV output.
//!
//! CSV columns are stable:
//! * region table: `region,count,truth,mean,bias,rmse`
//! * profile table: `radius,mean,count` (radius is the bin centre)

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{region_stats, NeumaierSum, Region, Volume};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasRmse {
    pub count: usize,
    pub mean: f64,
    /// Regional mean minus the true value.
    pub bias: f64,
    pub rmse: f64,
}

pub fn bias_rmse(v: &Volume, region: &Region, truth: f64) -> Result<BiasRmse> {
    let s = region_stats(v, region, truth)?;
    Ok(BiasRmse {
        count: s.count,
        mean: s.mean,
        bias: s.mean - truth,
        rmse: s.rmse,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Direction {
    /// Distance to the line through `center` along `axis`.
    RadialFromAxis {
        axis: usize,
    },
    RadialFromPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    /// Padded `[z, y, x]` voxel coordinates.
    pub center: [f64; 3],
    pub direction: Direction,
    pub bin_width: f64,
    pub max_radius: f64,
    /// Measure distances in the volume's spacing units instead of voxels.
    #[serde(default)]
    pub physical: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileBin {
    pub radius: f64,
    pub mean: f64,
    pub count: usize,
}

/// Mean value per distance bin `[k w, (k + 1) w)` for distances below
/// `max_radius`. Empty bins are left out.
pub fn radial_profile(v: &Volume, p: &ProfileSpec) -> Result<Vec<ProfileBin>> {
    if !(p.bin_width > 0.0 && p.bin_width.is_finite()) {
        return Err(Error::Config(format!(
            "bin width {} must be positive",
            p.bin_width
        )));
    }
    if !(p.max_radius >= 0.0) {
        return Err(Error::Config("max radius must be non-negative".into()));
    }
    if let Direction::RadialFromAxis { axis } = p.direction {
        if axis > 2 {
            return Err(Error::Config(format!("axis {axis} out of range")));
        }
    }
    let shape = v.shape();
    let mut scale = [1.0; 3];
    if p.physical {
        let sp = v.spacing();
        scale[3 - sp.len()..].copy_from_slice(sp);
    }
    let nbins = (p.max_radius / p.bin_width).ceil() as usize + 1;
    let mut sums = vec![NeumaierSum::default(); nbins];
    let mut counts = vec![0usize; nbins];
    for (i, &value) in v.data().iter().enumerate() {
        let c = shape.coords(i);
        let mut d2 = 0.0;
        for a in 0..3 {
            if matches!(p.direction, Direction::RadialFromAxis { axis } if axis == a) {
                continue;
            }
            let d = (c[a] as f64 - p.center[a]) * scale[a];
            d2 += d * d;
        }
        let d = d2.sqrt();
        if d >= p.max_radius {
            continue;
        }
        let k = (d / p.bin_width) as usize;
        sums[k].add(value);
        counts[k] += 1;
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .enumerate()
        .filter(|(_, (_, &c))| c > 0)
        .map(|(k, (s, &c))| ProfileBin {
            radius: (k as f64 + 0.5) * p.bin_width,
            mean: s.value() / c as f64,
            count: c,
        })
        .collect())
}

pub fn region_table_csv(rows: &[(String, f64, BiasRmse)]) -> String {
    let mut out = String::from("region,count,truth,mean,bias,rmse\n");
    for (name, truth, m) in rows {
        let _ = writeln!(
            out,
            "{name},{},{truth:?},{:?},{:?},{:?}",
            m.count, m.mean, m.bias, m.rmse
        );
    }
    out
}

pub fn profile_csv(bins: &[ProfileBin]) -> String {
    let mut out = String::from("radius,mean,count\n");
    for b in bins {
        let _ = writeln!(out, "{:?},{:?},{}", b.radius, b.mean, b.count);
    }
    out
}
