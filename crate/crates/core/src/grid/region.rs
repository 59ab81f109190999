use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io::{read_volume_with_meta, write_volume_with_meta, VolumeMeta};
use super::{NeumaierSum, Volume};
use crate::error::{Error, Result};

/// A named set of flat voxel indices, stored strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    name: String,
    indices: Vec<usize>,
}

impl Region {
    /// Sorts and checks `indices` against a grid of `len` voxels.
    /// Duplicates are an error.
    pub fn new(name: impl Into<String>, mut indices: Vec<usize>, len: usize) -> Result<Self> {
        let name = name.into();
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidRegion {
                name,
                reason: "duplicate index".into(),
            });
        }
        if let Some(&last) = indices.last() {
            if last >= len {
                return Err(Error::InvalidRegion {
                    name,
                    reason: format!("index {last} out of bounds for {len} voxels"),
                });
            }
        }
        Ok(Region { name, indices })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    fn check_against(&self, v: &Volume) -> Result<()> {
        match self.indices.last() {
            Some(&last) if last >= v.len() => Err(Error::InvalidRegion {
                name: self.name.clone(),
                reason: format!("index {last} out of bounds for {} voxels", v.len()),
            }),
            None => Err(Error::EmptyRegion(self.name.clone())),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionStats {
    pub count: usize,
    pub mean: f64,
    /// Root mean square deviation from the reference constant.
    pub rmse: f64,
}

/// Mean over the region and RMSE against the constant `reference`.
pub fn region_stats(v: &Volume, r: &Region, reference: f64) -> Result<RegionStats> {
    r.check_against(v)?;
    let data = v.data();
    let mut s = NeumaierSum::default();
    let mut sq = NeumaierSum::default();
    for &i in r.indices() {
        s.add(data[i]);
        let d = data[i] - reference;
        sq.add(d * d);
    }
    let n = r.len() as f64;
    Ok(RegionStats {
        count: r.len(),
        mean: s.value() / n,
        rmse: (sq.value() / n).sqrt(),
    })
}

/// Text form: a `region <name>` header line followed by whitespace-separated
/// flat indices on any number of lines. `#` starts a comment line.
pub fn write_regions_text(regions: &[Region], path: &Path) -> Result<()> {
    let mut out = String::new();
    for r in regions {
        out.push_str("region ");
        out.push_str(r.name());
        out.push('\n');
        for chunk in r.indices().chunks(16) {
            let line: Vec<String> = chunk.iter().map(|i| i.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_regions_text(path: &Path, len: usize) -> Result<Vec<Region>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pending: Vec<(String, Vec<usize>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix("region ") {
            pending.push((name.trim().to_string(), Vec::new()));
            continue;
        }
        let Some((_, indices)) = pending.last_mut() else {
            return Err(Error::Parse(format!(
                "{}:{}: indices before any `region` header",
                path.display(),
                lineno + 1
            )));
        };
        for tok in line.split_whitespace() {
            let i = tok.parse().map_err(|_| {
                Error::Parse(format!(
                    "{}:{}: bad index `{tok}`",
                    path.display(),
                    lineno + 1
                ))
            })?;
            indices.push(i);
        }
    }
    pending
        .into_iter()
        .map(|(name, idx)| Region::new(name, idx, len))
        .collect()
}

/// Label volume with region `k` (0-based in `regions`) stored as value `k + 1`;
/// voxels in no region are 0. Regions must be disjoint.
pub fn regions_to_labels(
    dims: &[usize],
    regions: &[Region],
) -> Result<(Volume, BTreeMap<u32, String>)> {
    let mut labels = Volume::zeros(dims)?;
    let n = labels.len();
    let mut names = BTreeMap::new();
    let data = labels.data_mut();
    for (k, r) in regions.iter().enumerate() {
        let id = k as u32 + 1;
        for &i in r.indices() {
            if i >= n {
                return Err(Error::InvalidRegion {
                    name: r.name().into(),
                    reason: format!("index {i} out of bounds"),
                });
            }
            if data[i] != 0.0 {
                return Err(Error::InvalidRegion {
                    name: r.name().into(),
                    reason: format!("voxel {i} already labelled"),
                });
            }
            data[i] = id as f64;
        }
        names.insert(id, r.name().to_string());
    }
    Ok((labels, names))
}

/// Inverse of [`regions_to_labels`]. Label values must be non-negative
/// integers; ids without a name are called `label<id>`. Unlabelled voxels
/// (value 0) are skipped.
pub fn labels_to_regions(labels: &Volume, names: &BTreeMap<u32, String>) -> Result<Vec<Region>> {
    let mut groups: BTreeMap<u32, Vec<usize>> = names.keys().map(|&k| (k, Vec::new())).collect();
    for (i, &v) in labels.data().iter().enumerate() {
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(Error::Parse(format!(
                "label value {v} at voxel {i} is not an id"
            )));
        }
        let id = v as u32;
        if id != 0 {
            groups.entry(id).or_default().push(i);
        }
    }
    groups
        .into_iter()
        .map(|(id, idx)| {
            let name = names
                .get(&id)
                .cloned()
                .unwrap_or_else(|| format!("label{id}"));
            Region::new(name, idx, labels.len())
        })
        .collect()
}

pub fn write_label_volume(
    dims: &[usize],
    regions: &[Region],
    path_data: &Path,
    path_meta: &Path,
) -> Result<()> {
    let (labels, names) = regions_to_labels(dims, regions)?;
    let mut meta = VolumeMeta::for_volume(&labels);
    meta.units = "label".into();
    meta.labels = Some(names);
    write_volume_with_meta(&labels, path_data, path_meta, meta)
}

pub fn read_label_volume(path_data: &Path, path_meta: &Path) -> Result<Vec<Region>> {
    let meta = VolumeMeta::read(path_meta)?;
    let labels = read_volume_with_meta(path_data, &meta)?;
    labels_to_regions(&labels, &meta.labels.unwrap_or_default())
}
