//! Voxel spread functions: the symmetric, zero-sum stencils that say how a
//! transfer raising one voxel is paid for by its neighbours.
//!
//! A mask is a list of taps `(offset, weight)` with offsets `[dz, dy, dx]`.
//! The centre tap has weight 1 and every other tap a non-positive weight,
//! the weights sum to zero and `-o` carries the same weight as `o`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{NeumaierSum, Shape};

pub const ZERO_SUM_TOL: f64 = 1e-15;
const SYMMETRY_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tap {
    pub offset: [i32; 3],
    pub weight: f64,
}

impl Tap {
    pub fn new(offset: [i32; 3], weight: f64) -> Self {
        Tap { offset, weight }
    }

    pub fn is_center(&self) -> bool {
        self.offset == [0, 0, 0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpreadMask {
    taps: Vec<Tap>,
}

/// What to do with taps that fall outside the grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryPolicy {
    /// Drop outside taps and rescale the remaining neighbour weights so the
    /// mask sums to zero again.
    #[default]
    Renormalize,
    /// Refuse any site whose mask leaves the grid.
    Reject,
}

impl FromStr for BoundaryPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "renormalize" => Ok(BoundaryPolicy::Renormalize),
            "reject" => Ok(BoundaryPolicy::Reject),
            other => Err(Error::Config(format!("unknown boundary policy `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    Line2,
    Plane4,
    Plane8,
    Cube6,
    Cube18,
    Cube26,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Line2,
        Preset::Plane4,
        Preset::Plane8,
        Preset::Cube6,
        Preset::Cube18,
        Preset::Cube26,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Line2 => "1d-2",
            Preset::Plane4 => "2d-4",
            Preset::Plane8 => "2d-8",
            Preset::Cube6 => "3d-6",
            Preset::Cube18 => "3d-18",
            Preset::Cube26 => "3d-26",
        }
    }

    /// Neighbour offsets, in lexicographic order.
    fn neighbours(self) -> Vec<[i32; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1i32 {
            for dy in -1..=1i32 {
                for dx in -1..=1i32 {
                    let o = [dz, dy, dx];
                    let l1 = dz.abs() + dy.abs() + dx.abs();
                    if l1 == 0 {
                        continue;
                    }
                    let keep = match self {
                        Preset::Line2 => dz == 0 && dy == 0,
                        Preset::Plane4 => dz == 0 && l1 == 1,
                        Preset::Plane8 => dz == 0,
                        Preset::Cube6 => l1 == 1,
                        Preset::Cube18 => l1 <= 2,
                        Preset::Cube26 => true,
                    };
                    if keep {
                        out.push(o);
                    }
                }
            }
        }
        out
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset(s.to_string()))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Builds a named preset: centre 1, each of the `k` neighbours `-1/k`.
pub fn make_preset(name: &str) -> Result<SpreadMask> {
    Ok(preset(name.parse()?))
}

pub fn preset(p: Preset) -> SpreadMask {
    let neighbours = p.neighbours();
    let w = -1.0 / neighbours.len() as f64;
    let mut taps = Vec::with_capacity(neighbours.len() + 1);
    let half = neighbours.len() / 2;
    taps.extend(neighbours[..half].iter().map(|&o| Tap::new(o, w)));
    taps.push(Tap::new([0, 0, 0], 1.0));
    taps.extend(neighbours[half..].iter().map(|&o| Tap::new(o, w)));
    SpreadMask { taps }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MaskViolation {
    NonFinite {
        offset: [i32; 3],
    },
    DuplicateOffset {
        offset: [i32; 3],
    },
    MissingCenter,
    CenterNotPositive {
        weight: f64,
    },
    CenterNotUnit {
        weight: f64,
    },
    PositiveNeighbour {
        offset: [i32; 3],
        weight: f64,
    },
    Asymmetric {
        offset: [i32; 3],
        weight: f64,
        mirror: Option<f64>,
    },
    NonZeroSum {
        residual: f64,
    },
}

impl fmt::Display for MaskViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskViolation::NonFinite { offset } => write!(f, "non-finite weight at {offset:?}"),
            MaskViolation::DuplicateOffset { offset } => write!(f, "duplicate offset {offset:?}"),
            MaskViolation::MissingCenter => write!(f, "no centre tap"),
            MaskViolation::CenterNotPositive { weight } => {
                write!(f, "centre weight {weight} is not positive")
            }
            MaskViolation::CenterNotUnit { weight } => {
                write!(f, "centre weight {weight} is not normalized to 1")
            }
            MaskViolation::PositiveNeighbour { offset, weight } => {
                write!(f, "neighbour {offset:?} has positive weight {weight}")
            }
            MaskViolation::Asymmetric {
                offset,
                weight,
                mirror: Some(m),
            } => write!(
                f,
                "symmetry: {offset:?} has weight {weight} but its mirror has {m}"
            ),
            MaskViolation::Asymmetric {
                offset,
                mirror: None,
                ..
            } => write!(f, "symmetry: {offset:?} has no mirror tap"),
            MaskViolation::NonZeroSum { residual } => {
                write!(f, "zero-sum: weights sum to {residual:e}")
            }
        }
    }
}

impl SpreadMask {
    /// Builds and validates.
    pub fn new(taps: Vec<Tap>) -> Result<Self> {
        let m = SpreadMask { taps };
        let v = m.validate();
        if v.is_empty() {
            Ok(m)
        } else {
            Err(Error::InvalidMask(v))
        }
    }

    /// Builds without checking; call [`SpreadMask::validate`] before use.
    pub fn from_taps_unchecked(taps: Vec<Tap>) -> Self {
        SpreadMask { taps }
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn center_weight(&self) -> Option<f64> {
        self.taps.iter().find(|t| t.is_center()).map(|t| t.weight)
    }

    pub fn weight_at(&self, offset: [i32; 3]) -> Option<f64> {
        self.taps
            .iter()
            .find(|t| t.offset == offset)
            .map(|t| t.weight)
    }

    /// Largest |offset| along each axis.
    pub fn radius(&self) -> [usize; 3] {
        let mut r = [0usize; 3];
        for t in &self.taps {
            for (a, ra) in r.iter_mut().enumerate() {
                *ra = (*ra).max(t.offset[a].unsigned_abs() as usize);
            }
        }
        r
    }

    pub fn weight_sum(&self) -> f64 {
        let mut s = NeumaierSum::default();
        for t in &self.taps {
            s.add(t.weight);
        }
        s.value()
    }

    /// Every invariant violation, in a stable order.
    pub fn validate(&self) -> Vec<MaskViolation> {
        let mut out = Vec::new();
        for t in &self.taps {
            if !t.weight.is_finite() {
                out.push(MaskViolation::NonFinite { offset: t.offset });
            }
        }
        for (k, t) in self.taps.iter().enumerate() {
            let prior = self.taps[..k]
                .iter()
                .filter(|u| u.offset == t.offset)
                .count();
            if prior == 1 {
                out.push(MaskViolation::DuplicateOffset { offset: t.offset });
            }
        }
        match self.center_weight() {
            None => out.push(MaskViolation::MissingCenter),
            Some(c) if !(c > 0.0) => out.push(MaskViolation::CenterNotPositive { weight: c }),
            Some(c) if (c - 1.0).abs() > ZERO_SUM_TOL => {
                out.push(MaskViolation::CenterNotUnit { weight: c })
            }
            _ => {}
        }
        for t in self.taps.iter().filter(|t| !t.is_center()) {
            if t.weight > 0.0 {
                out.push(MaskViolation::PositiveNeighbour {
                    offset: t.offset,
                    weight: t.weight,
                });
            }
            let mirror = self.weight_at(t.offset.map(|c| -c));
            let ok = matches!(mirror, Some(m) if (m - t.weight).abs() <= SYMMETRY_TOL);
            if !ok {
                out.push(MaskViolation::Asymmetric {
                    offset: t.offset,
                    weight: t.weight,
                    mirror,
                });
            }
        }
        let residual = self.weight_sum();
        if !(residual.abs() <= ZERO_SUM_TOL) {
            out.push(MaskViolation::NonZeroSum { residual });
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// The mask as seen by voxel `index` of a grid with shape `shape`.
    pub fn effective_at(
        &self,
        shape: Shape,
        index: usize,
        policy: BoundaryPolicy,
    ) -> Result<SpreadMask> {
        if index >= shape.len() {
            return Err(Error::Config(format!(
                "voxel {index} outside a grid of {} voxels",
                shape.len()
            )));
        }
        let mut taps = Vec::with_capacity(self.taps.len());
        effective_taps(&self.taps, shape, index, policy, |_, t| taps.push(t))?;
        Ok(SpreadMask { taps })
    }

    /// Reads the text form: one tap per line, `dz dy dx weight`. Weights may
    /// be written as fractions such as `-1/6`. Blank lines and `#` comments
    /// are ignored. The result is validated.
    pub fn from_text(text: &str) -> Result<Self> {
        SpreadMask::new(parse_taps(text)?)
    }

    /// Like [`SpreadMask::from_text`] but keeps masks that violate
    /// invariants, so callers can report every violation.
    pub fn from_text_unchecked(text: &str) -> Result<Self> {
        Ok(SpreadMask::from_taps_unchecked(parse_taps(text)?))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SpreadMask::from_text(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# dz dy dx weight\n");
        for t in &self.taps {
            out.push_str(&format!(
                "{} {} {} {:?}\n",
                t.offset[0], t.offset[1], t.offset[2], t.weight
            ));
        }
        out
    }
}

fn parse_taps(text: &str) -> Result<Vec<Tap>> {
    let mut taps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(Error::Parse(format!(
                "mask line {}: expected `dz dy dx weight`, got `{line}`",
                lineno + 1
            )));
        }
        let mut offset = [0i32; 3];
        for a in 0..3 {
            offset[a] = toks[a].parse().map_err(|_| {
                Error::Parse(format!(
                    "mask line {}: bad offset `{}`",
                    lineno + 1,
                    toks[a]
                ))
            })?;
        }
        let weight = parse_weight(toks[3]).ok_or_else(|| {
            Error::Parse(format!(
                "mask line {}: bad weight `{}`",
                lineno + 1,
                toks[3]
            ))
        })?;
        taps.push(Tap::new(offset, weight));
    }
    Ok(taps)
}

fn parse_weight(tok: &str) -> Option<f64> {
    let v = match tok.split_once('/') {
        Some((n, d)) => n.parse::<f64>().ok()? / d.parse::<f64>().ok()?,
        None => tok.parse().ok()?,
    };
    v.is_finite().then_some(v)
}

/// Feeds `(flat index, tap)` for each tap of `taps` that lands inside the
/// grid, in stored order, with neighbour weights rescaled under
/// [`BoundaryPolicy::Renormalize`].
pub(crate) fn effective_taps(
    taps: &[Tap],
    shape: Shape,
    index: usize,
    policy: BoundaryPolicy,
    mut f: impl FnMut(usize, Tap),
) -> Result<()> {
    let c = shape.coords(index);
    let e = shape.extents();
    let target = |o: [i32; 3]| -> Option<usize> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let v = c[a] as i64 + o[a] as i64;
            if v < 0 || v >= e[a] as i64 {
                return None;
            }
            out[a] = v as usize;
        }
        Some(shape.flat(out[0], out[1], out[2]))
    };
    let mut full = NeumaierSum::default();
    let mut inside = NeumaierSum::default();
    let mut dropped = false;
    for t in taps.iter().filter(|t| !t.is_center()) {
        full.add(t.weight);
        match target(t.offset) {
            Some(_) => inside.add(t.weight),
            None => dropped = true,
        }
    }
    if !dropped {
        for t in taps {
            let j = target(t.offset).expect("all taps inside");
            f(j, *t);
        }
        return Ok(());
    }
    if policy == BoundaryPolicy::Reject {
        return Err(Error::BoundaryReject { index });
    }
    let inside = inside.value();
    if inside == 0.0 {
        return Err(Error::IsolatedVoxel { index });
    }
    let scale = full.value() / inside;
    for t in taps {
        if let Some(j) = target(t.offset) {
            let weight = if t.is_center() {
                t.weight
            } else {
                t.weight * scale
            };
            f(j, Tap::new(t.offset, weight));
        }
    }
    Ok(())
}

/// A mask bound to a grid: interior sites use precomputed flat offsets and
/// boundary sites fall back to [`effective_taps`].
#[derive(Clone, Debug)]
pub struct Stencil {
    shape: Shape,
    policy: BoundaryPolicy,
    taps: Vec<Tap>,
    flat: Vec<(isize, f64)>,
    radius: [usize; 3],
    interior: Option<Vec<u64>>,
}

impl Stencil {
    pub fn new(mask: &SpreadMask, shape: Shape, policy: BoundaryPolicy) -> Result<Self> {
        let violations = mask.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidMask(violations));
        }
        let [_, ny, nx] = shape.extents();
        let flat = mask
            .taps
            .iter()
            .map(|t| {
                let d = (t.offset[0] as isize * ny as isize + t.offset[1] as isize) * nx as isize
                    + t.offset[2] as isize;
                (d, t.weight)
            })
            .collect();
        Ok(Stencil {
            shape,
            policy,
            taps: mask.taps.clone(),
            flat,
            radius: mask.radius(),
            interior: None,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn policy(&self) -> BoundaryPolicy {
        self.policy
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    /// Precomputes the interior test as a bitmap, one bit per voxel.
    pub fn with_interior_map(mut self) -> Self {
        let n = self.shape.len();
        let mut bits = vec![0u64; n.div_ceil(64)];
        for i in 0..n {
            if self.compute_interior(i) {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        self.interior = Some(bits);
        self
    }

    #[inline]
    pub fn is_interior(&self, index: usize) -> bool {
        match &self.interior {
            Some(bits) => bits[index / 64] >> (index % 64) & 1 == 1,
            None => self.compute_interior(index),
        }
    }

    #[inline]
    fn compute_interior(&self, index: usize) -> bool {
        let c = self.shape.coords(index);
        let e = self.shape.extents();
        (0..3).all(|a| c[a] >= self.radius[a] && c[a] + self.radius[a] < e[a])
    }

    /// Calls `f(j, w)` for every tap of the effective mask at `index`, in the
    /// mask's stored order.
    #[inline]
    pub fn for_each(&self, index: usize, mut f: impl FnMut(usize, f64)) -> Result<()> {
        if self.is_interior(index) {
            for &(d, w) in &self.flat {
                f((index as isize + d) as usize, w);
            }
            Ok(())
        } else {
            effective_taps(&self.taps, self.shape, index, self.policy, |j, t| {
                f(j, t.weight)
            })
        }
    }

    /// Checks every boundary site once so later calls cannot fail.
    pub fn check_all_sites(&self) -> Result<()> {
        for i in 0..self.shape.len() {
            if !self.is_interior(i) {
                effective_taps(&self.taps, self.shape, i, self.policy, |_, _| {})?;
            }
        }
        Ok(())
    }
}
