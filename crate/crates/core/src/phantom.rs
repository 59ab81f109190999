//! Synthetic test volumes: a warm body with hot spheres and a cold cylinder,
//! plus seeded Gaussian noise that produces negative voxels.
//!
//! Geometry is in voxel units on the padded `[z, y, x]` grid; voxel `k` along
//! an axis has its centre at coordinate `k`. The default layout is generic
//! (an elliptic body, six spheres on a ring, a cold rod along z). It is not
//! a reproduction of any particular scanner phantom.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Region, Shape, Volume};

pub const DEFAULT_BACKGROUND: f64 = 177e3;
pub const DEFAULT_SPHERE: f64 = 1.33e6;
pub const UNITS: &str = "Bq/mL";

/// Sphere diameters of the layout, in millimetres, drawn on a 300 mm body.
const SPHERE_DIAMETERS_MM: [f64; 6] = [10.0, 13.0, 17.0, 22.0, 28.0, 37.0];
const BODY_WIDTH_MM: f64 = 300.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
}

/// Infinite circular cylinder along `axis` through `center`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center: [f64; 3],
    pub radius: f64,
    pub axis: usize,
}

/// Elliptic cylinder along `axis`; `radii` are the semi-axes along the two
/// remaining axes in increasing axis order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub center: [f64; 3],
    pub radii: [f64; 2],
    pub axis: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub dims: Vec<usize>,
    pub spacing_mm: f64,
    pub background_activity: f64,
    pub sphere_activity: f64,
    pub spheres: Vec<Sphere>,
    pub cold_cylinder: Cylinder,
    pub body: Body,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec::layout(&[128, 128, 128]).expect("default dims are valid")
    }
}

fn perp_axes(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

fn radial_dist2(p: [f64; 3], center: [f64; 3], axis: usize) -> f64 {
    perp_axes(axis)
        .iter()
        .map(|&a| (p[a] - center[a]).powi(2))
        .sum()
}

impl PhantomSpec {
    /// The default layout scaled to `dims` (one to three axes). Rods and the
    /// body run along the first padded axis.
    pub fn layout(dims: &[usize]) -> Result<Self> {
        let ext = Shape::from_dims(dims)?.extents();
        let c = ext.map(|n| (n as f64 - 1.0) / 2.0);
        let width = ext[1].min(ext[2]) as f64;
        let vox_per_mm = 0.9 * width / BODY_WIDTH_MM;
        let ring = 0.27 * width;
        let spheres = SPHERE_DIAMETERS_MM
            .iter()
            .enumerate()
            .map(|(k, d)| {
                let angle = std::f64::consts::PI / 3.0 * k as f64;
                Sphere {
                    center: [c[0], c[1] + ring * angle.sin(), c[2] + ring * angle.cos()],
                    radius: 0.5 * d * vox_per_mm,
                }
            })
            .collect();
        Ok(PhantomSpec {
            dims: dims.to_vec(),
            spacing_mm: 1.0 / vox_per_mm,
            background_activity: DEFAULT_BACKGROUND,
            sphere_activity: DEFAULT_SPHERE,
            spheres,
            cold_cylinder: Cylinder {
                center: c,
                radius: 0.1 * width,
                axis: 0,
            },
            body: Body {
                center: c,
                radii: [0.45 * ext[1] as f64, 0.45 * ext[2] as f64],
                axis: 0,
            },
        })
    }

    pub fn check(&self) -> Result<()> {
        let ext = Shape::from_dims(&self.dims)?.extents();
        let bad = |m: String| Err(Error::Geometry(m));
        if !(self.background_activity >= 0.0 && self.sphere_activity >= 0.0) {
            return bad("activities must be non-negative".into());
        }
        if !(self.spacing_mm > 0.0) {
            return bad("spacing must be positive".into());
        }
        if self.body.axis > 2 || self.cold_cylinder.axis > 2 {
            return bad("axis must be 0, 1 or 2".into());
        }
        if self.body.radii.iter().any(|r| !(*r > 0.0)) {
            return bad("body radii must be positive".into());
        }
        if !(self.cold_cylinder.radius >= 0.0) {
            return bad("cylinder radius must be non-negative".into());
        }
        let within = |center: [f64; 3], r: f64, axes: &[usize]| {
            axes.iter()
                .filter(|&&a| ext[a] > 1)
                .all(|&a| center[a] - r >= -0.5 && center[a] + r <= ext[a] as f64 - 0.5)
        };
        if !within(
            self.cold_cylinder.center,
            self.cold_cylinder.radius,
            &perp_axes(self.cold_cylinder.axis),
        ) {
            return bad("cold cylinder leaves the grid".into());
        }
        let live: Vec<&Sphere> = self.spheres.iter().filter(|s| s.radius > 0.0).collect();
        for (k, s) in self.spheres.iter().enumerate() {
            if !(s.radius >= 0.0) {
                return bad(format!("sphere {k} has a negative radius"));
            }
        }
        for (k, s) in live.iter().enumerate() {
            if !within(s.center, s.radius, &[0, 1, 2]) {
                return bad(format!("sphere {k} leaves the grid"));
            }
            let cyl = &self.cold_cylinder;
            if cyl.radius > 0.0
                && radial_dist2(s.center, cyl.center, cyl.axis).sqrt() < s.radius + cyl.radius
            {
                return bad(format!("sphere {k} overlaps the cold cylinder"));
            }
            for (l, t) in live.iter().enumerate().skip(k + 1) {
                let d: f64 = (0..3)
                    .map(|a| (s.center[a] - t.center[a]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                if d < s.radius + t.radius {
                    return bad(format!("spheres {k} and {l} overlap"));
                }
            }
        }
        Ok(())
    }

    fn in_body(&self, p: [f64; 3]) -> bool {
        let [a, b] = perp_axes(self.body.axis);
        let u = (p[a] - self.body.center[a]) / self.body.radii[0];
        let v = (p[b] - self.body.center[b]) / self.body.radii[1];
        u * u + v * v <= 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Class {
    Outside,
    Cold,
    Warm,
    Hot,
}

/// Region names produced by [`make_phantom`], in output order.
pub const REGION_NAMES: [&str; 4] = ["cold", "warm", "spheres", "outside"];

/// Noise-free phantom and its labelled regions. Empty regions are omitted;
/// the regions partition the grid.
pub fn make_phantom(spec: &PhantomSpec) -> Result<(Volume, Vec<Region>)> {
    spec.check()?;
    let shape = Shape::from_dims(&spec.dims)?;
    let n = shape.len();
    let mut data = vec![0.0; n];
    let mut groups: [Vec<usize>; 4] = Default::default();
    let cyl = &spec.cold_cylinder;
    let r2 = cyl.radius * cyl.radius;
    for (i, value) in data.iter_mut().enumerate() {
        let p = shape.coords(i).map(|c| c as f64);
        let class = if !spec.in_body(p) {
            Class::Outside
        } else if cyl.radius > 0.0 && radial_dist2(p, cyl.center, cyl.axis) <= r2 {
            Class::Cold
        } else if spec.spheres.iter().any(|s| {
            s.radius > 0.0
                && (0..3).map(|a| (p[a] - s.center[a]).powi(2)).sum::<f64>() <= s.radius * s.radius
        }) {
            Class::Hot
        } else {
            Class::Warm
        };
        let (slot, v) = match class {
            Class::Cold => (0, 0.0),
            Class::Warm => (1, spec.background_activity),
            Class::Hot => (2, spec.sphere_activity),
            Class::Outside => (3, 0.0),
        };
        *value = v;
        groups[slot].push(i);
    }
    let regions = groups
        .into_iter()
        .zip(REGION_NAMES)
        .filter(|(g, _)| !g.is_empty())
        .map(|(g, name)| Region::new(name, g, n))
        .collect::<Result<Vec<_>>>()?;
    let spacing = vec![spec.spacing_mm; spec.dims.len()];
    let v = Volume::with_metadata(&spec.dims, spacing, data, UNITS.into())?;
    Ok((v, regions))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            kind: NoiseKind::Gaussian,
            sigma: 0.0,
            seed: 0,
        }
    }
}

/// Adds `sigma * z` to every voxel, `z` standard normal.
///
/// Stream: `ChaCha8Rng::seed_from_u64(seed)`. Each pair of voxels in flat
/// order consumes two `u64` draws, mapped to `u = ((w >> 11) + 1) * 2^-53`
/// in `(0, 1]`, and the Box-Muller pair
/// `sqrt(-2 ln u1) * (cos 2 pi u2, sin 2 pi u2)`. An odd final voxel uses the
/// cosine branch only.
pub fn add_noise(v: &Volume, noise: &NoiseSpec) -> Result<Volume> {
    perturb(v, noise, |_| true)
}

/// Same stream as [`add_noise`], applied only to voxels of `support`; the
/// other voxels keep their values but still consume their draws.
pub fn add_noise_in(v: &Volume, noise: &NoiseSpec, support: &Region) -> Result<Volume> {
    let mut inside = vec![false; v.len()];
    for &i in support.indices() {
        *inside.get_mut(i).ok_or_else(|| Error::InvalidRegion {
            name: support.name().into(),
            reason: format!("index {i} out of bounds"),
        })? = true;
    }
    perturb(v, noise, |i| inside[i])
}

fn perturb(v: &Volume, noise: &NoiseSpec, apply: impl Fn(usize) -> bool) -> Result<Volume> {
    if !(noise.sigma >= 0.0 && noise.sigma.is_finite()) {
        return Err(Error::Config(format!(
            "noise sigma {} must be >= 0",
            noise.sigma
        )));
    }
    if noise.sigma == 0.0 {
        return Ok(v.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let mut uniform = move || ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let mut data = v.data().to_vec();
    for (k, pair) in data.chunks_mut(2).enumerate() {
        let r = (-2.0 * uniform().ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * uniform();
        if apply(2 * k) {
            pair[0] += noise.sigma * r * t.cos();
        }
        if let Some(second) = pair.get_mut(1) {
            if apply(2 * k + 1) {
                *second += noise.sigma * r * t.sin();
            }
        }
    }
    v.with_data(data)
}

/// Union of every region except `outside`.
pub fn body_region(regions: &[Region], len: usize) -> Result<Region> {
    let idx: Vec<usize> = regions
        .iter()
        .filter(|r| r.name() != "outside")
        .flat_map(|r| r.indices().iter().copied())
        .collect();
    Region::new("body", idx, len)
}

/// Combined configuration document for the `phantom` command.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomConfig {
    pub phantom: PhantomSpec,
    pub noise: NoiseSpec,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::region_stats;

    fn region<'a>(rs: &'a [Region], name: &str) -> Option<&'a Region> {
        rs.iter().find(|r| r.name() == name)
    }

    #[test]
    fn layout_is_consistent_at_several_sizes() {
        for dims in [
            vec![128, 128, 128],
            vec![32, 48, 48],
            vec![64, 64],
            vec![16, 40, 40],
        ] {
            PhantomSpec::layout(&dims).unwrap().check().unwrap();
        }
    }

    #[test]
    fn region_means_are_exact() {
        let (v, rs) = make_phantom(&PhantomSpec::layout(&[24, 64, 64]).unwrap()).unwrap();
        assert_eq!(
            region_stats(&v, region(&rs, "cold").unwrap(), 0.0)
                .unwrap()
                .mean,
            0.0
        );
        assert_eq!(
            region_stats(&v, region(&rs, "warm").unwrap(), 0.0)
                .unwrap()
                .mean,
            177e3
        );
        assert_eq!(
            region_stats(&v, region(&rs, "spheres").unwrap(), 0.0)
                .unwrap()
                .mean,
            1.33e6
        );
        assert_eq!(rs.len(), 4);
        let total: usize = rs.iter().map(|r| r.len()).sum();
        assert_eq!(total, v.len());
        let mut seen = vec![false; v.len()];
        for r in &rs {
            for &i in r.indices() {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
    }

    #[test]
    fn zero_radius_spheres_leave_two_active_regions() {
        let mut spec = PhantomSpec::layout(&[48, 48]).unwrap();
        spec.spheres.iter_mut().for_each(|s| s.radius = 0.0);
        let (_, rs) = make_phantom(&spec).unwrap();
        let names: Vec<&str> = rs.iter().map(|r| r.name()).collect();
        assert_eq!(names, ["cold", "warm", "outside"]);
    }

    #[test]
    fn overlapping_geometry_is_rejected() {
        let mut spec = PhantomSpec::layout(&[48, 48]).unwrap();
        spec.spheres[1].center = spec.spheres[0].center;
        assert!(matches!(make_phantom(&spec), Err(Error::Geometry(_))));
        let mut spec = PhantomSpec::layout(&[48, 48]).unwrap();
        spec.spheres[0].center = spec.cold_cylinder.center;
        assert!(matches!(make_phantom(&spec), Err(Error::Geometry(_))));
        let mut spec = PhantomSpec::layout(&[48, 48]).unwrap();
        spec.background_activity = -1.0;
        assert!(matches!(make_phantom(&spec), Err(Error::Geometry(_))));
    }

    #[test]
    fn noise_identity_and_determinism() {
        let (v, _) = make_phantom(&PhantomSpec::layout(&[32, 32]).unwrap()).unwrap();
        assert_eq!(add_noise(&v, &NoiseSpec::default()).unwrap(), v);
        let n = NoiseSpec {
            sigma: 10.0,
            seed: 7,
            ..Default::default()
        };
        let a = add_noise(&v, &n).unwrap();
        let b = add_noise(&v, &n).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, v);
        let c = add_noise(
            &v,
            &NoiseSpec {
                seed: 8,
                ..n.clone()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn config_document_defaults() {
        let cfg: PhantomConfig =
            serde_json::from_str(r#"{"noise": {"sigma": 5.0, "seed": 3}}"#).unwrap();
        assert_eq!(cfg.phantom, PhantomSpec::default());
        assert_eq!(cfg.noise.sigma, 5.0);
    }
}
