//! Plain Rust layer behind the browser bindings.

use negspread::grid::{region_stats, Volume};
use negspread::metrics::{radial_profile, Direction, ProfileSpec};
use negspread::phantom::{add_noise_in, body_region, make_phantom, NoiseSpec, PhantomSpec};
use negspread::solver::{solve, SolverConfig};
use negspread::spread::make_preset;

/// Largest grid the page may request.
pub const MAX_VOXELS: usize = 256 * 256;

#[derive(Clone, Debug, PartialEq)]
pub struct Solved {
    pub y: Vec<f64>,
    pub alpha: Vec<f64>,
    pub outer_iterations: usize,
    pub site_updates: usize,
    pub objective: f64,
    pub converged: bool,
}

/// Solves a line (`height == 1`) or an image of `width x height` values.
pub fn solve_grid(
    values: &[f64],
    width: usize,
    height: usize,
    mask: &str,
) -> Result<Solved, String> {
    if width * height != values.len() {
        return Err(format!(
            "{} values do not fill a {width}x{height} grid",
            values.len()
        ));
    }
    if values.len() > MAX_VOXELS {
        return Err(format!("at most {MAX_VOXELS} values"));
    }
    let dims: Vec<usize> = if height == 1 {
        vec![width]
    } else {
        vec![height, width]
    };
    let x = Volume::new(&dims, values.to_vec()).map_err(|e| e.to_string())?;
    let mask = make_preset(mask).map_err(|e| e.to_string())?;
    let s = solve(&x, &mask, &SolverConfig::default()).map_err(|e| e.to_string())?;
    Ok(Solved {
        outer_iterations: s.report.outer_iterations,
        site_updates: s.report.total_site_updates,
        objective: s.report.objective_l1,
        converged: s.report.converged,
        y: s.y.into_data(),
        alpha: s.alpha.data().to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub size: usize,
    pub noisy: Vec<f64>,
    pub processed: Vec<f64>,
    pub cold_rmse_before: f64,
    pub cold_rmse_after: f64,
    pub cold_negative_fraction: f64,
    /// Bin centres in voxels from the cold rod's axis.
    pub profile_radius: Vec<f64>,
    pub profile_before: Vec<f64>,
    pub profile_after: Vec<f64>,
    pub cold_radius: f64,
}

/// A square phantom slice with in-body noise, before and after processing.
pub fn phantom_slice(size: usize, sigma: f64, seed: u64) -> Result<Slice, String> {
    if !(16..=256).contains(&size) {
        return Err("slice size must be between 16 and 256".into());
    }
    let spec = PhantomSpec::layout(&[size, size]).map_err(|e| e.to_string())?;
    let (truth, regions) = make_phantom(&spec).map_err(|e| e.to_string())?;
    let body = body_region(&regions, truth.len()).map_err(|e| e.to_string())?;
    let noise = NoiseSpec {
        sigma,
        seed,
        ..Default::default()
    };
    let x = add_noise_in(&truth, &noise, &body).map_err(|e| e.to_string())?;
    let mask = make_preset("2d-4").map_err(|e| e.to_string())?;
    let s = solve(&x, &mask, &SolverConfig::default()).map_err(|e| e.to_string())?;

    let cold = regions
        .iter()
        .find(|r| r.name() == "cold")
        .ok_or("layout has no cold region")?;
    let rmse = |v: &Volume| region_stats(v, cold, 0.0).map(|s| s.rmse);
    let before = rmse(&x).map_err(|e| e.to_string())?;
    let after = rmse(&s.y).map_err(|e| e.to_string())?;
    let negative = cold
        .indices()
        .iter()
        .filter(|&&i| x.data()[i] < 0.0)
        .count();

    let cyl = &spec.cold_cylinder;
    let profile = ProfileSpec {
        center: cyl.center,
        direction: Direction::RadialFromAxis { axis: cyl.axis },
        bin_width: 1.0,
        max_radius: 3.0 * cyl.radius,
        physical: false,
    };
    let pb = radial_profile(&x, &profile).map_err(|e| e.to_string())?;
    let pa = radial_profile(&s.y, &profile).map_err(|e| e.to_string())?;
    Ok(Slice {
        size,
        cold_rmse_before: before,
        cold_rmse_after: after,
        cold_negative_fraction: negative as f64 / cold.len() as f64,
        profile_radius: pb.iter().map(|b| b.radius).collect(),
        profile_before: pb.iter().map(|b| b.mean).collect(),
        profile_after: pa.iter().map(|b| b.mean).collect(),
        cold_radius: cyl.radius,
        noisy: x.into_data(),
        processed: s.y.into_data(),
    })
}
