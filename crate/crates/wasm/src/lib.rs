//! WebAssembly bindings for the interactive page in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct SolveResult(demo::Solved);

#[wasm_bindgen]
impl SolveResult {
    #[wasm_bindgen(getter)]
    pub fn y(&self) -> Vec<f64> {
        self.0.y.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn alpha(&self) -> Vec<f64> {
        self.0.alpha.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn outer_iterations(&self) -> usize {
        self.0.outer_iterations
    }

    #[wasm_bindgen(getter)]
    pub fn site_updates(&self) -> usize {
        self.0.site_updates
    }

    #[wasm_bindgen(getter)]
    pub fn objective(&self) -> f64 {
        self.0.objective
    }

    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.0.converged
    }
}

/// Solves a line (`height == 1`) or an image with a preset mask.
#[wasm_bindgen]
pub fn solve_grid(
    values: Vec<f64>,
    width: usize,
    height: usize,
    mask: &str,
) -> Result<SolveResult, JsError> {
    demo::solve_grid(&values, width, height, mask)
        .map(SolveResult)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct SliceResult(demo::Slice);

#[wasm_bindgen]
impl SliceResult {
    #[wasm_bindgen(getter)]
    pub fn size(&self) -> usize {
        self.0.size
    }

    #[wasm_bindgen(getter)]
    pub fn noisy(&self) -> Vec<f64> {
        self.0.noisy.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn processed(&self) -> Vec<f64> {
        self.0.processed.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn cold_rmse_before(&self) -> f64 {
        self.0.cold_rmse_before
    }

    #[wasm_bindgen(getter)]
    pub fn cold_rmse_after(&self) -> f64 {
        self.0.cold_rmse_after
    }

    #[wasm_bindgen(getter)]
    pub fn cold_negative_fraction(&self) -> f64 {
        self.0.cold_negative_fraction
    }

    #[wasm_bindgen(getter)]
    pub fn profile_radius(&self) -> Vec<f64> {
        self.0.profile_radius.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn profile_before(&self) -> Vec<f64> {
        self.0.profile_before.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn profile_after(&self) -> Vec<f64> {
        self.0.profile_after.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn cold_radius(&self) -> f64 {
        self.0.cold_radius
    }
}

/// Noisy phantom slice and its processed counterpart.
#[wasm_bindgen]
pub fn phantom_slice(size: usize, sigma: f64, seed: u64) -> Result<SliceResult, JsError> {
    demo::phantom_slice(size, sigma, seed)
        .map(SliceResult)
        .map_err(|e| JsError::new(&e))
}
