//! Colour-partitioned sweeps.
//!
//! Voxels are coloured by their coordinates modulo `2r + 1` per axis, where
//! `r` is the mask radius along that axis. Two voxels of one colour are more
//! than `2r` apart along some axis, so their mask footprints are disjoint and
//! a whole colour can be processed concurrently. A sweep runs the colours in
//! a fixed order. The configured sweep order is not used here; by uniqueness
//! of the optimal image the result matches the sequential solver up to the
//! convergence tolerance.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering::Relaxed};

use rayon::prelude::*;

use super::{Run, SolverConfig};
use crate::error::{Error, Result};
use crate::spread::Stencil;

struct Cell(AtomicU64);

impl Cell {
    fn new(v: f64) -> Self {
        Cell(AtomicU64::new(v.to_bits()))
    }

    #[inline]
    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Relaxed))
    }

    #[inline]
    fn set(&self, v: f64) {
        self.0.store(v.to_bits(), Relaxed)
    }
}

pub(super) fn run(
    x: &[f64],
    stencil: &Stencil,
    cfg: &SolverConfig,
    tol: f64,
    on_sweep: &mut impl FnMut(usize, &[f64]),
) -> Result<Run> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let n = x.len();
    let shape = stencil.shape();
    let [nz, ny, nx] = shape.extents();
    let mut period = [1usize; 3];
    for t in stencil.taps() {
        for (p, o) in period.iter_mut().zip(t.offset) {
            *p = (*p).max(2 * o.unsigned_abs() as usize + 1);
        }
    }
    let y: Vec<Cell> = x.iter().map(|&v| Cell::new(v)).collect();
    let alpha: Vec<Cell> = (0..n).map(|_| Cell::new(0.0)).collect();
    let update_cap = cfg.max_inner_sweeps.saturating_mul(n);
    let updates = AtomicUsize::new(0);

    let mut outer = 0;
    let mut converged = false;
    let mut snapshot = Vec::new();
    loop {
        if !y.iter().any(|c| c.get() < -tol) {
            converged = true;
            break;
        }
        if outer >= cfg.max_outer_iterations || updates.load(Relaxed) >= update_cap {
            break;
        }
        for cz in 0..period[0] {
            for cy in 0..period[1] {
                for cx in 0..period[2] {
                    let rows: Vec<(usize, usize)> = (cz..nz)
                        .step_by(period[0])
                        .flat_map(|z| (cy..ny).step_by(period[1]).map(move |yy| (z, yy)))
                        .collect();
                    pool.install(|| {
                        rows.par_iter().try_for_each(|&(z, yy)| -> Result<()> {
                            for xx in (cx..nx).step_by(period[2]) {
                                let i = shape.flat(z, yy, xx);
                                let v = y[i].get();
                                if v >= -tol {
                                    continue;
                                }
                                let delta = -v;
                                alpha[i].set(alpha[i].get() + delta);
                                updates.fetch_add(1, Relaxed);
                                stencil.for_each(i, |j, w| y[j].set(y[j].get() + delta * w))?;
                            }
                            Ok(())
                        })
                    })?;
                }
            }
        }
        outer += 1;
        snapshot.clear();
        snapshot.extend(alpha.iter().map(Cell::get));
        on_sweep(outer, &snapshot);
    }
    Ok(Run {
        y: y.iter().map(Cell::get).collect(),
        alpha: alpha.iter().map(Cell::get).collect(),
        outer: outer.max(1),
        updates: updates.load(Relaxed),
        converged,
    })
}
