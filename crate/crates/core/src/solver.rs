//! Minimal-transfer removal of negative intensities.
//!
//! Finds the transfer map `alpha >= 0` of least total such that
//! `y = x + H alpha >= 0`, where `H` scatters each coefficient through the
//! spread mask. Every voxel that is negative is a valid entering index and
//! its leaving constraint is its own `y[i] >= 0`, so one simplex step on
//! the dual reduces to raising that voxel exactly to zero and pushing the
//! deficit onto its neighbours. Repeating that in sweeps is a projected
//! Gauss-Seidel iteration that only ever increases `alpha`; it converges to
//! the least element of the feasible set, which is the optimum for any
//! objective increasing in each coefficient.
//!
//! A sweep visits voxels in the configured order and updates each one that
//! is below `-neg_tolerance` at the moment it is visited. The run stops after
//! the first sweep with nothing to do. Internally only voxels that may be
//! negative are visited, which gives the same updates in the same order as
//! visiting every voxel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{NeumaierSum, Shape, Volume};
use crate::operator::TransferMap;
use crate::spread::{BoundaryPolicy, SpreadMask, Stencil};

#[cfg(feature = "parallel")]
mod parallel;

/// Relative slack used by the feasibility gate.
pub const FEASIBILITY_REL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum Tolerance {
    /// Multiple of `max |x|`.
    Relative(f64),
    Absolute(f64),
}

impl Tolerance {
    pub fn resolve(self, x: &Volume) -> f64 {
        match self {
            Tolerance::Relative(r) => r * x.max_abs(),
            Tolerance::Absolute(a) => a,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepOrder {
    #[default]
    Lexicographic,
    Reverse,
    /// `Custom(p)` visits `p[0]`, then `p[1]`, ...
    Custom(Vec<usize>),
}

impl SweepOrder {
    /// `rank[i]` is the position of voxel `i` within a sweep.
    fn ranks(&self, n: usize) -> Result<Vec<u32>> {
        if n > u32::MAX as usize {
            return Err(Error::TooLarge {
                voxels: n,
                cap: u32::MAX as usize,
            });
        }
        match self {
            SweepOrder::Lexicographic => Ok((0..n as u32).collect()),
            SweepOrder::Reverse => Ok((0..n as u32).rev().collect()),
            SweepOrder::Custom(p) => {
                if p.len() != n {
                    return Err(Error::Config(format!(
                        "sweep permutation has {} entries for {n} voxels",
                        p.len()
                    )));
                }
                let mut rank = vec![u32::MAX; n];
                for (pos, &i) in p.iter().enumerate() {
                    if i >= n || rank[i] != u32::MAX {
                        return Err(Error::Config("sweep order is not a permutation".into()));
                    }
                    rank[i] = pos as u32;
                }
                Ok(rank)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub neg_tolerance: Tolerance,
    /// Cap on sweeps that perform updates.
    pub max_outer_iterations: usize,
    /// Cap on total site updates, in units of full-grid sweeps (`N` updates).
    pub max_inner_sweeps: usize,
    pub sweep_order: SweepOrder,
    pub boundary: BoundaryPolicy,
    /// Worker threads; above 1 uses the colour-partitioned parallel sweep.
    pub threads: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            neg_tolerance: Tolerance::Relative(1e-9),
            max_outer_iterations: 10_000,
            max_inner_sweeps: 10_000,
            sweep_order: SweepOrder::Lexicographic,
            boundary: BoundaryPolicy::Renormalize,
            threads: 1,
        }
    }
}

impl SolverConfig {
    fn check(&self) -> Result<()> {
        let tol = match self.neg_tolerance {
            Tolerance::Relative(t) | Tolerance::Absolute(t) => t,
        };
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::Config(format!("tolerance {tol} must be positive")));
        }
        if self.max_outer_iterations == 0 || self.max_inner_sweeps == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    /// Sweeps that raised at least one voxel; a run with nothing to do
    /// counts its single checking sweep.
    pub outer_iterations: usize,
    pub total_site_updates: usize,
    /// Voxels with a positive transfer coefficient.
    pub active_set_size: usize,
    /// Smallest output value before residual clamping.
    pub min_final_value: f64,
    /// `|sum(y) - sum(x)| / max(1, |sum(x)|)`, measured after clamping.
    pub mean_drift: f64,
    /// Total of the residual negatives clamped to zero.
    pub clamped_total: f64,
    /// Attained objective, `sum(alpha)`.
    pub objective_l1: f64,
    pub neg_tolerance: f64,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub y: Volume,
    pub alpha: TransferMap,
    pub report: SolverReport,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Feasibility {
    Feasible,
    Infeasible { sum: f64 },
}

impl Feasibility {
    pub fn is_feasible(self) -> bool {
        self == Feasibility::Feasible
    }
}

fn verdict(sum: f64, abs_sum: f64) -> Feasibility {
    if sum >= -FEASIBILITY_REL_TOL * abs_sum {
        Feasibility::Feasible
    } else {
        Feasibility::Infeasible { sum }
    }
}

/// A non-negative mean-preserving result exists iff the image sum is
/// non-negative, up to a rounding slack of `1e-12 * sum|x|`.
pub fn check_feasible(x: &Volume) -> Feasibility {
    verdict(x.sum(), x.abs_sum())
}

/// Per connected component of the mask's coupling graph. Equals
/// [`check_feasible`] whenever the mask couples the whole grid; masks that
/// split the grid (a line mask on a plane, say) need every part to have a
/// non-negative sum.
pub fn check_feasible_with(x: &Volume, mask: &SpreadMask) -> Result<Feasibility> {
    let shape = x.shape();
    let labels = components(mask, shape);
    let mut sums: Vec<(NeumaierSum, NeumaierSum)> = Vec::new();
    for (i, &c) in labels.iter().enumerate() {
        let c = c as usize;
        if c >= sums.len() {
            sums.resize(c + 1, Default::default());
        }
        sums[c].0.add(x.data()[i]);
        sums[c].1.add(x.data()[i].abs());
    }
    Ok(sums
        .iter()
        .map(|(s, a)| verdict(s.value(), a.value()))
        .find(|v| !v.is_feasible())
        .unwrap_or(Feasibility::Feasible))
}

/// Component id per voxel, numbered in order of first appearance.
fn components(mask: &SpreadMask, shape: Shape) -> Vec<u32> {
    let n = shape.len();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(p: &mut [u32], mut i: u32) -> u32 {
        while p[i as usize] != i {
            let g = p[p[i as usize] as usize];
            p[i as usize] = g;
            i = g;
        }
        i
    }
    let offsets: Vec<[i32; 3]> = mask
        .taps()
        .iter()
        .filter(|t| !t.is_center() && t.offset > [0, 0, 0])
        .map(|t| t.offset)
        .collect();
    for i in 0..n {
        for &o in &offsets {
            if let Some(j) = shape.shifted(i, o) {
                let (a, b) = (find(&mut parent, i as u32), find(&mut parent, j as u32));
                if a != b {
                    parent[a.max(b) as usize] = a.min(b);
                }
            }
        }
    }
    let mut ids = vec![u32::MAX; n];
    let mut next = 0;
    let mut out = vec![0u32; n];
    for (i, o) in out.iter_mut().enumerate() {
        let r = find(&mut parent, i as u32) as usize;
        if ids[r] == u32::MAX {
            ids[r] = next;
            next += 1;
        }
        *o = ids[r];
    }
    out
}

/// Removes the negative values of `x`.
///
/// Returns `Err` for infeasible input, invalid masks or configuration, and
/// boundary rejections. Hitting an iteration cap is not an error: the
/// partial result comes back with `report.converged == false`.
pub fn solve(x: &Volume, mask: &SpreadMask, cfg: &SolverConfig) -> Result<Solution> {
    solve_observed(x, mask, cfg, |_, _| {})
}

/// [`solve`] with a callback after every sweep, given the sweep number and
/// the current transfer map.
pub fn solve_observed(
    x: &Volume,
    mask: &SpreadMask,
    cfg: &SolverConfig,
    mut on_sweep: impl FnMut(usize, &[f64]),
) -> Result<Solution> {
    cfg.check()?;
    let shape = x.shape();
    let stencil = Stencil::new(mask, shape, cfg.boundary)?.with_interior_map();
    if let Feasibility::Infeasible { sum } = check_feasible_with(x, mask)? {
        return Err(Error::Infeasible { sum });
    }
    let tol = cfg.neg_tolerance.resolve(x);
    let tol = if tol > 0.0 { tol } else { f64::MIN_POSITIVE };

    #[cfg(feature = "parallel")]
    if cfg.threads > 1 {
        let run = parallel::run(x.data(), &stencil, cfg, tol, &mut on_sweep)?;
        return finish(x, run, tol);
    }
    let run = sequential(x.data(), &stencil, cfg, tol, &mut on_sweep)?;
    finish(x, run, tol)
}

pub(crate) struct Run {
    pub y: Vec<f64>,
    pub alpha: Vec<f64>,
    pub outer: usize,
    pub updates: usize,
    pub converged: bool,
}

fn sequential(
    x: &[f64],
    stencil: &Stencil,
    cfg: &SolverConfig,
    tol: f64,
    on_sweep: &mut impl FnMut(usize, &[f64]),
) -> Result<Run> {
    let n = x.len();
    if cfg.sweep_order == SweepOrder::Lexicographic {
        return sweep_ranked(x, stencil, cfg, tol, on_sweep, |i| i as u32, |r| r as usize);
    }
    let rank = cfg.sweep_order.ranks(n)?;
    let mut order = vec![0usize; n];
    for (i, &r) in rank.iter().enumerate() {
        order[r as usize] = i;
    }
    sweep_ranked(
        x,
        stencil,
        cfg,
        tol,
        on_sweep,
        |i| rank[i],
        |r| order[r as usize],
    )
}

fn sweep_ranked(
    x: &[f64],
    stencil: &Stencil,
    cfg: &SolverConfig,
    tol: f64,
    on_sweep: &mut impl FnMut(usize, &[f64]),
    rank: impl Fn(usize) -> u32,
    voxel: impl Fn(u32) -> usize,
) -> Result<Run> {
    let n = x.len();
    let update_cap = cfg.max_inner_sweeps.saturating_mul(n);

    let mut y = x.to_vec();
    let mut alpha = vec![0.0; n];
    // candidate sets indexed by rank: `current` for the running sweep,
    // `next` for voxels that turned negative behind the cursor
    let mut current = RankSet::new(n);
    let mut next = RankSet::new(n);
    for (i, &v) in y.iter().enumerate() {
        if v < -tol {
            current.insert(rank(i));
        }
    }

    let mut outer = 0;
    let mut updates = 0usize;
    let mut converged = true;
    while !current.is_empty() {
        if outer >= cfg.max_outer_iterations {
            converged = false;
            break;
        }
        let mut swept = 0usize;
        while let Some(r) = current.pop_first() {
            let i = voxel(r);
            if y[i] >= -tol {
                continue;
            }
            if updates >= update_cap {
                converged = false;
                break;
            }
            let delta = -y[i];
            alpha[i] += delta;
            updates += 1;
            swept += 1;
            stencil.for_each(i, |j, w| {
                y[j] += delta * w;
                if j != i && y[j] < -tol {
                    let rj = rank(j);
                    if rj > r {
                        current.insert(rj);
                    } else {
                        next.insert(rj);
                    }
                }
            })?;
        }
        if swept > 0 {
            outer += 1;
            on_sweep(outer, &alpha);
        }
        if !converged {
            break;
        }
        std::mem::swap(&mut current, &mut next);
    }
    if !converged {
        // pending voxels were left in the queues
        converged = y.iter().all(|&v| v >= -tol);
    }
    Ok(Run {
        y,
        alpha,
        outer: outer.max(1),
        updates,
        converged,
    })
}

/// Bitset over sweep positions with a forward-only cursor.
struct RankSet {
    words: Vec<u64>,
    cursor: usize,
    count: usize,
}

impl RankSet {
    fn new(n: usize) -> Self {
        RankSet {
            words: vec![0; n.div_ceil(64)],
            cursor: 0,
            count: 0,
        }
    }

    fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    fn insert(&mut self, r: u32) {
        let (w, b) = (r as usize / 64, r % 64);
        let bit = 1u64 << b;
        if self.words[w] & bit == 0 {
            self.words[w] |= bit;
            self.count += 1;
            self.cursor = self.cursor.min(w);
        }
    }

    /// Removes and returns the smallest member.
    #[inline]
    fn pop_first(&mut self) -> Option<u32> {
        if self.count == 0 {
            self.cursor = 0;
            return None;
        }
        while self.words[self.cursor] == 0 {
            self.cursor += 1;
        }
        let w = self.words[self.cursor];
        let b = w.trailing_zeros();
        self.words[self.cursor] = w & (w - 1);
        self.count -= 1;
        Some((self.cursor * 64) as u32 + b)
    }
}

fn finish(x: &Volume, run: Run, tol: f64) -> Result<Solution> {
    let Run {
        mut y,
        alpha,
        outer,
        updates,
        converged,
    } = run;
    let min_final_value = y.iter().copied().fold(f64::INFINITY, f64::min);
    let mut clamped = NeumaierSum::default();
    if converged {
        for v in y.iter_mut() {
            if *v < 0.0 {
                clamped.add(-*v);
                *v = 0.0;
            }
        }
    }
    let sum_x = x.sum();
    let y = x.with_data(y)?;
    let alpha = TransferMap::from_raw(x.dims().to_vec(), alpha);
    let report = SolverReport {
        outer_iterations: outer,
        total_site_updates: updates,
        active_set_size: alpha.support_size(),
        min_final_value,
        mean_drift: (y.sum() - sum_x).abs() / sum_x.abs().max(1.0),
        clamped_total: clamped.value(),
        objective_l1: alpha.total(),
        neg_tolerance: tol,
        converged,
    };
    Ok(Solution { y, alpha, report })
}

/// Solves once per sweep order and returns the largest voxelwise difference
/// between any two resulting images.
pub fn solve_deterministic_check(
    x: &Volume,
    mask: &SpreadMask,
    cfg: &SolverConfig,
    orders: &[SweepOrder],
) -> Result<f64> {
    let mut images: Vec<Volume> = Vec::with_capacity(orders.len());
    for order in orders {
        let c = SolverConfig {
            sweep_order: order.clone(),
            ..cfg.clone()
        };
        images.push(solve(x, mask, &c)?.y);
    }
    let mut worst = 0.0f64;
    for a in 0..images.len() {
        for b in a + 1..images.len() {
            for (p, q) in images[a].data().iter().zip(images[b].data()) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spread::make_preset;

    fn line(data: &[f64]) -> Volume {
        Volume::new(&[data.len()], data.to_vec()).unwrap()
    }

    #[test]
    fn feasibility_gate() {
        assert!(check_feasible(&line(&[2.0, -1.0, 2.0])).is_feasible());
        assert!(!check_feasible(&line(&[-1.0, 0.5])).is_feasible());
        assert!(check_feasible(&line(&[1.0, -1.0])).is_feasible());
    }

    #[test]
    fn nothing_to_do() {
        let x = line(&[5.0, 1.0, 3.0]);
        let s = solve(&x, &make_preset("1d-2").unwrap(), &SolverConfig::default()).unwrap();
        assert_eq!(s.y, x);
        assert!(s.alpha.data().iter().all(|&a| a == 0.0));
        assert_eq!(s.report.outer_iterations, 1);
        assert_eq!(s.report.total_site_updates, 0);
        assert!(s.report.converged);
    }

    #[test]
    fn single_dip() {
        let s = solve(
            &line(&[2.0, -1.0, 2.0]),
            &make_preset("1d-2").unwrap(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(s.y.data(), &[1.5, 0.0, 1.5]);
        assert_eq!(s.alpha.data(), &[0.0, 1.0, 0.0]);
        assert_eq!(s.report.objective_l1, 1.0);
    }

    #[test]
    fn zero_mean_pair_collapses() {
        let s = solve(
            &line(&[1.0, -1.0]),
            &make_preset("1d-2").unwrap(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(s.report.converged);
        assert!(s.y.data().iter().all(|&v| v.abs() <= 1e-9));
        assert!(s.y.min() >= 0.0);
    }

    #[test]
    fn infeasible_is_an_error() {
        let r = solve(
            &line(&[-1.0, 0.5]),
            &make_preset("1d-2").unwrap(),
            &SolverConfig::default(),
        );
        assert!(matches!(r, Err(Error::Infeasible { .. })));
    }

    #[test]
    fn disconnected_mask_checks_each_part() {
        // rows do not exchange under a line mask
        let x = Volume::new(&[2, 2], vec![-1.0, 0.5, 3.0, 3.0]).unwrap();
        assert!(check_feasible(&x).is_feasible());
        let m = make_preset("1d-2").unwrap();
        assert!(!check_feasible_with(&x, &m).unwrap().is_feasible());
        assert!(matches!(
            solve(&x, &m, &SolverConfig::default()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn iteration_cap_reports_partial_result() {
        let x = line(&[1.0, -1.0, 1.0, -1.0, 1.0, -0.9]);
        let cfg = SolverConfig {
            max_outer_iterations: 1,
            ..Default::default()
        };
        let s = solve(&x, &make_preset("1d-2").unwrap(), &cfg).unwrap();
        assert!(!s.report.converged);
        assert!(s.y.min() < 0.0);
    }

    #[test]
    fn bad_configs() {
        let x = line(&[1.0, 1.0]);
        let m = make_preset("1d-2").unwrap();
        let mut cfg = SolverConfig {
            neg_tolerance: Tolerance::Absolute(0.0),
            ..Default::default()
        };
        assert!(matches!(solve(&x, &m, &cfg), Err(Error::Config(_))));
        cfg.neg_tolerance = Tolerance::Relative(1e-9);
        cfg.sweep_order = SweepOrder::Custom(vec![0, 0]);
        assert!(matches!(solve(&x, &m, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn reject_policy_fails_only_when_boundary_needs_work() {
        let m = make_preset("1d-2").unwrap();
        let cfg = SolverConfig {
            boundary: BoundaryPolicy::Reject,
            ..Default::default()
        };
        assert!(solve(&line(&[2.0, -1.0, 2.0]), &m, &cfg).is_ok());
        assert!(matches!(
            solve(&line(&[-1.0, 2.0, 2.0]), &m, &cfg),
            Err(Error::BoundaryReject { index: 0 })
        ));
    }

    #[test]
    fn transfers_never_decrease() {
        let x = line(&[3.0, -2.0, 0.5, -1.0, 0.2, -0.4, 2.0]);
        let mut last = vec![0.0; x.len()];
        solve_observed(
            &x,
            &make_preset("1d-2").unwrap(),
            &SolverConfig::default(),
            |_, a| {
                assert!(a.iter().zip(&last).all(|(n, o)| n >= o));
                last = a.to_vec();
            },
        )
        .unwrap();
    }
}
