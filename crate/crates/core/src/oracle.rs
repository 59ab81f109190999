//! Brute-force reference solvers for small instances.
//!
//! Three independent routes to the optimum of
//! `min ||alpha||  s.t.  alpha >= 0,  x + H alpha >= 0`
//! on an explicitly assembled `H`:
//!
//! * L1: two-phase primal simplex on a dense tableau, Bland's rule.
//! * L2: primal active-set method for `min sum(alpha^2)`, started from the
//!   phase-one vertex of the simplex, with dense solves on the working set.
//! * Enumeration: every candidate support set `S`, solving `y_S = 0`
//!   exactly and keeping the cheapest feasible candidate (12 voxels max).
//!
//! None of these share code with the sweep solver. They are slow on
//! purpose and refuse instances above their caps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Volume;
use crate::operator::{assemble_dense, DENSE_CAP};
use crate::spread::{BoundaryPolicy, SpreadMask};

/// Largest instance accepted by the L2 active-set method.
pub const L2_CAP: usize = 256;
/// Largest instance accepted by support enumeration.
pub const ENUMERATION_CAP: usize = 12;

const PIVOT_EPS: f64 = 1e-11;
const FEAS_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            _ => Err(Error::Config(format!("unknown norm `{s}`"))),
        }
    }
}

/// One explicit instance.
#[derive(Clone, Debug)]
pub struct DenseLp {
    pub objective: Norm,
    pub h: DMatrix<f64>,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub y: Vec<f64>,
    pub alpha: Vec<f64>,
    /// `sum(alpha)` for L1, `sum(alpha^2)` for L2.
    pub objective: f64,
}

impl DenseLp {
    pub fn new(objective: Norm, h: DMatrix<f64>, x: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::Lp(format!(
                "operator is {}x{} for {n} voxels",
                h.nrows(),
                h.ncols()
            )));
        }
        if n > DENSE_CAP {
            return Err(Error::TooLarge {
                voxels: n,
                cap: DENSE_CAP,
            });
        }
        for c in 0..n {
            let s: f64 = h.column(c).sum();
            if s.abs() > 1e-14 {
                return Err(Error::Lp(format!("operator column {c} sums to {s:e}")));
            }
        }
        Ok(DenseLp { objective, h, x })
    }

    pub fn from_volume(
        objective: Norm,
        x: &Volume,
        mask: &SpreadMask,
        policy: BoundaryPolicy,
    ) -> Result<Self> {
        let h = assemble_dense(mask, x.dims(), policy)?;
        DenseLp::new(objective, h, x.data().to_vec())
    }

    fn image(&self, alpha: &[f64]) -> Vec<f64> {
        let a = DVector::from_column_slice(alpha);
        let hy = &self.h * a;
        self.x.iter().zip(hy.iter()).map(|(x, d)| x + d).collect()
    }

    fn scale(&self) -> f64 {
        let m = self.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m > 0.0 {
            m
        } else {
            1.0
        }
    }
}

pub fn oracle_solve(lp: &DenseLp) -> Result<OracleSolution> {
    match lp.objective {
        Norm::L1 => simplex_l1(lp),
        Norm::L2 => active_set_l2(lp),
    }
}

/// Dense tableau with an explicit basis. Row `m` is unused; the right-hand
/// side lives in the last column.
struct Tableau {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.at(pr, pc);
        for c in 0..w {
            self.a[pr * w + c] /= p;
        }
        for r in 0..self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f == 0.0 {
                continue;
            }
            for c in 0..w {
                let v = self.a[pr * w + c];
                self.a[r * w + c] -= f * v;
            }
            self.a[r * w + pc] = 0.0;
        }
        self.basis[pr] = pc;
    }

    /// Minimizes `cost . z` over columns for which `allowed` holds, using
    /// Bland's rule for both the entering and the leaving variable.
    fn optimize(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> Result<()> {
        let max_pivots = 50 * (self.rows + self.cols) * (self.rows + self.cols).max(8);
        for _ in 0..max_pivots {
            let mut entering = None;
            for j in (0..self.cols).filter(|&j| allowed(j)) {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for r in 0..self.rows {
                    d -= cost[self.basis[r]] * self.at(r, j);
                }
                if d < -PIVOT_EPS {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let arj = self.at(r, j);
                if arj <= PIVOT_EPS {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / arj;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lratio)) => {
                        if ratio < lratio - PIVOT_EPS
                            || (ratio <= lratio + PIVOT_EPS && self.basis[r] < self.basis[lr])
                        {
                            Some((r, ratio))
                        } else {
                            Some((lr, lratio))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Err(Error::Lp("objective unbounded below".into()));
            };
            self.pivot(r, j);
        }
        Err(Error::Lp("simplex pivot limit reached".into()))
    }
}

/// Phase one: a basic feasible point of `H alpha - s = -x`, `alpha, s >= 0`.
/// Columns are `alpha` (0..n), slacks `s` (n..2n), artificials (2n..).
fn phase_one(lp: &DenseLp, scale: f64) -> Result<Tableau> {
    let n = lp.x.len();
    let xs: Vec<f64> = lp.x.iter().map(|v| v / scale).collect();
    let art: Vec<usize> = (0..n).filter(|&i| xs[i] < 0.0).collect();
    let cols = 2 * n + art.len();
    let w = cols + 1;
    let mut t = Tableau {
        rows: n,
        cols,
        a: vec![0.0; n * w],
        basis: vec![0; n],
    };
    let mut next_art = 2 * n;
    for (i, &xi) in xs.iter().enumerate() {
        // row i: (H alpha)_i - s_i = -x_i, flipped so the rhs is >= 0
        let sign = if xi < 0.0 { 1.0 } else { -1.0 };
        for j in 0..n {
            t.a[i * w + j] = sign * lp.h[(i, j)];
        }
        t.a[i * w + n + i] = -sign;
        t.a[i * w + cols] = -sign * xs[i];
        if xs[i] < 0.0 {
            t.a[i * w + next_art] = 1.0;
            t.basis[i] = next_art;
            next_art += 1;
        } else {
            t.basis[i] = n + i;
        }
    }
    if !art.is_empty() {
        let mut cost = vec![0.0; cols];
        cost[2 * n..].iter_mut().for_each(|c| *c = 1.0);
        t.optimize(&cost, |_| true)?;
        let infeasibility: f64 = (0..n)
            .filter(|&r| t.basis[r] >= 2 * n)
            .map(|r| t.rhs(r))
            .sum();
        if infeasibility > FEAS_EPS {
            let sum: f64 = lp.x.iter().sum();
            return Err(Error::Infeasible { sum });
        }
        // drive degenerate artificials out of the basis
        for r in 0..n {
            if t.basis[r] >= 2 * n {
                let c = (0..2 * n)
                    .filter(|c| !t.basis.contains(c))
                    .max_by(|&a, &b| t.at(r, a).abs().total_cmp(&t.at(r, b).abs()))
                    .filter(|&c| t.at(r, c).abs() > PIVOT_EPS)
                    .ok_or_else(|| Error::Lp("cannot remove artificial variable".into()))?;
                t.pivot(r, c);
            }
        }
    }
    Ok(t)
}

fn basic_alpha(t: &Tableau, n: usize, scale: f64) -> Vec<f64> {
    let mut alpha = vec![0.0; n];
    for r in 0..t.rows {
        if t.basis[r] < n {
            alpha[t.basis[r]] = t.rhs(r).max(0.0) * scale;
        }
    }
    alpha
}

fn simplex_l1(lp: &DenseLp) -> Result<OracleSolution> {
    let n = lp.x.len();
    let scale = lp.scale();
    let mut t = phase_one(lp, scale)?;
    let mut cost = vec![0.0; t.cols];
    cost[..n].iter_mut().for_each(|c| *c = 1.0);
    t.optimize(&cost, |j| j < 2 * n)?;
    let alpha = basic_alpha(&t, n, scale);
    let objective = alpha.iter().sum();
    Ok(OracleSolution {
        y: lp.image(&alpha),
        alpha,
        objective,
    })
}

/// Constraint `k`: `alpha_k >= 0` for `k < n`, otherwise
/// `(H alpha)_{k-n} >= -x_{k-n}`.
fn constraint_row(h: &DMatrix<f64>, n: usize, k: usize) -> DVector<f64> {
    if k < n {
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        e
    } else {
        h.row(k - n).transpose()
    }
}

fn active_set_l2(lp: &DenseLp) -> Result<OracleSolution> {
    let n = lp.x.len();
    if n > L2_CAP {
        return Err(Error::TooLarge {
            voxels: n,
            cap: L2_CAP,
        });
    }
    let scale = lp.scale();
    let xs: Vec<f64> = lp.x.iter().map(|v| v / scale).collect();
    let start = phase_one(lp, scale)?;
    let mut alpha = DVector::from_vec(basic_alpha(&start, n, 1.0));
    let rows: Vec<DVector<f64>> = (0..2 * n).map(|k| constraint_row(&lp.h, n, k)).collect();
    let rhs = |k: usize| if k < n { 0.0 } else { -xs[k - n] };

    let mut working: Vec<usize> = Vec::new();
    let mut stationary = false;
    let max_iter = 200 * n + 100;
    for _ in 0..max_iter {
        // minimizer of |alpha + p|^2 with the working constraints held
        // fixed: the projection of alpha onto their span, via a thin QR of
        // the working rows
        let (p, lambda) = if working.is_empty() {
            (-alpha.clone(), DVector::zeros(0))
        } else {
            let at = DMatrix::from_fn(n, working.len(), |r, c| rows[working[c]][r]);
            let qr = at.qr();
            let (q, r) = (qr.q(), qr.r());
            let qa = q.transpose() * &alpha;
            let mu = r
                .solve_upper_triangular(&qa)
                .ok_or_else(|| Error::Lp("dependent working set".into()))?;
            (&q * qa - &alpha, mu * 2.0)
        };
        let size = alpha.amax().max(1.0);
        if stationary || p.amax() <= 1e-12 * size {
            stationary = false;
            let worst = (0..working.len())
                .filter(|&q| lambda[q] < -1e-10 * size)
                .min_by(|&a, &b| lambda[a].total_cmp(&lambda[b]));
            match worst {
                None => {
                    let alpha: Vec<f64> = alpha.iter().map(|a| a.max(0.0) * scale).collect();
                    let objective = alpha.iter().map(|a| a * a).sum();
                    return Ok(OracleSolution {
                        y: lp.image(&alpha),
                        alpha,
                        objective,
                    });
                }
                Some(q) => {
                    working.remove(q);
                    continue;
                }
            }
        }
        let mut step = 1.0;
        let mut blocking = None;
        for (k, row) in rows.iter().enumerate() {
            if working.contains(&k) {
                continue;
            }
            let ap = row.dot(&p);
            if ap < -1e-14 * p.amax() {
                let slack = (rows[k].dot(&alpha) - rhs(k)).max(0.0);
                let s = slack / -ap;
                if s < step {
                    step = s;
                    blocking = Some(k);
                }
            }
        }
        alpha += &p * step;
        match blocking {
            Some(k) => working.push(k),
            None => stationary = true,
        }
    }
    Err(Error::Lp("active-set iteration limit reached".into()))
}

/// Tries every support set and keeps the cheapest feasible one.
pub fn enumerate_l1(h: &DMatrix<f64>, x: &[f64]) -> Result<OracleSolution> {
    let n = x.len();
    if n > ENUMERATION_CAP {
        return Err(Error::TooLarge {
            voxels: n,
            cap: ENUMERATION_CAP,
        });
    }
    let tol = 1e-9 * x.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
    let mut best: Option<OracleSolution> = None;
    for set in 0u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|&i| set & (1 << i) != 0).collect();
        let k = support.len();
        let mut alpha = vec![0.0; n];
        if k > 0 {
            let hs = DMatrix::from_fn(k, k, |r, c| h[(support[r], support[c])]);
            let b = DVector::from_fn(k, |r, _| -x[support[r]]);
            let lu = hs.full_piv_lu();
            if !lu.is_invertible() {
                continue;
            }
            let Some(sol) = lu.solve(&b) else { continue };
            if sol.iter().any(|&a| a < -tol) {
                continue;
            }
            for (r, &i) in support.iter().enumerate() {
                alpha[i] = sol[r].max(0.0);
            }
        }
        let hy = h * DVector::from_column_slice(&alpha);
        let y: Vec<f64> = x.iter().zip(hy.iter()).map(|(a, b)| a + b).collect();
        if y.iter().any(|&v| v < -tol) {
            continue;
        }
        let objective: f64 = alpha.iter().sum();
        if best.as_ref().is_none_or(|b| objective < b.objective) {
            best = Some(OracleSolution {
                y,
                alpha,
                objective,
            });
        }
    }
    best.ok_or_else(|| Error::Infeasible {
        sum: x.iter().sum(),
    })
}

/// Largest voxelwise difference between the L1 and L2 optimal images.
pub fn norm_equivalence_check(
    x: &Volume,
    mask: &SpreadMask,
    policy: BoundaryPolicy,
) -> Result<f64> {
    if x.len() > L2_CAP {
        return Err(Error::TooLarge {
            voxels: x.len(),
            cap: L2_CAP,
        });
    }
    let l1 = oracle_solve(&DenseLp::from_volume(Norm::L1, x, mask, policy)?)?;
    let l2 = oracle_solve(&DenseLp::from_volume(Norm::L2, x, mask, policy)?)?;
    Ok(l1
        .y
        .iter()
        .zip(&l2.y)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}
