#![allow(dead_code)]

use negspread::grid::Volume;
use negspread::solver::Solution;
use negspread::spread::{SpreadMask, Tap};
use rand::seq::SliceRandom;
use rand::Rng;

/// Random valid mask for a grid of `ndim` axes. Every unit axis neighbour
/// is present so the grid stays connected; extra symmetric pairs are drawn
/// from the radius-2 neighbourhood. Weights are dyadic, so the zero sum is
/// exact.
pub fn random_mask(rng: &mut impl Rng, ndim: usize) -> SpreadMask {
    let axes: Vec<usize> = (3 - ndim..3).collect();
    let mut pairs: Vec<[i32; 3]> = axes
        .iter()
        .map(|&a| {
            let mut o = [0; 3];
            o[a] = 1;
            o
        })
        .collect();
    let mut extra = Vec::new();
    let range = -2..=2;
    for dz in range.clone() {
        for dy in range.clone() {
            for dx in range.clone() {
                let o = [dz, dy, dx];
                if (0..3).any(|a| o[a] != 0 && !axes.contains(&a)) || o == [0, 0, 0] {
                    continue;
                }
                // keep one representative of each +/- pair
                if o.iter().find(|&&v| v != 0).copied().unwrap_or(0) < 0 {
                    continue;
                }
                if pairs.contains(&o) {
                    continue;
                }
                extra.push(o);
            }
        }
    }
    extra.shuffle(rng);
    let k = rng.gen_range(0..=extra.len().min(4));
    pairs.extend(extra.into_iter().take(k));

    let mut ints: Vec<u64> = pairs.iter().map(|_| rng.gen_range(1..=8)).collect();
    let total: u64 = ints.iter().sum::<u64>() * 2;
    let pow = total.next_power_of_two();
    *ints.last_mut().unwrap() += (pow - total) / 2;
    let denom = pow as f64;
    let mut taps = vec![Tap::new([0, 0, 0], 1.0)];
    for (o, &k) in pairs.iter().zip(&ints) {
        let w = -(k as f64) / denom;
        taps.push(Tap::new(*o, w));
        taps.push(Tap::new(o.map(|v| -v), w));
    }
    SpreadMask::new(taps).expect("generated mask is valid")
}

/// Random dims: 1D lengths 2..=64, 2D up to 8x8, 3D up to 4x4x4.
pub fn random_dims(rng: &mut impl Rng) -> Vec<usize> {
    match rng.gen_range(0..3) {
        0 => vec![rng.gen_range(2..=64)],
        1 => vec![rng.gen_range(2..=8), rng.gen_range(2..=8)],
        _ => (0..3).map(|_| rng.gen_range(2..=4)).collect(),
    }
}

/// Image with a negative fraction drawn from `[lo, hi]` and a sum of the
/// requested sign: `Some(true)` non-negative, `Some(false)` negative.
pub fn random_image(
    rng: &mut impl Rng,
    dims: &[usize],
    lo: f64,
    hi: f64,
    nonneg_sum: bool,
) -> Volume {
    let n: usize = dims.iter().product();
    let frac = rng.gen_range(lo..=hi);
    let neg = ((frac * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1));
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let scale = 10f64.powf(rng.gen_range(-2.0..4.0));
    let mut data = vec![0.0; n];
    for (k, &i) in idx.iter().enumerate() {
        let v = rng.gen_range(0.05..1.0) * scale;
        data[i] = if k < neg { -v } else { v };
    }
    let pos: f64 = data.iter().filter(|v| **v > 0.0).sum();
    let negs: f64 = -data.iter().filter(|v| **v < 0.0).sum::<f64>();
    let target = if nonneg_sum {
        negs * rng.gen_range(1.01..2.0)
    } else {
        negs * rng.gen_range(0.3..0.95)
    };
    if pos > 0.0 {
        for v in data.iter_mut().filter(|v| **v > 0.0) {
            *v *= target / pos;
        }
    }
    Volume::new(dims, data).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()))
}

/// `|sum(y) - sum(x)| / (sum|x| + sum(alpha))`.
pub fn mean_error(x: &Volume, s: &Solution) -> f64 {
    (s.y.sum() - x.sum()).abs() / (x.abs_sum() + s.alpha.total())
}

/// Largest complementarity excess `alpha * max(y, 0) - tol * max(alpha, 1)`;
/// non-positive means the condition holds.
pub fn complementarity_excess(s: &Solution) -> f64 {
    let tol = s.report.neg_tolerance;
    s.alpha
        .data()
        .iter()
        .zip(s.y.data())
        .map(|(&a, &y)| a * y.max(0.0) - tol * a.max(1.0))
        .fold(f64::NEG_INFINITY, f64::max)
}
