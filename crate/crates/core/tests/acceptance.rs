//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! The 10^7-voxel stress tier runs only when `--ignored` or
//! `--include-ignored` is passed, or `NEGSPREAD_STRESS` is set:
//! `cargo test -p negspread --test acceptance -- --include-ignored`.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use negspread::grid::{region_stats, Region, Volume};
use negspread::metrics::{radial_profile, Direction, ProfileSpec};
use negspread::operator::{apply, TransferMap};
use negspread::oracle::{oracle_solve, DenseLp, Norm};
use negspread::phantom::{add_noise_in, body_region, make_phantom, NoiseSpec, PhantomSpec};
use negspread::solver::{solve, solve_observed, Solution, SolverConfig, SweepOrder, Tolerance};
use negspread::spread::{make_preset, BoundaryPolicy};
use negspread::Error;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

const POLICY: BoundaryPolicy = BoundaryPolicy::Renormalize;

/// Mean preservation and complementarity over every solve of the run.
#[derive(Default)]
struct Tally {
    solves: usize,
    worst_mean: f64,
    converged: usize,
    worst_complementarity: f64,
}

impl Tally {
    fn record(&mut self, x: &Volume, s: &Solution) {
        self.solves += 1;
        self.worst_mean = self.worst_mean.max(common::mean_error(x, s));
        if s.report.converged {
            self.converged += 1;
            let c = common::complementarity_excess(s);
            if self.converged == 1 || c > self.worst_complementarity {
                self.worst_complementarity = c;
            }
        }
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn precise() -> SolverConfig {
    SolverConfig {
        neg_tolerance: Tolerance::Relative(1e-12),
        max_outer_iterations: 1_000_000,
        max_inner_sweeps: 1_000_000,
        ..Default::default()
    }
}

fn oracle_equivalence(tally: &mut Tally) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let (mut worst_y, mut worst_obj, mut failures) = (0.0f64, 0.0f64, 0);
    // the transfer total inherits the residual negativity amplified by the
    // conditioning of long chains, so the solves use a tighter tolerance
    let cfg = precise();
    let instances = 200;
    for _ in 0..instances {
        let dims = common::random_dims(&mut rng);
        let mask = common::random_mask(&mut rng, dims.len());
        let x = common::random_image(&mut rng, &dims, 0.1, 0.6, true);
        let m = x.max_abs();
        let s = solve(&x, &mask, &cfg).unwrap();
        tally.record(&x, &s);
        let o = oracle_solve(&DenseLp::from_volume(Norm::L1, &x, &mask, POLICY).unwrap()).unwrap();
        let dy = common::max_abs_diff(s.y.data(), &o.y) / m;
        let dobj = (s.alpha.total() - o.objective).abs() / (m * x.len() as f64);
        worst_y = worst_y.max(dy);
        worst_obj = worst_obj.max(dobj);
        if !s.report.converged || dy > 1e-7 || dobj > 1e-7 {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed <= Duration::from_secs(120),
        format!(
            "{instances} instances, {failures} failures, max |dy|/max|x| = {worst_y:.2e}, \
             max |dobj|/(max|x| N) = {worst_obj:.2e}, {elapsed:.1?}"
        ),
    )
}

fn feasibility(tally: &mut Tally) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut rejected = 0;
    for _ in 0..100 {
        let dims = common::random_dims(&mut rng);
        let mask = common::random_mask(&mut rng, dims.len());
        let x = common::random_image(&mut rng, &dims, 0.1, 0.9, false);
        assert!(x.sum() < 0.0);
        if matches!(
            solve(&x, &mask, &SolverConfig::default()),
            Err(Error::Infeasible { .. })
        ) {
            rejected += 1;
        }
    }
    let mut solved = 0;
    for _ in 0..100 {
        let dims = common::random_dims(&mut rng);
        let mask = common::random_mask(&mut rng, dims.len());
        let x = common::random_image(&mut rng, &dims, 0.1, 0.9, true);
        if let Ok(s) = solve(&x, &mask, &SolverConfig::default()) {
            tally.record(&x, &s);
            if s.report.converged && s.y.min() >= 0.0 {
                solved += 1;
            }
        }
    }
    // a zero-mean image leaves up to N * tolerance of positive residue, so
    // these solves run with a tolerance below 1e-9 / N
    let zero_cfg = precise();
    let (mut zero_ok, mut worst_zero) = (0, 0.0f64);
    let zero_cases = 50;
    for _ in 0..zero_cases {
        let dims = common::random_dims(&mut rng);
        let mask = common::random_mask(&mut rng, dims.len());
        let mut data = common::random_image(&mut rng, &dims, 0.2, 0.6, true).into_data();
        let shift = data.iter().sum::<f64>() / data.len() as f64;
        data.iter_mut().for_each(|v| *v -= shift);
        let x = Volume::new(&dims, data).unwrap();
        if let Ok(s) = solve(&x, &mask, &zero_cfg) {
            tally.record(&x, &s);
            let r = s.y.max_abs() / x.max_abs();
            worst_zero = worst_zero.max(r);
            if s.report.converged && r <= 1e-9 {
                zero_ok += 1;
            }
        }
    }
    outcome(
        rejected == 100 && solved == 100 && zero_ok == zero_cases,
        format!(
            "{rejected}/100 negative-mean rejected, {solved}/100 solved, \
             {zero_ok}/{zero_cases} zero-mean collapsed (max |y|/max|x| = {worst_zero:.2e})"
        ),
    )
}

fn uniqueness(tally: &mut Tally) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..50 {
        let dims = common::random_dims(&mut rng);
        let mask = common::random_mask(&mut rng, dims.len());
        let x = common::random_image(&mut rng, &dims, 0.1, 0.6, true);
        let n = x.len();
        let mut orders = vec![SweepOrder::Lexicographic, SweepOrder::Reverse];
        for _ in 0..3 {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(&mut rng);
            orders.push(SweepOrder::Custom(p));
        }
        let images: Vec<Solution> = orders
            .into_iter()
            .map(|o| {
                let cfg = SolverConfig {
                    sweep_order: o,
                    ..Default::default()
                };
                let s = solve(&x, &mask, &cfg).unwrap();
                tally.record(&x, &s);
                s
            })
            .collect();
        let mut dev = 0.0f64;
        for a in &images {
            for b in &images {
                dev = dev.max(common::max_abs_diff(a.y.data(), b.y.data()));
            }
        }
        let rel = dev / x.max_abs();
        worst = worst.max(rel);
        if rel > 1e-7 {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!("50 instances x 5 orders, max deviation/max|x| = {worst:.2e}"),
    )
}

fn norm_independence(tally: &mut Tally) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for _ in 0..100 {
        let dims = common::random_dims(&mut rng);
        let mask = common::random_mask(&mut rng, dims.len());
        let x = common::random_image(&mut rng, &dims, 0.1, 0.6, true);
        assert!(x.len() <= 64);
        let l1 = oracle_solve(&DenseLp::from_volume(Norm::L1, &x, &mask, POLICY).unwrap()).unwrap();
        let l2 = oracle_solve(&DenseLp::from_volume(Norm::L2, &x, &mask, POLICY).unwrap()).unwrap();
        let rel = common::max_abs_diff(&l1.y, &l2.y) / x.max_abs();
        worst = worst.max(rel);
        if rel > 1e-6 {
            failures += 1;
        }
        tally.record(&x, &solve(&x, &mask, &SolverConfig::default()).unwrap());
    }
    outcome(
        failures == 0,
        format!("100 instances, max |y_L1 - y_L2|/max|x| = {worst:.2e}"),
    )
}

#[derive(Deserialize)]
struct Fixture {
    dims: Vec<usize>,
    mask: String,
    x: Vec<f64>,
    oracle_y: Vec<f64>,
    oracle_objective: f64,
}

fn new_negative_regression(tally: &mut Tally) -> Outcome {
    let path =
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/new_negative_4x4.json");
    let f: Fixture = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let mask = make_preset(&f.mask).unwrap();
    let x = Volume::new(&f.dims, f.x.clone()).unwrap();
    let mut first = None;
    let s = solve_observed(&x, &mask, &SolverConfig::default(), |outer, alpha| {
        if outer == 1 {
            let t = TransferMap::new(&f.dims, alpha.to_vec()).unwrap();
            let d = apply(&mask, &t, POLICY).unwrap();
            first = Some(
                f.x.iter()
                    .zip(d.data())
                    .map(|(a, b)| a + b)
                    .collect::<Vec<_>>(),
            );
        }
    })
    .unwrap();
    tally.record(&x, &s);
    let first = first.unwrap();
    let tol = s.report.neg_tolerance;
    let appeared: Vec<usize> = (0..f.x.len())
        .filter(|&i| f.x[i] >= 0.0 && first[i] < -tol)
        .collect();
    let m = x.max_abs();
    let dy = common::max_abs_diff(s.y.data(), &f.oracle_y) / m;
    let dobj = (s.alpha.total() - f.oracle_objective).abs() / (m * x.len() as f64);
    outcome(
        !appeared.is_empty()
            && s.report.outer_iterations == 2
            && s.report.converged
            && dy <= 1e-7
            && dobj <= 1e-7,
        format!(
            "new negative voxels {appeared:?}, {} outer iterations, \
             |dy|/max|x| = {dy:.2e}",
            s.report.outer_iterations
        ),
    )
}

fn region<'a>(rs: &'a [Region], name: &str) -> &'a Region {
    rs.iter().find(|r| r.name() == name).unwrap()
}

fn phantom_experiment(tally: &mut Tally, n: usize) -> Outcome {
    let spec = PhantomSpec::layout(&[n, n, n]).unwrap();
    let (truth, regions) = make_phantom(&spec).unwrap();
    let body = body_region(&regions, truth.len()).unwrap();
    let noise = NoiseSpec {
        sigma: 50e3,
        seed: 1,
        ..Default::default()
    };
    let x = add_noise_in(&truth, &noise, &body).unwrap();
    let cold = region(&regions, "cold");
    let neg_frac = cold
        .indices()
        .iter()
        .filter(|&&i| x.data()[i] < 0.0)
        .count() as f64
        / cold.len() as f64;

    let start = Instant::now();
    let s = solve(&x, &make_preset("3d-6").unwrap(), &SolverConfig::default()).unwrap();
    let elapsed = start.elapsed();
    tally.record(&x, &s);

    let before = region_stats(&x, cold, 0.0).unwrap().rmse;
    let after = region_stats(&s.y, cold, 0.0).unwrap().rmse;
    let reduction = 1.0 - after / before;

    let cyl = &spec.cold_cylinder;
    let profile = ProfileSpec {
        center: cyl.center,
        direction: Direction::RadialFromAxis { axis: cyl.axis },
        bin_width: 1.0,
        max_radius: cyl.radius + 4.0,
        physical: false,
    };
    let first_warm = |v: &Volume| {
        radial_profile(v, &profile)
            .unwrap()
            .into_iter()
            .find(|b| b.radius - 0.5 * profile.bin_width >= cyl.radius)
            .unwrap()
    };
    let (warm_before, warm_after) = (first_warm(&x), first_warm(&s.y));

    let pass = neg_frac >= 0.4
        && s.report.converged
        && reduction >= 0.3
        && s.report.mean_drift <= 1e-6
        && s.y.min() >= 0.0
        && warm_after.mean < warm_before.mean
        && elapsed <= Duration::from_secs(120);
    outcome(
        pass,
        format!(
            "{n}^3, {} in-body voxels, cold negatives {:.1}%, cold RMSE {before:.0} -> {after:.0} \
             (-{:.1}%), drift {:.1e}, min {}, warm bin r={} {:.0} -> {:.0}, solve {elapsed:.1?}",
            body.len(),
            100.0 * neg_frac,
            100.0 * reduction,
            s.report.mean_drift,
            s.y.min(),
            warm_before.radius,
            warm_before.mean,
            warm_after.mean,
        ),
    )
}

fn main() {
    let stress = std::env::args().any(|a| a == "--ignored" || a == "--include-ignored")
        || std::env::var_os("NEGSPREAD_STRESS").is_some();
    let mut tally = Tally::default();
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 oracle equivalence", oracle_equivalence(&mut tally)),
        ("2 feasibility", feasibility(&mut tally)),
        ("3 uniqueness", uniqueness(&mut tally)),
        ("4 norm independence", norm_independence(&mut tally)),
        (
            "6 new negative regression",
            new_negative_regression(&mut tally),
        ),
        ("7 phantom 128^3", phantom_experiment(&mut tally, 128)),
    ];
    if stress {
        results.push((
            "7 phantom stress 216^3",
            phantom_experiment(&mut tally, 216),
        ));
    }
    results.push((
        "5 mean preservation",
        outcome(
            tally.worst_mean <= 1e-8,
            format!(
                "{} solves, max |sum(y) - sum(x)|/(sum|x| + sum(alpha)) = {:.2e}",
                tally.solves, tally.worst_mean
            ),
        ),
    ));
    results.push((
        "8 complementarity",
        outcome(
            tally.converged > 0 && tally.worst_complementarity <= 0.0,
            format!(
                "{} converged solves, max alpha*max(y,0) - tol*max(alpha,1) = {:.2e}",
                tally.converged, tally.worst_complementarity
            ),
        ),
    ));
    results.sort_by_key(|(name, _)| name.to_string());
    if !stress {
        println!("criterion 7 stress tier (216^3): skipped, pass --include-ignored to run");
    }
    let mut failed = 0;
    for (name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {name}: {tag} ({})", o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
