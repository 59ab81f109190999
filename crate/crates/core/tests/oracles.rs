mod common;

use negspread::grid::{sum, Volume};
use negspread::operator::{apply, assemble_dense, TransferMap};
use negspread::oracle::{enumerate_l1, oracle_solve, DenseLp, Norm};
use negspread::solver::{solve, SolverConfig};
use negspread::spread::{make_preset, BoundaryPolicy};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn simplex_matches_exhaustive_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let dims = if rng.gen_bool(0.5) {
            vec![rng.gen_range(2..=12)]
        } else {
            vec![rng.gen_range(2..=3), rng.gen_range(2..=4)]
        };
        let mask = common::random_mask(&mut rng, dims.len());
        let x = common::random_image(&mut rng, &dims, 0.1, 0.6, true);
        let h = assemble_dense(&mask, &dims, BoundaryPolicy::Renormalize).unwrap();
        let brute = enumerate_l1(&h, x.data()).unwrap();
        let lp = DenseLp::new(Norm::L1, h, x.data().to_vec()).unwrap();
        let simplex = oracle_solve(&lp).unwrap();
        let m = x.max_abs();
        assert!(common::max_abs_diff(&brute.y, &simplex.y) <= 1e-9 * m);
        assert!((brute.objective - simplex.objective).abs() <= 1e-9 * m * x.len() as f64);
        let s = solve(&x, &mask, &SolverConfig::default()).unwrap();
        assert!(common::max_abs_diff(&brute.y, s.y.data()) <= 1e-7 * m);
    }
}

#[test]
fn l1_and_l2_oracles_share_the_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let dims = vec![rng.gen_range(2..=5), rng.gen_range(2..=5)];
        let mask = common::random_mask(&mut rng, 2);
        let x = common::random_image(&mut rng, &dims, 0.1, 0.6, true);
        let p = BoundaryPolicy::Renormalize;
        let l1 = oracle_solve(&DenseLp::from_volume(Norm::L1, &x, &mask, p).unwrap()).unwrap();
        let l2 = oracle_solve(&DenseLp::from_volume(Norm::L2, &x, &mask, p).unwrap()).unwrap();
        assert!(common::max_abs_diff(&l1.y, &l2.y) <= 1e-6 * x.max_abs());
    }
}

#[test]
fn apply_matches_dense_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..30 {
        let dims = common::random_dims(&mut rng);
        let mask = common::random_mask(&mut rng, dims.len());
        let n: usize = dims.iter().product();
        let alpha: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.4) {
                    rng.gen_range(0.0..3.0)
                } else {
                    0.0
                }
            })
            .collect();
        let a = TransferMap::new(&dims, alpha.clone()).unwrap();
        let fast = apply(&mask, &a, BoundaryPolicy::Renormalize).unwrap();
        let h = assemble_dense(&mask, &dims, BoundaryPolicy::Renormalize).unwrap();
        let dense = h * nalgebra::DVector::from_vec(alpha);
        assert!(common::max_abs_diff(fast.data(), dense.as_slice()) <= 1e-12);
    }
}

#[test]
fn dense_matrix_of_a_small_plane() {
    // 2x2 grid, 2d-4: each voxel keeps its two in-grid neighbours at -1/2
    let h = assemble_dense(
        &make_preset("2d-4").unwrap(),
        &[2, 2],
        BoundaryPolicy::Renormalize,
    )
    .unwrap();
    #[rustfmt::skip]
    let want = nalgebra::DMatrix::from_row_slice(4, 4, &[
         1.0, -0.5, -0.5,  0.0,
        -0.5,  1.0,  0.0, -0.5,
        -0.5,  0.0,  1.0, -0.5,
         0.0, -0.5, -0.5,  1.0,
    ]);
    assert_eq!(h, want);
}

fn exact_sum(values: &[f64]) -> BigRational {
    values
        .iter()
        .fold(BigRational::from_integer(BigInt::from(0)), |acc, &v| {
            acc + BigRational::from_float(v).unwrap()
        })
}

#[test]
fn compensated_sum_against_exact_rationals() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let n = rng.gen_range(1..2000);
        let values: Vec<f64> = (0..n)
            .map(|_| {
                let e = rng.gen_range(-20..20);
                rng.gen_range(-1.0..1.0) * 2f64.powi(e)
            })
            .collect();
        let exact = exact_sum(&values);
        let got = sum(values.iter().copied());
        let err = (BigRational::from_float(got).unwrap() - &exact).abs();
        let abs: f64 = values.iter().map(|v| v.abs()).sum();
        let exact_f = exact.to_f64().unwrap();
        let bound = 2.0 * f64::EPSILON * exact_f.abs() + n as f64 * f64::EPSILON.powi(2) * abs;
        assert!(err.to_f64().unwrap() <= bound, "n={n}");
    }
    // catastrophic cancellation that a naive loop gets wrong
    let values = [1e16, 1.0, -1e16, 1.0];
    assert_eq!(sum(values.iter().copied()), 2.0);
    assert_eq!(Volume::new(&[4], values.to_vec()).unwrap().sum(), 2.0);
}
