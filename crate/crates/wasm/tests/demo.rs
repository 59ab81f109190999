use negspread_wasm::demo::{phantom_slice, solve_grid};

#[test]
fn line_example() {
    let s = solve_grid(&[2.0, -1.0, 2.0], 3, 1, "1d-2").unwrap();
    assert_eq!(s.y, vec![1.5, 0.0, 1.5]);
    assert_eq!(s.alpha, vec![0.0, 1.0, 0.0]);
    assert!(s.converged);
}

#[test]
fn image_keeps_its_total() {
    let values = vec![3.0, -1.0, 2.0, 0.5, -2.0, 4.0, 1.0, -0.5, 1.0];
    let s = solve_grid(&values, 3, 3, "2d-8").unwrap();
    let before: f64 = values.iter().sum();
    let after: f64 = s.y.iter().sum();
    let abs: f64 = values.iter().map(|v| v.abs()).sum();
    assert!((before - after).abs() <= 1e-8 * (abs + s.objective));
    assert!(s.y.iter().all(|&v| v >= 0.0));
}

#[test]
fn bad_requests_are_errors() {
    assert!(solve_grid(&[1.0, 2.0], 3, 1, "1d-2").is_err());
    assert!(solve_grid(&[-1.0, 0.5], 2, 1, "1d-2")
        .unwrap_err()
        .contains("infeasible"));
    assert!(solve_grid(&[1.0, 2.0], 2, 1, "9d-1").is_err());
    assert!(phantom_slice(4, 1.0, 0).is_err());
}

#[test]
fn slice_demo_reduces_cold_error() {
    let s = phantom_slice(64, 50e3, 5).unwrap();
    assert_eq!(s.noisy.len(), 64 * 64);
    assert!(s.processed.iter().all(|&v| v >= 0.0));
    assert!(s.cold_negative_fraction > 0.3);
    assert!(s.cold_rmse_after < 0.7 * s.cold_rmse_before);
    assert_eq!(s.profile_radius.len(), s.profile_after.len());
}
