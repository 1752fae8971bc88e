use krflow::discretization::{ProductGrid, ScalarField, Spectral};
use krflow::driver;
use krflow::geometry::GeometrySpec;
use krflow::oracle::{self, dense_hessian_oracle, hessian_tolerance, ode_coefficient_oracle, stationarity_oracle};
use num_complex::Complex64;
use std::f64::consts::PI;

#[test]
fn dense_oracle_is_second_order_on_a_fiber_mode() {
    let grid = ProductGrid::square(1, 64);
    let phi = ScalarField::from_fn(grid, |c| (2.0 * PI * c[2]).cos());
    let dense = dense_hessian_oracle(&phi);
    let spectral = Spectral::new(grid).complex_hessian(&phi).unwrap();
    // leading error π²(2πh)²/12 ≈ 8e-4 relative to the amplitude π²
    for i in 0..grid.len() {
        let exact = -PI * PI * phi.values[i];
        assert!((dense.ff[i] - exact).abs() < 1e-3 * PI * PI);
        assert!((spectral.ff[i] - exact).abs() < 1e-10);
    }
}

#[test]
fn refinement_order_matches_the_scheme() {
    let r = driver::refinement_order_oracle(Complex64::new(0.3, 1.1)).unwrap();
    assert!(r.pass, "{r}");
}

#[test]
fn coefficient_oracle_endpoints() {
    let tr = ode_coefficient_oracle(2.0, 3.0, 5.0, 1e-3).unwrap();
    assert_eq!(tr.samples[0], (0.0, 2.0, 3.0));
    let (t, a, b) = tr.at_end();
    assert!((t - 5.0).abs() < 1e-12);
    assert!((a - (1.0 + (-5f64).exp())).abs() < 1e-10 && (b - 3.0 * (-5f64).exp()).abs() < 1e-10);
    let unit = ode_coefficient_oracle(1.0, 1.0, 3.0, 1e-2).unwrap();
    assert!(unit.samples.iter().all(|(t, a, b)| (a - 1.0).abs() < 1e-12 && (b - (-t).exp()).abs() < 1e-9));
}

#[test]
fn stationary_check_detects_a_scaled_volume_form() {
    let spec = GeometrySpec { base_grid: 8, fiber_grid: 8, ..GeometrySpec::default() };
    assert!(stationarity_oracle(&spec, 1.0).unwrap().pass);
    let bad = stationarity_oracle(&spec, 1.01).unwrap();
    assert!(!bad.pass);
    assert!((bad.deviation - 1.01f64.ln()).abs() < 1e-12, "{}", bad.deviation);
}

#[test]
fn coarse_grids_use_the_relaxed_tolerance() {
    assert!(hessian_tolerance(8) > hessian_tolerance(16) && hessian_tolerance(16) > hessian_tolerance(32));
    let r = driver::hessian_oracle(ProductGrid::new(8, 8, Complex64::new(0.0, 1.0)), 7).unwrap();
    assert!(r.pass, "{r}");
    assert!(r.deviation > hessian_tolerance(32));
}

#[test]
fn band_limited_fields_are_normalised_and_seeded() {
    let grid = ProductGrid::square(8, 8);
    let a = oracle::band_limited_field(grid, 1, 3);
    assert_eq!(a.values, oracle::band_limited_field(grid, 1, 3).values);
    assert_ne!(a.values, oracle::band_limited_field(grid, 1, 4).values);
    assert!(a.sup_abs() <= 1.0 + 1e-12);
}
