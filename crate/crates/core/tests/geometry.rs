use krflow::geometry::{Geometry, GeometrySpec, InitialPotential, PotentialTerm};
use krflow::discretization::{ScalarField, Spectral};
use proptest::prelude::*;
use std::f64::consts::PI;

fn spec(eps: f64, potential: InitialPotential) -> GeometrySpec {
    GeometrySpec { base_grid: 8, fiber_grid: 8, twist_amplitude: eps, initial_potential: potential, ..GeometrySpec::default() }
}

fn cos_term(a: f64, p: i32, q: i32, r: i32, k: i32) -> PotentialTerm {
    PotentialTerm::Cos { a, p, q, r, k }
}

#[test]
fn reference_hat_interpolates_linearly() {
    let g = Geometry::new(&spec(0.01, InitialPotential::single(cos_term(0.02, 1, 0, 0, 1)))).unwrap();
    let half = g.reference_hat(2f64.ln());
    for i in (0..g.grid.len()).step_by(37) {
        let o = g.omega0.at(i);
        let c = g.chi.at(i);
        let h = half.at(i);
        assert!((h.bb - 0.5 * (o.bb + c.bb)).abs() < 1e-15);
        assert!((h.ff - 0.5 * o.ff).abs() < 1e-15);
        assert!((h.bf - o.bf * 0.5).norm() < 1e-15);
    }
    let late = g.reference_hat(20.0);
    let spread = g.omega0.max_abs_diff(&g.chi);
    assert!(late.max_abs_diff(&g.chi) <= (-20f64).exp() * spread * (1.0 + 1e-12));
}

#[test]
fn reference_tilde_is_a_product() {
    let g = Geometry::new(&spec(0.01, InitialPotential::zero())).unwrap();
    let r0 = g.reference_tilde(0.0);
    let r1 = g.reference_tilde(1.0);
    for i in 0..g.grid.len() {
        assert_eq!(r0.bb[i], g.chi.bb[i]);
        assert_eq!(r0.ff[i], 1.0);
        assert_eq!(r1.ff[i], (-1f64).exp());
        assert_eq!(r1.bf[i].norm(), 0.0);
    }
}

#[test]
fn untwisted_volume_density_is_two() {
    let g = Geometry::new(&spec(0.0, InitialPotential::zero())).unwrap();
    let omega = g.volume_form().unwrap();
    assert!(omega.values.iter().all(|v| (v - 2.0).abs() < 1e-14));
}

#[test]
fn zero_potential_has_zero_flat_correction() {
    let g = Geometry::new(&spec(0.01, InitialPotential::zero())).unwrap();
    assert!(g.flat.rho.sup_abs() < 1e-14);
    assert!(g.flat.g_flat.iter().all(|v| (v - 1.0).abs() < 1e-14));
}

#[test]
fn single_fiber_mode_flat_potential_closed_form() {
    // ψ0 = δ cos 2πs on the square fiber: ∂∂̄ψ0 = −π²δ cos 2πs, so ρ = −ψ0 + c
    // with c fixed by the weighted mean: c = −π²δ²/2.
    let delta = 0.03;
    let g = Geometry::new(&spec(0.0, InitialPotential::single(cos_term(delta, 0, 0, 1, 0)))).unwrap();
    let c = -PI * PI * delta * delta / 2.0;
    for i in 0..g.grid.len() {
        let s = g.grid.coords(i)[2];
        let expect = -delta * (2.0 * PI * s).cos() + c;
        assert!((g.flat.rho.values[i] - expect).abs() < 1e-13, "{i}");
    }
}

fn potential_strategy() -> impl Strategy<Value = InitialPotential> {
    prop::collection::vec((-0.01f64..0.01, -1i32..=1, -1i32..=1, -1i32..=1, -1i32..=1, any::<bool>()), 1..4).prop_map(|terms| {
        InitialPotential {
            terms: terms
                .into_iter()
                .map(|(a, p, q, r, k, prod)| if prod { PotentialTerm::Prod { a, p, q, r, k } } else { cos_term(a, p, q, r, k) })
                .collect(),
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn volume_density_is_fiber_constant_and_normalised(eps in 0.0f64..0.03, psi in potential_strategy()) {
        let g = Geometry::new(&spec(eps, psi)).unwrap();
        let omega = g.volume_form().unwrap();
        prop_assert!(omega.max_fiber_variation() <= 1e-15 * omega.values.iter().cloned().fold(0.0, f64::max));
        let class = g.class_integral();
        prop_assert!((omega.total_integral - class).abs() <= 1e-10 * class.abs());
    }

    #[test]
    fn flat_potential_has_zero_weighted_fiber_mean(eps in 0.0f64..0.03, psi in potential_strategy()) {
        let g = Geometry::new(&spec(eps, psi)).unwrap();
        for b in 0..g.grid.base_len() {
            prop_assert!(g.flat.weighted_fiber_mean(&g.omega0, b).abs() < 1e-12);
        }
    }

    #[test]
    fn reference_hat_is_convex(eps in 0.0f64..0.03, psi in potential_strategy(), t in 0.0f64..12.0) {
        // λ_min is concave, so λ_min(ω̂_t) ≥ e^{-t}λ_min(ω_0) + (1 − e^{-t})λ_min(χ)
        // pointwise, which implies the global floor min(λ_min(ω_0), λ_min(χ)).
        let g = Geometry::new(&spec(eps, psi)).unwrap();
        let hat = g.reference_hat(t);
        let e = (-t).exp();
        let mut global = f64::INFINITY;
        for i in 0..g.grid.len() {
            let lo = hat.at(i).eigenvalues().0;
            let bound = e * g.omega0.at(i).eigenvalues().0 + (1.0 - e) * g.chi.at(i).eigenvalues().0;
            prop_assert!(lo >= bound - 1e-14, "point {}: {} < {}", i, lo, bound);
            global = global.min(lo);
        }
        let floor = g.omega0.min_eigenvalue().1.min(g.chi.min_eigenvalue().1);
        prop_assert!(global >= floor - 1e-14);
    }

    #[test]
    fn potentials_keep_the_grid_average(eps in 0.0f64..0.03, psi in potential_strategy(), seed in 0u64..1000, t in 0.0f64..5.0) {
        let g = Geometry::new(&spec(eps, psi)).unwrap();
        let phi = krflow::oracle::band_limited_field(g.grid, 2, seed);
        let phi = ScalarField { grid: g.grid, values: phi.values.iter().map(|v| 0.01 * v).collect() };
        let h = Spectral::new(g.grid).complex_hessian(&phi).unwrap();
        let hat = g.reference_hat(t);
        let mut sum = hat.clone();
        for i in 0..g.grid.len() {
            sum.set(i, hat.at(i).add(&h.at(i)));
        }
        let (a, b, c) = sum.averages();
        let (a0, b0, c0) = hat.averages();
        prop_assert!((a - a0).abs() < 1e-12 && (b - b0).abs() < 1e-12 && (c - c0).norm() < 1e-12);
    }
}
