use krflow::analysis::{monitor, MonitorContext};
use krflow::flow::{self, compose_product, FlowParams, FlowProblem, ReducedFactors, TorusFlow};
use krflow::geometry::{Geometry, GeometrySpec, InitialPotential};
use krflow::Error;

fn spec(potential: &str) -> GeometrySpec {
    GeometrySpec { base_grid: 8, fiber_grid: 8, initial_potential: potential.parse().unwrap(), ..GeometrySpec::default() }
}

fn params(t_end: f64, dt: f64, dt_sample: f64) -> FlowParams {
    FlowParams { t_end, dt_max: dt, dt_sample, ..FlowParams::default() }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

#[test]
fn stationary_solution_survives_a_thousand_small_steps() {
    let s = spec("0");
    for integrator in [flow::Integrator::Etd2, flow::Integrator::Rk4] {
        let p = FlowParams { integrator, ..params(1.0, 1e-3, 1.0) };
        let f = TorusFlow::from_spec(&s, &p).unwrap();
        let (_, last) = flow::run(&f, &p, |_| Ok(())).unwrap();
        assert!(last.steps >= 1000);
        assert!(sup(&last.phi) < 1e-10, "{}", sup(&last.phi));
    }
}

#[test]
fn fiber_scale_three_is_stationary_against_its_own_volume_form() {
    let s = GeometrySpec { initial_fiber_scale: 3.0, ..spec("0") };
    let f = TorusFlow::from_spec(&s, &FlowParams::default()).unwrap();
    let zero = vec![0.0; f.len()];
    for t in [0.0, 1.0, 5.0] {
        assert!(sup(&f.rhs(t, &zero).unwrap().values) < 1e-12);
    }
}

#[test]
fn fiber_scale_three_against_the_unit_volume_form_gives_log_three() {
    // Ω taken from χ + ω_E while ω_0 = χ + 3ω_E: rhs ≡ log 3 at φ ≡ 0 and the
    // solution is the constant φ = log 3 (1 − e^{-t}).
    let p = params(5.0, 0.01, 1.0);
    let unit = Geometry::new(&spec("0")).unwrap();
    let omega = unit.volume_form().unwrap();
    let g = Geometry::new(&GeometrySpec { initial_fiber_scale: 3.0, ..spec("0") }).unwrap();
    let f = TorusFlow::new(g, omega, &p);
    let zero = vec![0.0; f.len()];
    let r = f.rhs(0.7, &zero).unwrap();
    assert!(r.values.iter().all(|v| (v - 3f64.ln()).abs() < 1e-12));
    let (_, last) = flow::run(&f, &p, |_| Ok(())).unwrap();
    let expect = 3f64.ln() * (1.0 - (-5f64).exp());
    assert!(last.phi.iter().all(|v| (v - expect).abs() < 1e-8), "{} vs {expect}", last.phi[0]);
}

#[test]
fn negative_fiber_hessian_loses_positivity() {
    let f = TorusFlow::from_spec(&spec("0"), &FlowParams::default()).unwrap();
    let grid = f.grid();
    let phi: Vec<f64> = (0..grid.len()).map(|i| (2.0 * std::f64::consts::PI * grid.coords(i)[2]).cos()).collect();
    match f.rhs(0.0, &phi) {
        Err(Error::PositivityLost { min_eig, .. }) => assert!(min_eig <= 1e-8),
        other => panic!("expected PositivityLost, got {other:?}"),
    }
}

#[test]
fn grid_average_fiber_coefficient_collapses_exactly() {
    let s = spec("prod(0.03; 1,0,1,0) + cos(0.02; 0,1,0,1)");
    let p = params(2.0, 0.01, 0.5);
    let f = TorusFlow::from_spec(&s, &p).unwrap();
    let b0 = f.geometry.omega0.averages().1;
    let (rows, _) = flow::run(&f, &p, |st| {
        let m = f.metric(st.t, &st.phi)?;
        Ok((st.t, m.averages().1))
    })
    .unwrap();
    for (t, b) in rows {
        assert!((b - (-t).exp() * b0).abs() < 1e-10, "t = {t}: {b}");
    }
}

#[test]
fn identical_configs_give_bit_identical_monitors() {
    let s = spec("prod(0.03; 1,0,1,0)");
    let p = params(0.5, 0.01, 0.1);
    let series = || {
        let f = TorusFlow::from_spec(&s, &p).unwrap();
        let ctx = MonitorContext::new(&f, None);
        let (rows, _) = flow::run(&f, &p, |st| monitor(&f, &ctx, st)).unwrap();
        rows.iter().map(|r| r.to_row().map(f64::to_bits)).collect::<Vec<_>>()
    };
    assert_eq!(series(), series());
}

#[test]
fn product_data_matches_the_reduced_run() {
    let s = spec("cos(0.04; 1,0,0,0) + cos(0.03; 0,0,0,1)");
    let p = params(1.0, 0.005, 0.25);
    let full = TorusFlow::from_spec(&s, &p).unwrap();
    let (full_rows, _) = flow::run(&full, &p, |st| Ok(st.phi.clone())).unwrap();
    let factors = ReducedFactors::new(&s, &p).unwrap();
    let traj = flow::product_reduced_run(&factors, &p, |st| Ok(compose_product(full.grid(), &st[0].phi, &st[1].phi).values)).unwrap();
    for (a, b) in full_rows.iter().zip(&traj.records) {
        let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-6, "{d}");
    }
}

#[test]
fn zero_product_data_keeps_both_factors_at_zero() {
    let s = spec("0");
    let p = params(1.0, 0.01, 0.5);
    let factors = ReducedFactors::new(&s, &p).unwrap();
    let traj = flow::product_reduced_run(&factors, &p, |st| Ok(sup(&st[0].phi).max(sup(&st[1].phi)))).unwrap();
    assert!(traj.records.iter().all(|v| *v < 1e-13));
}

#[test]
fn base_only_data_keeps_the_fiber_block_on_the_reference() {
    let s = GeometrySpec { twist_amplitude: 0.01, ..spec("cos(0.02; 1,1,0,0)") };
    let p = params(2.0, 0.01, 0.5);
    let f = TorusFlow::from_spec(&s, &p).unwrap();
    let (rows, _) = flow::run(&f, &p, |st| {
        let m = f.metric(st.t, &st.phi)?;
        let e = (-st.t).exp();
        Ok(m.ff.iter().map(|v| (v - e).abs()).fold(0.0, f64::max).max(m.bf.iter().map(|c| c.norm()).fold(0.0, f64::max)))
    })
    .unwrap();
    assert!(rows.iter().all(|d| *d < 1e-12), "{rows:?}");
}

#[test]
fn homogeneous_run_tracks_the_class_coefficients() {
    let s = GeometrySpec { initial_fiber_scale: 3.0, ..spec("0") };
    let p = params(5.0, 0.01, 1.0);
    let f = TorusFlow::from_spec(&s, &p).unwrap();
    let chi_mean = f.geometry.chi.averages().0;
    let (rows, _) = flow::run(&f, &p, |st| {
        let m = f.metric(st.t, &st.phi)?;
        let (bb, ff, _) = m.averages();
        Ok((st.t, bb / chi_mean, ff))
    })
    .unwrap();
    for (t, a, b) in rows {
        let c = flow::homogeneous_flow(1.0, 3.0, t);
        assert!((a - c.a).abs() < 1e-10 && (b - c.b).abs() < 1e-10, "t = {t}: ({a}, {b})");
    }
}

#[test]
fn oversized_steps_halve_or_fail_cleanly() {
    let s = spec("prod(0.05; 1,0,1,0)");
    let p = FlowParams { integrator: flow::Integrator::Rk4, c_cfl: 50.0, max_halvings: 3, ..params(0.5, 0.5, 0.25) };
    let f = TorusFlow::from_spec(&s, &p).unwrap();
    match flow::run(&f, &p, |st| Ok(st.phi.clone())) {
        Ok((rows, _)) => assert!(rows.iter().flatten().all(|v| v.is_finite())),
        Err(e) => assert!(matches!(e, Error::PositivityLost { .. } | Error::NonFiniteValue { .. }), "{e}"),
    }
}

#[test]
fn non_split_data_is_rejected_by_the_reduced_run() {
    let s = GeometrySpec { initial_potential: InitialPotential::single(krflow::geometry::PotentialTerm::Prod { a: 0.01, p: 1, q: 0, r: 1, k: 0 }), ..spec("0") };
    assert!(matches!(ReducedFactors::new(&s, &FlowParams::default()), Err(Error::ConfigInvalid { .. })));
}
