//! Config-level orchestration: preflight oracles, the monitored run in the
//! configured mode, and the checks that decide a run's verdict.

use num_complex::Complex64;

use crate::analysis::{self, BoundCheck, DecayFit, EigenBand, FlatnessRates, MonitorContext, MonitorRecord, OctagonSample};
use crate::config::{RunConfig, RunMode};
use crate::discretization::{ProductGrid, Spectral};
use crate::error::{Error, Result};
use crate::flow::{self, FlowState, ReducedFactors, TorusFlow};
use crate::geometry::octagon::{side_pairings, OctagonShape};
use crate::geometry::{BaseBackend, GeometrySpec, InitialPotential};
use crate::io::Summary;
use crate::oracle::{self, OracleReport};

/// Largest drift of the eigenvalue band after `t = 2`.
pub const BAND_DRIFT_BOUND: f64 = 0.05;
pub const BAND_DRIFT_FROM: f64 = 2.0;

/// The evolved model for one configuration.
pub enum Model {
    Full(TorusFlow),
    /// Factor flows plus, on the torus, the full-grid flow used only for monitoring.
    Reduced { factors: ReducedFactors, full: Option<TorusFlow> },
}

impl Model {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        match cfg.run_mode() {
            RunMode::Full => Ok(Model::Full(TorusFlow::from_spec(&cfg.geometry, &cfg.flow)?)),
            RunMode::Reduced => {
                let factors = ReducedFactors::new(&cfg.geometry, &cfg.flow)?;
                let full = match cfg.geometry.base_backend {
                    BaseBackend::TorusSurrogate => Some(TorusFlow::from_spec(&cfg.geometry, &cfg.flow)?),
                    BaseBackend::BolzaOctagon => None,
                };
                Ok(Model::Reduced { factors, full })
            }
        }
    }
}

/// What an observer sees at each sample.
pub struct Sample<'a> {
    pub index: usize,
    pub record: &'a MonitorRecord,
    /// Torus-grid state (composed from the factors in reduced mode).
    pub full: Option<&'a FlowState>,
    pub factors: &'a [FlowState],
    pub octagon: Option<&'a OctagonSample>,
}

pub struct RunOutcome {
    pub records: Vec<MonitorRecord>,
    pub octagon: Vec<OctagonSample>,
    pub final_full: Option<FlowState>,
    pub final_factors: Vec<FlowState>,
}

/// Full-grid state of a product-split run.
pub fn compose_state(grid: ProductGrid, base: &FlowState, fiber: &FlowState) -> FlowState {
    let phi = flow::compose_product(grid, &base.phi, &fiber.phi).values;
    let phidot = if base.phidot.is_empty() || fiber.phidot.is_empty() {
        Vec::new()
    } else {
        flow::compose_product(grid, &base.phidot, &fiber.phidot).values
    };
    FlowState {
        t: base.t,
        phi,
        phidot,
        eig_range: (base.eig_range.0.min(fiber.eig_range.0), base.eig_range.1.max(fiber.eig_range.1)),
        steps: base.steps,
    }
}

/// Runs the model to `t_end`, computing every monitor at every sample.
pub fn simulate(model: &Model, cfg: &RunConfig, mut observe: impl FnMut(&Sample) -> Result<()>) -> Result<RunOutcome> {
    let stride = cfg.analysis.fiber_stride;
    let mut index = 0usize;
    match model {
        Model::Full(f) => {
            let ctx = MonitorContext::new(f, stride);
            let (records, last) = flow::run(f, &cfg.flow, |s| {
                let r = analysis::monitor(f, &ctx, s)?;
                observe(&Sample { index, record: &r, full: Some(s), factors: std::slice::from_ref(s), octagon: None })?;
                index += 1;
                Ok(r)
            })?;
            Ok(RunOutcome { records, octagon: Vec::new(), final_full: Some(last.clone()), final_factors: vec![last] })
        }
        Model::Reduced { factors, full: Some(full) } => {
            let ctx = MonitorContext::new(full, stride);
            let grid = full.grid();
            let mut last_full = None;
            let traj = flow::product_reduced_run(factors, &cfg.flow, |s| {
                let composed = compose_state(grid, &s[0], &s[1]);
                let r = analysis::monitor(full, &ctx, &composed)?;
                observe(&Sample { index, record: &r, full: Some(&composed), factors: s, octagon: None })?;
                index += 1;
                last_full = Some(composed);
                Ok(r)
            })?;
            Ok(RunOutcome { records: traj.records, octagon: Vec::new(), final_full: last_full, final_factors: traj.final_states })
        }
        Model::Reduced { factors: ReducedFactors::Octagon { base, fiber }, full: None } => {
            let ctx = MonitorContext::new(fiber, stride);
            let mut octagon = Vec::new();
            let traj = flow::product_reduced_run(factors_of(model), &cfg.flow, |s| {
                let b = analysis::octagon_monitor(base, &s[0])?;
                let fr = analysis::monitor(fiber, &ctx, &s[1])?;
                let block = analysis::fiber_block_range(fiber, &s[1])?;
                let r = analysis::compose_bolza(&b, &fr, &s[1], block);
                observe(&Sample { index, record: &r, full: None, factors: s, octagon: Some(&b) })?;
                index += 1;
                octagon.push(b);
                Ok(r)
            })?;
            Ok(RunOutcome { records: traj.records, octagon, final_full: None, final_factors: traj.final_states })
        }
        Model::Reduced { factors: ReducedFactors::Torus { .. }, full: None } => {
            Err(Error::config("mode", "reduced torus runs need the full-grid monitor model"))
        }
    }
}

fn factors_of(model: &Model) -> &ReducedFactors {
    match model {
        Model::Reduced { factors, .. } => factors,
        Model::Full(_) => unreachable!("full model has no factors"),
    }
}

/// Post-run checks and fitted quantities.
#[derive(Clone, Debug)]
pub struct RunChecks {
    pub sup_phi_max: f64,
    pub all_finite: bool,
    pub trace_self_test: f64,
    pub decay: std::result::Result<DecayFit, String>,
    pub flatness: std::result::Result<FlatnessRates, String>,
    pub band: Option<EigenBand>,
    pub bounds: Vec<BoundCheck>,
}

impl RunChecks {
    /// Names of the failed gating checks: finiteness, the trace self-test,
    /// no blow-up, the decay envelope when the window is covered and `φ` is
    /// above roundoff, and the band drift.
    pub fn failures(&self) -> Vec<String> {
        let mut bad: Vec<String> = self.bounds.iter().filter(|b| !b.pass).map(|b| format!("bound.{}", b.name)).collect();
        if !self.all_finite {
            bad.push("all_finite".into());
        }
        if !(self.trace_self_test < 1e-12) {
            bad.push("trace_self_test".into());
        }
        // a series at roundoff level sits below every envelope
        if self.sup_phi_max >= analysis::BLOW_UP_FLOOR && matches!(&self.decay, Ok(d) if !d.pass) {
            bad.push("decay".into());
        }
        if self.band.as_ref().is_some_and(|b| !(b.drift < BAND_DRIFT_BOUND)) {
            bad.push("band.drift".into());
        }
        bad
    }

    pub fn pass(&self) -> bool {
        self.failures().is_empty()
    }
}

/// `tr_{ω̃_t} ω̃_t − (m + n)` at a few times.
pub fn trace_self_test(spec: &GeometrySpec) -> Result<f64> {
    let spec = GeometrySpec { base_grid: 8, fiber_grid: 8, base_backend: BaseBackend::TorusSurrogate, initial_potential: InitialPotential::zero(), ..spec.clone() };
    let g = crate::geometry::Geometry::new(&spec)?;
    let mut dev = 0.0f64;
    for t in [0.0, 1.0, 5.0] {
        let r = g.reference_tilde(t);
        for i in 0..g.grid.len() {
            dev = dev.max((r.at(i).trace_relative(&r.at(i)) - 2.0).abs());
        }
    }
    Ok(dev)
}

pub fn check_run(cfg: &RunConfig, out: &RunOutcome) -> Result<RunChecks> {
    let records = &out.records;
    let all_finite = records.iter().all(|r| r.to_row().iter().all(|v| v.is_finite()));
    let series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.sup_phi)).collect();
    let window = cfg.analysis.fit_window;
    let decay = analysis::decay_fit(&series, window).map_err(|e| e.to_string());
    let flatness = analysis::fiber_flatness_rates(records, window).map_err(|e| e.to_string());
    let band = if cfg.flow.t_end > BAND_DRIFT_FROM { analysis::eigen_band(records, BAND_DRIFT_FROM) } else { None };
    Ok(RunChecks {
        sup_phi_max: records.iter().map(|r| r.sup_phi).fold(0.0, f64::max),
        all_finite,
        trace_self_test: trace_self_test(&cfg.geometry)?,
        decay,
        flatness,
        band,
        bounds: analysis::bounded_monitors(records, cfg.analysis.blow_up_factor),
    })
}

/// Key = value digest of a run.
pub fn summarize(cfg: &RunConfig, out: &RunOutcome, checks: &RunChecks, oracles: &[OracleReport]) -> Summary {
    let mut s = Summary::default();
    s.push("base_backend", cfg.geometry.base_backend.name());
    s.push("mode", cfg.run_mode().name());
    s.push("samples", out.records.len());
    if let Some(last) = out.records.last() {
        s.push_f64("t_final", last.t);
        s.push_f64("final.sup_phi", last.sup_phi);
        s.push_f64("final.distance_to_limit", last.distance_to_limit);
    }
    s.push_f64("sup_phi.max", checks.sup_phi_max);
    match &checks.decay {
        Ok(d) => {
            s.push_f64("decay.window_start", d.window.0);
            s.push_f64("decay.window_end", d.window.1);
            s.push_f64("decay.constant", d.constant);
            s.push_f64("decay.log_slope", d.log_slope);
            s.push_f64("decay.ratio_spread", d.ratio_spread);
            s.push("decay.samples", d.samples);
            s.push("decay.pass", d.pass);
        }
        Err(e) => s.push("decay.error", e),
    }
    match &checks.flatness {
        Ok(f) => {
            for (k, slope) in f.slopes.iter().enumerate() {
                match slope {
                    Some(v) => s.push_f64(format!("fiber_dev{k}.log_slope"), *v),
                    None => s.push(format!("fiber_dev{k}.log_slope"), "n/a"),
                }
            }
            s.push_f64("laplace_psi_residual.max", f.max_residual);
        }
        Err(e) => s.push("flatness.error", e),
    }
    if let Some(b) = &checks.band {
        s.push_f64("band.lo", b.lo);
        s.push_f64("band.hi", b.hi);
        s.push_f64("band.constant", b.constant);
        s.push_f64("band.drift", b.drift);
    }
    for b in &checks.bounds {
        s.push_f64(format!("bound.{}.early", b.name), b.early_max);
        s.push_f64(format!("bound.{}.late", b.name), b.late_max);
        s.push(format!("bound.{}.pass", b.name), b.pass);
    }
    if let Some(o) = out.octagon.last() {
        s.push_f64("octagon.relative_deviation", o.relative_deviation);
        s.push_f64("octagon.rm2_spread", o.rm2_range.1 - o.rm2_range.0);
    }
    s.push_f64("trace_self_test", checks.trace_self_test);
    s.push("all_finite", checks.all_finite);
    for r in oracles {
        s.push(format!("oracle.{}", r.name.replace(' ', "_")), if r.pass { "pass" } else { "fail" });
    }
    s.push("pass", checks.pass() && oracles.iter().all(|r| r.pass));
    s
}

/// Dense extrapolated Hessian against the spectral one on a seeded field.
pub fn hessian_oracle(grid: ProductGrid, seed: u64) -> Result<OracleReport> {
    let phi = oracle::band_limited_field(grid, 1, seed);
    let spectral = Spectral::new(grid).complex_hessian(&phi)?;
    let n = grid.nb.min(grid.nf);
    let dense = oracle::dense_hessian_extrapolated(&phi, oracle::richardson_levels(n));
    let gap = oracle::hessian_gap(&dense, &spectral);
    Ok(OracleReport::new(format!("hessian dense vs spectral N={n}"), gap, oracle::hessian_tolerance(n)))
}

/// Observed order of the second-order dense Hessian over two halvings
/// `(N, N/4)` for `N = 16, 32, 64`; the tolerance is 20% of the formal order.
pub fn refinement_order_oracle(tau: Complex64) -> Result<OracleReport> {
    use std::f64::consts::TAU;
    let grids: Vec<ProductGrid> = [16usize, 32, 64].iter().map(|&n| ProductGrid::new(n, n / 4, tau)).collect();
    let field = |c: [f64; 4]| {
        (TAU * (c[0] + c[2])).cos() + 0.5 * (TAU * (c[1] - c[3]) + 0.3).sin() + 0.25 * (TAU * (c[0] + c[1] + c[2])).cos()
    };
    let study = oracle::hessian_refinement_study(&grids, field)?;
    let worst = oracle::observed_orders(&study).iter().map(|p| (p - 2.0).abs()).fold(0.0, f64::max);
    Ok(OracleReport::new("dense hessian refinement order", worst, 0.4))
}

/// `a(t), b(t)` from the coefficient ODE against the closed form.
pub fn coefficient_oracle(spec: &GeometrySpec) -> Result<OracleReport> {
    let tr = oracle::ode_coefficient_oracle(spec.initial_base_scale, spec.initial_fiber_scale, 5.0, 1e-3)?;
    Ok(OracleReport::new("coefficient ode", tr.max_deviation, 1e-10))
}

/// Side mapping and density invariance of the octagon pairings.
pub fn octagon_oracle() -> Result<OracleReport> {
    let shape = OctagonShape::regular();
    let p = side_pairings();
    let mut dev = 0.0f64;
    for k in 0..8 {
        for i in 0..=16 {
            let z = shape.side_point((k + 4) % 8, i as f64 / 16.0);
            let w = p[k].apply(z);
            dev = dev.max(((w - shape.side_center(k)).norm() - shape.radius).abs());
            let pull = crate::geometry::octagon::hyperbolic_density(w)? * p[k].derivative(z).norm_sqr();
            dev = dev.max((pull / crate::geometry::octagon::hyperbolic_density(z)? - 1.0).abs());
        }
    }
    Ok(OracleReport::new("octagon side pairings", dev, 1e-10))
}

/// Every preflight oracle for a configuration; `omega_scale` injects a fault
/// into the stationary check.
pub fn preflight(cfg: &RunConfig, seed: u64, omega_scale: f64) -> Result<Vec<OracleReport>> {
    let g = &cfg.geometry;
    let mut out = Vec::new();
    let torus_spec = GeometrySpec { base_backend: BaseBackend::TorusSurrogate, ..g.clone() };
    out.push(oracle::stationarity_oracle(&torus_spec, omega_scale)?);
    out.push(coefficient_oracle(g)?);
    out.push(hessian_oracle(ProductGrid::new(g.base_grid.min(32), g.fiber_grid.min(32), g.fiber_modulus), seed)?);
    if g.base_backend == BaseBackend::BolzaOctagon {
        out.push(octagon_oracle()?);
    }
    Ok(out)
}
