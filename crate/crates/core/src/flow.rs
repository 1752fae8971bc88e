//! Time integration of `φ̇ = log(e^{t}·2 det(ĝ_t + i∂∂̄φ)/Ω) − φ`.
//!
//! The default stepper is second-order exponential time differencing
//! (Cox–Matthews ETDRK2) with a frozen constant-coefficient majorant of the
//! linearised operator: the collapsing fiber makes the equation stiff like
//! `e^t`, so explicit stepping is limited to a CFL step that shrinks with it.
//! Classical RK4 under that CFL limit is kept as an option and is the only
//! stepper on the octagon base.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::discretization::ghost::{self, HaloField};
use crate::discretization::{Herm2, ProductGrid, ScalarField};
use crate::error::{Error, Result};
use crate::geometry::octagon::OctagonChart;
use crate::geometry::{BaseBackend, Geometry, GeometrySpec, InitialPotential, VolumeDensity};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    Etd2,
    Rk4,
}

impl Integrator {
    pub fn name(self) -> &'static str {
        match self {
            Integrator::Etd2 => "etd2",
            Integrator::Rk4 => "rk4",
        }
    }
}

impl std::str::FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "etd2" => Ok(Integrator::Etd2),
            "rk4" => Ok(Integrator::Rk4),
            o => Err(Error::config("integrator", format!("unknown integrator `{o}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowParams {
    pub t_end: f64,
    pub dt_max: f64,
    pub c_cfl: f64,
    pub dt_sample: f64,
    pub positivity_threshold: f64,
    pub integrator: Integrator,
    pub max_halvings: u32,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            t_end: 8.0,
            dt_max: 0.01,
            c_cfl: 0.2,
            dt_sample: 0.05,
            positivity_threshold: 1e-8,
            integrator: Integrator::Etd2,
            max_halvings: 12,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let pos = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, "must be a positive finite number"))
            }
        };
        pos("t_end", self.t_end)?;
        pos("dt_max", self.dt_max)?;
        pos("c_cfl", self.c_cfl)?;
        pos("dt_sample", self.dt_sample)?;
        pos("positivity_threshold", self.positivity_threshold)?;
        if self.dt_sample > self.t_end {
            return Err(Error::config("dt_sample", "sample interval exceeds t_end"));
        }
        Ok(())
    }

    /// Number of sample intervals in `[0, t_end]`.
    pub fn sample_count(&self) -> usize {
        (self.t_end / self.dt_sample).round().max(1.0) as usize
    }
}

/// Potential `φ` at time `t` with its cached time derivative and eigen-range.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub phi: Vec<f64>,
    /// `φ̇`, refreshed at sample times (empty until first refresh).
    pub phidot: Vec<f64>,
    /// Min and max eigenvalue of `ω` relative to `ω̃_t`.
    pub eig_range: (f64, f64),
    pub steps: u64,
}

/// Pointwise outcome of one right-hand-side evaluation.
#[derive(Clone, Debug)]
pub struct RhsEval {
    pub values: Vec<f64>,
    pub eig_range: (f64, f64),
    /// Frozen diffusion coefficients for the base and fiber directions.
    pub diffusion: (f64, f64),
    /// `max λ_max(g^{-1})`.
    pub inverse_bound: f64,
}

/// A scalar flow on some discretised factor.
pub trait FlowProblem: Sync {
    fn len(&self) -> usize;
    fn initial_state(&self) -> FlowState {
        FlowState { t: 0.0, phi: vec![0.0; self.len()], phidot: Vec::new(), eig_range: (f64::NAN, f64::NAN), steps: 0 }
    }
    fn rhs(&self, t: f64, phi: &[f64]) -> Result<RhsEval>;
    /// Largest step the integrator accepts from this state.
    fn stable_dt(&self, eval: &RhsEval, params: &FlowParams) -> f64;
    /// One step with no retry logic; `eval` is the right-hand side at `state`.
    fn raw_step(&self, state: &FlowState, eval: &RhsEval, dt: f64) -> Result<Vec<f64>>;
}

#[inline]
fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

#[inline]
fn phi2(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0
    } else {
        (z.exp_m1() - z) / (z * z)
    }
}

const CHUNK: usize = 4096;

/// Chunk-local reductions of a right-hand-side sweep.
#[derive(Clone, Copy, Debug)]
struct PointStats {
    lo: f64,
    hi: f64,
    /// Where the smallest eigenvalue ratio sits.
    lo_index: usize,
    /// First non-finite right-hand-side value.
    bad_value: Option<usize>,
    cb: f64,
    cf: f64,
    inv: f64,
}

impl Default for PointStats {
    fn default() -> Self {
        Self { lo: f64::INFINITY, hi: f64::NEG_INFINITY, lo_index: 0, bad_value: None, cb: 0.0, cf: 0.0, inv: 0.0 }
    }
}

impl PointStats {
    #[inline]
    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, i: usize, lo: f64, hi: f64, v: f64, cb: f64, cf: f64, inv: f64) {
        // NaN ratios must register as the minimum
        if !(lo >= self.lo) {
            self.lo = lo;
            self.lo_index = i;
        }
        self.hi = self.hi.max(hi);
        if self.bad_value.is_none() && !v.is_finite() {
            self.bad_value = Some(i);
        }
        self.cb = self.cb.max(cb);
        self.cf = self.cf.max(cf);
        self.inv = self.inv.max(inv);
    }

    fn merge(a: Self, b: Self) -> Self {
        let (lo, lo_index) = if !(b.lo >= a.lo) { (b.lo, b.lo_index) } else { (a.lo, a.lo_index) };
        let bad_value = match (a.bad_value, b.bad_value) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        Self { lo, hi: a.hi.max(b.hi), lo_index, bad_value, cb: a.cb.max(b.cb), cf: a.cf.max(b.cf), inv: a.inv.max(b.inv) }
    }

    fn finish(self, t: f64, threshold: f64, values: Vec<f64>, what: &'static str) -> Result<RhsEval> {
        if !(self.lo > threshold) {
            return Err(Error::PositivityLost { t, index: self.lo_index, min_eig: self.lo });
        }
        if let Some(index) = self.bad_value {
            return Err(Error::NonFiniteValue { what, index });
        }
        Ok(RhsEval { values, eig_range: (self.lo, self.hi), diffusion: (self.cb, self.cf), inverse_bound: self.inv })
    }
}

/// Classical RK4 on an arbitrary problem, stage values guarded by `rhs`.
fn rk4_step<P: FlowProblem + ?Sized>(p: &P, state: &FlowState, k1: &RhsEval, dt: f64) -> Result<Vec<f64>> {
    let t = state.t;
    let u = &state.phi;
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { u.par_iter().zip(k).map(|(x, y)| x + a * y).collect() };
    let k2 = p.rhs(t + 0.5 * dt, &axpy(0.5 * dt, &k1.values))?;
    let k3 = p.rhs(t + 0.5 * dt, &axpy(0.5 * dt, &k2.values))?;
    let k4 = p.rhs(t + dt, &axpy(dt, &k3.values))?;
    Ok((0..u.len())
        .into_par_iter()
        .map(|i| u[i] + dt / 6.0 * (k1.values[i] + 2.0 * k2.values[i] + 2.0 * k3.values[i] + k4.values[i]))
        .collect())
}

/// Torus product model: full product grid, spectral in all four directions.
#[derive(Debug)]
pub struct TorusFlow {
    pub geometry: Geometry,
    pub omega: VolumeDensity,
    pub integrator: Integrator,
    pub threshold: f64,
}

impl TorusFlow {
    pub fn new(geometry: Geometry, omega: VolumeDensity, params: &FlowParams) -> Self {
        Self { geometry, omega, integrator: params.integrator, threshold: params.positivity_threshold }
    }

    pub fn from_spec(spec: &GeometrySpec, params: &FlowParams) -> Result<Self> {
        let geometry = Geometry::new(spec)?;
        let omega = geometry.volume_form()?;
        Ok(Self::new(geometry, omega, params))
    }

    pub fn grid(&self) -> ProductGrid {
        self.geometry.grid
    }

    pub fn field(&self, state: &FlowState) -> ScalarField {
        ScalarField { grid: self.grid(), values: state.phi.clone() }
    }

    /// `ω(t) = ω̂_t + i∂∂̄φ` assembled as a field.
    pub fn metric(&self, t: f64, phi: &[f64]) -> Result<crate::discretization::HermitianField> {
        let s = &self.geometry.spectral;
        let mut h = s.hessian_from_hat(&s.forward_real(phi));
        let hat = self.geometry.reference_hat(t);
        h.bb.par_iter_mut().zip(&hat.bb).for_each(|(a, b)| *a += b);
        h.ff.par_iter_mut().zip(&hat.ff).for_each(|(a, b)| *a += b);
        h.bf.par_iter_mut().zip(&hat.bf).for_each(|(a, b)| *a += b);
        h.check_finite("metric")?;
        Ok(h)
    }

    fn rhs_from_hat(&self, t: f64, phi: &[f64], hat: &[Complex64]) -> Result<RhsEval> {
        let g = &self.geometry;
        let h = g.spectral.hessian_from_hat(hat);
        let e = (-t).exp();
        let w = 1.0 - e;
        let n = phi.len();
        let mut values = vec![0.0; n];
        let stats = values
            .par_chunks_mut(CHUNK)
            .enumerate()
            .map(|(c, out)| {
                let mut st = PointStats::default();
                for (k, v) in out.iter_mut().enumerate() {
                    let i = c * CHUNK + k;
                    let chi = g.chi.bb[i];
                    let m = Herm2 {
                        bb: e * g.omega0.bb[i] + w * chi + h.bb[i],
                        ff: e * g.omega0.ff[i] + h.ff[i],
                        bf: g.omega0.bf[i] * e + h.bf[i],
                    };
                    let det = m.det();
                    let (lo, hi) = m.relative_eigenvalues(&Herm2::diag(chi, e));
                    *v = t + (2.0 * det / self.omega.values[i]).ln() - phi[i];
                    let corr = 1.0 + m.bf.norm() / (m.bb * m.ff).sqrt();
                    st.push(i, lo, hi, *v, m.ff / det * corr, m.bb / det * corr, 1.0 / m.eigenvalues().0);
                }
                st
            })
            .reduce(PointStats::default, PointStats::merge);
        stats.finish(t, self.threshold, values, "flow right-hand side")
    }

    fn etd2_step(&self, state: &FlowState, f0: &RhsEval, dt: f64) -> Result<Vec<f64>> {
        let s = &self.geometry.spectral;
        let grid = self.grid();
        let fl = grid.fiber_len();
        let (cb, cf) = f0.diffusion;
        let (lb, lf) = (s.base_laplacian_symbol(), s.fiber_laplacian_symbol());
        let lin = |i: usize| cb * lb[i / fl] + cf * lf[i % fl] - 1.0;

        let u_hat = s.forward_real(&state.phi);
        let f0_hat = s.forward_real(&f0.values);
        let a_hat: Vec<Complex64> = (0..u_hat.len())
            .into_par_iter()
            .map(|i| {
                let l = lin(i);
                let z = l * dt;
                let n0 = f0_hat[i] - u_hat[i] * l;
                u_hat[i] * z.exp() + n0 * (dt * phi1(z))
            })
            .collect();
        let a: Vec<f64> = s.inverse(a_hat.clone()).into_iter().map(|c| c.re).collect();
        let f1 = self.rhs_from_hat(state.t + dt, &a, &a_hat)?;
        let f1_hat = s.forward_real(&f1.values);
        let new_hat: Vec<Complex64> = (0..u_hat.len())
            .into_par_iter()
            .map(|i| {
                let l = lin(i);
                let z = l * dt;
                let n0 = f0_hat[i] - u_hat[i] * l;
                let n1 = f1_hat[i] - a_hat[i] * l;
                a_hat[i] + (n1 - n0) * (dt * phi2(z))
            })
            .collect();
        Ok(s.inverse(new_hat).into_iter().map(|c| c.re).collect())
    }
}

impl FlowProblem for TorusFlow {
    fn len(&self) -> usize {
        self.grid().len()
    }

    fn rhs(&self, t: f64, phi: &[f64]) -> Result<RhsEval> {
        let hat = self.geometry.spectral.forward_real(phi);
        self.rhs_from_hat(t, phi, &hat)
    }

    fn stable_dt(&self, eval: &RhsEval, params: &FlowParams) -> f64 {
        match self.integrator {
            Integrator::Etd2 => params.dt_max,
            Integrator::Rk4 => {
                let h = self.grid().min_spacing();
                params.dt_max.min(params.c_cfl * h * h / eval.inverse_bound)
            }
        }
    }

    fn raw_step(&self, state: &FlowState, eval: &RhsEval, dt: f64) -> Result<Vec<f64>> {
        match self.integrator {
            Integrator::Etd2 => self.etd2_step(state, eval, dt),
            Integrator::Rk4 => rk4_step(self, state, eval, dt),
        }
    }
}

/// Base-only flow on the octagon: `φ̇ = log(g/g_M) − φ`,
/// `g = a(t) g_M + ∂∂̄(e^{-t}ψ_b + φ)`.
#[derive(Debug)]
pub struct OctagonBaseFlow {
    pub chart: OctagonChart,
    pub g_m: Vec<f64>,
    pub psi0: Vec<f64>,
    /// `∂∂̄ψ_b` at interior nodes.
    pub psi0_ddbar: Vec<f64>,
    pub a0: f64,
    pub threshold: f64,
}

impl OctagonBaseFlow {
    pub fn new(cells: usize, potential: &InitialPotential, a0: f64, threshold: f64) -> Result<Self> {
        let chart = OctagonChart::new(cells)?;
        let g_m = chart.hyperbolic_base_metric()?;
        let pts = chart.interior_points();
        let psi0: Vec<f64> = pts.iter().map(|&z| potential.terms.iter().map(|t| t.eval_disk(z)).sum()).collect();
        let halo = ghost::ghost_exchange(&psi0, &chart)?;
        let psi0_ddbar = ghost::ddbar(&halo, &chart);
        let flow = Self { chart, g_m, psi0, psi0_ddbar, a0, threshold };
        let g0 = flow.metric_from_ddbar(0.0, &vec![0.0; flow.len()]);
        if let Some((index, &v)) = g0.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::SingularMetric { index, min_eig: v });
        }
        Ok(flow)
    }

    fn base_scale(&self, t: f64) -> f64 {
        1.0 + (self.a0 - 1.0) * (-t).exp()
    }

    fn metric_from_ddbar(&self, t: f64, phi_ddbar: &[f64]) -> Vec<f64> {
        let (a, e) = (self.base_scale(t), (-t).exp());
        (0..self.len()).map(|i| a * self.g_m[i] + e * self.psi0_ddbar[i] + phi_ddbar[i]).collect()
    }

    /// `U = e^{-t}ψ_b + φ` with ghosts filled.
    pub fn potential_halo(&self, t: f64, phi: &[f64]) -> Result<HaloField> {
        let e = (-t).exp();
        let u: Vec<f64> = phi.iter().zip(&self.psi0).map(|(p, s)| p + e * s).collect();
        ghost::ghost_exchange(&u, &self.chart)
    }

    /// Metric density `g(t)` at the interior nodes.
    pub fn metric(&self, t: f64, phi: &[f64]) -> Result<Vec<f64>> {
        let halo = ghost::ghost_exchange(phi, &self.chart)?;
        Ok(self.metric_from_ddbar(t, &ghost::ddbar(&halo, &self.chart)))
    }
}

impl FlowProblem for OctagonBaseFlow {
    fn len(&self) -> usize {
        self.chart.len()
    }

    fn rhs(&self, t: f64, phi: &[f64]) -> Result<RhsEval> {
        let g = self.metric(t, phi)?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut inv = 0.0f64;
        let mut values = Vec::with_capacity(g.len());
        for i in 0..g.len() {
            let r = g[i] / self.g_m[i];
            if !(r > self.threshold) {
                return Err(Error::PositivityLost { t, index: i, min_eig: r });
            }
            lo = lo.min(r);
            hi = hi.max(r);
            inv = inv.max(1.0 / g[i]);
            let v = r.ln() - phi[i];
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { what: "octagon right-hand side", index: i });
            }
            values.push(v);
        }
        Ok(RhsEval { values, eig_range: (lo, hi), diffusion: (inv, 0.0), inverse_bound: inv })
    }

    fn stable_dt(&self, eval: &RhsEval, params: &FlowParams) -> f64 {
        let h = self.chart.h;
        params.dt_max.min(params.c_cfl * h * h / eval.inverse_bound)
    }

    fn raw_step(&self, state: &FlowState, eval: &RhsEval, dt: f64) -> Result<Vec<f64>> {
        rk4_step(self, state, eval, dt)
    }
}

/// Refreshes `φ̇` and the eigen-range of a state.
pub fn refresh<P: FlowProblem + ?Sized>(p: &P, state: &mut FlowState) -> Result<RhsEval> {
    let eval = p.rhs(state.t, &state.phi)?;
    state.phidot = eval.values.clone();
    state.eig_range = eval.eig_range;
    Ok(eval)
}

/// Single step of size `dt` (no retries); `dt = 0` returns the state unchanged.
pub fn step<P: FlowProblem + ?Sized>(p: &P, state: &FlowState, dt: f64) -> Result<FlowState> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let eval = p.rhs(state.t, &state.phi)?;
    let phi = p.raw_step(state, &eval, dt)?;
    let mut next = FlowState { t: state.t + dt, phi, phidot: Vec::new(), eig_range: eval.eig_range, steps: state.steps + 1 };
    refresh(p, &mut next)?;
    Ok(next)
}

/// Advances every factor in lockstep from `t0` to `t1`, halving on positivity loss.
fn advance(problems: &[&dyn FlowProblem], states: &mut [FlowState], t1: f64, params: &FlowParams) -> Result<()> {
    let mut halvings = 0u32;
    while states[0].t < t1 {
        let t = states[0].t;
        let evals: Vec<RhsEval> =
            problems.iter().zip(states.iter()).map(|(p, s)| p.rhs(s.t, &s.phi)).collect::<Result<_>>()?;
        let allowed = problems.iter().zip(&evals).map(|(p, e)| p.stable_dt(e, params)).fold(f64::INFINITY, f64::min);
        let allowed = allowed * 0.5f64.powi(halvings as i32);
        let remaining = t1 - t;
        let n = (remaining / allowed - 1e-9).ceil().max(1.0);
        let dt = remaining / n;
        let mut next = Vec::with_capacity(states.len());
        let mut failure = None;
        for ((p, s), e) in problems.iter().zip(states.iter()).zip(&evals) {
            match p.raw_step(s, e, dt) {
                Ok(phi) => next.push(phi),
                Err(err @ Error::PositivityLost { .. }) => {
                    failure = Some(err);
                    break;
                }
                Err(err) => return Err(err),
            }
        }
        if let Some(err) = failure {
            halvings += 1;
            if halvings > params.max_halvings {
                return Err(err);
            }
            continue;
        }
        for (s, phi) in states.iter_mut().zip(next) {
            s.phi = phi;
            s.t = if n == 1.0 { t1 } else { t + dt };
            s.steps += 1;
        }
        halvings = halvings.saturating_sub(1);
    }
    Ok(())
}

/// Records every sample of a run.
pub struct Trajectory<R> {
    pub records: Vec<R>,
    pub final_states: Vec<FlowState>,
}

/// Runs coupled factors from `t = 0` to `t_end`, calling `observe` at every
/// sample time (including `t = 0`) with refreshed states.
pub fn run_coupled<R>(
    problems: &[&dyn FlowProblem],
    params: &FlowParams,
    mut observe: impl FnMut(&[FlowState]) -> Result<R>,
) -> Result<Trajectory<R>> {
    params.validate()?;
    let mut states: Vec<FlowState> = problems.iter().map(|p| p.initial_state()).collect();
    let mut records = Vec::new();
    let samples = params.sample_count();
    for k in 0..=samples {
        let target = if k == samples { params.t_end } else { k as f64 * params.dt_sample };
        if k > 0 {
            advance(problems, &mut states, target, params)?;
        }
        for (p, s) in problems.iter().zip(states.iter_mut()) {
            refresh(*p, s)?;
        }
        records.push(observe(&states)?);
    }
    Ok(Trajectory { records, final_states: states })
}

/// Single-factor run.
pub fn run<P: FlowProblem, R>(
    problem: &P,
    params: &FlowParams,
    mut observe: impl FnMut(&FlowState) -> Result<R>,
) -> Result<(Vec<R>, FlowState)> {
    let traj = run_coupled(&[problem as &dyn FlowProblem], params, |s| observe(&s[0]))?;
    Ok((traj.records, traj.final_states.into_iter().next().expect("one factor")))
}

/// Closed-form class coefficients `a' = 1 − a`, `b' = −b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogeneousCoefficients {
    pub a: f64,
    pub b: f64,
}

pub fn homogeneous_flow(a0: f64, b0: f64, t: f64) -> HomogeneousCoefficients {
    let e = (-t).exp();
    HomogeneousCoefficients { a: 1.0 + (a0 - 1.0) * e, b: b0 * e }
}

/// The two factor problems of a product-split initial potential.
pub enum ReducedFactors {
    Torus { base: TorusFlow, fiber: TorusFlow },
    Octagon { base: OctagonBaseFlow, fiber: TorusFlow },
}

impl ReducedFactors {
    pub fn new(spec: &GeometrySpec, params: &FlowParams) -> Result<Self> {
        spec.validate()?;
        let (base_part, fiber_part) = spec
            .initial_potential
            .split()
            .ok_or_else(|| Error::config("initial_potential", "initial potential does not split into base and fiber parts"))?;
        let fiber_spec = GeometrySpec {
            initial_potential: fiber_part,
            initial_base_scale: 1.0,
            twist_amplitude: 0.0,
            base_backend: BaseBackend::TorusSurrogate,
            ..spec.clone()
        };
        let fiber_geom = Geometry::on_grid(&fiber_spec, ProductGrid::new(1, spec.fiber_grid, spec.fiber_modulus))?;
        let fiber_omega = fiber_geom.volume_form()?;
        let fiber = TorusFlow::new(fiber_geom, fiber_omega, params);
        match spec.base_backend {
            BaseBackend::TorusSurrogate => {
                let base_spec = GeometrySpec { initial_potential: base_part, ..spec.clone() };
                let base_geom = Geometry::on_grid(&base_spec, ProductGrid::new(spec.base_grid, 1, spec.fiber_modulus))?;
                let base_omega = base_geom.volume_form()?;
                Ok(ReducedFactors::Torus { base: TorusFlow::new(base_geom, base_omega, params), fiber })
            }
            BaseBackend::BolzaOctagon => {
                let base = OctagonBaseFlow::new(
                    spec.base_grid,
                    &base_part,
                    spec.initial_base_scale,
                    params.positivity_threshold,
                )?;
                Ok(ReducedFactors::Octagon { base, fiber })
            }
        }
    }

    pub fn problems(&self) -> [&dyn FlowProblem; 2] {
        match self {
            ReducedFactors::Torus { base, fiber } => [base, fiber],
            ReducedFactors::Octagon { base, fiber } => [base, fiber],
        }
    }

    pub fn fiber(&self) -> &TorusFlow {
        match self {
            ReducedFactors::Torus { fiber, .. } | ReducedFactors::Octagon { fiber, .. } => fiber,
        }
    }
}

/// Evolves the base and fiber factor flows of a product-split `ψ0` in lockstep.
pub fn product_reduced_run<R>(
    factors: &ReducedFactors,
    params: &FlowParams,
    observe: impl FnMut(&[FlowState]) -> Result<R>,
) -> Result<Trajectory<R>> {
    run_coupled(&factors.problems(), params, observe)
}

/// `φ(x, y) = φ_b(x) + φ_f(y)` on the full product grid.
pub fn compose_product(grid: ProductGrid, base: &[f64], fiber: &[f64]) -> ScalarField {
    let fl = grid.fiber_len();
    ScalarField { grid, values: (0..grid.len()).map(|i| base[i / fl] + fiber[i % fl]).collect() }
}
