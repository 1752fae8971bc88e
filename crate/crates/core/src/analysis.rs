//! Monitored quantities along a run and the regressions on their series.


use num_complex::Complex64;
use rayon::prelude::*;

use crate::discretization::ghost;
use crate::discretization::tensor::{self, Frame, ReferenceConnection, Tensor3, Tensor4, ZERO3, ZERO4};
use crate::discretization::{restrict_to_fiber, Herm2, Monomial, ProductGrid, Spectral};
use crate::error::{Error, Result};
use crate::flow::{FlowState, OctagonBaseFlow, TorusFlow};

/// One time sample of every monitored estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct MonitorRecord {
    pub t: f64,
    pub sup_phi: f64,
    pub sup_phidot: f64,
    pub volume_ratio_min: f64,
    pub volume_ratio_max: f64,
    pub trace_min: f64,
    pub trace_max: f64,
    pub s_max: f64,
    pub rm2_max: f64,
    pub grad2_max: f64,
    pub fiber_dev: [f64; 3],
    pub distance_to_limit: f64,
    pub eig_min: f64,
    pub eig_max: f64,
    pub laplace_psi_residual: f64,
}

impl MonitorRecord {
    pub const COLUMNS: [&'static str; 17] = [
        "t",
        "sup_phi",
        "sup_phidot",
        "volume_ratio_min",
        "volume_ratio_max",
        "trace_min",
        "trace_max",
        "s_max",
        "rm2_max",
        "grad2_max",
        "fiber_dev0",
        "fiber_dev1",
        "fiber_dev2",
        "distance_to_limit",
        "eig_min",
        "eig_max",
        "laplace_psi_residual",
    ];

    pub fn to_row(&self) -> [f64; 17] {
        [
            self.t,
            self.sup_phi,
            self.sup_phidot,
            self.volume_ratio_min,
            self.volume_ratio_max,
            self.trace_min,
            self.trace_max,
            self.s_max,
            self.rm2_max,
            self.grad2_max,
            self.fiber_dev[0],
            self.fiber_dev[1],
            self.fiber_dev[2],
            self.distance_to_limit,
            self.eig_min,
            self.eig_max,
            self.laplace_psi_residual,
        ]
    }

    pub fn from_row(r: &[f64; 17]) -> Self {
        Self {
            t: r[0],
            sup_phi: r[1],
            sup_phidot: r[2],
            volume_ratio_min: r[3],
            volume_ratio_max: r[4],
            trace_min: r[5],
            trace_max: r[6],
            s_max: r[7],
            rm2_max: r[8],
            grad2_max: r[9],
            fiber_dev: [r[10], r[11], r[12]],
            distance_to_limit: r[13],
            eig_min: r[14],
            eig_max: r[15],
            laplace_psi_residual: r[16],
        }
    }

    /// `max(vol_max, 1/vol_min)`: one number for the two-sided volume bound.
    pub fn volume_ratio_spread(&self) -> f64 {
        self.volume_ratio_max.max(1.0 / self.volume_ratio_min)
    }
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn range(v: impl ParallelIterator<Item = f64>) -> (f64, f64) {
    v.map(|x| (x, x)).reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)))
}

const FIBER_SAMPLES: usize = 8;

/// Deterministic strided sample of base points.
pub fn fiber_sample_points(base_len: usize, stride: Option<usize>) -> Vec<usize> {
    let stride = stride.unwrap_or_else(|| (base_len / FIBER_SAMPLES).max(1));
    let offset = stride / 2;
    (0..FIBER_SAMPLES).map(|k| (offset + k * stride) % base_len).collect::<std::collections::BTreeSet<_>>().into_iter().collect()
}

/// Per-run data reused by every monitor evaluation on a torus model.
pub struct MonitorContext {
    pub samples: Vec<usize>,
    slice: Spectral,
    /// `Γ̃` data per base point.
    reference: Vec<ReferenceConnection>,
}

impl MonitorContext {
    pub fn new(flow: &TorusFlow, stride: Option<usize>) -> Self {
        let g = &flow.geometry;
        let grid = g.grid;
        let fl = grid.fiber_len();
        let (chi, d1, d2) = g.twist_derivatives();
        let reference = (0..grid.base_len()).map(|b| ReferenceConnection::from_twist(chi[b * fl], d1[b * fl], d2[b * fl])).collect();
        Self {
            samples: fiber_sample_points(grid.base_len(), stride),
            slice: Spectral::new(ProductGrid::new(1, grid.nf, grid.tau)),
            reference,
        }
    }
}

/// Every derivative of the total potential the tensor monitors read, with
/// index tables from tensor slots to fields.
struct DerivativeBank {
    fields: Vec<Vec<Complex64>>,
    dg: [[[usize; 2]; 2]; 2],
    d2g: [[[[usize; 2]; 2]; 2]; 2],
    ddbar: [[[[usize; 2]; 2]; 2]; 2],
}

impl DerivativeBank {
    fn new(spectral: &Spectral, hat: &[Complex64]) -> Self {
        let mut keys: Vec<Monomial> = Vec::new();
        let mut slot = |m: Monomial| match keys.iter().position(|k| *k == m) {
            Some(p) => p,
            None => {
                keys.push(m);
                keys.len() - 1
            }
        };
        let mut dg = [[[0; 2]; 2]; 2];
        let mut d2g = [[[[0; 2]; 2]; 2]; 2];
        let mut ddbar = [[[[0; 2]; 2]; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for l in 0..2 {
                    dg[k][i][l] = slot(Monomial::from_indices(&[k, i], &[l]));
                    for r in 0..2 {
                        d2g[r][k][i][l] = slot(Monomial::from_indices(&[r, k, i], &[l]));
                    }
                    for j in 0..2 {
                        ddbar[k][j][i][l] = slot(Monomial::from_indices(&[k, i], &[j, l]));
                    }
                }
            }
        }
        let fields = keys.into_par_iter().map(|m| spectral.derivative(hat, m)).collect();
        Self { fields, dg, d2g, ddbar }
    }

    #[inline]
    fn at(&self, slot: usize, idx: usize) -> Complex64 {
        self.fields[slot][idx]
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct TensorMaxima {
    s: f64,
    rm2: f64,
    grad2: f64,
}

fn tensor_maxima(flow: &TorusFlow, ctx: &MonitorContext, metric: &crate::discretization::HermitianField, bank: &DerivativeBank) -> Result<TensorMaxima> {
    let grid = flow.grid();
    let fl = grid.fiber_len();
    (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let g = metric.at(idx);
            let frame = Frame::new(&g).ok_or(Error::SingularMetric { index: idx, min_eig: g.eigenvalues().0 })?;
            let mut dg: Tensor3 = ZERO3;
            let mut ddbar: Tensor4 = ZERO4;
            let mut d2g: Tensor4 = ZERO4;
            for k in 0..2 {
                for i in 0..2 {
                    for l in 0..2 {
                        dg[k][i][l] = bank.at(bank.dg[k][i][l], idx);
                        for r in 0..2 {
                            d2g[r][k][i][l] = bank.at(bank.d2g[r][k][i][l], idx);
                        }
                        for j in 0..2 {
                            ddbar[k][j][i][l] = bank.at(bank.ddbar[k][j][i][l], idx);
                        }
                    }
                }
            }
            let reference = &ctx.reference[idx / fl];
            let psi = tensor::christoffel_deviation(&g, &dg, reference);
            let rm = tensor::curvature(&g, &dg, &ddbar);
            let grad = tensor::grad_christoffel_deviation(&g, &dg, &d2g, &psi, reference);
            Ok(TensorMaxima {
                s: frame.norm_sq_upper_lower2(&psi),
                rm2: frame.norm_sq_curvature(&rm),
                grad2: frame.norm_sq_grad_psi(&grad),
            })
        })
        .try_reduce(TensorMaxima::default, |a, b| Ok(TensorMaxima { s: a.s.max(b.s), rm2: a.rm2.max(b.rm2), grad2: a.grad2.max(b.grad2) }))
}

/// `sup_y |∇^k h|²` for `h = e^t g_ff − g_flat` on one fiber, `k = 0, 1, 2`.
fn fiber_norms(slice: &Spectral, h: &[f64]) -> [f64; 3] {
    let hat = slice.forward_real(h);
    let d = |m: Monomial| slice.derivative(&hat, m);
    let dw = d(Monomial::new(0, 0, 1, 0));
    let dww = d(Monomial::new(0, 0, 2, 0));
    let dwwb = d(Monomial::new(0, 0, 1, 1));
    let mut out = [0.0f64; 3];
    for i in 0..h.len() {
        out[0] = out[0].max(h[i] * h[i]);
        out[1] = out[1].max(2.0 * dw[i].norm_sqr());
        out[2] = out[2].max(2.0 * dww[i].norm_sqr() + 2.0 * dwwb[i].norm_sqr());
    }
    out
}

/// Fiber deviations and the `Δ_E ψ` identity residual at the sampled base points.
///
/// One route forms `ψ = e^t φ|_E − ρ_z` and applies the fiber Laplacian of the
/// slice; the other restricts the assembled metric and takes
/// `e^t g|_E − g_flat`.
pub fn fiber_diagnostics(flow: &TorusFlow, ctx: &MonitorContext, state: &FlowState, metric: &crate::discretization::HermitianField) -> ([f64; 3], f64) {
    let g = &flow.geometry;
    let grid = g.grid;
    let et = state.t.exp();
    let lap = ctx.slice.fiber_laplacian_symbol();
    let mut dev = [0.0f64; 3];
    let mut residual = 0.0f64;
    for &b in &ctx.samples {
        let slice = restrict_to_fiber(metric, b);
        let flat = g.flat.g_flat[b];
        let h: Vec<f64> = slice.values.iter().map(|v| et * v - flat).collect();
        let norms = fiber_norms(&ctx.slice, &h);
        for k in 0..3 {
            dev[k] = dev[k].max(norms[k]);
        }
        let r = grid.base_point_fiber_range(b);
        let psi: Vec<f64> = r.clone().map(|i| et * state.phi[i] - g.flat.rho.values[i]).collect();
        let lap_psi = ctx.slice.apply_real_symbol(&ctx.slice.forward_real(&psi), |i| lap[i]);
        let gap = lap_psi.iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        residual = residual.max(gap);
    }
    (dev, residual)
}

/// Evaluates every monitor on a torus-model state.
pub fn monitor(flow: &TorusFlow, ctx: &MonitorContext, state: &FlowState) -> Result<MonitorRecord> {
    let g = &flow.geometry;
    let grid = g.grid;
    let t = state.t;
    let e = (-t).exp();
    let a = 1.0 + (g.spec.initial_base_scale - 1.0) * e;
    let s = &g.spectral;

    // U = a(t)F + e^{-t}ψ0 + φ carries every derivative of ω(t)
    let f_hat = s.forward_real(&g.twist.values);
    let p_hat = s.forward_real(&g.psi0.values);
    let phi_hat = s.forward_real(&state.phi);
    let u_hat: Vec<Complex64> = (0..grid.len()).map(|i| f_hat[i] * a + p_hat[i] * e + phi_hat[i]).collect();
    let mut metric = s.hessian_from_hat(&u_hat);
    let (lam, b0) = (g.spec.twist_level, g.spec.initial_fiber_scale);
    metric.bb.par_iter_mut().for_each(|v| *v += a * lam);
    metric.ff.par_iter_mut().for_each(|v| *v += e * b0);
    metric.check_finite("metric")?;

    let phidot = if state.phidot.len() == state.phi.len() {
        state.phidot.clone()
    } else {
        crate::flow::FlowProblem::rhs(flow, t, &state.phi)?.values
    };

    let rows: Vec<(f64, f64, f64, f64, f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let m = metric.at(i);
            let r = Herm2::diag(g.chi.bb[i], e);
            let (lo, hi) = m.relative_eigenvalues(&r);
            let vol = t.exp() * 2.0 * m.det() / flow.omega.values[i];
            let tr = m.trace_relative(&r);
            let dist = (m.bb - g.chi.bb[i]).abs();
            (lo, hi, vol, tr, dist, 0.0)
        })
        .collect();
    let (eig_min, _) = range(rows.par_iter().map(|r| r.0));
    let (_, eig_max) = range(rows.par_iter().map(|r| r.1));
    let (vol_min, vol_max) = range(rows.par_iter().map(|r| r.2));
    let (tr_min, tr_max) = range(rows.par_iter().map(|r| r.3));
    let distance = rows.par_iter().map(|r| r.4).reduce(|| 0.0, f64::max);
    drop(rows);

    let bank = DerivativeBank::new(s, &u_hat);
    let maxima = tensor_maxima(flow, ctx, &metric, &bank)?;
    drop(bank);
    let (fiber_dev, residual) = fiber_diagnostics(flow, ctx, state, &metric);

    Ok(MonitorRecord {
        t,
        sup_phi: sup_abs(&state.phi),
        sup_phidot: sup_abs(&phidot),
        volume_ratio_min: vol_min,
        volume_ratio_max: vol_max,
        trace_min: tr_min,
        trace_max: tr_max,
        s_max: maxima.s,
        rm2_max: maxima.rm2,
        grad2_max: maxima.grad2,
        fiber_dev,
        distance_to_limit: distance,
        eig_min,
        eig_max,
        laplace_psi_residual: residual,
    })
}

/// Base-factor monitors on the octagon.
#[derive(Clone, Debug, PartialEq)]
pub struct OctagonSample {
    pub t: f64,
    pub phi_range: (f64, f64),
    pub phidot_range: (f64, f64),
    /// Range of `g/g_M`.
    pub ratio_range: (f64, f64),
    pub s_max: f64,
    pub rm2_range: (f64, f64),
    pub grad2_max: f64,
    pub distance_to_limit: f64,
    pub relative_deviation: f64,
}

/// With `w = log(g/g_M)`: `Ψ = ∂w`, `S = |∂w|²/g`, `|Rm|² = ((g_M + ∂∂̄w)/g)²`
/// and `∇̃Ψ = ∂∂w − ∂(log g_M)∂w`.
pub fn octagon_monitor(flow: &OctagonBaseFlow, state: &FlowState) -> Result<OctagonSample> {
    let chart = &flow.chart;
    let g = flow.metric(state.t, &state.phi)?;
    if let Some((index, &v)) = g.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::SingularMetric { index, min_eig: v });
    }
    let w: Vec<f64> = g.iter().zip(&flow.g_m).map(|(a, b)| (a / b).ln()).collect();
    let halo = ghost::ghost_exchange(&w, chart)?;
    let dw = ghost::d(&halo, chart);
    let ddbar_w = ghost::ddbar(&halo, chart);
    let dw_halo = ghost::ghost_exchange_weighted(&dw, chart, 1)?;
    let dd_w = ghost::d_complex(&dw_halo, chart);
    let pts = chart.interior_points();
    let mut out = OctagonSample {
        t: state.t,
        phi_range: (f64::INFINITY, f64::NEG_INFINITY),
        phidot_range: (f64::INFINITY, f64::NEG_INFINITY),
        ratio_range: (f64::INFINITY, f64::NEG_INFINITY),
        s_max: 0.0,
        rm2_range: (f64::INFINITY, f64::NEG_INFINITY),
        grad2_max: 0.0,
        distance_to_limit: 0.0,
        relative_deviation: 0.0,
    };
    let widen = |r: &mut (f64, f64), v: f64| {
        r.0 = r.0.min(v);
        r.1 = r.1.max(v);
    };
    for i in 0..g.len() {
        let z = pts[i];
        let q = 1.0 - z.norm_sqr();
        let dlog_gm = 2.0 * z.conj() / q;
        widen(&mut out.phi_range, state.phi[i]);
        if let Some(v) = state.phidot.get(i) {
            widen(&mut out.phidot_range, *v);
        }
        let ratio = g[i] / flow.g_m[i];
        widen(&mut out.ratio_range, ratio);
        out.s_max = out.s_max.max(dw[i].norm_sqr() / g[i]);
        let rm = (flow.g_m[i] + ddbar_w[i]) / g[i];
        widen(&mut out.rm2_range, rm * rm);
        let grad = dd_w[i] - dlog_gm * dw[i];
        out.grad2_max = out.grad2_max.max(grad.norm_sqr() / (g[i] * g[i]));
        out.distance_to_limit = out.distance_to_limit.max((g[i] - flow.g_m[i]).abs());
        out.relative_deviation = out.relative_deviation.max((ratio - 1.0).abs());
    }
    Ok(out)
}

/// Range of `e^t g_ff` over a torus factor.
pub fn fiber_block_range(flow: &TorusFlow, state: &FlowState) -> Result<(f64, f64)> {
    let m = flow.metric(state.t, &state.phi)?;
    let et = state.t.exp();
    Ok(range(m.ff.par_iter().map(|v| v * et)))
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, x| (a.0.min(*x), a.1.max(*x)))
}

/// Product record from an octagon base sample and a fiber-factor torus record.
///
/// The fiber factor is run with an untwisted single-point base, so its base
/// block contributes exactly one to traces and nothing to tensor norms.
pub fn compose_bolza(base: &OctagonSample, fiber: &MonitorRecord, fiber_state: &FlowState, fiber_block: (f64, f64)) -> MonitorRecord {
    let sup_sum = |b: (f64, f64), f: (f64, f64)| (b.1 + f.1).abs().max((b.0 + f.0).abs());
    let fphi = min_max(&fiber_state.phi);
    let fdot = min_max(&fiber_state.phidot);
    MonitorRecord {
        t: base.t,
        sup_phi: sup_sum(base.phi_range, fphi),
        sup_phidot: sup_sum(base.phidot_range, fdot),
        volume_ratio_min: base.ratio_range.0 * fiber.volume_ratio_min,
        volume_ratio_max: base.ratio_range.1 * fiber.volume_ratio_max,
        trace_min: base.ratio_range.0 + fiber.trace_min - 1.0,
        trace_max: base.ratio_range.1 + fiber.trace_max - 1.0,
        s_max: base.s_max + fiber.s_max,
        rm2_max: base.rm2_range.1 + fiber.rm2_max,
        grad2_max: base.grad2_max + fiber.grad2_max,
        fiber_dev: fiber.fiber_dev,
        distance_to_limit: base.distance_to_limit,
        eig_min: base.ratio_range.0.min(fiber_block.0),
        eig_max: base.ratio_range.1.max(fiber_block.1),
        laplace_psi_residual: fiber.laplace_psi_residual,
    }
}

/// Fitted envelope `C(1 + t)e^{-t}` over a window.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub window: (f64, f64),
    pub constant: f64,
    /// Least-squares slope of `log y`; NaN when some sample is not positive.
    pub log_slope: f64,
    /// Max over min of `y/((1+t)e^{-t})` in the window.
    pub ratio_spread: f64,
    pub samples: usize,
    pub pass: bool,
}

pub const MIN_FIT_SAMPLES: usize = 20;
pub const RATIO_BOUND: f64 = 4.0;

fn window_points(series: &[(f64, f64)], window: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    let (t0, t1) = window;
    if !(t1 > t0 && t0 >= 1.0) {
        return Err(Error::config("fit_window", format!("window [{t0}, {t1}] must satisfy t1 > t0 >= 1")));
    }
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|(t, _)| *t >= t0 - 1e-9 && *t <= t1 + 1e-9).collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientSamples { needed: MIN_FIT_SAMPLES, found: pts.len(), t0, t1 });
    }
    Ok(pts)
}

/// Least-squares slope of `y` against `t`.
pub fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sty: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let stt: f64 = points.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    sty / stt
}

pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let pts = window_points(series, window)?;
    let ratios: Vec<f64> = pts.iter().map(|(t, y)| y / ((1.0 + t) * (-t).exp())).collect();
    let constant = ratios.iter().cloned().fold(0.0, f64::max);
    if pts.iter().any(|p| !(p.1 > 0.0)) {
        return Ok(DecayFit { window, constant, log_slope: f64::NAN, ratio_spread: f64::NAN, samples: pts.len(), pass: true });
    }
    let rmin = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = constant / rmin;
    let logs: Vec<(f64, f64)> = pts.iter().map(|(t, y)| (*t, y.ln())).collect();
    Ok(DecayFit {
        window,
        constant,
        log_slope: ls_slope(&logs),
        ratio_spread: spread,
        samples: pts.len(),
        pass: constant.is_finite() && spread <= RATIO_BOUND,
    })
}

/// Log-slopes of the fiber deviations and the worst identity residual.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatnessRates {
    /// `None` where the series is not positive over the window.
    pub slopes: [Option<f64>; 3],
    pub max_residual: f64,
}

pub fn fiber_flatness_rates(records: &[MonitorRecord], window: (f64, f64)) -> Result<FlatnessRates> {
    let mut slopes = [None; 3];
    for (k, slot) in slopes.iter_mut().enumerate() {
        let series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.fiber_dev[k])).collect();
        let pts = window_points(&series, window)?;
        if pts.iter().all(|p| p.1 > 0.0) {
            let logs: Vec<(f64, f64)> = pts.iter().map(|(t, y)| (*t, y.ln())).collect();
            *slot = Some(ls_slope(&logs));
        }
    }
    let max_residual = records.iter().map(|r| r.laplace_psi_residual).fold(0.0, f64::max);
    Ok(FlatnessRates { slopes, max_residual })
}

/// Growth factor of a monitor: max over `[1, t_end]` divided by max over `[0, 1]`.
pub fn blow_up_factor(records: &[MonitorRecord], value: impl Fn(&MonitorRecord) -> f64) -> f64 {
    let early = records.iter().filter(|r| r.t <= 1.0 + 1e-9).map(&value).fold(0.0, f64::max);
    let late = records.iter().filter(|r| r.t >= 1.0 - 1e-9).map(&value).fold(0.0, f64::max);
    if late == 0.0 {
        0.0
    } else {
        late / early
    }
}

/// Monitors below this absolute level count as roundoff in the growth check.
pub const BLOW_UP_FLOOR: f64 = 1e-10;

/// Growth check of one bounded monitor.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundCheck {
    pub name: &'static str,
    pub early_max: f64,
    pub late_max: f64,
    pub pass: bool,
}

/// `late ≤ factor·early + floor` for `sup|φ̇|`, the two-sided volume-ratio
/// bound, `S`, `|Rm|²` and the order-2 norm.
pub fn bounded_monitors(records: &[MonitorRecord], factor: f64) -> Vec<BoundCheck> {
    let monitors: [(&'static str, fn(&MonitorRecord) -> f64); 5] = [
        ("sup_phidot", |r| r.sup_phidot),
        ("volume_ratio_bound", |r| r.volume_ratio_spread()),
        ("s_max", |r| r.s_max),
        ("rm2_max", |r| r.rm2_max),
        ("grad2_max", |r| r.grad2_max),
    ];
    monitors
        .iter()
        .map(|(name, f)| {
            let early = records.iter().filter(|r| r.t <= 1.0 + 1e-9).map(f).fold(0.0, f64::max);
            let late = records.iter().filter(|r| r.t >= 1.0 - 1e-9).map(f).fold(0.0, f64::max);
            BoundCheck { name, early_max: early, late_max: late, pass: late <= factor * early + BLOW_UP_FLOOR }
        })
        .collect()
}

/// Eigenvalues of `ω(t)` against `ω̃_t` over a run.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenBand {
    pub lo: f64,
    pub hi: f64,
    /// Smallest `C` with every eigenvalue in `[1/C, C]`.
    pub constant: f64,
    /// Largest relative move of either band edge after `t_from`, against its value there.
    pub drift: f64,
}

pub fn eigen_band(records: &[MonitorRecord], t_from: f64) -> Option<EigenBand> {
    let lo = records.iter().map(|r| r.eig_min).fold(f64::INFINITY, f64::min);
    let hi = records.iter().map(|r| r.eig_max).fold(f64::NEG_INFINITY, f64::max);
    let anchor = records.iter().find(|r| r.t >= t_from - 1e-9)?;
    let drift = records
        .iter()
        .filter(|r| r.t >= t_from - 1e-9)
        .map(|r| ((r.eig_min - anchor.eig_min) / anchor.eig_min).abs().max(((r.eig_max - anchor.eig_max) / anchor.eig_max).abs()))
        .fold(0.0, f64::max);
    Some(EigenBand { lo, hi, constant: hi.max(1.0 / lo), drift })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(f: impl Fn(f64) -> f64, t0: f64, t1: f64) -> Vec<(f64, f64)> {
        let n = ((t1 - t0) / 0.05).round() as usize;
        (0..=n).map(|k| t0 + k as f64 * 0.05).map(|t| (t, f(t))).collect()
    }

    #[test]
    fn exact_envelope_fits() {
        let fit = decay_fit(&series(|t| 2.0 * (1.0 + t) * (-t).exp(), 0.0, 8.0), (2.0, 6.0)).unwrap();
        assert!((fit.constant - 2.0).abs() < 1e-12);
        assert!((fit.ratio_spread - 1.0).abs() < 1e-12);
        assert!(fit.pass);
    }

    #[test]
    fn wrong_rate_fails() {
        let fit = decay_fit(&series(|t| (-t / 2.0).exp(), 0.0, 8.0), (1.0, 8.0)).unwrap();
        assert!(!fit.pass);
    }

    #[test]
    fn too_few_samples() {
        let err = decay_fit(&series(|t| t, 2.0, 2.5), (2.0, 6.0)).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { .. }));
    }

    #[test]
    fn zero_series_passes_trivially() {
        let fit = decay_fit(&series(|_| 0.0, 0.0, 8.0), (2.0, 6.0)).unwrap();
        assert!(fit.pass && fit.log_slope.is_nan());
    }

    #[test]
    fn sample_points_are_distinct() {
        let s = fiber_sample_points(1024, None);
        assert_eq!(s.len(), 8);
        assert_eq!(fiber_sample_points(1, None), vec![0]);
    }
}
