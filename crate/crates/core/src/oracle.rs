//! Independent reference computations: dense central-difference Hessians,
//! the class-coefficient ODE, and the stationary right-hand side.
//!
//! Nothing here calls into the spectral or stencil code it is used to check.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretization::{HermitianField, ProductGrid, ScalarField};
use crate::error::{Error, Result};
use crate::flow::{FlowParams, FlowProblem, TorusFlow};
use crate::geometry::{BaseBackend, Geometry, GeometrySpec, InitialPotential};

/// Outcome of one oracle comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        let deviation = deviation.abs();
        Self { name: name.into(), deviation, tolerance, pass: deviation <= tolerance }
    }

    /// Same comparison, passing iff the deviation lands on `target` within `tolerance`.
    pub fn expecting(name: impl Into<String>, deviation: f64, target: f64, tolerance: f64) -> Self {
        let deviation = deviation.abs();
        Self { name: name.into(), deviation, tolerance, pass: (deviation - target).abs() <= tolerance }
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<36} {:>12.4e} {:>12.4e}  {}",
            self.name,
            self.deviation,
            self.tolerance,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

/// Periodic value lookup with an integer offset on each of the four axes.
struct Lattice<'a> {
    dims: [usize; 4],
    values: &'a [f64],
}

impl Lattice<'_> {
    #[inline]
    fn at(&self, p: [usize; 4], off: [isize; 4]) -> f64 {
        let mut idx = 0usize;
        for a in 0..4 {
            let n = self.dims[a] as isize;
            let c = (p[a] as isize + off[a]).rem_euclid(n) as usize;
            idx = idx * self.dims[a] + c;
        }
        self.values[idx]
    }

    /// Second-order central `∂_a∂_b` with grid step `m` on both axes, in index units.
    fn second(&self, p: [usize; 4], a: usize, b: usize, m: isize) -> f64 {
        if a == b {
            let (mut plus, mut minus) = ([0; 4], [0; 4]);
            plus[a] = m;
            minus[a] = -m;
            self.at(p, plus) - 2.0 * self.at(p, [0; 4]) + self.at(p, minus)
        } else {
            let comb = |sa: isize, sb: isize| {
                let mut o = [0; 4];
                o[a] = sa * m;
                o[b] = sb * m;
                self.at(p, o)
            };
            0.25 * (comb(1, 1) - comb(1, -1) - comb(-1, 1) + comb(-1, -1))
        }
    }
}

/// Central-difference `i∂∂̄φ` with stencil step `m` grid cells.
fn dense_hessian_step(phi: &ScalarField, m: usize) -> HermitianField {
    let grid = phi.grid;
    let dims = grid.dims();
    let lat = Lattice { dims, values: &phi.values };
    let hb = 1.0 / grid.nb as f64 * m as f64;
    let hf = 1.0 / grid.nf as f64 * m as f64;
    let tau = grid.tau;
    let m = m as isize;
    let i = Complex64::new(0.0, 1.0);
    let denom = tau.conj() - tau;
    HermitianField::from_fn(grid, |idx| {
        let bx = idx / (grid.nb * grid.fiber_len());
        let by = (idx / grid.fiber_len()) % grid.nb;
        let fs = (idx / grid.nf) % grid.nf;
        let fu = idx % grid.nf;
        let p = [bx, by, fs, fu];
        let d = |a: usize, b: usize, ha: f64, hb2: f64| {
            if dims[a] == 1 || dims[b] == 1 {
                0.0
            } else {
                lat.second(p, a, b, m) / (ha * hb2)
            }
        };
        let (xx, yy) = (d(0, 0, hb, hb), d(1, 1, hb, hb));
        let (ss, uu, su) = (d(2, 2, hf, hf), d(3, 3, hf, hf), d(2, 3, hf, hf));
        let (xs, xu, ys, yu) = (d(0, 2, hb, hf), d(0, 3, hb, hf), d(1, 2, hb, hf), d(1, 3, hb, hf));
        let bb = 0.25 * (xx + yy);
        let ff = (tau.norm_sqr() * ss - 2.0 * tau.re * su + uu) / (4.0 * tau.im * tau.im);
        // ∂_b = ½(∂_x − i∂_y), ∂̄_w = (∂_u − τ∂_s)/(τ̄ − τ)
        let bf = 0.5 * ((Complex64::new(xu, 0.0) - tau * xs) - i * (Complex64::new(yu, 0.0) - tau * ys)) / denom;
        crate::discretization::Herm2 { bb, ff, bf }
    })
}

/// Second-order central-difference complex Hessian, no transforms.
pub fn dense_hessian_oracle(phi: &ScalarField) -> HermitianField {
    dense_hessian_step(phi, 1)
}

/// Extrapolation of central-difference Hessians with steps `1, 2, …, levels`
/// cells to zero step (Neville in the squared step); order `2·levels`.
pub fn dense_hessian_extrapolated(phi: &ScalarField, levels: usize) -> HermitianField {
    assert!(levels >= 1, "at least one level");
    let mut table: Vec<HermitianField> = (1..=levels).map(|m| dense_hessian_step(phi, m)).collect();
    let x: Vec<f64> = (1..=levels).map(|m| (m * m) as f64).collect();
    for k in 1..levels {
        for i in 0..levels - k {
            let (a, b) = (x[i + k], x[i]);
            let d = a - b;
            let (lo, hi) = table.split_at_mut(i + 1);
            let (p, q) = (&mut lo[i], &hi[0]);
            for n in 0..p.len() {
                p.bb[n] = (a * p.bb[n] - b * q.bb[n]) / d;
                p.ff[n] = (a * p.ff[n] - b * q.ff[n]) / d;
                p.bf[n] = (p.bf[n] * a - q.bf[n] * b) / d;
            }
        }
    }
    table.swap_remove(0)
}

/// Extrapolation depth on an `n`-point axis: the widest step stays within a
/// quarter period.
pub fn richardson_levels(n: usize) -> usize {
    (n / 4).clamp(1, 8)
}

/// Tolerance for the extrapolated dense Hessian against the spectral one on a
/// unit-amplitude field with wavenumbers `|k| ≤ 1` per axis, by the coarser
/// of the two planes.
pub fn hessian_tolerance(n: usize) -> f64 {
    match n {
        0..=15 => 0.5,
        16..=31 => 1e-3,
        32..=63 => 1e-6,
        _ => 1e-8,
    }
}

/// Random trigonometric field with wavenumbers in `{−kmax, …, kmax}` per axis
/// (collapsed planes carry only `0`), normalised to `Σ|a_k| = 1`.
pub fn band_limited_field(grid: ProductGrid, kmax: i32, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let range = |n: usize| if n > 1 { -kmax..=kmax } else { 0..=0 };
    let mut modes = Vec::new();
    for kx in range(grid.nb) {
        for ky in range(grid.nb) {
            for ks in range(grid.nf) {
                for ku in range(grid.nf) {
                    let amp: f64 = rng.gen_range(-1.0..1.0);
                    let phase: f64 = rng.gen_range(0.0..2.0 * PI);
                    modes.push(([kx as f64, ky as f64, ks as f64, ku as f64], amp, phase));
                }
            }
        }
    }
    let total: f64 = modes.iter().map(|m| m.1.abs()).sum();
    ScalarField::from_fn(grid, |c| {
        modes
            .iter()
            .map(|(k, a, p)| a * (2.0 * PI * (k[0] * c[0] + k[1] * c[1] + k[2] * c[2] + k[3] * c[3]) + p).cos())
            .sum::<f64>()
            / total
    })
}

/// Largest componentwise gap between two Hessian fields.
pub fn hessian_gap(a: &HermitianField, b: &HermitianField) -> f64 {
    a.max_abs_diff(b)
}

/// Dense second-order Hessian against the spectral one for a sequence of
/// grids; returns `(nb, gap)` pairs.
pub fn hessian_refinement_study(grids: &[ProductGrid], field: impl Fn([f64; 4]) -> f64) -> Result<Vec<(usize, f64)>> {
    grids
        .iter()
        .map(|&g| {
            let phi = ScalarField::from_fn(g, &field);
            let spectral = crate::discretization::Spectral::new(g).complex_hessian(&phi)?;
            Ok((g.nb, hessian_gap(&dense_hessian_oracle(&phi), &spectral)))
        })
        .collect()
}

/// `log2(e_k / e_{k+1})` for successive pairs of a halving refinement.
pub fn observed_orders(study: &[(usize, f64)]) -> Vec<f64> {
    study.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[1].0 as f64 / w[0].0 as f64).ln()).collect()
}

/// Numerical class coefficients next to their closed forms.
#[derive(Clone, Debug)]
pub struct CoefficientTrajectory {
    /// `(t, a, b)` from the integrator.
    pub samples: Vec<(f64, f64, f64)>,
    pub max_deviation: f64,
}

impl CoefficientTrajectory {
    pub fn at_end(&self) -> (f64, f64, f64) {
        *self.samples.last().expect("nonempty trajectory")
    }
}

/// Integrates `a' = 1 − a`, `b' = −b` by classical RK4 and compares with
/// `a = 1 + (a0 − 1)e^{-t}`, `b = b0 e^{-t}`.
pub fn ode_coefficient_oracle(a0: f64, b0: f64, t_end: f64, dt: f64) -> Result<CoefficientTrajectory> {
    if !(a0 > 0.0 && b0 > 0.0) {
        return Err(Error::config("initial_base_scale", "class coefficients must be positive"));
    }
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::config("dt_max", "step and horizon must be positive"));
    }
    let f = |y: [f64; 2]| [1.0 - y[0], -y[1]];
    let steps = (t_end / dt).ceil() as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let mut y = [a0, b0];
    let mut samples = vec![(0.0, a0, b0)];
    let mut dev = 0.0f64;
    for k in 1..=steps {
        let add = |y: [f64; 2], d: [f64; 2], s: f64| [y[0] + s * d[0], y[1] + s * d[1]];
        let k1 = f(y);
        let k2 = f(add(y, k1, 0.5 * h));
        let k3 = f(add(y, k2, 0.5 * h));
        let k4 = f(add(y, k3, h));
        for c in 0..2 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        let t = k as f64 * h;
        let e = (-t).exp();
        dev = dev.max((y[0] - (1.0 + (a0 - 1.0) * e)).abs()).max((y[1] - b0 * e).abs());
        samples.push((t, y[0], y[1]));
    }
    Ok(CoefficientTrajectory { samples, max_deviation: dev })
}

/// Times at which the stationary right-hand side is checked.
pub const STATIONARY_TIMES: [f64; 3] = [0.0, 1.0, 5.0];
pub const STATIONARY_TOLERANCE: f64 = 1e-12;

/// `max |rhs(φ ≡ 0, t)|` over the check times, for `ψ0 ≡ 0`; `omega_scale`
/// multiplies the volume density to inject a fault.
pub fn stationarity_deviation(spec: &GeometrySpec, omega_scale: f64) -> Result<f64> {
    if spec.base_backend != BaseBackend::TorusSurrogate {
        return Err(Error::config("base_backend", "the stationarity oracle runs on the torus model"));
    }
    if !spec.initial_potential.is_zero() {
        return Err(Error::config("initial_potential", "the stationarity oracle needs a zero initial potential"));
    }
    let geometry = Geometry::new(spec)?;
    let omega = geometry.volume_form()?.scaled(omega_scale)?;
    let flow = TorusFlow::new(geometry, omega, &FlowParams::default());
    let zero = vec![0.0; flow.len()];
    let mut dev = 0.0f64;
    for t in STATIONARY_TIMES {
        let r = flow.rhs(t, &zero)?;
        dev = dev.max(r.values.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }
    Ok(dev)
}

/// Stationary right-hand side check with the potential of `spec` zeroed.
pub fn stationarity_oracle(spec: &GeometrySpec, omega_scale: f64) -> Result<OracleReport> {
    let spec = GeometrySpec { initial_potential: InitialPotential::zero(), ..spec.clone() };
    let dev = stationarity_deviation(&spec, omega_scale)?;
    Ok(OracleReport::new("stationary rhs", dev, STATIONARY_TOLERANCE))
}
