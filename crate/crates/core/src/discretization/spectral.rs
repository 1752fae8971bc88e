//! Trigonometric differentiation on the periodic product grid.
//!
//! Complex derivatives are built from real-coordinate wavenumbers:
//! on the base `∂ = ½(∂_x − i∂_y)`, and on the fiber `w = s + τu` gives
//! `∂_w = (τ̄∂_s − ∂_u)/(τ̄ − τ)`, `∂_w̄ = (∂_u − τ∂_s)/(τ̄ − τ)`.
//! First-derivative symbols drop the Nyquist mode so every operator maps real
//! fields to fields with the right conjugate symmetry; each `∂∂̄` pair uses
//! the exact second-derivative symbol, which keeps the Nyquist mode.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::grid::{HermitianField, ProductGrid, ScalarField};
use crate::error::{Error, Result};

/// Counts of `∂_b, ∂̄_b, ∂_f, ∂̄_f` in a mixed derivative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub db: u8,
    pub dbb: u8,
    pub df: u8,
    pub dfb: u8,
}

impl Monomial {
    pub const fn new(db: u8, dbb: u8, df: u8, dfb: u8) -> Self {
        Self { db, dbb, df, dfb }
    }

    /// Monomial from unbarred and barred index lists (0 = base, 1 = fiber).
    pub fn from_indices(unbarred: &[usize], barred: &[usize]) -> Self {
        let mut m = Monomial::new(0, 0, 0, 0);
        for &i in unbarred {
            if i == 0 {
                m.db += 1
            } else {
                m.df += 1
            }
        }
        for &j in barred {
            if j == 0 {
                m.dbb += 1
            } else {
                m.dfb += 1
            }
        }
        m
    }
}

fn signed_wavenumber(k: usize, n: usize) -> (f64, f64) {
    // (wavenumber for second derivatives, wavenumber for first derivatives)
    let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    let first = if n % 2 == 0 && k == n / 2 { 0.0 } else { kk };
    let second = if n % 2 == 0 && k == n / 2 { -(n as f64) / 2.0 } else { kk };
    (second, first)
}

/// Symbol tables for one 2D plane.
#[derive(Clone, Debug)]
struct PlaneSymbols {
    d: Vec<Complex64>,
    dbar: Vec<Complex64>,
    lap: Vec<f64>,
}

impl PlaneSymbols {
    fn base(n: usize) -> Self {
        let mut d = Vec::with_capacity(n * n);
        let mut dbar = Vec::with_capacity(n * n);
        let mut lap = Vec::with_capacity(n * n);
        for kx in 0..n {
            for ky in 0..n {
                let (sx, fx) = signed_wavenumber(kx, n);
                let (sy, fy) = signed_wavenumber(ky, n);
                let dx = Complex64::new(0.0, 2.0 * PI * fx);
                let dy = Complex64::new(0.0, 2.0 * PI * fy);
                let i = Complex64::new(0.0, 1.0);
                d.push(0.5 * (dx - i * dy));
                dbar.push(0.5 * (dx + i * dy));
                lap.push(-PI * PI * (sx * sx + sy * sy));
            }
        }
        Self { d, dbar, lap }
    }

    fn fiber(n: usize, tau: Complex64) -> Self {
        let mut d = Vec::with_capacity(n * n);
        let mut dbar = Vec::with_capacity(n * n);
        let mut lap = Vec::with_capacity(n * n);
        let denom = tau.conj() - tau;
        let im2 = tau.im * tau.im;
        for ks in 0..n {
            for ku in 0..n {
                let (ss, fs) = signed_wavenumber(ks, n);
                let (su, fu) = signed_wavenumber(ku, n);
                let ds = Complex64::new(0.0, 2.0 * PI * fs);
                let du = Complex64::new(0.0, 2.0 * PI * fu);
                d.push((tau.conj() * ds - du) / denom);
                dbar.push((du - tau * ds) / denom);
                let dss = -(2.0 * PI * ss).powi(2);
                let duu = -(2.0 * PI * su).powi(2);
                let dsu = (ds * du).re;
                lap.push((tau.norm_sqr() * dss - 2.0 * tau.re * dsu + duu) / (4.0 * im2));
            }
        }
        Self { d, dbar, lap }
    }

    fn symbol(&self, k: usize, nd: u8, ndbar: u8) -> Complex64 {
        let pairs = nd.min(ndbar);
        let mut s = Complex64::new(self.lap[k].powi(pairs as i32), 0.0);
        for _ in pairs..nd {
            s *= self.d[k];
        }
        for _ in pairs..ndbar {
            s *= self.dbar[k];
        }
        s
    }
}

/// FFT plans and derivative symbols for a product grid.
pub struct Spectral {
    grid: ProductGrid,
    fwd_b: Arc<dyn Fft<f64>>,
    inv_b: Arc<dyn Fft<f64>>,
    fwd_f: Arc<dyn Fft<f64>>,
    inv_f: Arc<dyn Fft<f64>>,
    base: PlaneSymbols,
    fiber: PlaneSymbols,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: ProductGrid) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            grid,
            fwd_b: planner.plan_fft_forward(grid.nb),
            inv_b: planner.plan_fft_inverse(grid.nb),
            fwd_f: planner.plan_fft_forward(grid.nf),
            inv_f: planner.plan_fft_inverse(grid.nf),
            base: PlaneSymbols::base(grid.nb),
            fiber: PlaneSymbols::fiber(grid.nf, grid.tau),
        }
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    /// `∂_b∂̄_b` symbol on the base plane (non-positive).
    pub fn base_laplacian_symbol(&self) -> &[f64] {
        &self.base.lap
    }

    /// `∂_w∂̄_w` symbol on the fiber plane (non-positive).
    pub fn fiber_laplacian_symbol(&self) -> &[f64] {
        &self.fiber.lap
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let [nb, _, nf, _] = self.grid.dims();
        let (pb, pf) = if inverse { (&self.inv_b, &self.inv_f) } else { (&self.fwd_b, &self.fwd_f) };
        if nf > 1 {
            fft_axis(data, nf, 1, pf.as_ref());
            fft_axis(data, nf, nf, pf.as_ref());
        }
        if nb > 1 {
            fft_axis(data, nb, nf * nf, pb.as_ref());
            fft_axis(data, nb, nb * nf * nf, pb.as_ref());
        }
        if inverse {
            let scale = 1.0 / data.len() as f64;
            data.par_iter_mut().for_each(|c| *c *= scale);
        }
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        data
    }

    pub fn forward(&self, mut data: Vec<Complex64>) -> Vec<Complex64> {
        self.transform(&mut data, false);
        data
    }

    pub fn inverse(&self, mut data: Vec<Complex64>) -> Vec<Complex64> {
        self.transform(&mut data, true);
        data
    }

    /// Symbol of a mixed derivative at spectral index `idx`.
    #[inline]
    pub fn symbol(&self, idx: usize, m: Monomial) -> Complex64 {
        let (b, f) = self.grid.split(idx);
        self.base.symbol(b, m.db, m.dbb) * self.fiber.symbol(f, m.df, m.dfb)
    }

    /// Applies a mixed derivative to a spectrum and returns the physical field.
    pub fn derivative(&self, hat: &[Complex64], m: Monomial) -> Vec<Complex64> {
        let fl = self.grid.fiber_len();
        let mut out = vec![Complex64::new(0.0, 0.0); hat.len()];
        out.par_chunks_mut(fl).zip(hat.par_chunks(fl)).enumerate().for_each(|(b, (o, h))| {
            let sb = self.base.symbol(b, m.db, m.dbb);
            for (f, (oo, hh)) in o.iter_mut().zip(h).enumerate() {
                *oo = *hh * sb * self.fiber.symbol(f, m.df, m.dfb);
            }
        });
        self.inverse(out)
    }

    /// Real part of a mixed derivative of a real field.
    pub fn derivative_real(&self, hat: &[Complex64], m: Monomial) -> Vec<f64> {
        self.derivative(hat, m).into_iter().map(|c| c.re).collect()
    }

    /// Multiplies a spectrum pointwise by a real symbol and inverts.
    pub fn apply_real_symbol(&self, hat: &[Complex64], symbol: impl Fn(usize) -> f64 + Sync) -> Vec<f64> {
        let out: Vec<Complex64> = hat.par_iter().enumerate().map(|(i, h)| *h * symbol(i)).collect();
        self.inverse(out).into_iter().map(|c| c.re).collect()
    }

    /// Complex Hessian `u_{i j̄}` from the spectrum of a real potential.
    pub fn hessian_from_hat(&self, hat: &[Complex64]) -> HermitianField {
        let fl = self.grid.fiber_len();
        // bb and ff are real for real input, so both ride one inverse transform.
        let mut packed = vec![Complex64::new(0.0, 0.0); hat.len()];
        let mut mixed = vec![Complex64::new(0.0, 0.0); hat.len()];
        packed
            .par_chunks_mut(fl)
            .zip(mixed.par_chunks_mut(fl))
            .zip(hat.par_chunks(fl))
            .enumerate()
            .for_each(|(b, ((p, m), h))| {
                let lb = self.base.lap[b];
                let db = self.base.d[b];
                for f in 0..fl {
                    let lf = self.fiber.lap[f];
                    p[f] = h[f] * Complex64::new(lb, lf);
                    m[f] = h[f] * db * self.fiber.dbar[f];
                }
            });
        let packed = self.inverse(packed);
        let mixed = self.inverse(mixed);
        HermitianField {
            grid: self.grid,
            bb: packed.iter().map(|c| c.re).collect(),
            ff: packed.iter().map(|c| c.im).collect(),
            bf: mixed,
        }
    }

    /// Spectral mixed complex Hessian `i∂∂̄φ` of a periodic real potential.
    pub fn complex_hessian(&self, phi: &ScalarField) -> Result<HermitianField> {
        debug_assert_eq!(phi.grid, self.grid);
        let h = self.hessian_from_hat(&self.forward_real(&phi.values));
        h.check_finite("complex hessian")?;
        Ok(h)
    }

    /// Solves `∂_w∂̄_w ρ = rhs` on each fiber for fiber-mean-zero data;
    /// the fiber-constant part of the solution is set to zero.
    pub fn fiber_poisson(&self, rhs: &[f64]) -> Vec<f64> {
        let hat = self.forward_real(rhs);
        let lap = &self.fiber.lap;
        let fl = self.grid.fiber_len();
        self.apply_real_symbol(&hat, |i| {
            let f = i % fl;
            if f == 0 || lap[f] == 0.0 {
                0.0
            } else {
                1.0 / lap[f]
            }
        })
    }
}

/// Transforms every line of length `n` and stride `stride` in place.
fn fft_axis(data: &mut [Complex64], n: usize, stride: usize, plan: &dyn Fft<f64>) {
    let block = n * stride;
    if stride == 1 {
        data.par_chunks_mut(block.max(n) * 64).for_each(|chunk| plan.process(chunk));
        return;
    }
    // transpose column tiles into contiguous lines, transform, scatter back
    const TILE: usize = 64;
    data.par_chunks_mut(block).for_each(|chunk| {
        let mut lines = vec![Complex64::new(0.0, 0.0); TILE * n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        let mut j0 = 0;
        while j0 < stride {
            let w = TILE.min(stride - j0);
            for k in 0..n {
                let row = &chunk[k * stride + j0..k * stride + j0 + w];
                for (j, v) in row.iter().enumerate() {
                    lines[j * n + k] = *v;
                }
            }
            plan.process_with_scratch(&mut lines[..w * n], &mut scratch);
            for k in 0..n {
                let row = &mut chunk[k * stride + j0..k * stride + j0 + w];
                for (j, v) in row.iter_mut().enumerate() {
                    *v = lines[j * n + k];
                }
            }
            j0 += w;
        }
    });
}

/// Finite-check helper shared by the stepping code.
pub fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteValue { what, index }),
        None => Ok(()),
    }
}
