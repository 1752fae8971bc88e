//! Product grid storage: base-major, fiber-minor, contiguous.
//!
//! A point is addressed by `(bx, by, fs, fu)`; the base plane carries the
//! real coordinates `x_b = bx / nb`, `y_b = by / nb` of the unit square torus
//! and the fiber plane carries lattice coordinates `s = fs / nf`, `u = fu / nf`
//! of the fiber point `w = s + τ u`.  Either plane may be collapsed to a single
//! point (`nb == 1` or `nf == 1`), which is how the reduced flows reuse the
//! full machinery.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProductGrid {
    pub nb: usize,
    pub nf: usize,
    pub tau: Complex64,
}

impl ProductGrid {
    pub fn new(nb: usize, nf: usize, tau: Complex64) -> Self {
        assert!(nb >= 1 && nf >= 1, "grid sizes must be positive");
        assert!(tau.im > 0.0, "fiber modulus must lie in the upper half plane");
        Self { nb, nf, tau }
    }

    pub fn square(nb: usize, nf: usize) -> Self {
        Self::new(nb, nf, Complex64::new(0.0, 1.0))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.base_len() * self.fiber_len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn base_len(&self) -> usize {
        self.nb * self.nb
    }

    #[inline]
    pub fn fiber_len(&self) -> usize {
        self.nf * self.nf
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.nb, self.nb, self.nf, self.nf]
    }

    #[inline]
    pub fn index(&self, bx: usize, by: usize, fs: usize, fu: usize) -> usize {
        ((bx * self.nb + by) * self.nf + fs) * self.nf + fu
    }

    /// Splits a linear index into (base index, fiber index).
    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.fiber_len(), idx % self.fiber_len())
    }

    #[inline]
    pub fn join(&self, base: usize, fiber: usize) -> usize {
        base * self.fiber_len() + fiber
    }

    pub fn base_coords(&self, base: usize) -> (f64, f64) {
        let (bx, by) = (base / self.nb, base % self.nb);
        (bx as f64 / self.nb as f64, by as f64 / self.nb as f64)
    }

    pub fn fiber_coords(&self, fiber: usize) -> (f64, f64) {
        let (fs, fu) = (fiber / self.nf, fiber % self.nf);
        (fs as f64 / self.nf as f64, fu as f64 / self.nf as f64)
    }

    /// `(x_b, y_b, s, u)` at a linear index.
    pub fn coords(&self, idx: usize) -> [f64; 4] {
        let (b, f) = self.split(idx);
        let (x, y) = self.base_coords(b);
        let (s, u) = self.fiber_coords(f);
        [x, y, s, u]
    }

    /// Smallest physical grid spacing over the non-collapsed axes.
    pub fn min_spacing(&self) -> f64 {
        let mut h = f64::INFINITY;
        if self.nb > 1 {
            h = h.min(1.0 / self.nb as f64);
        }
        if self.nf > 1 {
            h = h.min(1.0 / self.nf as f64).min(self.tau.norm() / self.nf as f64);
        }
        if h.is_finite() {
            h
        } else {
            1.0
        }
    }

    /// Coordinate area of the base cell times the fiber cell.
    pub fn cell_volume(&self) -> f64 {
        self.tau.im
    }

    pub fn base_point_fiber_range(&self, base: usize) -> std::ops::Range<usize> {
        let start = base * self.fiber_len();
        start..start + self.fiber_len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: ProductGrid,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: ProductGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: ProductGrid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: ProductGrid, f: impl Fn([f64; 4]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, values }
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFiniteValue { what, index }),
            None => Ok(()),
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        crate::discretization::stable_sum(&self.values) / self.values.len() as f64
    }
}

/// Complex Hermitian 2×2 matrix in (base, fiber) components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Herm2 {
    pub bb: f64,
    pub ff: f64,
    pub bf: Complex64,
}

impl Herm2 {
    pub const ZERO: Herm2 = Herm2 { bb: 0.0, ff: 0.0, bf: Complex64 { re: 0.0, im: 0.0 } };

    pub fn diag(bb: f64, ff: f64) -> Self {
        Self { bb, ff, bf: Complex64::new(0.0, 0.0) }
    }

    #[inline]
    pub fn fb(&self) -> Complex64 {
        self.bf.conj()
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.bb * self.ff - self.bf.norm_sqr()
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.bb + self.ff
    }

    /// Matrix inverse (again Hermitian).
    pub fn inverse(&self) -> Herm2 {
        let d = self.det();
        Herm2 { bb: self.ff / d, ff: self.bb / d, bf: -self.bf / d }
    }

    /// Entry `(i, j)` with 0 = base, 1 = fiber.
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        match (i, j) {
            (0, 0) => Complex64::new(self.bb, 0.0),
            (1, 1) => Complex64::new(self.ff, 0.0),
            (0, 1) => self.bf,
            _ => self.bf.conj(),
        }
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let half_tr = 0.5 * (self.bb + self.ff);
        let disc = (0.25 * (self.bb - self.ff).powi(2) + self.bf.norm_sqr()).sqrt();
        (half_tr - disc, half_tr + disc)
    }

    /// Eigenvalues of `self` relative to a positive reference `r`,
    /// i.e. the roots of `det(self - λ r) = 0`, ascending.  Reduces by the
    /// Cholesky factor `r = L L*` so coincident roots stay accurate.
    pub fn relative_eigenvalues(&self, r: &Herm2) -> (f64, f64) {
        let l00 = r.bb.sqrt();
        let l10 = r.bf.conj() / l00;
        let l11 = (r.ff - l10.norm_sqr()).sqrt();
        // rows of L^{-1}: (1/l00, 0) and (a10, 1/l11)
        let a10 = -l10 / (l00 * l11);
        let a11 = 1.0 / l11;
        let reduced = Herm2 {
            bb: self.bb / (l00 * l00),
            ff: a10.norm_sqr() * self.bb + 2.0 * (a10 * self.bf * a11).re + a11 * a11 * self.ff,
            bf: (a10.conj() * self.bb + self.bf * a11) / l00,
        };
        reduced.eigenvalues()
    }

    /// `tr_r(self) = tr(r^{-1} self)`.
    pub fn trace_relative(&self, r: &Herm2) -> f64 {
        let ri = r.inverse();
        ri.bb * self.bb + ri.ff * self.ff + 2.0 * (ri.bf * self.bf.conj()).re
    }

    pub fn scale(&self, s: f64) -> Herm2 {
        Herm2 { bb: self.bb * s, ff: self.ff * s, bf: self.bf * s }
    }

    pub fn add(&self, o: &Herm2) -> Herm2 {
        Herm2 { bb: self.bb + o.bb, ff: self.ff + o.ff, bf: self.bf + o.bf }
    }

    pub fn max_abs_diff(&self, o: &Herm2) -> f64 {
        (self.bb - o.bb).abs().max((self.ff - o.ff).abs()).max((self.bf - o.bf).norm())
    }
}

/// Per-point Hermitian 2×2 field stored component-wise. The `fb` block is
/// implied as the conjugate of `bf`, so pointwise Hermiticity is structural.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianField {
    pub grid: ProductGrid,
    pub bb: Vec<f64>,
    pub ff: Vec<f64>,
    pub bf: Vec<Complex64>,
}

impl HermitianField {
    pub fn zeros(grid: ProductGrid) -> Self {
        let n = grid.len();
        Self { grid, bb: vec![0.0; n], ff: vec![0.0; n], bf: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn from_fn(grid: ProductGrid, f: impl Fn(usize) -> Herm2) -> Self {
        let mut out = Self::zeros(grid);
        for i in 0..grid.len() {
            out.set(i, f(i));
        }
        out
    }

    #[inline]
    pub fn at(&self, i: usize) -> Herm2 {
        Herm2 { bb: self.bb[i], ff: self.ff[i], bf: self.bf[i] }
    }

    #[inline]
    pub fn set(&mut self, i: usize, h: Herm2) {
        self.bb[i] = h.bb;
        self.ff[i] = h.ff;
        self.bf[i] = h.bf;
    }

    pub fn len(&self) -> usize {
        self.bb.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bb.is_empty()
    }

    /// Max entrywise distance (over all four blocks) between two fields.
    pub fn max_abs_diff(&self, other: &HermitianField) -> f64 {
        (0..self.len()).fold(0.0_f64, |m, i| m.max(self.at(i).max_abs_diff(&other.at(i))))
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        for i in 0..self.len() {
            if !(self.bb[i].is_finite() && self.ff[i].is_finite() && self.bf[i].re.is_finite() && self.bf[i].im.is_finite()) {
                return Err(Error::NonFiniteValue { what, index: i });
            }
        }
        Ok(())
    }

    /// Grid averages of the (bb, ff, bf) components.
    pub fn averages(&self) -> (f64, f64, Complex64) {
        use crate::discretization::stable_sum;
        let n = self.len() as f64;
        let re: Vec<f64> = self.bf.iter().map(|c| c.re).collect();
        let im: Vec<f64> = self.bf.iter().map(|c| c.im).collect();
        (
            stable_sum(&self.bb) / n,
            stable_sum(&self.ff) / n,
            Complex64::new(stable_sum(&re) / n, stable_sum(&im) / n),
        )
    }

    pub fn min_eigenvalue(&self) -> (usize, f64) {
        (0..self.len())
            .map(|i| (i, self.at(i).eigenvalues().0))
            .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
    }
}

/// Fiber block of a metric field along the fiber above one base point.
#[derive(Clone, Debug, PartialEq)]
pub struct FiberSlice {
    pub base: usize,
    pub nf: usize,
    pub values: Vec<f64>,
}

impl FiberSlice {
    pub fn is_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }
}

/// Extracts the ff block along the fiber above base point `base`.
pub fn restrict_to_fiber(g: &HermitianField, base: usize) -> FiberSlice {
    let range = g.grid.base_point_fiber_range(base);
    FiberSlice { base, nf: g.grid.nf, values: g.ff[range].to_vec() }
}
