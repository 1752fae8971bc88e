//! The manifold model `X = M × E`: base backends, the fixed forms, the
//! reference families and the volume form.
//!
//! Forms are stored as coefficient matrices `g_{i j̄}` with the `1/2π` of the
//! form convention absorbed, so `i∂∂̄` is the plain mixed complex Hessian.
//! The twisted-torus base carries `χ = λ + ∂∂̄F`, `F = ε cos(2πx_b)cos(2πy_b)`.

pub mod octagon;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::discretization::{stable_sum, Herm2, HermitianField, ProductGrid, ScalarField, Spectral};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseBackend {
    TorusSurrogate,
    BolzaOctagon,
}

impl BaseBackend {
    pub fn name(self) -> &'static str {
        match self {
            BaseBackend::TorusSurrogate => "torus_surrogate",
            BaseBackend::BolzaOctagon => "bolza_octagon",
        }
    }
}

impl FromStr for BaseBackend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "torus_surrogate" => Ok(BaseBackend::TorusSurrogate),
            "bolza_octagon" => Ok(BaseBackend::BolzaOctagon),
            other => Err(Error::config("base_backend", format!("unknown backend `{other}`"))),
        }
    }
}

/// One summand of the initial potential `ψ0`.
///
/// `Cos` is `a cos 2π(p x_b + q y_b + r s + k u)`, `Prod` is
/// `a cos 2π(p x_b + q y_b) · cos 2π(r s + k u)` and `Bump` is the radial
/// octagon bump `a exp(1 − 1/(1 − |z|²/R²))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PotentialTerm {
    Cos { a: f64, p: i32, q: i32, r: i32, k: i32 },
    Prod { a: f64, p: i32, q: i32, r: i32, k: i32 },
    Bump { a: f64, radius: f64 },
}

impl PotentialTerm {
    fn base_modes(&self) -> (i32, i32) {
        match *self {
            PotentialTerm::Cos { p, q, .. } | PotentialTerm::Prod { p, q, .. } => (p, q),
            PotentialTerm::Bump { .. } => (1, 1),
        }
    }

    fn fiber_modes(&self) -> (i32, i32) {
        match *self {
            PotentialTerm::Cos { r, k, .. } | PotentialTerm::Prod { r, k, .. } => (r, k),
            PotentialTerm::Bump { .. } => (0, 0),
        }
    }

    pub fn is_base_only(&self) -> bool {
        self.fiber_modes() == (0, 0)
    }

    pub fn is_fiber_only(&self) -> bool {
        self.base_modes() == (0, 0)
    }

    /// Value at torus coordinates `[x_b, y_b, s, u]`.
    pub fn eval_torus(&self, c: [f64; 4]) -> f64 {
        match *self {
            PotentialTerm::Cos { a, p, q, r, k } => {
                a * (2.0 * PI * (p as f64 * c[0] + q as f64 * c[1] + r as f64 * c[2] + k as f64 * c[3])).cos()
            }
            PotentialTerm::Prod { a, p, q, r, k } => {
                a * (2.0 * PI * (p as f64 * c[0] + q as f64 * c[1])).cos()
                    * (2.0 * PI * (r as f64 * c[2] + k as f64 * c[3])).cos()
            }
            PotentialTerm::Bump { .. } => 0.0,
        }
    }

    /// Bump value at a disk point.
    pub fn eval_disk(&self, z: Complex64) -> f64 {
        match *self {
            PotentialTerm::Bump { a, radius } => {
                let q = z.norm_sqr() / (radius * radius);
                if q < 1.0 {
                    a * (1.0 - 1.0 / (1.0 - q)).exp()
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }
}

impl fmt::Display for PotentialTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PotentialTerm::Cos { a, p, q, r, k } => write!(f, "cos({a}; {p},{q},{r},{k})"),
            PotentialTerm::Prod { a, p, q, r, k } => write!(f, "prod({a}; {p},{q},{r},{k})"),
            PotentialTerm::Bump { a, radius } => write!(f, "bump({a}; {radius})"),
        }
    }
}

/// `ψ0` as a finite sum of terms; the empty sum is `ψ0 ≡ 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InitialPotential {
    pub terms: Vec<PotentialTerm>,
}

impl InitialPotential {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(term: PotentialTerm) -> Self {
        Self { terms: vec![term] }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| match *t {
            PotentialTerm::Cos { a, .. } | PotentialTerm::Prod { a, .. } | PotentialTerm::Bump { a, .. } => a == 0.0,
        })
    }

    pub fn eval_torus(&self, c: [f64; 4]) -> f64 {
        self.terms.iter().map(|t| t.eval_torus(c)).sum()
    }

    /// `(base part, fiber part)` when every term depends on one factor only.
    /// Terms constant on both factors go to the base part.
    pub fn split(&self) -> Option<(InitialPotential, InitialPotential)> {
        let mut base = InitialPotential::zero();
        let mut fiber = InitialPotential::zero();
        for t in &self.terms {
            if t.is_base_only() {
                base.terms.push(*t);
            } else if t.is_fiber_only() {
                fiber.terms.push(*t);
            } else {
                return None;
            }
        }
        Some((base, fiber))
    }
}

impl fmt::Display for InitialPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.terms.iter().map(|t| t.to_string()).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl FromStr for InitialPotential {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = |m: String| Error::config("initial_potential", m);
        let text = text.trim();
        if text.is_empty() || text == "0" {
            return Ok(InitialPotential::zero());
        }
        let mut terms = Vec::new();
        for raw in text.split('+') {
            let raw = raw.trim();
            let open = raw.find('(').ok_or_else(|| bad(format!("expected `name(...)` in `{raw}`")))?;
            if !raw.ends_with(')') {
                return Err(bad(format!("missing `)` in `{raw}`")));
            }
            let name = raw[..open].trim();
            let inner = &raw[open + 1..raw.len() - 1];
            let (amp, rest) = inner.split_once(';').ok_or_else(|| bad(format!("expected `amplitude; ...` in `{raw}`")))?;
            let a: f64 = amp.trim().parse().map_err(|_| bad(format!("bad amplitude `{}`", amp.trim())))?;
            if !a.is_finite() {
                return Err(bad("amplitude must be finite".into()));
            }
            let term = match name {
                "cos" | "prod" => {
                    let ints: Vec<i32> = rest
                        .split(',')
                        .map(|v| v.trim().parse::<i32>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad(format!("bad mode numbers in `{raw}`")))?;
                    if ints.len() != 4 {
                        return Err(bad(format!("`{name}` takes four mode numbers")));
                    }
                    let (p, q, r, k) = (ints[0], ints[1], ints[2], ints[3]);
                    if name == "cos" {
                        PotentialTerm::Cos { a, p, q, r, k }
                    } else {
                        PotentialTerm::Prod { a, p, q, r, k }
                    }
                }
                "bump" => {
                    let radius: f64 = rest.trim().parse().map_err(|_| bad(format!("bad bump radius in `{raw}`")))?;
                    if !(radius > 0.0 && radius < 1.0) {
                        return Err(bad("bump radius must lie in (0, 1)".into()));
                    }
                    PotentialTerm::Bump { a, radius }
                }
                other => return Err(bad(format!("unknown term `{other}`"))),
            };
            terms.push(term);
        }
        Ok(InitialPotential { terms })
    }
}

/// Static description of `X` and its initial metric
/// `ω_0 = a0 χ + b0 ω_E + i∂∂̄ψ0`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometrySpec {
    pub base_backend: BaseBackend,
    pub m: usize,
    pub n: usize,
    pub fiber_modulus: Complex64,
    pub twist_amplitude: f64,
    pub twist_level: f64,
    pub base_grid: usize,
    pub fiber_grid: usize,
    pub initial_potential: InitialPotential,
    pub initial_base_scale: f64,
    pub initial_fiber_scale: f64,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self {
            base_backend: BaseBackend::TorusSurrogate,
            m: 1,
            n: 1,
            fiber_modulus: Complex64::new(0.0, 1.0),
            twist_amplitude: 0.01,
            twist_level: 1.0,
            base_grid: 32,
            fiber_grid: 32,
            initial_potential: InitialPotential::zero(),
            initial_base_scale: 1.0,
            initial_fiber_scale: 1.0,
        }
    }
}

fn check_grid_size(key: &str, n: usize) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(Error::config(key, format!("grid size {n} must be a power of two >= 8")));
    }
    Ok(())
}

impl GeometrySpec {
    /// Range checks that need no grid evaluation.
    pub fn validate(&self) -> Result<()> {
        if self.m != 1 || self.n != 1 {
            return Err(Error::config("m", "only m = n = 1 is supported"));
        }
        if !(self.fiber_modulus.im > 0.0) || !self.fiber_modulus.re.is_finite() {
            return Err(Error::config("fiber_modulus", "Im τ must be positive"));
        }
        if !(self.twist_amplitude >= 0.0) || !self.twist_amplitude.is_finite() {
            return Err(Error::config("twist_amplitude", "twist amplitude must be >= 0"));
        }
        if !(self.twist_level > 0.0) || !self.twist_level.is_finite() {
            return Err(Error::config("twist_level", "twist level must be > 0"));
        }
        if !(self.initial_base_scale > 0.0) || !self.initial_base_scale.is_finite() {
            return Err(Error::config("initial_base_scale", "must be > 0"));
        }
        if !(self.initial_fiber_scale > 0.0) || !self.initial_fiber_scale.is_finite() {
            return Err(Error::config("initial_fiber_scale", "must be > 0"));
        }
        check_grid_size("base_grid", self.base_grid)?;
        check_grid_size("fiber_grid", self.fiber_grid)?;
        match self.base_backend {
            BaseBackend::TorusSurrogate => {
                if self.initial_potential.terms.iter().any(|t| matches!(t, PotentialTerm::Bump { .. })) {
                    return Err(Error::config("initial_potential", "bump terms need the bolza_octagon backend"));
                }
            }
            BaseBackend::BolzaOctagon => {
                let ok = self.initial_potential.terms.iter().all(|t| match t {
                    PotentialTerm::Bump { .. } => true,
                    other => other.is_fiber_only(),
                });
                if !ok {
                    return Err(Error::config(
                        "initial_potential",
                        "the octagon backend takes base bumps plus fiber-only modes",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn torus_grid(&self) -> ProductGrid {
        ProductGrid::new(self.base_grid, self.fiber_grid, self.fiber_modulus)
    }
}

/// Potential `ρ`, flat fiber coefficients and their base-point layout.
#[derive(Clone, Debug)]
pub struct FlatFiberData {
    pub rho: ScalarField,
    /// `g_flat(z)` per base point.
    pub g_flat: Vec<f64>,
}

impl FlatFiberData {
    /// Weighted fiber mean `Σ ρ g0_ff / Σ g0_ff` above one base point.
    pub fn weighted_fiber_mean(&self, omega0: &HermitianField, base: usize) -> f64 {
        let r = self.rho.grid.base_point_fiber_range(base);
        let num: Vec<f64> = r.clone().map(|i| self.rho.values[i] * omega0.ff[i]).collect();
        stable_sum(&num) / stable_sum(&omega0.ff[r])
    }
}

/// Positive density of `Ω` relative to the coordinate volume element.
#[derive(Clone, Debug)]
pub struct VolumeDensity {
    pub grid: ProductGrid,
    pub values: Vec<f64>,
    pub total_integral: f64,
}

impl VolumeDensity {
    pub fn new(grid: ProductGrid, values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveDensity { index, value });
        }
        let cell = grid.cell_volume() / grid.len() as f64;
        let total_integral = stable_sum(&values) * cell;
        Ok(Self { grid, values, total_integral })
    }

    /// Same density multiplied by a constant (fault injection).
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(self.grid, self.values.iter().map(|v| v * s).collect())
    }

    /// Largest variation along any fiber.
    pub fn max_fiber_variation(&self) -> f64 {
        (0..self.grid.base_len())
            .map(|b| {
                let r = self.grid.base_point_fiber_range(b);
                let s = &self.values[r];
                let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max)
    }
}

/// Evaluated torus model: all fixed forms on the product grid.
#[derive(Debug)]
pub struct Geometry {
    pub spec: GeometrySpec,
    pub grid: ProductGrid,
    pub spectral: Spectral,
    /// Twist potential `F`.
    pub twist: ScalarField,
    /// `ψ0` sampled on the grid.
    pub psi0: ScalarField,
    /// `χ` as a field (only the bb entry is nonzero).
    pub chi: HermitianField,
    pub omega0: HermitianField,
    pub flat: FlatFiberData,
}

impl Geometry {
    pub fn new(spec: &GeometrySpec) -> Result<Self> {
        spec.validate()?;
        if spec.base_backend != BaseBackend::TorusSurrogate {
            return Err(Error::config("base_backend", "the torus model needs base_backend = torus_surrogate"));
        }
        Self::on_grid(spec, spec.torus_grid())
    }

    /// Builds the model on an arbitrary product grid (either plane may be a single point).
    pub fn on_grid(spec: &GeometrySpec, grid: ProductGrid) -> Result<Self> {
        let spectral = Spectral::new(grid);
        let eps = spec.twist_amplitude;
        let twist = ScalarField::from_fn(grid, |c| eps * (2.0 * PI * c[0]).cos() * (2.0 * PI * c[1]).cos());
        let psi0 = ScalarField::from_fn(grid, |c| spec.initial_potential.eval_torus(c));
        let h_twist = spectral.complex_hessian(&twist)?;
        let h_psi = spectral.complex_hessian(&psi0)?;

        let lambda = spec.twist_level;
        let mut chi = HermitianField::zeros(grid);
        chi.bb = h_twist.bb.par_iter().map(|f| lambda + f).collect();
        let (idx, min_chi) = chi.bb.iter().cloned().enumerate().fold((0, f64::INFINITY), |a, (i, v)| if v < a.1 { (i, v) } else { a });
        if !(min_chi > 0.0) {
            return Err(Error::SingularMetric { index: idx, min_eig: min_chi });
        }

        let (a0, b0) = (spec.initial_base_scale, spec.initial_fiber_scale);
        let mut omega0 = HermitianField::zeros(grid);
        omega0.bb = chi.bb.iter().zip(&h_psi.bb).map(|(c, h)| a0 * c + h).collect();
        omega0.ff = h_psi.ff.iter().map(|h| b0 + h).collect();
        omega0.bf = h_psi.bf.clone();
        omega0.check_finite("initial metric")?;
        if let Some((base, value)) = (0..grid.len()).map(|i| (i, omega0.ff[i])).find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::SingularFiberMetric { base: grid.split(base).0, value });
        }
        let (index, min_eig) = omega0.min_eigenvalue();
        if !(min_eig > 0.0) {
            return Err(Error::SingularMetric { index, min_eig });
        }

        let flat = flat_fiber_representative(&spectral, &omega0);
        Ok(Self { spec: spec.clone(), grid, spectral, twist, psi0, chi, omega0, flat })
    }

    /// `ω̂_t = e^{-t}ω_0 + (1 − e^{-t})χ`.
    pub fn reference_hat(&self, t: f64) -> HermitianField {
        let e = (-t).exp();
        let w = 1.0 - e;
        let mut out = HermitianField::zeros(self.grid);
        out.bb = self.omega0.bb.iter().zip(&self.chi.bb).map(|(o, c)| e * o + w * c).collect();
        out.ff = self.omega0.ff.iter().map(|o| e * o).collect();
        out.bf = self.omega0.bf.iter().map(|o| o * e).collect();
        out
    }

    /// `ω̃_t = χ + e^{-t}ω_E`.
    pub fn reference_tilde(&self, t: f64) -> HermitianField {
        let mut out = self.chi.clone();
        let e = (-t).exp();
        out.ff = vec![e; self.grid.len()];
        out
    }

    /// `Ω = b_m χ ∧ ω_flat`, i.e. density `2 χ g_flat`.
    pub fn volume_form(&self) -> Result<VolumeDensity> {
        let fl = self.grid.fiber_len();
        let values: Vec<f64> = (0..self.grid.len()).map(|i| 2.0 * self.chi.bb[i] * self.flat.g_flat[i / fl]).collect();
        VolumeDensity::new(self.grid, values)
    }

    /// `2 ∫ χ ∧ ω_0` by quadrature.
    pub fn class_integral(&self) -> f64 {
        let v: Vec<f64> = (0..self.grid.len())
            .map(|i| {
                let c = self.chi.at(i);
                let o = self.omega0.at(i);
                2.0 * (c.bb * o.ff + c.ff * o.bb - 2.0 * (c.bf.conj() * o.bf).re)
            })
            .collect();
        stable_sum(&v) * self.grid.cell_volume() / self.grid.len() as f64
    }

    /// Reference connection data `(χ, ∂_bχ, ∂_b∂_bχ)` per grid point.
    pub fn twist_derivatives(&self) -> (Vec<f64>, Vec<Complex64>, Vec<Complex64>) {
        use crate::discretization::Monomial;
        let hat = self.spectral.forward_real(&self.twist.values);
        let d1 = self.spectral.derivative(&hat, Monomial::new(2, 1, 0, 0));
        let d2 = self.spectral.derivative(&hat, Monomial::new(3, 1, 0, 0));
        (self.chi.bb.clone(), d1, d2)
    }

    pub fn initial_metric_at(&self, i: usize) -> Herm2 {
        self.omega0.at(i)
    }
}

/// Fiber-averaged flat coefficients and the potential `ρ` with zero
/// `g0_ff`-weighted fiber mean.
pub fn flat_fiber_representative(spectral: &Spectral, omega0: &HermitianField) -> FlatFiberData {
    let grid = *spectral.grid();
    let fl = grid.fiber_len();
    let g_flat: Vec<f64> = (0..grid.base_len())
        .map(|b| stable_sum(&omega0.ff[grid.base_point_fiber_range(b)]) / fl as f64)
        .collect();
    let rhs: Vec<f64> = (0..grid.len()).map(|i| g_flat[i / fl] - omega0.ff[i]).collect();
    let mut rho = spectral.fiber_poisson(&rhs);
    for b in 0..grid.base_len() {
        let r = grid.base_point_fiber_range(b);
        let num: Vec<f64> = r.clone().map(|i| rho[i] * omega0.ff[i]).collect();
        let mean = stable_sum(&num) / stable_sum(&omega0.ff[r.clone()]);
        for v in &mut rho[r] {
            *v -= mean;
        }
    }
    FlatFiberData { rho: ScalarField { grid, values: rho }, g_flat }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(potential: &str) -> GeometrySpec {
        GeometrySpec {
            base_grid: 8,
            fiber_grid: 8,
            initial_potential: potential.parse().unwrap(),
            ..GeometrySpec::default()
        }
    }

    #[test]
    fn potential_round_trips_through_text() {
        let p: InitialPotential = "cos(0.05; 1,0,1,0) + prod(0.02; 1,1,0,1)".parse().unwrap();
        assert_eq!(p.terms.len(), 2);
        let again: InitialPotential = p.to_string().parse().unwrap();
        assert_eq!(p, again);
        assert!("cos(0.1; 1,2)".parse::<InitialPotential>().is_err());
        assert!("sin(0.1; 1,2,3,4)".parse::<InitialPotential>().is_err());
    }

    #[test]
    fn split_detects_product_data() {
        let p: InitialPotential = "cos(0.1; 1,0,0,0) + cos(0.1; 0,0,1,1)".parse().unwrap();
        let (b, f) = p.split().unwrap();
        assert_eq!((b.terms.len(), f.terms.len()), (1, 1));
        let mixed: InitialPotential = "prod(0.1; 1,0,1,0)".parse().unwrap();
        assert!(mixed.split().is_none());
    }

    #[test]
    fn reference_hat_endpoints() {
        let g = Geometry::new(&small("cos(0.02; 1,0,0,1)")).unwrap();
        assert_eq!(g.reference_hat(0.0).max_abs_diff(&g.omega0), 0.0);
        let half = g.reference_hat(std::f64::consts::LN_2);
        for i in (0..g.grid.len()).step_by(37) {
            let want = g.omega0.at(i).scale(0.5).add(&g.chi.at(i).scale(0.5));
            assert!(half.at(i).max_abs_diff(&want) < 1e-15);
        }
    }

    #[test]
    fn flat_data_for_zero_potential() {
        let g = Geometry::new(&small("0")).unwrap();
        assert!(g.flat.rho.values.iter().all(|v| v.abs() < 1e-15));
        assert!(g.flat.g_flat.iter().all(|v| (v - 1.0).abs() < 1e-15));
        let omega = g.volume_form().unwrap();
        assert!(omega.max_fiber_variation() == 0.0);
    }

    #[test]
    fn unit_twistless_volume_is_two() {
        let spec = GeometrySpec { twist_amplitude: 0.0, ..small("0") };
        let omega = Geometry::new(&spec).unwrap().volume_form().unwrap();
        assert!(omega.values.iter().all(|v| *v == 2.0));
    }

    #[test]
    fn rejects_non_positive_initial_metric() {
        let err = Geometry::new(&small("cos(1.0; 0,0,1,0)")).unwrap_err();
        assert!(matches!(err, Error::SingularFiberMetric { .. }), "{err}");
    }
}
