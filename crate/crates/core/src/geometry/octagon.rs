//! Regular hyperbolic octagon in the Poincaré disk with its Bolza side pairings.
//!
//! Vertices sit at radius `2^{-1/4}`, angles `π/8 + kπ/4`.  Side `k` is the
//! arc of the circle orthogonal to the unit circle centred at `c e^{ikπ/4}`.
//! `T_k = R_k g R_k^{-1}` with `g` the hyperbolic translation along the real
//! axis maps side `k + 4` onto side `k`, and `T_{k+4} = T_k^{-1}`.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};

use num_complex::Complex64 as C;

use crate::error::{Error, Result};

/// Möbius map `z ↦ (az + b)/(cz + d)` with `ad − bc = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobius {
    pub a: C,
    pub b: C,
    pub c: C,
    pub d: C,
}

impl Mobius {
    #[inline]
    pub fn apply(&self, z: C) -> C {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// `dT/dz`.
    #[inline]
    pub fn derivative(&self, z: C) -> C {
        let den = self.c * z + self.d;
        C::new(1.0, 0.0) / (den * den)
    }

    pub fn inverse(&self) -> Mobius {
        Mobius { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn det(&self) -> C {
        self.a * self.d - self.b * self.c
    }

    pub fn compose(&self, o: &Mobius) -> Mobius {
        Mobius {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }
}

/// Side geometry of the regular octagon.
#[derive(Clone, Copy, Debug)]
pub struct OctagonShape {
    /// Distance of each side circle's centre from the origin.
    pub center_distance: f64,
    pub radius: f64,
    pub vertex_radius: f64,
}

impl OctagonShape {
    pub fn regular() -> Self {
        let m2 = SQRT_2 - 1.0;
        let m = m2.sqrt();
        Self { center_distance: (1.0 + m2) / (2.0 * m), radius: (1.0 - m2) / (2.0 * m), vertex_radius: 2f64.powf(-0.25) }
    }

    pub fn side_center(&self, k: usize) -> C {
        C::from_polar(self.center_distance, k as f64 * FRAC_PI_4)
    }

    pub fn vertex(&self, k: usize) -> C {
        C::from_polar(self.vertex_radius, FRAC_PI_8 + k as f64 * FRAC_PI_4)
    }

    /// Point on side `k` at parameter `s ∈ [0, 1]` from vertex `k − 1` to vertex `k`.
    pub fn side_point(&self, k: usize, s: f64) -> C {
        let c = self.side_center(k);
        let a0 = (self.vertex((k + 7) % 8) - c).arg();
        let mut a1 = (self.vertex(k) - c).arg();
        // take the short arc through the inside
        if (a1 - a0).abs() > std::f64::consts::PI {
            a1 += if a1 < a0 { 2.0 * std::f64::consts::PI } else { -2.0 * std::f64::consts::PI };
        }
        c + C::from_polar(self.radius, a0 + s * (a1 - a0))
    }

    /// Positive inside, scaled by the side radius; the minimum over sides.
    pub fn margin(&self, z: C) -> (f64, usize) {
        (0..8)
            .map(|k| (((z - self.side_center(k)).norm() - self.radius) / self.radius, k))
            .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
    }

    pub fn contains(&self, z: C) -> bool {
        z.norm() < 1.0 && self.margin(z).0 > 0.0
    }
}

/// The eight side pairings, `pairings[k]` mapping side `k + 4` onto side `k`.
pub fn side_pairings() -> [Mobius; 8] {
    let a = 1.0 + SQRT_2;
    let b = (2.0 + 2.0 * SQRT_2).sqrt();
    let g = Mobius { a: C::new(a, 0.0), b: C::new(b, 0.0), c: C::new(b, 0.0), d: C::new(a, 0.0) };
    let mut out = [g; 8];
    for (k, slot) in out.iter_mut().enumerate() {
        let r = C::from_polar(1.0, k as f64 * FRAC_PI_8);
        let rot = Mobius { a: r, b: C::new(0.0, 0.0), c: C::new(0.0, 0.0), d: r.conj() };
        *slot = rot.compose(&g).compose(&rot.inverse());
    }
    out
}

/// Hyperbolic density `2/(1 − |z|²)²`, normalised so that `Ric = −ω`.
pub fn hyperbolic_density(z: C) -> Result<f64> {
    let q = 1.0 - z.norm_sqr();
    if !(q > 0.0) {
        return Err(Error::OutOfDomain { re: z.re, im: z.im });
    }
    Ok(2.0 / (q * q))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior(usize),
    Ghost(usize),
    Outside,
}

/// Bicubic interpolation table for one ghost node.
#[derive(Clone, Debug)]
pub struct GhostStencil {
    pub node: usize,
    pub image: C,
    /// Composite pairing taking the ghost point to its image.
    pub map: Mobius,
    pub sources: [usize; 16],
    pub weights: [f64; 16],
}

/// Cartesian disk-coordinate grid covering the octagon, plus its ghost band.
#[derive(Clone, Debug)]
pub struct OctagonChart {
    pub shape: OctagonShape,
    pub pairings: [Mobius; 8],
    /// Grid spacing.
    pub h: f64,
    /// Nodes per axis; node `(i, j)` sits at `(i − half, j − half)·h`.
    pub dim: usize,
    pub half: usize,
    pub kind: Vec<NodeKind>,
    pub interior: Vec<usize>,
    pub ghosts: Vec<GhostStencil>,
}

/// Lagrange weights at nodes −1, 0, 1, 2 for a point at offset `t` from node 0.
fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

const STENCIL_REACH: isize = 2;
const BOX_PAD: usize = 12;
const MAX_FOLDS: usize = 16;

impl OctagonChart {
    /// Chart with `cells` grid intervals across the vertex diameter.
    pub fn new(cells: usize) -> Result<Self> {
        let shape = OctagonShape::regular();
        let pairings = side_pairings();
        let h = 2.0 * shape.vertex_radius / cells as f64;
        let half = cells / 2 + BOX_PAD;
        let dim = 2 * half + 1;
        let point = |i: usize, j: usize| C::new((i as f64 - half as f64) * h, (j as f64 - half as f64) * h);

        let mut kind = vec![NodeKind::Outside; dim * dim];
        let mut interior = Vec::new();
        for i in 0..dim {
            for j in 0..dim {
                if shape.contains(point(i, j)) {
                    kind[i * dim + j] = NodeKind::Interior(interior.len());
                    interior.push(i * dim + j);
                }
            }
        }
        // ghosts: every outside node an interior stencil reads, closed under
        // the interpolation stencils of their own images
        let mut chart = Self { shape, pairings, h, dim, half, kind, interior, ghosts: Vec::new() };
        let mut queue: Vec<usize> = Vec::new();
        let mark = |chart: &mut Self, node: usize, queue: &mut Vec<usize>| {
            if chart.kind[node] == NodeKind::Outside {
                chart.kind[node] = NodeKind::Ghost(queue.len());
                queue.push(node);
            }
        };
        for k in 0..chart.interior.len() {
            let n = chart.interior[k];
            let (i, j) = ((n / dim) as isize, (n % dim) as isize);
            for o in -STENCIL_REACH..=STENCIL_REACH {
                for (a, b) in [(i + o, j), (i, j + o)] {
                    if a < 0 || b < 0 || a as usize >= dim || b as usize >= dim {
                        return Err(Error::InterpolationOutOfDomain { ghost: queue.len() });
                    }
                    mark(&mut chart, a as usize * dim + b as usize, &mut queue);
                }
            }
        }
        let mut ghosts = Vec::new();
        let mut next = 0;
        while next < queue.len() {
            let node = queue[next];
            let z = chart.node_point(node);
            let (image, map) = chart.fold_map(z).ok_or(Error::InterpolationOutOfDomain { ghost: next })?;
            let sources = chart.stencil_nodes(image).ok_or(Error::InterpolationOutOfDomain { ghost: next })?;
            for s in sources {
                mark(&mut chart, s, &mut queue);
            }
            let (sources, weights) = chart.interpolation_stencil(image).ok_or(Error::InterpolationOutOfDomain { ghost: next })?;
            ghosts.push(GhostStencil { node, image, map, sources, weights });
            next += 1;
        }
        chart.ghosts = ghosts;
        Ok(chart)
    }

    pub fn node_point(&self, node: usize) -> C {
        let (i, j) = (node / self.dim, node % self.dim);
        C::new((i as f64 - self.half as f64) * self.h, (j as f64 - self.half as f64) * self.h)
    }

    pub fn interior_points(&self) -> Vec<C> {
        self.interior.iter().map(|&n| self.node_point(n)).collect()
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    /// Brings a point into the octagon by repeated side pairings.
    pub fn fold(&self, z: C) -> Option<C> {
        self.fold_map(z).map(|(w, _)| w)
    }

    /// Folded point and the composite map that produced it.
    pub fn fold_map(&self, mut z: C) -> Option<(C, Mobius)> {
        if !(z.norm() < 1.0) {
            return None;
        }
        let one = C::new(1.0, 0.0);
        let zero = C::new(0.0, 0.0);
        let mut map = Mobius { a: one, b: zero, c: zero, d: one };
        for _ in 0..MAX_FOLDS {
            let (margin, k) = self.shape.margin(z);
            if margin > 0.0 {
                return Some((z, map));
            }
            let p = self.pairings[(k + 4) % 8];
            z = p.apply(z);
            map = p.compose(&map);
        }
        None
    }

    /// Node ids of the 4×4 stencil around `z`, `None` if it leaves the node box.
    fn stencil_nodes(&self, z: C) -> Option<[usize; 16]> {
        let i0 = (z.re / self.h + self.half as f64).floor() as isize;
        let j0 = (z.im / self.h + self.half as f64).floor() as isize;
        let mut out = [0usize; 16];
        for a in 0..4 {
            for b in 0..4 {
                let (i, j) = (i0 + a as isize - 1, j0 + b as isize - 1);
                if i < 0 || j < 0 || i as usize >= self.dim || j as usize >= self.dim {
                    return None;
                }
                out[a * 4 + b] = i as usize * self.dim + j as usize;
            }
        }
        Some(out)
    }

    /// 4×4 Lagrange stencil around `z`; `None` if a node lies outside the padded set.
    pub fn interpolation_stencil(&self, z: C) -> Option<([usize; 16], [f64; 16])> {
        let fx = z.re / self.h + self.half as f64;
        let fy = z.im / self.h + self.half as f64;
        let (i0, j0) = (fx.floor(), fy.floor());
        let (wx, wy) = (cubic_weights(fx - i0), cubic_weights(fy - j0));
        let (i0, j0) = (i0 as isize, j0 as isize);
        let mut sources = [0usize; 16];
        let mut weights = [0.0; 16];
        for a in 0..4 {
            for b in 0..4 {
                let (i, j) = (i0 + a as isize - 1, j0 + b as isize - 1);
                if i < 0 || j < 0 || i as usize >= self.dim || j as usize >= self.dim {
                    return None;
                }
                let node = i as usize * self.dim + j as usize;
                if self.kind[node] == NodeKind::Outside {
                    return None;
                }
                sources[a * 4 + b] = node;
                weights[a * 4 + b] = wx[a] * wy[b];
            }
        }
        Some((sources, weights))
    }

    /// Hyperbolic density at every interior node.
    pub fn hyperbolic_base_metric(&self) -> Result<Vec<f64>> {
        self.interior.iter().map(|&n| hyperbolic_density(self.node_point(n))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vertices_lie_on_adjacent_sides() {
        let s = OctagonShape::regular();
        for k in 0..8 {
            let v = s.vertex(k);
            for side in [k, (k + 1) % 8] {
                let d = (v - s.side_center(side)).norm() - s.radius;
                assert!(d.abs() < 1e-12, "vertex {k} side {side}: {d}");
            }
        }
        // sides meet the unit circle orthogonally
        assert!((s.center_distance.powi(2) - 1.0 - s.radius.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn pairings_are_unimodular_and_inverse_in_pairs() {
        let p = side_pairings();
        for k in 0..8 {
            assert!((p[k].det() - 1.0).norm() < 1e-12);
            let id = p[k].compose(&p[(k + 4) % 8]);
            let z = C::new(0.1, -0.2);
            assert!((id.apply(z) - z).norm() < 1e-12);
        }
    }

    #[test]
    fn fold_returns_interior_points() {
        let chart = OctagonChart::new(16).unwrap();
        for g in &chart.ghosts {
            assert!(chart.shape.contains(g.image));
        }
        assert!(chart.hyperbolic_base_metric().unwrap().iter().all(|v| *v >= 2.0));
    }

    #[test]
    fn density_outside_disk_is_rejected() {
        assert!(matches!(hyperbolic_density(C::new(1.0, 0.0)), Err(Error::OutOfDomain { .. })));
        assert_eq!(hyperbolic_density(C::new(0.0, 0.0)).unwrap(), 2.0);
    }

    #[test]
    fn each_pairing_maps_its_side_onto_the_partner() {
        let s = OctagonShape::regular();
        let p = side_pairings();
        for k in 0..8 {
            for i in 0..=10 {
                let z = s.side_point((k + 4) % 8, i as f64 / 10.0);
                let w = p[k].apply(z);
                let d = ((w - s.side_center(k)).norm() - s.radius).abs();
                assert!(d < 1e-10, "side {k}: {d}");
            }
        }
    }

    #[test]
    fn density_is_invariant_under_pairings() {
        for t in side_pairings() {
            for z in [C::new(0.1, 0.3), C::new(-0.5, 0.2), C::new(0.0, -0.7)] {
                let w = t.apply(z);
                if w.norm() >= 0.99 {
                    continue;
                }
                let pull = hyperbolic_density(w).unwrap() * t.derivative(z).norm_sqr();
                let here = hyperbolic_density(z).unwrap();
                assert!((pull / here - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn density_has_curvature_minus_one() {
        // −∂∂̄ log g = −g with ∂∂̄ = ¼Δ, by central differences
        let h = 1e-3;
        for z in [C::new(0.2, 0.1), C::new(-0.4, 0.4)] {
            let l = |dz: C| hyperbolic_density(z + dz).unwrap().ln();
            let lap = (l(C::new(h, 0.0)) + l(C::new(-h, 0.0)) + l(C::new(0.0, h)) + l(C::new(0.0, -h)) - 4.0 * l(C::new(0.0, 0.0))) / (h * h);
            let ric = -0.25 * lap;
            assert!((ric / hyperbolic_density(z).unwrap() + 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn ghost_maps_land_on_images() {
        let chart = OctagonChart::new(24).unwrap();
        for g in &chart.ghosts {
            let z = chart.node_point(g.node);
            assert!((g.map.apply(z) - g.image).norm() < 1e-10);
        }
    }
}
