//! Pointwise Kähler tensor algebra for `k = m + n = 2`.
//!
//! Index 0 is the base direction, 1 the fiber.  Arrays follow the index order
//! of the tensor they hold: `dg[k][i][j] = ∂_k g_{i j̄}`,
//! `psi[p][i][k] = Ψ^p_{ik}`, `ddbar[i][j][k][l] = ∂_k ∂_l̄ g_{i j̄}`,
//! `d2g[r][i][k][l] = ∂_r ∂_i g_{k l̄}`.  Norms are evaluated in a unitary
//! frame of `g`, so `|T|²_g` becomes a plain sum of squared moduli.

use num_complex::Complex64 as C;

use super::grid::Herm2;

pub type Tensor3 = [[[C; 2]; 2]; 2];
pub type Tensor4 = [[[[C; 2]; 2]; 2]; 2];

const ZERO: C = C { re: 0.0, im: 0.0 };
pub const ZERO3: Tensor3 = [[[ZERO; 2]; 2]; 2];
pub const ZERO4: Tensor4 = [[[[ZERO; 2]; 2]; 2]; 2];

/// Full 2×2 complex matrix of a Hermitian metric, `m[i][j] = g_{i j̄}`.
#[inline]
pub fn matrix(g: &Herm2) -> [[C; 2]; 2] {
    [[g.at(0, 0), g.at(0, 1)], [g.at(1, 0), g.at(1, 1)]]
}

#[inline]
fn inverse(m: &[[C; 2]; 2]) -> [[C; 2]; 2] {
    let d = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

/// Upper index pairing: returns `u[k][l] = g^{k l̄}` (so `Σ_l g_{i l̄} g^{k l̄} = δ_i^k`).
#[inline]
pub fn raised(g: &Herm2) -> [[C; 2]; 2] {
    let inv = inverse(&matrix(g));
    [[inv[0][0], inv[1][0]], [inv[0][1], inv[1][1]]]
}

/// Unitary frame of `g`: columns `a[·][α]` with `Σ a[i][α] conj(a[j][β]) g_{i j̄} = δ_{αβ}`,
/// and the inverse change of basis for upper indices.
pub struct Frame {
    pub a: [[C; 2]; 2],
    pub a_inv: [[C; 2]; 2],
}

impl Frame {
    pub fn new(g: &Herm2) -> Option<Frame> {
        // Cholesky of the transpose: gᵀ = L L^H, then a = (L^H)^{-1}
        let g00 = g.bb;
        if !(g00 > 0.0) {
            return None;
        }
        let l00 = g00.sqrt();
        let l10 = g.at(0, 1) / l00; // (gᵀ)[1][0] = g[0][1]
        let s = g.ff - l10.norm_sqr();
        if !(s > 0.0) {
            return None;
        }
        let l11 = s.sqrt();
        // L^H = [[l00, conj(l10)], [0, l11]]; invert the upper triangle
        let a = [[C::new(1.0 / l00, 0.0), -l10.conj() / (l00 * l11)], [ZERO, C::new(1.0 / l11, 0.0)]];
        let a_inv = inverse(&a);
        Some(Frame { a, a_inv })
    }

    #[inline]
    fn lower(&self, i: usize, alpha: usize) -> C {
        self.a[i][alpha]
    }

    #[inline]
    fn lower_bar(&self, j: usize, beta: usize) -> C {
        self.a[j][beta].conj()
    }

    #[inline]
    fn upper(&self, pi: usize, p: usize) -> C {
        self.a_inv[pi][p]
    }

    /// `|Ψ|²_g` for a (2,1)-tensor `t[p][i][k]` with one upper and two lower unbarred indices.
    pub fn norm_sq_upper_lower2(&self, t: &Tensor3) -> f64 {
        let mut s = 0.0;
        for pi in 0..2 {
            for al in 0..2 {
                for ga in 0..2 {
                    let mut v = ZERO;
                    for p in 0..2 {
                        for i in 0..2 {
                            for k in 0..2 {
                                v += self.upper(pi, p) * self.lower(i, al) * self.lower(k, ga) * t[p][i][k];
                            }
                        }
                    }
                    s += v.norm_sqr();
                }
            }
        }
        s
    }

    /// `|R|²_g` for a tensor with index pattern `(i, j̄, k, l̄)`.
    pub fn norm_sq_curvature(&self, r: &Tensor4) -> f64 {
        let t1 = transform_index(r, 0, |x, a| self.lower(x, a));
        let t2 = transform_index(&t1, 1, |x, a| self.lower_bar(x, a));
        let t3 = transform_index(&t2, 2, |x, a| self.lower(x, a));
        let t4 = transform_index(&t3, 3, |x, a| self.lower_bar(x, a));
        t4.iter().flatten().flatten().flatten().map(|c| c.norm_sqr()).sum()
    }

    /// `|T|²_g` for `t[r][p][i][k] = ∇̃_r Ψ^p_{ik}` (lower, upper, lower, lower).
    pub fn norm_sq_grad_psi(&self, t: &Tensor4) -> f64 {
        let t1 = transform_index(t, 0, |x, a| self.lower(x, a));
        let t2 = transform_index(&t1, 1, |x, a| self.upper(a, x));
        let t3 = transform_index(&t2, 2, |x, a| self.lower(x, a));
        let t4 = transform_index(&t3, 3, |x, a| self.lower(x, a));
        t4.iter().flatten().flatten().flatten().map(|c| c.norm_sqr()).sum()
    }
}

/// Contracts one slot of a rank-4 array with `w(old, new)`.
fn transform_index(t: &Tensor4, slot: usize, w: impl Fn(usize, usize) -> C) -> Tensor4 {
    let mut out = ZERO4;
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    let new = [a, b, c, d];
                    let mut v = ZERO;
                    for x in 0..2 {
                        let mut old = new;
                        old[slot] = x;
                        v += w(x, new[slot]) * t[old[0]][old[1]][old[2]][old[3]];
                    }
                    out[a][b][c][d] = v;
                }
            }
        }
    }
    out
}

/// Reference connection of `χ + ω_E`: only `Γ̃^b_{bb}` and its `∂_b` derivative survive.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReferenceConnection {
    pub gamma_bbb: C,
    pub d_gamma_bbb: C,
}

impl ReferenceConnection {
    /// From `χ`, `∂_b χ` and `∂_b ∂_b χ` at a base point.
    pub fn from_twist(chi: f64, d_chi: C, dd_chi: C) -> Self {
        let gamma = d_chi / chi;
        Self { gamma_bbb: gamma, d_gamma_bbb: dd_chi / chi - gamma * gamma }
    }

    #[inline]
    fn gamma(&self, p: usize, i: usize, k: usize) -> C {
        if p == 0 && i == 0 && k == 0 {
            self.gamma_bbb
        } else {
            ZERO
        }
    }
}

/// `Ψ^p_{ik} = Γ^p_{ik} − Γ̃^p_{ik}` with `Γ^p_{ik} = g^{p l̄} ∂_i g_{k l̄}`.
pub fn christoffel_deviation(g: &Herm2, dg: &Tensor3, reference: &ReferenceConnection) -> Tensor3 {
    let up = raised(g);
    let mut psi = ZERO3;
    for p in 0..2 {
        for i in 0..2 {
            for k in 0..2 {
                let mut v = ZERO;
                for l in 0..2 {
                    v += up[p][l] * dg[i][k][l];
                }
                psi[p][i][k] = v - reference.gamma(p, i, k);
            }
        }
    }
    psi
}

/// Curvature `R_{i j̄ k l̄} = −∂_k∂_l̄ g_{i j̄} + g^{p q̄} ∂_k g_{i q̄} ∂_l̄ g_{p j̄}`.
pub fn curvature(g: &Herm2, dg: &Tensor3, ddbar: &Tensor4) -> Tensor4 {
    let up = raised(g);
    let mut r = ZERO4;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let mut v = -ddbar[i][j][k][l];
                    for p in 0..2 {
                        for q in 0..2 {
                            // ∂_l̄ g_{p j̄} = conj(∂_l g_{j p̄})
                            v += up[p][q] * dg[k][i][q] * dg[l][j][p].conj();
                        }
                    }
                    r[i][j][k][l] = v;
                }
            }
        }
    }
    r
}

/// `∇̃_r Ψ^p_{ik}` stored as `out[r][p][i][k]`.
pub fn grad_christoffel_deviation(
    g: &Herm2,
    dg: &Tensor3,
    d2g: &Tensor4,
    psi: &Tensor3,
    reference: &ReferenceConnection,
) -> Tensor4 {
    let up = raised(g);
    let mut out = ZERO4;
    for r in 0..2 {
        // ∂_r g^{p l̄} = −g^{p b̄} ∂_r g_{a b̄} g^{a l̄}
        let mut d_up = [[ZERO; 2]; 2];
        for p in 0..2 {
            for l in 0..2 {
                let mut v = ZERO;
                for a in 0..2 {
                    for b in 0..2 {
                        v -= up[p][b] * dg[r][a][b] * up[a][l];
                    }
                }
                d_up[p][l] = v;
            }
        }
        for p in 0..2 {
            for i in 0..2 {
                for k in 0..2 {
                    let mut v = ZERO;
                    for l in 0..2 {
                        v += d_up[p][l] * dg[i][k][l] + up[p][l] * d2g[r][i][k][l];
                    }
                    if r == 0 && p == 0 && i == 0 && k == 0 {
                        v -= reference.d_gamma_bbb;
                    }
                    for a in 0..2 {
                        v -= reference.gamma(a, r, i) * psi[p][a][k];
                        v -= reference.gamma(a, r, k) * psi[p][i][a];
                        v += reference.gamma(p, r, a) * psi[a][i][k];
                    }
                    out[r][p][i][k] = v;
                }
            }
        }
    }
    out
}

/// `S = |Ψ|²_g`.
pub fn psi_norm_sq(g: &Herm2, psi: &Tensor3) -> Option<f64> {
    Frame::new(g).map(|f| f.norm_sq_upper_lower2(psi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric() -> Herm2 {
        Herm2 { bb: 1.7, ff: 0.6, bf: C::new(0.2, -0.3) }
    }

    #[test]
    fn frame_is_unitary_for_metric() {
        let g = metric();
        let f = Frame::new(&g).unwrap();
        for al in 0..2 {
            for be in 0..2 {
                let mut v = ZERO;
                for i in 0..2 {
                    for j in 0..2 {
                        v += f.a[i][al] * f.a[j][be].conj() * g.at(i, j);
                    }
                }
                let expect = if al == be { 1.0 } else { 0.0 };
                assert!((v - expect).norm() < 1e-14, "{al}{be}: {v}");
            }
        }
    }

    #[test]
    fn psi_norm_matches_index_contraction() {
        let g = metric();
        let up = raised(&g);
        let mut psi = ZERO3;
        let mut seed = 1.0;
        for p in 0..2 {
            for i in 0..2 {
                for k in i..2 {
                    seed = (seed * 7.3_f64).fract() + 0.1;
                    psi[p][i][k] = C::new(seed, 0.5 - seed);
                    psi[p][k][i] = psi[p][i][k];
                }
            }
        }
        // S = g^{i j̄} g^{k l̄} g_{p q̄} Ψ^p_{ik} conj(Ψ^q_{jl})
        let mut s = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        for p in 0..2 {
                            for q in 0..2 {
                                s += up[i][j] * up[k][l] * g.at(p, q) * psi[p][i][k] * psi[q][j][l].conj();
                            }
                        }
                    }
                }
            }
        }
        assert!(s.im.abs() < 1e-13);
        assert!((s.re - psi_norm_sq(&g, &psi).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn curvature_norm_matches_index_contraction() {
        let g = metric();
        let up = raised(&g);
        let mut r = ZERO4;
        let mut seed = 0.37;
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    for d in 0..2 {
                        seed = (seed * 9.1_f64).fract();
                        r[a][b][c][d] = C::new(seed - 0.5, 0.25 * seed);
                    }
                }
            }
        }
        // |R|² = R_{i j̄ k l̄} conj(R_{a b̄ c d̄}) g^{i ā} g^{b j̄} g^{k c̄} g^{d l̄}
        let mut s = ZERO;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        for a in 0..2 {
                            for b in 0..2 {
                                for c in 0..2 {
                                    for d in 0..2 {
                                        s += r[i][j][k][l] * r[a][b][c][d].conj() * up[i][a] * up[b][j] * up[k][c] * up[d][l];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        let f = Frame::new(&g).unwrap();
        let frame_value = f.norm_sq_curvature(&r);
        assert!(s.im.abs() < 1e-12);
        assert!((s.re - frame_value).abs() < 1e-10 * frame_value.max(1.0), "{} vs {}", s.re, frame_value);
    }

    #[test]
    fn flat_metric_has_no_curvature_or_deviation() {
        let g = Herm2::diag(1.0, 0.3);
        let psi = christoffel_deviation(&g, &ZERO3, &ReferenceConnection::default());
        assert_eq!(psi_norm_sq(&g, &psi).unwrap(), 0.0);
        let r = curvature(&g, &ZERO3, &ZERO4);
        assert_eq!(Frame::new(&g).unwrap().norm_sq_curvature(&r), 0.0);
    }

    #[test]
    fn frame_rejects_indefinite_metric() {
        assert!(Frame::new(&Herm2::diag(1.0, -0.1)).is_none());
    }
}
