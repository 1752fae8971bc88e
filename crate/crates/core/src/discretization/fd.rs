//! Fourth-order central differences on the periodic product grid.

use num_complex::Complex64;
use rayon::prelude::*;

use super::grid::{HermitianField, ProductGrid, ScalarField};

/// Weights for offsets −2..=2 of the first derivative, to be divided by `12h`.
pub const FIRST: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
/// Weights for offsets −2..=2 of the second derivative, to be divided by `12h²`.
pub const SECOND: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];

fn strides(grid: &ProductGrid) -> [usize; 4] {
    let [nb, _, nf, _] = grid.dims();
    [nb * nf * nf, nf * nf, nf, 1]
}

/// Periodic derivative of order 1 or 2 along one grid axis, in that axis' unit coordinate.
pub fn axis_derivative(grid: &ProductGrid, values: &[f64], axis: usize, order: usize) -> Vec<f64> {
    let n = grid.dims()[axis];
    if n == 1 {
        return vec![0.0; values.len()];
    }
    let stride = strides(grid)[axis];
    let h = 1.0 / n as f64;
    let (w, scale) = match order {
        1 => (FIRST, 1.0 / (12.0 * h)),
        2 => (SECOND, 1.0 / (12.0 * h * h)),
        _ => panic!("unsupported derivative order {order}"),
    };
    (0..values.len())
        .into_par_iter()
        .map(|idx| {
            let pos = (idx / stride) % n;
            let base = idx - pos * stride;
            let mut acc = 0.0;
            for (k, &wk) in w.iter().enumerate() {
                if wk != 0.0 {
                    let p = (pos + n + k - 2) % n;
                    acc += wk * values[base + p * stride];
                }
            }
            acc * scale
        })
        .collect()
}

/// Finite-difference complex Hessian with the same conventions as the spectral one.
pub fn complex_hessian(phi: &ScalarField) -> HermitianField {
    let grid = phi.grid;
    let v = &phi.values;
    let d = |axis: usize, order: usize| axis_derivative(&grid, v, axis, order);
    let (xx, yy) = (d(0, 2), d(1, 2));
    let (ss, uu) = (d(2, 2), d(3, 2));
    let (x, y) = (d(0, 1), d(1, 1));
    let su = axis_derivative(&grid, &d(2, 1), 3, 1);
    let xs = axis_derivative(&grid, &x, 2, 1);
    let xu = axis_derivative(&grid, &x, 3, 1);
    let ys = axis_derivative(&grid, &y, 2, 1);
    let yu = axis_derivative(&grid, &y, 3, 1);

    let tau = grid.tau;
    let im2 = tau.im * tau.im;
    let denom = tau.conj() - tau;
    let i = Complex64::new(0.0, 1.0);
    let n = v.len();
    let mut out = HermitianField::zeros(grid);
    for k in 0..n {
        out.bb[k] = 0.25 * (xx[k] + yy[k]);
        out.ff[k] = (tau.norm_sqr() * ss[k] - 2.0 * tau.re * su[k] + uu[k]) / (4.0 * im2);
        // ∂_b ∂_w̄ = ½(∂_x − i∂_y)(∂_u − τ∂_s)/(τ̄ − τ)
        let dx_wbar = Complex64::new(xu[k], 0.0) - tau * xs[k];
        let dy_wbar = Complex64::new(yu[k], 0.0) - tau * ys[k];
        out.bf[k] = 0.5 * (dx_wbar - i * dy_wbar) / denom;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn second_derivative_of_cosine() {
        let grid = ProductGrid::square(1, 64);
        let f = ScalarField::from_fn(grid, |c| (2.0 * PI * c[3]).cos());
        let d = axis_derivative(&grid, &f.values, 3, 2);
        for (k, dv) in d.iter().enumerate() {
            let expect = -(2.0 * PI).powi(2) * (2.0 * PI * grid.coords(k)[3]).cos();
            assert!((dv - expect).abs() < 1e-3);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |n: usize| {
            let grid = ProductGrid::square(n, 1);
            let f = ScalarField::from_fn(grid, |c| (2.0 * PI * c[0]).sin() * (2.0 * PI * c[1]).cos());
            let h = complex_hessian(&f);
            h.bb.iter()
                .enumerate()
                .map(|(k, v)| (v - (-2.0 * PI * PI) * f.values[k]).abs())
                .fold(0.0, f64::max)
        };
        let order = (err(16) / err(32)).log2();
        assert!((order - 4.0).abs() < 0.2, "observed order {order}");
    }
}
