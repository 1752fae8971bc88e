//! Grids, fields and the differential operators acting on them.

pub mod fd;
pub mod ghost;
pub mod grid;
pub mod spectral;
pub mod tensor;

pub use grid::{restrict_to_fiber, FiberSlice, Herm2, HermitianField, ProductGrid, ScalarField};
pub use spectral::{Monomial, Spectral};

const SUM_CHUNK: usize = 1024;

/// Order-independent sum: fixed-size chunks summed left to right, then the
/// partials summed pairwise.  The result depends only on the input order,
/// never on thread scheduling.
pub fn stable_sum(values: &[f64]) -> f64 {
    let mut partials: Vec<f64> = values.chunks(SUM_CHUNK).map(|c| c.iter().sum()).collect();
    while partials.len() > 1 {
        partials = partials.chunks(2).map(|p| p.iter().sum()).collect();
    }
    partials.first().copied().unwrap_or(0.0)
}

/// Largest element, NaN-propagating.
pub fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, |a, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_sum_matches_naive_on_small_input() {
        let v: Vec<f64> = (0..5000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((stable_sum(&v) - naive).abs() < 1e-10);
        assert_eq!(stable_sum(&[]), 0.0);
    }
}
