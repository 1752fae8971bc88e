//! Halo filling on the octagon chart and the finite-difference operators that read it.
//!
//! Ghost values are interpolated at their side-pairing images; an image's
//! stencil can itself touch ghost nodes, so the fill is a fixed-point sweep.

use num_complex::Complex64;

use super::fd::{FIRST, SECOND};
use crate::error::{Error, Result};
use crate::geometry::octagon::{NodeKind, OctagonChart};

/// Interior values plus filled ghost band, stored on the chart's full node box.
#[derive(Clone, Debug, PartialEq)]
pub struct HaloField {
    pub values: Vec<f64>,
}

const MAX_SWEEPS: usize = 200;

impl HaloField {
    pub fn interior(&self, chart: &OctagonChart) -> Vec<f64> {
        chart.interior.iter().map(|&n| self.values[n]).collect()
    }

    pub fn ghost_values(&self, chart: &OctagonChart) -> Vec<f64> {
        chart.ghosts.iter().map(|g| self.values[g.node]).collect()
    }
}

/// Fills the ghost band of an interior field.
pub fn ghost_exchange(interior: &[f64], chart: &OctagonChart) -> Result<HaloField> {
    assert_eq!(interior.len(), chart.len(), "field does not match chart");
    let mut values = vec![0.0; chart.dim * chart.dim];
    for (&n, &v) in chart.interior.iter().zip(interior) {
        values[n] = v;
    }
    let scale = interior.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    for _ in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        for g in &chart.ghosts {
            let v: f64 = g.sources.iter().zip(&g.weights).map(|(&s, &w)| w * values[s]).sum();
            change = change.max((v - values[g.node]).abs());
            values[g.node] = v;
        }
        if change <= 1e-15 * scale {
            break;
        }
    }
    if let Some(k) = chart.ghosts.iter().position(|g| !values[g.node].is_finite()) {
        return Err(Error::InterpolationOutOfDomain { ghost: k });
    }
    Ok(HaloField { values })
}

/// Re-fills the ghosts of an existing halo from its interior.
pub fn refresh(halo: &HaloField, chart: &OctagonChart) -> Result<HaloField> {
    ghost_exchange(&halo.interior(chart), chart)
}

fn axis_sum(halo: &HaloField, node: usize, stride: usize, w: &[f64; 5]) -> f64 {
    let mut acc = 0.0;
    for (k, &wk) in w.iter().enumerate() {
        if wk != 0.0 {
            let n = (node as isize + (k as isize - 2) * stride as isize) as usize;
            acc += wk * halo.values[n];
        }
    }
    acc
}

/// `∂∂̄u = ¼Δu` at the interior nodes, fourth order.
pub fn ddbar(halo: &HaloField, chart: &OctagonChart) -> Vec<f64> {
    let s = 1.0 / (12.0 * chart.h * chart.h);
    chart
        .interior
        .iter()
        .map(|&n| 0.25 * s * (axis_sum(halo, n, chart.dim, &SECOND) + axis_sum(halo, n, 1, &SECOND)))
        .collect()
}

/// `∂u = ½(∂_x − i∂_y)u` at the interior nodes, fourth order.
pub fn d(halo: &HaloField, chart: &OctagonChart) -> Vec<Complex64> {
    let s = 1.0 / (12.0 * chart.h);
    chart
        .interior
        .iter()
        .map(|&n| {
            let dx = s * axis_sum(halo, n, chart.dim, &FIRST);
            let dy = s * axis_sum(halo, n, 1, &FIRST);
            0.5 * Complex64::new(dx, -dy)
        })
        .collect()
}

/// Complex halo for a field of holomorphic weight `k` (a function for `k = 0`,
/// `∂u` for `k = 1`): ghost value `T'(z)^k` times the value at the image.
pub fn ghost_exchange_weighted(interior: &[Complex64], chart: &OctagonChart, weight: i32) -> Result<Vec<Complex64>> {
    assert_eq!(interior.len(), chart.len(), "field does not match chart");
    let zero = Complex64::new(0.0, 0.0);
    let mut values = vec![zero; chart.dim * chart.dim];
    for (&n, &v) in chart.interior.iter().zip(interior) {
        values[n] = v;
    }
    let factors: Vec<Complex64> =
        chart.ghosts.iter().map(|g| g.map.derivative(chart.node_point(g.node)).powi(weight)).collect();
    let scale = interior.iter().fold(0.0f64, |a, v| a.max(v.norm())).max(1e-300);
    for _ in 0..MAX_SWEEPS {
        let mut change = 0.0f64;
        for (g, f) in chart.ghosts.iter().zip(&factors) {
            let v: Complex64 = g.sources.iter().zip(&g.weights).map(|(&s, &w)| values[s] * w).sum::<Complex64>() * f;
            change = change.max((v - values[g.node]).norm());
            values[g.node] = v;
        }
        if change <= 1e-15 * scale {
            break;
        }
    }
    if let Some(k) = chart.ghosts.iter().position(|g| !values[g.node].is_finite()) {
        return Err(Error::InterpolationOutOfDomain { ghost: k });
    }
    Ok(values)
}

/// `∂f = ½(∂_x − i∂_y)f` of a complex halo at the interior nodes.
pub fn d_complex(values: &[Complex64], chart: &OctagonChart) -> Vec<Complex64> {
    let s = 1.0 / (12.0 * chart.h);
    let line = |n: usize, stride: usize| -> Complex64 {
        FIRST.iter().enumerate().filter(|(_, w)| **w != 0.0).map(|(k, &w)| values[n + k * stride - 2 * stride] * w).sum()
    };
    let i = Complex64::new(0.0, 1.0);
    chart.interior.iter().map(|&n| 0.5 * s * (line(n, chart.dim) - i * line(n, 1))).collect()
}

/// Checks that every offset the interior stencils touch is filled.
pub fn stencils_covered(chart: &OctagonChart) -> bool {
    chart.interior.iter().all(|&n| {
        [chart.dim as isize, 1].iter().all(|&st| {
            (-2..=2).all(|k| {
                let m = n as isize + k * st;
                m >= 0 && (m as usize) < chart.kind.len() && chart.kind[m as usize] != NodeKind::Outside
            })
        })
    })
}
