//! One-dimensional gradient (Perlin) noise on a periodic lattice.

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::rng::{stream, tags};

/// Quintic fade, zero first and second derivative at the lattice points.
#[inline]
fn fade(f: f64) -> f64 {
    f * f * f * (f * (f * 6.0 - 15.0) + 10.0)
}

/// Smooth, spatially correlated random field on the grid nodes.
///
/// Sums `octaves` layers of gradient noise; layer `k` uses frequency
/// `frequency * 2^k` and amplitude `0.5^k`. Each layer lives on a periodic
/// gradient lattice spanning the domain exactly, so `u(x_min) == u(x_max)`.
/// The result is normalized to `max |u| = 1`.
pub fn perlin_1d(grid: &Grid1D, octaves: u32, frequency: f64, seed: u64) -> Result<Vec<f64>> {
    if octaves < 1 {
        return Err(Error::CaseSpec("perlin octaves must be >= 1".into()));
    }
    if !(frequency > 0.0) {
        return Err(Error::CaseSpec("perlin frequency must be positive".into()));
    }
    let n = grid.n_x;
    let length = grid.x_max - grid.x_min;
    let mut u = vec![0.0; n];
    for k in 0..octaves {
        let layer_freq = frequency * f64::powi(2.0, k as i32);
        // Integer cell count keeps the lattice periodic over the domain.
        let cells = (layer_freq.round() as usize).max(1);
        let mut rng = stream(seed, tags::PERLIN, k as u64);
        let grads: Vec<f64> = (0..cells).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let amplitude = f64::powi(0.5, k as i32);
        for (i, ui) in u.iter_mut().enumerate() {
            let x = grid.x(i);
            let s = (x - grid.x_min) / length * cells as f64;
            // The right endpoint lands on s == cells, which wraps to cell 0.
            let (cell, f) = if s >= cells as f64 {
                (0, 0.0)
            } else {
                let c = s.floor() as usize;
                (c, s - c as f64)
            };
            let g0 = grads[cell % cells];
            let g1 = grads[(cell + 1) % cells];
            let n0 = g0 * f;
            let n1 = g1 * (f - 1.0);
            let w = fade(f);
            *ui += amplitude * ((1.0 - w) * n0 + w * n1);
        }
    }
    // Both endpoints are the same physical point one period apart; copy to
    // kill floating-point jitter in the lattice coordinate.
    u[n - 1] = u[0];
    let max_abs = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs > 0.0 {
        for v in &mut u {
            *v /= max_abs;
        }
    }
    Ok(u)
}
