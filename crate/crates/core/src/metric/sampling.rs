//! Deterministic sample point sets for sampled certification and norms.

use crate::linalg::{Vector, MAX_DIM};

const HALTON_BASES: [u32; MAX_DIM] = [2, 3, 5];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// First `count` points of the Halton sequence mapped to `[-1, 1]^n` that
/// land in the closed unit ball.
pub fn halton_ball(n: usize, count: usize) -> Vec<Vector> {
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let mut p = [0.0; MAX_DIM];
        for (d, slot) in p.iter_mut().enumerate().take(n) {
            *slot = 2.0 * radical_inverse(i, HALTON_BASES[d]) - 1.0;
        }
        if (0..n).map(|d| p[d] * p[d]).sum::<f64>() <= 1.0 {
            out.push(p);
        }
        i += 1;
    }
    out
}

/// Roughly uniform points on the unit sphere `S^{n-1}`.
pub fn sphere_points(n: usize, count: usize) -> Vec<Vector> {
    match n {
        2 => (0..count)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / count as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect(),
        _ => {
            // Fibonacci lattice
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let s = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    [s * a.cos(), s * a.sin(), z]
                })
                .collect()
        }
    }
}

/// Interior Halton points together with boundary points: the default grid
/// for sampled sup-norms over the closed ball.
pub fn closed_ball_grid(n: usize, interior: usize, boundary: usize) -> Vec<Vector> {
    let mut pts = halton_ball(n, interior);
    pts.extend(sphere_points(n, boundary));
    pts
}
