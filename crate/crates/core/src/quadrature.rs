//! Quadrature rules: Gauss-Legendre on intervals and direction grids on
//! `S^{n-1}` with a radial rule per ray.

use std::f64::consts::{PI, TAU};

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Gauss-Legendre rule on `[-1, 1]` with `degree` nodes, ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegendreRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LegendreRule {
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Nodes and weights mapped to `[0, len]`.
    pub fn mapped(&self, len: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (0.5 * len * (1.0 + x), 0.5 * len * w))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

pub fn gauss_legendre(degree: usize) -> LegendreRule {
    let rule = GaussLegendre::new(degree.max(2)).expect("degree >= 2");
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    LegendreRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridLayout {
    /// Uniform points `φ_i = 2πi/N` on the circle (trapezoid rule).
    Circle { count: usize },
    /// Gauss-Legendre in `z = cos ψ` times uniform azimuth; direction index
    /// is `polar * azimuthal + a`.
    LatLong { polar: usize, azimuthal: usize },
}

/// Directions and solid-angle weights on `S^{n-1}` plus the radial rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereGrid {
    pub n: usize,
    pub layout: GridLayout,
    pub directions: Vec<Vector>,
    pub weights: Vec<f64>,
    pub radial: LegendreRule,
}

/// Default resolutions: 512 circle points, 64×128 lat-long, 64 radial nodes.
pub const DEFAULT_CIRCLE: usize = 512;
pub const DEFAULT_POLAR: usize = 64;
pub const DEFAULT_AZIMUTHAL: usize = 128;
pub const DEFAULT_RADIAL: usize = 64;

impl SphereGrid {
    pub fn circle(count: usize, radial: usize) -> Result<Self> {
        if count < 4 {
            return Err(Error::InvalidArgument("circle grid needs at least 4 points".into()));
        }
        let directions = (0..count)
            .map(|i| {
                let a = TAU * i as f64 / count as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect();
        Ok(SphereGrid {
            n: 2,
            layout: GridLayout::Circle { count },
            directions,
            weights: vec![TAU / count as f64; count],
            radial: gauss_legendre(radial),
        })
    }

    pub fn lat_long(polar: usize, azimuthal: usize, radial: usize) -> Result<Self> {
        if polar < 2 || azimuthal < 4 {
            return Err(Error::InvalidArgument("lat-long grid too small".into()));
        }
        let z_rule = gauss_legendre(polar);
        let dphi = TAU / azimuthal as f64;
        let mut directions = Vec::with_capacity(polar * azimuthal);
        let mut weights = Vec::with_capacity(polar * azimuthal);
        for (z, wz) in z_rule.nodes.iter().zip(&z_rule.weights) {
            let s = (1.0 - z * z).sqrt();
            for a in 0..azimuthal {
                let phi = dphi * a as f64;
                directions.push([s * phi.cos(), s * phi.sin(), *z]);
                weights.push(wz * dphi);
            }
        }
        Ok(SphereGrid {
            n: 3,
            layout: GridLayout::LatLong { polar, azimuthal },
            directions,
            weights,
            radial: gauss_legendre(radial),
        })
    }

    /// Default grid for dimension `n`, with every resolution multiplied by `scale`.
    pub fn default_for(n: usize, scale: f64) -> Result<Self> {
        let s = |v: usize| ((v as f64 * scale).round() as usize).max(2);
        match n {
            2 => Self::circle(s(DEFAULT_CIRCLE).max(4), s(DEFAULT_RADIAL)),
            3 => Self::lat_long(s(DEFAULT_POLAR), s(DEFAULT_AZIMUTHAL).max(4), s(DEFAULT_RADIAL)),
            _ => Err(Error::InvalidArgument(format!("no sphere grid for n = {n}"))),
        }
    }

    /// Same layout at twice the angular resolution (radial rule unchanged).
    pub fn refined(&self) -> Result<Self> {
        match self.layout {
            GridLayout::Circle { count } => Self::circle(2 * count, self.radial.len()),
            GridLayout::LatLong { polar, azimuthal } => Self::lat_long(2 * polar, 2 * azimuthal, self.radial.len()),
        }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ w_i f(θ_i)` in index order.
    pub fn integrate(&self, values: impl Iterator<Item = f64>) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// `|S^{n-1}|` as the grid should reproduce it.
pub fn expected_total_weight(n: usize) -> f64 {
    match n {
        2 => TAU,
        _ => 4.0 * PI,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_exactness() {
        let r = gauss_legendre(8);
        assert!((r.integrate(0.0, 2.0, |x| x.powi(15)) - 2f64.powi(16) / 16.0).abs() < 1e-9);
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn weights_sum_to_sphere_area() {
        let c = SphereGrid::circle(512, 64).unwrap();
        assert!((c.total_weight() - TAU).abs() < 1e-10);
        let s = SphereGrid::lat_long(64, 128, 64).unwrap();
        assert!((s.total_weight() - 4.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn low_degree_harmonics_vanish() {
        let c = SphereGrid::circle(64, 8).unwrap();
        for m in 1..20 {
            let v = c.integrate(c.directions.iter().map(|d| (m as f64 * d[1].atan2(d[0])).cos()));
            assert!(v.abs() < 1e-10, "cos {m}θ");
        }
        let s = SphereGrid::lat_long(16, 32, 8).unwrap();
        // a few real harmonics of degree <= 4
        type Harmonic = Box<dyn Fn(&Vector) -> f64>;
        let harmonics: Vec<Harmonic> = vec![
            Box::new(|d| d[0]),
            Box::new(|d| d[2]),
            Box::new(|d| d[0] * d[1]),
            Box::new(|d| 3.0 * d[2] * d[2] - 1.0),
            Box::new(|d| d[0] * d[0] - d[1] * d[1]),
            Box::new(|d| d[2] * (5.0 * d[2] * d[2] - 3.0)),
            Box::new(|d| 35.0 * d[2].powi(4) - 30.0 * d[2] * d[2] + 3.0),
            Box::new(|d| d[0] * d[1] * (d[0] * d[0] - d[1] * d[1])),
        ];
        for h in harmonics {
            assert!(s.integrate(s.directions.iter().map(h)).abs() < 1e-10);
        }
    }

    #[test]
    fn directions_are_unit() {
        let s = SphereGrid::lat_long(8, 16, 4).unwrap();
        for d in &s.directions {
            assert!((d.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-14);
        }
    }
}
