//! Run configuration: one JSON document, every section optional.

use isoball_core::explorer::{ProbeFamily, SearchFamily};
use isoball_core::isoperimetry::IsoConfig;
use isoball_core::lemma::SuiteConfig;
use isoball_core::metric::{MetricSpec, TermSpec};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Field for `ratio`, `verify`, `chart`, `lambda`, `curvature`, `convexity`.
    pub metric: Option<MetricSpec>,
    pub iso: IsoConfig,
    pub convexity: ConvexityConfig,
    pub sweep: SweepConfig,
    pub probe: ProbeConfig,
    pub search: SearchConfig,
    pub lemma: SuiteConfig,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvexityConfig {
    /// Boundary sample count.
    pub points: usize,
}

impl Default for ConvexityConfig {
    fn default() -> Self {
        ConvexityConfig { points: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub k: f64,
    pub n: usize,
    pub radii: Vec<f64>,
    /// Recompute each ratio with the geodesic engine.
    pub engine_check: bool,
    pub tol_engine: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            k: -1.0,
            n: 2,
            radii: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            engine_check: false,
            tol_engine: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub family: ProbeFamily,
    pub scales: Vec<f64>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            // u = x + y/2 + x²/2 + y²/4
            family: ProbeFamily::ConformalAmplitude {
                terms: vec![TermSpec::poly(vec![0.0, 1.0, 0.5, 0.5, 0.0, 0.25])],
            },
            scales: (0..6).map(|j| 0.08 / f64::from(1 << j)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub family: SearchFamily,
    pub budget: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            family: SearchFamily::default(),
            budget: 200,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.iso.validate().map_err(|e| e.to_string())?;
        if !(self.sweep.tol_engine > 0.0) {
            return Err("sweep.tol_engine must be positive".into());
        }
        if !(self.search.family.tol_gap > 0.0) || !(self.search.family.box_size > 0.0) {
            return Err("search.family tolerances must be positive".into());
        }
        if self.convexity.points == 0 {
            return Err("convexity.points must be positive".into());
        }
        if self.probe.scales.is_empty() {
            return Err("probe.scales must be non-empty".into());
        }
        Ok(())
    }
}
