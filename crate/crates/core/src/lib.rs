//! Numerical engine for the local isoperimetric inequality on perturbed
//! nonpositively curved metric balls.
//!
//! The pipeline: a [`metric::MetricField`] on the unit ball is charted in
//! normal coordinates by shooting geodesics from the centre
//! ([`geodesic::radial_chart`]); the resulting star-shaped domain is
//! integrated on a [`quadrature::SphereGrid`] to get volume, perimeter and
//! the isoperimetric ratio, and compared against the constant-curvature
//! model ([`comparison::ComparisonModel`]) in [`isoperimetry`].

// NaN-rejecting `!(x > 0.0)` guards and index loops over small tensors are
// deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chart;
pub mod comparison;
pub mod error;
pub mod explorer;
pub mod geodesic;
pub mod isoperimetry;
pub mod lemma;
pub mod linalg;
pub mod metric;
pub mod quadrature;
pub mod report;

pub use error::{Error, Result};
