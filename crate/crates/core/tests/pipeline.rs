use std::f64::consts::PI;

use approx::assert_relative_eq;
use isoball_core::isoperimetry::{certify, ratio_report, verify_theorem, IsoConfig};
use isoball_core::linalg::Mat;
use isoball_core::metric::{MetricField, MetricSpec, TermSpec};
use isoball_core::Error;

fn conformal() -> MetricSpec {
    // u = 0.02x − 0.01y + 0.015(x² + y²) + 0.01xy
    MetricSpec::conformal2d(vec![TermSpec::poly(vec![0.0, 0.02, -0.01, 0.015, 0.01, 0.015])])
}

fn coarse() -> IsoConfig {
    IsoConfig {
        circle_points: Some(64),
        radial_nodes: Some(16),
        polar: Some(12),
        azimuthal: Some(24),
        step: 1.0 / 256.0,
        ..IsoConfig::default()
    }
}

#[test]
fn ratio_is_frame_independent() {
    let base = ratio_report(&MetricField::from_spec(conformal()).unwrap(), &coarse()).unwrap();
    let a = 0.7_f64;
    let q = Mat::from_rows(&[vec![a.cos(), -a.sin()], vec![a.sin(), a.cos()]]);
    let rotated = MetricField::from_spec(conformal().with_rotation(&q)).unwrap();
    let r = ratio_report(&rotated, &coarse()).unwrap();
    assert_relative_eq!(r.ratio, base.ratio, max_relative = 1e-10);
    assert_relative_eq!(r.volume, base.volume, max_relative = 1e-10);
}

#[test]
fn ratio_converges_under_refinement() {
    let field = MetricField::from_spec(conformal()).unwrap();
    let ratios: Vec<f64> = [0.25, 0.5, 1.0]
        .iter()
        .map(|&s| {
            let cfg = IsoConfig {
                grid_scale: s,
                ..IsoConfig::default()
            };
            ratio_report(&field, &cfg).unwrap().ratio
        })
        .collect();
    let (d1, d2) = ((ratios[1] - ratios[0]).abs(), (ratios[2] - ratios[1]).abs());
    assert!(d2 <= d1 + 1e-12, "{ratios:?}");
    assert!(d2 < 1e-9, "{ratios:?}");
}

#[test]
fn hyperbolic_ball_in_three_dimensions() {
    let r = verify_theorem(&MetricField::constant_curvature(3, -1.0).unwrap(), &coarse()).unwrap();
    let s = 1.0_f64.sinh();
    let volume = PI * ((2.0_f64).sinh() - 2.0);
    let area = 4.0 * PI * s * s;
    assert_relative_eq!(r.volume, volume, max_relative = 1e-8);
    assert_relative_eq!(r.perimeter, area, max_relative = 1e-8);
    assert_relative_eq!(r.ratio, area.powi(3) / volume.powi(2), max_relative = 1e-8);
    assert!(r.verdicts.all_pass(), "{:?}", r.verdicts);
}

#[test]
fn positively_curved_perturbation_is_rejected() {
    // g = (1 − 0.2|x|²) δ, a round-sphere-like bump
    let diag: Vec<f64> = (0..10)
        .map(|i| if [4, 7, 9].contains(&i) { -1.0 } else { 0.0 })
        .collect();
    let terms = (0..3).map(|i| TermSpec::poly(diag.clone()).at(i, i)).collect();
    let field = MetricField::from_spec(MetricSpec::perturbation(3, 0.0, 0.2, terms)).unwrap();
    let cert = certify(&field, &coarse());
    assert!(!cert.passed && cert.worst_value > 0.0);
    assert_eq!(cert.worst_point.len(), 3);
    assert!(matches!(
        verify_theorem(&field, &coarse()),
        Err(Error::CertificationFailed { .. })
    ));
}

#[test]
fn comparison_chain_for_a_perturbed_hyperbolic_ball() {
    // δ^{-1} + 0.05 (x y) e₁⊗e₂, certified against k = −0.5
    let spec = MetricSpec::perturbation(
        3,
        -1.0,
        0.05,
        vec![TermSpec::poly(vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).at(0, 1)],
    )
    .with_ceiling(-0.5);
    let r = verify_theorem(&MetricField::from_spec(spec).unwrap(), &coarse()).unwrap();
    assert!(r.verdicts.comparison && r.verdicts.rho_lower_bound, "{:?}", r.verdicts);
    assert!(r.ratio >= r.reference_ratio);
}
