//! End-to-end behaviour of `evaluate` across the two calibration regimes:
//! with many observations per dimension the chi-square and Gaussian
//! benchmarks must agree on almost every decision, and both must see
//! through an obvious alternative.

mod common;

use common as oracle;
use hdsign::{
    derive_stream, evaluate, ks_distance, rayleigh, sample_rotsym, sample_uniform, AngularKind,
    Family, Probability, TestMeta,
};
use ndarray::Array1;

#[test]
fn regimes_agree_on_nearly_every_draw_when_n_dominates_p() {
    let n = 1000;
    let p = 4;
    let replicates = 2000;
    let alpha = Probability::new(0.05).unwrap();
    let mut agree = 0usize;
    let mut p_values = Vec::with_capacity(replicates);
    for r in 0..replicates {
        let stream = derive_stream(17, &[n as u64, p as u64, r as u64]);
        let sample = sample_uniform(&stream, n, p).unwrap();
        let pair = rayleigh(&sample);
        let outcome =
            evaluate(Family::Uniformity, pair, alpha, TestMeta::sample(n, p)).unwrap();
        if outcome.reject_universal == outcome.reject_fixed {
            agree += 1;
        }
        p_values.push(outcome.p_value_fixed.value());
    }
    let rate = agree as f64 / replicates as f64;
    assert!(rate >= 0.97, "regimes agreed on only {rate} of draws");

    // With p fixed at 4 the chi-square benchmark is the calibrated one;
    // its p-values should be close to uniform once n is this large.
    p_values.sort_unstable_by(f64::total_cmp);
    let ks = ks_distance(&p_values, |x| x.clamp(0.0, 1.0)).unwrap();
    assert!(
        ks.d < 0.045,
        "chi-square p-values stray from uniform: KS {}",
        ks.d
    );
}

#[test]
fn both_regimes_reject_a_concentrated_alternative() {
    let n = 100;
    let p = 10;
    let alpha = Probability::new(0.05).unwrap();
    let mut axis = Array1::zeros(p);
    axis[0] = 1.0;
    for r in 0..50u64 {
        let stream = derive_stream(18, &[r]);
        let kind = AngularKind::VonMisesFisher { kappa: 3.0 };
        let sample = sample_rotsym(&stream, n, p, kind, axis.view()).unwrap();
        let pair = rayleigh(&sample);
        let outcome =
            evaluate(Family::Uniformity, pair, alpha, TestMeta::sample(n, p)).unwrap();
        assert!(outcome.reject_universal, "draw {r} kept the null in the Gaussian regime");
        assert!(outcome.reject_fixed, "draw {r} kept the null in the chi-square regime");
        assert!(outcome.p_value_universal.value() < 1e-6);
    }
}

#[test]
fn fixed_p_p_values_match_quadrature_of_the_chi_square_tail() {
    let n = 60;
    let p = 7;
    let alpha = Probability::new(0.05).unwrap();
    for r in 0..20u64 {
        let stream = derive_stream(19, &[r]);
        let sample = sample_uniform(&stream, n, p).unwrap();
        let pair = rayleigh(&sample);
        let dof = pair.dof;
        let raw = pair.raw;
        let outcome =
            evaluate(Family::Uniformity, pair, alpha, TestMeta::sample(n, p)).unwrap();
        let reference = 1.0 - oracle::chi2_cdf_quadrature(raw.max(0.0), dof);
        assert!(
            (outcome.p_value_fixed.value() - reference).abs() < 1e-9,
            "draw {r}: p {} vs quadrature {reference}",
            outcome.p_value_fixed.value()
        );
    }
}
