use poseval_core::geometry::{random_rotation_with, rotation_angle, Rotation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// E[θ] under the Haar measure, where θ has density (1 − cos θ)/π on [0, π].
/// Composite Simpson's rule.
fn mean_angle_quadrature() -> f64 {
    let n = 10_000;
    let h = PI / n as f64;
    let f = |t: f64| t * (1.0 - t.cos()) / PI;
    let inner: f64 = (1..n)
        .map(|i| f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    (f(0.0) + f(PI) + inner) * h / 3.0
}

#[test]
fn quadrature_matches_closed_form() {
    assert!((mean_angle_quadrature() - (PI / 2.0 + 2.0 / PI)).abs() < 1e-10);
}

#[test]
fn uniform_rotations_have_the_haar_mean_angle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 200_000;
    let id = Rotation::identity();
    let mean = (0..n)
        .map(|_| rotation_angle(&id, &random_rotation_with(&mut rng)))
        .sum::<f64>()
        / n as f64;
    let expected = mean_angle_quadrature();
    assert!((mean - expected).abs() < 0.01, "{mean} vs {expected}");
}

#[test]
fn uniform_rotations_fill_angle_histogram() {
    // P(θ ≤ x) = (x − sin x)/π
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 100_000;
    let id = Rotation::identity();
    let angles: Vec<f64> = (0..n)
        .map(|_| rotation_angle(&id, &random_rotation_with(&mut rng)))
        .collect();
    for x in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
        let empirical = angles.iter().filter(|&&a| a <= x).count() as f64 / n as f64;
        let cdf = (x - f64::sin(x)) / PI;
        assert!((empirical - cdf).abs() < 0.01, "x={x}: {empirical} vs {cdf}");
    }
}
