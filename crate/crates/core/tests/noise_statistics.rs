//! Monte Carlo checks of the corruption processes.

use crbm::bits::BitVector;
use crbm::data::{corrupt_flip, corrupt_occlude};
use crbm::rng::seeded;

/// Upper `1 − alpha` quantile of χ²(df) by the Wilson–Hilferty approximation,
/// given the matching standard normal quantile `z`.
fn chi_square_critical(df: f64, z: f64) -> f64 {
    let a = 2.0 / (9.0 * df);
    df * (1.0 - a + z * a.sqrt()).powi(3)
}

const Z_999: f64 = 3.090_232;

#[test]
fn flip_positions_are_uniform() {
    const DRAWS: usize = 10_000;
    let v = BitVector::zeros(784);
    let mut rng = seeded(21);
    let mut counts = vec![0usize; 784];
    for _ in 0..DRAWS {
        let u = corrupt_flip(&v, 0.1, &mut rng).unwrap();
        for (c, x) in counts.iter_mut().zip(&u) {
            *c += usize::from(*x == 1.0);
        }
    }
    let p = 78.0 / 784.0;
    let sigma = (p * (1.0 - p) / DRAWS as f64).sqrt();
    let z: Vec<f64> = counts.iter().map(|&c| (c as f64 / DRAWS as f64 - p) / sigma).collect();
    // With 784 positions about two fall outside ±3σ by chance; many more,
    // or any far outlier, would indicate bias.
    let outside = z.iter().filter(|z| z.abs() > 3.0).count();
    assert!(outside <= 8, "{outside} positions outside 3σ");
    assert!(z.iter().all(|z| z.abs() < 4.5));
    let chi2: f64 = z.iter().map(|z| z * z).sum();
    assert!(chi2 < chi_square_critical(783.0, Z_999), "chi2 = {chi2}");
}

#[test]
fn occlusion_corners_are_uniform() {
    const DRAWS: usize = 100_000;
    let v = BitVector::ones(784);
    let mut rng = seeded(22);
    let mut counts = vec![0usize; 21 * 21];
    for _ in 0..DRAWS {
        let u = corrupt_occlude(&v, 8, 28, 28, &mut rng).unwrap();
        let first = u.iter().position(|&x| x == 0.0).unwrap();
        let (r, c) = (first / 28, first % 28);
        assert!(r <= 20 && c <= 20);
        counts[r * 21 + c] += 1;
    }
    let expected = DRAWS as f64 / 441.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < chi_square_critical(440.0, Z_999), "chi2 = {chi2}");
}
