//! Behaviour of p-value ranges when the evaluation input is exchangeable with
//! the background.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use subscan_core::{beat_tie_counts, priority, pvalue_range, PValueRange};

fn h0_range(rng: &mut ChaCha8Rng, b: usize, discrete: Option<u32>) -> PValueRange {
    let mut draw = || match discrete {
        Some(levels) => rng.random_range(0..levels) as f32,
        None => {
            let z: f64 = StandardNormal.sample(&mut *rng);
            z as f32
        }
    };
    let column: Vec<f32> = (0..b).map(|_| draw()).collect();
    let a = draw();
    let (n_beat, n_tie) = beat_tie_counts(&column, a, 0.0).unwrap();
    pvalue_range(n_beat, n_tie, b).unwrap()
}

#[test]
fn p_min_uniform_without_ties() {
    let b = 9;
    let draws = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut cells = vec![0usize; b + 1];
    for _ in 0..draws {
        let r = h0_range(&mut rng, b, None);
        let k = (r.p_min() * (b + 1) as f64).round() as usize;
        assert!((r.width() - 1.0 / (b + 1) as f64).abs() < 1e-15);
        cells[k] += 1;
    }
    let expected = draws as f64 / (b + 1) as f64;
    let chi2: f64 = cells
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // chi-square, 9 degrees of freedom, upper 0.1% point
    assert!(chi2 < 27.877, "chi2 = {chi2}, cells = {cells:?}");
}

fn mean_priority(alpha: f64, discrete: Option<u32>, seed: u64) -> (f64, f64) {
    let n = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let b = rng.random_range(3..30);
            priority(&h0_range(&mut rng, b, discrete), alpha)
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[test]
fn mean_priority_is_alpha() {
    for alpha in [0.05, 0.2, 0.5] {
        for (discrete, seed) in [(None, 1), (Some(4), 2)] {
            let (mean, se) = mean_priority(alpha, discrete, seed);
            assert!(
                (mean - alpha).abs() <= 3.0 * se,
                "alpha {alpha} discrete {discrete:?}: mean {mean} se {se}"
            );
        }
    }
}
