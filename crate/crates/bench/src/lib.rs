//! Synthetic workloads for the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ternary_core::dataset::{Dataset, ForecastRecord};
use ternary_core::{ForecastObsPair, ObsCategory, TernaryProb};

fn simplex_point(rng: &mut impl Rng) -> [f64; 3] {
    let e: [f64; 3] = std::array::from_fn(|_| -(1.0 - rng.gen::<f64>()).ln());
    let s: f64 = e.iter().sum();
    e.map(|x| x / s)
}

fn ternary(p: [f64; 3]) -> TernaryProb {
    TernaryProb::new(p[0], p[1], 1.0 - p[0] - p[1]).unwrap_or_else(|_| TernaryProb::uniform())
}

fn draw(rng: &mut impl Rng, p: &[f64; 3]) -> ObsCategory {
    let u: f64 = rng.gen();
    if u < p[0] {
        ObsCategory::Below
    } else if u < p[0] + p[1] {
        ObsCategory::Near
    } else {
        ObsCategory::Above
    }
}

/// Forecasts sharpened to `p^2`, observations drawn from `p`.
pub fn overconfident_pairs(n: usize, seed: u64) -> Vec<ForecastObsPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let truth = simplex_point(&mut rng);
            let sq = truth.map(|x| x * x);
            let s: f64 = sq.iter().sum();
            ForecastObsPair::new(ternary(sq.map(|x| x / s)), draw(&mut rng, &truth))
        })
        .collect()
}

/// A `nx` by `ny` grid of random forecasts, and a hindcast of `years`
/// seasons per location.
pub fn grid_datasets(nx: usize, ny: usize, years: usize, seed: u64) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut forecasts = Vec::with_capacity(nx * ny);
    let mut history = Vec::with_capacity(nx * ny * years);
    for iy in 0..ny {
        for ix in 0..nx {
            let (lat, lon) = (iy as f64, ix as f64);
            forecasts.push(ForecastRecord::ternary(
                lat,
                lon,
                ternary(simplex_point(&mut rng)),
                None,
            ));
            for _ in 0..years {
                let p = simplex_point(&mut rng);
                let obs = draw(&mut rng, &p);
                history.push(ForecastRecord::ternary(lat, lon, ternary(p), Some(obs)));
            }
        }
    }
    (Dataset::new(forecasts), Dataset::new(history))
}
