#![allow(dead_code)]

use std::path::PathBuf;

use argmin::core::{CostFunction, Executor};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ternary_core::calibration::{mapped_mean_score, QuadraticMap, N_COEFFS};
use ternary_core::dataset::{Dataset, ForecastRecord};
use ternary_core::{ForecastObsPair, ObsCategory, ScoringRule, TernaryProb};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn tp(b: f64, n: f64, a: f64) -> TernaryProb {
    TernaryProb::new(b, n, a).unwrap()
}

/// Uniform draw on the simplex.
pub fn random_simplex(rng: &mut impl Rng) -> TernaryProb {
    let e: [f64; 3] = std::array::from_fn(|_| -(1.0 - rng.gen::<f64>()).ln());
    let s: f64 = e.iter().sum();
    TernaryProb::new(e[0] / s, e[1] / s, 1.0 - e[0] / s - e[1] / s).unwrap_or_else(|_| TernaryProb::uniform())
}

pub fn sample_category(rng: &mut impl Rng, p: &TernaryProb) -> ObsCategory {
    let u: f64 = rng.gen();
    if u < p.below() {
        ObsCategory::Below
    } else if u < p.below() + p.near() {
        ObsCategory::Near
    } else {
        ObsCategory::Above
    }
}

/// A random positive-definite quadratic rule.
pub fn random_rule(rng: &mut impl Rng) -> ScoringRule {
    loop {
        let mut l = [[0.0; 3]; 3];
        for (i, row) in l.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = rng.gen_range(-1.0..1.0) + if i == j { 1.5 } else { 0.0 };
            }
        }
        if let Ok(rule) = ScoringRule::custom(l) {
            return rule;
        }
    }
}

/// Random forecasts with observations drawn from a forecast-dependent law
/// that is neither the forecast itself nor independent of it.
pub fn synthetic_pairs(rng: &mut impl Rng, n: usize) -> Vec<ForecastObsPair> {
    (0..n)
        .map(|_| {
            let p = random_simplex(rng);
            let [b, m, a] = p.as_array();
            let law = renormalise([0.6 * b + 0.2, 0.3 * m + 0.1, 0.8 * a * a + 0.2]);
            ForecastObsPair::new(p, sample_category(rng, &law))
        })
        .collect()
}

fn renormalise(v: [f64; 3]) -> TernaryProb {
    let s: f64 = v.iter().sum();
    tp(v[0] / s, v[1] / s, 1.0 - v[0] / s - v[1] / s)
}

/// Truth drawn on the simplex, issued forecast sharpened to p^2 (renormalised),
/// observation drawn from the truth.
pub fn overconfident_pairs(rng: &mut impl Rng, n: usize) -> Vec<ForecastObsPair> {
    (0..n)
        .map(|_| {
            let truth = random_simplex(rng);
            let issued = renormalise(truth.as_array().map(|x| x * x));
            ForecastObsPair::new(issued, sample_category(rng, &truth))
        })
        .collect()
}

struct MeanScore<'a> {
    pairs: &'a [ForecastObsPair],
    rule: &'a ScoringRule,
}

impl CostFunction for MeanScore<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, c: &Self::Param) -> Result<f64, argmin::core::Error> {
        let mut coeffs = [0.0; N_COEFFS];
        coeffs.copy_from_slice(c);
        let map = QuadraticMap::new(coeffs).map_err(|e| argmin::core::Error::msg(e.to_string()))?;
        Ok(mapped_mean_score(&map, self.pairs, self.rule)?)
    }
}

/// Best mean score found by Nelder-Mead over the 12 coefficients, restarted
/// `restarts` times from the incumbent with a shrinking initial simplex.
pub fn nelder_mead_best(pairs: &[ForecastObsPair], rule: &ScoringRule, restarts: usize) -> f64 {
    let mut best: Vec<f64> = QuadraticMap::identity().coeffs().to_vec();
    let mut best_cost = f64::INFINITY;
    let mut step = 0.5;
    for _ in 0..restarts {
        let mut simplex = vec![best.clone()];
        for i in 0..N_COEFFS {
            let mut v = best.clone();
            v[i] += step;
            simplex.push(v);
        }
        let solver = NelderMead::new(simplex).with_sd_tolerance(1e-15).unwrap();
        let problem = MeanScore { pairs, rule };
        let result = Executor::new(problem, solver)
            .configure(|state| state.max_iters(4000))
            .run()
            .unwrap();
        let state = result.state();
        if state.best_cost < best_cost {
            best_cost = state.best_cost;
            best = state.best_param.clone().unwrap();
        }
        step = (step * 0.5).max(1e-4);
    }
    best_cost
}

/// Fixed synthetic forecast map on a 12 x 8 grid with a 30-season hindcast
/// per location; skill varies from sharp and correct to uninformative.
pub fn frozen_map_data() -> (Dataset, Dataset) {
    let mut r = rng(20_240_611);
    let mut forecasts = Vec::new();
    let mut history = Vec::new();
    for iy in 0..8 {
        for ix in 0..12 {
            let lat = -30.0 + 2.5 * iy as f64;
            let lon = -70.0 + 2.5 * ix as f64;
            let skill = (ix as f64 + iy as f64) / 18.0;
            forecasts.push(ForecastRecord::ternary(lat, lon, random_simplex(&mut r), None));
            for _ in 0..30 {
                let truth = random_simplex(&mut r);
                let obs = sample_category(&mut r, &truth);
                let noise = random_simplex(&mut r);
                let o = obs.to_ternary().as_array();
                let mix: [f64; 3] = std::array::from_fn(|k| skill * o[k] + (1.0 - skill) * noise.as_array()[k]);
                history.push(ForecastRecord::ternary(lat, lon, renormalise(mix), Some(obs)));
            }
        }
    }
    (Dataset::new(forecasts), Dataset::new(history))
}

/// Fixed pooled hindcast for the reliability diagram.
pub fn frozen_reliability_pairs() -> Vec<ForecastObsPair> {
    overconfident_pairs(&mut rng(7_031_999), 3000)
}

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("golden")
        .join(name)
}

/// Compares against the stored golden file; `UPDATE_GOLDEN=1` rewrites it.
pub fn check_golden(name: &str, bytes: &[u8]) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, bytes).map_err(|e| format!("{}: {e}", path.display()))?;
        return Ok(());
    }
    let stored = std::fs::read(&path).map_err(|e| format!("{}: {e} (run with UPDATE_GOLDEN=1)", path.display()))?;
    if stored == bytes {
        Ok(())
    } else {
        Err(format!("{} differs from rendered output", path.display()))
    }
}

/// Parses SVG bytes and checks the root element declares a viewBox.
pub fn check_svg(bytes: &[u8]) -> Result<(), String> {
    let s = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    let doc = roxmltree::Document::parse(s).map_err(|e| e.to_string())?;
    let root = doc.root_element();
    if root.tag_name().name() != "svg" {
        return Err("root element is not svg".into());
    }
    if root.attribute("viewBox").is_none() {
        return Err("missing viewBox".into());
    }
    Ok(())
}

/// Number of dipole groups in a reliability diagram.
pub fn dipole_count(bytes: &[u8]) -> usize {
    let s = std::str::from_utf8(bytes).unwrap();
    let doc = roxmltree::Document::parse(s).unwrap();
    doc.descendants()
        .find(|n| n.attribute("id") == Some("dipoles"))
        .map(|g| g.children().filter(|c| c.is_element()).count())
        .unwrap_or(0)
}
