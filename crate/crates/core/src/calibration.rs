//! Quadratic recalibration of ternary forecasts.
//!
//! The recalibrated forecast is
//!
//! ```text
//! pB~ = C1 + C2 pB + C3 pA + C4 pB^2 + C5 pB pA + C6 pA^2
//! pA~ = C7 + C8 pB + C9 pA + C10 pB^2 + C11 pB pA + C12 pA^2
//! pN~ = 1 - pB~ - pA~
//! ```
//!
//! Because the map is linear in the coefficients, the mean quadratic score
//! of the mapped forecasts is a quadratic function of `C` and its minimiser
//! is a linear least-squares solution. Mapped forecasts are not constrained
//! to the simplex while fitting.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{AffinePoint, ScoringRule};
use crate::simplex::TernaryProb;
use crate::verification::{bin_forecasts, decompose, mean_score, snap_to_lattice, Decomposition, ForecastObsPair};

pub const N_COEFFS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuadraticMap {
    coeffs: [f64; N_COEFFS],
}

impl TryFrom<Vec<f64>> for QuadraticMap {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        let coeffs: [f64; N_COEFFS] = v
            .as_slice()
            .try_into()
            .map_err(|_| Error::schema("coefficients", format!("expected {N_COEFFS} numbers, got {}", v.len())))?;
        QuadraticMap::new(coeffs)
    }
}

impl From<QuadraticMap> for Vec<f64> {
    fn from(m: QuadraticMap) -> Self {
        m.coeffs.to_vec()
    }
}

fn features(p: &TernaryProb) -> [f64; 6] {
    let (b, a) = (p.below(), p.above());
    [1.0, b, a, b * b, b * a, a * a]
}

impl QuadraticMap {
    pub fn new(coeffs: [f64; N_COEFFS]) -> Result<Self> {
        if let Some(&v) = coeffs.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "recalibration coefficient",
                value: v,
            });
        }
        Ok(QuadraticMap { coeffs })
    }

    pub fn identity() -> Self {
        let mut coeffs = [0.0; N_COEFFS];
        coeffs[1] = 1.0;
        coeffs[8] = 1.0;
        QuadraticMap { coeffs }
    }

    /// Coefficients in the order C1..C12.
    pub fn coeffs(&self) -> [f64; N_COEFFS] {
        self.coeffs
    }

    /// The mapped forecast before any clipping.
    pub fn map_affine(&self, p: &TernaryProb) -> AffinePoint {
        let f = features(p);
        let b: f64 = f.iter().zip(&self.coeffs[..6]).map(|(x, c)| x * c).sum();
        let a: f64 = f.iter().zip(&self.coeffs[6..]).map(|(x, c)| x * c).sum();
        AffinePoint::new([b, 1.0 - b - a, a])
    }
}

/// Applies the map; with `clip` the result is projected onto the simplex and
/// the flag reports whether the unclipped value was already there.
pub fn apply_map(map: &QuadraticMap, p: &TernaryProb, clip: bool) -> AffinePoint {
    let raw = map.map_affine(p);
    if clip && !raw.on_simplex {
        AffinePoint {
            p: project_to_simplex(raw.p),
            on_simplex: false,
        }
    } else {
        raw
    }
}

/// Euclidean projection of a 3-vector onto the probability simplex.
pub fn project_to_simplex(v: [f64; 3]) -> [f64; 3] {
    let mut u = v;
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    let mut out = v.map(|x| (x - theta).max(0.0));
    let s: f64 = out.iter().sum();
    for x in &mut out {
        *x /= s;
    }
    out
}

/// Mapped forecast as a simplex value, projecting when the map leaves it.
pub fn map_to_simplex(map: &QuadraticMap, p: &TernaryProb) -> TernaryProb {
    let mapped = map.map_affine(p);
    mapped
        .to_ternary()
        .unwrap_or_else(|| TernaryProb::from_parts_unchecked(project_to_simplex(mapped.p)))
}

/// Mean score of the unclipped mapped forecasts.
pub fn mapped_mean_score(map: &QuadraticMap, pairs: &[ForecastObsPair], rule: &ScoringRule) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let total: f64 = pairs
        .iter()
        .map(|pair| rule.score_vec(map.map_affine(&pair.forecast).p, pair.obs.to_ternary().as_array()))
        .sum();
    Ok(total / pairs.len() as f64)
}

/// Coefficients minimising the mean score of the mapped forecasts.
///
/// The stacked 3N x 12 residual system `L (J C + k)` is solved through a
/// singular value decomposition; rank-deficient problems (for example every
/// forecast identical) get the minimum-norm solution. The identity map is
/// in the family, so the result never scores worse than the input forecasts.
pub fn fit_map(pairs: &[ForecastObsPair], rule: &ScoringRule) -> Result<QuadraticMap> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let l = rule.l();
    let rows = 3 * pairs.len();
    let mut design = DMatrix::<f64>::zeros(rows, N_COEFFS);
    let mut rhs = DVector::<f64>::zeros(rows);

    for (k, pair) in pairs.iter().enumerate() {
        let f = features(&pair.forecast);
        // d(p~ - o)/dC, one row per category.
        let mut jac = [[0.0; N_COEFFS]; 3];
        for i in 0..6 {
            jac[0][i] = f[i];
            jac[1][i] = -f[i];
            jac[1][i + 6] = -f[i];
            jac[2][i + 6] = f[i];
        }
        let o = pair.obs.to_ternary().as_array();
        let constant = [-o[0], 1.0 - o[1], -o[2]];
        for (r, l_row) in l.iter().enumerate() {
            let row = 3 * k + r;
            for c in 0..N_COEFFS {
                design[(row, c)] = (0..3).map(|m| l_row[m] * jac[m][c]).sum();
            }
            rhs[row] = -l_row.iter().zip(&constant).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * rows.max(N_COEFFS) as f64;
    let solution = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::InvalidConfig(format!("least-squares solve failed: {e}")))?;

    let mut coeffs = [0.0; N_COEFFS];
    coeffs.copy_from_slice(solution.as_slice());
    let fitted = QuadraticMap::new(coeffs)?;

    let identity = QuadraticMap::identity();
    if mapped_mean_score(&identity, pairs, rule)? < mapped_mean_score(&fitted, pairs, rule)? {
        return Ok(identity);
    }
    Ok(fitted)
}

/// Number of forecasts per lattice bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpnessCell {
    pub lattice: [u32; 3],
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub before: Decomposition,
    pub after: Decomposition,
    /// Unbinned mean scores; `after_mean_score` uses unclipped values unless
    /// the report was built with clipping.
    pub before_mean_score: f64,
    pub after_mean_score: f64,
    /// Recalibrated forecasts that left the simplex.
    pub simplex_exits: usize,
    pub sharpness_before: Vec<SharpnessCell>,
    /// The original sharpness histogram pushed through the map.
    pub sharpness_after: Vec<SharpnessCell>,
}

/// Forecast pairs after recalibration. Off-simplex values are projected so
/// they can be binned; `clip` only changes whether the unbinned score uses
/// the projected values.
pub fn recalibrate_pairs(map: &QuadraticMap, pairs: &[ForecastObsPair]) -> Vec<ForecastObsPair> {
    pairs
        .iter()
        .map(|pair| ForecastObsPair::new(map_to_simplex(map, &pair.forecast), pair.obs))
        .collect()
}

pub fn recalibration_report(
    pairs: &[ForecastObsPair],
    map: &QuadraticMap,
    rule: &ScoringRule,
    nbins: u32,
    clip: bool,
) -> Result<CalibrationReport> {
    let before_binned = bin_forecasts(pairs, nbins)?;
    let before = decompose(rule, &before_binned)?;
    let mapped = recalibrate_pairs(map, pairs);
    let after = decompose(rule, &bin_forecasts(&mapped, nbins)?)?;

    let simplex_exits = pairs
        .iter()
        .filter(|pair| !map.map_affine(&pair.forecast).on_simplex)
        .count();
    let after_mean_score = if clip {
        mean_score(rule, &mapped)?
    } else {
        mapped_mean_score(map, pairs, rule)?
    };

    let sharpness_before: Vec<SharpnessCell> = before_binned
        .bins
        .iter()
        .map(|b| SharpnessCell {
            lattice: b.lattice,
            count: b.count,
        })
        .collect();
    let mut pushed: BTreeMap<[u32; 3], usize> = BTreeMap::new();
    for bin in &before_binned.bins {
        let image = map_to_simplex(map, &bin.center(nbins));
        *pushed.entry(snap_to_lattice(&image, nbins)).or_default() += bin.count;
    }
    let sharpness_after = pushed
        .into_iter()
        .map(|(lattice, count)| SharpnessCell { lattice, count })
        .collect();

    Ok(CalibrationReport {
        before,
        after,
        before_mean_score: mean_score(rule, pairs)?,
        after_mean_score,
        simplex_exits,
        sharpness_before,
        sharpness_after,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::ObsCategory;

    fn tp(b: f64, n: f64, a: f64) -> TernaryProb {
        TernaryProb::new(b, n, a).unwrap()
    }

    fn sample_pairs() -> Vec<ForecastObsPair> {
        let mut out = Vec::new();
        let obs = [ObsCategory::Below, ObsCategory::Near, ObsCategory::Above];
        for i in 0..=10u32 {
            for j in 0..=(10 - i) {
                let p = tp(i as f64 / 10.0, j as f64 / 10.0, (10 - i - j) as f64 / 10.0);
                out.push(ForecastObsPair::new(p, obs[((i * 7 + j * 3) % 3) as usize]));
            }
        }
        out
    }

    #[test]
    fn identity_map_is_exact() {
        let m = QuadraticMap::identity();
        for p in [tp(0.2, 0.3, 0.5), tp(1.0, 0.0, 0.0), TernaryProb::uniform()] {
            let out = apply_map(&m, &p, false);
            assert!(out.on_simplex);
            assert_eq!(out.p[0], p.below());
            assert_eq!(out.p[2], p.above());
            assert!((out.p[1] - p.near()).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_corner_map() {
        let mut c = [0.0; 12];
        c[0] = 1.0;
        let m = QuadraticMap::new(c).unwrap();
        for p in [tp(0.2, 0.3, 0.5), tp(0.0, 0.0, 1.0)] {
            assert_eq!(apply_map(&m, &p, false).p, [1.0, 0.0, 0.0]);
        }
    }

    #[test]
    fn shrinkage_map() {
        let mut c = [0.0; 12];
        c[0] = 1.0 / 6.0;
        c[1] = 0.5;
        c[6] = 1.0 / 6.0;
        c[8] = 0.5;
        let m = QuadraticMap::new(c).unwrap();
        let out = apply_map(&m, &tp(1.0, 0.0, 0.0), false);
        assert!((out.p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((out.p[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((out.p[2] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn clipping_projects() {
        let mut c = [0.0; 12];
        c[0] = 1.5;
        c[6] = -0.2;
        let m = QuadraticMap::new(c).unwrap();
        let raw = apply_map(&m, &TernaryProb::uniform(), false);
        assert!(!raw.on_simplex);
        let clipped = apply_map(&m, &TernaryProb::uniform(), true);
        assert!(TernaryProb::from_array(clipped.p).is_ok());
        assert_eq!(clipped.p, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn projection_is_nearest() {
        let v = [0.6, 0.6, -0.2];
        let p = project_to_simplex(v);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15 && p[2] == 0.0);
        assert_eq!(project_to_simplex([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5]);
    }

    #[test]
    fn json_roundtrip() {
        let m = QuadraticMap::identity();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, "[0.0,1.0,0.0,0.0,0.0,0.0,0.0,0.0,1.0,0.0,0.0,0.0]");
        let back: QuadraticMap = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<QuadraticMap>("[1,2,3]").is_err());
    }

    #[test]
    fn fit_single_pair_hits_observation() {
        let pairs = [ForecastObsPair::new(tp(0.5, 0.3, 0.2), ObsCategory::Above)];
        for rule in [ScoringRule::brier(), ScoringRule::rps()] {
            let m = fit_map(&pairs, &rule).unwrap();
            let out = m.map_affine(&pairs[0].forecast);
            for (got, want) in out.p.iter().zip([0.0, 0.0, 1.0]) {
                assert!((got - want).abs() < 1e-12);
            }
            assert!(mapped_mean_score(&m, &pairs, &rule).unwrap() < 1e-24);
        }
    }

    #[test]
    fn fit_never_worse_than_identity() {
        let pairs = sample_pairs();
        let rule = ScoringRule::brier();
        let m = fit_map(&pairs, &rule).unwrap();
        let fitted = mapped_mean_score(&m, &pairs, &rule).unwrap();
        let ident = mapped_mean_score(&QuadraticMap::identity(), &pairs, &rule).unwrap();
        assert!(fitted <= ident);
    }

    #[test]
    fn fit_rank_deficient() {
        let p = tp(0.2, 0.5, 0.3);
        let pairs: Vec<_> = [
            ObsCategory::Below,
            ObsCategory::Near,
            ObsCategory::Near,
            ObsCategory::Above,
        ]
        .iter()
        .map(|&o| ForecastObsPair::new(p, o))
        .collect();
        let m = fit_map(&pairs, &ScoringRule::brier()).unwrap();
        // Every forecast maps to the observed frequencies.
        let out = m.map_affine(&p);
        assert!((out.p[0] - 0.25).abs() < 1e-12);
        assert!((out.p[1] - 0.5).abs() < 1e-12);
        assert!((out.p[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn report_identity_unchanged() {
        let pairs = sample_pairs();
        let r = recalibration_report(&pairs, &QuadraticMap::identity(), &ScoringRule::brier(), 11, false).unwrap();
        assert_eq!(r.before, r.after);
        assert_eq!(r.before_mean_score, r.after_mean_score);
        assert_eq!(r.simplex_exits, 0);
        assert_eq!(r.sharpness_before, r.sharpness_after);
    }

    #[test]
    fn report_constant_corner() {
        let pairs = sample_pairs();
        let mut c = [0.0; 12];
        c[0] = 1.0;
        let m = QuadraticMap::new(c).unwrap();
        let r = recalibration_report(&pairs, &m, &ScoringRule::brier(), 11, false).unwrap();
        assert!(r.after.reliability > 0.0);
        assert_eq!(r.simplex_exits, 0);
        assert_eq!(r.sharpness_after.len(), 1);
        assert_eq!(r.sharpness_after[0].count, pairs.len());
    }

    #[test]
    fn empty_inputs() {
        assert!(matches!(fit_map(&[], &ScoringRule::brier()), Err(Error::EmptyDataset)));
    }
}
