//! Ternary probability values and the projection of continuous or ensemble
//! forecasts onto the three ordered categories Below / Near / Above normal.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest deviation of the component sum from 1 that is silently renormalised.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Components this far below zero are treated as rounding noise and clamped.
pub const NEGATIVE_TOLERANCE: f64 = 1e-12;

/// A point on the 2-simplex: probabilities for categories B, N and A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTernary", into = "RawTernary")]
pub struct TernaryProb {
    p: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct RawTernary {
    #[serde(rename = "pB")]
    below: f64,
    #[serde(rename = "pN")]
    near: f64,
    #[serde(rename = "pA")]
    above: f64,
}

impl TryFrom<RawTernary> for TernaryProb {
    type Error = Error;

    fn try_from(raw: RawTernary) -> Result<Self> {
        TernaryProb::new(raw.below, raw.near, raw.above)
    }
}

impl From<TernaryProb> for RawTernary {
    fn from(t: TernaryProb) -> Self {
        RawTernary {
            below: t.p[0],
            near: t.p[1],
            above: t.p[2],
        }
    }
}

impl TernaryProb {
    /// Validates and, when the sum is within [`SUM_TOLERANCE`] of one,
    /// renormalises the triple.
    pub fn new(below: f64, near: f64, above: f64) -> Result<Self> {
        let mut p = [below, near, above];
        for (index, &v) in p.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "probability",
                    value: v,
                });
            }
            if v < -NEGATIVE_TOLERANCE {
                return Err(Error::NegativeProbability { index, value: v });
            }
        }
        for v in &mut p {
            *v = v.max(0.0);
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::NotNormalised { sum });
        }
        // Values already normalised to within rounding are kept bit-for-bit.
        if (sum - 1.0).abs() > 2.0 * f64::EPSILON {
            for v in &mut p {
                *v /= sum;
            }
        }
        Ok(TernaryProb { p })
    }

    pub fn from_array(p: [f64; 3]) -> Result<Self> {
        Self::new(p[0], p[1], p[2])
    }

    pub fn uniform() -> Self {
        TernaryProb { p: [1.0 / 3.0; 3] }
    }

    /// Exact construction from components known to be valid. Used for
    /// values that are simplex points by construction (lattice points,
    /// averages of corners).
    pub(crate) fn from_parts_unchecked(p: [f64; 3]) -> Self {
        debug_assert!(p.iter().all(|v| *v >= 0.0));
        debug_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        TernaryProb { p }
    }

    pub fn below(&self) -> f64 {
        self.p[0]
    }

    pub fn near(&self) -> f64 {
        self.p[1]
    }

    pub fn above(&self) -> f64 {
        self.p[2]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.p
    }

    pub fn min_component(&self) -> f64 {
        self.p.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl fmt::Display for TernaryProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.p[0], self.p[1], self.p[2])
    }
}

/// Observed category of a ternary event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ObsCategory {
    #[serde(rename = "B")]
    Below,
    #[serde(rename = "N")]
    Near,
    #[serde(rename = "A")]
    Above,
}

impl ObsCategory {
    pub const ALL: [ObsCategory; 3] = [ObsCategory::Below, ObsCategory::Near, ObsCategory::Above];

    pub fn index(self) -> usize {
        match self {
            ObsCategory::Below => 0,
            ObsCategory::Near => 1,
            ObsCategory::Above => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// The corner of the simplex this observation corresponds to.
    pub fn to_ternary(self) -> TernaryProb {
        let mut p = [0.0; 3];
        p[self.index()] = 1.0;
        TernaryProb { p }
    }

    pub fn letter(self) -> char {
        match self {
            ObsCategory::Below => 'B',
            ObsCategory::Near => 'N',
            ObsCategory::Above => 'A',
        }
    }

    /// Case-insensitive single-letter parse.
    pub fn from_letter(s: &str) -> Option<Self> {
        match s.trim() {
            "B" | "b" => Some(ObsCategory::Below),
            "N" | "n" => Some(ObsCategory::Near),
            "A" | "a" => Some(ObsCategory::Above),
            _ => None,
        }
    }
}

/// Category boundaries of the physical variable: B = (-inf, xB], N = (xB, xA],
/// A = (xA, inf). A value exactly on a boundary falls in the lower category.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CategoryThresholds {
    below: f64,
    above: f64,
}

impl CategoryThresholds {
    pub fn new(below: f64, above: f64) -> Result<Self> {
        for v in [below, above] {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    what: "threshold",
                    value: v,
                });
            }
        }
        if below > above {
            return Err(Error::NonMonotoneCdf {
                at_below: below,
                at_above: above,
            });
        }
        Ok(CategoryThresholds { below, above })
    }

    pub fn below(&self) -> f64 {
        self.below
    }

    pub fn above(&self) -> f64 {
        self.above
    }

    pub fn categorise(&self, x: f64) -> ObsCategory {
        if x <= self.below {
            ObsCategory::Below
        } else if x <= self.above {
            ObsCategory::Near
        } else {
            ObsCategory::Above
        }
    }
}

/// Ternary value of a distribution from its CDF evaluated at the two
/// category thresholds.
pub fn ternary_from_cdf(at_below: f64, at_above: f64) -> Result<TernaryProb> {
    if at_below > at_above {
        return Err(Error::NonMonotoneCdf { at_below, at_above });
    }
    TernaryProb::new(at_below, at_above - at_below, 1.0 - at_above)
}

/// Linearly interpolated sample quantile: the value at fractional index
/// `c * (n - 1)` of the sorted sample.
pub fn sample_quantile(sorted: &[f64], c: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = c.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Category thresholds from a climatological sample at cumulative
/// probabilities `q_B` and `q_B + q_N`.
pub fn empirical_quantiles(series: &[f64], q: &TernaryProb) -> Result<CategoryThresholds> {
    if series.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: series.len(),
        });
    }
    if let Some(&v) = series.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "climatology series",
            value: v,
        });
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lower = sample_quantile(&sorted, q.below());
    let upper = sample_quantile(&sorted, q.below() + q.near());
    CategoryThresholds::new(lower, upper.max(lower))
}

/// Ternary forecast from ensemble members by counting members per category.
pub fn ensemble_to_ternary(members: &[f64], thresholds: &CategoryThresholds) -> Result<TernaryProb> {
    if members.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut counts = [0usize; 3];
    for &m in members {
        if !m.is_finite() {
            return Err(Error::NonFinite {
                what: "ensemble member",
                value: m,
            });
        }
        counts[thresholds.categorise(m).index()] += 1;
    }
    let n = members.len() as f64;
    let below = counts[0] as f64 / n;
    let above = counts[2] as f64 / n;
    let near = counts[1] as f64 / n;
    TernaryProb::new(below, near, above)
}
