//! Binned verification of ternary forecasts.
//!
//! Forecasts are snapped to the simplex lattice with denominator `nbins`
//! and every forecast in a bin is replaced by the bin centre. In that regime
//! the mean score splits exactly as `S = U - Z + R`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{BaryPoint, ScoringRule};
use crate::simplex::{ObsCategory, TernaryProb};

/// Bin resolution used for ternary reliability diagrams.
pub const DEFAULT_NBINS: u32 = 11;

/// A forecast together with the category that verified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastObsPair {
    pub forecast: TernaryProb,
    pub obs: ObsCategory,
}

impl ForecastObsPair {
    pub fn new(forecast: TernaryProb, obs: ObsCategory) -> Self {
        ForecastObsPair { forecast, obs }
    }
}

/// Nearest lattice point `(i, j, k) / nbins` with `i + j + k = nbins`, by
/// largest-remainder rounding. Ties go to the lower category index.
pub fn snap_to_lattice(p: &TernaryProb, nbins: u32) -> [u32; 3] {
    let n = nbins as f64;
    let mut scaled = p.as_array().map(|v| v * n);
    for v in &mut scaled {
        let r = v.round();
        if (*v - r).abs() < 1e-9 {
            *v = r;
        }
    }
    let mut floors = scaled.map(|v| v.floor().max(0.0) as u32);
    let assigned: u32 = floors.iter().sum();
    let missing = nbins.saturating_sub(assigned) as usize;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = scaled[a] - floors[a] as f64;
        let rb = scaled[b] - floors[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(missing) {
        floors[i] += 1;
    }
    floors
}

pub fn lattice_to_ternary(lattice: [u32; 3], nbins: u32) -> TernaryProb {
    let n = nbins as f64;
    TernaryProb::from_parts_unchecked(lattice.map(|v| v as f64 / n))
}

/// One occupied bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lattice: [u32; 3],
    pub count: usize,
    /// Observed category frequencies, in B, N, A order.
    pub obs_counts: [usize; 3],
}

impl Bin {
    pub fn center(&self, nbins: u32) -> TernaryProb {
        lattice_to_ternary(self.lattice, nbins)
    }

    /// Mean observation conditional on this bin.
    pub fn mean_obs(&self) -> TernaryProb {
        let n = self.count as f64;
        TernaryProb::from_parts_unchecked(self.obs_counts.map(|c| c as f64 / n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedStats {
    pub nbins: u32,
    /// Occupied bins in lexicographic lattice order.
    pub bins: Vec<Bin>,
}

impl BinnedStats {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    pub fn get(&self, lattice: [u32; 3]) -> Option<&Bin> {
        self.bins
            .binary_search_by(|b| b.lattice.cmp(&lattice))
            .ok()
            .map(|i| &self.bins[i])
    }
}

pub fn bin_forecasts(pairs: &[ForecastObsPair], nbins: u32) -> Result<BinnedStats> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if nbins == 0 {
        return Err(Error::InvalidConfig("nbins must be at least 1".into()));
    }
    let mut map: BTreeMap<[u32; 3], (usize, [usize; 3])> = BTreeMap::new();
    for pair in pairs {
        let key = snap_to_lattice(&pair.forecast, nbins);
        let entry = map.entry(key).or_insert((0, [0; 3]));
        entry.0 += 1;
        entry.1[pair.obs.index()] += 1;
    }
    let bins = map
        .into_iter()
        .map(|(lattice, (count, obs_counts))| Bin {
            lattice,
            count,
            obs_counts,
        })
        .collect();
    Ok(BinnedStats { nbins, bins })
}

/// Mean score and its uncertainty / resolution / reliability parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub score: f64,
    pub uncertainty: f64,
    pub resolution: f64,
    pub reliability: f64,
    /// Mean observation, used as the climatology.
    pub q_bar: TernaryProb,
    pub n_pairs: usize,
    pub n_bins: usize,
}

impl Decomposition {
    /// Builds a decomposition from root values alone, with the score fixed
    /// by the identity. Used to draw diagrams from reported summary scores.
    pub fn from_roots(sqrt_u: f64, sqrt_z: f64, sqrt_r: f64) -> Result<Self> {
        let (u, z, r) = (sqrt_u * sqrt_u, sqrt_z * sqrt_z, sqrt_r * sqrt_r);
        if z > u {
            return Err(Error::InvalidDecomposition {
                uncertainty: u,
                resolution: z,
            });
        }
        Ok(Decomposition {
            score: u - z + r,
            uncertainty: u,
            resolution: z,
            reliability: r,
            q_bar: TernaryProb::uniform(),
            n_pairs: 0,
            n_bins: 0,
        })
    }

    pub fn sqrt_score(&self) -> f64 {
        self.score.sqrt()
    }

    pub fn sqrt_uncertainty(&self) -> f64 {
        self.uncertainty.sqrt()
    }

    pub fn sqrt_resolution(&self) -> f64 {
        self.resolution.sqrt()
    }

    pub fn sqrt_reliability(&self) -> f64 {
        self.reliability.sqrt()
    }

    /// `S - (U - Z + R)`.
    pub fn identity_residual(&self) -> f64 {
        self.score - (self.uncertainty - self.resolution + self.reliability)
    }
}

pub fn decompose(rule: &ScoringRule, binned: &BinnedStats) -> Result<Decomposition> {
    let n = binned.total();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let nf = n as f64;
    let corners = rule.corners();

    let mut totals = [0usize; 3];
    for bin in &binned.bins {
        for (t, c) in totals.iter_mut().zip(bin.obs_counts) {
            *t += c;
        }
    }
    let q_bar = TernaryProb::from_parts_unchecked(totals.map(|c| c as f64 / nf));
    let q_pt = rule.to_bary(&q_bar);

    let uncertainty = (0..3).map(|c| totals[c] as f64 * q_pt.dist2(&corners[c])).sum::<f64>() / nf;

    let mut score = 0.0;
    let mut resolution = 0.0;
    let mut reliability = 0.0;
    for bin in &binned.bins {
        let p_pt = rule.to_bary(&bin.center(binned.nbins));
        let o_pt: BaryPoint = rule.to_bary(&bin.mean_obs());
        let w = bin.count as f64;
        for (count, corner) in bin.obs_counts.iter().zip(&corners) {
            score += *count as f64 * p_pt.dist2(corner);
        }
        resolution += w * q_pt.dist2(&o_pt);
        reliability += w * p_pt.dist2(&o_pt);
    }

    Ok(Decomposition {
        score: score / nf,
        uncertainty,
        resolution: resolution / nf,
        reliability: reliability / nf,
        q_bar,
        n_pairs: n,
        n_bins: binned.bins.len(),
    })
}

/// Bins and decomposes in one step.
pub fn verify_pairs(rule: &ScoringRule, pairs: &[ForecastObsPair], nbins: u32) -> Result<Decomposition> {
    decompose(rule, &bin_forecasts(pairs, nbins)?)
}

/// Unbinned mean score of a set of pairs.
pub fn mean_score(rule: &ScoringRule, pairs: &[ForecastObsPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let s: f64 = pairs.iter().map(|p| rule.score(&p.forecast, &p.obs.to_ternary())).sum();
    Ok(s / pairs.len() as f64)
}

/// Relative root skill `(sqrt Z - sqrt R) / sqrt Z`. `None` when the
/// resolution is zero and the ratio is undefined; negative values mean the
/// forecasts did worse than climatology.
pub fn skill_radius(d: &Decomposition) -> Option<f64> {
    let sz = d.sqrt_resolution();
    if sz <= 0.0 {
        return None;
    }
    Some((sz - d.sqrt_reliability()) / sz)
}

/// Plotting primitives for the decomposition diagram, in root-score units.
///
/// The diameter `origin -> diameter_end` has length sqrt U. `apex` lies on
/// the semicircle so that `|origin apex| = sqrt(U - Z)` and
/// `|apex diameter_end| = sqrt Z`. `score_end` sits sqrt R from the apex
/// along the right angle, so `|origin score_end| = sqrt S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramGeometry {
    pub origin: BaryPoint,
    pub diameter_end: BaryPoint,
    pub apex: BaryPoint,
    pub score_end: BaryPoint,
    pub circle_center: BaryPoint,
    pub circle_radius: f64,
    /// Radius of the zero-resolution limit arc about the origin (sqrt U).
    pub limit_no_resolution: f64,
    /// Radius of the perfect-reliability limit arc about the origin (sqrt(U - Z)).
    pub limit_perfect_reliability: f64,
    pub sqrt_u: f64,
    pub sqrt_z: f64,
    pub sqrt_r: f64,
    pub sqrt_s: f64,
    pub sqrt_u_minus_z: f64,
}

pub fn decomposition_diagram_geometry(d: &Decomposition) -> Result<DiagramGeometry> {
    let (u, z, r) = (d.uncertainty, d.resolution, d.reliability);
    if z > u + 1e-12 || z < 0.0 || r < 0.0 {
        return Err(Error::InvalidDecomposition {
            uncertainty: u,
            resolution: z,
        });
    }
    let sqrt_u = u.sqrt();
    let sqrt_z = z.sqrt();
    let sqrt_r = r.sqrt();
    let sqrt_u_minus_z = (u - z).max(0.0).sqrt();

    // Angle at the origin between the diameter and the chord to the apex.
    let (cos_a, sin_a) = if sqrt_u > 0.0 {
        (sqrt_u_minus_z / sqrt_u, sqrt_z / sqrt_u)
    } else {
        (1.0, 0.0)
    };
    let apex = BaryPoint::new(sqrt_u_minus_z * cos_a, sqrt_u_minus_z * sin_a);
    let score_end = BaryPoint::new(apex.x + sqrt_r * sin_a, apex.y - sqrt_r * cos_a);
    let origin = BaryPoint::new(0.0, 0.0);

    Ok(DiagramGeometry {
        origin,
        diameter_end: BaryPoint::new(sqrt_u, 0.0),
        apex,
        score_end,
        circle_center: BaryPoint::new(sqrt_u / 2.0, 0.0),
        circle_radius: sqrt_u / 2.0,
        limit_no_resolution: sqrt_u,
        limit_perfect_reliability: sqrt_u_minus_z,
        sqrt_u,
        sqrt_z,
        sqrt_r,
        sqrt_s: origin.dist(&score_end),
        sqrt_u_minus_z,
    })
}
