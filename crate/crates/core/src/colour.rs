//! Continuous colour assignment for ternary forecasts.
//!
//! A forecast is located relative to the climatology by two coordinates:
//! the information gain `E` (a scaled Kullback-Leibler divergence, in
//! [0, 1]) and the dominant category `theta` (the clockwise angle around
//! the climatology in the equilateral triangle, starting from the ray that
//! points at corner B). Hue follows `theta` through a piecewise-linear
//! table and saturation is `E^m`, so the climatology itself is white.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::ScoringRule;
use crate::simplex::TernaryProb;

/// Hue anchors `(t, hue)`. Red at B, yellow at N, blue at A and purple
/// across the B-A base; green and cyan hues are squeezed into t in [0.48, 0.52].
pub const DEFAULT_HUE_ANCHORS: [(f64, f64); 7] = [
    (0.0, 0.0),
    (1.0 / 3.0, 1.0 / 6.0),
    (0.48, 0.26),
    (0.52, 0.55),
    (2.0 / 3.0, 2.0 / 3.0),
    (5.0 / 6.0, 0.82),
    (1.0, 1.0),
];

pub const DEFAULT_SATURATION_EXPONENT: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteParams {
    /// Saturation exponent `m`.
    pub m: f64,
    /// Palette rotation in radians.
    pub theta0: f64,
    pub hue_anchors: Vec<(f64, f64)>,
}

impl Default for PaletteParams {
    fn default() -> Self {
        PaletteParams {
            m: DEFAULT_SATURATION_EXPONENT,
            theta0: 0.0,
            hue_anchors: DEFAULT_HUE_ANCHORS.to_vec(),
        }
    }
}

impl PaletteParams {
    pub fn new(m: f64, theta0: f64, hue_anchors: Vec<(f64, f64)>) -> Result<Self> {
        let p = PaletteParams { m, theta0, hue_anchors };
        p.validate()?;
        Ok(p)
    }

    pub fn with_exponent(mut self, m: f64) -> Self {
        self.m = m;
        self
    }

    pub fn with_rotation(mut self, theta0: f64) -> Self {
        self.theta0 = theta0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(Error::InvalidPalette(format!(
                "exponent m = {} must be positive",
                self.m
            )));
        }
        if !self.theta0.is_finite() {
            return Err(Error::InvalidPalette("theta0 must be finite".into()));
        }
        let a = &self.hue_anchors;
        if a.len() < 2 {
            return Err(Error::InvalidPalette("need at least two hue anchors".into()));
        }
        if a[0].0 != 0.0 || a[a.len() - 1].0 != 1.0 {
            return Err(Error::InvalidPalette(
                "anchors must start at t = 0 and end at t = 1".into(),
            ));
        }
        if a.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidPalette(
                "anchor positions must be strictly increasing".into(),
            ));
        }
        if a.iter().any(|&(_, h)| !(0.0..=1.0).contains(&h)) {
            return Err(Error::InvalidPalette("anchor hues must lie in [0, 1]".into()));
        }
        let wrap = (a[a.len() - 1].1 - a[0].1).rem_euclid(1.0);
        if wrap > 1e-12 && (1.0 - wrap) > 1e-12 {
            return Err(Error::InvalidPalette(
                "hue at t = 1 must equal hue at t = 0 modulo 1".into(),
            ));
        }
        Ok(())
    }

    /// Hue for a normalised angle `t` in [0, 1].
    pub fn hue_at(&self, t: f64) -> f64 {
        let a = &self.hue_anchors;
        let t = t.clamp(0.0, 1.0);
        let i = a.partition_point(|&(at, _)| at <= t).clamp(1, a.len() - 1);
        let (t0, h0) = a[i - 1];
        let (t1, h1) = a[i];
        let h = h0 + (t - t0) / (t1 - t0) * (h1 - h0);
        let h = h.rem_euclid(1.0);
        if h >= 1.0 {
            0.0
        } else {
            h
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorHSV {
    pub hue: f64,
    pub saturation: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorRGB {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl ColorRGB {
    /// `#RRGGBB` with each channel rounded half-up from `255 * c`.
    pub fn to_hex(&self) -> String {
        let q = |c: f64| (255.0 * c.clamp(0.0, 1.0) + 0.5).floor() as u8;
        format!("#{:02x}{:02x}{:02x}", q(self.r), q(self.g), q(self.b))
    }
}

/// Information gain of `p` over `q`, scaled so the corner furthest from the
/// climatology scores 1.
pub fn information_gain(p: &TernaryProb, q: &TernaryProb) -> Result<f64> {
    let qa = q.as_array();
    if qa.iter().any(|&v| v <= 0.0) {
        return Err(Error::DegenerateClimatology(format!(
            "information gain needs a strictly positive climatology, got {q}"
        )));
    }
    let scale = (1.0 / q.min_component()).ln();
    let kl: f64 = p
        .as_array()
        .iter()
        .zip(qa.iter())
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum();
    Ok((kl / scale).clamp(0.0, 1.0))
}

/// Clockwise angle in [0, 2 pi) of `p` about `q` in the equilateral
/// triangle, measured from the ray towards corner B.
pub fn dominant_category(p: &TernaryProb, q: &TernaryProb) -> f64 {
    let rule = ScoringRule::brier();
    let pp = rule.to_bary(p);
    let qq = rule.to_bary(q);
    let b = rule.corners()[0];
    let (vx, vy) = (pp.x - qq.x, pp.y - qq.y);
    if (vx * vx + vy * vy).sqrt() <= 1e-12 {
        return 0.0;
    }
    let (rx, ry) = (b.x - qq.x, b.y - qq.y);
    let ccw = (rx * vy - ry * vx).atan2(rx * vx + ry * vy);
    let theta = (-ccw).rem_euclid(TAU);
    if theta >= TAU {
        0.0
    } else {
        theta
    }
}

pub fn assign_color(p: &TernaryProb, q: &TernaryProb, params: &PaletteParams) -> Result<ColorHSV> {
    let e = information_gain(p, q)?;
    let theta = dominant_category(p, q);
    let t = (theta - params.theta0).rem_euclid(TAU) / TAU;
    Ok(ColorHSV {
        hue: params.hue_at(t),
        saturation: e.powf(params.m),
        value: 1.0,
    })
}

/// Hexcone HSV to RGB conversion.
pub fn hsv_to_rgb(c: &ColorHSV) -> Result<ColorRGB> {
    for (channel, value) in [("hue", c.hue), ("saturation", c.saturation), ("value", c.value)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ChannelOutOfRange { channel, value });
        }
    }
    let v = c.value;
    let s = c.saturation;
    if s == 0.0 {
        return Ok(ColorRGB { r: v, g: v, b: v });
    }
    let h6 = c.hue * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match (sector as i64).rem_euclid(6) {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    Ok(ColorRGB { r, g, b })
}

/// `#RRGGBB` for a forecast under the given palette.
pub fn forecast_hex(p: &TernaryProb, q: &TernaryProb, params: &PaletteParams) -> Result<String> {
    Ok(hsv_to_rgb(&assign_color(p, q, params)?)?.to_hex())
}

/// Regions of the five-category "most likely tercile" colour scheme, plus
/// the forecasts none of its predicates cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LegacyRegion {
    Dry,
    DryOrNormal,
    Normal,
    WetOrNormal,
    Wet,
    Gap,
}

impl LegacyRegion {
    /// Predicates in scheme order; a forecast may satisfy at most one.
    pub fn matches(p: &TernaryProb) -> Vec<LegacyRegion> {
        const HI: f64 = 2.0 / 5.0;
        const MID: f64 = 1.0 / 3.0;
        let (b, n, a) = (p.below(), p.near(), p.above());
        let mut out = Vec::new();
        if b > HI && n < MID && a < MID {
            out.push(LegacyRegion::Dry);
        }
        if (b > MID && n > HI) || (b > HI && n > MID) {
            out.push(LegacyRegion::DryOrNormal);
        }
        if b < MID && n > HI && a < MID {
            out.push(LegacyRegion::Normal);
        }
        if (n > MID && a > HI) || (n > HI && a > MID) {
            out.push(LegacyRegion::WetOrNormal);
        }
        if b < MID && n < MID && a > HI {
            out.push(LegacyRegion::Wet);
        }
        out
    }
}

pub fn legacy_region(p: &TernaryProb) -> LegacyRegion {
    LegacyRegion::matches(p).first().copied().unwrap_or(LegacyRegion::Gap)
}
