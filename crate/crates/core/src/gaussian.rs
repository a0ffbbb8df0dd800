//! Gaussian forecasts against a Gaussian climatology.
//!
//! With forecast `N(mu, sigma^2)` and climatology `N(mu_c, sigma_c^2)` the
//! ternary forecast depends only on the scaled mean and scaled standard
//! deviation, and the map is invertible in closed form on the interior of
//! the simplex.
//!
//! Probabilities near one are evaluated through the complementary tail so
//! that both directions keep full relative precision deep in the tails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

use crate::error::{Error, Result};
use crate::simplex::TernaryProb;

/// Scaled Gaussian parameters: `((mu - mu_c) / sigma_c, sigma / sigma_c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianScaled {
    mu_hat: f64,
    sigma_hat: f64,
}

impl GaussianScaled {
    pub fn new(mu_hat: f64, sigma_hat: f64) -> Result<Self> {
        if !mu_hat.is_finite() {
            return Err(Error::NonFinite {
                what: "scaled mean",
                value: mu_hat,
            });
        }
        if !(sigma_hat > 0.0 && sigma_hat.is_finite()) {
            return Err(Error::NonPositiveSigma(sigma_hat));
        }
        Ok(GaussianScaled { mu_hat, sigma_hat })
    }

    pub fn mu_hat(&self) -> f64 {
        self.mu_hat
    }

    pub fn sigma_hat(&self) -> f64 {
        self.sigma_hat
    }
}

pub fn scale_params(mu: f64, sigma: f64, mu_c: f64, sigma_c: f64) -> Result<GaussianScaled> {
    for (what, v) in [("forecast mean", mu), ("climatological mean", mu_c)] {
        if !v.is_finite() {
            return Err(Error::NonFinite { what, value: v });
        }
    }
    for s in [sigma, sigma_c] {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositiveSigma(s));
        }
    }
    GaussianScaled::new((mu - mu_c) / sigma_c, sigma / sigma_c)
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

// Rational approximation of the normal quantile (P. J. Acklam), relative
// error about 1.15e-9 before refinement. Coefficients from the original rational approximation.
#[allow(clippy::excessive_precision)]
const A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
#[allow(clippy::excessive_precision)]
const B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
#[allow(clippy::excessive_precision)]
const C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
#[allow(clippy::excessive_precision)]
const D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];
const P_LOW: f64 = 0.02425;

fn acklam_lower(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Quantile for `p <= 0.5`, refined by Halley steps against the CDF.
fn lower_quantile(p: f64) -> f64 {
    let mut x = acklam_lower(p);
    for _ in 0..2 {
        let e = std_normal_cdf(x) - p;
        let u = e / std_normal_pdf(x);
        if !u.is_finite() {
            break;
        }
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// Standard normal quantile on the open interval (0, 1).
pub fn std_normal_quantile(u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::QuantileOutOfRange(u));
    }
    if u <= 0.5 {
        Ok(lower_quantile(u))
    } else {
        Ok(-lower_quantile(1.0 - u))
    }
}

/// Quantile of the point that splits mass `lower` below from `upper` above,
/// evaluated on whichever side is smaller.
fn split_quantile(lower: f64, upper: f64) -> Result<f64> {
    if lower <= upper {
        std_normal_quantile(lower)
    } else {
        std_normal_quantile(upper).map(|z| -z)
    }
}

fn climatology_quantiles(q: &TernaryProb) -> Result<(f64, f64)> {
    if q.below() <= 0.0 || q.above() <= 0.0 {
        return Err(Error::DegenerateClimatology(format!(
            "thresholds undefined for q = {q}"
        )));
    }
    let zb = split_quantile(q.below(), q.near() + q.above())?;
    let za = split_quantile(q.below() + q.near(), q.above())?;
    Ok((zb, za))
}

/// Ternary forecast of a scaled Gaussian against climatology category
/// probabilities `q`.
pub fn gaussian_to_ternary(g: &GaussianScaled, q: &TernaryProb) -> Result<TernaryProb> {
    let (zb, za) = climatology_quantiles(q)?;
    let wb = (zb - g.mu_hat) / g.sigma_hat;
    let wa = (za - g.mu_hat) / g.sigma_hat;
    let below = std_normal_cdf(wb);
    let above = std_normal_cdf(-wa);
    let near = if wb >= 0.0 {
        std_normal_cdf(-wb) - above
    } else if wa <= 0.0 {
        std_normal_cdf(wa) - below
    } else {
        1.0 - below - above
    };
    TernaryProb::new(below, near.max(0.0), above)
}

/// Scaled Gaussian parameters reproducing the ternary forecast `p`.
pub fn ternary_to_gaussian(p: &TernaryProb, q: &TernaryProb) -> Result<GaussianScaled> {
    let [pb, pn, pa] = p.as_array();
    if pb <= 0.0 || pn <= 0.0 || pa <= 0.0 {
        return Err(Error::NotInvertible(format!(
            "forecast {p} is not strictly inside the simplex"
        )));
    }
    let (zb, za) = climatology_quantiles(q)?;
    let wb = split_quantile(pb, pn + pa)?;
    let wa = split_quantile(pb + pn, pa)?;
    if wa <= wb || zb >= za {
        return Err(Error::NotInvertible(format!(
            "category boundaries coincide for forecast {p}"
        )));
    }
    let sigma_hat = (za - zb) / (wa - wb);
    let mu_hat = zb - sigma_hat * wb;
    GaussianScaled::new(mu_hat, sigma_hat)
}
