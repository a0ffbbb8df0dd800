//! Verification, recalibration and display of three-category probability
//! forecasts.
//!
//! Forecasts are points on the probability simplex over the categories
//! below-normal, near-normal and above-normal. Quadratic scoring rules give
//! that simplex a Euclidean geometry, which the rest of the crate builds on:
//! score decomposition, quadratic recalibration maps, colour palettes and
//! SVG diagrams.

pub mod calibration;
pub mod colour;
pub mod dataset;
pub mod error;
pub mod gaussian;
pub mod render;
pub mod scoring;
pub mod simplex;
pub mod verification;

pub use calibration::{apply_map, fit_map, recalibration_report, CalibrationReport, QuadraticMap};
pub use colour::{
    assign_color, dominant_category, forecast_hex, hsv_to_rgb, information_gain, legacy_region, ColorHSV, ColorRGB,
    LegacyRegion, PaletteParams,
};
pub use dataset::{
    parse_auto, parse_csv, parse_json, write_json, Dataset, Forecast, ForecastRecord, Location, Observation,
};
pub use error::{Error, Result};
pub use gaussian::{gaussian_to_ternary, scale_params, ternary_to_gaussian, GaussianScaled};
pub use render::{render_forecast_map, render_palette_legend, render_reliability_diagram, RenderConfig};
pub use scoring::{AffinePoint, BaryPoint, RuleKind, ScoringRule, Sides};
pub use simplex::{CategoryThresholds, ObsCategory, TernaryProb};
pub use verification::{
    bin_forecasts, decompose, decomposition_diagram_geometry, skill_radius, verify_pairs, BinnedStats, Decomposition,
    DiagramGeometry, ForecastObsPair, DEFAULT_NBINS,
};
