//! Deterministic SVG output: palette legend, forecast maps with optional
//! skill circles, and ternary reliability diagrams.
//!
//! Every coordinate is written with four decimals and elements are emitted
//! in a fixed order, so identical inputs give byte-identical documents.
//! All styling is inline.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fmt::Write as _;

use crate::colour::{forecast_hex, PaletteParams};
use crate::dataset::{Dataset, Location};
use crate::error::{Error, Result};
use crate::scoring::{BaryPoint, ScoringRule};
use crate::simplex::TernaryProb;
use crate::verification::{
    decomposition_diagram_geometry, lattice_to_ternary, skill_radius, verify_pairs, BinnedStats, Decomposition,
    ForecastObsPair, DEFAULT_NBINS,
};

pub const DEFAULT_DIPOLE_THRESHOLD: usize = 10;

const SQRT3_2: f64 = 0.866_025_403_784_438_6;
const CROSS_COLOUR: &str = "#0000ff";
const EMPTY_BIN_COLOUR: &str = "#bdbdbd";

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub width_px: u32,
    pub height_px: u32,
    pub cell_size_px: f64,
    /// Bins with fewer forecasts get no reliability dipole.
    pub dipole_threshold: usize,
    pub show_skill_circles: bool,
    pub palette: PaletteParams,
    /// Locations with fewer verification pairs get no skill circle.
    pub min_history: usize,
    /// Circle radius at skill 1, in cells.
    pub skill_scale: f64,
    /// Bin resolution for per-location skill.
    pub nbins: u32,
    /// Subdivisions per side of the palette legend triangle.
    pub legend_resolution: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            width_px: 640,
            height_px: 560,
            cell_size_px: 16.0,
            dipole_threshold: DEFAULT_DIPOLE_THRESHOLD,
            show_skill_circles: false,
            palette: PaletteParams::default(),
            min_history: 10,
            skill_scale: 1.0,
            nbins: DEFAULT_NBINS,
            legend_resolution: 24,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::InvalidConfig("image dimensions must be positive".into()));
        }
        if !(self.cell_size_px > 0.0 && self.cell_size_px.is_finite()) {
            return Err(Error::InvalidConfig("cell size must be positive".into()));
        }
        if !(self.skill_scale > 0.0 && self.skill_scale.is_finite()) {
            return Err(Error::InvalidConfig("skill scale must be positive".into()));
        }
        if self.nbins == 0 || self.legend_resolution == 0 {
            return Err(Error::InvalidConfig("resolutions must be at least 1".into()));
        }
        self.palette.validate()
    }
}

/// Fixed four-decimal formatting without negative zero.
fn num(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Svg {
    body: String,
    width: f64,
    height: f64,
}

impl Svg {
    fn new(width: f64, height: f64) -> Self {
        Svg {
            body: String::new(),
            width,
            height,
        }
    }

    fn push(&mut self, line: impl AsRef<str>) {
        self.body.push_str(line.as_ref());
        self.body.push('\n');
    }

    fn finish(self) -> Vec<u8> {
        let mut out = String::new();
        out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
            w = num(self.width),
            h = num(self.height)
        );
        let _ = writeln!(
            out,
            "<rect x=\"0.0000\" y=\"0.0000\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>",
            num(self.width),
            num(self.height)
        );
        out.push_str(&self.body);
        out.push_str("</svg>\n");
        out.into_bytes()
    }
}

fn polygon(points: &[(f64, f64)], style: &str) -> String {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{},{}", num(*x), num(*y))).collect();
    format!("<polygon points=\"{}\" {style}/>", pts.join(" "))
}

fn line(a: (f64, f64), b: (f64, f64), style: &str) -> String {
    format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" {style}/>",
        num(a.0),
        num(a.1),
        num(b.0),
        num(b.1)
    )
}

fn circle(c: (f64, f64), r: f64, style: &str) -> String {
    format!(
        "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" {style}/>",
        num(c.0),
        num(c.1),
        num(r)
    )
}

fn text(at: (f64, f64), size: f64, anchor: &str, content: &str) -> String {
    format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"{}\" text-anchor=\"{anchor}\" fill=\"#000000\">{}</text>",
        num(at.0),
        num(at.1),
        num(size),
        xml_escape(content)
    )
}

fn cross(c: (f64, f64), half: f64, colour: &str) -> String {
    let style = format!("stroke=\"{colour}\" stroke-width=\"{}\"", num((half / 3.0).max(1.0)));
    format!(
        "<g id=\"climatology\">{}{}</g>",
        line((c.0 - half, c.1 - half), (c.0 + half, c.1 + half), &style),
        line((c.0 - half, c.1 + half), (c.0 + half, c.1 - half), &style)
    )
}

/// Affine placement of a scoring-rule triangle in pixel space, y pointing down.
#[derive(Debug, Clone, Copy)]
struct TriangleFrame {
    origin_x: f64,
    baseline_y: f64,
    scale: f64,
}

impl TriangleFrame {
    /// Fits the rule's triangle into the box `(x, y, w, h)`, centred horizontally
    /// and resting on the bottom edge.
    fn fit(rule: &ScoringRule, x: f64, y: f64, w: f64, h: f64) -> Self {
        let corners = rule.corners();
        let min_x = corners.iter().map(|c| c.x).fold(f64::INFINITY, f64::min);
        let max_x = corners.iter().map(|c| c.x).fold(f64::NEG_INFINITY, f64::max);
        let max_y = corners.iter().map(|c| c.y).fold(0.0, f64::max);
        let span = max_x - min_x;
        let scale = (w / span).min(h / max_y);
        let origin_x = x + (w - span * scale) / 2.0 - min_x * scale;
        TriangleFrame {
            origin_x,
            baseline_y: y + h,
            scale,
        }
    }

    fn px(&self, p: BaryPoint) -> (f64, f64) {
        (self.origin_x + p.x * self.scale, self.baseline_y - p.y * self.scale)
    }
}

fn corner_labels(out: &mut Svg, frame: &TriangleFrame, rule: &ScoringRule, size: f64) {
    let [b, n, a] = rule.corners().map(|c| frame.px(c));
    out.push(text((b.0 - size * 0.4, b.1 + size), size, "middle", "B"));
    out.push(text((n.0, n.1 - size * 0.4), size, "middle", "N"));
    out.push(text((a.0 + size * 0.4, a.1 + size), size, "middle", "A"));
}

/// Palette legend cells: the equilateral triangle split into
/// `resolution^2` small triangles, each filled with the colour of its centroid.
fn legend_elements(
    out: &mut Svg,
    q: &TernaryProb,
    params: &PaletteParams,
    frame: &TriangleFrame,
    resolution: u32,
) -> Result<()> {
    let rule = ScoringRule::brier();
    let k = resolution as f64;
    // Lattice coordinates (near count, above count); below is the remainder.
    let to_px = |u: f64, v: f64| {
        let p = [(k - u - v) / k, u / k, v / k];
        frame.px(rule.to_bary_vec(p))
    };
    out.push("<g id=\"palette\">");
    let mut cell = |tri: [(f64, f64); 3]| -> Result<()> {
        let cu = (tri[0].0 + tri[1].0 + tri[2].0) / 3.0;
        let cv = (tri[0].1 + tri[1].1 + tri[2].1) / 3.0;
        let centroid = TernaryProb::new((k - cu - cv) / k, cu / k, cv / k)?;
        let hex = forecast_hex(&centroid, q, params)?;
        let pts: Vec<(f64, f64)> = tri.iter().map(|&(u, v)| to_px(u, v)).collect();
        out.push(polygon(
            &pts,
            &format!("fill=\"{hex}\" stroke=\"{hex}\" stroke-width=\"0.5000\""),
        ));
        Ok(())
    };
    for u in 0..resolution {
        for v in 0..(resolution - u) {
            let (u, v) = (u as f64, v as f64);
            cell([(u, v), (u + 1.0, v), (u, v + 1.0)])?;
            if u + v + 2.0 <= k {
                cell([(u + 1.0, v), (u + 1.0, v + 1.0), (u, v + 1.0)])?;
            }
        }
    }
    out.push("</g>");
    let corners = rule.corners().map(|c| frame.px(c));
    out.push(polygon(
        &corners,
        "fill=\"none\" stroke=\"#000000\" stroke-width=\"1.0000\"",
    ));
    let half = (frame.scale / 40.0).max(2.0);
    out.push(cross(frame.px(rule.to_bary(q)), half, CROSS_COLOUR));
    corner_labels(out, frame, &rule, (frame.scale / 14.0).max(8.0));
    Ok(())
}

/// Triangular colour palette for climatology `q`, `side_px` wide.
pub fn render_palette_legend(
    q: &TernaryProb,
    params: &PaletteParams,
    side_px: f64,
    resolution: u32,
) -> Result<Vec<u8>> {
    params.validate()?;
    if !(side_px > 0.0 && side_px.is_finite()) || resolution == 0 {
        return Err(Error::InvalidConfig(
            "legend size and resolution must be positive".into(),
        ));
    }
    let margin = (side_px * 0.08).max(12.0);
    let width = side_px + 2.0 * margin;
    let height = side_px * SQRT3_2 + 2.0 * margin;
    let mut svg = Svg::new(width, height);
    let frame = TriangleFrame::fit(&ScoringRule::brier(), margin, margin, side_px, side_px * SQRT3_2);
    legend_elements(&mut svg, q, params, &frame, resolution)?;
    Ok(svg.finish())
}

/// One location on a forecast map.
#[derive(Debug, Clone, PartialEq)]
pub struct MapPoint {
    pub location: Location,
    pub forecast: TernaryProb,
    /// Historical decomposition at this location, when enough pairs exist.
    pub skill: Option<Decomposition>,
}

/// Per-location decompositions from hindcast pairs.
pub fn location_skill(
    history: &Dataset,
    rule: &ScoringRule,
    nbins: u32,
    min_history: usize,
) -> Result<HashMap<(u64, u64), Decomposition>> {
    let mut grouped: HashMap<(u64, u64), Vec<ForecastObsPair>> = HashMap::new();
    for (i, pair) in history.pairs()? {
        grouped
            .entry(history.records[i].location().key())
            .or_default()
            .push(pair);
    }
    let mut out = HashMap::new();
    for (key, pairs) in grouped {
        if pairs.len() >= min_history.max(1) {
            out.insert(key, verify_pairs(rule, &pairs, nbins)?);
        }
    }
    Ok(out)
}

/// Builds map points from forecasts and, when given, a hindcast dataset.
pub fn map_points(
    forecasts: &Dataset,
    history: Option<&Dataset>,
    rule: &ScoringRule,
    config: &RenderConfig,
) -> Result<Vec<MapPoint>> {
    let skill = match history {
        Some(h) => location_skill(h, rule, config.nbins, config.min_history)?,
        None => HashMap::new(),
    };
    let ternary = forecasts.ternary_forecasts()?;
    Ok(forecasts
        .records
        .iter()
        .zip(ternary)
        .map(|(r, forecast)| {
            let location = r.location();
            MapPoint {
                location,
                forecast,
                skill: skill.get(&location.key()).copied(),
            }
        })
        .collect())
}

/// Forecast map: one coloured square per location, or with
/// `show_skill_circles` one coloured circle sized by historical skill.
pub fn render_forecast_map(
    forecasts: &Dataset,
    history: Option<&Dataset>,
    rule: &ScoringRule,
    config: &RenderConfig,
) -> Result<Vec<u8>> {
    if config.show_skill_circles && history.is_none() {
        return Err(Error::MissingVerificationHistory);
    }
    let points = map_points(forecasts, history, rule, config)?;
    render_map_points(&points, &forecasts.q, config)
}

pub fn render_map_points(points: &[MapPoint], q: &TernaryProb, config: &RenderConfig) -> Result<Vec<u8>> {
    config.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let width = config.width_px as f64;
    let height = config.height_px as f64;
    let margin = 12.0;
    let legend_side = (width * 0.25).min(height * 0.4).max(40.0);
    let plot_w = (width - 3.0 * margin - legend_side).max(config.cell_size_px);
    let plot_h = (height - 2.0 * margin).max(config.cell_size_px);

    let lon_min = points.iter().map(|p| p.location.lon).fold(f64::INFINITY, f64::min);
    let lon_max = points.iter().map(|p| p.location.lon).fold(f64::NEG_INFINITY, f64::max);
    let lat_min = points.iter().map(|p| p.location.lat).fold(f64::INFINITY, f64::min);
    let lat_max = points.iter().map(|p| p.location.lat).fold(f64::NEG_INFINITY, f64::max);
    let cell = config.cell_size_px;
    let usable_w = (plot_w - cell).max(0.0);
    let usable_h = (plot_h - cell).max(0.0);
    let span = (lon_max - lon_min).max(lat_max - lat_min);
    // Same pixels per degree on both axes.
    let per_degree = if span > 0.0 {
        (usable_w / (lon_max - lon_min).max(f64::MIN_POSITIVE))
            .min(usable_h / (lat_max - lat_min).max(f64::MIN_POSITIVE))
    } else {
        0.0
    };
    let x0 = margin + cell / 2.0 + (usable_w - (lon_max - lon_min) * per_degree) / 2.0;
    let y0 = margin + cell / 2.0 + (usable_h - (lat_max - lat_min) * per_degree) / 2.0;
    let project = |loc: &Location| {
        (
            x0 + (loc.lon - lon_min) * per_degree,
            y0 + (lat_max - loc.lat) * per_degree,
        )
    };

    let mut svg = Svg::new(width, height);
    svg.push("<g id=\"forecasts\">");
    for p in points {
        let hex = forecast_hex(&p.forecast, q, &config.palette)?;
        let (cx, cy) = project(&p.location);
        if config.show_skill_circles {
            let radius = p
                .skill
                .as_ref()
                .and_then(skill_radius)
                .filter(|r| *r > 0.0)
                .map(|r| cell * r * config.skill_scale);
            if let Some(r) = radius {
                svg.push(circle(
                    (cx, cy),
                    r,
                    &format!("fill=\"{hex}\" stroke=\"#404040\" stroke-width=\"0.5000\""),
                ));
            }
        } else {
            svg.push(format!(
                "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{hex}\"/>",
                num(cx - cell / 2.0),
                num(cy - cell / 2.0),
                num(cell),
                num(cell)
            ));
        }
    }
    svg.push("</g>");

    let legend_x = width - margin - legend_side;
    let legend_y = height - margin - legend_side * SQRT3_2;
    let frame = TriangleFrame::fit(
        &ScoringRule::brier(),
        legend_x,
        legend_y,
        legend_side,
        legend_side * SQRT3_2,
    );
    legend_elements(&mut svg, q, &config.palette, &frame, config.legend_resolution)?;
    Ok(svg.finish())
}

fn blend(light: (u8, u8, u8), dark: (u8, u8, u8), t: f64) -> String {
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t.clamp(0.0, 1.0) + 0.5).floor() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(light.0, dark.0),
        mix(light.1, dark.1),
        mix(light.2, dark.2)
    )
}

fn decomposition_inset(svg: &mut Svg, d: &Decomposition, x: f64, y: f64, size: f64) -> Result<()> {
    let g = decomposition_diagram_geometry(d)?;
    let label = (size / 12.0).max(7.0);
    svg.push("<g id=\"decomposition\">");
    if g.sqrt_u > 0.0 {
        let k = size / g.sqrt_u;
        let sw = num(1.5 / k);
        let base_y = y + size * 0.55;
        svg.push(format!(
            "<g transform=\"translate({},{}) scale({},{})\">",
            num(x),
            num(base_y),
            num(k),
            num(-k)
        ));
        let p = |b: BaryPoint| (b.x, b.y);
        let r = g.circle_radius;
        svg.push(format!(
            "<path d=\"M 0.0000 0.0000 A {r} {r} 0 0 0 {d} 0.0000 Z\" fill=\"#d9d9d9\" stroke=\"none\"/>",
            r = num(r),
            d = num(2.0 * r)
        ));
        for (id, radius, colour) in [
            ("limit-no-resolution", g.limit_no_resolution, "#0000ff"),
            ("limit-perfect-reliability", g.limit_perfect_reliability, "#800080"),
        ] {
            let end = (g.apex.y.atan2(g.apex.x) + 0.3).clamp(FRAC_PI_4, FRAC_PI_2);
            svg.push(format!(
                "<path id=\"{id}\" d=\"M {r} 0.0000 A {r} {r} 0 0 1 {ex} {ey}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"{sw}\" stroke-dasharray=\"{dash} {dash}\"/>",
                r = num(radius),
                ex = num(radius * end.cos()),
                ey = num(radius * end.sin()),
                dash = num(4.0 / k),
            ));
        }
        for (a, b, colour) in [
            (g.origin, g.diameter_end, "#0000ff"),
            (g.apex, g.diameter_end, "#008000"),
            (g.origin, g.apex, "#800080"),
            (g.apex, g.score_end, "#ff0000"),
            (g.origin, g.score_end, "#000000"),
        ] {
            svg.push(line(p(a), p(b), &format!("stroke=\"{colour}\" stroke-width=\"{sw}\"")));
        }
        svg.push("</g>");
    }
    let rows = [
        format!("\u{221a}S = {:.3}", g.sqrt_s),
        format!("\u{221a}U = {:.3}", g.sqrt_u),
        format!("\u{221a}Z = {:.3}", g.sqrt_z),
        format!("\u{221a}R = {:.3}", g.sqrt_r),
        format!("\u{221a}(U\u{2212}Z) = {:.3}", g.sqrt_u_minus_z),
    ];
    for (i, row) in rows.iter().enumerate() {
        svg.push(text(
            (x, y + size * 0.55 + label * (1.4 + 1.2 * i as f64)),
            label,
            "start",
            row,
        ));
    }
    svg.push("</g>");
    Ok(())
}

fn sharpness_inset(svg: &mut Svg, binned: &BinnedStats, rule: &ScoringRule, x: f64, y: f64, size: f64) {
    let corners = rule.corners();
    let max_y = corners.iter().map(|c| c.y).fold(0.0, f64::max);
    let frame = TriangleFrame::fit(rule, x, y, size, size * max_y.min(1.0));
    let n = binned.nbins;
    let max_count = binned.bins.iter().map(|b| b.count).max().unwrap_or(1).max(1) as f64;
    let dot = frame.scale * rule.sides().n.min(rule.sides().a).min(rule.sides().b) / n as f64 * 0.45;
    svg.push("<g id=\"sharpness\">");
    svg.push(polygon(
        &corners.map(|c| frame.px(c)),
        "fill=\"none\" stroke=\"#000000\" stroke-width=\"0.7500\"",
    ));
    for i in 0..=n {
        for j in 0..=(n - i) {
            let lattice = [i, j, n - i - j];
            let centre = frame.px(rule.to_bary(&lattice_to_ternary(lattice, n)));
            let fill = match binned.get(lattice) {
                Some(bin) => blend((0xde, 0xeb, 0xf7), (0x08, 0x30, 0x6b), bin.count as f64 / max_count),
                None => EMPTY_BIN_COLOUR.to_string(),
            };
            svg.push(circle(centre, dot, &format!("fill=\"{fill}\"")));
        }
    }
    svg.push("</g>");
}

/// Ternary reliability diagram: bin centres (black) joined to conditional
/// mean observations (red) for bins holding at least `dipole_threshold`
/// forecasts, the decomposition diagram top-left and the sharpness
/// diagram top-right.
pub fn render_reliability_diagram(
    binned: &BinnedStats,
    decomposition: &Decomposition,
    rule: &ScoringRule,
    config: &RenderConfig,
) -> Result<Vec<u8>> {
    config.validate()?;
    let width = config.width_px as f64;
    let height = config.height_px as f64;
    let margin = 24.0;
    let inset = (width.min(height) * 0.3).max(40.0);
    let corners = rule.corners();
    let frame = TriangleFrame::fit(rule, margin, margin, width - 2.0 * margin, height - 2.0 * margin);
    let mut svg = Svg::new(width, height);

    svg.push(polygon(
        &corners.map(|c| frame.px(c)),
        "fill=\"none\" stroke=\"#000000\" stroke-width=\"1.5000\"",
    ));
    corner_labels(&mut svg, &frame, rule, 14.0);

    let dot = (frame.scale / binned.nbins as f64 * 0.12).clamp(1.5, 6.0);
    svg.push("<g id=\"dipoles\">");
    for bin in binned.bins.iter().filter(|b| b.count >= config.dipole_threshold) {
        let p = frame.px(rule.to_bary(&bin.center(binned.nbins)));
        let o = frame.px(rule.to_bary(&bin.mean_obs()));
        svg.push(format!(
            "<g>{}{}{}</g>",
            line(p, o, "stroke=\"#ff0000\" stroke-width=\"1.5000\""),
            circle(p, dot, "fill=\"#000000\""),
            circle(o, dot, "fill=\"#ff0000\"")
        ));
    }
    svg.push("</g>");
    svg.push(cross(frame.px(rule.to_bary(&decomposition.q_bar)), 6.0, CROSS_COLOUR));
    svg.push(text(
        (width - margin, height - 6.0),
        11.0,
        "end",
        &format!("threshold ={}", config.dipole_threshold),
    ));

    decomposition_inset(&mut svg, decomposition, margin, margin, inset)?;
    sharpness_inset(&mut svg, binned, rule, width - margin - inset, margin, inset);
    Ok(svg.finish())
}
