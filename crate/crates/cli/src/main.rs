use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use ternary_core::calibration::{fit_map, recalibrate_pairs, recalibration_report, CalibrationReport};
use ternary_core::dataset::{resolve_observation, resolve_ternary, Forecast, ForecastRecord, Observation};
use ternary_core::verification::{bin_forecasts, decompose, mean_score};
use ternary_core::{
    parse_auto, render_forecast_map, render_palette_legend, render_reliability_diagram, write_json, Dataset,
    Decomposition, Error, ForecastObsPair, PaletteParams, RenderConfig, ScoringRule, TernaryProb,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ternary",
    version,
    about = "Verify, recalibrate and draw three-category probability forecasts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Rule {
    Brier,
    Rps,
}

impl Rule {
    fn build(self) -> ScoringRule {
        match self {
            Rule::Brier => ScoringRule::brier(),
            Rule::Rps => ScoringRule::rps(),
        }
    }
}

#[derive(Debug, Args)]
struct Options {
    /// Scoring rule.
    #[arg(long = "score", value_enum, default_value = "brier", global = true)]
    rule: Rule,
    /// Bins per side of the forecast lattice.
    #[arg(long, default_value_t = 11, value_parser = clap::value_parser!(u32).range(1..), global = true)]
    nbins: u32,
    /// Minimum bin count for a reliability dipole.
    #[arg(long, default_value_t = 10, global = true)]
    threshold: usize,
    /// Saturation exponent of the palette.
    #[arg(long, default_value_t = 0.7, global = true)]
    m: f64,
    /// Hue rotation of the palette, in radians.
    #[arg(long, default_value_t = 0.0, global = true)]
    theta0: f64,
    /// Project recalibrated forecasts that leave the simplex.
    #[arg(long, global = true)]
    clip: bool,
    /// Fraction of records, taken from the end, held out from fitting.
    #[arg(long, default_value_t = 0.0, global = true)]
    holdout: f64,
    /// Input dataset (CSV or JSON); standard input when omitted.
    #[arg(long, short, global = true)]
    input: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resolve every record to a ternary forecast and observed category.
    Project,
    /// Mean score of the forecast-observation pairs.
    Score,
    /// Binned score decomposition.
    Verify,
    /// Fit a quadratic recalibration map.
    Calibrate {
        /// Also write the recalibrated dataset here.
        #[arg(long)]
        mapped: Option<PathBuf>,
    },
    /// Forecast map as SVG.
    RenderMap {
        /// Hindcast dataset for per-location skill circles.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Draw skill circles instead of cells; needs --history.
        #[arg(long)]
        circles: bool,
        #[arg(long, default_value_t = 16.0)]
        cell_size: f64,
        #[arg(long, default_value_t = 640)]
        width: u32,
        #[arg(long, default_value_t = 560)]
        height: u32,
    },
    /// Reliability diagram as SVG.
    RenderReliability {
        #[arg(long, default_value_t = 640)]
        width: u32,
        #[arg(long, default_value_t = 560)]
        height: u32,
    },
    /// Palette legend as SVG.
    Palette {
        /// Climatology as "pB,pN,pA"; taken from --input when given, else uniform.
        #[arg(long)]
        q: Option<String>,
        /// Side length in pixels.
        #[arg(long, default_value_t = 240.0)]
        size: f64,
        /// Subdivisions per side.
        #[arg(long, default_value_t = 24)]
        resolution: u32,
    },
}

/// The decomposition failed its own consistency check.
#[derive(Debug)]
struct IdentityViolation(f64);

impl std::fmt::Display for IdentityViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "decomposition identity violated: S - (U - Z + R) = {:e}", self.0)
    }
}

impl std::error::Error for IdentityViolation {}

#[derive(Debug, Serialize)]
#[allow(non_snake_case)]
struct VerifySummary {
    S: f64,
    U: f64,
    Z: f64,
    R: f64,
    sqrtS: f64,
    sqrtU: f64,
    sqrtZ: f64,
    sqrtR: f64,
    q_bar: [f64; 3],
    n_pairs: usize,
    n_bins: usize,
}

impl VerifySummary {
    fn new(d: &Decomposition) -> anyhow::Result<Self> {
        let residual = d.identity_residual();
        if residual.abs() > 1e-10 {
            return Err(IdentityViolation(residual).into());
        }
        Ok(VerifySummary {
            S: d.score,
            U: d.uncertainty,
            Z: d.resolution,
            R: d.reliability,
            sqrtS: d.sqrt_score(),
            sqrtU: d.sqrt_uncertainty(),
            sqrtZ: d.sqrt_resolution(),
            sqrtR: d.sqrt_reliability(),
            q_bar: d.q_bar.as_array(),
            n_pairs: d.n_pairs,
            n_bins: d.n_bins,
        })
    }
}

#[derive(Debug, Serialize)]
struct ScoreSummary {
    rule: &'static str,
    score: f64,
    n_pairs: usize,
}

#[derive(Debug, Serialize)]
struct CalibrateSummary {
    coefficients: [f64; 12],
    n_fit: usize,
    n_eval: usize,
    before: VerifySummary,
    after: VerifySummary,
    before_mean_score: f64,
    after_mean_score: f64,
    simplex_exits: usize,
}

impl CalibrateSummary {
    fn new(coefficients: [f64; 12], n_fit: usize, report: &CalibrationReport) -> anyhow::Result<Self> {
        Ok(CalibrateSummary {
            coefficients,
            n_fit,
            n_eval: report.before.n_pairs,
            before: VerifySummary::new(&report.before)?,
            after: VerifySummary::new(&report.after)?,
            before_mean_score: report.before_mean_score,
            after_mean_score: report.after_mean_score,
            simplex_exits: report.simplex_exits,
        })
    }
}

fn read_input(path: Option<&Path>) -> anyhow::Result<Vec<u8>> {
    match path {
        Some(p) => fs::read(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf).context("reading standard input")?;
            Ok(buf)
        }
    }
}

fn load(path: Option<&Path>) -> anyhow::Result<Dataset> {
    let bytes = read_input(path)?;
    let name = path.map_or_else(|| "standard input".to_string(), |p| p.display().to_string());
    parse_auto(&bytes).with_context(|| format!("parsing {name}"))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(bytes).context("writing standard output"),
    }
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn pairs(dataset: &Dataset) -> anyhow::Result<Vec<ForecastObsPair>> {
    let pairs = dataset.forecast_obs_pairs()?;
    if pairs.is_empty() {
        return Err(Error::EmptyDataset).context("no records carry an observation");
    }
    Ok(pairs)
}

fn palette(opts: &Options) -> anyhow::Result<PaletteParams> {
    let params = PaletteParams::default()
        .with_exponent(opts.m)
        .with_rotation(opts.theta0);
    params.validate()?;
    Ok(params)
}

fn parse_q(s: &str) -> anyhow::Result<TernaryProb> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .with_context(|| format!("climatology {s:?} is not three numbers"))?;
    if parts.len() != 3 {
        bail!("climatology {s:?} must have three components");
    }
    Ok(TernaryProb::new(parts[0], parts[1], parts[2])?)
}

/// Records with every forecast and observation resolved to ternary form.
fn project(dataset: &Dataset) -> anyhow::Result<Dataset> {
    let mut records = Vec::with_capacity(dataset.records.len());
    for (i, r) in dataset.records.iter().enumerate() {
        let p = resolve_ternary(r, &dataset.q)?;
        let obs = resolve_observation(r, &dataset.q, i)?;
        records.push(ForecastRecord {
            lat: r.lat,
            lon: r.lon,
            forecast: Forecast::Ternary(p),
            observation: obs.map(Observation::Category),
            series: None,
        });
    }
    Ok(Dataset {
        records,
        q: dataset.q,
        metadata: dataset.metadata.clone(),
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let opts = &cli.opts;
    let rule = opts.rule.build();
    if !(0.0..1.0).contains(&opts.holdout) {
        return Err(Error::InvalidConfig(format!("holdout must lie in [0, 1), got {}", opts.holdout)).into());
    }
    let output = opts.output.as_deref();
    match &cli.command {
        Command::Project => {
            let dataset = load(opts.input.as_deref())?;
            write_output(output, &write_json(&project(&dataset)?)?)
        }
        Command::Score => {
            let dataset = load(opts.input.as_deref())?;
            let pairs = pairs(&dataset)?;
            let summary = ScoreSummary {
                rule: match opts.rule {
                    Rule::Brier => "brier",
                    Rule::Rps => "rps",
                },
                score: mean_score(&rule, &pairs)?,
                n_pairs: pairs.len(),
            };
            write_output(output, &to_json(&summary)?)
        }
        Command::Verify => {
            let dataset = load(opts.input.as_deref())?;
            let d = decompose(&rule, &bin_forecasts(&pairs(&dataset)?, opts.nbins)?)?;
            write_output(output, &to_json(&VerifySummary::new(&d)?)?)
        }
        Command::Calibrate { mapped } => {
            let dataset = load(opts.input.as_deref())?;
            let all = pairs(&dataset)?;
            let n_eval = (all.len() as f64 * opts.holdout).round() as usize;
            let (fit_set, eval_set) = if n_eval == 0 {
                (&all[..], &all[..])
            } else if n_eval >= all.len() {
                bail!("holdout {} leaves no pairs to fit", opts.holdout);
            } else {
                all.split_at(all.len() - n_eval)
            };
            let map = fit_map(fit_set, &rule)?;
            let report = recalibration_report(eval_set, &map, &rule, opts.nbins, opts.clip)?;
            if let Some(path) = mapped {
                let mapped_pairs = recalibrate_pairs(&map, &all);
                let records = mapped_pairs
                    .iter()
                    .zip(dataset.pairs()?)
                    .map(|(pair, (i, _))| {
                        let r = &dataset.records[i];
                        ForecastRecord::ternary(r.lat, r.lon, pair.forecast, Some(pair.obs))
                    })
                    .collect();
                let out = Dataset {
                    records,
                    q: dataset.q,
                    metadata: dataset.metadata.clone(),
                };
                write_output(Some(path), &write_json(&out)?)?;
            }
            write_output(
                output,
                &to_json(&CalibrateSummary::new(map.coeffs(), fit_set.len(), &report)?)?,
            )
        }
        Command::RenderMap {
            history,
            circles,
            cell_size,
            width,
            height,
        } => {
            let dataset = load(opts.input.as_deref())?;
            let history = history.as_deref().map(|p| load(Some(p))).transpose()?;
            let config = RenderConfig {
                width_px: *width,
                height_px: *height,
                cell_size_px: *cell_size,
                dipole_threshold: opts.threshold,
                show_skill_circles: *circles,
                palette: palette(opts)?,
                nbins: opts.nbins,
                ..RenderConfig::default()
            };
            write_output(
                output,
                &render_forecast_map(&dataset, history.as_ref(), &rule, &config)?,
            )
        }
        Command::RenderReliability { width, height } => {
            let dataset = load(opts.input.as_deref())?;
            let binned = bin_forecasts(&pairs(&dataset)?, opts.nbins)?;
            let d = decompose(&rule, &binned)?;
            VerifySummary::new(&d)?;
            let config = RenderConfig {
                width_px: *width,
                height_px: *height,
                dipole_threshold: opts.threshold,
                palette: palette(opts)?,
                nbins: opts.nbins,
                ..RenderConfig::default()
            };
            write_output(output, &render_reliability_diagram(&binned, &d, &rule, &config)?)
        }
        Command::Palette { q, size, resolution } => {
            let q = match (q, opts.input.as_deref()) {
                (Some(s), _) => parse_q(s)?,
                (None, Some(path)) => load(Some(path))?.q,
                (None, None) => TernaryProb::uniform(),
            };
            write_output(output, &render_palette_legend(&q, &palette(opts)?, *size, *resolution)?)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_schema() => EXIT_SCHEMA,
        Some(Error::InvalidConfig(_) | Error::MissingVerificationHistory) => EXIT_FAILURE,
        Some(_) => EXIT_NUMERIC,
        None if err.chain().any(|e| e.is::<IdentityViolation>()) => EXIT_NUMERIC,
        None => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
