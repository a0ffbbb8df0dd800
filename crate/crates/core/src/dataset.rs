//! Forecast datasets: CSV and JSON ingestion, JSON output, and resolution
//! of each record to a ternary forecast and observed category.
//!
//! JSON layout:
//!
//! ```json
//! {
//!   "q": {"pB": 0.3333333333333333, "pN": 0.3333333333333333, "pA": 0.3333333333333333},
//!   "metadata": {"source": "hindcast"},
//!   "records": [
//!     {"lat": -5.0, "lon": -60.0, "pB": 0.5, "pN": 0.3, "pA": 0.2, "obs": "B"},
//!     {"lat": -5.0, "lon": -57.5, "mu": 7.0, "sigma": 2.0, "mu_c": 5.0, "sigma_c": 2.0, "obs_value": 6.1},
//!     {"lat": -2.5, "lon": -60.0, "members": [1.0, 2.0, 3.0], "series": [0.0, 1.0, 2.0, 3.0], "obs": "N"}
//!   ]
//! }
//! ```
//!
//! CSV files carry a header with `lat`, `lon`, then either `pB,pN,pA` or
//! `mu,sigma,mu_c,sigma_c`, and optionally `obs` or `obs_value`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_to_ternary, scale_params, std_normal_quantile};
use crate::simplex::{empirical_quantiles, ensemble_to_ternary, CategoryThresholds, ObsCategory, TernaryProb};
use crate::verification::ForecastObsPair;

#[derive(Debug, Clone, PartialEq)]
pub enum Forecast {
    Ternary(TernaryProb),
    Gaussian {
        mu: f64,
        sigma: f64,
        mu_c: f64,
        sigma_c: f64,
    },
    Ensemble(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Category(ObsCategory),
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub lat: f64,
    pub lon: f64,
    pub forecast: Forecast,
    pub observation: Option<Observation>,
    pub series: Option<Vec<f64>>,
}

impl ForecastRecord {
    pub fn ternary(lat: f64, lon: f64, p: TernaryProb, obs: Option<ObsCategory>) -> Self {
        ForecastRecord {
            lat,
            lon,
            forecast: Forecast::Ternary(p),
            observation: obs.map(Observation::Category),
            series: None,
        }
    }

    pub fn location(&self) -> Location {
        Location::new(self.lat, self.lon)
    }
}

/// Grid location, ordered and hashable by the bit patterns of its coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub lat: f64,
    pub lon: f64,
}

impl Location {
    pub fn new(lat: f64, lon: f64) -> Self {
        Location { lat, lon }
    }

    pub fn key(&self) -> (u64, u64) {
        // +0.0 and -0.0 are the same place.
        ((self.lat + 0.0).to_bits(), (self.lon + 0.0).to_bits())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<ForecastRecord>,
    /// Declared climatological category probabilities.
    pub q: TernaryProb,
    pub metadata: BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(records: Vec<ForecastRecord>) -> Self {
        Dataset {
            records,
            q: TernaryProb::uniform(),
            metadata: BTreeMap::new(),
        }
    }

    /// Ternary forecast of every record, in order.
    pub fn ternary_forecasts(&self) -> Result<Vec<TernaryProb>> {
        self.records.iter().map(|r| resolve_ternary(r, &self.q)).collect()
    }

    /// Forecast-observation pairs for the records that carry an observation,
    /// each with the index of its record.
    pub fn pairs(&self) -> Result<Vec<(usize, ForecastObsPair)>> {
        let mut out = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            if let Some(obs) = resolve_observation(r, &self.q, i)? {
                out.push((i, ForecastObsPair::new(resolve_ternary(r, &self.q)?, obs)));
            }
        }
        Ok(out)
    }

    pub fn forecast_obs_pairs(&self) -> Result<Vec<ForecastObsPair>> {
        Ok(self.pairs()?.into_iter().map(|(_, p)| p).collect())
    }
}

fn record_path(index: usize) -> String {
    format!("records[{index}]")
}

/// Ternary forecast of one record against climatology `q`.
pub fn resolve_ternary(record: &ForecastRecord, q: &TernaryProb) -> Result<TernaryProb> {
    match &record.forecast {
        Forecast::Ternary(p) => Ok(*p),
        Forecast::Gaussian {
            mu,
            sigma,
            mu_c,
            sigma_c,
        } => gaussian_to_ternary(&scale_params(*mu, *sigma, *mu_c, *sigma_c)?, q),
        Forecast::Ensemble(members) => {
            let series = record.series.as_ref().ok_or_else(|| Error::MissingClimatologySeries {
                location: format!("lat {} lon {}", record.lat, record.lon),
            })?;
            ensemble_to_ternary(members, &empirical_quantiles(series, q)?)
        }
    }
}

/// Category thresholds of the record's physical variable, when derivable.
pub fn record_thresholds(record: &ForecastRecord, q: &TernaryProb) -> Result<Option<CategoryThresholds>> {
    if let Some(series) = &record.series {
        return empirical_quantiles(series, q).map(Some);
    }
    if let Forecast::Gaussian { mu_c, sigma_c, .. } = record.forecast {
        let zb = std_normal_quantile(q.below())?;
        let za = std_normal_quantile(q.below() + q.near())?;
        return CategoryThresholds::new(mu_c + sigma_c * zb, mu_c + sigma_c * za).map(Some);
    }
    Ok(None)
}

/// Observed category of the record; raw values are categorised against the
/// record's own thresholds.
pub fn resolve_observation(record: &ForecastRecord, q: &TernaryProb, index: usize) -> Result<Option<ObsCategory>> {
    match record.observation {
        None => Ok(None),
        Some(Observation::Category(c)) => Ok(Some(c)),
        Some(Observation::Value(x)) => match record_thresholds(record, q)? {
            Some(th) => Ok(Some(th.categorise(x))),
            None => Err(Error::MissingClimatologySeries {
                location: record_path(index),
            }),
        },
    }
}

// Flat wire form shared by JSON records and CSV rows.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    lat: f64,
    lon: f64,
    #[serde(rename = "pB", default, skip_serializing_if = "Option::is_none")]
    p_below: Option<f64>,
    #[serde(rename = "pN", default, skip_serializing_if = "Option::is_none")]
    p_near: Option<f64>,
    #[serde(rename = "pA", default, skip_serializing_if = "Option::is_none")]
    p_above: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mu_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    members: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    series: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    obs: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    obs_value: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<TernaryProb>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
    records: Vec<RawRecord>,
}

impl RawRecord {
    fn into_record(self, location: &str) -> Result<ForecastRecord> {
        let err = |reason: String| Error::schema(location, reason);
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(err(format!("lat = {} outside [-90, 90]", self.lat)));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(err(format!("lon = {} outside [-180, 180]", self.lon)));
        }

        let ternary = [self.p_below, self.p_near, self.p_above];
        let gaussian = [self.mu, self.sigma, self.mu_c, self.sigma_c];
        let has_ternary = ternary.iter().any(Option::is_some);
        let has_gaussian = gaussian.iter().any(Option::is_some);
        let has_members = self.members.is_some();
        let present = [has_ternary, has_gaussian, has_members].iter().filter(|x| **x).count();
        if has_ternary && has_gaussian {
            return Err(Error::MixedRepresentation {
                location: location.to_string(),
            });
        }
        if present > 1 {
            return Err(err("more than one forecast representation".into()));
        }

        let forecast = if has_ternary {
            let [Some(b), Some(n), Some(a)] = ternary else {
                return Err(err("ternary forecast needs all of pB, pN, pA".into()));
            };
            Forecast::Ternary(TernaryProb::new(b, n, a).map_err(|e| err(e.to_string()))?)
        } else if has_gaussian {
            let [Some(mu), Some(sigma), Some(mu_c), Some(sigma_c)] = gaussian else {
                return Err(err("Gaussian forecast needs all of mu, sigma, mu_c, sigma_c".into()));
            };
            scale_params(mu, sigma, mu_c, sigma_c).map_err(|e| err(e.to_string()))?;
            Forecast::Gaussian {
                mu,
                sigma,
                mu_c,
                sigma_c,
            }
        } else if let Some(members) = self.members {
            if members.is_empty() {
                return Err(err("members list is empty".into()));
            }
            if members.iter().any(|m| !m.is_finite()) {
                return Err(err("non-finite ensemble member".into()));
            }
            Forecast::Ensemble(members)
        } else {
            return Err(err(
                "no forecast fields (pB/pN/pA, mu/sigma/mu_c/sigma_c or members)".into()
            ));
        };

        let observation = match (self.obs, self.obs_value) {
            (Some(_), Some(_)) => return Err(err("both obs and obs_value given".into())),
            (Some(s), None) => Some(Observation::Category(
                ObsCategory::from_letter(&s).ok_or_else(|| err(format!("obs = {s:?} is not one of B, N, A")))?,
            )),
            (None, Some(v)) if v.is_finite() => Some(Observation::Value(v)),
            (None, Some(v)) => return Err(err(format!("obs_value = {v} is not finite"))),
            (None, None) => None,
        };

        if let Some(series) = &self.series {
            if series.iter().any(|v| !v.is_finite()) {
                return Err(err("non-finite value in series".into()));
            }
        }

        Ok(ForecastRecord {
            lat: self.lat,
            lon: self.lon,
            forecast,
            observation,
            series: self.series,
        })
    }

    fn from_record(r: &ForecastRecord) -> Self {
        let mut raw = RawRecord {
            lat: r.lat,
            lon: r.lon,
            series: r.series.clone(),
            ..Default::default()
        };
        match &r.forecast {
            Forecast::Ternary(p) => {
                raw.p_below = Some(p.below());
                raw.p_near = Some(p.near());
                raw.p_above = Some(p.above());
            }
            Forecast::Gaussian {
                mu,
                sigma,
                mu_c,
                sigma_c,
            } => {
                raw.mu = Some(*mu);
                raw.sigma = Some(*sigma);
                raw.mu_c = Some(*mu_c);
                raw.sigma_c = Some(*sigma_c);
            }
            Forecast::Ensemble(m) => raw.members = Some(m.clone()),
        }
        match r.observation {
            Some(Observation::Category(c)) => raw.obs = Some(c.letter().to_string()),
            Some(Observation::Value(v)) => raw.obs_value = Some(v),
            None => {}
        }
        raw
    }
}

fn decode_utf8(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| Error::schema(format!("byte {}", e.valid_up_to()), "input is not UTF-8"))
}

pub fn parse_json(bytes: &[u8]) -> Result<Dataset> {
    let text = decode_utf8(bytes)?;
    let raw: RawDataset =
        serde_json::from_str(text).map_err(|e| Error::schema(format!("line {} column {}", e.line(), e.column()), e))?;
    let records = raw
        .records
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.into_record(&record_path(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        records,
        q: raw.q.unwrap_or_else(TernaryProb::uniform),
        metadata: raw.metadata,
    })
}

pub fn write_json(dataset: &Dataset) -> Result<Vec<u8>> {
    let raw = RawDataset {
        q: Some(dataset.q),
        metadata: dataset.metadata.clone(),
        records: dataset.records.iter().map(RawRecord::from_record).collect(),
    };
    let mut out = serde_json::to_vec_pretty(&raw).map_err(|e| Error::schema("output", e))?;
    out.push(b'\n');
    Ok(out)
}

const CSV_COLUMNS: [&str; 11] = [
    "lat",
    "lon",
    "pB",
    "pN",
    "pA",
    "mu",
    "sigma",
    "mu_c",
    "sigma_c",
    "obs",
    "obs_value",
];

pub fn parse_csv(bytes: &[u8]) -> Result<Dataset> {
    let text = decode_utf8(bytes)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::schema("header", e))?.clone();
    let mut columns = Vec::with_capacity(headers.len());
    for h in headers.iter() {
        if !CSV_COLUMNS.contains(&h) {
            return Err(Error::schema("header", format!("unknown column {h:?}")));
        }
        if columns.contains(&h) {
            return Err(Error::schema("header", format!("duplicate column {h:?}")));
        }
        columns.push(h);
    }
    for required in ["lat", "lon"] {
        if !columns.contains(&required) {
            return Err(Error::schema("header", format!("missing column {required:?}")));
        }
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        // Header is line 1.
        let location = format!("row {} (line {})", i + 1, i + 2);
        let row = row.map_err(|e| Error::schema(location.clone(), e))?;
        let mut raw = RawRecord::default();
        for (name, cell) in columns.iter().zip(row.iter()) {
            if cell.is_empty() {
                continue;
            }
            let number = || {
                cell.parse::<f64>()
                    .map_err(|_| Error::schema(location.clone(), format!("field {name} = {cell:?} is not a number")))
            };
            match *name {
                "lat" => raw.lat = number()?,
                "lon" => raw.lon = number()?,
                "pB" => raw.p_below = Some(number()?),
                "pN" => raw.p_near = Some(number()?),
                "pA" => raw.p_above = Some(number()?),
                "mu" => raw.mu = Some(number()?),
                "sigma" => raw.sigma = Some(number()?),
                "mu_c" => raw.mu_c = Some(number()?),
                "sigma_c" => raw.sigma_c = Some(number()?),
                "obs" => raw.obs = Some(cell.to_string()),
                "obs_value" => raw.obs_value = Some(number()?),
                _ => unreachable!("columns validated above"),
            }
        }
        for (name, cell) in columns.iter().zip(row.iter()) {
            if (*name == "lat" || *name == "lon") && cell.is_empty() {
                return Err(Error::schema(location, format!("field {name} is empty")));
            }
        }
        records.push(raw.into_record(&location)?);
    }
    Ok(Dataset::new(records))
}

/// Chooses the parser from the leading byte: JSON documents start with `{`.
pub fn parse_auto(bytes: &[u8]) -> Result<Dataset> {
    let first = bytes.iter().find(|b| !b.is_ascii_whitespace());
    if first == Some(&b'{') {
        parse_json(bytes)
    } else {
        parse_csv(bytes)
    }
}
