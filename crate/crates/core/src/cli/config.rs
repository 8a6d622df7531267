//! Run configuration: a flat `key = value` file merged with `--key value`
//! overrides from the command line.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Result, SfaError};
use crate::frontier::{FrontierParams, FrontierSpec};
use crate::inference::SelectionRules;
use crate::optimizer::FitOptions;
use crate::panel_data::{IngestConfig, Standardization, INDICATORS};
use crate::reference::{default_truth, published, sample_years, PUBLISHED, SAMPLE_COUNTRIES};

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("data_dir", "directory holding culture.csv, wgi.csv and gdp.csv"),
    ("culture", "culture scores file"),
    ("wgi", "governance indicators file (long format)"),
    ("gdp", "GDP per capita file"),
    ("out", "output directory (default: out)"),
    ("seed", "random seed (default: 0)"),
    ("starts", "optimizer starting points per fit (default: 9)"),
    ("spec", "auto, ti-tn, ti-hn, td-tn or td-hn (default: auto)"),
    ("standardization", "pooled, per-year or none (default: pooled)"),
    ("year_min", "first year kept"),
    ("year_max", "last year kept"),
    ("max_iterations", "optimizer iteration cap (default: 1000)"),
    ("gradient_tolerance", "gradient max-norm at convergence (default: 1e-5)"),
    (
        "loglik_tolerance",
        "relative log-likelihood change at convergence (default: 1e-9)",
    ),
    (
        "eta_threshold",
        "|eta| below this keeps the time-invariant model (default: 0.01)",
    ),
    ("significance", "level at which mu must be significant (default: 0.05)"),
    ("ranking_size", "length of top and bottom lists (default: 5)"),
    ("n_countries", "simulate: number of countries (default: 94)"),
    ("first_year", "simulate: first year (default: 1996)"),
    ("last_year", "simulate: last year (default: 2019)"),
    (
        "skip_years",
        "simulate: comma-separated years left out (default: 1997,1999,2001)",
    ),
    ("missing", "simulate: country-years removed at random (default: 13)"),
    (
        "covariates",
        "simulate: real-shaped, uniform or resample (default: real-shaped)",
    ),
    (
        "truth",
        "simulate: published column name, or per-indicator (default: GE)",
    ),
    ("alpha", "simulate: intercept override"),
    ("beta", "simulate: comma-separated input coefficients override"),
    ("gamma", "simulate: GDP level coefficient override"),
    ("sigma2", "simulate: total variance override"),
    ("theta", "simulate: inefficiency variance share override"),
    ("mu", "simulate: truncation mode override"),
    ("eta", "simulate: decay rate override"),
];

pub fn normalize_key(key: &str) -> String {
    key.trim()
        .trim_start_matches("--")
        .replace('-', "_")
        .to_ascii_lowercase()
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.iter().any(|(k, _)| *k == key) {
        Ok(())
    } else {
        Err(SfaError::Config(format!("unknown key `{key}`")))
    }
}

/// Parses a config file. Lines are `key = value`; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(SfaError::Config(format!(
                "line {}: expected `key = value`, found `{line}`",
                n + 1
            )));
        };
        let key = normalize_key(k);
        check_key(&key)?;
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(SfaError::Config(format!("line {}: duplicate key `{key}`", n + 1)));
        }
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| SfaError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_text(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecChoice {
    Auto,
    Fixed(&'static str),
}

impl SpecChoice {
    pub fn for_output(&self, output: usize) -> Option<FrontierSpec> {
        match self {
            SpecChoice::Auto => None,
            SpecChoice::Fixed(code) => FrontierSpec::from_code(output, code),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateKind {
    RealShaped,
    Uniform,
    Resample,
}

impl CovariateKind {
    pub fn name(&self) -> &'static str {
        match self {
            CovariateKind::RealShaped => "real-shaped",
            CovariateKind::Uniform => "uniform",
            CovariateKind::Resample => "resample",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub n_countries: usize,
    pub years: Vec<i32>,
    pub missing: usize,
    pub covariates: CovariateKind,
    /// Truth per indicator, in indicator order.
    pub truths: Vec<FrontierParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub culture: Option<PathBuf>,
    pub wgi: Option<PathBuf>,
    pub gdp: Option<PathBuf>,
    pub out: PathBuf,
    pub spec: SpecChoice,
    pub fit: FitOptions,
    pub rules: SelectionRules,
    pub ingest: IngestConfig,
    pub ranking_size: usize,
    pub simulate: SimulateConfig,
}

fn parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| SfaError::Config(format!("`{key}`: cannot parse `{v}`"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| SfaError::Config(format!("`{key}`: cannot parse `{s}`")))
        })
        .collect()
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        for key in map.keys() {
            check_key(key)?;
        }
        let data_dir: Option<PathBuf> = map.get("data_dir").map(PathBuf::from);
        let file = |key: &str, default: &str| -> Option<PathBuf> {
            map.get(key)
                .map(PathBuf::from)
                .or_else(|| data_dir.as_ref().map(|d| d.join(default)))
        };

        let spec = match map.get("spec").map(String::as_str).unwrap_or("auto") {
            "auto" => SpecChoice::Auto,
            code => match FrontierSpec::from_code(0, code) {
                Some(s) => SpecChoice::Fixed(s.code()),
                None => {
                    return Err(SfaError::Config(format!(
                        "`spec`: expected auto, ti-tn, ti-hn, td-tn or td-hn, found `{code}`"
                    )))
                }
            },
        };

        let mut fit = FitOptions::default();
        if let Some(v) = parse(map, "seed")? {
            fit.seed = v;
        }
        if let Some(v) = parse(map, "starts")? {
            fit.starts = v;
        }
        if let Some(v) = parse(map, "max_iterations")? {
            fit.max_iterations = v;
        }
        if let Some(v) = parse(map, "gradient_tolerance")? {
            fit.gradient_tolerance = v;
        }
        if let Some(v) = parse(map, "loglik_tolerance")? {
            fit.loglik_tolerance = v;
        }
        fit.validate()?;

        let mut rules = SelectionRules::default();
        if let Some(v) = parse(map, "eta_threshold")? {
            rules.eta_threshold = v;
        }
        if let Some(v) = parse(map, "significance")? {
            rules.significance = v;
        }
        if !(rules.eta_threshold >= 0.0) || !(rules.significance > 0.0 && rules.significance < 1.0) {
            return Err(SfaError::Config("selection thresholds out of range".into()));
        }

        let standardization = match map.get("standardization").map(String::as_str) {
            None | Some("pooled") => Standardization::Pooled,
            Some("per-year") | Some("per_year") => Standardization::PerYear,
            Some("none") => Standardization::None,
            Some(other) => {
                return Err(SfaError::Config(format!(
                    "`standardization`: expected pooled, per-year or none, found `{other}`"
                )))
            }
        };
        let year_min: Option<i32> = parse(map, "year_min")?;
        let year_max: Option<i32> = parse(map, "year_max")?;
        let year_range = match (year_min, year_max) {
            (None, None) => None,
            (lo, hi) => {
                let (lo, hi) = (lo.unwrap_or(i32::MIN), hi.unwrap_or(i32::MAX));
                if lo > hi {
                    return Err(SfaError::Config(format!("year_min {lo} exceeds year_max {hi}")));
                }
                Some((lo, hi))
            }
        };

        let ranking_size = parse(map, "ranking_size")?.unwrap_or(5);
        if ranking_size == 0 {
            return Err(SfaError::Config("`ranking_size` must be positive".into()));
        }

        Ok(Self {
            culture: file("culture", "culture.csv"),
            wgi: file("wgi", "wgi.csv"),
            gdp: file("gdp", "gdp.csv"),
            out: map
                .get("out")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out")),
            spec,
            fit,
            rules,
            ingest: IngestConfig {
                year_range,
                standardization,
            },
            ranking_size,
            simulate: simulate_config(map)?,
        })
    }

    /// The three data files, or a config error naming the missing one.
    pub fn data_files(&self) -> Result<(&Path, &Path, &Path)> {
        fn get<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
            p.as_deref()
                .ok_or_else(|| SfaError::Config(format!("`{key}` (or `data_dir`) is required for this command")))
        }
        Ok((
            get(&self.culture, "culture")?,
            get(&self.wgi, "wgi")?,
            get(&self.gdp, "gdp")?,
        ))
    }
}

fn simulate_config(map: &BTreeMap<String, String>) -> Result<SimulateConfig> {
    let n_countries = parse(map, "n_countries")?.unwrap_or(SAMPLE_COUNTRIES);
    let years = match (map.get("first_year"), map.get("last_year"), map.get("skip_years")) {
        (None, None, None) => sample_years(),
        _ => {
            let first: i32 = parse(map, "first_year")?.unwrap_or(1996);
            let last: i32 = parse(map, "last_year")?.unwrap_or(2019);
            let skip: Vec<i32> = match map.get("skip_years") {
                Some(v) => parse_list("skip_years", v)?,
                None => vec![1997, 1999, 2001],
            };
            (first..=last).filter(|y| !skip.contains(y)).collect()
        }
    };
    if n_countries < 2 || years.is_empty() {
        return Err(SfaError::Config(
            "simulation needs at least 2 countries and 1 year".into(),
        ));
    }
    let missing = parse(map, "missing")?.unwrap_or(13);
    let covariates = match map.get("covariates").map(String::as_str) {
        None | Some("real-shaped") => CovariateKind::RealShaped,
        Some("uniform") => CovariateKind::Uniform,
        Some("resample") => CovariateKind::Resample,
        Some(other) => {
            return Err(SfaError::Config(format!(
                "`covariates`: expected real-shaped, uniform or resample, found `{other}`"
            )))
        }
    };
    let mut truths: Vec<FrontierParams> = match map.get("truth").map(String::as_str) {
        None => vec![default_truth(); INDICATORS.len()],
        Some("per-indicator") => PUBLISHED.iter().map(|c| c.params()).collect(),
        Some(name) => match published(name) {
            Some(c) => vec![c.params(); INDICATORS.len()],
            None => {
                return Err(SfaError::Config(format!(
                    "`truth`: expected an indicator name or per-indicator, found `{name}`"
                )))
            }
        },
    };
    let beta: Option<Vec<f64>> = match map.get("beta") {
        Some(v) => Some(parse_list("beta", v)?),
        None => None,
    };
    if let Some(b) = &beta {
        if b.len() != 6 {
            return Err(SfaError::Config(format!(
                "`beta`: expected 6 values, found {}",
                b.len()
            )));
        }
    }
    for t in &mut truths {
        if let Some(v) = parse(map, "alpha")? {
            t.alpha = v;
        }
        if let Some(b) = &beta {
            t.beta = b.clone();
        }
        if let Some(v) = parse(map, "gamma")? {
            t.gamma = vec![v];
        }
        if let Some(v) = parse(map, "sigma2")? {
            t.sigma2 = v;
        }
        if let Some(v) = parse(map, "theta")? {
            t.theta = v;
        }
        if let Some(v) = parse(map, "mu")? {
            t.mu = v;
        }
        if let Some(v) = parse(map, "eta")? {
            t.eta = v;
        }
        t.validate()
            .map_err(|e| SfaError::Config(format!("simulation truth: {e}")))?;
    }
    Ok(SimulateConfig {
        n_countries,
        years,
        missing,
        covariates,
        truths,
    })
}
