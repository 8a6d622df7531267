//! Country × year panel: ingestion of the three source files and the
//! variable transforms applied before estimation.
//!
//! Culture scores are min-max scaled per dimension over the included
//! countries, governance indicators are z-scored (pooled over all
//! country-years by default), and GDP per capita becomes a log deviation
//! from the yearly sample mean.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SfaError};

pub const CULTURE_DIMENSIONS: [&str; 6] = ["pdi", "idv", "mas", "uai", "lto", "ivr"];
pub const INDICATORS: [&str; 6] = ["VA", "PV", "GE", "RQ", "RL", "CC"];
pub const GDP_LEVEL: &str = "gdp_level";

/// Raw culture scores for one country, on the publisher's scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryRecord {
    pub country_id: String,
    pub culture_raw: Vec<f64>,
}

/// One raw country-year row assembled from the governance and GDP files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub country_id: String,
    pub year: i32,
    pub outputs: Vec<Option<f64>>,
    pub gdp_pc: Option<f64>,
}

/// A transformed country-year observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// Index into [`PanelDataset::countries`].
    pub country: usize,
    pub year: i32,
    pub controls: Vec<f64>,
    pub outputs: Vec<Option<f64>>,
}

/// Unbalanced panel ready for estimation.
///
/// Countries are sorted by id and observations by (country, year).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    pub input_names: Vec<String>,
    pub control_names: Vec<String>,
    pub output_names: Vec<String>,
    pub countries: Vec<CountryRecord>,
    /// Scaled, time-invariant inputs per country.
    pub inputs: Vec<Vec<f64>>,
    pub observations: Vec<Observation>,
}

impl PanelDataset {
    /// Assembles a dataset and checks the structural invariants.
    pub fn new(
        input_names: Vec<String>,
        control_names: Vec<String>,
        output_names: Vec<String>,
        countries: Vec<CountryRecord>,
        inputs: Vec<Vec<f64>>,
        mut observations: Vec<Observation>,
    ) -> Result<Self> {
        let n = countries.len();
        if n < 2 {
            return Err(SfaError::DegeneratePanel(format!(
                "{n} country in sample, at least 2 required"
            )));
        }
        if inputs.len() != n {
            return Err(SfaError::DegeneratePanel(
                "input rows do not match country count".into(),
            ));
        }
        let mut ids = BTreeSet::new();
        for c in &countries {
            if !ids.insert(c.country_id.as_str()) {
                return Err(SfaError::DegeneratePanel(format!(
                    "duplicate country id {}",
                    c.country_id
                )));
            }
        }
        for (i, row) in inputs.iter().enumerate() {
            if row.len() != input_names.len() {
                return Err(SfaError::DegeneratePanel(format!(
                    "country {} has {} inputs, expected {}",
                    countries[i].country_id,
                    row.len(),
                    input_names.len()
                )));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(SfaError::DegeneratePanel(format!(
                    "inputs of {} fall outside [0, 1]",
                    countries[i].country_id
                )));
            }
        }
        let mut seen = vec![false; n];
        for obs in &observations {
            if obs.country >= n || obs.controls.len() != control_names.len() || obs.outputs.len() != output_names.len()
            {
                return Err(SfaError::DegeneratePanel(format!(
                    "observation for country index {} year {} is malformed",
                    obs.country, obs.year
                )));
            }
            if obs.controls.iter().any(|v| !v.is_finite()) {
                return Err(SfaError::DegeneratePanel(format!(
                    "non-finite control for country index {} year {}",
                    obs.country, obs.year
                )));
            }
            seen[obs.country] = true;
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(SfaError::DegeneratePanel(format!(
                "country {} has no observations",
                countries[i].country_id
            )));
        }
        observations.sort_by_key(|o| (o.country, o.year));
        Ok(Self {
            input_names,
            control_names,
            output_names,
            countries,
            inputs,
            observations,
        })
    }

    pub fn n_countries(&self) -> usize {
        self.countries.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_names.len()
    }

    pub fn n_controls(&self) -> usize {
        self.control_names.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output_names.len()
    }

    /// Distinct years, ascending.
    pub fn years(&self) -> Vec<i32> {
        self.observations
            .iter()
            .map(|o| o.year)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn last_year(&self) -> i32 {
        self.observations.iter().map(|o| o.year).max().unwrap_or(0)
    }

    /// Non-missing rows for one output.
    pub fn output_count(&self, output: usize) -> usize {
        self.observations.iter().filter(|o| o.outputs[output].is_some()).count()
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.output_names.iter().position(|n| n.eq_ignore_ascii_case(name))
    }

    /// Canonical JSON serialization; identical datasets give identical bytes.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("dataset serialization cannot fail")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Standardization {
    /// z-score over all country-years of an indicator.
    #[default]
    Pooled,
    /// z-score within each year separately.
    PerYear,
    /// Use the published values unchanged.
    None,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestConfig {
    /// Inclusive year window; rows outside it are ignored.
    pub year_range: Option<(i32, i32)>,
    pub standardization: Standardization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRow {
    pub file: String,
    pub line: u64,
    pub country_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedCountry {
    pub country_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub n_countries: usize,
    pub n_years: usize,
    /// Country-year rows with GDP and at least one indicator.
    pub n_observations: usize,
    pub observations_per_output: BTreeMap<String, usize>,
    pub dropped_countries: Vec<DroppedCountry>,
    pub dropped_rows: Vec<DroppedRow>,
}

/// Min-max scaling of one culture dimension onto `[0, 1]`.
pub fn scale_culture(raw: &[f64]) -> Result<Vec<f64>> {
    let (min, max) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    if raw.len() < 2 || !(max > min) {
        return Err(SfaError::ConstantValues {
            what: "culture dimension".into(),
        });
    }
    let span = max - min;
    Ok(raw.iter().map(|v| ((v - min) / span).clamp(0.0, 1.0)).collect())
}

/// z-scores with the `n - 1` standard deviation; missing cells stay missing.
pub fn standardize_outputs(values: &[Option<f64>]) -> Result<Vec<Option<f64>>> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let n = present.len();
    if n < 2 {
        return Err(SfaError::ZeroVariance {
            what: format!("indicator with {n} non-missing value(s)"),
        });
    }
    let mean = present.iter().sum::<f64>() / n as f64;
    let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0) || !(sd > f64::EPSILON * mean.abs()) {
        return Err(SfaError::ZeroVariance {
            what: "indicator".into(),
        });
    }
    Ok(values.iter().map(|v| v.map(|v| (v - mean) / sd)).collect())
}

/// GDP level for one year: `ln g_i - ln(mean_j g_j)`.
pub fn gdp_level(gdp_pc: &[f64]) -> Result<Vec<f64>> {
    if gdp_pc.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(&bad) = gdp_pc.iter().find(|g| !(**g > 0.0) || !g.is_finite()) {
        return Err(SfaError::NonPositiveGdp {
            country: String::from("?"),
            year: 0,
            value: bad,
        });
    }
    let ln_mean = (gdp_pc.iter().sum::<f64>() / gdp_pc.len() as f64).ln();
    Ok(gdp_pc.iter().map(|g| g.ln() - ln_mean).collect())
}

/// Reads the culture, governance and GDP files and builds the transformed
/// panel. Countries missing any culture score or all GDP data are dropped
/// and listed in the report.
pub fn load_panel(
    culture_path: &Path,
    wgi_path: &Path,
    gdp_path: &Path,
    config: &IngestConfig,
) -> Result<(PanelDataset, IngestReport)> {
    let mut report = IngestReport {
        n_countries: 0,
        n_years: 0,
        n_observations: 0,
        observations_per_output: BTreeMap::new(),
        dropped_countries: Vec::new(),
        dropped_rows: Vec::new(),
    };
    let in_range = |year: i32| match config.year_range {
        Some((lo, hi)) => (lo..=hi).contains(&year),
        None => true,
    };

    let culture = read_culture(culture_path, &mut report)?;
    let gdp = read_gdp(gdp_path, &in_range)?;
    let wgi = read_wgi(wgi_path, &in_range)?;

    let gdp_countries: BTreeSet<&str> = gdp.keys().map(|(c, _)| c.as_str()).collect();
    let wgi_countries: BTreeSet<&str> = wgi.keys().map(|(c, _)| c.as_str()).collect();

    let mut countries = Vec::new();
    for (id, raw) in &culture {
        if !gdp_countries.contains(id.as_str()) {
            report.dropped_countries.push(DroppedCountry {
                country_id: id.clone(),
                reason: "no GDP data".into(),
            });
        } else if !wgi_countries.contains(id.as_str()) {
            report.dropped_countries.push(DroppedCountry {
                country_id: id.clone(),
                reason: "no governance data".into(),
            });
        } else {
            countries.push(CountryRecord {
                country_id: id.clone(),
                culture_raw: raw.clone(),
            });
        }
    }
    for id in wgi_countries.union(&gdp_countries) {
        if !culture.contains_key(*id) && !report.dropped_countries.iter().any(|d| d.country_id == *id) {
            report.dropped_countries.push(DroppedCountry {
                country_id: id.to_string(),
                reason: "no complete culture record".into(),
            });
        }
    }
    if countries.is_empty() {
        return Err(SfaError::EmptyIntersection);
    }
    let index: BTreeMap<&str, usize> = countries
        .iter()
        .enumerate()
        .map(|(i, c)| (c.country_id.as_str(), i))
        .collect();

    let mut raw_obs = Vec::new();
    for ((id, year), (line, outputs)) in &wgi {
        let Some(&ci) = index.get(id.as_str()) else {
            continue;
        };
        match gdp.get(&(id.clone(), *year)) {
            Some(&(_, g)) => raw_obs.push((
                ci,
                PanelObservation {
                    country_id: id.clone(),
                    year: *year,
                    outputs: outputs.to_vec(),
                    gdp_pc: Some(g),
                },
            )),
            None => report.dropped_rows.push(DroppedRow {
                file: file_label(wgi_path),
                line: *line,
                country_id: id.clone(),
                reason: format!("no GDP for {year}"),
            }),
        }
    }

    // Countries whose governance rows never meet a GDP year end up empty.
    let with_obs: BTreeSet<usize> = raw_obs.iter().map(|(ci, _)| *ci).collect();
    if with_obs.len() != countries.len() {
        let keep: Vec<usize> = (0..countries.len()).filter(|i| with_obs.contains(i)).collect();
        for (i, c) in countries.iter().enumerate() {
            if !with_obs.contains(&i) {
                report.dropped_countries.push(DroppedCountry {
                    country_id: c.country_id.clone(),
                    reason: "no year with both GDP and governance data".into(),
                });
            }
        }
        let remap: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        countries = keep.iter().map(|&i| countries[i].clone()).collect();
        for (ci, _) in raw_obs.iter_mut() {
            *ci = remap[ci];
        }
    }
    report.dropped_countries.sort_by(|a, b| a.country_id.cmp(&b.country_id));

    if countries.is_empty() {
        return Err(SfaError::EmptyIntersection);
    }
    if countries.len() < 2 {
        return Err(SfaError::DegeneratePanel(format!(
            "only {} country survives ingestion, at least 2 required",
            countries[0].country_id
        )));
    }

    let inputs = scale_inputs(&countries)?;

    // GDP level, grouped by year over the sample countries present that year.
    let mut by_year: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (k, (_, o)) in raw_obs.iter().enumerate() {
        by_year.entry(o.year).or_default().push(k);
    }
    let mut levels = vec![0.0; raw_obs.len()];
    for (year, rows) in &by_year {
        let g: Vec<f64> = rows.iter().map(|&k| raw_obs[k].1.gdp_pc.unwrap()).collect();
        let lv = gdp_level(&g).map_err(|_| {
            let k = rows[g.iter().position(|v| !(*v > 0.0)).unwrap_or(0)];
            SfaError::NonPositiveGdp {
                country: raw_obs[k].1.country_id.clone(),
                year: *year,
                value: raw_obs[k].1.gdp_pc.unwrap(),
            }
        })?;
        for (&k, v) in rows.iter().zip(lv) {
            levels[k] = v;
        }
    }

    let mut outputs: Vec<Vec<Option<f64>>> = raw_obs.iter().map(|(_, o)| o.outputs.clone()).collect();
    standardize_panel_outputs(&mut outputs, &raw_obs, &by_year, config.standardization)?;

    let observations: Vec<Observation> = raw_obs
        .iter()
        .zip(levels)
        .zip(outputs)
        .map(|(((ci, o), level), outputs)| Observation {
            country: *ci,
            year: o.year,
            controls: vec![level],
            outputs,
        })
        .collect();

    let dataset = PanelDataset::new(
        CULTURE_DIMENSIONS.iter().map(|s| s.to_string()).collect(),
        vec![GDP_LEVEL.to_string()],
        INDICATORS.iter().map(|s| s.to_string()).collect(),
        countries,
        inputs,
        observations,
    )?;

    report.n_countries = dataset.n_countries();
    report.n_years = dataset.years().len();
    report.n_observations = dataset.observations.len();
    for (j, name) in dataset.output_names.iter().enumerate() {
        report
            .observations_per_output
            .insert(name.clone(), dataset.output_count(j));
    }
    report
        .dropped_rows
        .sort_by(|a, b| (&a.file, a.line).cmp(&(&b.file, b.line)));
    Ok((dataset, report))
}

fn scale_inputs(countries: &[CountryRecord]) -> Result<Vec<Vec<f64>>> {
    let mut inputs = vec![vec![0.0; CULTURE_DIMENSIONS.len()]; countries.len()];
    for (k, name) in CULTURE_DIMENSIONS.iter().enumerate() {
        let raw: Vec<f64> = countries.iter().map(|c| c.culture_raw[k]).collect();
        let scaled = scale_culture(&raw).map_err(|_| SfaError::ConstantValues {
            what: format!("culture dimension {name}"),
        })?;
        for (row, v) in inputs.iter_mut().zip(scaled) {
            row[k] = v;
        }
    }
    Ok(inputs)
}

fn standardize_panel_outputs(
    outputs: &mut [Vec<Option<f64>>],
    raw_obs: &[(usize, PanelObservation)],
    by_year: &BTreeMap<i32, Vec<usize>>,
    mode: Standardization,
) -> Result<()> {
    let groups: Vec<Vec<usize>> = match mode {
        Standardization::None => return Ok(()),
        Standardization::Pooled => vec![(0..raw_obs.len()).collect()],
        Standardization::PerYear => by_year.values().cloned().collect(),
    };
    for (j, name) in INDICATORS.iter().enumerate() {
        for rows in &groups {
            let column: Vec<Option<f64>> = rows.iter().map(|&k| outputs[k][j]).collect();
            // An indicator absent from the whole group has nothing to scale.
            if column.iter().all(Option::is_none) {
                continue;
            }
            let z = standardize_outputs(&column).map_err(|_| SfaError::ZeroVariance {
                what: format!("indicator {name}"),
            })?;
            for (&k, v) in rows.iter().zip(z) {
                outputs[k][j] = v;
            }
        }
    }
    Ok(())
}

fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn open_csv(path: &Path, expected: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| SfaError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| SfaError::MalformedRow {
        file: file_label(path),
        line: 1,
        message: e.to_string(),
    })?;
    let found: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    if found != expected {
        return Err(SfaError::BadHeader {
            file: file_label(path),
            expected: expected.join(","),
            found: found.join(","),
        });
    }
    Ok(reader)
}

struct Row {
    file: String,
    line: u64,
    record: csv::StringRecord,
}

impl Row {
    fn err(&self, message: impl Into<String>) -> SfaError {
        SfaError::MalformedRow {
            file: self.file.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    fn country(&self) -> Result<String> {
        let id = self.record.get(0).unwrap_or("").to_ascii_uppercase();
        if id.is_empty() {
            return Err(self.err("empty country id"));
        }
        Ok(id)
    }

    fn year(&self) -> Result<i32> {
        let raw = self.record.get(1).unwrap_or("");
        raw.parse()
            .map_err(|_| self.err(format!("year `{raw}` is not an integer")))
    }

    /// `None` for an empty field; an error for text that is not a number.
    fn number(&self, col: usize, what: &str) -> Result<Option<f64>> {
        let raw = self.record.get(col).unwrap_or("");
        if raw.is_empty() {
            return Ok(None);
        }
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            _ => Err(self.err(format!("{what} `{raw}` is not a finite number"))),
        }
    }
}

fn rows(path: &Path, expected: &[&str]) -> Result<Vec<Row>> {
    let file = file_label(path);
    let mut reader = open_csv(path, expected)?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = rec.map_err(|e| SfaError::MalformedRow {
            file: file.clone(),
            line: e.position().map(|p| p.line()).unwrap_or(line),
            message: e.to_string(),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        out.push(Row {
            file: file.clone(),
            line: record.position().map(|p| p.line()).unwrap_or(line),
            record,
        });
    }
    Ok(out)
}

fn read_culture(path: &Path, report: &mut IngestReport) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut header = vec!["iso3"];
    header.extend(CULTURE_DIMENSIONS);
    let mut out = BTreeMap::new();
    let mut incomplete = BTreeSet::new();
    for row in rows(path, &header)? {
        let id = row.country()?;
        if out.contains_key(&id) || incomplete.contains(&id) {
            return Err(row.err(format!("duplicate country {id}")));
        }
        let mut values = Vec::with_capacity(CULTURE_DIMENSIONS.len());
        for (k, dim) in CULTURE_DIMENSIONS.iter().enumerate() {
            values.push(row.number(k + 1, dim)?);
        }
        if values.iter().all(Option::is_some) {
            out.insert(id, values.into_iter().flatten().collect());
        } else {
            report.dropped_countries.push(DroppedCountry {
                country_id: id.clone(),
                reason: "incomplete culture record".into(),
            });
            report.dropped_rows.push(DroppedRow {
                file: row.file.clone(),
                line: row.line,
                country_id: id.clone(),
                reason: "missing culture dimension".into(),
            });
            incomplete.insert(id);
        }
    }
    Ok(out)
}

type YearKey = (String, i32);
type WgiRows = BTreeMap<YearKey, (u64, [Option<f64>; 6])>;

fn read_gdp(path: &Path, in_range: &dyn Fn(i32) -> bool) -> Result<BTreeMap<YearKey, (u64, f64)>> {
    let mut out = BTreeMap::new();
    for row in rows(path, &["iso3", "year", "gdp_pc_usd"])? {
        let id = row.country()?;
        let year = row.year()?;
        let Some(g) = row.number(2, "gdp_pc_usd")? else {
            continue;
        };
        if !(g > 0.0) {
            return Err(SfaError::NonPositiveGdp {
                country: id,
                year,
                value: g,
            });
        }
        if !in_range(year) {
            continue;
        }
        if out.insert((id.clone(), year), (row.line, g)).is_some() {
            return Err(row.err(format!("duplicate GDP row for {id} {year}")));
        }
    }
    Ok(out)
}

fn read_wgi(path: &Path, in_range: &dyn Fn(i32) -> bool) -> Result<WgiRows> {
    let mut out = WgiRows::new();
    for row in rows(path, &["iso3", "year", "indicator", "value"])? {
        let id = row.country()?;
        let year = row.year()?;
        let ind = row.record.get(2).unwrap_or("");
        let j = INDICATORS
            .iter()
            .position(|i| i.eq_ignore_ascii_case(ind))
            .ok_or_else(|| row.err(format!("unknown indicator `{ind}`")))?;
        let Some(value) = row.number(3, "value")? else {
            continue;
        };
        if !in_range(year) {
            continue;
        }
        let entry = out.entry((id.clone(), year)).or_insert((row.line, [None; 6]));
        if entry.1[j].is_some() {
            return Err(row.err(format!("duplicate {ind} value for {id} {year}")));
        }
        entry.1[j] = Some(value);
    }
    Ok(out)
}
