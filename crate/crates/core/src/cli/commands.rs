//! Command bodies. Each writes its files into the configured output
//! directory; outputs depend only on the inputs and the seed.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::{CovariateKind, RunConfig, SpecChoice};
use super::{exit_code, EXIT_OK};
use crate::efficiency::{mean_scores, rank_countries, rank_indicator, score_panel, EfficiencyScore, MeanScore};
use crate::error::{Result, SfaError};
use crate::frontier::{FrontierParams, FrontierSpec};
use crate::inference::{select_output, standard_errors, stars, CoefficientRow, CoefficientTable, OutputSelection};
use crate::ols::{fit_ols, skewness_p_value, OlsDiagnostics};
use crate::optimizer::{fit_mle, FitResult, ParamLayout, StartSummary};
use crate::panel_data::{load_panel, IngestReport, PanelDataset, Standardization, CULTURE_DIMENSIONS, INDICATORS};
use crate::reference::{self, BOTTOM_FIVE, TOP_FIVE};
use crate::synthetic::{generate_panel, make_covariates, sub_seed, CovariateSource, SyntheticPanel};

pub fn dispatch(verb: &str, config: &RunConfig) -> Result<i32> {
    match verb {
        "ingest" => cmd_ingest(config),
        "diagnose" => cmd_diagnose(config),
        "fit" => cmd_fit(config),
        "efficiency" => cmd_efficiency(config),
        "simulate" => cmd_simulate(config),
        "replicate" => cmd_replicate(config),
        other => Err(SfaError::Config(format!("unknown command `{other}`"))),
    }
}

fn out_dir(config: &RunConfig) -> Result<&Path> {
    fs::create_dir_all(&config.out).map_err(|e| SfaError::io(&config.out, e))?;
    Ok(&config.out)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| SfaError::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(path)
}

/// Writes a CSV file from a header and string rows.
fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
    let path = dir.join(name);
    let io = |e: csv::Error| SfaError::io(&path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(&path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    w.flush().map_err(|e| SfaError::io(&path, e))?;
    println!("wrote {}", path.display());
    Ok(path)
}

/// Shortest representation that parses back to the same value, in
/// exponent form for very small or large magnitudes; empty for non-finite
/// numbers.
pub fn num(v: f64) -> String {
    if !v.is_finite() {
        String::new()
    } else if v == 0.0 || (1e-4..1e15).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn load(config: &RunConfig) -> Result<(PanelDataset, IngestReport)> {
    let (culture, wgi, gdp) = config.data_files()?;
    load_panel(culture, wgi, gdp, &config.ingest)
}

#[derive(Serialize)]
struct DatasetSummary<'a> {
    #[serde(flatten)]
    report: &'a IngestReport,
    years: Vec<i32>,
    standardization: Standardization,
}

fn summary<'a>(dataset: &PanelDataset, report: &'a IngestReport, config: &RunConfig) -> DatasetSummary<'a> {
    DatasetSummary {
        report,
        years: dataset.years(),
        standardization: config.ingest.standardization,
    }
}

pub fn cmd_ingest(config: &RunConfig) -> Result<i32> {
    let (dataset, report) = load(config)?;
    let dir = out_dir(config)?;
    write_json(dir, "dataset_summary.json", &summary(&dataset, &report, config))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize)]
struct OlsSummary {
    output: String,
    n_obs: usize,
    r_squared: f64,
    skewness: Option<f64>,
    skewness_p_value: Option<f64>,
    verdict: &'static str,
}

fn ols_summary(output: &str, ols: &OlsDiagnostics) -> OlsSummary {
    OlsSummary {
        output: output.to_string(),
        n_obs: ols.n_obs,
        r_squared: ols.r_squared,
        skewness: ols.skewness,
        skewness_p_value: ols.skewness.map(|s| skewness_p_value(s, ols.n_obs)),
        verdict: match ols.skewness {
            Some(s) if s < 0.0 => "negative skewness",
            Some(_) => "no inefficiency evidence",
            None => "residuals have no spread",
        },
    }
}

/// Everything computed for one output equation.
struct OutputRun {
    output: String,
    ols: Option<OlsDiagnostics>,
    selection: Option<OutputSelection>,
    fit: Option<FitResult>,
    table: Option<CoefficientTable>,
    status: String,
    /// Exit code of the first failure, if any.
    failure: Option<i32>,
}

fn run_output(dataset: &PanelDataset, output: usize, config: &RunConfig) -> OutputRun {
    let mut run = OutputRun {
        output: dataset.output_names[output].clone(),
        ols: None,
        selection: None,
        fit: None,
        table: None,
        status: "ok".into(),
        failure: None,
    };
    let fail = |run: &mut OutputRun, what: &str, e: SfaError| {
        run.status = format!("{what}: {e}");
        run.failure = Some(exit_code(&e));
    };
    match fit_ols(dataset, output) {
        Ok(o) => run.ols = Some(o),
        Err(e) => {
            fail(&mut run, "ols failed", e);
            return run;
        }
    }
    let fit = match config.spec.for_output(output) {
        None => match select_output(dataset, output, &config.fit, &config.rules) {
            Ok(mut sel) => {
                let fit = sel.chosen_fit.take();
                if sel.chosen.is_none() {
                    run.status = sel.verdict.clone();
                }
                run.selection = Some(sel);
                fit
            }
            Err(e) => {
                fail(&mut run, "specification search failed", e);
                return run;
            }
        },
        Some(spec) => match fit_mle(dataset, &spec, &config.fit) {
            Ok(f) => Some(f),
            Err(e) => {
                fail(&mut run, "estimation failed", e);
                return run;
            }
        },
    };
    if let Some(fit) = &fit {
        match standard_errors(fit) {
            Ok(t) => run.table = Some(t),
            Err(e) => fail(&mut run, "standard errors unavailable", e),
        }
    }
    run.fit = fit;
    run
}

fn run_all(dataset: &PanelDataset, config: &RunConfig) -> Vec<OutputRun> {
    (0..dataset.n_outputs())
        .into_par_iter()
        .map(|j| run_output(dataset, j, config))
        .collect()
}

fn first_failure(runs: &[OutputRun]) -> i32 {
    runs.iter().find_map(|r| r.failure).unwrap_or(EXIT_OK)
}

const COEF_HEADER: [&str; 7] = ["output", "parameter", "estimate", "se", "z", "p", "stars"];

fn coef_row(output: &str, r: &CoefficientRow) -> Vec<String> {
    vec![
        output.to_string(),
        r.parameter.clone(),
        num(r.estimate),
        num(r.se),
        num(r.z),
        num(r.p),
        r.stars.clone(),
    ]
}

fn ols_rows(run: &OutputRun) -> Vec<Vec<String>> {
    let Some(ols) = &run.ols else {
        return Vec::new();
    };
    ols.names
        .iter()
        .zip(ols.beta.iter().zip(&ols.se))
        .map(|(n, (b, s))| coef_row(&run.output, &CoefficientRow::new(n.clone(), *b, *s)))
        .collect()
}

fn sfa_rows(run: &OutputRun) -> Vec<Vec<String>> {
    if let Some(t) = &run.table {
        return t.rows.iter().map(|r| coef_row(&run.output, r)).collect();
    }
    // estimates without standard errors
    let Some(fit) = &run.fit else {
        return Vec::new();
    };
    let layout = ParamLayout::new(&fit.spec, fit.params.beta.len(), fit.params.gamma.len());
    fit.param_names
        .iter()
        .zip(layout.to_vector(&fit.params))
        .map(|(n, v)| {
            vec![
                run.output.clone(),
                n.clone(),
                num(v),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ]
        })
        .collect()
}

#[derive(Serialize)]
struct FitMeta<'a> {
    output: &'a str,
    status: &'a str,
    spec: Option<&'static str>,
    loglik: Option<f64>,
    params: Option<&'a FrontierParams>,
    converged: Option<bool>,
    iterations: Option<usize>,
    gradient_max_norm: Option<f64>,
    condition_flag: Option<bool>,
    n_obs: Option<usize>,
    n_countries: Option<usize>,
    best_start: Option<usize>,
    starts: Option<&'a [StartSummary]>,
    selection: Option<&'a OutputSelection>,
}

fn fit_meta(run: &OutputRun) -> FitMeta<'_> {
    let f = run.fit.as_ref();
    FitMeta {
        output: &run.output,
        status: &run.status,
        spec: f.map(|f| f.spec.code()),
        loglik: f.map(|f| f.loglik),
        params: f.map(|f| &f.params),
        converged: f.map(|f| f.converged),
        iterations: f.map(|f| f.iterations),
        gradient_max_norm: f.map(|f| f.gradient_max_norm),
        condition_flag: f.map(|f| f.condition_flag),
        n_obs: f.map(|f| f.n_obs),
        n_countries: f.map(|f| f.n_countries),
        best_start: f.map(|f| f.start_index),
        starts: f.map(|f| f.starts.as_slice()),
        selection: run.selection.as_ref(),
    }
}

#[derive(Serialize)]
struct FitMetaFile<'a> {
    spec: String,
    seed: u64,
    starts: usize,
    outputs: Vec<FitMeta<'a>>,
}

fn write_fit_files(dir: &Path, runs: &[OutputRun], config: &RunConfig) -> Result<()> {
    let ols: Vec<Vec<String>> = runs.iter().flat_map(ols_rows).collect();
    write_csv(dir, "coefficients_ols.csv", &COEF_HEADER, &ols)?;
    let sfa: Vec<Vec<String>> = runs.iter().flat_map(sfa_rows).collect();
    write_csv(dir, "coefficients_sfa.csv", &COEF_HEADER, &sfa)?;
    let meta = FitMetaFile {
        spec: match config.spec {
            SpecChoice::Auto => "auto".into(),
            SpecChoice::Fixed(code) => code.into(),
        },
        seed: config.fit.seed,
        starts: config.fit.starts,
        outputs: runs.iter().map(fit_meta).collect(),
    };
    write_json(dir, "fit_meta.json", &meta)?;
    Ok(())
}

fn report_statuses(runs: &[OutputRun]) {
    for r in runs.iter().filter(|r| r.failure.is_some()) {
        eprintln!("{}: {}", r.output, r.status);
    }
}

#[derive(Serialize)]
struct Diagnostics<'a> {
    outputs: Vec<OlsSummary>,
    selection: Vec<SelectionEntry<'a>>,
}

#[derive(Serialize)]
struct SelectionEntry<'a> {
    output: &'a str,
    status: &'a str,
    result: Option<&'a OutputSelection>,
}

fn diagnostics<'a>(runs: &'a [OutputRun]) -> Diagnostics<'a> {
    Diagnostics {
        outputs: runs
            .iter()
            .filter_map(|r| r.ols.as_ref().map(|o| ols_summary(&r.output, o)))
            .collect(),
        selection: runs
            .iter()
            .map(|r| SelectionEntry {
                output: &r.output,
                status: &r.status,
                result: r.selection.as_ref(),
            })
            .collect(),
    }
}

pub fn cmd_diagnose(config: &RunConfig) -> Result<i32> {
    let (dataset, _) = load(config)?;
    let dir = out_dir(config)?;
    // the specification search always runs here, whatever `spec` says
    let mut auto = config.clone();
    auto.spec = SpecChoice::Auto;
    let runs = run_all(&dataset, &auto);
    write_json(dir, "diagnostics.json", &diagnostics(&runs))?;
    report_statuses(&runs);
    Ok(first_failure(&runs))
}

pub fn cmd_fit(config: &RunConfig) -> Result<i32> {
    let (dataset, _) = load(config)?;
    let dir = out_dir(config)?;
    let runs = run_all(&dataset, config);
    write_fit_files(dir, &runs, config)?;
    report_statuses(&runs);
    Ok(first_failure(&runs))
}

fn scores(dataset: &PanelDataset, runs: &[OutputRun]) -> Result<Vec<EfficiencyScore>> {
    let mut out = Vec::new();
    for fit in runs.iter().filter_map(|r| r.fit.as_ref()) {
        out.extend(score_panel(dataset, fit)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct RankEntry {
    iso3: String,
    te: f64,
}

#[derive(Debug, Clone, Serialize)]
struct RankList {
    name: String,
    n_countries: usize,
    mean_te: f64,
    top: Vec<RankEntry>,
    /// Least efficient first.
    bottom: Vec<RankEntry>,
}

#[derive(Debug, Clone, Serialize)]
struct Rankings {
    ranking_size: usize,
    per_indicator: Vec<RankList>,
    overall: Option<RankList>,
}

fn rank_list(name: &str, ranked: &[MeanScore], k: usize) -> RankList {
    let entry = |m: &MeanScore| RankEntry {
        iso3: m.country_id.clone(),
        te: m.mean_te,
    };
    RankList {
        name: name.to_string(),
        n_countries: ranked.len(),
        mean_te: ranked.iter().map(|m| m.mean_te).sum::<f64>() / ranked.len().max(1) as f64,
        top: ranked.iter().take(k).map(entry).collect(),
        bottom: ranked.iter().rev().take(k).map(entry).collect(),
    }
}

fn rankings(dataset: &PanelDataset, scores: &[EfficiencyScore], k: usize) -> Rankings {
    let per_indicator = (0..dataset.n_outputs())
        .filter(|j| scores.iter().any(|s| s.output_index == *j))
        .map(|j| rank_list(&dataset.output_names[j], &rank_indicator(scores, j), k))
        .collect();
    let overall = if scores.is_empty() {
        None
    } else {
        Some(rank_list("overall", &rank_countries(&mean_scores(scores)), k))
    };
    Rankings {
        ranking_size: k,
        per_indicator,
        overall,
    }
}

fn write_score_files(dir: &Path, dataset: &PanelDataset, scores: &[EfficiencyScore], k: usize) -> Result<Rankings> {
    let rows: Vec<Vec<String>> = scores
        .iter()
        .map(|s| vec![s.country_id.clone(), s.output.clone(), num(s.jlms), num(s.te)])
        .collect();
    write_csv(dir, "efficiency.csv", &["iso3", "indicator", "jlms", "te"], &rows)?;
    let means: Vec<Vec<String>> = mean_scores(scores)
        .iter()
        .map(|m| vec![m.country_id.clone(), num(m.mean_te), m.n_indicators.to_string()])
        .collect();
    write_csv(dir, "efficiency_mean.csv", &["iso3", "mean_te", "n_indicators"], &means)?;
    let r = rankings(dataset, scores, k);
    write_json(dir, "rankings.json", &r)?;
    Ok(r)
}

pub fn cmd_efficiency(config: &RunConfig) -> Result<i32> {
    let (dataset, _) = load(config)?;
    let dir = out_dir(config)?;
    let runs = run_all(&dataset, config);
    let s = scores(&dataset, &runs)?;
    write_score_files(dir, &dataset, &s, config.ranking_size)?;
    report_statuses(&runs);
    Ok(first_failure(&runs))
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    statistic: String,
    output: Option<String>,
    value: Option<f64>,
    band: Option<(f64, f64)>,
    published: Option<f64>,
    detail: Option<String>,
    status: &'static str,
}

impl Check {
    fn band(
        statistic: &str,
        output: Option<&str>,
        value: Option<f64>,
        band: (f64, f64),
        published: Option<f64>,
    ) -> Self {
        let pass = matches!(value, Some(v) if v >= band.0 && v <= band.1);
        Self {
            statistic: statistic.into(),
            output: output.map(str::to_string),
            value,
            band: Some(band),
            published,
            detail: None,
            status: if pass { "pass" } else { "flag" },
        }
    }

    fn boolean(statistic: &str, output: Option<&str>, pass: bool, detail: String) -> Self {
        Self {
            statistic: statistic.into(),
            output: output.map(str::to_string),
            value: None,
            band: None,
            published: None,
            detail: Some(detail),
            status: if pass { "pass" } else { "flag" },
        }
    }
}

#[derive(Serialize)]
struct ReplicationReport {
    n_pass: usize,
    n_flag: usize,
    checks: Vec<Check>,
}

fn replication_checks(dataset: &PanelDataset, runs: &[OutputRun], ranks: &Rankings) -> Vec<Check> {
    let mut checks = vec![
        Check::band(
            "n_countries",
            None,
            Some(dataset.n_countries() as f64),
            (reference::SAMPLE_COUNTRIES as f64, reference::SAMPLE_COUNTRIES as f64),
            Some(reference::SAMPLE_COUNTRIES as f64),
        ),
        Check::band(
            "n_observations",
            None,
            Some(dataset.observations.len() as f64),
            (
                reference::SAMPLE_OBSERVATIONS as f64,
                reference::SAMPLE_OBSERVATIONS as f64,
            ),
            Some(reference::SAMPLE_OBSERVATIONS as f64),
        ),
    ];
    let (r2_lo, r2_hi) = reference::R_SQUARED_BAND;
    for run in runs {
        let name = run.output.as_str();
        let skew = run.ols.as_ref().and_then(|o| o.skewness);
        checks.push(Check::band(
            "ols_skewness",
            Some(name),
            skew,
            reference::SKEWNESS_BAND,
            None,
        ));
        checks.push(Check::band(
            "ols_r_squared",
            Some(name),
            run.ols.as_ref().map(|o| o.r_squared),
            (r2_lo - 0.05, r2_hi + 0.05),
            None,
        ));
        let column = reference::published(name);
        let theta = run.fit.as_ref().map(|f| f.params.theta);
        checks.push(Check::band(
            "theta",
            Some(name),
            theta,
            (0.75, 0.95),
            column.map(|c| c.theta),
        ));
        let mu = run.fit.as_ref().filter(|f| f.spec.has_mu()).map(|f| f.params.mu);
        checks.push(Check::band("mu", Some(name), mu, (0.8, 1.2), column.map(|c| c.mu)));

        // signs of the coefficients significant in the published table
        if let Some(c) = column {
            let mut mismatched = Vec::new();
            for (k, dim) in CULTURE_DIMENSIONS.iter().enumerate() {
                if stars(crate::special::two_sided_p(c.beta[k] / c.beta_se()[k])).is_empty() {
                    continue;
                }
                let ours = run.table.as_ref().and_then(|t| t.get(dim)).map(|r| r.estimate);
                if !matches!(ours, Some(v) if v.signum() == c.beta[k].signum()) {
                    mismatched.push(dim.to_string());
                }
            }
            let detail = if mismatched.is_empty() {
                "signs match".to_string()
            } else {
                format!("sign differs or missing: {}", mismatched.join(", "))
            };
            checks.push(Check::boolean(
                "coefficient_signs",
                Some(name),
                mismatched.is_empty(),
                detail,
            ));
        }
    }
    let published_te = |name: &str| -> Option<f64> {
        match name {
            "GE" => Some(reference::MEAN_TE_BAND.1),
            "CC" => Some(reference::MEAN_TE_BAND.0),
            _ => None,
        }
    };
    for list in &ranks.per_indicator {
        checks.push(Check::band(
            "mean_te",
            Some(&list.name),
            Some(list.mean_te),
            (0.30, 0.48),
            published_te(&list.name),
        ));
    }
    let overlap = |ours: &[RankEntry], theirs: &[&str]| -> (usize, String) {
        let ids: Vec<&str> = ours.iter().map(|e| e.iso3.as_str()).collect();
        let shared = theirs.iter().filter(|c| ids.contains(c)).count();
        (shared, ids.join(", "))
    };
    match &ranks.overall {
        Some(overall) => {
            let (shared, ids) = overlap(&overall.top, &TOP_FIVE);
            checks.push(Check::boolean(
                "top_five",
                None,
                shared >= 3,
                format!("{shared} shared; ours: {ids}"),
            ));
            let (shared, ids) = overlap(&overall.bottom, &BOTTOM_FIVE);
            checks.push(Check::boolean(
                "bottom_five",
                None,
                shared >= 3,
                format!("{shared} shared; ours: {ids}"),
            ));
        }
        None => {
            checks.push(Check::boolean("top_five", None, false, "no scores".into()));
            checks.push(Check::boolean("bottom_five", None, false, "no scores".into()));
        }
    }
    checks
}

pub fn cmd_replicate(config: &RunConfig) -> Result<i32> {
    let (dataset, report) = load(config)?;
    let dir = out_dir(config)?;
    write_json(dir, "dataset_summary.json", &summary(&dataset, &report, config))?;
    let runs = run_all(&dataset, config);
    write_json(dir, "diagnostics.json", &diagnostics(&runs))?;
    write_fit_files(dir, &runs, config)?;
    let s = scores(&dataset, &runs)?;
    // top and bottom lists are compared with the published five
    let ranks = write_score_files(dir, &dataset, &s, config.ranking_size.max(5))?;
    let checks = replication_checks(&dataset, &runs, &ranks);
    let n_pass = checks.iter().filter(|c| c.status == "pass").count();
    let report = ReplicationReport {
        n_pass,
        n_flag: checks.len() - n_pass,
        checks,
    };
    write_json(dir, "replication_report.json", &report)?;
    report_statuses(&runs);
    Ok(first_failure(&runs))
}

#[derive(Serialize)]
struct TruthEntry<'a> {
    indicator: &'a str,
    seed: u64,
    params: &'a FrontierParams,
}

#[derive(Serialize)]
struct TruthFile<'a> {
    seed: u64,
    spec: &'static str,
    covariates: &'static str,
    n_countries: usize,
    years: &'a [i32],
    missing: usize,
    n_observations: usize,
    truths: Vec<TruthEntry<'a>>,
}

/// Simulation specification: the configured one, or time-invariant
/// truncated normal unless a decay rate was given.
fn simulation_spec(config: &RunConfig) -> FrontierSpec {
    match config.spec.for_output(0) {
        Some(s) => s,
        None if config.simulate.truths.iter().any(|t| t.eta != 0.0) => {
            FrontierSpec::from_code(0, "td-tn").expect("valid code")
        }
        None => FrontierSpec::ti_tn(0),
    }
}

pub fn cmd_simulate(config: &RunConfig) -> Result<i32> {
    let sim = &config.simulate;
    let seed = config.fit.seed;
    let spec = simulation_spec(config);
    let real;
    let source = match sim.covariates {
        CovariateKind::RealShaped => CovariateSource::RealShaped,
        CovariateKind::Uniform => CovariateSource::Uniform {
            n_inputs: CULTURE_DIMENSIONS.len(),
        },
        CovariateKind::Resample => {
            real = load(config)?.0;
            CovariateSource::Resample(&real)
        }
    };
    let mut cov = make_covariates(source, sim.n_countries, &sim.years, sub_seed(seed, 0))
        .map_err(|e| SfaError::Config(format!("simulation covariates: {e}")))?;
    cov.drop_observations(sim.missing, sub_seed(seed, 1))?;
    let panels: Vec<(u64, SyntheticPanel)> = sim
        .truths
        .iter()
        .enumerate()
        .map(|(j, truth)| {
            let s = sub_seed(seed, 2 + j as u64);
            generate_panel(truth, &spec, &cov, s).map(|p| (s, p))
        })
        .collect::<Result<_>>()?;

    let dir = out_dir(config)?;
    let culture: Vec<Vec<String>> = cov
        .country_ids
        .iter()
        .zip(&cov.inputs)
        .map(|(id, x)| {
            std::iter::once(id.clone())
                .chain(x.iter().map(|v| num(100.0 * v)))
                .collect()
        })
        .collect();
    let mut header = vec!["iso3"];
    header.extend(CULTURE_DIMENSIONS);
    write_csv(dir, "culture.csv", &header, &culture)?;

    let base = &panels[0].1;
    let gdp: Vec<Vec<String>> = base
        .dataset
        .observations
        .iter()
        .zip(&base.gdp_pc)
        .map(|(o, g)| vec![cov.country_ids[o.country].clone(), o.year.to_string(), num(*g)])
        .collect();
    write_csv(dir, "gdp.csv", &["iso3", "year", "gdp_pc_usd"], &gdp)?;

    let mut wgi = Vec::new();
    let mut latents = Vec::new();
    for (k, o) in base.dataset.observations.iter().enumerate() {
        let id = &cov.country_ids[o.country];
        for (j, (_, p)) in panels.iter().enumerate() {
            let obs = &p.dataset.observations[k];
            wgi.push(vec![
                id.clone(),
                o.year.to_string(),
                INDICATORS[j].to_string(),
                num(obs.outputs[0].expect("generated outputs are complete")),
            ]);
            latents.push(vec![
                id.clone(),
                o.year.to_string(),
                INDICATORS[j].to_string(),
                num(p.latent_u[o.country]),
                num(p.latent_v[k]),
            ]);
        }
    }
    write_csv(dir, "wgi.csv", &["iso3", "year", "indicator", "value"], &wgi)?;
    write_csv(dir, "latents.csv", &["iso3", "year", "indicator", "u", "v"], &latents)?;

    let truth = TruthFile {
        seed,
        spec: spec.code(),
        covariates: sim.covariates.name(),
        n_countries: sim.n_countries,
        years: &sim.years,
        missing: sim.missing,
        n_observations: base.dataset.observations.len(),
        truths: panels
            .iter()
            .zip(INDICATORS)
            .map(|((s, p), name)| TruthEntry {
                indicator: name,
                seed: *s,
                params: &p.truth,
            })
            .collect(),
    };
    write_json(dir, "truth.json", &truth)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [
            0.0,
            1.0,
            -0.1,
            1.106763255123951e-160,
            2.5e20,
            123456.789,
            1e-4,
            9.99e-5,
        ] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(num(1.106763255123951e-160), "1.106763255123951e-160");
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(f64::NAN), "");
    }
}
