//! Instance builders shared by the integration tests.
#![allow(dead_code)]

use frontier_sfa::panel_data::{CountryRecord, Observation};
use frontier_sfa::synthetic::{
    generate_panel, make_covariates, sample_truncated_normal, CovariateSource, SyntheticPanel,
};
use frontier_sfa::{Distribution, FrontierParams, FrontierSpec, PanelDataset, TimeModel};
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const SPECS: [(Distribution, TimeModel); 4] = [
    (Distribution::HalfNormal, TimeModel::TimeInvariant),
    (Distribution::TruncatedNormal, TimeModel::TimeInvariant),
    (Distribution::HalfNormal, TimeModel::TimeDecay),
    (Distribution::TruncatedNormal, TimeModel::TimeDecay),
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_params<R: Rng>(rng: &mut R, spec: &FrontierSpec, n_inputs: usize, n_controls: usize) -> FrontierParams {
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let alpha = normal();
    let beta = (0..n_inputs).map(|_| 0.5 * normal()).collect();
    let gamma = (0..n_controls).map(|_| 0.5 * normal()).collect();
    let p = FrontierParams {
        alpha,
        beta,
        gamma,
        sigma2: rng.random_range(0.05..2.0),
        theta: rng.random_range(0.05..0.95),
        mu: rng.random_range(-1.5..2.0),
        eta: rng.random_range(-0.4..0.4),
    };
    p.pinned(spec)
}

/// A small unbalanced panel (2 to `max_countries` countries, 1 to 4 years
/// each) with outputs drawn from the model at `params`.
pub fn small_panel<R: Rng>(rng: &mut R, params: &FrontierParams, max_countries: usize) -> PanelDataset {
    let n = rng.random_range(2..=max_countries);
    let k = params.beta.len();
    let years: Vec<i32> = (2016..=2019).collect();
    let last = *years.last().unwrap();
    let countries: Vec<CountryRecord> = (0..n)
        .map(|i| CountryRecord {
            country_id: format!("K{i:02}"),
            culture_raw: vec![0.0; k],
        })
        .collect();
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| rng.random::<f64>()).collect()).collect();
    let sigma_u = params.sigma_u2().sqrt();
    let sigma_v = params.sigma_v2().sqrt();
    let mut observations = Vec::new();
    for (i, x) in inputs.iter().enumerate() {
        let t = rng.random_range(1..=years.len());
        let mut picked: Vec<i32> = sample(rng, years.len(), t).into_iter().map(|j| years[j]).collect();
        picked.sort_unstable();
        let u = sample_truncated_normal(params.mu, sigma_u, rng);
        for year in picked {
            let controls: Vec<f64> = (0..params.gamma.len()).map(|_| rng.sample(StandardNormal)).collect();
            let d = (-params.eta * f64::from(year - last)).exp();
            let v: f64 = sigma_v * rng.sample::<f64, _>(StandardNormal);
            let y = params.frontier(x, &controls) - d * u + v;
            observations.push(Observation {
                country: i,
                year,
                controls,
                outputs: vec![Some(y)],
            });
        }
    }
    PanelDataset::new(
        (0..k).map(|j| format!("x{j}")).collect(),
        (0..params.gamma.len()).map(|j| format!("z{j}")).collect(),
        vec!["y".into()],
        countries,
        inputs,
        observations,
    )
    .expect("valid small panel")
}

/// Panel at `truth` on real-shaped covariates over `years`, with `missing`
/// country-years removed.
pub fn shaped_panel(
    truth: &FrontierParams,
    spec: &FrontierSpec,
    n: usize,
    years: &[i32],
    missing: usize,
    seed: u64,
) -> SyntheticPanel {
    let mut cov = make_covariates(CovariateSource::RealShaped, n, years, seed).unwrap();
    if missing > 0 {
        cov.drop_observations(missing, seed).unwrap();
    }
    generate_panel(truth, spec, &cov, seed + 1000).unwrap()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
