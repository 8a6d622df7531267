//! Synthetic panels with known latents, plus the oracles used to check the
//! closed-form likelihood and efficiency estimators.
//!
//! Randomness is drawn from ChaCha8 with one stream per country
//! ([`sampling::substream`]), so a country's draws never depend on how many
//! draws another country consumed or on thread scheduling.

pub mod montecarlo;
pub mod quadrature;
pub mod sampling;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Result, SfaError};
use crate::frontier::{decay_weights, FrontierParams, FrontierSpec};
use crate::panel_data::{gdp_level, CountryRecord, Observation, PanelDataset, CULTURE_DIMENSIONS, GDP_LEVEL};
use crate::special::norm_cdf;

pub use montecarlo::{mc_conditional, mc_posterior_direct, McEstimate};
pub use quadrature::quadrature_loglik;
pub use sampling::{sample_truncated_normal, substream};

/// Scale used to turn GDP levels back into per-capita values.
const GDP_BASE_LN: f64 = 9.0;

/// Where the regressors of a synthetic panel come from.
#[derive(Debug, Clone, Copy)]
pub enum CovariateSource<'a> {
    /// Independent uniform inputs and a normal GDP level.
    Uniform { n_inputs: usize },
    /// Six correlated culture inputs and a GDP level with the rough
    /// dependence structure of the real sample.
    RealShaped,
    /// Countries of an existing dataset drawn with replacement.
    Resample(&'a PanelDataset),
}

/// Regressors of a synthetic panel, before any outputs are drawn.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Covariates {
    pub input_names: Vec<String>,
    pub country_ids: Vec<String>,
    /// Min-max scaled inputs per country; every dimension spans `[0, 1]`.
    pub inputs: Vec<Vec<f64>>,
    /// Observed years per country, ascending.
    pub years: Vec<Vec<i32>>,
    /// GDP per capita aligned with `years`.
    pub gdp_pc: Vec<Vec<f64>>,
    /// GDP level aligned with `years`, computed per year over all countries.
    pub gdp_level: Vec<Vec<f64>>,
}

impl Covariates {
    pub fn n_countries(&self) -> usize {
        self.country_ids.len()
    }

    pub fn n_observations(&self) -> usize {
        self.years.iter().map(Vec::len).sum()
    }

    pub fn last_year(&self) -> i32 {
        self.years.iter().flatten().copied().max().unwrap_or(0)
    }

    /// Removes `count` country-years chosen at random, never a country's last
    /// remaining year. GDP levels are recomputed afterwards.
    pub fn drop_observations(&mut self, count: usize, seed: u64) -> Result<()> {
        let droppable = self.n_observations().saturating_sub(self.n_countries());
        if count > droppable {
            return Err(SfaError::Config(format!(
                "cannot drop {count} of {} observations",
                self.n_observations()
            )));
        }
        let mut rng = substream(seed, u64::MAX);
        let mut dropped = 0;
        while dropped < count {
            let i = rng.random_range(0..self.n_countries());
            if self.years[i].len() < 2 {
                continue;
            }
            let t = rng.random_range(0..self.years[i].len());
            self.years[i].remove(t);
            self.gdp_pc[i].remove(t);
            dropped += 1;
        }
        self.gdp_level = levels_by_year(&self.years, &self.gdp_pc)?;
        Ok(())
    }
}

fn country_ids(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(3);
    (1..=n).map(|i| format!("C{i:0width$}")).collect()
}

fn min_max_columns(rows: &mut [Vec<f64>]) {
    let k = rows.first().map_or(0, Vec::len);
    for j in 0..k {
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r[j]), hi.max(r[j]))
        });
        let span = hi - lo;
        for r in rows.iter_mut() {
            r[j] = if span > 0.0 {
                ((r[j] - lo) / span).clamp(0.0, 1.0)
            } else {
                0.5
            };
        }
    }
}

/// GDP level per country-year, the deviation of `ln g` from the log of the
/// yearly mean over the countries observed that year.
fn levels_by_year(years: &[Vec<i32>], gdp_pc: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut by_year: std::collections::BTreeMap<i32, Vec<(usize, usize)>> = Default::default();
    for (i, ys) in years.iter().enumerate() {
        for (t, y) in ys.iter().enumerate() {
            by_year.entry(*y).or_default().push((i, t));
        }
    }
    let mut out: Vec<Vec<f64>> = years.iter().map(|ys| vec![0.0; ys.len()]).collect();
    for cells in by_year.values() {
        let g: Vec<f64> = cells.iter().map(|&(i, t)| gdp_pc[i][t]).collect();
        for (&(i, t), v) in cells.iter().zip(gdp_level(&g)?) {
            out[i][t] = v;
        }
    }
    Ok(out)
}

/// Correlations of (PDI, IDV, MAS, UAI, LTO, IVR, GDP level) used by
/// [`CovariateSource::RealShaped`].
fn real_shaped_correlation() -> DMatrix<f64> {
    let mut c = DMatrix::identity(7, 7);
    let pairs = [
        (0, 1, -0.6),
        (0, 3, 0.25),
        (0, 5, -0.3),
        (1, 5, 0.2),
        (4, 5, -0.45),
        (1, 6, 0.55),
        (0, 6, -0.5),
        (4, 6, 0.2),
    ];
    for (i, j, r) in pairs {
        c[(i, j)] = r;
        c[(j, i)] = r;
    }
    c
}

/// Draws regressors for `n_countries` countries observed in every year of
/// `years`. Country `i` uses stream `i` of `seed`.
pub fn make_covariates(
    source: CovariateSource<'_>,
    n_countries: usize,
    years: &[i32],
    seed: u64,
) -> Result<Covariates> {
    if n_countries < 2 {
        return Err(SfaError::DegeneratePanel(format!(
            "{n_countries} country requested, at least 2 required"
        )));
    }
    if years.is_empty() {
        return Err(SfaError::DegeneratePanel("no years requested".into()));
    }
    let mut years = years.to_vec();
    years.sort_unstable();
    years.dedup();
    let first = years[0];

    let mut inputs = Vec::with_capacity(n_countries);
    let mut log_gdp = Vec::with_capacity(n_countries);
    let input_names: Vec<String>;
    match source {
        CovariateSource::Uniform { n_inputs } => {
            input_names = if n_inputs == CULTURE_DIMENSIONS.len() {
                CULTURE_DIMENSIONS.iter().map(|s| s.to_string()).collect()
            } else {
                (1..=n_inputs).map(|k| format!("x{k}")).collect()
            };
            for i in 0..n_countries {
                let mut rng = substream(seed, i as u64);
                inputs.push((0..n_inputs).map(|_| rng.random::<f64>()).collect::<Vec<_>>());
                let level: f64 = rng.sample(StandardNormal);
                log_gdp.push(
                    years
                        .iter()
                        .map(|_| level + 0.1 * rng.sample::<f64, _>(StandardNormal))
                        .collect::<Vec<_>>(),
                );
            }
        }
        CovariateSource::RealShaped => {
            input_names = CULTURE_DIMENSIONS.iter().map(|s| s.to_string()).collect();
            let chol = real_shaped_correlation()
                .cholesky()
                .expect("correlation matrix is positive definite");
            let l = chol.l();
            for i in 0..n_countries {
                let mut rng = substream(seed, i as u64);
                let z = nalgebra::DVector::from_fn(7, |_, _| rng.sample::<f64, _>(StandardNormal));
                let w = &l * z;
                inputs.push((0..6).map(|k| norm_cdf(w[k])).collect::<Vec<_>>());
                let mean = -0.6 + 1.1 * w[6];
                let growth = 0.01 * rng.sample::<f64, _>(StandardNormal);
                log_gdp.push(
                    years
                        .iter()
                        .map(|y| mean + growth * (y - first) as f64 + 0.03 * rng.sample::<f64, _>(StandardNormal))
                        .collect::<Vec<_>>(),
                );
            }
        }
        CovariateSource::Resample(real) => {
            if real.n_controls() != 1 {
                return Err(SfaError::Config(
                    "resampling needs a dataset with exactly one control".into(),
                ));
            }
            input_names = real.input_names.clone();
            let profiles: Vec<Vec<(i32, f64)>> = (0..real.n_countries())
                .map(|c| {
                    real.observations
                        .iter()
                        .filter(|o| o.country == c)
                        .map(|o| (o.year, o.controls[0]))
                        .collect()
                })
                .collect();
            for i in 0..n_countries {
                let mut rng = substream(seed, i as u64);
                let c = rng.random_range(0..real.n_countries());
                inputs.push(real.inputs[c].clone());
                // nearest observed year of the donor country
                log_gdp.push(
                    years
                        .iter()
                        .map(|y| {
                            profiles[c]
                                .iter()
                                .min_by_key(|(yy, _)| ((yy - y).abs(), *yy))
                                .map(|p| p.1)
                                .unwrap_or(0.0)
                        })
                        .collect::<Vec<_>>(),
                );
            }
        }
    }
    min_max_columns(&mut inputs);

    let gdp_pc: Vec<Vec<f64>> = log_gdp
        .iter()
        .map(|row| row.iter().map(|l| (GDP_BASE_LN + l).exp()).collect())
        .collect();
    let all_years = vec![years; n_countries];
    let gdp_level = levels_by_year(&all_years, &gdp_pc)?;
    Ok(Covariates {
        input_names,
        country_ids: country_ids(n_countries),
        inputs,
        years: all_years,
        gdp_pc,
        gdp_level,
    })
}

/// A generated panel together with the latents that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct SyntheticPanel {
    /// Single-output dataset (output `Y`).
    pub dataset: PanelDataset,
    /// `U_i ≥ 0`, one per country.
    pub latent_u: Vec<f64>,
    /// `V_it`, aligned with `dataset.observations`.
    pub latent_v: Vec<f64>,
    /// GDP per capita aligned with `dataset.observations`.
    pub gdp_pc: Vec<f64>,
    pub truth: FrontierParams,
    pub spec: FrontierSpec,
    pub seed: u64,
}

impl SyntheticPanel {
    /// Largest `|y - (frontier - d·U + V)|` over all observations.
    pub fn reconstruction_error(&self) -> f64 {
        let last = self.dataset.last_year();
        self.dataset
            .observations
            .iter()
            .zip(&self.latent_v)
            .map(|(o, v)| {
                let d = decay_weights(&[o.year], last, self.truth.eta)[0];
                let fit = self.truth.frontier(&self.dataset.inputs[o.country], &o.controls);
                (o.outputs[0].unwrap() - (fit - d * self.latent_u[o.country] + v)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Simulates `y_it = α + x_i'β + z_it'γ - d_it U_i + V_it` on `covariates`.
///
/// μ and η are taken as zero when `spec` fixes them. Country `i` draws
/// `U_i` and then its `V_it` in year order from stream `i` of `seed`.
pub fn generate_panel(
    truth: &FrontierParams,
    spec: &FrontierSpec,
    covariates: &Covariates,
    seed: u64,
) -> Result<SyntheticPanel> {
    generate_panel_with_efficient(truth, spec, covariates, seed, &[])
}

/// As [`generate_panel`], with `U_i` set to zero for the listed countries.
/// The forced countries still consume their draws, so the other countries'
/// latents are unchanged.
pub fn generate_panel_with_efficient(
    truth: &FrontierParams,
    spec: &FrontierSpec,
    covariates: &Covariates,
    seed: u64,
    efficient: &[usize],
) -> Result<SyntheticPanel> {
    let truth = truth.pinned(spec);
    truth.validate()?;
    let n = covariates.n_countries();
    if truth.beta.len() != covariates.input_names.len() || truth.gamma.len() != 1 {
        return Err(SfaError::InvalidParams(format!(
            "truth has {} inputs and {} controls, covariates have {} and 1",
            truth.beta.len(),
            truth.gamma.len(),
            covariates.input_names.len()
        )));
    }
    let sigma_u = truth.sigma_u2().sqrt();
    let sigma_v = truth.sigma_v2().sqrt();
    let last = covariates.last_year();

    let mut latent_u = Vec::with_capacity(n);
    let mut latent_v = Vec::new();
    let mut gdp_pc = Vec::new();
    let mut observations = Vec::new();
    for i in 0..n {
        let mut rng = substream(seed, i as u64);
        let mut u = sample_truncated_normal(truth.mu, sigma_u, &mut rng);
        if efficient.contains(&i) {
            u = 0.0;
        }
        latent_u.push(u);
        let d = decay_weights(&covariates.years[i], last, truth.eta);
        for (t, year) in covariates.years[i].iter().enumerate() {
            let v = sigma_v * rng.sample::<f64, _>(StandardNormal);
            let controls = vec![covariates.gdp_level[i][t]];
            let y = truth.frontier(&covariates.inputs[i], &controls) - d[t] * u + v;
            latent_v.push(v);
            gdp_pc.push(covariates.gdp_pc[i][t]);
            observations.push(Observation {
                country: i,
                year: *year,
                controls,
                outputs: vec![Some(y)],
            });
        }
    }
    let countries = covariates
        .country_ids
        .iter()
        .zip(&covariates.inputs)
        .map(|(id, x)| CountryRecord {
            country_id: id.clone(),
            culture_raw: x.iter().map(|v| 100.0 * v).collect(),
        })
        .collect();
    let dataset = PanelDataset::new(
        covariates.input_names.clone(),
        vec![GDP_LEVEL.to_string()],
        vec!["Y".to_string()],
        countries,
        covariates.inputs.clone(),
        observations,
    )?;
    Ok(SyntheticPanel {
        dataset,
        latent_u,
        latent_v,
        gdp_pc,
        truth,
        spec: *spec,
        seed,
    })
}

/// Seed for the `k`-th of several independent sub-simulations of `seed`.
pub fn sub_seed(seed: u64, k: u64) -> u64 {
    let mut rng = substream(seed, k.wrapping_add(1 << 32));
    rng.random()
}
