//! Panel stochastic frontier with composed error `v - d_it·u`.
//!
//! Output `y_it = α + x_i'β + z_it'γ - d_it·u_i + v_it` with
//! `u_i ~ N(μ, θσ²)` truncated at zero, `v_it ~ N(0, (1-θ)σ²)` and decay
//! weights `d_it = exp(-η(t - T))`, `T` the last sample year. The
//! time-invariant model fixes every `d_it = 1`; the half-normal model fixes
//! `μ = 0`.
//!
//! Conditional on the residuals of country `i`, `u_i` is `N(μ*, σ*²)`
//! truncated at zero with
//!
//! ```text
//! A    = σv² + σu² Σ d²
//! σ*²  = σu² σv² / A
//! μ*   = (μ σv² - σu² Σ d ε) / A
//! ```
//!
//! and the country log-likelihood is
//!
//! ```text
//! -(T/2) ln 2π - ((T-1)/2) ln σv² - ½ ln A + ln Φ(μ*/σ*) - ln Φ(μ/σu)
//!     - ½ (Σ ε²/σv² + μ²/σu² - μ*²/σ*²)
//! ```
//!
//! The last bracket is evaluated in a cancellation-free form, see
//! `quadratic_form`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SfaError};
use crate::panel_data::PanelDataset;
use crate::special::{ln_norm_cdf, LN_SQRT_2PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distribution {
    HalfNormal,
    TruncatedNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeModel {
    TimeInvariant,
    TimeDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FrontierSpec {
    /// Zero-based output column.
    pub output: usize,
    pub distribution: Distribution,
    pub time_model: TimeModel,
}

impl FrontierSpec {
    pub fn new(output: usize, distribution: Distribution, time_model: TimeModel) -> Self {
        Self {
            output,
            distribution,
            time_model,
        }
    }

    /// The final specification used for reporting: time-invariant,
    /// truncated-normal.
    pub fn ti_tn(output: usize) -> Self {
        Self::new(output, Distribution::TruncatedNormal, TimeModel::TimeInvariant)
    }

    pub fn has_mu(&self) -> bool {
        self.distribution == Distribution::TruncatedNormal
    }

    pub fn has_eta(&self) -> bool {
        self.time_model == TimeModel::TimeDecay
    }

    /// Short code used by the CLI: `ti-tn`, `ti-hn`, `td-tn`, `td-hn`.
    pub fn code(&self) -> &'static str {
        match (self.time_model, self.distribution) {
            (TimeModel::TimeInvariant, Distribution::TruncatedNormal) => "ti-tn",
            (TimeModel::TimeInvariant, Distribution::HalfNormal) => "ti-hn",
            (TimeModel::TimeDecay, Distribution::TruncatedNormal) => "td-tn",
            (TimeModel::TimeDecay, Distribution::HalfNormal) => "td-hn",
        }
    }

    pub fn from_code(output: usize, code: &str) -> Option<Self> {
        let (tm, dist) = match code {
            "ti-tn" => (TimeModel::TimeInvariant, Distribution::TruncatedNormal),
            "ti-hn" => (TimeModel::TimeInvariant, Distribution::HalfNormal),
            "td-tn" => (TimeModel::TimeDecay, Distribution::TruncatedNormal),
            "td-hn" => (TimeModel::TimeDecay, Distribution::HalfNormal),
            _ => return None,
        };
        Some(Self::new(output, dist, tm))
    }
}

/// Frontier coefficients and the (σ², θ) variance parametrization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierParams {
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Total variance `σu² + σv²`.
    pub sigma2: f64,
    /// Inefficiency share `σu² / σ²`.
    pub theta: f64,
    pub mu: f64,
    pub eta: f64,
}

impl FrontierParams {
    pub fn validate(&self) -> Result<()> {
        let coef_ok = self.alpha.is_finite()
            && self.beta.iter().all(|b| b.is_finite())
            && self.gamma.iter().all(|g| g.is_finite())
            && self.mu.is_finite()
            && self.eta.is_finite();
        if !coef_ok {
            return Err(SfaError::InvalidParams("non-finite coefficient".into()));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(SfaError::InvalidParams(format!(
                "sigma2 = {} must be positive",
                self.sigma2
            )));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(SfaError::InvalidParams(format!(
                "theta = {} must lie in (0, 1)",
                self.theta
            )));
        }
        if !(self.sigma_u2() > 0.0 && self.sigma_v2() > 0.0) {
            return Err(SfaError::InvalidParams("variance component underflows".into()));
        }
        Ok(())
    }

    pub fn sigma_u2(&self) -> f64 {
        self.theta * self.sigma2
    }

    pub fn sigma_v2(&self) -> f64 {
        (1.0 - self.theta) * self.sigma2
    }

    /// Copy with μ and η pinned to zero where the specification fixes them.
    pub fn pinned(&self, spec: &FrontierSpec) -> Self {
        let mut p = self.clone();
        if !spec.has_mu() {
            p.mu = 0.0;
        }
        if !spec.has_eta() {
            p.eta = 0.0;
        }
        p
    }

    /// Frontier value `α + x'β + z'γ`.
    #[inline]
    pub fn frontier(&self, inputs: &[f64], controls: &[f64]) -> f64 {
        self.alpha
            + inputs.iter().zip(&self.beta).map(|(x, b)| x * b).sum::<f64>()
            + controls.iter().zip(&self.gamma).map(|(z, g)| z * g).sum::<f64>()
    }
}

/// Share of the total variance attributed to inefficiency.
pub fn variance_share(params: &FrontierParams) -> f64 {
    params.theta
}

/// Parameters of the truncated-normal posterior of `u_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorMoments {
    pub mu_star: f64,
    pub sigma_star: f64,
}

/// Observations of one country for one output equation.
#[derive(Debug, Clone, PartialEq)]
pub struct CountryBlock {
    /// Index into the dataset's country list.
    pub country: usize,
    pub inputs: Vec<f64>,
    pub years: Vec<i32>,
    /// Row-major `T_i × L`.
    pub controls: Vec<f64>,
    pub y: Vec<f64>,
}

impl CountryBlock {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn controls_at(&self, t: usize, n_controls: usize) -> &[f64] {
        &self.controls[t * n_controls..(t + 1) * n_controls]
    }
}

/// Estimation view of a single output equation: non-missing rows grouped by
/// country in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierData {
    pub output: usize,
    pub n_inputs: usize,
    pub n_controls: usize,
    /// Reference year `T` of the decay weights.
    pub last_year: i32,
    pub blocks: Vec<CountryBlock>,
}

impl FrontierData {
    pub fn from_dataset(dataset: &PanelDataset, output: usize) -> Result<Self> {
        if output >= dataset.n_outputs() {
            return Err(SfaError::Config(format!("output index {output} out of range")));
        }
        let mut blocks: Vec<CountryBlock> = Vec::new();
        for obs in &dataset.observations {
            let Some(y) = obs.outputs[output] else {
                continue;
            };
            if blocks.last().map(|b| b.country) != Some(obs.country) {
                blocks.push(CountryBlock {
                    country: obs.country,
                    inputs: dataset.inputs[obs.country].clone(),
                    years: Vec::new(),
                    controls: Vec::new(),
                    y: Vec::new(),
                });
            }
            let b = blocks.last_mut().expect("pushed above");
            b.years.push(obs.year);
            b.controls.extend_from_slice(&obs.controls);
            b.y.push(y);
        }
        if blocks.is_empty() {
            return Err(SfaError::DegeneratePanel(format!(
                "output {} has no observations",
                dataset.output_names[output]
            )));
        }
        Ok(Self {
            output,
            n_inputs: dataset.n_inputs(),
            n_controls: dataset.n_controls(),
            last_year: dataset.last_year(),
            blocks,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.blocks.iter().map(CountryBlock::len).sum()
    }

    /// `ε_it = y_it - α - x_i'β - z_it'γ` per country.
    pub fn residuals(&self, params: &FrontierParams) -> Vec<Vec<f64>> {
        self.blocks.iter().map(|b| self.block_residuals(b, params)).collect()
    }

    fn block_residuals(&self, b: &CountryBlock, params: &FrontierParams) -> Vec<f64> {
        let xb = params.alpha + b.inputs.iter().zip(&params.beta).map(|(x, c)| x * c).sum::<f64>();
        (0..b.len())
            .map(|t| {
                let zg: f64 = b
                    .controls_at(t, self.n_controls)
                    .iter()
                    .zip(&params.gamma)
                    .map(|(z, g)| z * g)
                    .sum();
                b.y[t] - xb - zg
            })
            .collect()
    }

    /// Decay weights `d_it`; all ones when `eta == 0`.
    pub fn weights(&self, block: &CountryBlock, eta: f64) -> Vec<f64> {
        decay_weights(&block.years, self.last_year, eta)
    }

    pub fn posterior(&self, spec: &FrontierSpec, params: &FrontierParams) -> Vec<PosteriorMoments> {
        let p = params.pinned(spec);
        self.blocks
            .iter()
            .map(|b| {
                let eps = self.block_residuals(b, &p);
                posterior_moments(&eps, &self.weights(b, p.eta), &p)
            })
            .collect()
    }

    /// Per-country log-likelihood contributions.
    pub fn country_logliks(&self, spec: &FrontierSpec, params: &FrontierParams) -> Result<Vec<f64>> {
        self.check_dims(params)?;
        params.validate()?;
        let p = params.pinned(spec);
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let eps = self.block_residuals(b, &p);
                let w = self.weights(b, p.eta);
                let ll = match spec.distribution {
                    Distribution::TruncatedNormal => truncated_normal_loglik(&eps, &w, &p),
                    Distribution::HalfNormal => half_normal_loglik(&eps, &w, &p),
                };
                if ll.is_finite() {
                    Ok(ll)
                } else {
                    Err(SfaError::NonFiniteLikelihood { country: i })
                }
            })
            .collect()
    }

    pub fn loglik(&self, spec: &FrontierSpec, params: &FrontierParams) -> Result<f64> {
        Ok(pairwise_sum(&self.country_logliks(spec, params)?))
    }

    fn check_dims(&self, params: &FrontierParams) -> Result<()> {
        if params.beta.len() != self.n_inputs || params.gamma.len() != self.n_controls {
            return Err(SfaError::InvalidParams(format!(
                "expected {} input and {} control coefficients, got {} and {}",
                self.n_inputs,
                self.n_controls,
                params.beta.len(),
                params.gamma.len()
            )));
        }
        Ok(())
    }
}

pub fn decay_weights(years: &[i32], last_year: i32, eta: f64) -> Vec<f64> {
    if eta == 0.0 {
        return vec![1.0; years.len()];
    }
    years.iter().map(|&t| (-eta * f64::from(t - last_year)).exp()).collect()
}

/// Residuals of every country with data for `spec.output`.
pub fn residuals(dataset: &PanelDataset, spec: &FrontierSpec, params: &FrontierParams) -> Result<Vec<Vec<f64>>> {
    let data = FrontierData::from_dataset(dataset, spec.output)?;
    data.check_dims(params)?;
    Ok(data.residuals(params))
}

/// Truncated-normal posterior of `u_i` given its residuals.
pub fn posterior_moments(eps: &[f64], weights: &[f64], params: &FrontierParams) -> PosteriorMoments {
    let su2 = params.sigma_u2();
    let sv2 = params.sigma_v2();
    let (sum_dd, sum_de) = weights
        .iter()
        .zip(eps)
        .fold((0.0, 0.0), |(dd, de), (d, e)| (dd + d * d, de + d * e));
    let a = sv2 + su2 * sum_dd;
    PosteriorMoments {
        mu_star: (params.mu * sv2 - su2 * sum_de) / a,
        sigma_star: (su2 * sv2 / a).sqrt(),
    }
}

/// `Σ ε²/σv² + μ²/σu² - μ*²/σ*²` without the cancellation of the direct
/// form: with `b = Σdε / Σd²` it equals
/// `Σ (ε + μd)² / A + σu² Σd² Σ (ε - b d)² / (A σv²)`.
fn quadratic_form(eps: &[f64], w: &[f64], mu: f64, su2: f64, sv2: f64) -> f64 {
    let (sum_dd, sum_de) = w
        .iter()
        .zip(eps)
        .fold((0.0, 0.0), |(dd, de), (d, e)| (dd + d * d, de + d * e));
    let a = sv2 + su2 * sum_dd;
    // All weights can underflow to zero under a steep decay; the second
    // term then vanishes and `b` is undefined.
    let b = if sum_dd > 0.0 { sum_de / sum_dd } else { 0.0 };
    let (shifted, projected) = w.iter().zip(eps).fold((0.0, 0.0), |(s, r), (d, e)| {
        (s + (e + mu * d).powi(2), r + (e - b * d).powi(2))
    });
    shifted / a + su2 * sum_dd * projected / (a * sv2)
}

fn truncated_normal_loglik(eps: &[f64], w: &[f64], p: &FrontierParams) -> f64 {
    let t = eps.len() as f64;
    let su2 = p.sigma_u2();
    let sv2 = p.sigma_v2();
    let sum_dd: f64 = w.iter().map(|d| d * d).sum();
    let a = sv2 + su2 * sum_dd;
    let m = posterior_moments(eps, w, p);
    -t * LN_SQRT_2PI - 0.5 * (t - 1.0) * sv2.ln() - 0.5 * a.ln() + ln_norm_cdf(m.mu_star / m.sigma_star)
        - ln_norm_cdf(p.mu / su2.sqrt())
        - 0.5 * quadratic_form(eps, w, p.mu, su2, sv2)
}

/// Half-normal case, `ln Φ(0) = -ln 2`.
fn half_normal_loglik(eps: &[f64], w: &[f64], p: &FrontierParams) -> f64 {
    let t = eps.len() as f64;
    let su2 = p.sigma_u2();
    let sv2 = p.sigma_v2();
    let mut sum_dd = 0.0;
    let mut sum_de = 0.0;
    for (d, e) in w.iter().zip(eps) {
        sum_dd += d * d;
        sum_de += d * e;
    }
    let a = sv2 + su2 * sum_dd;
    let z = -su2 * sum_de / a / (su2 * sv2 / a).sqrt();
    std::f64::consts::LN_2 - t * LN_SQRT_2PI - 0.5 * (t - 1.0) * sv2.ln() - 0.5 * a.ln() + ln_norm_cdf(z)
        - 0.5 * quadratic_form(eps, w, 0.0, su2, sv2)
}

/// Total log-likelihood of the panel for one output equation.
pub fn loglik_panel(dataset: &PanelDataset, spec: &FrontierSpec, params: &FrontierParams) -> Result<f64> {
    FrontierData::from_dataset(dataset, spec.output)?.loglik(spec, params)
}

/// Pairwise summation in a fixed order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}
