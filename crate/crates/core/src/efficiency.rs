//! Conditional inefficiency and efficiency scores per country.
//!
//! `jlms` is `E[u | ε]` and `bc_efficiency` is `E[exp(-d·u) | ε]` under the
//! truncated-normal posterior. The latter is the canonical score; it lies in
//! `(0, 1)` with 1 meaning on the frontier.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::Result;
use crate::frontier::{FrontierData, PosteriorMoments};
use crate::optimizer::FitResult;
use crate::panel_data::PanelDataset;
use crate::special::{ln_norm_cdf, mills_ratio, truncated_mean_excess, LOWER_TAIL_SWITCH};

/// `E[u | ε] = μ* + σ* φ(μ*/σ*) / Φ(μ*/σ*)`.
pub fn jlms(m: &PosteriorMoments) -> f64 {
    if m.sigma_star == 0.0 {
        return m.mu_star.max(0.0);
    }
    m.sigma_star * truncated_mean_excess(m.mu_star / m.sigma_star)
}

/// `E[exp(-d u) | ε] = exp(-dμ* + d²σ*²/2) Φ(μ*/σ* - dσ*) / Φ(μ*/σ*)`,
/// evaluated in the log domain.
pub fn bc_efficiency(m: &PosteriorMoments, weight: f64) -> f64 {
    let (mu, s, d) = (m.mu_star, m.sigma_star, weight);
    if s == 0.0 {
        return (-d * mu.max(0.0)).exp();
    }
    let z = mu / s;
    if z < LOWER_TAIL_SWITCH {
        // The normal densities cancel the exponential factor exactly,
        // leaving a ratio of Mills ratios with no O(z²) terms.
        return mills_ratio(d * s - z) / mills_ratio(-z);
    }
    (-d * mu + 0.5 * d * d * s * s + ln_norm_cdf(z - d * s) - ln_norm_cdf(z)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyScore {
    pub country_id: String,
    pub output: String,
    pub output_index: usize,
    pub jlms: f64,
    pub te: f64,
    /// `exp(-E[u | ε])`, exported for comparison with `te`.
    pub exp_neg_jlms: f64,
}

/// Scores every country in the estimation sample of `fit`. Decay weights
/// are evaluated at the last sample year, where `d = 1`.
pub fn score_panel(dataset: &PanelDataset, fit: &FitResult) -> Result<Vec<EfficiencyScore>> {
    let data = FrontierData::from_dataset(dataset, fit.spec.output)?;
    let moments = data.posterior(&fit.spec, &fit.params);
    Ok(data
        .blocks
        .iter()
        .zip(moments)
        .map(|(b, m)| {
            let u = jlms(&m);
            EfficiencyScore {
                country_id: dataset.countries[b.country].country_id.clone(),
                output: dataset.output_names[fit.spec.output].clone(),
                output_index: fit.spec.output,
                jlms: u,
                te: bc_efficiency(&m, 1.0),
                exp_neg_jlms: (-u).exp(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanScore {
    pub country_id: String,
    pub mean_te: f64,
    pub n_indicators: usize,
}

/// Arithmetic mean of `te` per country over the indicators it is scored on.
pub fn mean_scores(scores: &[EfficiencyScore]) -> Vec<MeanScore> {
    let mut acc: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for s in scores {
        let e = acc.entry(s.country_id.as_str()).or_insert((0.0, 0));
        e.0 += s.te;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(id, (sum, n))| MeanScore {
            country_id: id.to_string(),
            mean_te: sum / n as f64,
            n_indicators: n,
        })
        .collect()
}

/// Descending by score, ties broken by country id.
pub fn rank_countries(scores: &[MeanScore]) -> Vec<MeanScore> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| {
        b.mean_te
            .total_cmp(&a.mean_te)
            .then_with(|| a.country_id.cmp(&b.country_id))
    });
    v
}

/// Ranking of one indicator's scores.
pub fn rank_indicator(scores: &[EfficiencyScore], output_index: usize) -> Vec<MeanScore> {
    let per: Vec<MeanScore> = scores
        .iter()
        .filter(|s| s.output_index == output_index)
        .map(|s| MeanScore {
            country_id: s.country_id.clone(),
            mean_te: s.te,
            n_indicators: 1,
        })
        .collect();
    rank_countries(&per)
}
