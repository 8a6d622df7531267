//! Monte Carlo estimates of `E[u | ε]` and `E[exp(-u) | ε]`.
//!
//! `mc_conditional` weights draws from the prior of `u` by the likelihood of
//! the residuals (self-normalized importance sampling); it never touches the
//! closed-form posterior. `mc_posterior_direct` samples a given truncated
//! normal directly and is the fallback for near-degenerate posteriors.

use serde::Serialize;

use super::sampling::{sample_truncated_normal, substream};
use crate::error::{Result, SfaError};
use crate::frontier::{FrontierParams, PosteriorMoments};

pub const MIN_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    /// `E[u | ε]`
    pub jlms: f64,
    /// `E[exp(-u) | ε]`
    pub te: f64,
    pub jlms_se: f64,
    pub te_se: f64,
    pub effective_sample_size: f64,
}

fn check_draws(n_draws: usize) -> Result<()> {
    if n_draws < MIN_DRAWS {
        return Err(SfaError::Config(format!(
            "Monte Carlo needs at least {MIN_DRAWS} draws, got {n_draws}"
        )));
    }
    Ok(())
}

pub fn mc_conditional(
    eps: &[f64],
    weights: &[f64],
    params: &FrontierParams,
    n_draws: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_draws(n_draws)?;
    params.validate()?;
    let sigma_u = (params.theta * params.sigma2).sqrt();
    let sigma_v = ((1.0 - params.theta) * params.sigma2).sqrt();
    let mut rng = substream(seed, 0);
    let mut draws = Vec::with_capacity(n_draws);
    let mut log_w = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let u = sample_truncated_normal(params.mu, sigma_u, &mut rng);
        let lw: f64 = eps
            .iter()
            .zip(weights)
            .map(|(e, d)| {
                let r = (e + d * u) / sigma_v;
                -0.5 * r * r
            })
            .sum();
        draws.push(u);
        log_w.push(lw);
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let sw: f64 = w.iter().sum();
    let sw2: f64 = w.iter().map(|x| x * x).sum();
    let ess = sw * sw / sw2;
    if ess < 0.01 * n_draws as f64 {
        return Err(SfaError::EffectiveSampleSize { ess, draws: n_draws });
    }
    let ratio = |g: &dyn Fn(f64) -> f64| -> (f64, f64) {
        let mean = draws.iter().zip(&w).map(|(u, wi)| wi * g(*u)).sum::<f64>() / sw;
        let var = draws
            .iter()
            .zip(&w)
            .map(|(u, wi)| (wi * (g(*u) - mean)).powi(2))
            .sum::<f64>();
        (mean, var.sqrt() / sw)
    };
    let (jlms, jlms_se) = ratio(&|u| u);
    let (te, te_se) = ratio(&|u| (-u).exp());
    Ok(McEstimate {
        jlms,
        te,
        jlms_se,
        te_se,
        effective_sample_size: ess,
    })
}

/// Plain Monte Carlo over draws from the truncated normal `moments`.
pub fn mc_posterior_direct(moments: &PosteriorMoments, n_draws: usize, seed: u64) -> Result<McEstimate> {
    check_draws(n_draws)?;
    let mut rng = substream(seed, 0);
    let mut sum = (0.0, 0.0);
    let mut sum2 = (0.0, 0.0);
    for _ in 0..n_draws {
        let u = if moments.sigma_star > 0.0 {
            sample_truncated_normal(moments.mu_star, moments.sigma_star, &mut rng)
        } else {
            moments.mu_star.max(0.0)
        };
        let e = (-u).exp();
        sum.0 += u;
        sum.1 += e;
        sum2.0 += u * u;
        sum2.1 += e * e;
    }
    let n = n_draws as f64;
    let se = |s: f64, s2: f64| ((s2 / n - (s / n).powi(2)).max(0.0) / (n - 1.0)).sqrt();
    Ok(McEstimate {
        jlms: sum.0 / n,
        te: sum.1 / n,
        jlms_se: se(sum.0, sum2.0),
        te_se: se(sum.1, sum2.1),
        effective_sample_size: n,
    })
}
