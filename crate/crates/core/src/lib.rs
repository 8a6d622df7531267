//! Panel stochastic frontier analysis of how country-level culture scores
//! map to governance outcomes.
//!
//! The pipeline runs from CSV ingestion ([`panel_data`]) through OLS
//! diagnostics ([`ols`]), truncated-normal frontier likelihoods
//! ([`frontier`]), maximum-likelihood fitting ([`optimizer`]), inference and
//! model selection ([`inference`]) to conditional efficiency scores
//! ([`efficiency`]). The [`synthetic`] module generates panels with known
//! latents and carries the quadrature and Monte Carlo oracles used to check
//! the closed forms.

// `!(x > 0.0)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod efficiency;
pub mod error;
pub mod frontier;
pub mod inference;
pub mod ols;
pub mod optimizer;
pub mod panel_data;
pub mod reference;
pub mod special;
pub mod synthetic;

pub use efficiency::{bc_efficiency, jlms, rank_countries, score_panel, EfficiencyScore};
pub use error::{Result, SfaError};
pub use frontier::{
    loglik_panel, posterior_moments, residuals, variance_share, Distribution, FrontierData, FrontierParams,
    FrontierSpec, PosteriorMoments, TimeModel,
};
pub use inference::{model_selection, standard_errors, CoefficientTable, SelectionReport};
pub use ols::{fit_ols, residual_skewness, OlsDiagnostics};
pub use optimizer::{fit_mle, FitOptions, FitResult};
pub use panel_data::{load_panel, IngestConfig, IngestReport, PanelDataset};
