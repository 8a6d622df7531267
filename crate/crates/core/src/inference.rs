//! Standard errors from the observed information and the three-step
//! specification search (skewness, time decay, truncation mode).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SfaError};
use crate::frontier::{Distribution, FrontierSpec, TimeModel};
use crate::ols::fit_ols;
use crate::optimizer::{fit_mle, fit_mle_from, FitOptions, FitResult};
use crate::panel_data::PanelDataset;
use crate::special::two_sided_p;

/// Significance marks: `***` below 0.001, `**` below 0.01, `*` below 0.05.
/// A p-value equal to a threshold gets the weaker mark.
pub fn stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub parameter: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p: f64,
    pub stars: String,
}

impl CoefficientRow {
    pub fn new(parameter: impl Into<String>, estimate: f64, se: f64) -> Self {
        let z = if se > 0.0 { estimate / se } else { f64::NAN };
        let p = if se > 0.0 { two_sided_p(z) } else { f64::NAN };
        Self {
            parameter: parameter.into(),
            estimate,
            se,
            z,
            p,
            stars: stars(p).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientTable {
    pub rows: Vec<CoefficientRow>,
    pub covariance: Vec<Vec<f64>>,
}

impl CoefficientTable {
    pub fn get(&self, parameter: &str) -> Option<&CoefficientRow> {
        self.rows.iter().find(|r| r.parameter == parameter)
    }

    /// Rows from a Hessian of the log-likelihood at the optimum.
    pub fn from_hessian(names: &[String], estimates: &[f64], hessian: &[Vec<f64>]) -> Result<Self> {
        let n = estimates.len();
        let info = DMatrix::from_fn(n, n, |i, j| -0.5 * (hessian[i][j] + hessian[j][i]));
        let Some(chol) = info.clone().cholesky() else {
            let eig = info.symmetric_eigenvalues();
            return Err(SfaError::NotNegativeDefinite {
                min_eigenvalue: eig.min(),
                max_eigenvalue: eig.max(),
            });
        };
        let cov = chol.inverse();
        let rows = (0..n)
            .map(|k| CoefficientRow::new(names[k].clone(), estimates[k], cov[(k, k)].max(0.0).sqrt()))
            .collect();
        let covariance = (0..n).map(|i| (0..n).map(|j| cov[(i, j)]).collect()).collect();
        Ok(Self { rows, covariance })
    }
}

/// Standard errors from the inverse negative Hessian of a converged fit.
pub fn standard_errors(fit: &FitResult) -> Result<CoefficientTable> {
    if !fit.converged {
        return Err(SfaError::InvalidParams("fit did not converge".into()));
    }
    let layout = crate::optimizer::ParamLayout::new(&fit.spec, fit.params.beta.len(), fit.params.gamma.len());
    CoefficientTable::from_hessian(&fit.param_names, &layout.to_vector(&fit.params), &fit.hessian)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionRules {
    /// |η| below this keeps the time-invariant model.
    pub eta_threshold: f64,
    /// μ must be significant at this level to keep the truncated normal.
    pub significance: f64,
}

impl Default for SelectionRules {
    fn default() -> Self {
        Self {
            eta_threshold: 0.01,
            significance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputSelection {
    pub output: String,
    pub output_index: usize,
    pub skewness: Option<f64>,
    pub eta: Option<f64>,
    pub mu: Option<f64>,
    pub mu_se: Option<f64>,
    pub mu_p: Option<f64>,
    /// `None` when residuals show no sign of one-sided inefficiency.
    pub chosen: Option<FrontierSpec>,
    pub verdict: String,
    /// Fit of the chosen specification, when it was one of the candidates.
    #[serde(skip)]
    pub chosen_fit: Option<FitResult>,
}

impl OutputSelection {
    /// Re-derives the chosen specification from the recorded statistics.
    pub fn recompute(&self, rules: &SelectionRules) -> Option<FrontierSpec> {
        decide(self.output_index, self.skewness, self.eta, self.mu_p, rules).0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    pub rules: SelectionRules,
    pub outputs: Vec<OutputSelection>,
}

fn decide(
    output: usize,
    skewness: Option<f64>,
    eta: Option<f64>,
    mu_p: Option<f64>,
    rules: &SelectionRules,
) -> (Option<FrontierSpec>, String) {
    match skewness {
        Some(s) if s < 0.0 => {}
        _ => return (None, "no inefficiency evidence".into()),
    }
    let time_model = match eta {
        Some(e) if e.abs() >= rules.eta_threshold => TimeModel::TimeDecay,
        _ => TimeModel::TimeInvariant,
    };
    let distribution = match mu_p {
        Some(p) if p < rules.significance => Distribution::TruncatedNormal,
        _ => Distribution::HalfNormal,
    };
    let spec = FrontierSpec::new(output, distribution, time_model);
    let verdict = format!("negative skewness; chose {}", spec.code());
    (Some(spec), verdict)
}

/// Runs the specification search for one output.
pub fn select_output(
    dataset: &PanelDataset,
    output: usize,
    options: &FitOptions,
    rules: &SelectionRules,
) -> Result<OutputSelection> {
    let ols = fit_ols(dataset, output)?;
    let name = dataset.output_names[output].clone();
    let skewness = ols.skewness;
    if !matches!(skewness, Some(s) if s < 0.0) {
        let (chosen, verdict) = decide(output, skewness, None, None, rules);
        return Ok(OutputSelection {
            output: name,
            output_index: output,
            skewness,
            eta: None,
            mu: None,
            mu_se: None,
            mu_p: None,
            chosen,
            verdict,
            chosen_fit: None,
        });
    }

    let ti = fit_mle(dataset, &FrontierSpec::ti_tn(output), options)?;
    let td_spec = FrontierSpec::new(output, Distribution::TruncatedNormal, TimeModel::TimeDecay);
    let td = fit_mle_from(dataset, &td_spec, options, &ti.params)?;
    let eta = td.params.eta;
    let tn_fit = if eta.abs() >= rules.eta_threshold { td } else { ti };
    let mu_row = standard_errors(&tn_fit).ok().and_then(|t| t.get("mu").cloned());
    let mu_p = mu_row.as_ref().map(|r| r.p).filter(|p| p.is_finite());
    let (chosen, verdict) = decide(output, skewness, Some(eta), mu_p, rules);

    let chosen_fit = match chosen {
        Some(spec) if spec == tn_fit.spec => Some(tn_fit.clone()),
        Some(spec) => Some(fit_mle(dataset, &spec, options)?),
        None => None,
    };
    Ok(OutputSelection {
        output: name,
        output_index: output,
        skewness,
        eta: Some(eta),
        mu: Some(tn_fit.params.mu),
        mu_se: mu_row.as_ref().map(|r| r.se),
        mu_p,
        chosen,
        verdict,
        chosen_fit,
    })
}

/// Specification search over every output of the dataset.
pub fn model_selection(
    dataset: &PanelDataset,
    options: &FitOptions,
    rules: &SelectionRules,
) -> Result<SelectionReport> {
    let outputs = (0..dataset.n_outputs())
        .into_par_iter()
        .map(|j| select_output(dataset, j, options, rules))
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionReport { rules: *rules, outputs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn star_thresholds() {
        assert_eq!(stars(0.0009), "***");
        assert_eq!(stars(0.001), "**");
        assert_eq!(stars(0.01), "*");
        assert_eq!(stars(0.05), "");
        assert_eq!(stars(1.0), "");
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn gdp_row_example() {
        let row = CoefficientRow::new("gdp_level", 0.318, 0.017);
        assert_abs_diff_eq!(row.z, 18.7, epsilon = 0.01);
        assert_eq!(row.stars, "***");
        let zero = CoefficientRow::new("x", 0.0, 0.3);
        assert_eq!(zero.p, 1.0);
        assert_eq!(zero.stars, "");
    }

    #[test]
    fn quadratic_objective_ses() {
        // ℓ(x) = -½ x'Ax, A = [[4, 1], [1, 2]], A⁻¹ = [[2, -1], [-1, 4]] / 7
        let h = vec![vec![-4.0, -1.0], vec![-1.0, -2.0]];
        let names = vec!["a".to_string(), "b".to_string()];
        let t = CoefficientTable::from_hessian(&names, &[0.0, 0.0], &h).unwrap();
        assert_abs_diff_eq!(t.rows[0].se, (2.0f64 / 7.0).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(t.rows[1].se, (4.0f64 / 7.0).sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn indefinite_hessian_is_reported() {
        let h = vec![vec![-1.0, 0.0], vec![0.0, 0.5]];
        let names = vec!["a".to_string(), "b".to_string()];
        match CoefficientTable::from_hessian(&names, &[0.0, 0.0], &h) {
            Err(SfaError::NotNegativeDefinite { min_eigenvalue, .. }) => {
                assert_abs_diff_eq!(min_eigenvalue, -0.5, epsilon = 1e-12)
            }
            other => panic!("expected error, got {other:?}"),
        }
    }

    #[test]
    fn decision_rules() {
        let r = SelectionRules::default();
        assert_eq!(decide(0, Some(0.2), None, None, &r).0, None);
        assert_eq!(decide(0, None, None, None, &r).0, None);
        let s = decide(1, Some(-0.4), Some(0.003), Some(1e-6), &r).0.unwrap();
        assert_eq!(s.code(), "ti-tn");
        let s = decide(1, Some(-0.4), Some(-0.02), Some(0.2), &r).0.unwrap();
        assert_eq!(s.code(), "td-hn");
        let s = decide(1, Some(-0.4), Some(0.01), Some(0.05), &r).0.unwrap();
        assert_eq!(s.code(), "td-hn");
    }

    proptest! {
        #[test]
        fn se_invariant_to_parameter_order(a in 1.0f64..5.0, c in 1.0f64..5.0, b in -0.9f64..0.9) {
            let off = b * (a * c).sqrt();
            let h = vec![vec![-a, -off, 0.0], vec![-off, -c, -0.1], vec![0.0, -0.1, -1.0]];
            let names: Vec<String> = ["x", "y", "w"].iter().map(|s| s.to_string()).collect();
            let t = CoefficientTable::from_hessian(&names, &[1.0, 2.0, 3.0], &h).unwrap();
            let perm = [2usize, 0, 1];
            let hp: Vec<Vec<f64>> = perm.iter().map(|&i| perm.iter().map(|&j| h[i][j]).collect()).collect();
            let np: Vec<String> = perm.iter().map(|&i| names[i].clone()).collect();
            let tp = CoefficientTable::from_hessian(&np, &[3.0, 1.0, 2.0], &hp).unwrap();
            for row in &t.rows {
                let other = tp.get(&row.parameter).unwrap();
                prop_assert!((row.se - other.se).abs() < 1e-12);
            }
        }

        #[test]
        fn stars_follow_p(p in 0.0f64..1.0) {
            let s = stars(p);
            let expected = if p < 0.001 { 3 } else if p < 0.01 { 2 } else if p < 0.05 { 1 } else { 0 };
            prop_assert_eq!(s.len(), expected);
        }
    }
}
