//! Least-squares baseline per output equation and the residual-skewness
//! check for the presence of one-sided inefficiency.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, SfaError};
use crate::panel_data::PanelDataset;
use crate::special::{norm_sf, two_sided_p};

/// Relative threshold on the diagonal of R below which a column is treated
/// as collinear with the ones before it.
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct OlsDiagnostics {
    pub names: Vec<String>,
    pub beta: Vec<f64>,
    /// Classical `s²(X'X)^-1` standard errors.
    pub se: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    /// `None` when the residuals have no spread (exact fit).
    pub skewness: Option<f64>,
    pub n_obs: usize,
    /// `SSR / (n - p)`
    pub residual_variance: f64,
}

impl OlsDiagnostics {
    pub fn p_values(&self) -> Vec<f64> {
        self.beta
            .iter()
            .zip(&self.se)
            .map(|(b, s)| if *s > 0.0 { two_sided_p(b / s) } else { f64::NAN })
            .collect()
    }
}

/// Regressor names in design-matrix order: constant, inputs, controls.
pub fn regressor_names(dataset: &PanelDataset) -> Vec<String> {
    std::iter::once("constant".to_string())
        .chain(dataset.input_names.iter().cloned())
        .chain(dataset.control_names.iter().cloned())
        .collect()
}

/// Design matrix and response for the non-missing rows of one output.
pub fn design(dataset: &PanelDataset, output: usize) -> (DMatrix<f64>, DVector<f64>) {
    let rows: Vec<_> = dataset
        .observations
        .iter()
        .filter_map(|o| o.outputs[output].map(|y| (o, y)))
        .collect();
    let p = 1 + dataset.n_inputs() + dataset.n_controls();
    let x = DMatrix::from_fn(rows.len(), p, |r, c| {
        let (o, _) = rows[r];
        match c {
            0 => 1.0,
            c if c <= dataset.n_inputs() => dataset.inputs[o.country][c - 1],
            c => o.controls[c - 1 - dataset.n_inputs()],
        }
    });
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|(_, y)| *y));
    (x, y)
}

pub fn fit_ols(dataset: &PanelDataset, output: usize) -> Result<OlsDiagnostics> {
    let (x, y) = design(dataset, output);
    ols(&x, &y, regressor_names(dataset))
}

/// Least squares through a Householder QR of the column-normalized design.
/// The first column is expected to be the constant.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>, names: Vec<String>) -> Result<OlsDiagnostics> {
    let (n, p) = x.shape();
    if n < p + 1 {
        return Err(SfaError::TooFewObservations { have: n, need: p });
    }
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let mut scaled = x.clone();
    for (j, &s) in norms.iter().enumerate() {
        if s > 0.0 {
            scaled.column_mut(j).scale_mut(1.0 / s);
        }
    }
    let qr = scaled.qr();
    let r = qr.r();
    let collinear: Vec<String> = (0..p)
        .filter(|&j| norms[j] == 0.0 || r[(j, j)].abs() < RANK_TOLERANCE)
        .map(|j| names.get(j).cloned().unwrap_or_else(|| format!("column {j}")))
        .collect();
    if !collinear.is_empty() {
        return Err(SfaError::RankDeficient { columns: collinear });
    }
    let qty = qr.q().transpose() * y;
    let gamma = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| SfaError::RankDeficient { columns: names.clone() })?;
    let beta: Vec<f64> = gamma.iter().zip(&norms).map(|(g, s)| g / s).collect();
    let beta_v = DVector::from_column_slice(&beta);
    let residuals: Vec<f64> = (y - x * &beta_v).iter().copied().collect();

    let ssr: f64 = residuals.iter().map(|e| e * e).sum();
    let ybar = y.mean();
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    if !(sst > 0.0) {
        return Err(SfaError::ZeroVariance {
            what: "response".into(),
        });
    }
    let r_squared = (1.0 - ssr / sst).clamp(0.0, 1.0);
    let residual_variance = ssr / (n - p) as f64;

    // (X'X)^-1 = S^-1 R^-1 R^-T S^-1 with S the column norms.
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| SfaError::RankDeficient { columns: names.clone() })?;
    let se = (0..p)
        .map(|j| {
            let row = r_inv.row(j);
            (residual_variance * row.norm_squared()).sqrt() / norms[j]
        })
        .collect();

    Ok(OlsDiagnostics {
        names,
        beta,
        se,
        // residuals at rounding level relative to the response carry no shape
        skewness: if ssr > 1e-24 * sst {
            residual_skewness(&residuals).ok()
        } else {
            None
        },
        residuals,
        r_squared,
        n_obs: n,
        residual_variance,
    })
}

/// Moment skewness `m3 / m2^{3/2}` with `1/n` central moments.
pub fn residual_skewness(residuals: &[f64]) -> Result<f64> {
    let n = residuals.len();
    if n < 3 {
        return Err(SfaError::TooFewObservations { have: n, need: 3 });
    }
    let nf = n as f64;
    let mean = residuals.iter().sum::<f64>() / nf;
    let (m2, m3) = residuals.iter().fold((0.0, 0.0), |(m2, m3), e| {
        let d = e - mean;
        (m2 + d * d, m3 + d * d * d)
    });
    let (m2, m3) = (m2 / nf, m3 / nf);
    let scale = residuals.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    if !(m2 > (f64::EPSILON * scale).powi(2) * nf) {
        return Err(SfaError::ZeroVariance {
            what: "residuals".into(),
        });
    }
    Ok(m3 / m2.powf(1.5))
}

/// One-sided p-value for `H0: skewness >= 0` under the normal approximation
/// `sqrt(6/n)`; reported alongside the sign verdict.
pub fn skewness_p_value(skewness: f64, n: usize) -> f64 {
    1.0 - norm_sf(skewness / (6.0 / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("c{j}")).collect()
    }

    #[test]
    fn three_point_fixture() {
        // slope 1/2, intercept 1/6, R² 3/4 from the 2x2 normal equations
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
        let y = DVector::from_column_slice(&[0.0, 1.0, 1.0]);
        let fit = ols(&x, &y, names(2)).unwrap();
        assert_abs_diff_eq!(fit.beta[1], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.beta[0], 1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn exact_hyperplane() {
        let x = DMatrix::from_fn(10, 3, |r, c| match c {
            0 => 1.0,
            1 => r as f64,
            _ => ((r * r) % 7) as f64,
        });
        let y = DVector::from_fn(10, |r, _| 2.0 - 0.5 * r as f64 + 3.0 * ((r * r) % 7) as f64);
        let fit = ols(&x, &y, names(3)).unwrap();
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-10));
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit.skewness.is_none());
    }

    #[test]
    fn rank_deficiency_names_column() {
        let x = DMatrix::from_fn(8, 3, |r, c| match c {
            0 => 1.0,
            1 => r as f64,
            _ => 2.0 * r as f64,
        });
        let y = DVector::from_fn(8, |r, _| (r as f64).sin());
        match ols(&x, &y, vec!["constant".into(), "a".into(), "b".into()]) {
            Err(SfaError::RankDeficient { columns }) => assert_eq!(columns, vec!["b"]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let y = DVector::from_column_slice(&[0.0, 1.0]);
        assert!(matches!(
            ols(&x, &y, names(2)),
            Err(SfaError::TooFewObservations { .. })
        ));
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn skewness_examples() {
        assert_abs_diff_eq!(residual_skewness(&[-1.0, 0.0, 1.0]).unwrap(), 0.0);
        // m2 = 2, m3 = -2
        let s = residual_skewness(&[-2.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(s, -2.0 / 2f64.powf(1.5), epsilon = 1e-15);
        assert_abs_diff_eq!(s, -0.7071, epsilon = 1e-4);
        assert!(residual_skewness(&[3.0, 3.0, 3.0]).is_err());
        assert!(residual_skewness(&[1.0, 2.0]).is_err());
    }

    fn random_design(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, p, |_, c| if c == 0 { 1.0 } else { rng.random::<f64>() });
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>() * 4.0 - 1.0);
        (x, y)
    }

    proptest! {
        #[test]
        fn normal_equations_hold(seed in 0u64..10_000) {
            let (x, y) = random_design(seed, 40, 5);
            let fit = ols(&x, &y, names(5)).unwrap();
            let e = DVector::from_column_slice(&fit.residuals);
            let xte = x.transpose() * &e;
            let scale = x.norm() * y.norm();
            prop_assert!(xte.amax() <= 1e-8 * scale);
            prop_assert!(fit.residuals.iter().sum::<f64>().abs() < 1e-8);
        }

        #[test]
        fn r2_invariant_to_affine_rescaling(seed in 0u64..10_000, a in 0.1f64..50.0, b in -20.0f64..20.0) {
            let (x, y) = random_design(seed, 30, 4);
            let base = ols(&x, &y, names(4)).unwrap().r_squared;
            let mut x2 = x.clone();
            for v in x2.column_mut(2).iter_mut() {
                *v = a * *v + b;
            }
            let moved = ols(&x2, &y, names(4)).unwrap().r_squared;
            prop_assert!((base - moved).abs() < 1e-10);
        }

        #[test]
        fn skewness_invariances(v in prop::collection::vec(-5.0f64..5.0, 3..40), shift in -10.0f64..10.0, scale in 0.1f64..10.0) {
            let Ok(s) = residual_skewness(&v) else { return Ok(()); };
            let moved: Vec<f64> = v.iter().map(|e| scale * e + shift).collect();
            let neg: Vec<f64> = v.iter().map(|e| -e).collect();
            prop_assert!((residual_skewness(&moved).unwrap() - s).abs() < 1e-8);
            prop_assert_eq!(residual_skewness(&neg).unwrap(), -s);
        }
    }
}
