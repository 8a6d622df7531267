//! Maximum-likelihood fitting in an unconstrained parametrization.
//!
//! The search vector is `[α, β.., γ.., ln σ², logit θ, μ?, η?]`, with μ
//! present only for the truncated-normal model and η only for the
//! time-decay model. Every finite vector maps back to valid parameters.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SfaError};
use crate::frontier::{FrontierData, FrontierParams, FrontierSpec, TimeModel};
use crate::ols::fit_ols;
use crate::panel_data::PanelDataset;
use crate::special::inv_mills;

/// Logit arguments are clamped here so θ never rounds to 0 or 1.
const LOGIT_BOUND: f64 = 36.0;
const LN_SIGMA2_BOUND: f64 = 700.0;

const THETA_GRID: [f64; 3] = [0.5, 0.8, 0.95];
const MU_GRID: [f64; 3] = [0.0, 0.5, 1.0];
/// σ² start is the OLS residual variance times this factor.
const SIGMA2_INFLATION: f64 = 1.1;
/// Condition number of the unit-diagonal scaled information matrix above
/// which a fit is flagged.
const CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Max-norm of the gradient in the unconstrained space.
    pub gradient_tolerance: f64,
    /// Relative change of the log-likelihood between iterations.
    pub loglik_tolerance: f64,
    pub step_tolerance: f64,
    pub starts: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            gradient_tolerance: 1e-5,
            loglik_tolerance: 1e-9,
            step_tolerance: 1e-10,
            starts: 9,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.gradient_tolerance > 0.0 && self.loglik_tolerance > 0.0 && self.step_tolerance > 0.0) {
            return Err(SfaError::Config("tolerances must be positive".into()));
        }
        if self.starts == 0 {
            return Err(SfaError::Config("at least one start is required".into()));
        }
        if self.max_iterations == 0 {
            return Err(SfaError::Config("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Which parameters are free and where they sit in the search vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub n_inputs: usize,
    pub n_controls: usize,
    pub has_mu: bool,
    pub has_eta: bool,
}

impl ParamLayout {
    pub fn new(spec: &FrontierSpec, n_inputs: usize, n_controls: usize) -> Self {
        Self {
            n_inputs,
            n_controls,
            has_mu: spec.has_mu(),
            has_eta: spec.has_eta(),
        }
    }

    pub fn len(&self) -> usize {
        3 + self.n_inputs + self.n_controls + usize::from(self.has_mu) + usize::from(self.has_eta)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn sigma2_index(&self) -> usize {
        1 + self.n_inputs + self.n_controls
    }

    pub fn theta_index(&self) -> usize {
        self.sigma2_index() + 1
    }

    pub fn mu_index(&self) -> Option<usize> {
        self.has_mu.then(|| self.theta_index() + 1)
    }

    pub fn eta_index(&self) -> Option<usize> {
        self.has_eta.then(|| self.theta_index() + 1 + usize::from(self.has_mu))
    }

    pub fn names(&self, input_names: &[String], control_names: &[String]) -> Vec<String> {
        let mut v = vec!["constant".to_string()];
        v.extend(input_names.iter().cloned());
        v.extend(control_names.iter().cloned());
        v.push("sigma2".into());
        v.push("theta".into());
        if self.has_mu {
            v.push("mu".into());
        }
        if self.has_eta {
            v.push("eta".into());
        }
        v
    }

    /// Parameters in their original units, same ordering as the search vector.
    pub fn to_vector(&self, p: &FrontierParams) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.push(p.alpha);
        v.extend(&p.beta);
        v.extend(&p.gamma);
        v.push(p.sigma2);
        v.push(p.theta);
        if self.has_mu {
            v.push(p.mu);
        }
        if self.has_eta {
            v.push(p.eta);
        }
        v
    }

    pub fn from_vector(&self, v: &[f64]) -> FrontierParams {
        let k = self.n_inputs;
        let l = self.n_controls;
        FrontierParams {
            alpha: v[0],
            beta: v[1..1 + k].to_vec(),
            gamma: v[1 + k..1 + k + l].to_vec(),
            sigma2: v[self.sigma2_index()],
            theta: v[self.theta_index()],
            mu: self.mu_index().map_or(0.0, |i| v[i]),
            eta: self.eta_index().map_or(0.0, |i| v[i]),
        }
    }
}

pub fn to_unconstrained(layout: &ParamLayout, params: &FrontierParams) -> Result<Vec<f64>> {
    params.validate()?;
    let mut v = layout.to_vector(params);
    v[layout.sigma2_index()] = params.sigma2.ln();
    v[layout.theta_index()] = (params.theta / (1.0 - params.theta)).ln();
    Ok(v)
}

pub fn from_unconstrained(layout: &ParamLayout, x: &[f64]) -> Result<FrontierParams> {
    if x.len() != layout.len() {
        return Err(SfaError::InvalidParams(format!(
            "search vector has {} entries, expected {}",
            x.len(),
            layout.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SfaError::InvalidParams("non-finite search vector".into()));
    }
    let mut p = layout.from_vector(x);
    p.sigma2 = x[layout.sigma2_index()].clamp(-LN_SIGMA2_BOUND, LN_SIGMA2_BOUND).exp();
    p.theta = sigmoid(x[layout.theta_index()].clamp(-LOGIT_BOUND, LOGIT_BOUND));
    Ok(p)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Central differences with per-coordinate step `h·max(1, |x_k|)`.
pub fn numerical_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let step = h * x[k].abs().max(1.0);
        probe[k] = x[k] + step;
        let up = f(&probe);
        probe[k] = x[k] - step;
        let down = f(&probe);
        probe[k] = x[k];
        if !(up.is_finite() && down.is_finite()) {
            return Err(SfaError::NonFiniteObjective);
        }
        g.push((up - down) / (2.0 * step));
    }
    Ok(g)
}

/// Symmetric central-difference Hessian with the given per-coordinate steps.
pub fn numerical_hessian<F>(f: F, x: &[f64], steps: &[f64]) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let f0 = f(x);
    if !f0.is_finite() {
        return Err(SfaError::NonFiniteObjective);
    }
    let mut h = vec![vec![0.0; n]; n];
    let mut p = x.to_vec();
    let eval = |p: &[f64]| -> Result<f64> {
        let v = f(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SfaError::NonFiniteObjective)
        }
    };
    for i in 0..n {
        let hi = steps[i];
        p[i] = x[i] + hi;
        let up = eval(&p)?;
        p[i] = x[i] - hi;
        let down = eval(&p)?;
        p[i] = x[i];
        h[i][i] = (up - 2.0 * f0 + down) / (hi * hi);
        for j in 0..i {
            let hj = steps[j];
            let mut corner = |si: f64, sj: f64| -> Result<f64> {
                p[i] = x[i] + si * hi;
                p[j] = x[j] + sj * hj;
                let v = eval(&p);
                p[i] = x[i];
                p[j] = x[j];
                v
            };
            let pp = corner(1.0, 1.0)?;
            let pm = corner(1.0, -1.0)?;
            let mp = corner(-1.0, 1.0)?;
            let mm = corner(-1.0, -1.0)?;
            let v = (pp - pm - mp + mm) / (4.0 * hi * hj);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    Ok(h)
}

/// Outcome of a single local search (minimization).
#[derive(Debug, Clone)]
pub struct LocalSearch {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_max_norm: f64,
    /// Objective after each accepted iteration, starting with the initial value.
    pub trace: Vec<f64>,
}

const GRADIENT_STEP: f64 = 1e-5;
const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
const MAX_TRIAL_STEP: f64 = 5.0;
const MAX_SIMPLEX_RESTARTS: usize = 5;
const MAX_POLISH_ROUNDS: usize = 3;
const MAX_POLISH_STEPS: usize = 8;
const POLISH_HESSIAN_STEP: f64 = 1e-4;

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

/// BFGS on numerical gradients with Armijo backtracking, falling back to a
/// Nelder-Mead simplex when the line search stalls. Non-finite objective
/// values are treated as `+inf` and rejected by the line search.
pub fn minimize<F>(f: F, x0: &[f64], options: &FitOptions) -> Result<LocalSearch>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let safe = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut x = DVector::from_column_slice(x0);
    let mut fx = safe(x.as_slice());
    if !fx.is_finite() {
        return Err(SfaError::NonFiniteObjective);
    }
    let mut g = DVector::from_vec(numerical_gradient(safe, x.as_slice(), GRADIENT_STEP)?);
    let mut hinv = DMatrix::<f64>::identity(n, n);
    let mut identity = true;
    let mut trace = vec![fx];
    let mut iterations = 0;
    let mut converged = false;
    let mut simplex_restarts = 0;
    let mut polish_rounds = 0;

    while iterations < options.max_iterations {
        iterations += 1;
        let mut d = -(&hinv * &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            hinv.fill_with_identity();
            identity = true;
            d = -g.clone();
            slope = g.dot(&d);
        }
        let mut t = (MAX_TRIAL_STEP / d.amax().max(f64::MIN_POSITIVE)).min(1.0);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + t * &d;
            let ft = safe(trial.as_slice());
            if ft.is_finite() && ft <= fx + ARMIJO_C1 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }

        let stalled = match &accepted {
            None => true,
            Some((trial, ft)) => {
                let step = (trial - &x).amax();
                step < options.step_tolerance
                    && (fx - ft).abs() <= options.loglik_tolerance * fx.abs().max(1.0)
                    && max_norm(g.as_slice()) > options.gradient_tolerance
            }
        };
        if stalled {
            if max_norm(g.as_slice()) <= options.gradient_tolerance {
                converged = true;
                break;
            }
            // Near a sharply curved optimum the decrease left is below the
            // rounding of f; Newton steps on the gradient still make progress.
            if polish_rounds < MAX_POLISH_ROUNDS {
                polish_rounds += 1;
                if let Some((xp, fp, gp)) = newton_polish(&safe, &x, fx, &g, options) {
                    x = xp;
                    fx = fp;
                    g = gp;
                    trace.push(fx);
                    hinv.fill_with_identity();
                    identity = true;
                    if max_norm(g.as_slice()) <= options.gradient_tolerance {
                        converged = true;
                        break;
                    }
                    continue;
                }
            }
            if !identity {
                hinv.fill_with_identity();
                identity = true;
                continue;
            }
            if simplex_restarts >= MAX_SIMPLEX_RESTARTS {
                break;
            }
            simplex_restarts += 1;
            let (xs, fs) = nelder_mead(&safe, x.as_slice(), options);
            if fs < fx {
                x = DVector::from_vec(xs);
                fx = fs;
                g = DVector::from_vec(numerical_gradient(safe, x.as_slice(), GRADIENT_STEP)?);
                trace.push(fx);
                continue;
            }
            break;
        }

        let (x_new, f_new) = accepted.expect("stall handled above");
        let g_new = DVector::from_vec(numerical_gradient(safe, x_new.as_slice(), GRADIENT_STEP)?);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let rel = (fx - f_new).abs() / fx.abs().max(1.0);
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if identity {
                hinv *= sy / y.dot(&y);
                identity = false;
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &y;
            let yhy = y.dot(&hy);
            // H+ = H - ρ(Hy s' + s y'H) + (ρ² y'Hy + ρ) s s'
            hinv -= rho * (&hy * s.transpose() + &s * hy.transpose());
            hinv += (rho * rho * yhy + rho) * (&s * s.transpose());
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
        if rel < options.loglik_tolerance && max_norm(g.as_slice()) <= options.gradient_tolerance {
            converged = true;
            break;
        }
    }

    Ok(LocalSearch {
        gradient_max_norm: max_norm(g.as_slice()),
        x: x.as_slice().to_vec(),
        value: fx,
        iterations,
        converged,
        trace,
    })
}

/// Point, objective and gradient after polishing.
type Polished = (DVector<f64>, f64, DVector<f64>);

/// Newton steps `x - H⁻¹g` with a finite-difference Hessian of the
/// gradient, eigenvalues replaced by their magnitudes. A step is kept when
/// it does not raise the objective and lowers the gradient max-norm.
/// Returns `None` when the first step already fails. A non-finite probe
/// ends the polish rather than the fit.
fn newton_polish<F>(f: &F, x: &DVector<f64>, fx: f64, g: &DVector<f64>, options: &FitOptions) -> Option<Polished>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let mut best: Option<Polished> = None;
    let (mut x, mut fx, mut g) = (x.clone(), fx, g.clone());
    'steps: for _ in 0..MAX_POLISH_STEPS {
        let mut h = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            let step = POLISH_HESSIAN_STEP * x[k].abs().max(1.0);
            let mut p = x.clone();
            p[k] += step;
            let Ok(up) = numerical_gradient(f, p.as_slice(), GRADIENT_STEP) else {
                break 'steps;
            };
            p[k] = x[k] - step;
            let Ok(down) = numerical_gradient(f, p.as_slice(), GRADIENT_STEP) else {
                break 'steps;
            };
            for i in 0..n {
                h[(i, k)] = (up[i] - down[i]) / (2.0 * step);
            }
        }
        let h = 0.5 * (&h + h.transpose());
        let eig = h.symmetric_eigen();
        let scale = eig.eigenvalues.amax();
        if !(scale.is_finite() && scale > 0.0) {
            break;
        }
        let inv = eig.eigenvalues.map(|l| 1.0 / l.abs().max(1e-10 * scale));
        let d = -(&eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose() * &g);
        let g_norm = max_norm(g.as_slice());
        let mut t = 1.0;
        let mut taken = false;
        for _ in 0..6 {
            let trial = &x + t * &d;
            let ft = f(trial.as_slice());
            if ft.is_finite() && ft <= fx {
                let Ok(gt) = numerical_gradient(f, trial.as_slice(), GRADIENT_STEP) else {
                    break 'steps;
                };
                let gt = DVector::from_vec(gt);
                if max_norm(gt.as_slice()) < g_norm {
                    x = trial;
                    fx = ft;
                    g = gt;
                    taken = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !taken {
            break;
        }
        best = Some((x.clone(), fx, g.clone()));
        if max_norm(g.as_slice()) <= options.gradient_tolerance {
            break;
        }
    }
    best
}

fn nelder_mead<F>(f: &F, x0: &[f64], options: &FitOptions) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for k in 0..n {
        let mut v = x0.to_vec();
        v[k] += 0.05 * x0[k].abs().max(1.0);
        let fv = f(&v);
        simplex.push((v, fv));
    }
    let max_iter = 200 * n;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let size = simplex[1..]
            .iter()
            .map(|(v, _)| max_norm(&v.iter().zip(&simplex[0].0).map(|(a, b)| a - b).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        if size < options.step_tolerance
            || (worst - best).abs() <= options.loglik_tolerance * 1e-3 * best.abs().max(1.0)
        {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(v, _)| v[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |c: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(m, w)| m + c * (m - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst {
                let xc = along(0.5);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < worst.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let b = simplex[0].0.clone();
                for (v, fv) in simplex.iter_mut().skip(1) {
                    for (vk, bk) in v.iter_mut().zip(&b) {
                        *vk = bk + 0.5 * (*vk - bk);
                    }
                    *fv = f(v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

#[derive(Debug, Clone, Serialize)]
pub struct StartSummary {
    pub index: usize,
    pub theta0: f64,
    pub mu0: f64,
    pub start_loglik: f64,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_max_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub spec: FrontierSpec,
    pub params: FrontierParams,
    pub param_names: Vec<String>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub start_index: usize,
    pub gradient_max_norm: f64,
    /// Hessian of the log-likelihood in the original parametrization,
    /// ordered as `param_names`.
    pub hessian: Vec<Vec<f64>>,
    /// Set when the information matrix is ill-conditioned or indefinite.
    pub condition_flag: bool,
    pub n_obs: usize,
    pub n_countries: usize,
    pub starts: Vec<StartSummary>,
}

/// Expected value of N(μ, σu²) truncated at zero.
fn truncated_mean(mu: f64, sigma_u: f64) -> f64 {
    mu + sigma_u * inv_mills(mu / sigma_u)
}

fn start_points(spec: &FrontierSpec, options: &FitOptions) -> Vec<(f64, f64)> {
    let mut grid: Vec<(f64, f64)> = Vec::new();
    for theta in THETA_GRID {
        if spec.has_mu() {
            for mu in MU_GRID {
                grid.push((theta, mu));
            }
        } else {
            grid.push((theta, 0.0));
        }
    }
    if options.starts <= grid.len() {
        grid.truncate(options.starts);
        return grid;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    while grid.len() < options.starts {
        let theta = rng.random_range(0.3..0.97);
        let mu = if spec.has_mu() { rng.random_range(0.0..1.5) } else { 0.0 };
        grid.push((theta, mu));
    }
    grid
}

/// Maximizes the panel likelihood of one output equation from several
/// starting points and returns the best converged run.
pub fn fit_mle(dataset: &PanelDataset, spec: &FrontierSpec, options: &FitOptions) -> Result<FitResult> {
    options.validate()?;
    let data = FrontierData::from_dataset(dataset, spec.output)?;
    let ols = fit_ols(dataset, spec.output)?;
    let layout = ParamLayout::new(spec, data.n_inputs, data.n_controls);

    if spec.time_model == TimeModel::TimeDecay {
        // The decay model starts from the time-invariant optimum at η = 0.
        let ti_spec = FrontierSpec::new(spec.output, spec.distribution, TimeModel::TimeInvariant);
        let ti = fit_mle(dataset, &ti_spec, options)?;
        return fit_mle_from(dataset, spec, options, &ti.params);
    }
    let starts: Vec<(f64, f64, FrontierParams)> = {
        let s2 = ols.residual_variance * SIGMA2_INFLATION;
        start_points(spec, options)
            .into_iter()
            .map(|(theta, mu)| {
                let su = (theta * s2).sqrt();
                let p = FrontierParams {
                    alpha: ols.beta[0] + truncated_mean(mu, su),
                    beta: ols.beta[1..1 + data.n_inputs].to_vec(),
                    gamma: ols.beta[1 + data.n_inputs..].to_vec(),
                    sigma2: s2,
                    theta,
                    mu,
                    eta: 0.0,
                };
                (theta, mu, p)
            })
            .collect()
    };

    run_starts(dataset, &data, spec, &layout, options, starts)
}

/// Single local search from a given point, η reset to zero. Used to warm
/// start the time-decay model from the time-invariant optimum.
pub fn fit_mle_from(
    dataset: &PanelDataset,
    spec: &FrontierSpec,
    options: &FitOptions,
    start: &FrontierParams,
) -> Result<FitResult> {
    options.validate()?;
    let data = FrontierData::from_dataset(dataset, spec.output)?;
    let layout = ParamLayout::new(spec, data.n_inputs, data.n_controls);
    let mut p = start.pinned(spec);
    p.eta = 0.0;
    run_starts(dataset, &data, spec, &layout, options, vec![(p.theta, p.mu, p)])
}

fn run_starts(
    dataset: &PanelDataset,
    data: &FrontierData,
    spec: &FrontierSpec,
    layout: &ParamLayout,
    options: &FitOptions,
    starts: Vec<(f64, f64, FrontierParams)>,
) -> Result<FitResult> {
    let objective = |x: &[f64]| -> f64 {
        match from_unconstrained(layout, x).and_then(|p| data.loglik(spec, &p)) {
            Ok(v) => -v,
            Err(_) => f64::INFINITY,
        }
    };

    let runs: Vec<Result<(StartSummary, LocalSearch)>> = starts
        .par_iter()
        .enumerate()
        .map(|(index, (theta0, mu0, p0))| {
            let x0 = to_unconstrained(layout, p0)?;
            let start_loglik = -objective(&x0);
            let run = minimize(objective, &x0, options)?;
            Ok((
                StartSummary {
                    index,
                    theta0: *theta0,
                    mu0: *mu0,
                    start_loglik,
                    loglik: -run.value,
                    converged: run.converged,
                    iterations: run.iterations,
                    gradient_max_norm: run.gradient_max_norm,
                },
                run,
            ))
        })
        .collect();

    let mut summaries = Vec::new();
    let mut diagnostics = Vec::new();
    let mut best: Option<(usize, LocalSearch)> = None;
    for (index, run) in runs.into_iter().enumerate() {
        match run {
            Ok((summary, search)) => {
                diagnostics.push(format!(
                    "start {index}: theta0={} mu0={} loglik={} converged={} iterations={} |grad|={:e}",
                    summary.theta0,
                    summary.mu0,
                    summary.loglik,
                    summary.converged,
                    summary.iterations,
                    summary.gradient_max_norm
                ));
                summaries.push(summary);
                if search.converged && best.as_ref().is_none_or(|(_, b)| search.value < b.value) {
                    best = Some((index, search));
                }
            }
            Err(e) => diagnostics.push(format!("start {index}: {e}")),
        }
    }
    let Some((start_index, search)) = best else {
        return Err(SfaError::NoConvergence { diagnostics });
    };

    let params = from_unconstrained(layout, &search.x)?;
    let (hessian, condition_flag) = original_hessian(data, spec, layout, &params)?;
    Ok(FitResult {
        spec: *spec,
        param_names: layout.names(&dataset.input_names, &dataset.control_names),
        loglik: -search.value,
        converged: true,
        iterations: search.iterations,
        start_index,
        gradient_max_norm: search.gradient_max_norm,
        hessian,
        condition_flag,
        n_obs: data.n_obs(),
        n_countries: data.blocks.len(),
        starts: summaries,
        params,
    })
}

const HESSIAN_STEP: f64 = 1e-4;

/// Numerical Hessian of the log-likelihood in the original parametrization.
pub fn original_hessian(
    data: &FrontierData,
    spec: &FrontierSpec,
    layout: &ParamLayout,
    params: &FrontierParams,
) -> Result<(Vec<Vec<f64>>, bool)> {
    let x = layout.to_vector(params);
    let mut steps: Vec<f64> = x.iter().map(|v| HESSIAN_STEP * v.abs().max(1.0)).collect();
    let s2 = layout.sigma2_index();
    let th = layout.theta_index();
    steps[s2] = steps[s2].min(0.25 * params.sigma2);
    steps[th] = steps[th].min(0.25 * params.theta.min(1.0 - params.theta));
    let f = |v: &[f64]| -> f64 { data.loglik(spec, &layout.from_vector(v)).unwrap_or(f64::NAN) };
    let h = numerical_hessian(f, &x, &steps)?;
    let flag = ill_conditioned(&h);
    Ok((h, flag))
}

/// Condition check on `-H` after scaling to unit diagonal.
fn ill_conditioned(h: &[Vec<f64>]) -> bool {
    let n = h.len();
    let info = DMatrix::from_fn(n, n, |i, j| -h[i][j]);
    let d: Vec<f64> = (0..n).map(|i| info[(i, i)]).collect();
    if d.iter().any(|v| !(*v > 0.0)) {
        return true;
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| info[(i, j)] / (d[i] * d[j]).sqrt());
    let eig = scaled.symmetric_eigenvalues();
    let min = eig.min();
    let max = eig.max();
    !(min > 0.0) || max / min > CONDITION_LIMIT
}
