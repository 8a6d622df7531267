//! Likelihood by direct numerical integration over the latent inefficiency.
//!
//! Independent of the closed form in `frontier`: residuals, decay weights
//! and densities are recomputed here from the raw dataset.

use std::collections::BinaryHeap;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Result, SfaError};
use crate::frontier::{FrontierParams, FrontierSpec};
use crate::panel_data::PanelDataset;

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 20_000;
const INITIAL_PIECES: usize = 16;
const PEAK_GRID: usize = 4000;

/// 15-point Kronrod estimate and its difference from the embedded 7-point
/// Gauss rule.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = KRONROD_WEIGHTS[7] * fc;
    let mut gauss = GAUSS_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let pair = f(c - x) + f(c + x);
        kronrod += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod integration over `[breaks[0], breaks[last]]`,
/// bisecting the piece with the largest error estimate until the summed
/// error is below `tolerance`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tolerance: f64) -> Result<(f64, f64)> {
    let mut heap = BinaryHeap::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk15(&f, w[0], w[1]);
            heap.push(Piece {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
    }
    loop {
        let error: f64 = heap.iter().map(|p| p.error).sum();
        if error <= tolerance {
            let value = heap.iter().map(|p| p.value).sum();
            return Ok((value, error));
        }
        if heap.len() >= MAX_INTERVALS {
            return Err(SfaError::Quadrature { tolerance, error });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(SfaError::Quadrature { tolerance, error });
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(&f, a, b);
            heap.push(Piece { a, b, value, error });
        }
    }
}

/// Log-likelihood of one output equation with each country's term obtained
/// by integrating `Π_t N(ε_t + d_t u; 0, σv²) · TN(u; μ, σu²)` over
/// `u ∈ [0, ∞)` to absolute tolerance `1e-10` (after scaling the integrand
/// to unit peak).
pub fn quadrature_loglik(dataset: &PanelDataset, spec: &FrontierSpec, params: &FrontierParams) -> Result<f64> {
    params.validate()?;
    let mu = if spec.has_mu() { params.mu } else { 0.0 };
    let eta = if spec.has_eta() { params.eta } else { 0.0 };
    let sigma_u = (params.theta * params.sigma2).sqrt();
    let sigma_v = ((1.0 - params.theta) * params.sigma2).sqrt();
    let std_normal = Normal::standard();
    let ln_trunc_mass = std_normal.cdf(mu / sigma_u).ln();
    let t_max = dataset.observations.iter().map(|o| o.year).max().unwrap_or(0);

    let mut total = 0.0;
    for (i, inputs) in dataset.inputs.iter().enumerate() {
        let mut eps = Vec::new();
        let mut d = Vec::new();
        for o in dataset.observations.iter().filter(|o| o.country == i) {
            let Some(y) = o.outputs[spec.output] else {
                continue;
            };
            let mut fit = params.alpha;
            for (x, b) in inputs.iter().zip(&params.beta) {
                fit += x * b;
            }
            for (z, g) in o.controls.iter().zip(&params.gamma) {
                fit += z * g;
            }
            eps.push(y - fit);
            d.push((-eta * (o.year - t_max) as f64).exp());
        }
        if eps.is_empty() {
            continue;
        }
        let log_integrand = |u: f64| -> f64 {
            let mut s = 0.0;
            for (e, w) in eps.iter().zip(&d) {
                let r = (e + w * u) / sigma_v;
                s += -0.5 * r * r - sigma_v.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
            }
            let r = (u - mu) / sigma_u;
            s + -0.5 * r * r - sigma_u.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - ln_trunc_mass
        };
        total += integrate_country(&log_integrand)?;
    }
    Ok(total)
}

/// `ln ∫_0^∞ exp(g(u)) du` via the map `u = s / (1 - s)`.
fn integrate_country<G: Fn(f64) -> f64>(g: &G) -> Result<f64> {
    let to_u = |s: f64| s / (1.0 - s);
    // locate the peak on a grid in s, then polish by golden section
    let mut best_s = 0.0;
    let mut best = g(0.0);
    for k in 1..PEAK_GRID {
        let s = k as f64 / PEAK_GRID as f64;
        let v = g(to_u(s));
        if v > best {
            best = v;
            best_s = s;
        }
    }
    let step = 1.0 / PEAK_GRID as f64;
    let (mut lo, mut hi) = ((best_s - step).max(0.0), (best_s + step).min(1.0 - 1e-12));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if g(to_u(a)) < g(to_u(b)) {
            lo = a;
        } else {
            hi = b;
        }
    }
    let peak_s = 0.5 * (lo + hi);
    let peak = g(to_u(peak_s)).max(best);

    let scaled = |s: f64| -> f64 {
        if s >= 1.0 {
            return 0.0;
        }
        let u = to_u(s);
        let jac = 1.0 / ((1.0 - s) * (1.0 - s));
        let v = (g(u) - peak).exp() * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut breaks: Vec<f64> = (0..=INITIAL_PIECES).map(|k| k as f64 / INITIAL_PIECES as f64).collect();
    breaks.push(peak_s);
    for w in [1e-3, 1e-2, 5e-2] {
        breaks.push((peak_s - w).max(0.0));
        breaks.push((peak_s + w).min(1.0));
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let (value, _) = integrate(scaled, &breaks, 1e-10)?;
    Ok(peak + value.ln())
}
