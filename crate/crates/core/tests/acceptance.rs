//! Acceptance suite. Prints one line per criterion and exits non-zero when
//! any criterion fails. Criterion 8 needs real data in the directory named
//! by `FRONTIER_SFA_DATA_DIR`; without it the line reads FLAGGED.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

use frontier_sfa::frontier::{decay_weights, loglik_panel, posterior_moments};
use frontier_sfa::ols::{fit_ols, ols, residual_skewness};
use frontier_sfa::optimizer::{from_unconstrained, to_unconstrained, ParamLayout};
use frontier_sfa::reference::{default_truth, published, sample_years, BOTTOM_FIVE, TOP_FIVE};
use frontier_sfa::synthetic::montecarlo::MIN_DRAWS;
use frontier_sfa::synthetic::quadrature::integrate;
use frontier_sfa::synthetic::{mc_conditional, quadrature_loglik, sample_truncated_normal};
use frontier_sfa::{bc_efficiency, fit_mle, jlms, Distribution, FitOptions, FrontierSpec, PosteriorMoments, TimeModel};

use common::{median, random_params, rng, shaped_panel, small_panel, SPECS};

enum Verdict {
    Pass,
    Fail,
    Flagged,
}

struct Line {
    number: usize,
    title: &'static str,
    verdict: Verdict,
    detail: String,
    elapsed: Duration,
}

impl Line {
    fn print(&self) {
        let tag = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Flagged => "FLAGGED",
        };
        println!(
            "criterion {} {:<28} {:<7} {} [{:.1} s]",
            self.number,
            self.title,
            tag,
            self.detail,
            self.elapsed.as_secs_f64()
        );
    }
}

type Criterion = (usize, &'static str, fn() -> (Verdict, String));

fn verdict(pass: bool) -> Verdict {
    if pass {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn spec_of(k: usize) -> FrontierSpec {
    let (d, t) = SPECS[k % 4];
    FrontierSpec::new(0, d, t)
}

/// |closed form − quadrature| over 100 small panels, all four specifications.
fn likelihood_oracle() -> (Verdict, String) {
    let mut worst: f64 = 0.0;
    let mut errors = 0;
    for k in 0..100u64 {
        let mut r = rng(10_000 + k);
        let spec = spec_of(k as usize);
        let params = random_params(&mut r, &spec, 2, 1);
        let ds = small_panel(&mut r, &params, 5);
        match (
            loglik_panel(&ds, &spec, &params),
            quadrature_loglik(&ds, &spec, &params),
        ) {
            (Ok(a), Ok(b)) => worst = worst.max((a - b).abs()),
            _ => errors += 1,
        }
    }
    let pass = errors == 0 && worst <= 1e-7;
    (
        verdict(pass),
        format!("max |diff| {worst:.2e} (tol 1e-7), {errors} evaluation errors, 100 instances"),
    )
}

/// Truncated normal at μ = 0 against half normal, decay at η = 0 against
/// time invariant.
fn nested_models() -> (Verdict, String) {
    let mut worst_mu: f64 = 0.0;
    let mut worst_eta: f64 = 0.0;
    for k in 0..50u64 {
        let mut r = rng(20_000 + k);
        let time = if k % 2 == 0 {
            TimeModel::TimeInvariant
        } else {
            TimeModel::TimeDecay
        };
        let tn = FrontierSpec::new(0, Distribution::TruncatedNormal, time);
        let hn = FrontierSpec::new(0, Distribution::HalfNormal, time);
        let mut p = random_params(&mut r, &tn, 2, 1);
        p.mu = 0.0;
        let ds = small_panel(&mut r, &p, 5);
        let a = loglik_panel(&ds, &tn, &p).unwrap();
        let b = loglik_panel(&ds, &hn, &p).unwrap();
        worst_mu = worst_mu.max((a - b).abs());

        let dist = if k % 2 == 0 {
            Distribution::TruncatedNormal
        } else {
            Distribution::HalfNormal
        };
        let td = FrontierSpec::new(0, dist, TimeModel::TimeDecay);
        let ti = FrontierSpec::new(0, dist, TimeModel::TimeInvariant);
        let mut p = random_params(&mut r, &td, 2, 1);
        p.eta = 0.0;
        let ds = small_panel(&mut r, &p, 5);
        let a = loglik_panel(&ds, &td, &p).unwrap();
        let b = loglik_panel(&ds, &ti, &p).unwrap();
        worst_eta = worst_eta.max((a - b).abs());
    }
    let pass = worst_mu <= 1e-10 && worst_eta <= 1e-12;
    (
        verdict(pass),
        format!(
            "mu=0 max |diff| {worst_mu:.2e} (tol 1e-10), eta=0 max |diff| {worst_eta:.2e} (tol 1e-12), 50 instances"
        ),
    )
}

/// 20 panels of 94 countries over the 21 sample years at the GE column.
fn recovery() -> (Verdict, String) {
    let truth = default_truth();
    let column = published("GE").unwrap();
    let spec = FrontierSpec::ti_tn(0);
    let years = sample_years();
    let mut beta_err: Vec<Vec<f64>> = vec![Vec::new(); 6];
    let mut theta_err = Vec::new();
    let mut sigma2_err = Vec::new();
    let mut failures = 0;
    for seed in 0..20u64 {
        let panel = shaped_panel(&truth, &spec, 94, &years, 13, 300 + seed);
        match fit_mle(&panel.dataset, &spec, &FitOptions::default()) {
            Ok(fit) => {
                for (k, e) in beta_err.iter_mut().enumerate() {
                    e.push((fit.params.beta[k] - truth.beta[k]).abs());
                }
                theta_err.push((fit.params.theta - truth.theta).abs());
                sigma2_err.push((fit.params.sigma2 - truth.sigma2).abs());
            }
            Err(_) => failures += 1,
        }
    }
    if failures > 0 {
        return (Verdict::Fail, format!("{failures} of 20 fits failed"));
    }
    let se = column.beta_se();
    let mut pass = true;
    let mut worst_ratio: f64 = 0.0;
    for (k, e) in beta_err.iter_mut().enumerate() {
        let m = median(e);
        let ratio = m / (2.0 * se[k]);
        worst_ratio = worst_ratio.max(ratio);
        pass &= ratio <= 1.0;
    }
    let mt = median(&mut theta_err);
    let ms = median(&mut sigma2_err);
    pass &= mt <= 0.05 && ms <= 0.05;
    (
        verdict(pass),
        format!(
            "worst median |beta err|/(2 SE) {worst_ratio:.2} (tol 1), median |theta err| {mt:.3}, median |sigma2 err| {ms:.3} (tol 0.05)"
        ),
    )
}

/// Closed-form posterior means against importance-sampled Monte Carlo, plus
/// the two analytic anchors.
fn efficiency_oracle() -> (Verdict, String) {
    let mut outside = 0;
    let mut worst_z: f64 = 0.0;
    let mut errors = 0;
    for k in 0..50u64 {
        let mut r = rng(40_000 + k);
        let spec = if k % 2 == 0 {
            FrontierSpec::new(0, Distribution::TruncatedNormal, TimeModel::TimeDecay)
        } else {
            FrontierSpec::new(0, Distribution::HalfNormal, TimeModel::TimeInvariant)
        };
        let mut p = random_params(&mut r, &spec, 0, 0);
        p.theta = r.random_range(0.1..0.9);
        let t = r.random_range(1..=4usize);
        let years: Vec<i32> = (2019 - t as i32 + 1..=2019).collect();
        let w = decay_weights(&years, 2019, p.eta);
        let u = sample_truncated_normal(p.mu, p.sigma_u2().sqrt(), &mut r);
        let eps: Vec<f64> = w
            .iter()
            .map(|d| p.sigma_v2().sqrt() * r.sample::<f64, _>(StandardNormal) - d * u)
            .collect();
        let m = posterior_moments(&eps, &w, &p);
        match mc_conditional(&eps, &w, &p, 4 * MIN_DRAWS, 50 + k) {
            Ok(mc) => {
                let zj = (jlms(&m) - mc.jlms).abs() / mc.jlms_se;
                let zt = (bc_efficiency(&m, 1.0) - mc.te).abs() / mc.te_se;
                worst_z = worst_z.max(zj).max(zt);
                outside += usize::from(zj > 3.0) + usize::from(zt > 3.0);
            }
            Err(_) => errors += 1,
        }
    }
    let unit = PosteriorMoments {
        mu_star: 0.0,
        sigma_star: 1.0,
    };
    let jlms_anchor = jlms(&unit);
    let bc_anchor = bc_efficiency(&unit, 1.0);
    // independent value of E[exp(-u)] for a standard half normal
    let density = |u: f64| (-u).exp() * 2.0 * (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (bc_quad, _) = integrate(density, &[0.0, 2.0, 8.0, 40.0], 1e-13).unwrap();
    let anchors_ok = (jlms_anchor - (2.0 / std::f64::consts::PI).sqrt()).abs() <= 1e-4
        && (jlms_anchor - 0.7979).abs() <= 1e-4
        && (bc_anchor - 0.5232).abs() <= 1e-4
        && (bc_anchor - bc_quad).abs() <= 1e-4;
    let pass = outside == 0 && errors == 0 && anchors_ok;
    (
        verdict(pass),
        format!(
            "{outside} of 100 comparisons beyond 3 MC SE (worst {worst_z:.2} SE), {errors} MC errors; anchors jlms {jlms_anchor:.6}, bc {bc_anchor:.6} (quadrature {bc_quad:.6})"
        ),
    )
}

fn ols_exactness() -> (Verdict, String) {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut r = rng(50_000 + seed);
        let (n, p) = (200, 8);
        let x = DMatrix::from_fn(n, p, |_, c| if c == 0 { 1.0 } else { r.random::<f64>() * 10.0 });
        let y = DVector::from_fn(n, |i, _| x.row(i).sum() + r.sample::<f64, _>(StandardNormal));
        let fit = ols(&x, &y, (0..p).map(|j| format!("c{j}")).collect()).unwrap();
        let e = DVector::from_column_slice(&fit.residuals);
        let xe = x.transpose() * &e;
        worst = worst.max(xe.amax() / (x.norm() * y.norm()));
    }
    // the same on a panel design with correlated culture inputs
    let panel = shaped_panel(&default_truth(), &FrontierSpec::ti_tn(0), 94, &sample_years(), 13, 7);
    let (x, y) = frontier_sfa::ols::design(&panel.dataset, 0);
    let fit = fit_ols(&panel.dataset, 0).unwrap();
    let xe = x.transpose() * DVector::from_column_slice(&fit.residuals);
    worst = worst.max(xe.amax() / (x.norm() * y.norm()));

    let x3 = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
    let y3 = DVector::from_column_slice(&[0.0, 1.0, 1.0]);
    let f3 = ols(&x3, &y3, vec!["constant".into(), "x".into()]).unwrap();
    let fixture = (f3.beta[1] - 0.5)
        .abs()
        .max((f3.beta[0] - 1.0 / 6.0).abs())
        .max((f3.r_squared - 0.75).abs());

    // residuals (-2, 1, 1): m2 = 2, m3 = -2, skewness -1/sqrt(2) = -0.70711
    let skew = residual_skewness(&[-2.0, 1.0, 1.0]).unwrap();
    let skew_err = (skew + std::f64::consts::FRAC_1_SQRT_2).abs();

    let pass = worst <= 1e-8 && fixture <= 1e-12 && skew_err <= 1e-6;
    (
        verdict(pass),
        format!(
            "orthogonality {worst:.2e} (tol 1e-8), 3-point fixture {fixture:.1e} (tol 1e-12), skewness {skew:.7} err {skew_err:.1e} (tol 1e-6)"
        ),
    )
}

fn transform_round_trip() -> (Verdict, String) {
    let mut worst: f64 = 0.0;
    let mut r = rng(60_000);
    for k in 0..1000usize {
        let spec = spec_of(k);
        let layout = ParamLayout::new(&spec, 6, 1);
        let mut p = random_params(&mut r, &spec, 6, 1);
        p.sigma2 = 10f64.powf(r.random_range(-3.0..3.0));
        p.theta = r.random_range(0.001..0.999);
        if spec.has_mu() {
            p.mu = r.random_range(-5.0..5.0);
        }
        let x = to_unconstrained(&layout, &p).unwrap();
        let back = from_unconstrained(&layout, &x).unwrap();
        let (a, b) = (layout.to_vector(&p), layout.to_vector(&back));
        for (u, v) in a.iter().zip(&b) {
            worst = worst.max((u - v).abs() / u.abs().max(1.0));
        }
        let again = to_unconstrained(&layout, &back).unwrap();
        for (u, v) in x.iter().zip(&again) {
            worst = worst.max((u - v).abs() / u.abs().max(1.0));
        }
    }
    (
        verdict(worst <= 1e-12),
        format!("max relative deviation {worst:.2e} (tol 1e-12), 1000 vectors"),
    )
}

fn run_cli(args: &[&str]) -> i32 {
    let mut full = vec!["frontier-sfa"];
    full.extend_from_slice(args);
    frontier_sfa::cli::run(full)
}

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_file() {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.insert(name, std::fs::read(&path).unwrap());
        }
    }
    files
}

fn determinism() -> (Verdict, String) {
    let root = tempfile::tempdir().unwrap();
    let dir = |name: &str| -> String { root.path().join(name).to_string_lossy().into_owned() };
    let simulate = ["simulate", "--seed", "17", "--n-countries", "40"];
    let mut codes = Vec::new();
    for name in ["sim_a", "sim_b"] {
        let out = dir(name);
        let mut args = simulate.to_vec();
        args.extend(["--out", &out]);
        codes.push(run_cli(&args));
    }
    let data = dir("sim_a");
    for name in ["fit_a", "fit_b"] {
        let out = dir(name);
        codes.push(run_cli(&["fit", "--data-dir", &data, "--seed", "5", "--out", &out]));
    }
    if codes.iter().any(|c| *c != 0) {
        return (Verdict::Fail, format!("exit codes {codes:?}"));
    }
    let mut compared = 0;
    let mut differing = Vec::new();
    for (a, b) in [("sim_a", "sim_b"), ("fit_a", "fit_b")] {
        let (ta, tb) = (read_tree(&root.path().join(a)), read_tree(&root.path().join(b)));
        if ta.keys().ne(tb.keys()) {
            differing.push(format!("{a}/{b} file sets"));
        }
        for (name, bytes) in &ta {
            compared += 1;
            if tb.get(name) != Some(bytes) {
                differing.push(format!("{a}/{name}"));
            }
        }
    }
    let pass = differing.is_empty() && compared > 0;
    let detail = if pass {
        format!("{compared} files byte-identical across two runs of simulate and fit")
    } else {
        format!("differing: {}", differing.join(", "))
    };
    (verdict(pass), detail)
}

/// Reads the replication report written by `replicate` and applies the
/// band checks: skewness sign, R², θ, μ, significant signs, mean te and the
/// top/bottom five overlap.
fn replication() -> (Verdict, String) {
    let Some(data) = std::env::var_os("FRONTIER_SFA_DATA_DIR").map(PathBuf::from) else {
        return (
            Verdict::Flagged,
            "no user data (set FRONTIER_SFA_DATA_DIR); not evaluated".into(),
        );
    };
    let out = tempfile::tempdir().unwrap();
    let code = run_cli(&[
        "replicate",
        "--data-dir",
        &data.to_string_lossy(),
        "--out",
        &out.path().to_string_lossy(),
    ]);
    let report = std::fs::read_to_string(out.path().join("replication_report.json"));
    let Ok(report) = report else {
        return (
            Verdict::Flagged,
            format!("replicate exited with {code} and wrote no report"),
        );
    };
    let report: Value = serde_json::from_str(&report).unwrap();
    let mut misses = Vec::new();
    let mut checked = 0;
    for c in report["checks"].as_array().into_iter().flatten() {
        let stat = c["statistic"].as_str().unwrap_or("");
        let output = c["output"].as_str().unwrap_or("overall");
        let value = c["value"].as_f64();
        let ok = match stat {
            // the criterion asks for the sign only
            "ols_skewness" => value.is_some_and(|v| v < 0.0),
            "ols_r_squared" | "theta" | "mu" | "mean_te" | "coefficient_signs" | "top_five" | "bottom_five" => {
                c["status"] == "pass"
            }
            _ => continue,
        };
        checked += 1;
        if !ok {
            let shown = value.map_or_else(
                || c["detail"].as_str().unwrap_or("-").to_string(),
                |v| format!("{v:.3}"),
            );
            misses.push(format!("{stat}[{output}]={shown}"));
        }
    }
    if checked == 0 {
        return (Verdict::Flagged, "report holds no checks".into());
    }
    if misses.is_empty() {
        (
            Verdict::Pass,
            format!(
                "{checked} band checks met (published five: {} / {})",
                TOP_FIVE.join(" "),
                BOTTOM_FIVE.join(" ")
            ),
        )
    } else {
        (
            Verdict::Flagged,
            format!(
                "{} of {checked} band checks missed: {}",
                misses.len(),
                misses.join("; ")
            ),
        )
    }
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "likelihood oracle", likelihood_oracle),
        (2, "nested models", nested_models),
        (3, "parameter recovery", recovery),
        (4, "efficiency oracle", efficiency_oracle),
        (5, "OLS exactness", ols_exactness),
        (6, "transform round trip", transform_round_trip),
        (7, "determinism", determinism),
        (8, "replication bands", replication),
    ];
    let runtime_targets: BTreeMap<usize, f64> = [(1, 30.0), (3, 600.0)].into();
    let mut failed = 0;
    println!();
    for (number, title, run) in criteria {
        let start = Instant::now();
        let (mut v, mut detail) = run();
        let elapsed = start.elapsed();
        if let Some(limit) = runtime_targets.get(&number) {
            if elapsed.as_secs_f64() > *limit {
                detail.push_str(&format!("; runtime target {limit} s exceeded"));
                if matches!(v, Verdict::Pass) {
                    v = Verdict::Fail;
                }
            }
        }
        if matches!(v, Verdict::Fail) {
            failed += 1;
        }
        Line {
            number,
            title,
            verdict: v,
            detail,
            elapsed,
        }
        .print();
    }
    println!("acceptance: {} of 8 criteria failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
