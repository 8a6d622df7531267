//! Command-line interface: `ingest`, `diagnose`, `fit`, `efficiency`,
//! `simulate` and `replicate`.
//!
//! Exit codes: 0 success, 1 data error, 2 estimation failure, 3 config
//! error. `FRONTIER_SFA_THREADS` caps the worker threads.

pub mod commands;
pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction, Command};

use crate::error::SfaError;
use config::{normalize_key, read_config_file, RunConfig, KEYS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_ESTIMATION: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

pub const THREADS_ENV: &str = "FRONTIER_SFA_THREADS";

/// Exit code for an error.
pub fn exit_code(e: &SfaError) -> i32 {
    use SfaError::*;
    match e {
        Config(_) => EXIT_CONFIG,
        InvalidParams(_)
        | NonFiniteLikelihood { .. }
        | NonFiniteObjective
        | NoConvergence { .. }
        | NotNegativeDefinite { .. }
        | Quadrature { .. }
        | EffectiveSampleSize { .. } => EXIT_ESTIMATION,
        Io { .. }
        | MalformedRow { .. }
        | BadHeader { .. }
        | EmptyIntersection
        | DegeneratePanel(_)
        | ConstantValues { .. }
        | ZeroVariance { .. }
        | NonPositiveGdp { .. }
        | TooFewObservations { .. }
        | RankDeficient { .. }
        | Json(_) => EXIT_DATA,
    }
}

const VERBS: &[(&str, &str)] = &[
    ("ingest", "load the three data files and write dataset_summary.json"),
    ("diagnose", "OLS diagnostics and specification search, diagnostics.json"),
    (
        "fit",
        "fit OLS and frontier models, coefficient tables and fit_meta.json",
    ),
    ("efficiency", "fit and score countries, efficiency and ranking files"),
    ("simulate", "write a synthetic panel in the input file format"),
    ("replicate", "run everything and compare with the published results"),
];

fn command() -> Command {
    let mut root = Command::new("frontier-sfa")
        .about("Panel stochastic frontier estimation of governance on culture")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (verb, about) in VERBS {
        let mut sub = Command::new(*verb).about(*about).arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .help("flat key = value configuration file"),
        );
        for (key, help) in KEYS {
            let dashed = key.replace('_', "-");
            let mut arg = Arg::new(*key)
                .long(dashed.clone())
                .value_name("VALUE")
                .help(*help)
                .action(ArgAction::Set);
            if dashed != *key {
                arg = arg.alias(*key);
            }
            sub = sub.arg(arg);
        }
        root = root.subcommand(sub);
    }
    root
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (verb, sub) = matches.subcommand().expect("subcommand is required");

    let mut map = match sub.get_one::<String>("config") {
        Some(path) => match read_config_file(&PathBuf::from(path)) {
            Ok(m) => m,
            Err(e) => return report(&e),
        },
        None => BTreeMap::new(),
    };
    for (key, _) in KEYS {
        if let Some(v) = sub.get_one::<String>(key) {
            map.insert(normalize_key(key), v.clone());
        }
    }
    let config = match RunConfig::from_map(&map) {
        Ok(c) => c,
        Err(e) => return report(&e),
    };

    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => return report(&e),
    };
    let result = pool.install(|| commands::dispatch(verb, &config));
    match result {
        Ok(code) => code,
        Err(e) => report(&e),
    }
}

fn report(e: &SfaError) -> i32 {
    eprintln!("error: {e}");
    exit_code(e)
}

fn thread_pool() -> Result<rayon::ThreadPool, SfaError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| SfaError::Config(format!("{THREADS_ENV} must be a positive integer, found `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| SfaError::Config(format!("cannot start worker threads: {e}")))
}
