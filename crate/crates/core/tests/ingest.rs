use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use frontier_sfa::panel_data::{IngestConfig, Standardization};
use frontier_sfa::{load_panel, SfaError};

struct Files {
    _dir: tempfile::TempDir,
    culture: PathBuf,
    wgi: PathBuf,
    gdp: PathBuf,
}

fn write_files(culture: &str, wgi: &str, gdp: &str) -> Files {
    let dir = tempfile::tempdir().unwrap();
    let put = |name: &str, body: &str| {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    };
    Files {
        culture: put("culture.csv", culture),
        wgi: put("wgi.csv", wgi),
        gdp: put("gdp.csv", gdp),
        _dir: dir,
    }
}

fn load(
    f: &Files,
    config: &IngestConfig,
) -> frontier_sfa::Result<(frontier_sfa::PanelDataset, frontier_sfa::IngestReport)> {
    load_panel(&f.culture, &f.wgi, &f.gdp, config)
}

const CULTURE_HEADER: &str = "iso3,pdi,idv,mas,uai,lto,ivr\n";

fn wgi_rows(out: &mut String, iso: &str, year: i32, base: f64) {
    for (k, ind) in ["VA", "PV", "GE", "RQ", "RL", "CC"].iter().enumerate() {
        writeln!(out, "{iso},{year},{ind},{}", base + 0.1 * k as f64).unwrap();
    }
}

fn three_by_two() -> Files {
    let culture = format!("{CULTURE_HEADER}AAA,10,20,30,40,50,60\nBBB,40,10,60,20,30,90\nCCC,70,80,10,90,10,30\n");
    let mut wgi = String::from("iso3,year,indicator,value\n");
    for (iso, b) in [("AAA", 0.5), ("BBB", -0.2), ("CCC", 1.1)] {
        wgi_rows(&mut wgi, iso, 2018, b);
        wgi_rows(&mut wgi, iso, 2019, b + 0.05);
    }
    // CCC has no GDP for 2019
    let gdp = "iso3,year,gdp_pc_usd\nAAA,2018,12000\nAAA,2019,12500\nBBB,2018,3000\nBBB,2019,3100\nCCC,2018,40000\nCCC,2019,\n";
    write_files(&culture, &wgi, gdp)
}

#[test]
fn missing_cell_drops_one_observation() {
    let f = three_by_two();
    let (ds, report) = load(&f, &IngestConfig::default()).unwrap();
    assert_eq!(ds.n_countries(), 3);
    assert_eq!(ds.observations.len(), 5);
    assert_eq!(report.n_observations, 5);
    assert_eq!(report.n_years, 2);
    // one entry per country-year without GDP
    assert_eq!(report.dropped_rows.len(), 1);
    assert!(report.dropped_rows.iter().all(|r| r.country_id == "CCC"));
    // inputs min-max scaled
    for k in 0..6 {
        let col: Vec<f64> = ds.inputs.iter().map(|r| r[k]).collect();
        assert_eq!(col.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        assert_eq!(col.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }
    // pooled standardization centres each indicator
    for j in 0..6 {
        let v: Vec<f64> = ds.observations.iter().filter_map(|o| o.outputs[j]).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 1e-12);
    }
}

#[test]
fn gdp_level_is_relative_to_the_yearly_mean() {
    let f = three_by_two();
    let (ds, _) = load(&f, &IngestConfig::default()).unwrap();
    let y2019: Vec<f64> = ds
        .observations
        .iter()
        .filter(|o| o.year == 2019)
        .map(|o| o.controls[0])
        .collect();
    assert_eq!(y2019.len(), 2);
    let mean = (12500.0 + 3100.0) / 2.0;
    assert!((y2019[0] - (12500f64 / mean).ln()).abs() < 1e-12);
    assert!((y2019[1] - (3100f64 / mean).ln()).abs() < 1e-12);
}

#[test]
fn year_window_and_no_standardization() {
    let f = three_by_two();
    let config = IngestConfig {
        year_range: Some((2018, 2018)),
        standardization: Standardization::None,
    };
    let (ds, _) = load(&f, &config).unwrap();
    assert_eq!(ds.observations.len(), 3);
    assert_eq!(ds.observations[0].outputs[0], Some(0.5));
}

#[test]
fn single_country_is_rejected() {
    let culture = format!("{CULTURE_HEADER}AAA,10,20,30,40,50,60\nBBB,40,10,60,20,30,90\n");
    let mut wgi = String::from("iso3,year,indicator,value\n");
    wgi_rows(&mut wgi, "AAA", 2018, 0.3);
    let gdp = "iso3,year,gdp_pc_usd\nAAA,2018,1000\nBBB,2018,2000\n";
    let f = write_files(&culture, &wgi, gdp);
    assert!(matches!(
        load(&f, &IngestConfig::default()),
        Err(SfaError::DegeneratePanel(_))
    ));
}

#[test]
fn malformed_row_names_file_and_line() {
    let culture = format!("{CULTURE_HEADER}AAA,10,20,30,40,50,60\nBBB,forty,10,60,20,30,90\n");
    let f = write_files(&culture, "iso3,year,indicator,value\n", "iso3,year,gdp_pc_usd\n");
    match load(&f, &IngestConfig::default()) {
        Err(SfaError::MalformedRow { file, line, .. }) => {
            assert_eq!(file, "culture.csv");
            assert_eq!(line, 3);
        }
        other => panic!("expected a malformed row, got {other:?}"),
    }
}

#[test]
fn bad_header_and_missing_file() {
    let f = write_files("iso,a,b\n", "iso3,year,indicator,value\n", "iso3,year,gdp_pc_usd\n");
    assert!(matches!(
        load(&f, &IngestConfig::default()),
        Err(SfaError::BadHeader { .. })
    ));
    let missing = Path::new("/nonexistent/culture.csv");
    let err = load_panel(missing, &f.wgi, &f.gdp, &IngestConfig::default()).unwrap_err();
    assert!(matches!(err, SfaError::Io { .. }));
}

#[test]
fn disjoint_files_have_empty_intersection() {
    let culture = format!("{CULTURE_HEADER}AAA,10,20,30,40,50,60\nBBB,40,10,60,20,30,90\n");
    let mut wgi = String::from("iso3,year,indicator,value\n");
    wgi_rows(&mut wgi, "CCC", 2018, 0.3);
    let f = write_files(&culture, &wgi, "iso3,year,gdp_pc_usd\nDDD,2018,100\n");
    assert!(matches!(
        load(&f, &IngestConfig::default()),
        Err(SfaError::EmptyIntersection)
    ));
}

#[test]
fn non_positive_gdp_is_a_data_error() {
    let f = write_files(
        &format!("{CULTURE_HEADER}AAA,10,20,30,40,50,60\n"),
        "iso3,year,indicator,value\n",
        "iso3,year,gdp_pc_usd\nAAA,2018,-5\n",
    );
    assert!(matches!(
        load(&f, &IngestConfig::default()),
        Err(SfaError::NonPositiveGdp { .. })
    ));
}

/// Files in the published sample shape: 94 countries, 21 years, 13
/// country-years without governance data.
fn sample_shaped() -> Files {
    let years: Vec<i32> = frontier_sfa::reference::sample_years();
    assert_eq!(years.len(), 21);
    let mut culture = String::from(CULTURE_HEADER);
    let mut wgi = String::from("iso3,year,indicator,value\n");
    let mut gdp = String::from("iso3,year,gdp_pc_usd\n");
    let mut skipped = 0;
    for i in 0..94 {
        let iso = format!("C{i:02}");
        let v = |k: usize| (i * (7 + k) + 3 * k) % 101;
        writeln!(culture, "{iso},{},{},{},{},{},{}", v(0), v(1), v(2), v(3), v(4), v(5)).unwrap();
        for (t, &year) in years.iter().enumerate() {
            writeln!(gdp, "{iso},{year},{}", 1000.0 + 50.0 * i as f64 + 10.0 * t as f64).unwrap();
            if skipped < 13 && i % 7 == 0 && t == 0 {
                skipped += 1;
                continue;
            }
            wgi_rows(&mut wgi, &iso, year, ((i * 13 + t) % 17) as f64 / 10.0 - 0.8);
        }
    }
    assert_eq!(skipped, 13);
    write_files(&culture, &wgi, &gdp)
}

#[test]
fn sample_shape_counts() {
    let f = sample_shaped();
    let (ds, report) = load(&f, &IngestConfig::default()).unwrap();
    assert_eq!(ds.n_countries(), 94);
    assert_eq!(ds.observations.len(), 94 * 21 - 13);
    assert_eq!(report.n_observations, 1961);
    assert!(report.dropped_countries.is_empty());
}

#[test]
fn ingestion_is_deterministic() {
    let f = sample_shaped();
    let (a, _) = load(&f, &IngestConfig::default()).unwrap();
    let (b, _) = load(&f, &IngestConfig::default()).unwrap();
    assert_eq!(a.canonical_bytes(), b.canonical_bytes());
}
