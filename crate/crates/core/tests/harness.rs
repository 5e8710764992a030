use std::fs;
use std::path::{Path, PathBuf};

use gfra::estimation::{Scheme, TableStore};
use gfra::harness::bench::{run_estimation_bench, run_failprob_bench, run_negotiation, calibration_scan};
use gfra::harness::config::{EstimationBenchConfig, FailprobBenchConfig, NegotiationConfig};
use gfra::harness::emit::{emit_estimation, emit_failprob, emit_negotiation, emit_run, read_ccdf, read_json};
use gfra::harness::{run_scenario, Config, Format, RunSummary, ScenarioConfig, TrafficSpec};
use gfra::traffic::{BetaBurstSpec, UniformSpec};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn small_run() -> ScenarioConfig {
    ScenarioConfig {
        trials: 4,
        ..ScenarioConfig::default()
    }
}

fn file_bytes(paths: &[PathBuf]) -> Vec<(String, Vec<u8>)> {
    paths
        .iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap()))
        .collect()
}

#[test]
fn shipped_configs_parse() {
    let mut seen = 0;
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = Config::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.scenario.validate().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 7);
    let setup2 = Config::load(&configs_dir().join("setup2.toml")).unwrap();
    assert_eq!(setup2.scenario, ScenarioConfig { name: setup2.scenario.name.clone(), ..ScenarioConfig::setup2() });
    let setup1 = Config::load(&configs_dir().join("setup1.toml")).unwrap();
    assert_eq!(setup1.scenario, ScenarioConfig { name: setup1.scenario.name.clone(), ..ScenarioConfig::default() });
}

#[test]
fn run_output_is_byte_identical_across_reruns() {
    let cfg = small_run();
    let tables = TableStore::in_memory();
    for format in [Format::Csv, Format::Json] {
        let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let a = emit_run(&run_scenario(&cfg, &tables).unwrap(), d1.path(), format).unwrap();
        let b = emit_run(&run_scenario(&cfg, &tables).unwrap(), d2.path(), format).unwrap();
        assert_eq!(file_bytes(&a), file_bytes(&b));
    }
}

#[test]
fn bench_outputs_are_byte_identical_across_reruns() {
    let est = EstimationBenchConfig {
        trials: 20,
        schemes: vec![Scheme::SsMlLs, Scheme::Msem, Scheme::Isce],
        ..EstimationBenchConfig::default()
    };
    let fp = FailprobBenchConfig {
        cycles: 2000,
        w_max: 10,
        ..FailprobBenchConfig::default()
    };
    let neg = NegotiationConfig::default();
    let emit_all = |dir: &Path| {
        let tables = TableStore::in_memory();
        let mut files = emit_estimation(&run_estimation_bench(&est, &tables).unwrap(), &est, dir, Format::Csv).unwrap();
        files.extend(emit_failprob(&run_failprob_bench(&fp).unwrap(), &fp, dir, Format::Csv).unwrap());
        let hits = calibration_scan(&neg).unwrap();
        files.extend(emit_negotiation(&run_negotiation(&neg).unwrap(), &hits, &neg, dir, Format::Json).unwrap());
        file_bytes(&files)
    };
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert_eq!(emit_all(d1.path()), emit_all(d2.path()));
}

#[test]
fn summary_and_ccdf_parse_back() {
    let report = run_scenario(&small_run(), &TableStore::in_memory()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = emit_run(&report, dir.path(), Format::Csv).unwrap();
    let summary_path = files.iter().find(|p| p.extension().is_some_and(|e| e == "json")).unwrap();
    let back: RunSummary = read_json(summary_path).unwrap();
    assert_eq!(back, report.summary);
    let ccdf = read_ccdf(&dir.path().join("ccdf_bursty_setup1.csv")).unwrap();
    assert_eq!(ccdf, report.ccdf_a);
}

#[test]
fn no_traffic_gives_no_delay_mass() {
    let cfg = ScenarioConfig {
        traffic_a: TrafficSpec::Beta(BetaBurstSpec::standard(0, 12.5, 1.25)),
        traffic_b: UniformSpec { users_per_cycle: 0 },
        trials: 2,
        ..ScenarioConfig::default()
    };
    let report = run_scenario(&cfg, &TableStore::in_memory()).unwrap();
    assert!(report.delays_a.is_empty() && report.delays_b.is_empty());
    assert!(report.ccdf_a.iter().chain(&report.ccdf_b).all(|p| p.ccdf == 0.0));
}

#[test]
fn ccdf_is_flat_across_the_broadcast_gap() {
    let report = run_scenario(&small_run(), &TableStore::in_memory()).unwrap();
    for curve in [&report.ccdf_a, &report.ccdf_b] {
        let gap: Vec<f64> = curve
            .iter()
            .filter(|p| p.delay_ms >= 1.0 - 1e-9 && p.delay_ms <= 1.25 + 1e-9)
            .map(|p| p.ccdf)
            .collect();
        assert_eq!(gap.len(), 5);
        assert!(gap.iter().all(|&v| v == gap[0]));
    }
}

#[test]
fn allocations_stay_within_budget() {
    let cfg = small_run();
    let report = run_scenario(&cfg, &TableStore::in_memory()).unwrap();
    assert!(report.records.iter().all(|r| r.w_a + r.w_b <= cfg.w_all));
    for trial in 0..cfg.trials {
        let cycles: Vec<usize> = report.records.iter().filter(|r| r.trial == trial).map(|r| r.cycle).collect();
        assert!(cycles.len() >= cfg.cycles);
        assert!(cycles.iter().enumerate().all(|(i, &c)| i == c));
    }
}
