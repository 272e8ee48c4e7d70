use svm_robust::config::{config_to_toml, parse_config, parse_config_str};
use svm_robust::io::{emit_report, parse_report, read_report, report_to_csv, timing_path, CSV_COLUMNS};
use svm_robust::robustness::{run_experiment, RobustnessReport, Verdict};

const SMALL: &str = r#"
kind = "lambda-decay"
loss = "absolute"
kernel = "rbf:1"
n_grid = [20, 80]
replicates = 10
lambda_schedule = { exponent = 0.5 }

[contamination]
delta = [0.2]

[lambda_decay]
x0 = [0.0]
x1 = [0.08]
gamma = 0.5
"#;

#[test]
fn emitted_report_round_trips() {
    let cfg = parse_config_str(SMALL).unwrap();
    let outcome = run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let csv = dir.path().join("r.csv");
    emit_report(&outcome.report, &outcome.timings, &out, Some(&csv)).unwrap();
    assert_eq!(read_report(&out).unwrap(), outcome.report);
    assert!(timing_path(&out).exists());
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(table.lines().count(), 1 + outcome.report.cells.len());
    // both series, one delta, two sizes
    assert_eq!(outcome.report.cells.len(), 4);
}

#[test]
fn empty_grid_report_is_inconclusive() {
    let cfg = parse_config_str(SMALL).unwrap();
    let mut report = run_experiment(&cfg).unwrap().report;
    report.cells.clear();
    report.verdict = RobustnessReport::overall(&report.predicates, &report.cells);
    assert_eq!(report.verdict, Verdict::InsufficientData);
    let text = serde_json::to_string(&report).unwrap();
    assert!(text.contains("\"insufficient data\""));
    assert_eq!(parse_report(&text).unwrap(), report);
    assert_eq!(report_to_csv(&report).lines().count(), 1);
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = parse_config(&path).unwrap();
            let again = parse_config_str(&config_to_toml(&cfg).unwrap()).unwrap();
            assert_eq!(cfg, again, "{}", path.display());
            seen += 1;
        }
    }
    assert_eq!(seen, 4);
}
