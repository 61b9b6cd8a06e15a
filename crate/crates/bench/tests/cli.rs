use std::path::PathBuf;
use std::process::Command;

use mocc_bench::config::{parse_config, ConfigError, Scenario};
use mocc_bench::report::PerformanceReport;
use mocc_bench::run::{run_benchmark, write_report, Overrides};

fn bundled_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples/double_integrator.cfg")
}

fn bundled_text() -> String {
    std::fs::read_to_string(bundled_path()).unwrap()
}

fn short(mut sc: Scenario) -> Scenario {
    Overrides { t_end: Some(2.0), ..Overrides::default() }.apply(&mut sc).unwrap();
    sc
}

fn key_of(e: ConfigError) -> String {
    match e {
        ConfigError::Invalid { key, .. } => key,
        other => other.to_string(),
    }
}

#[test]
fn bundled_config_parses() {
    let sc = parse_config(&bundled_text()).unwrap();
    assert_eq!(sc.controllers.len(), 4);
    let names: Vec<&str> = sc.disturbances.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["w0", "w1", "w2", "w3"]);
    assert!(sc.disturbance("w3").unwrap().dependency().is_some());
    assert_eq!(sc.expected.len(), 20);
}

#[test]
fn missing_plant_is_named() {
    let text = bundled_text();
    let start = text.find("[plant]").unwrap();
    let end = text.find("[observer]").unwrap();
    let cut = format!("{}{}", &text[..start], &text[end..]);
    let msg = parse_config(&cut).unwrap_err().to_string();
    assert!(msg.contains("plant"), "{msg}");
}

#[test]
fn nonpositive_step_is_named() {
    for h in ["0.0", "-1e-3"] {
        let text = bundled_text().replace("h = 1e-3", &format!("h = {h}"));
        assert_eq!(key_of(parse_config(&text).unwrap_err()), "simulation.h");
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = bundled_text().replace("[simulation]\n", "[simulation]\nstep_size = 1e-3\n");
    let msg = parse_config(&text).unwrap_err().to_string();
    assert!(msg.contains("step_size"), "{msg}");
}

#[test]
fn bad_matrix_shape_is_named() {
    let text = bundled_text().replace("b2  = [[0.0], [1.0]]", "b2  = [[0.0], [1.0, 2.0]]");
    assert_eq!(key_of(parse_config(&text).unwrap_err()), "plant.b2");
}

#[test]
fn unknown_controller_is_named() {
    let text = bundled_text().replace("run = [\"mocc\"", "run = [\"pid\"");
    assert_eq!(key_of(parse_config(&text).unwrap_err()), "controllers.run");
}

#[test]
fn overrides_are_validated() {
    let mut sc = parse_config(&bundled_text()).unwrap();
    assert!(Overrides { h: Some(0.0), ..Overrides::default() }.apply(&mut sc).is_err());
    Overrides { gamma: Some(0.5), alpha: Some(0.3), ..Overrides::default() }.apply(&mut sc).unwrap();
    assert_eq!(sc.mocc.as_ref().unwrap().gamma, 0.5);
    assert_eq!(sc.mocc.as_ref().unwrap().alpha, 0.3);
    assert_eq!(sc.hinf.as_ref().unwrap().gamma, 0.5);
}

fn emit(report: &PerformanceReport) -> (Vec<u8>, Vec<u8>) {
    let (mut csv, mut json) = (Vec::new(), Vec::new());
    report.write_csv(&mut csv).unwrap();
    report.write_json(&mut json).unwrap();
    (csv, json)
}

#[test]
fn reports_are_deterministic() {
    let sc = short(parse_config(&bundled_text()).unwrap());
    let a = run_benchmark(&sc, None);
    let b = run_benchmark(&sc, None);
    assert_eq!(emit(&a), emit(&b));
    assert_eq!(emit(&a), emit(&a));
}

#[test]
fn csv_mirrors_table_layout() {
    let sc = short(parse_config(&bundled_text()).unwrap());
    let report = run_benchmark(&sc, None);
    assert!(report.complete());
    let (csv, _) = emit(&report);
    let text = String::from_utf8(csv).unwrap();
    let lines: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(lines.len(), 6);
    assert!(lines.iter().all(|l| l.len() == 5));
    assert_eq!(lines[0], ["case", "mocc", "hinf", "lqt", "dobc"]);
    let first: Vec<&str> = lines.iter().map(|l| l[0]).collect();
    assert_eq!(first, ["case", "w0", "w1", "w2", "w3", "hinf_norm"]);
    for l in &lines[1..] {
        for v in &l[1..] {
            v.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn every_table_cell_carries_its_band() {
    let sc = short(parse_config(&bundled_text()).unwrap());
    let report = run_benchmark(&sc, None);
    for row in &report.rows {
        for cell in &row.cells {
            let band = cell.band.as_ref().unwrap_or_else(|| panic!("{} / {}", row.controller, cell.disturbance));
            let tol = if row.controller == "hinf" { 0.15 } else { 0.05 };
            assert_eq!(band.rel_tol, Some(tol));
        }
        assert_eq!(row.hinf_norm.as_ref().unwrap().band.as_ref().unwrap().abs_tol, Some(1e-3));
    }
    let hinf = report.cell("hinf", "w1").unwrap().band.as_ref().unwrap();
    assert_eq!(hinf.note.as_deref(), Some("indicative"));
}

#[test]
fn failed_synthesis_only_affects_its_row() {
    let text = bundled_text().replacen("gamma = 0.4108\nalpha", "gamma = 0.2\nalpha", 1);
    let sc = short(parse_config(&text).unwrap());
    let report = run_benchmark(&sc, None);
    assert!(!report.complete());
    let mocc = report.rows.iter().find(|r| r.controller == "mocc").unwrap();
    assert!(mocc.error.is_some());
    assert!(mocc.cells.iter().all(|c| c.error.is_some() && c.cost.is_none()));
    for other in report.rows.iter().filter(|r| r.controller != "mocc") {
        assert!(other.error.is_none());
        assert!(other.cells.iter().all(|c| c.cost.is_some()));
    }
}

#[test]
fn written_reports_are_byte_identical() {
    let sc = short(parse_config(&bundled_text()).unwrap());
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_report(&run_benchmark(&sc, None), d1.path()).unwrap();
    write_report(&run_benchmark(&sc, None), d2.path()).unwrap();
    for f in ["report.csv", "report.json"] {
        assert_eq!(std::fs::read(d1.path().join(f)).unwrap(), std::fs::read(d2.path().join(f)).unwrap(), "{f}");
    }
}

fn mocc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mocc"))
}

#[test]
fn benchmark_command_writes_report_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let status = mocc().arg("benchmark").arg(bundled_path()).args(["--T", "1"]).arg("--out").arg(dir.path()).output().unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    for f in ["report.csv", "report.json", "trace_mocc_w0.csv", "trace_dobc_w3.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let traces = std::fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("trace_")).count();
    assert_eq!(traces, 16);
}

#[test]
fn incomplete_benchmark_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = mocc().arg("benchmark").arg(bundled_path()).args(["--T", "1", "--gamma", "0.2"]).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(dir.path().join("report.csv").exists());
}

#[test]
fn invalid_config_exits_with_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, bundled_text().replace("h = 1e-3", "h = -1.0")).unwrap();
    let out = mocc().arg("synthesize").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulation.h"));
}

#[test]
fn verify_and_tune_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = mocc().arg("verify-q").arg(bundled_path()).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"passes\": true"));
    let out = mocc().arg("tune-alpha").arg(bundled_path()).args(["--T", "2"]).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("tune_trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("k,alpha_probe,J,alpha_hat"));
    assert_eq!(trace.lines().count(), 101);
}
