use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chargedfield")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn report(path: &std::path::Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn injected_fault_exits_two_and_names_the_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fault.json");
    let o = run(&["verify-algebra", "--level_cutoff", "6", "--fault_injection", "charged-cross-term", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let r = report(&out);
    assert_eq!(r["fault_injection"], "charged-cross-term");
    let first = &r["first_failure"];
    assert_eq!(first["suite"], "virasoro_c1");
    assert!(first["m"].is_i64() && first["n"].is_i64());
    assert_ne!(first["residual_re"], "0/1");
}

#[test]
fn zero_cutoff_passes_with_vacuous_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zero.json");
    let o = run(&["verify-algebra", "--level_cutoff", "0", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let warnings = report(&out)["warnings"].as_array().unwrap().clone();
    assert!(!warnings.is_empty());
    assert!(warnings.iter().all(|w| w.as_str().unwrap().contains("vacuous interior")));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["verify-algebra", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&["verify-decay", "--level_cutoff", "ten"]).status.code(), Some(1));
    assert_eq!(run(&["verify-lorentz", "--alpha0", "sqrt(1/2)"]).status.code(), Some(1));
    assert_eq!(run(&["verify-virasoro-c0", "--arithmetic", "exact-rational"]).status.code(), Some(1));
    assert_eq!(run(&["verify-algebra", "--fault_injection", "bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# decay table\nlevel_cutoff = 5\nn-max = 128\nalpha0 = 1/4\n").unwrap();
    let out = dir.path().join("decay.json");
    let o = run(&["verify-decay", "--config", cfg.to_str().unwrap(), "--level_cutoff", "7", "--output", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["table"].as_array().unwrap().len(), 8);
    assert_eq!(r["config"]["alpha0"], "1/4");

    std::fs::write(&cfg, "colour = blue\n").unwrap();
    assert_eq!(run(&["verify-decay", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn converge_writes_one_csv_per_mode() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("sums");
    let o = run(&["converge", "--n_max", "64", "--m_list", "0,2", "--output", base.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for m in [0, 2] {
        let text = std::fs::read_to_string(format!("{}.m{m}.csv", base.display())).unwrap();
        assert_eq!(text.lines().count(), 66);
    }
}

#[test]
fn dump_state_is_json_lines() {
    let o = run(&["dump-state", "--level_cutoff", "4", "--m", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().count() > 0);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v.is_object());
    }
}
