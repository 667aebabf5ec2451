use std::path::Path;
use std::process::{Command, Output};

use ia_feedback::harness::ResultTable;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ia-feedback")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "run.conf",
        "name = tiny\naxis = snr_db\ngrid = 10,20\nstrategies = d1,perfect\ntrials = 3\nrotations = 2\n",
    );
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", &cfg, "--seed", "5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = ResultTable::read_csv(std::fs::File::open(out.join("tiny.csv")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 4);
    assert!(table.rows.iter().all(|r| r.trials == 3 && r.rate_mean.is_finite()));
    assert!(out.join("tiny.svg").exists());

    let again = dir.path().join("again");
    run(&["simulate", "--config", &cfg, "--seed", "5", "--out", again.to_str().unwrap()]);
    assert_eq!(std::fs::read(out.join("tiny.csv")).unwrap(), std::fs::read(again.join("tiny.csv")).unwrap());

    let svg = dir.path().join("plot.svg");
    let o = run(&["plot", "--from", out.join("tiny.csv").to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(svg).unwrap().starts_with("<svg"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "a.conf", "colour = blue\n");
    assert_eq!(run(&["simulate", "--config", &unknown]).status.code(), Some(2));
    let even = write(dir.path(), "b.conf", "subcarriers = 4\ntaps = 2\n");
    assert_eq!(run(&["dps-info", "--config", &even]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--preset", "fig9"]).status.code(), Some(2));
    let missing = dir.path().join("nope.conf");
    assert_eq!(run(&["simulate", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn dps_info_reports_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.conf", "snr_db = 30\ndoppler = 0.004\n");
    let o = run(&["dps-info", "--config", &cfg]);
    assert!(o.status.success());
    assert!(!o.stdout.is_empty());
}
