use std::path::Path;
use std::process::Command;

fn phaselab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_phaselab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn passing_experiment_writes_csv_siblings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("zeta.csv");
    let o = phaselab(&["--experiment", "zeta_oracle", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let main = std::fs::read_to_string(&out).unwrap();
    assert!(main.starts_with("quantity,value,reference,gap\n"));
    let verdicts = std::fs::read_to_string(dir.path().join("zeta-verdicts.csv")).unwrap();
    assert!(verdicts.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn json_output_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u.json");
    let cfg = write_config(dir.path(), "# small run\ngrid.nmax = 6\nevolve.steps = 4\n");
    let o = phaselab(&[
        "--experiment",
        "unitarity",
        "--config",
        &cfg,
        "--grid-nmax",
        "3",
        "--mass",
        "2",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let bundle = phaselab::lab::ReportBundle::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(bundle.config_echo["grid.nmax"], "3");
    assert_eq!(bundle.config_echo["model.mass"], "2.0");
    assert_eq!(bundle.config_echo["evolve.steps"], "4");
}

#[test]
fn failing_verdict_exits_one() {
    let o = phaselab(&["--experiment", "holonomy_stokes", "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("\"experiment\": \"holonomy_stokes\""));
}

#[test]
fn config_errors_exit_two_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.nmax = 4\n\nmystery = 1\n");
    let o = phaselab(&["--experiment", "unitarity", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    assert_eq!(phaselab(&["--experiment", "nonesuch"]).status.code(), Some(2));
    assert_eq!(phaselab(&["--experiment", "unitarity", "--dressing", "bogus"]).status.code(), Some(2));
    assert_eq!(phaselab(&["--experiment", "unitarity", "--mass", "-1"]).status.code(), Some(2));
}

#[test]
fn numerical_abort_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "evolve.max_halvings = 1\n");
    let o = phaselab(&["--experiment", "unitarity", "--config", &cfg, "--grid-nmax", "2", "--tol", "1e-300"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}
