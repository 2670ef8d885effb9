use std::path::Path;
use std::process::{Command, Output};

use cutfem::app::Scenario;

fn cutfem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cutfem"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.trim().parse().unwrap()).collect())
        .collect()
}

#[test]
fn printed_builtin_parses_back() {
    for name in cutfem::app::BUILTIN_NAMES {
        let out = cutfem(&["scenario", name]);
        assert!(out.status.success());
        let parsed = Scenario::from_toml_str(&stdout(&out)).unwrap();
        assert_eq!(parsed, Scenario::builtin(name).unwrap());
    }
}

#[test]
fn unknown_builtin_fails() {
    let out = cutfem(&["run", "--scenario", "no_such_case", "--dry-run"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn dry_run_reports_classification() {
    let out = cutfem(&["run", "--scenario", "dfg_cylinder", "--dry-run"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for word in ["fluid", "rigid", "cut"] {
        assert!(text.contains(word), "{text}");
    }
}

#[test]
fn invalid_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = Scenario::builtin("convergence").unwrap().to_toml_string().unwrap();
    let bad: String = text
        .lines()
        .map(|l| if l.trim_start().starts_with("tau") { "tau = 0.0".to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, bad).unwrap();
    let out = cutfem(&["run", path.to_str().unwrap(), "--dry-run"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn full_cell_rule_dump() {
    let out = cutfem(&["quadrature", "--cell", "1", "3", "-1", "0", "--order", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "x,y,w");
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 9);
    let area: f64 = rows.iter().map(|r| r[2]).sum();
    assert!((area - 2.0).abs() < 1e-14);
    assert!(rows.iter().all(|r| (1.0..=3.0).contains(&r[0]) && (-1.0..=0.0).contains(&r[1])));
}

#[test]
fn cut_cell_rule_dump() {
    let args = ["quadrature", "--cell", "0", "0.5", "0", "0.5", "--circle", "0.5", "0.5", "0.3"];
    let out = cutfem(&args);
    assert!(out.status.success());
    let area: f64 = csv_rows(&stdout(&out)).iter().map(|r| r[2]).sum();
    let exact = 0.25 - std::f64::consts::PI * 0.09 / 4.0;
    assert!((area - exact).abs() < 1e-8, "{area} vs {exact}");

    let mut with_boundary = args.to_vec();
    with_boundary.push("--boundary");
    let out = cutfem(&with_boundary);
    assert!(out.status.success());
    let arc: f64 = csv_rows(&stdout(&out)).iter().map(|r| r[2]).sum();
    assert!((arc - std::f64::consts::PI * 0.3 / 2.0).abs() < 1e-8);
}

fn run_into(dir: &Path, extra: &[&str]) {
    let mut args = vec!["run", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = cutfem(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn convergence_run_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    run_into(dir.path(), &["--scenario", "convergence", "--refine", "1", "--tau", "0.25", "--t-end", "0.5"]);
    let errors = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    assert_eq!(errors.lines().next().unwrap(), "level,tau,h,dofs,error_v,eoc_v,error_p,eoc_p");
    assert_eq!(errors.lines().count(), 3);
    for level in ["level0", "level1"] {
        assert!(dir.path().join(level).join("newton.csv").exists());
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("EOC"));
}

/// Files of a run directory except the summary, which records wall times.
fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "summary.txt" {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn runs_are_bit_identical_across_thread_counts() {
    let mut s = Scenario::builtin("moving_cylinder").unwrap();
    s.domain.cells = [48, 16];
    s.time.t_end = 0.04;
    s.output.snapshots = vec![0.02];
    let work = tempfile::tempdir().unwrap();
    let config = work.path().join("small.toml");
    std::fs::write(&config, s.to_toml_string().unwrap()).unwrap();
    let config = config.to_str().unwrap();

    let a = work.path().join("a");
    let b = work.path().join("b");
    let c = work.path().join("c");
    run_into(&a, &[config]);
    run_into(&b, &[config]);
    run_into(&c, &[config, "--threads", "3"]);
    let (oa, ob, oc) = (outputs(&a), outputs(&b), outputs(&c));
    assert!(oa.iter().any(|(name, _)| name.ends_with(".csv")));
    assert_eq!(oa, ob);
    assert_eq!(oa, oc);
}
