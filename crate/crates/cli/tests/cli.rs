use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const HEADER: &str = "t,mean_Q,mean_Q2,norm,method";

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("acspi-cli-{}-{tag}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn acspi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acspi")).args(args).output().expect("binary runs")
}

fn harmonic(grid: usize) -> String {
    format!(
        r#"{{
  "physical": {{ "hbar": 1.0, "mass": 1.0, "omega0": 1.0 }},
  "potential": {{ "type": "harmonic" }},
  "initial": {{ "alpha": [1.0, 0.0] }},
  "grid": {{ "n_re": {grid}, "n_im": {grid} }},
  "stepping": {{ "t_total": 6.283185307179586, "n_steps": 100 }},
  "oracle": {{ "dim": 40 }},
  "output": {{ "stride": 10 }}
}}"#
    )
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(HEADER));
    lines.map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn propagate_writes_closed_form_series() {
    let dir = scratch_dir("propagate");
    let cfg = write_config(&dir, "h.json", &harmonic(32));
    let out = acspi(&["propagate", "--quiet", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 11);
    for r in rows {
        let t: f64 = r[0].parse().unwrap();
        let q: f64 = r[1].parse().unwrap();
        assert!((q - 2f64.sqrt() * t.cos()).abs() < 1e-5);
        assert_eq!(r[4], "acspi");
    }
}

#[test]
fn oracle_respects_out_and_stride() {
    let dir = scratch_dir("oracle");
    let cfg = write_config(&dir, "h.json", &harmonic(32));
    let csv = dir.join("o.csv");
    let out = acspi(&[
        "oracle",
        "--quiet",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
        "--stride",
        "25",
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let rows = rows(&fs::read_to_string(&csv).unwrap());
    assert_eq!(rows.len(), 5);
    for r in rows {
        let t: f64 = r[0].parse().unwrap();
        let q: f64 = r[1].parse().unwrap();
        assert!((q - 2f64.sqrt() * t.cos()).abs() < 1e-8);
        assert_eq!(r[4], "fock");
    }
}

#[test]
fn compare_prints_parsable_summary() {
    let dir = scratch_dir("compare");
    let cfg = write_config(&dir, "h.json", &harmonic(32));
    let out = acspi(&["compare", "--quiet", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().find(|l| l.starts_with("summary,")).expect("summary line");
    let max_dev: f64 = line
        .split(',')
        .find_map(|f| f.strip_prefix("max_dev="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(max_dev <= 1e-5);
    let methods: Vec<String> = rows(&String::from_utf8(out.stdout).unwrap()).into_iter().map(|r| r[4].clone()).collect();
    for m in ["acspi", "fock", "abs_diff"] {
        assert_eq!(methods.iter().filter(|x| *x == m).count(), 11);
    }
}

#[test]
fn convergence_reports_each_value() {
    let dir = scratch_dir("convergence");
    let body = harmonic(32).replace(
        r#""output": { "stride": 10 }"#,
        r#""convergence": { "axis": "grid", "values": [16, 32], "samples": 10 }"#,
    );
    let cfg = write_config(&dir, "c.json", &body);
    let out = acspi(&["convergence", "--quiet", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("axis,value,max_dev,order,identity_residual"));
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 2);
    assert!(body[0].starts_with("grid,16,"));
    assert!(body[1].starts_with("grid,32,"));
}

#[test]
fn diagnostics_pass_on_a_good_grid_and_fail_on_a_coarse_one() {
    let dir = scratch_dir("diagnostics");
    let good = write_config(&dir, "good.json", &harmonic(32));
    let out = acspi(&["diagnostics", "--quiet", "--config", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS ")).count(), 3);

    let coarse = write_config(&dir, "coarse.json", &harmonic(4));
    let out = acspi(&["diagnostics", "--quiet", "--config", coarse.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL grid_identity"));
}

#[test]
fn invalid_configs_exit_with_2() {
    let dir = scratch_dir("invalid");
    let unknown = write_config(&dir, "unknown.json", &harmonic(32).replace(r#""hbar""#, r#""hbar_typo""#));
    let zero_steps = write_config(&dir, "zero.json", &harmonic(32).replace(r#""n_steps": 100"#, r#""n_steps": 0"#));
    let missing = dir.join("missing.json");
    for p in [&unknown, &zero_steps, &missing] {
        let out = acspi(&["propagate", "--quiet", "--config", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{}", p.display());
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn packet_leaving_the_grid_exits_with_3() {
    let dir = scratch_dir("abort");
    let cfg = write_config(
        &dir,
        "abort.json",
        r#"{
  "physical": { "hbar": 1.0, "mass": 1.0, "omega0": 1.0 },
  "potential": { "type": "polynomial", "coeffs": [0.0, 0.0, 0.5, 0.0, 0.5] },
  "initial": { "alpha": [2.0, 0.0] },
  "grid": { "n_re": 8, "n_im": 8 },
  "stepping": { "t_total": 20.0, "n_steps": 200, "norm_floor": 0.9 },
  "oracle": { "dim": 40 }
}"#,
    );
    let out = acspi(&["propagate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("below floor"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = scratch_dir("determinism");
    let cfg = write_config(&dir, "h.json", &harmonic(24));
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    for p in [&a, &b] {
        let out = acspi(&["compare", "--quiet", "--config", cfg.to_str().unwrap(), "--out", p.to_str().unwrap()]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}
