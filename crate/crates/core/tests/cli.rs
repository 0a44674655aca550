use std::path::{Path, PathBuf};
use std::process::Command;

use diffeo_energy::cli::{exit_code, ExperimentConfig};
use diffeo_energy::fit::loglog_slope;
use diffeo_energy::functionals::{central_defect, energy_diff, length_diff};
use diffeo_energy::Error;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_diffeo-energy"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("diffeo-energy-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run_with(dir: &Path, cmd: &str, config: Option<&str>, extra: &[&str]) -> (i32, PathBuf) {
    let out = dir.join("out");
    let mut c = bin();
    c.arg(cmd).arg("--out").arg(&out);
    if let Some(text) = config {
        let p = dir.join("config.json");
        std::fs::write(&p, text).unwrap();
        c.arg("--config").arg(p);
    }
    c.args(extra);
    let status = c.output().unwrap().status;
    (status.code().unwrap(), out)
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let k = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[k].parse().unwrap()).collect()
}

const SMALL_RANDOM: &str = r#"{
  "grid": {"n_t": 41, "n_x": 241, "t_max": 1.0, "x_max": 12.0},
  "path": {"family": "random", "seed": 3},
  "eps": [0.3, 0.2]
}"#;

#[test]
fn energy_of_constant_path_is_a_zero_row() {
    let d = scratch("energy");
    let (code, out) = run_with(&d, "energy", Some(r#"{"path": {"family": "constant", "amplitude": 0.1}}"#), &[]);
    assert_eq!(code, 0);
    let (h, rows) = read_csv(&out.join("energy.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(column(&h, &rows, "energy"), vec![0.0]);
    assert!(!out.join("energy.svg").exists());
}

#[test]
fn energy_numbers_reproduce_from_the_library() {
    let d = scratch("energy-repro");
    let (code, out) = run_with(&d, "energy", Some(SMALL_RANDOM), &[]);
    assert_eq!(code, 0);
    let (h, rows) = read_csv(&out.join("energy.csv"));
    assert!(rows[0].iter().all(|v| v.contains('e') && v.split('e').next().unwrap().trim_start_matches('-').len() == 18));
    // The echoed config rebuilds the same path.
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("energy.json")).unwrap()).unwrap();
    let cfg: ExperimentConfig = serde_json::from_value(json["config"].clone()).unwrap();
    let p = cfg.build_path().unwrap();
    assert_eq!(column(&h, &rows, "energy")[0], energy_diff(&p).unwrap());
    assert_eq!(column(&h, &rows, "central_defect")[0], central_defect(&p).unwrap());
    assert_eq!(column(&h, &rows, "length")[0], length_diff(&p).unwrap());
}

/// Reads the decade gridlines and data points of the plot back into values.
fn svg_points(svg: &str, name: &str) -> (Vec<(i32, f64)>, Vec<(i32, f64)>, Vec<(f64, f64)>) {
    let attr = |line: &str, key: &str| -> Option<String> {
        let start = line.find(&format!(" {key}=\""))? + key.len() + 3;
        Some(line[start..].split('"').next()?.to_string())
    };
    let (mut gx, mut gy, mut pts) = (vec![], vec![], vec![]);
    for line in svg.lines() {
        match attr(line, "class").as_deref() {
            Some("grid-x") => gx.push((attr(line, "data-decade").unwrap().parse().unwrap(), attr(line, "x1").unwrap().parse().unwrap())),
            Some("grid-y") => gy.push((attr(line, "data-decade").unwrap().parse().unwrap(), attr(line, "y1").unwrap().parse().unwrap())),
            Some("point") if attr(line, "data-name").as_deref() == Some(name) => {
                pts.push((attr(line, "cx").unwrap().parse().unwrap(), attr(line, "cy").unwrap().parse().unwrap()))
            }
            _ => {}
        }
    }
    (gx, gy, pts)
}

fn from_axis(grid: &[(i32, f64)], p: f64) -> f64 {
    let (d0, p0) = grid[0];
    let (d1, p1) = grid[grid.len() - 1];
    10f64.powf(d0 as f64 + (p - p0) / (p1 - p0) * (d1 - d0) as f64)
}

#[test]
fn perturb_sweep_and_plot() {
    let d = scratch("perturb");
    let (code, out) = run_with(&d, "perturb", None, &["--svg"]);
    assert_eq!(code, 0);
    let (h, rows) = read_csv(&out.join("perturb.csv"));
    assert_eq!(
        h,
        ["eps", "delta_e", "closeness", "predicted", "ratio", "endpoint_residual_0", "endpoint_residual_t"]
    );
    let eps = column(&h, &rows, "eps");
    let de = column(&h, &rows, "delta_e");
    assert_eq!(eps, vec![0.2, 0.1, 0.05, 0.025]);
    assert!(de.iter().all(|v| *v > 0.0));
    let slope = loglog_slope(&eps, &de);
    assert!((2.7..=3.3).contains(&slope), "{slope}");

    let svg = std::fs::read_to_string(out.join("perturb.svg")).unwrap();
    let (gx, gy, pts) = svg_points(&svg, "delta_e");
    // Decade gridlines cover the data and step by one decade.
    assert!(gx.windows(2).all(|w| w[1].0 == w[0].0 + 1) && gy.windows(2).all(|w| w[1].0 == w[0].0 + 1));
    let lo = de.iter().chain(&column(&h, &rows, "closeness")).fold(f64::MAX, |a, b| a.min(*b));
    assert!(gx[0].0 as f64 <= 0.025f64.log10() && gx[gx.len() - 1].0 as f64 >= 0.2f64.log10());
    assert!(gy[0].0 as f64 <= lo.log10());
    assert_eq!(pts.len(), 4);
    for ((cx, cy), (e, v)) in pts.iter().zip(eps.iter().zip(&de)) {
        assert!((from_axis(&gx, *cx) / e - 1.0).abs() < 1e-2);
        assert!((from_axis(&gy, *cy) / v - 1.0).abs() < 1e-2);
    }
}

#[test]
fn empty_sweep_writes_header_only() {
    let d = scratch("empty");
    let (code, out) = run_with(&d, "perturb", Some(r#"{"eps": []}"#), &[]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(out.join("perturb.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn malformed_configs_exit_4_without_artifacts() {
    for (k, bad) in [
        "{ not json",
        r#"{"grid": {"n_t": 3}}"#,
        r#"{"eps": [0.1, 0.2]}"#,
        r#"{"eps": [-0.1]}"#,
        r#"{"order": {"k": 1, "m": 7, "n": 1}}"#,
        r#"{"unknown_field": 1}"#,
        r#"{"a": 0}"#,
    ]
    .iter()
    .enumerate()
    {
        let d = scratch(&format!("bad{k}"));
        let (code, out) = run_with(&d, "perturb", Some(bad), &[]);
        assert_eq!(code, 4, "{bad}");
        assert!(!out.exists(), "{bad}");
    }
    let d = scratch("bad-args");
    assert_eq!(run_with(&d, "perturb", None, &["--seed", "abc"]).0, 4);
    assert_eq!(run_with(&d, "nonsense", None, &[]).0, 4);
    let missing = bin().args(["energy", "--config", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(4));
}

#[test]
fn unwritable_output_exits_4() {
    let d = scratch("unwritable");
    let blocker = d.join("blocker");
    std::fs::write(&blocker, "a file, not a directory").unwrap();
    let status = bin().args(["energy", "--out"]).arg(blocker.join("sub")).status().unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn constant_path_perturbation_is_an_invariant_failure() {
    let d = scratch("nosite");
    let (code, _) = run_with(&d, "perturb", Some(r#"{"path": {"family": "constant", "amplitude": 0.1}}"#), &[]);
    assert_eq!(code, 2);
}

#[test]
fn error_classes_map_to_exit_codes() {
    assert_eq!(exit_code(&Error::Config("x".into())), 4);
    assert_eq!(exit_code(&Error::Io("x".into())), 4);
    assert_eq!(exit_code(&Error::NoRoot("x".into())), 3);
    assert_eq!(exit_code(&Error::NoConvergence("x".into())), 3);
    assert_eq!(exit_code(&Error::NotDiffeo("x".into())), 2);
    assert_eq!(exit_code(&Error::Tail("x".into())), 2);
}

#[test]
fn cocycle_suite_passes() {
    let d = scratch("cocycle");
    let (code, out) = run_with(&d, "cocycle", None, &["--seed", "9"]);
    assert_eq!(code, 0);
    let (h, rows) = read_csv(&out.join("cocycle.csv"));
    assert_eq!(rows.len(), 20);
    assert!(column(&h, &rows, "cocycle_residual").iter().all(|r| *r <= 1e-7));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("cocycle.json")).unwrap()).unwrap();
    assert_eq!(json["seed"], 9);
    assert_eq!(json["config"]["cocycle"]["triples"], 20);
}

#[test]
fn seed_overrides_random_path_seed() {
    let d = scratch("seed");
    let (code, out) = run_with(&d, "energy", Some(SMALL_RANDOM), &["--seed", "11"]);
    assert_eq!(code, 0);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("energy.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["path"]["seed"], 11);
    assert_eq!(json["seed"], 11);
}

#[test]
fn repeated_runs_are_byte_identical() {
    for cmd in ["perturb", "length", "cocycle"] {
        let cfg = if cmd == "length" {
            r#"{"grid": {"n_t": 41, "n_x": 161, "t_max": 1.0, "x_max": 8.0},
                "path": {"family": "gaussian_ramp", "slope": 0.1, "wobble": 0.02}, "eps": [0.2]}"#
        } else {
            SMALL_RANDOM
        };
        let mut outs = vec![];
        for k in 0..2 {
            let d = scratch(&format!("det-{cmd}-{k}"));
            let (code, out) = run_with(&d, cmd, Some(cfg), &["--seed", "5", "--svg"]);
            assert_eq!(code, 0, "{cmd}");
            let read = |ext: &str| std::fs::read(out.join(format!("{cmd}.{ext}"))).unwrap();
            outs.push((read("csv"), read("json")));
        }
        assert_eq!(outs[0], outs[1], "{cmd}");
    }
}
