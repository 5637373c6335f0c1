use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn problem(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../problems")
        .join(format!("{name}.json"))
}

fn charmax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_charmax"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(out: &Path, cmd: &str, name: &str, extra: &[&str]) -> Output {
    let problem = problem(name);
    let mut args = vec![
        cmd,
        "--problem",
        problem.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    charmax(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn query(name: &str, t: &str, x: Option<&str>) -> String {
    let dir = tempfile::tempdir().unwrap();
    let mut extra = vec!["--t", t];
    if let Some(x) = x {
        extra.extend(["--x", x]);
    }
    let o = run_in(dir.path(), "query", name, &extra);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    stdout(&o).trim().to_owned()
}

fn inside_value(line: &str) -> f64 {
    line.strip_prefix("inside ")
        .unwrap_or_else(|| panic!("not inside: {line}"))
        .parse()
        .unwrap()
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_owned();
    let rows = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    (header, rows)
}

#[test]
fn verify_passes_on_every_example() {
    for name in ["ode", "cap", "burgers_linear", "burgers_reciprocal", "constant"] {
        let dir = tempfile::tempdir().unwrap();
        let o = run_in(dir.path(), "verify", name, &[]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}{}", stdout(&o), stderr(&o));
        assert!(stdout(&o).contains("result: pass"), "{name}: {}", stdout(&o));
    }
}

#[test]
fn exit_code_one_for_unreadable_or_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let o = charmax(&["verify", "--problem", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let broken = dir.path().join("broken.json");
    fs::write(&broken, "{ \"n\": 1, ").unwrap();
    let o = charmax(&["domain", "--problem", broken.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));

    let bad_expr = dir.path().join("bad_expr.json");
    let text = fs::read_to_string(problem("cap"))
        .unwrap()
        .replace("sqrt(1 - x^3)", "sqrt(1 - x^^3)");
    fs::write(&bad_expr, text).unwrap();
    let o = charmax(&["verify", "--problem", bad_expr.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));

    let o = charmax(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_code_two_when_f_misses_the_initial_set() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wrong_f.json");
    let mut doc: Value = serde_json::from_str(&fs::read_to_string(problem("cap")).unwrap()).unwrap();
    doc["f"] = Value::String("y2 - 2 + y1^3".into());
    fs::write(&path, doc.to_string()).unwrap();
    let o = charmax(&["verify", "--problem", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("F does not vanish on Γ"), "{}", stderr(&o));
}

#[test]
fn query_examples() {
    assert!((inside_value(&query("ode", "0.9", None)) - 10.0).abs() <= 1e-8);
    assert_eq!(query("ode", "1.1", None), "outside");
    let u = inside_value(&query("burgers_reciprocal", "0.5", Some("1")));
    assert!((u - (2.0 - 2f64.sqrt())).abs() <= 1e-8, "{u}");
    assert_eq!(query("burgers_reciprocal", "2", Some("1")), "outside");
    let u = inside_value(&query("cap", "0.5", Some("0.5")));
    assert!((u - 0.625f64.sqrt()).abs() <= 1e-8, "{u}");
}

#[test]
fn query_rejects_missing_coordinate() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "query", "cap", &["--t", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dirs: Vec<_> = ["1", "4"]
        .iter()
        .map(|threads| {
            let dir = tempfile::tempdir().unwrap();
            let p = problem("burgers_reciprocal");
            let args = ["--problem", p.to_str().unwrap(), "--out", dir.path().to_str().unwrap()];
            for cmd in ["domain", "singular", "envelope"] {
                let o = Command::new(env!("CARGO_BIN_EXE_charmax"))
                    .arg(cmd)
                    .args(args)
                    .env("CHARMAX_THREADS", threads)
                    .output()
                    .unwrap();
                assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
            }
            dir
        })
        .collect();
    let mut names: Vec<_> = fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 6, "{names:?}");
    for name in names {
        let a = fs::read(dirs[0].path().join(&name)).unwrap();
        let b = fs::read(dirs[1].path().join(&name)).unwrap();
        assert!(a == b, "{name:?} differs between runs");
    }
}

#[test]
fn envelope_csv_lies_on_the_parabola() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "envelope", "burgers_reciprocal", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let blowup: f64 = stdout(&o)
        .lines()
        .find_map(|l| l.strip_prefix("blow-up time: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((blowup - 0.81).abs() <= 1e-12, "{blowup}");
    let (header, rows) = csv_rows(&dir.path().join("envelope.csv"));
    assert_eq!(header, "s,t,x,speed");
    assert_eq!(rows.len(), 101);
    for row in rows {
        let [t, x, speed]: [f64; 3] = [
            row[1].parse().unwrap(),
            row[2].parse().unwrap(),
            row[3].parse().unwrap(),
        ];
        assert!((t - (x + 1.0).powi(2) / 4.0).abs() <= 1e-8, "{row:?}");
        assert!((speed - 1.0 / t.sqrt()).abs() <= 1e-8, "{row:?}");
    }
}

#[test]
fn envelope_of_linear_data_is_a_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "envelope", "burgers_linear", &["--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("blow-up time: 0.5"));
    let rows: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("envelope.json")).unwrap()).unwrap();
    for row in rows.as_array().unwrap() {
        assert_eq!(row["t"].as_f64(), Some(0.5));
        assert!(row["x"].as_f64().unwrap().abs() <= 1e-12);
        assert!(row["speed"].is_null());
    }
}

#[test]
fn envelope_requires_conservation_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "envelope", "cap", &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn singular_locus_of_linear_burgers() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "singular", "burgers_linear", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("singular.csv"));
    assert_eq!(header, "t,x,u,kind");
    assert!(!rows.is_empty());
    for row in rows {
        let t: f64 = row[0].parse().unwrap();
        let x: f64 = row[1].parse().unwrap();
        assert!((t - 0.5).abs() <= 1e-8 && x.abs() <= 1e-8, "{row:?}");
        assert_eq!(row[3], "sigma");
    }
    let (_, surface) = csv_rows(&dir.path().join("surface.csv"));
    assert!(surface.iter().all(|r| r[3] == "surface"));
}

#[test]
fn three_seeds_give_three_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "characteristics", "burgers_reciprocal", &["--seeds", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for k in 0..3 {
        let (header, rows) = csv_rows(&dir.path().join(format!("characteristic_{k}.csv")));
        assert_eq!(header, "tau,t,x1,u");
        assert!(rows.len() > 2);
        let values: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| r.iter().map(|v| v.parse().unwrap()).collect())
            .collect();
        let u0 = values[0][3];
        for v in &values {
            assert!((v[3] - u0).abs() <= 1e-12);
        }
    }
    assert!(!dir.path().join("characteristic_3.csv").exists());
}

#[test]
fn constant_data_fills_the_whole_face() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "domain", "constant", &["--resolution", "32"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert!(
        (summary["area_of_mask"].as_f64().unwrap() - 4.0).abs() <= 1e-12,
        "{summary}"
    );
    assert_eq!(summary["sigma_point_count"].as_u64(), Some(0));
    let domain: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("domain.json")).unwrap()).unwrap();
    assert_eq!(domain["resolution"].as_u64(), Some(32));
    for row in domain["mask"].as_array().unwrap() {
        assert_eq!(row, &serde_json::json!([0, 32]));
    }
}

#[test]
fn ode_domain_boundary_is_at_blow_up() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "domain", "ode", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&dir.path().join("boundary.csv"));
    assert_eq!(header, "t,kind");
    let edges: Vec<f64> = rows
        .iter()
        .filter(|r| r[1] == "edge")
        .map(|r| r[0].parse().unwrap())
        .collect();
    assert!(!edges.is_empty());
    assert!(edges.iter().all(|t| (t - 1.0).abs() <= 7e-3), "{edges:?}");
}

#[test]
fn resolution_below_minimum_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), "domain", "cap", &["--resolution", "4"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
