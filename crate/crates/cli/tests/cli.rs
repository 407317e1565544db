use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn railyard(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_railyard"))
        .current_dir(dir)
        .env_remove("RAILYARD_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_json(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.trim()).unwrap_or_else(|e| panic!("{e}: {stderr}"))
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, into: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, into);
            } else {
                into.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut files = BTreeMap::new();
    walk(root, root, &mut files);
    files
}

#[test]
fn run_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        ok(&railyard(tmp.path(), &["run", "--scenarios", "2", "--seed", "7", "--out", out]));
    }
    let a = tree(&tmp.path().join("a"));
    let b = tree(&tmp.path().join("b"));
    assert!(a.contains_key(Path::new("report.json")));
    assert!(a.contains_key(Path::new("peaks.csv")));
    assert!(a.contains_key(&Path::new("1").join("dispatch.csv")));
    assert!(!a.contains_key(Path::new("timings.csv")));
    assert_eq!(a, b);
}

#[test]
fn timings_are_opt_in() {
    let tmp = tempfile::tempdir().unwrap();
    let out = railyard(
        tmp.path(),
        &["run", "--timings", "--scenarios", "1", "--policy", "optimized", "--case", "1"],
    );
    ok(&out);
    let timings = fs::read_to_string(tmp.path().join("out/timings.csv")).unwrap();
    assert_eq!(timings.lines().count(), 2, "{timings}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Case 1"), "{stdout}");
}

#[test]
fn sessionless_day_charges_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("cfg.json"),
        r#"{"cars": {"arrival_rate_per_hour": 0.0}, "buses": {"schedule": []}}"#,
    )
    .unwrap();
    ok(&railyard(
        tmp.path(),
        &["simulate-ev", "--config", "cfg.json", "--scenarios", "1", "--out", "o"],
    ));
    let dir = tmp.path().join("o/0");
    for name in ["ev_optimized.csv", "ev_uncoordinated.csv"] {
        let text = fs::read_to_string(dir.join(name)).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 144);
        assert!(rows.iter().all(|r| r.ends_with(",0")), "{name}");
    }
    for name in ["charging_optimized.csv", "charging_uncoordinated.csv"] {
        let text = fs::read_to_string(dir.join(name)).unwrap();
        assert_eq!(text.lines().count(), 1, "{name}");
    }
    assert!(!dir.join("dispatch.csv").exists());
}

#[test]
fn solve_ems_accepts_a_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("step,p_ev_kw\n");
    for t in 0..144 {
        csv.push_str(&format!("{t},{}\n", if (40..60).contains(&t) { 50.0 } else { 0.0 }));
    }
    fs::write(tmp.path().join("p.csv"), csv).unwrap();
    ok(&railyard(
        tmp.path(),
        &["solve-ems", "--profile", "p.csv", "--scenarios", "1", "--out", "o"],
    ));
    assert!(tmp.path().join("o/0/dispatch.csv").exists());
}

#[test]
fn misaligned_profile_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut csv = String::from("step,p_ev_kw\n");
    for t in 0..100 {
        csv.push_str(&format!("{t},0\n"));
    }
    fs::write(tmp.path().join("p.csv"), csv).unwrap();
    let out = railyard(tmp.path(), &["solve-ems", "--profile", "p.csv", "--scenarios", "1"]);
    let err = error_json(&out);
    let text = err.to_string();
    assert!(text.contains("expected 144 steps, found 100"), "{text}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn gen_scenarios_writes_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&railyard(tmp.path(), &["gen-scenarios", "--scenarios", "3", "--out", "s"]));
    for id in 0..3 {
        let dir = tmp.path().join(format!("s/{id}"));
        let series = fs::read_to_string(dir.join("series.csv")).unwrap();
        assert!(series.starts_with("step,demand_kw,rbe_kw,radiation_w_m2,pv_kw,buy_eur_kwh,sell_eur_kwh\n"));
        assert_eq!(series.lines().count(), 145);
        let sessions = fs::read_to_string(dir.join("sessions.csv")).unwrap();
        assert!(sessions.starts_with("id,kind,arrival_step,departure_step,"));
    }
}

#[test]
fn unknown_config_key_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("cfg.json"), r#"{"ess": {"volume": 3}}"#).unwrap();
    let out = railyard(tmp.path(), &["run", "--config", "cfg.json"]);
    let err = error_json(&out);
    assert_eq!(err["error"]["stage"], "config");
    let message = err["error"]["message"].as_str().unwrap();
    assert!(message.contains("ess.volume"), "{message}");
}

#[test]
fn invalid_override_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let out = railyard(tmp.path(), &["run", "--gap=-1"]);
    assert_eq!(error_json(&out)["error"]["stage"], "config");
}

#[test]
fn output_directory_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_railyard"))
        .current_dir(tmp.path())
        .env("RAILYARD_OUT", "from_env")
        .args(["gen-scenarios", "--scenarios", "1"])
        .output()
        .unwrap();
    ok(&out);
    assert!(tmp.path().join("from_env/0/series.csv").exists());
    assert!(!tmp.path().join("out").exists());
}
