use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bswi-wave"))
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(files(&p));
        } else {
            out.push(p);
        }
    }
    out.sort();
    out
}

#[test]
fn validate_accepts_shipped_configs() {
    for name in [
        "rod_wave.json",
        "rod_diameters.json",
        "dt_study.json",
        "beam_wave.json",
        "crack_sweep.json",
        "beam_crack.json",
    ] {
        let status = bin().args(["validate", "--config"]).arg(config(name)).status().unwrap();
        assert!(status.success(), "{name}");
    }
}

#[test]
fn config_errors_exit_with_two_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = fs::read_to_string(config("rod_wave.json"))
        .unwrap()
        .replace("\"tau\": 5e-7", "\"tau\": -1.0");
    fs::write(&path, text).unwrap();
    let out = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("pim.tau"));

    let missing = bin()
        .args(["rod-wave", "--config"])
        .arg(dir.path().join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for (dir, jobs) in [(a.path(), "1"), (b.path(), "4")] {
        let status = bin()
            .args(["rod-wave", "--jobs", jobs, "--config"])
            .arg(config("rod_diameters.json"))
            .arg("--out")
            .arg(dir)
            .output()
            .unwrap()
            .status;
        assert!(status.success());
    }
    let fa: Vec<PathBuf> = files(a.path())
        .into_iter()
        .filter(|p| !p.ends_with("timing.txt"))
        .collect();
    assert!(fa.len() > 10);
    for p in fa {
        let q = b.path().join(p.strip_prefix(a.path()).unwrap());
        assert_eq!(fs::read(&p).unwrap(), fs::read(&q).unwrap(), "{}", p.display());
    }
    let header = fs::read_to_string(a.path().join("sensors.csv")).unwrap();
    assert!(header.starts_with("time_s,u@1.5\n"));
    let report = fs::read_to_string(a.path().join("report.txt")).unwrap();
    for key in ["velocity_mps=", "dofs=161", "dt_s=", "crack_estimate_m="] {
        assert!(report.contains(key), "{key}");
    }
}

#[test]
fn crack_locate_post_processes_a_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("one.json");
    let text = fs::read_to_string(config("crack_sweep.json"))
        .unwrap()
        .replace("[0.15, 0.3, 0.45, 0.6, 0.75]", "[0.6]");
    fs::write(&cfg, text).unwrap();
    let sweep = dir.path().join("sweep");
    let ok = bin()
        .args(["crack-sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&sweep)
        .status()
        .unwrap();
    assert!(ok.success());

    let located = dir.path().join("located");
    let out = bin()
        .args(["crack-locate", "--config"])
        .arg(&cfg)
        .arg("--input")
        .arg(sweep.join("crack_0/sensors.csv"))
        .arg("--out")
        .arg(&located)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(located.join("report.txt")).unwrap();
    let est: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("crack_estimate_m="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((est - 0.6).abs() <= 0.075, "estimate {est}");
}
