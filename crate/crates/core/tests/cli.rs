use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_obstacle-lab");

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(config: &Path, out: &Path, sub: &str) -> Output {
    Command::new(BIN)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg(sub)
        .env_remove("OBSTACLE_LAB_CONFIG")
        .env_remove("OBSTACLE_LAB_OUT")
        .output()
        .unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn corrector_scan_writes_one_row_per_eps() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&config("slab.toml"), dir.path(), "corrector-scan");
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("corrector_scan.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("eps,patches,radius,omega_l2,omega_h1"));
    assert!(lines[1].starts_with("0.25,4,0.0625,"));
    assert!(lines[3].starts_with("0.0625,64,0.00390625,"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("corrector-scan: PASS"));
}

#[test]
fn artifacts_are_reproducible() {
    for (cfg, sub) in [("trivial.toml", "solve-eps"), ("slab.toml", "dump-layout"), ("slab.toml", "mu-limit")] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(run(&config(cfg), a.path(), sub).status.code(), Some(0));
        assert_eq!(run(&config(cfg), b.path(), sub).status.code(), Some(0));
        let (fa, fb) = (files(a.path()), files(b.path()));
        assert!(!fa.is_empty());
        assert_eq!(fa, fb, "{cfg} {sub}");
    }
}

#[test]
fn trivial_obstacle_leaves_the_data_untouched() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&config("trivial.toml"), dir.path(), "solve-eps").status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("solve_eps.json")).unwrap()).unwrap();
    let text = report.to_string();
    assert!(text.contains("\"pass\":true"), "{text}");
    assert!(!text.contains("wall_ms"));
}

#[test]
fn unmatched_series_fails_the_lemma_checks() {
    let dir = tempfile::tempdir().unwrap();
    let doc = fs::read_to_string(config("unmatched.toml")).unwrap().replace("0.25, 0.125, 0.0625", "0.25, 0.125");
    let cfg = dir.path().join("unmatched.toml");
    fs::write(&cfg, doc).unwrap();
    let out = run(&cfg, &dir.path().join("out"), "check-lemmas");
    assert_eq!(out.status.code(), Some(1));
    let text = fs::read_to_string(dir.path().join("out/lemmas.json")).unwrap();
    assert!(text.contains("flux identity violated"), "{text}");
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[domain]\nn = 3\nwidth = 1\n[patch]\neps = [0.25]\n[problem]\npsi = \"0\"\nphi = \"1\"\n").unwrap();
    let out = run(&cfg, dir.path(), "dump-layout");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain.width"));

    let missing = run(&dir.path().join("absent.toml"), dir.path(), "dump-layout");
    assert_eq!(missing.status.code(), Some(2));

    let none = Command::new(BIN).arg("dump-layout").env_remove("OBSTACLE_LAB_CONFIG").output().unwrap();
    assert_eq!(none.status.code(), Some(2));
}

#[test]
fn environment_supplies_the_options() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .arg("dump-layout")
        .env("OBSTACLE_LAB_CONFIG", config("slab.toml"))
        .env("OBSTACLE_LAB_OUT", dir.path())
        .env("OBSTACLE_LAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["layout_0.csv", "layout_1.csv", "layout_2.csv", "layout.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let layout = fs::read_to_string(dir.path().join("layout_2.csv")).unwrap();
    assert_eq!(layout.lines().count(), 65);
}
