use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn blp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blp")).current_dir(dir).args(args).output().expect("spawn blp")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn sample_writes_full_grid() {
    let dir = TempDir::new().unwrap();
    let out = blp(
        dir.path(),
        &["sample", "--family", "3", "--window", "-0.04", "0.04", "-0.04", "0.04", "--res", "256", "--out", "f.csv"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 256);
    assert!(rows.iter().all(|r| r.split(',').count() == 256));
    assert!(text.starts_with("# window -0.04 0.04 -0.04 0.04\n# 256 256\n# manifest sha256:"));
    assert!(dir.path().join("f.manifest.json").exists());
    assert!(dir.path().join("f.gp").exists());
}

#[test]
fn sample_zoom_levels_get_suffixes() {
    let dir = TempDir::new().unwrap();
    let out = blp(dir.path(), &["sample", "--preset", "fig2", "--res", "16", "--out", "z.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for k in 0..3 {
        let doc = json(&dir.path().join(format!("z_L{k}.json")));
        assert_eq!(doc["nx"], 16);
        let half = doc["window"]["x_max"].as_f64().unwrap();
        assert!((half - 0.04 * 0.1f64.powi(k)).abs() < 1e-15);
    }
}

#[test]
fn resolution_one_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&blp(dir.path(), &["sample", "--family", "1", "--res", "1"])), 2);
}

#[test]
fn unknown_preset_and_bad_flags_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&blp(dir.path(), &["sample", "--preset", "fig9"])), 2);
    assert_eq!(code(&blp(dir.path(), &["sample", "--family", "4"])), 2);
    assert_eq!(code(&blp(dir.path(), &["sample", "--family", "1", "--out", "f.txt"])), 2);
}

#[test]
fn manifest_replay_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let first = blp(dir.path(), &["sample", "--family", "2", "--res", "32", "--delta", "0.5", "--out", "a.csv"]);
    assert_eq!(code(&first), 0);
    let replay = blp(dir.path(), &["sample", "--manifest", "a.manifest.json", "--out", "b.csv"]);
    assert_eq!(code(&replay), 0, "{}", String::from_utf8_lossy(&replay.stderr));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tampered_manifest_is_rejected() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&blp(dir.path(), &["sample", "--family", "1", "--res", "8", "--out", "a.csv"])), 0);
    let path = dir.path().join("a.manifest.json");
    let text = std::fs::read_to_string(&path).unwrap().replace("\"resolution\": 8", "\"resolution\": 9");
    std::fs::write(&path, text).unwrap();
    assert_eq!(code(&blp(dir.path(), &["sample", "--manifest", "a.manifest.json", "--out", "b.csv"])), 2);
}

#[test]
fn synthetic_carpet_dimension() {
    let dir = TempDir::new().unwrap();
    let out = blp(dir.path(), &["dimension", "--synthetic", "carpet", "--depth", "6", "--out", "d.json"]);
    assert_eq!(code(&out), 0);
    let doc = json(&dir.path().join("d.json"));
    let slope = doc["estimates"][0]["report"]["slope"].as_f64().unwrap();
    assert!((slope - 8f64.ln() / 3f64.ln()).abs() < 0.05, "{slope}");
    let pairs = std::fs::read_to_string(dir.path().join("d_pairs.csv")).unwrap();
    assert!(pairs.lines().any(|l| l == "epsilon,count"));
}

#[test]
fn dimension_of_sampled_grid() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&blp(dir.path(), &["sample", "--family", "3", "--res", "64", "--out", "g.csv"])), 0);
    let out = blp(dir.path(), &["dimension", "--grid", "g.csv", "--out", "d.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&dir.path().join("d.json"));
    let report = &doc["estimates"][0]["report"];
    assert_eq!(report["epsilons"].as_array().unwrap().len(), 6);
    assert!(report["slope"].as_f64().unwrap().is_finite());
}

#[test]
fn empty_grid_is_degenerate() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("empty.csv"), "").unwrap();
    assert_eq!(code(&blp(dir.path(), &["dimension", "--grid", "empty.csv"])), 3);
}

#[test]
fn constant_field_is_degenerate() {
    let dir = TempDir::new().unwrap();
    let grid = "# window 0 1 0 1\n# 4 4\n1,1,1,1\n1,1,1,1\n1,1,1,1\n1,1,1,1\n";
    std::fs::write(dir.path().join("flat.csv"), grid).unwrap();
    let out = blp(dir.path(), &["dimension", "--grid", "flat.csv", "--eps-min-exp", "1", "--eps-max-exp", "2"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_constant_pair_passes() {
    let dir = TempDir::new().unwrap();
    let out = blp(dir.path(), &["verify", "--family", "const", "--res", "41"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let doc = json(&dir.path().join("verify.json"));
    assert_eq!(doc["real"]["residuals"]["max_abs_res_eq1a"], 0.0);
}

#[test]
fn verify_detects_perturbation() {
    let dir = TempDir::new().unwrap();
    let out = blp(dir.path(), &["verify", "--family", "const", "--res", "41", "--perturb", "0.01"]);
    assert_eq!(code(&out), 1);
    let doc = json(&dir.path().join("verify.json"));
    let r = doc["real"]["residuals"]["max_abs_res_eq1b"].as_f64().unwrap();
    assert!((r - 0.01).abs() < 1e-9, "{r}");
}

#[test]
fn verify_rejects_negative_tolerance() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&blp(dir.path(), &["verify", "--family", "const", "--tol", "-1"])), 2);
}

#[test]
fn table1_small_run() {
    let dir = TempDir::new().unwrap();
    let out = blp(dir.path(), &["table1", "--res", "64", "--levels", "1", "--eps-max-exp", "6", "--out", "t.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&dir.path().join("t.json"));
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r["level"] == 0 && r["estimate"].as_f64().is_some()));
    assert!(dir.path().join("t.txt").exists());
}

#[test]
fn calibrate_passes() {
    let dir = TempDir::new().unwrap();
    let out = blp(dir.path(), &["calibrate", "--out", "c.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str, out: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_blp"))
            .current_dir(dir.path())
            .env("BLP_THREADS", threads)
            .args(["sample", "--family", "1", "--res", "48", "--out", out])
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        std::fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("1", "a.csv"), run("3", "b.csv"));
    let bad = Command::new(env!("CARGO_BIN_EXE_blp"))
        .current_dir(dir.path())
        .env("BLP_THREADS", "zero")
        .args(["sample", "--family", "1", "--res", "8"])
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn verify_type_iii_within_tolerance() {
    let dir = TempDir::new().unwrap();
    let out = blp(dir.path(), &["verify", "--family", "3", "--window", "0.5", "1.5", "0.5", "1.5", "--tol", "1e-4"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
}
