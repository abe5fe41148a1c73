use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn foamsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foamsim"))
        .current_dir(dir)
        .args(args)
        .env_remove("FOAMSIM_THREADS")
        .output()
        .expect("spawn foamsim")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const CAMERA: &str = r#"{"position":[0.5,0.45,0.03],"forward":[0.05,0.1,1],"up":[0,-1,0],"width":48,"height":36,"hfov":70}"#;
const OTHER: &str = r#"{"position":[0.93,0.5,0.5],"forward":[-1,0.05,0.1],"up":[0,-1,0],"width":48,"height":36,"hfov":60}"#;

fn setup(sites: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cam.json"), CAMERA).unwrap();
    fs::write(dir.path().join("two.json"), format!("[{CAMERA},{OTHER}]")).unwrap();
    ok(&foamsim(dir.path(), &["gen-scene", "--sites", sites, "--seed", "7", "--out", "s.foam"]));
    dir
}

#[test]
fn full_pipeline_is_bit_identical_and_reproducible() {
    let dir = setup("1500");
    let d = dir.path();
    ok(&foamsim(d, &["render-ref", "--scene", "s.foam", "--camera", "cam.json", "--out", "ref.ppm", "--depth-out", "ref.pfm"]));
    let render = [
        "render", "--scene", "s.foam", "--camera", "cam.json", "--levels", "2", "--rc", "20", "--out", "img.ppm",
        "--depth-out", "d.pfm", "--hops-out", "h.pgm", "--stats", "s.json",
    ];
    ok(&foamsim(d, &render));
    let out = foamsim(d, &["compare", "--a", "ref.ppm", "--b", "img.ppm", "--json"]);
    ok(&out);
    let cmp: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cmp["psnr_db"], "inf");
    assert_eq!(cmp["identical"], true);
    assert_eq!(fs::read(d.join("ref.pfm")).unwrap(), fs::read(d.join("d.pfm")).unwrap());

    let manifest = json(d.join("img.ppm.manifest.json"));
    assert_eq!(manifest["config"]["rc"], 20);
    assert_eq!(manifest["config"]["kdtree_depth"], 4);
    let outputs = manifest["outputs"].as_array().unwrap().clone();
    assert_eq!(outputs.len(), 4);
    // Same command again: same bytes, so the same hashes.
    ok(&foamsim(d, &render));
    assert_eq!(json(d.join("img.ppm.manifest.json"))["outputs"], Value::Array(outputs));

    let rep = foamsim(d, &["report", "--stats", "s.json", "--csv-dir", "tables"]);
    ok(&rep);
    let text = String::from_utf8_lossy(&rep.stdout);
    assert!(text.contains("conservation: PASS"), "{text}");
    assert!(d.join("tables/hops.csv").exists() && d.join("tables/memory.csv").exists());
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = setup("800");
    let d = dir.path();
    let args = ["render", "--scene", "s.foam", "--camera", "cam.json", "--levels", "2", "--policy", "drop", "--lane-capacity", "6", "--batch", "4", "--out"];
    let one = Command::new(env!("CARGO_BIN_EXE_foamsim"))
        .current_dir(d)
        .args(args)
        .arg("a.ppm")
        .env("FOAMSIM_THREADS", "1")
        .output()
        .unwrap();
    let many = foamsim(d, &[&args[..], &["b.ppm", "--threads", "4"]].concat());
    assert_eq!(one.status.code(), many.status.code());
    assert_eq!(fs::read(d.join("a.ppm")).unwrap(), fs::read(d.join("b.ppm")).unwrap());
}

#[test]
fn drop_mode_partial_frame_exits_2() {
    let dir = setup("3000");
    let d = dir.path();
    let out = foamsim(
        d,
        &[
            "render", "--scene", "s.foam", "--camera", "cam.json", "--levels", "4", "--depth", "8", "--lane-capacity", "16",
            "--batch", "36", "--policy", "drop", "--out", "img.ppm", "--missing-out", "m.pgm", "--stats", "s.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let stats = json(d.join("s.json"));
    assert!(stats["stats"]["rays_dropped"].as_u64().unwrap() > 0);
    assert_eq!(stats["audit"]["pass"], true);
    let mask = fs::read(d.join("m.pgm")).unwrap();
    // 13-byte header "P5\n48 36\n255\n".
    assert!(mask[13..].contains(&255));
}

#[test]
fn camera_switch_policies() {
    let dir = setup("1500");
    let d = dir.path();
    ok(&foamsim(d, &["render-ref", "--scene", "s.foam", "--camera", "cam.json", "--out", "a.ppm"]));
    let run = |policy: &str, out: &str| {
        foamsim(
            d,
            &[
                "render", "--scene", "s.foam", "--camera", "two.json", "--levels", "2", "--depth", "6", "--rc", "4",
                "--switch-at", "18", "--camera-policy", policy, "--out", out,
            ],
        )
    };
    ok(&run("safe", "safe.ppm"));
    ok(&run("unsafe", "unsafe.ppm"));
    assert_eq!(fs::read(d.join("a.ppm")).unwrap(), fs::read(d.join("safe.ppm")).unwrap());
    assert_ne!(fs::read(d.join("a.ppm")).unwrap(), fs::read(d.join("unsafe.ppm")).unwrap());
    // Without --switch-at a list renders one frame per camera.
    ok(&foamsim(d, &["render", "--scene", "s.foam", "--camera", "two.json", "--levels", "1", "--out", "seq.ppm"]));
    assert!(d.join("seq_0000.ppm").exists() && d.join("seq_0001.ppm").exists());
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = setup("600");
    let d = dir.path();
    fs::write(d.join("cfg.json"), r#"{"levels": 1, "rc": 7, "scan": "col"}"#).unwrap();
    ok(&foamsim(d, &["render", "--scene", "s.foam", "--camera", "cam.json", "--config", "cfg.json", "--levels", "2", "--out", "img.ppm"]));
    let m = json(d.join("img.ppm.manifest.json"));
    assert_eq!(m["config"]["levels"], 2);
    assert_eq!(m["config"]["rc"], 7);
    assert_eq!(m["config"]["scan"], "column");
    assert_eq!(m["config"]["buffer_bytes"], 57600);

    fs::write(d.join("typo.json"), r#"{"levles": 1}"#).unwrap();
    let out = foamsim(d, &["render", "--scene", "s.foam", "--camera", "cam.json", "--config", "typo.json", "--out", "t.ppm"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config field \"levles\""));
}

#[test]
fn partition_reports_tile_budget() {
    let dir = setup("2000");
    let d = dir.path();
    let out = foamsim(d, &["partition", "--scene", "s.foam", "--method", "octree-cap", "--cap", "1", "--no-shards", "--stats", "p.csv"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("exceed the 1472-tile budget"));
    ok(&foamsim(d, &["partition", "--scene", "s.foam", "--depth", "4", "--out", "s.fshd", "--json", "p.json"]));
    assert_eq!(json(d.join("p.json"))["partition_count"], 16);
    ok(&foamsim(d, &["render", "--scene", "s.foam", "--shards", "s.fshd", "--camera", "cam.json", "--levels", "2", "--out", "a.ppm"]));
    ok(&foamsim(d, &["render", "--scene", "s.foam", "--depth", "4", "--camera", "cam.json", "--levels", "2", "--out", "b.ppm"]));
    assert_eq!(fs::read(d.join("a.ppm")).unwrap(), fs::read(d.join("b.ppm")).unwrap());
}

#[test]
fn failures_are_categorized() {
    let dir = setup("300");
    let d = dir.path();
    let out = foamsim(d, &["render", "--scene", "s.foam", "--camera", "cam.json", "--levels", "1", "--sram-budget", "100000", "--out", "x.ppm"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[sram-budget]"));
    assert!(!d.join("x.ppm").exists());

    let out = foamsim(d, &["render", "--scene", "missing.foam", "--camera", "cam.json", "--out", "x.ppm"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[io]"));

    let out = foamsim(d, &["render", "--scene", "s.foam", "--camera", "cam.json", "--levels", "9", "--out", "x.ppm"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[config]"));

    assert_eq!(foamsim(d, &["render", "--bogus"]).status.code(), Some(1));
    assert_eq!(foamsim(d, &["--help"]).status.code(), Some(0));
}
