use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lesion_seg::io::{mask_boundary_pixels, read_image, read_mask};
use lesion_seg::{confusion_counts, gen_lesion_image, metrics, synth20};

fn lesionseg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lesionseg"))
        .args(args)
        .current_dir(dir)
        .env_remove("LESIONSEG_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = lesionseg(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn snake_on_first_suite_case() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--suite", "synth20", "--out-dir", "s"]);
    ok(dir.path(), &["segment", "s/images/case_01.png", "--mask", "pred.png"]);
    let pred = read_mask(&dir.path().join("pred.png")).unwrap().unwrap();
    let (_, truth) = gen_lesion_image(&synth20().cases[0]).unwrap();
    assert_eq!(read_mask(&dir.path().join("s/masks/case_01.png")).unwrap().unwrap(), truth);
    let m = metrics(&confusion_counts(&pred, &truth).unwrap());
    assert!(m.recall >= 0.95, "{m:?}");
}

#[test]
fn otsu_on_noise_free_two_tone_image_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "3", "--noise", "0", "--softness", "0", "--out", "img.png", "--mask", "ref.png"]);
    ok(d, &["segment", "img.png", "--mask", "otsu.png", "--method", "otsu", "--classes", "2"]);
    assert_eq!(
        read_mask(&d.join("otsu.png")).unwrap().unwrap(),
        read_mask(&d.join("ref.png")).unwrap().unwrap()
    );
    // two gray levels cannot be split into four classes
    let out = lesionseg(d, &["segment", "img.png", "--mask", "four.png", "--method", "otsu", "--classes", "4"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-empty bins"));
    assert!(!d.join("four.png").exists());
}

#[test]
fn unreadable_input_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("junk.png"), b"not an image").unwrap();
    for input in ["missing.png", "junk.png"] {
        let out = lesionseg(d, &["segment", input, "--mask", "m.png", "--overlay", "o.png", "--trace", "t.csv"]);
        assert_eq!(out.status.code(), Some(2), "{input}");
    }
    let mut names: Vec<_> = fs::read_dir(d).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["junk.png"]);
}

#[test]
fn eval_perfect_and_mismatched_sets() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--suite", "synth20", "--out-dir", "s"]);
    let stdout = ok(d, &["eval", "--pred", "s/masks", "--ref", "s/masks", "--csv", "t.csv", "--json", "t.json"]);
    assert!(stdout.contains("100.00%"), "{stdout}");
    let csv = fs::read_to_string(d.join("t.csv")).unwrap();
    assert_eq!(csv.lines().count(), 22);
    assert_eq!(csv.lines().last(), Some("AVERAGE,100.00,100.00"));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("t.json")).unwrap()).unwrap();
    assert_eq!(json["rows"].as_array().unwrap().len(), 20);

    let out = lesionseg(d, &["eval", "--pred", "s/masks/case_01.png", "--ref", "s/masks/case_02.png"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("case_01") && err.contains("case_02"), "{err}");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "2", "--out", "img.png"]);
    fs::write(
        d.join("cfg.toml"),
        "method = \"otsu\"\n[snake]\nalpha = 0.25\n[otsu]\nclasses = 3\nlesion = \"darkest\"\n",
    )
    .unwrap();
    ok(d, &["segment", "img.png", "--mask", "a.png", "--config", "cfg.toml", "--meta", "a.json"]);
    ok(d, &["segment", "img.png", "--mask", "b.png", "--config", "cfg.toml", "--method", "snake", "--meta", "b.json"]);
    let a: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("a.json")).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("b.json")).unwrap()).unwrap();
    assert_eq!(a["params"]["method"], "otsu");
    assert_eq!(a["params"]["otsu"]["classes"], 3);
    assert!(a["seed_source"].is_null());
    assert_eq!(b["params"]["method"], "snake");
    assert_eq!(b["params"]["snake"]["alpha"], 0.25);
    assert_eq!(b["params"]["snake"]["beta"], 0.5);
    assert_eq!(b["seed_source"], "hull");
}

#[test]
fn bad_config_is_a_processing_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "2", "--out", "img.png"]);
    fs::write(d.join("cfg.toml"), "method = \"watershed\"\n").unwrap();
    let out = lesionseg(d, &["segment", "img.png", "--mask", "m.png", "--config", "cfg.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let out = lesionseg(d, &["segment", "img.png", "--mask", "m.png", "--config", "absent.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_dir_env_redirects_relative_paths() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = Command::new(env!("CARGO_BIN_EXE_lesionseg"))
        .args(["synth", "--seed", "4", "--out", "img.png", "--mask", "mask.png"])
        .current_dir(d)
        .env("LESIONSEG_OUT_DIR", "results")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(d.join("results/img.png").exists() && d.join("results/mask.png").exists());
    assert!(!d.join("img.png").exists());
}

#[test]
fn overlay_paints_only_the_mask_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "6", "--out", "img.png", "--mask", "mask.png"]);
    ok(d, &["overlay", "img.png", "--mask", "mask.png", "--out", "ov.png"]);
    let img = read_image(&d.join("img.png")).unwrap().unwrap();
    let ov = read_image(&d.join("ov.png")).unwrap().unwrap();
    let mask = read_mask(&d.join("mask.png")).unwrap().unwrap();
    let boundary: std::collections::HashSet<_> = mask_boundary_pixels(&mask).into_iter().collect();
    assert!(!boundary.is_empty());
    for y in 0..img.height() {
        for x in 0..img.width() {
            if boundary.contains(&(x, y)) {
                assert_eq!(ov.pixel(x, y), &[0, 255, 0]);
            } else {
                assert_eq!(ov.pixel(x, y), img.pixel(x, y));
            }
        }
    }
}

#[test]
fn features_report_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "8", "--out", "img.png", "--mask", "mask.png"]);
    let stdout = ok(d, &["features", "img.png", "--mask", "mask.png", "--id", "eight"]);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["image_id"], "eight");
    let lesion = v["lesion"]["pixel_count"].as_u64().unwrap();
    let healthy = v["healthy"]["pixel_count"].as_u64().unwrap();
    assert_eq!(lesion + healthy, 256 * 256);
    assert!(v["lesion"]["v"]["mean"].as_f64().unwrap() < v["healthy"]["v"]["mean"].as_f64().unwrap());
}

#[test]
fn usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(lesionseg(dir.path(), &["segment"]).status.code(), Some(2));
    assert_eq!(lesionseg(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(lesionseg(dir.path(), &["--help"]).status.code(), Some(0));
}
