//! End-to-end tests of the command-line surface: exit codes, file formats
//! and the documented defaults.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lanekit"))
}

fn write_scene(dir: &Path) -> PathBuf {
    let scene = serde_json::json!({
        "seed": 3,
        "lanes": [
            {"category": 1, "offset_x": -3.5},
            {"category": 2, "offset_x": 3.5}
        ],
        "terrain": [0.0, 0.0, 0.001],
        "camera": {"fx": 240.0, "fy": 240.0, "cx": 240.0, "cy": 160.0, "width": 480, "height": 320},
        "trajectory": [{"y": 0.0}, {"y": 1.0}]
    });
    let path = dir.join("scene.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&scene).unwrap()).unwrap();
    path
}

fn synth_world(dir: &Path) -> PathBuf {
    let spec = write_scene(dir);
    let out = dir.join("world");
    let status = bin().args(["synth", "--spec"]).arg(&spec).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());
    out
}

fn identity_predictions(world: &Path, out: &Path) {
    let ysteps = lanekit::anchor::YSteps::default_steps();
    let mut paths: Vec<_> = std::fs::read_dir(world.join("annotations"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    let mut lines = Vec::new();
    for path in paths {
        let ann = lanekit::io::parse_annotation(&std::fs::read(path).unwrap()).unwrap();
        let lanes = ann.lanes_at(&ysteps);
        lines.push(lanekit::io::prediction_line(&ann.frame_id, &lanes, &ysteps, 1.0));
    }
    std::fs::write(out, lines.join("\n") + "\n").unwrap();
}

#[test]
fn evaluate_self_is_perfect_and_missing_frames_count_fn() {
    let dir = tempfile::tempdir().unwrap();
    let world = synth_world(dir.path());
    let preds = dir.path().join("preds.jsonl");
    identity_predictions(&world, &preds);

    let report_path = dir.path().join("report.json");
    let output = bin()
        .args(["evaluate", "--gt"])
        .arg(world.join("annotations"))
        .arg("--pred")
        .arg(&preds)
        .arg("--out")
        .arg(&report_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.starts_with("f1 1.0000"), "summary line: {stdout}");
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    assert_eq!(report["f1"], 1.0);
    assert_eq!(report["frames"], 2);

    // drop the second frame from the predictions: its gts become FN, exit 0
    let text = std::fs::read_to_string(&preds).unwrap();
    let first_line = text.lines().next().unwrap();
    std::fs::write(&preds, format!("{first_line}\n")).unwrap();
    let output = bin()
        .args(["evaluate", "--gt"])
        .arg(world.join("annotations"))
        .arg("--pred")
        .arg(&preds)
        .arg("--out")
        .arg(&report_path)
        .output()
        .unwrap();
    assert!(output.status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    assert_eq!(report["fn"], 2);
    assert_eq!(report["recall"], 0.5);
}

#[test]
fn evaluate_constant_shift_reads_exact_errors() {
    let dir = tempfile::tempdir().unwrap();
    let world = synth_world(dir.path());

    // re-emit the ground truth shifted +0.1 m in x
    let ysteps = lanekit::anchor::YSteps::default_steps();
    let mut paths: Vec<_> = std::fs::read_dir(world.join("annotations"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    let mut lines = Vec::new();
    for path in paths {
        let ann = lanekit::io::parse_annotation(&std::fs::read(path).unwrap()).unwrap();
        let lanes: Vec<_> = ann
            .lanes_at(&ysteps)
            .into_iter()
            .map(|mut l| {
                for x in &mut l.x {
                    *x += 0.1;
                }
                l
            })
            .collect();
        lines.push(lanekit::io::prediction_line(&ann.frame_id, &lanes, &ysteps, 1.0));
    }
    let preds = dir.path().join("shifted.jsonl");
    std::fs::write(&preds, lines.join("\n") + "\n").unwrap();

    let report_path = dir.path().join("report.json");
    let status = bin()
        .args(["evaluate", "--gt"])
        .arg(world.join("annotations"))
        .arg("--pred")
        .arg(&preds)
        .arg("--out")
        .arg(&report_path)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    assert!((report["x_near"].as_f64().unwrap() - 0.1).abs() < 1e-9);
    assert!((report["x_far"].as_f64().unwrap() - 0.1).abs() < 1e-9);
    assert_eq!(report["z_near"].as_f64().unwrap(), 0.0);
}

#[test]
fn evaluate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let world = synth_world(dir.path());

    // exit 3: predictions on unknown frame ids only
    let preds = dir.path().join("other.jsonl");
    std::fs::write(&preds, b"{\"frame_id\":\"nope\",\"lanes\":[]}\n").unwrap();
    let status = bin()
        .args(["evaluate", "--gt"])
        .arg(world.join("annotations"))
        .arg("--pred")
        .arg(&preds)
        .arg("--out")
        .arg(dir.path().join("r.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));

    // exit 2: malformed predictions
    std::fs::write(&preds, b"{\"frame_id\":\"frame_000000\",\"lanes\":[{\"category_probs\":[0.5,0.1],\"xyz\":[[0.0],[5.0],[0.0]],\"visibility\":[1.0]}]}\n").unwrap();
    let output = bin()
        .args(["evaluate", "--gt"])
        .arg(world.join("annotations"))
        .arg("--pred")
        .arg(&preds)
        .arg("--out")
        .arg(dir.path().join("r.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("simplex"));

    // exit 2: missing gt directory
    let status = bin()
        .args(["evaluate", "--gt"])
        .arg(dir.path().join("missing"))
        .arg("--pred")
        .arg(&preds)
        .arg("--out")
        .arg(dir.path().join("r.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn warp_identity_pose_reproduces_source_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let world = synth_world(dir.path());

    // constant all-valid depth so every pixel participates
    let depth = lanekit::camera::DepthMap::constant(480, 320, 10.0, 0.1, 80.0).unwrap();
    let mut bytes = Vec::new();
    lanekit::image::write_depth_raster(&depth, &mut bytes).unwrap();
    let depth_path = dir.path().join("const.dpth");
    std::fs::write(&depth_path, &bytes).unwrap();

    let pose_path = dir.path().join("identity.json");
    std::fs::write(
        &pose_path,
        br#"{"rotation": [[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]], "translation": [0.0,0.0,0.0]}"#,
    )
    .unwrap();

    let src = world.join("frames/frame_000000.ppm");
    let out = dir.path().join("warped.ppm");
    let status = bin()
        .args(["warp", "--src"])
        .arg(&src)
        .arg("--depth")
        .arg(&depth_path)
        .arg("--pose")
        .arg(&pose_path)
        .arg("--intrinsics")
        .arg(world.join("intrinsics.json"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read(&src).unwrap(), std::fs::read(&out).unwrap());
}

#[test]
fn anchors_default_config_emits_3375() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("anchors.json");
    let output = bin().args(["anchors", "--out"]).arg(&out).output().unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("3375"));
    let anchors = lanekit::io::parse_anchor_dump(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(anchors.len(), 3375);
}

#[test]
fn fit_intrinsics_exit_codes_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let world = synth_world(dir.path());
    let obs = world.join("observations.jsonl");

    let out_a = dir.path().join("fit_a.json");
    let status = bin()
        .args(["fit-intrinsics", "--obs"])
        .arg(&obs)
        .args(["--width", "480", "--out"])
        .arg(&out_a)
        .status()
        .unwrap();
    assert!(status.success());

    let out_b = dir.path().join("fit_b.json");
    let status = bin()
        .args(["fit-intrinsics", "--obs"])
        .arg(&obs)
        .args(["--width", "480", "--out"])
        .arg(&out_b)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read(&out_a).unwrap(), std::fs::read(&out_b).unwrap());

    // rz-min above every rotation: exit 4, diagnostics name the segment
    let output = bin()
        .args(["fit-intrinsics", "--obs"])
        .arg(&obs)
        .args(["--width", "480", "--rz-min", "10.0", "--out"])
        .arg(dir.path().join("fit_c.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&output.stderr).contains("segment_000000"));
}

#[test]
fn fit_intrinsics_vertical_pairs_produce_f_fit_y() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.jsonl");
    let mut lines = Vec::new();
    for i in 0..30 {
        lines.push(format!(
            r#"{{"segment_id":"s","r_z":{},"f_x":{},"r_x":{},"f_y":{}}}"#,
            0.05 + 0.002 * i as f64,
            500.0 + (i % 5) as f64,
            0.04 + 0.002 * i as f64,
            490.0 + (i % 7) as f64,
        ));
    }
    std::fs::write(&obs, lines.join("\n") + "\n").unwrap();
    let out = dir.path().join("fit.json");
    let status = bin()
        .args(["fit-intrinsics", "--obs"])
        .arg(&obs)
        .args(["--width", "480", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let fit: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert!(fit["s"]["f_fit"].is_f64());
    assert!(fit["s"]["f_fit_y"].is_f64(), "vertical fit missing: {fit}");
}

#[test]
fn evaluate_config_overrides_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let world = synth_world(dir.path());

    // shift predictions +1.0 m: inside the default 1.5 m threshold but
    // outside a tightened 0.5 m one
    let ysteps = lanekit::anchor::YSteps::default_steps();
    let mut paths: Vec<_> = std::fs::read_dir(world.join("annotations"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    let mut lines = Vec::new();
    for path in paths {
        let ann = lanekit::io::parse_annotation(&std::fs::read(path).unwrap()).unwrap();
        let lanes: Vec<_> = ann
            .lanes_at(&ysteps)
            .into_iter()
            .map(|mut l| {
                for x in &mut l.x {
                    *x += 1.0;
                }
                l
            })
            .collect();
        lines.push(lanekit::io::prediction_line(&ann.frame_id, &lanes, &ysteps, 1.0));
    }
    let preds = dir.path().join("preds.jsonl");
    std::fs::write(&preds, lines.join("\n") + "\n").unwrap();

    let report_path = dir.path().join("report.json");
    let run = |config: Option<&Path>| -> serde_json::Value {
        let mut cmd = bin();
        cmd.args(["evaluate", "--gt"])
            .arg(world.join("annotations"))
            .arg("--pred")
            .arg(&preds)
            .arg("--out")
            .arg(&report_path);
        if let Some(cfg) = config {
            cmd.arg("--config").arg(cfg);
        }
        assert!(cmd.status().unwrap().success());
        serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap()
    };

    let default_report = run(None);
    assert_eq!(default_report["f1"], 1.0);

    let cfg_path = dir.path().join("tight.json");
    std::fs::write(&cfg_path, br#"{"eval": {"distance_threshold": 0.5}}"#).unwrap();
    let tight_report = run(Some(&cfg_path));
    assert_eq!(tight_report["f1"], 0.0, "1 m shift must fail a 0.5 m threshold");
}

#[test]
fn synth_same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_scene(dir.path());
    for (out, seed) in [("w1", "5"), ("w2", "5"), ("w3", "6")] {
        let status = bin()
            .args(["synth", "--spec"])
            .arg(&spec)
            .arg("--out")
            .arg(dir.path().join(out))
            .args(["--seed", seed])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let read = |w: &str| std::fs::read(dir.path().join(w).join("frames/frame_000000.ppm")).unwrap();
    assert_eq!(read("w1"), read("w2"));
    assert_ne!(read("w1"), read("w3"), "different seeds must differ");
}

#[test]
fn help_documents_protocol_defaults() {
    let out = bin().args(["evaluate", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for needle in ["1.5 m", "75%", "40 m", "0.5", "[0.1, 80]"] {
        assert!(text.contains(needle), "evaluate --help missing {needle:?}:\n{text}");
    }
    let out = bin().args(["anchors", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    for needle in ["45", "±1", "±20", "[-20, 20]"] {
        assert!(text.contains(needle), "anchors --help missing {needle:?}:\n{text}");
    }
}
