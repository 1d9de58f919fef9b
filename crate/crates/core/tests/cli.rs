use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hullbench::harness::{to_csv, SweepKind, SweepResult, SweepRow};

fn hullbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hullbench")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn dir(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn rig_applies_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hullbench(&["rig", "-o", dir(tmp.path()), "--count", "5", "--delta-phi", "20", "--theta", "30,60"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg["rig"]["count_per_ring"], 5);
    assert_eq!(cfg["rig"]["theta_deg"], serde_json::json!([30.0, 60.0]));
    let cams: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("cameras.json")).unwrap()).unwrap();
    assert_eq!(cams["cameras"].as_array().unwrap().len(), 10);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"rig": {"theta_deg": [45], "delta_phi_deg": 90, "count_per_ring": 4}, "seed": 9}"#).unwrap();
    let out = hullbench(&["rig", "-c", dir(&tmp.path().join("c.json")), "-o", dir(&tmp.path().join("o")), "--count", "3"]);
    assert_eq!(code(&out), 0);
    let cfg: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("o/config.json")).unwrap()).unwrap();
    assert_eq!(cfg["rig"]["count_per_ring"], 3);
    assert_eq!(cfg["rig"]["delta_phi_deg"], 90.0);
    assert_eq!(cfg["seed"], 9);
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&hullbench(&["run", "-o", dir(tmp.path()), "--resolution", "2"])), 2);
    assert_eq!(code(&hullbench(&["run", "-c", dir(&tmp.path().join("missing.json"))])), 2);
    fs::write(tmp.path().join("typo.json"), r#"{"resolutoin": 64}"#).unwrap();
    assert_eq!(code(&hullbench(&["run", "-c", dir(&tmp.path().join("typo.json"))])), 2);
    assert_eq!(code(&hullbench(&["run", "--object", "no-equals-sign"])), 2);
    assert_eq!(code(&hullbench(&["sweep", "--kind", "overlap", "--pairs", "4x10"])), 2);
    assert_eq!(code(&hullbench(&["frobnicate"])), 2);
    let out = Command::new(env!("CARGO_BIN_EXE_hullbench")).args(["rig", "-o", dir(tmp.path())]).env("HULLBENCH_THREADS", "0").output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn stage_failures_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hullbench(&["run", "-o", dir(tmp.path()), "--query", "teapot", "--resolution", "16", "--no-views"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("segmentation"));
    // Later stages without their inputs.
    assert_eq!(code(&hullbench(&["reconstruct", "-o", dir(&tmp.path().join("empty"))])), 3);
    assert_eq!(code(&hullbench(&["eval-geom", "-o", dir(tmp.path()), "--mesh", dir(&tmp.path().join("nope.ply"))])), 3);
}

#[test]
fn stages_chain_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dir(tmp.path());
    let common = ["-o", o, "--count", "6", "--delta-phi", "60", "--resolution", "32", "--samples", "3000", "--iou-resolution", "32"];
    for stage in ["rig", "render", "segment", "reconstruct", "clean", "eval-geom", "eval-tex"] {
        let mut args = vec![stage];
        args.extend(common);
        let out = hullbench(&args);
        assert_eq!(code(&out), 0, "{stage}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["segmentation.json", "hull.ply", "tracks.json", "carve_stats.json", "clean_report.json", "mesh.ply", "geometry.json", "texture.json"] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
    let geom: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("geometry.json")).unwrap()).unwrap();
    assert!(geom["iou"].as_f64().unwrap() > 0.3);
}

fn row(n: usize, ok: bool) -> SweepRow {
    SweepRow {
        n_images: n,
        theta_deg: 45.0,
        delta_phi_deg: 360.0 / n as f64,
        cd: ok.then_some(0.001 * n as f64),
        iou: ok.then_some(0.5),
        psnr_db: None,
        ssim: ok.then_some(0.9),
        lpips: None,
        timings: None,
        status: if ok { "ok" } else { "error" }.into(),
        error: (!ok).then(|| "boom".into()),
    }
}

#[test]
fn report_reemits_saved_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let result = SweepResult { kind: SweepKind::Images, rows: vec![row(4, true), row(8, false)] };
    fs::write(tmp.path().join("sweep.json"), serde_json::to_string(&result).unwrap()).unwrap();
    let out = hullbench(&["report", "--input", dir(&tmp.path().join("sweep.json")), "--plotdata"]);
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(csv, to_csv(&result));
    assert_eq!(String::from_utf8_lossy(&out.stdout), csv);
    assert!(tmp.path().join("plot_iou_vs_n_images.csv").is_file());
    assert_eq!(code(&hullbench(&["report", "--input", dir(&tmp.path().join("absent.json"))])), 2);
}
