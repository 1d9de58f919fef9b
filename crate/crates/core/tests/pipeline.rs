use std::fs;
use std::path::Path;

use hullbench::geometry::load_mesh;
use hullbench::harness::{
    run_pipeline, stage_clean, stage_eval_geom, stage_reconstruct, stage_render, stage_rig, stage_segment, sweep_image_count,
    sweep_theta, ObjectSpec, PipelineConfig, Stage,
};

// Small, fast settings; the trends themselves are covered by the acceptance suite.
fn quick(dir: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::default();
    c.resolution = 48;
    c.metrics.samples = 5000;
    c.metrics.resolution = 48;
    c.tracks.candidates = 300;
    c.rig.count_per_ring = 8;
    c.rig.delta_phi_deg = 45.0;
    c.write_views = false;
    c.output_dir = dir.to_path_buf();
    c
}

fn sphere(dir: &Path) -> PipelineConfig {
    let mut c = quick(dir);
    c.objects = vec![ObjectSpec { name: "ball".into(), mesh: "builtin:sphere".into(), offset: [0.0; 3] }];
    c.query = "ball".into();
    c
}

#[test]
fn more_views_give_a_tighter_sphere() {
    let tmp = tempfile::tempdir().unwrap();
    let mut few = sphere(&tmp.path().join("few"));
    few.rig.count_per_ring = 4;
    few.rig.delta_phi_deg = 90.0;
    let mut many = sphere(&tmp.path().join("many"));
    many.rig.count_per_ring = 36;
    many.rig.delta_phi_deg = 10.0;
    let few = run_pipeline(&few).unwrap().metrics.iou;
    let many = run_pipeline(&many).unwrap().metrics.iou;
    assert!(many > few, "{many} vs {few}");
}

#[test]
fn run_writes_all_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = quick(tmp.path());
    cfg.write_views = true;
    let out = run_pipeline(&cfg).unwrap();
    for f in [
        "config.json",
        "cameras.json",
        "segmentation.json",
        "carve_stats.json",
        "tracks.json",
        "clean_report.json",
        "hull.ply",
        "mesh.ply",
        "metrics.json",
        "run.json",
        "views/view_0_000.ppm",
        "masks/mask_figurine_0_007.pgm",
        "masked/masked_0_003.ppm",
        "holdout/gt_000.ppm",
        "holdout/recon_007.ppm",
    ] {
        assert!(tmp.path().join(f).is_file(), "missing {f}");
    }
    let t = out.timings;
    assert!(t.total_s >= t.segmentation_s + t.sparse_s + t.mesh_s - 1e-6);
    let metrics: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("metrics.json")).unwrap()).unwrap();
    for key in ["cd", "iou", "psnr_db", "ssim", "lpips", "config"] {
        assert!(metrics.get(key).is_some(), "metrics.json lacks {key}");
    }
    assert_eq!(metrics["geometry"]["point_source"], "surface");
    assert_eq!(load_mesh(tmp.path().join("mesh.ply")).unwrap().faces, out.mesh.faces);
    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(run["status"], "ok");
}

#[test]
fn unmatched_query_stops_at_segmentation() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = quick(tmp.path());
    cfg.query = "teapot".into();
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.stage, Stage::Segmentation);
    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(run["status"], "error");
    assert_eq!(run["stage"], "segmentation");
    assert!(!tmp.path().join("metrics.json").exists());
}

#[test]
fn single_view_sweep_row_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = sphere(tmp.path());
    let result = sweep_image_count(&cfg, &[1, 8], true);
    assert_eq!(result.rows.len(), 2);
    assert!(result.rows.iter().all(|r| r.status == "ok"), "{:?}", result.rows);
    assert_eq!(result.rows[1].delta_phi_deg, 45.0);
    let (one, eight) = (result.rows[0].iou.unwrap(), result.rows[1].iou.unwrap());
    assert!(one < 0.75 && one < eight, "{one} vs {eight}");
}

#[test]
fn repeated_rows_are_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick(&tmp.path().join("a"));
    let a = sweep_image_count(&cfg, &[6], true).without_timings();
    let cfg = quick(&tmp.path().join("b"));
    let b = sweep_image_count(&cfg, &[6], true).without_timings();
    assert_eq!(a, b);
}

#[test]
fn theta_protocols_keep_declaration_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cat = sweep_theta(&quick(&tmp.path().join("cat")), &[30.0, 45.0, 75.0]);
    let thetas: Vec<f64> = cat.rows.iter().map(|r| r.theta_deg).collect();
    assert_eq!(thetas, [30.0, 45.0, 75.0]);
    let dog = sweep_theta(&quick(&tmp.path().join("dog")), &[45.0, 90.0]);
    assert_eq!(dog.rows.len(), 2);
    assert!(cat.rows.iter().chain(&dog.rows).all(|r| r.status == "ok" && r.n_images == 8 && r.delta_phi_deg == 45.0));
}

#[test]
fn staged_run_matches_full_run() {
    let tmp = tempfile::tempdir().unwrap();
    let full = run_pipeline(&quick(&tmp.path().join("full"))).unwrap();
    let cfg = quick(&tmp.path().join("staged"));
    assert_eq!(stage_rig(&cfg).unwrap().len(), 8);
    assert_eq!(stage_render(&cfg).unwrap(), 8);
    assert_eq!(stage_segment(&cfg).unwrap().object, "figurine");
    let stats = stage_reconstruct(&cfg).unwrap();
    assert_eq!(stats, full.metrics.carve);
    assert_eq!(stage_clean(&cfg).unwrap(), full.metrics.clean);
    let hull = |d: &str| fs::read(tmp.path().join(d).join("hull.ply")).unwrap();
    assert_eq!(hull("full"), hull("staged"));
    // Colors come from 8-bit view files, so they may differ by quantization.
    let staged = load_mesh(tmp.path().join("staged/mesh.ply")).unwrap();
    assert_eq!(staged.faces, full.mesh.faces);
    let (a, b) = (staged.vertex_colors.unwrap(), full.mesh.vertex_colors.unwrap());
    for (x, y) in a.iter().zip(&b) {
        for c in 0..3 {
            assert!((x[c] - y[c]).abs() <= 1.0 / 255.0 + 1e-9, "{x:?} vs {y:?}");
        }
    }
    let geom = stage_eval_geom(&cfg, &tmp.path().join("staged/mesh.ply")).unwrap();
    // PLY keeps 9 significant digits.
    assert!((geom.chamfer - full.metrics.cd).abs() <= 1e-9 * full.metrics.cd.max(1.0));
    assert_eq!(geom.iou, full.metrics.iou);
}

#[test]
fn mesh_file_objects_resolve_against_config_dir() {
    let tmp = tempfile::tempdir().unwrap();
    hullbench::geometry::save_mesh(&hullbench::harness::scenes::cube(0.6), tmp.path().join("box.obj")).unwrap();
    let text = r#"{"objects": [{"name": "box", "mesh": "box.obj"}, {"name": "ball", "mesh": "builtin:sphere", "offset": [1.5, 0, 0]}],
                   "query": "box", "resolution": 32, "rig": {"theta_deg": [60], "delta_phi_deg": 60, "count_per_ring": 6},
                   "metrics": {"samples": 2000, "resolution": 32}, "write_views": false}"#;
    fs::write(tmp.path().join("cfg.json"), text).unwrap();
    let mut cfg = PipelineConfig::load(&tmp.path().join("cfg.json")).unwrap();
    cfg.output_dir = tmp.path().join("out");
    let out = run_pipeline(&cfg).unwrap();
    assert!(out.metrics.iou > 0.5, "{}", out.metrics.iou);
}
