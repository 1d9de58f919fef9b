use std::fs;
use std::path::Path;

use super::sweep::{SweepKind, SweepResult, SweepRow};
use super::ConfigError;

pub const CSV_HEADER: &str = "n_images,theta_deg,delta_phi_deg,cd,iou,psnr_db,ssim,lpips,seg_s,sparse_s,mesh_s,total_s,status";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_line(r: &SweepRow) -> String {
    let t = r.timings;
    [
        r.n_images.to_string(),
        r.theta_deg.to_string(),
        r.delta_phi_deg.to_string(),
        opt(r.cd),
        opt(r.iou),
        opt(r.psnr_db),
        opt(r.ssim),
        opt(r.lpips),
        opt(t.map(|t| t.segmentation_s)),
        opt(t.map(|t| t.sparse_s)),
        opt(t.map(|t| t.mesh_s)),
        opt(t.map(|t| t.total_s)),
        r.status.clone(),
    ]
    .join(",")
}

/// Header plus one line per row, in row order. Absent values are empty.
pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        out.push_str(&csv_line(r));
        out.push('\n');
    }
    out
}

pub fn to_json(result: &SweepResult) -> String {
    serde_json::to_string_pretty(result).expect("sweep serializes") + "\n"
}

/// `(file name, CSV text)` plot series over the sweep's natural x axis;
/// failed rows are skipped.
pub fn plot_series(result: &SweepResult) -> Vec<(String, String)> {
    let (x_name, x): (&str, Box<dyn Fn(&SweepRow) -> String>) = match result.kind {
        SweepKind::Images => ("n_images", Box::new(|r| r.n_images.to_string())),
        SweepKind::Theta => ("theta_deg", Box::new(|r| r.theta_deg.to_string())),
        SweepKind::Overlap => ("config", Box::new(|r| format!("{}x{}", r.n_images, r.delta_phi_deg))),
    };
    let ok: Vec<&SweepRow> = result.rows.iter().filter(|r| r.status == "ok").collect();
    let series = |name: &str, cols: &str, f: &dyn Fn(&SweepRow) -> String| {
        let mut text = format!("{x_name},{cols}\n");
        for r in &ok {
            text.push_str(&format!("{},{}\n", x(r), f(r)));
        }
        (format!("plot_{name}_vs_{x_name}.csv"), text)
    };
    vec![
        series("cd", "cd", &|r| opt(r.cd)),
        series("iou", "iou", &|r| opt(r.iou)),
        series("texture", "psnr_db,ssim", &|r| format!("{},{}", opt(r.psnr_db), opt(r.ssim))),
        series("runtime", "seg_s,sparse_s,mesh_s,total_s", &|r| {
            let t = r.timings;
            format!(
                "{},{},{},{}",
                opt(t.map(|t| t.segmentation_s)),
                opt(t.map(|t| t.sparse_s)),
                opt(t.map(|t| t.mesh_s)),
                opt(t.map(|t| t.total_s))
            )
        }),
    ]
}

/// Writes `sweep.csv` or `sweep.json` (and plot-data files) into `dir`.
pub fn emit_report(result: &SweepResult, format: ReportFormat, plotdata: bool, dir: &Path) -> Result<(), ConfigError> {
    if result.rows.is_empty() {
        return Err(ConfigError::Invalid("sweep has no rows".into()));
    }
    let io = |p: &Path, e: std::io::Error| ConfigError::Io(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let (name, text) = match format {
        ReportFormat::Csv => ("sweep.csv", to_csv(result)),
        ReportFormat::Json => ("sweep.json", to_json(result)),
    };
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| io(&path, e))?;
    if plotdata {
        for (file, text) in plot_series(result) {
            let path = dir.join(file);
            fs::write(&path, text).map_err(|e| io(&path, e))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::pipeline::StageTimings;
    use crate::metrics::Psnr;

    fn row(n: usize, ok: bool) -> SweepRow {
        SweepRow {
            n_images: n,
            theta_deg: 45.0,
            delta_phi_deg: 360.0 / n as f64,
            cd: ok.then_some(0.001 * n as f64),
            iou: ok.then_some(0.5 + 0.01 * n as f64),
            psnr_db: ok.then_some(if n == 36 { Psnr::Infinite } else { Psnr::Finite(20.0 + n as f64 / 3.0) }),
            ssim: ok.then_some(0.9),
            lpips: None,
            timings: ok.then_some(StageTimings { segmentation_s: 0.01, sparse_s: 0.1 * n as f64, mesh_s: 0.3, total_s: 1.0 }),
            status: if ok { "ok" } else { "error" }.into(),
            error: (!ok).then(|| "render stage failed".into()),
        }
    }

    fn sample() -> SweepResult {
        SweepResult { kind: SweepKind::Images, rows: vec![row(4, true), row(8, false), row(12, true), row(18, true), row(36, true)] }
    }

    #[test]
    fn csv_shape() {
        let csv = to_csv(&sample());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[2], "8,45,45,,,,,,,,,,error");
        assert!(lines[5].contains(",inf,"));
        for l in &lines {
            assert_eq!(l.split(',').count(), 13);
        }
    }

    // Parse both formats independently and compare field by field.
    #[test]
    fn csv_and_json_agree() {
        let result = sample();
        let csv = to_csv(&result);
        let json: serde_json::Value = serde_json::from_str(&to_json(&result)).unwrap();
        let header: Vec<&str> = CSV_HEADER.split(',').collect();
        for (line, jrow) in csv.lines().skip(1).zip(json["rows"].as_array().unwrap()) {
            for (col, cell) in header.iter().zip(line.split(',')) {
                let j = match *col {
                    "seg_s" => &jrow["timings"]["segmentation_s"],
                    "sparse_s" | "mesh_s" | "total_s" => &jrow["timings"][*col],
                    c => &jrow[c],
                };
                let expected = match j {
                    serde_json::Value::Null => String::new(),
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Number(n) => n.as_f64().unwrap().to_string(),
                    other => panic!("unexpected {other}"),
                };
                assert_eq!(cell, expected, "column {col}");
            }
        }
        let back: SweepResult = serde_json::from_value(json).unwrap();
        assert_eq!(back, result);
    }

    #[test]
    fn emit_files() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&sample(), ReportFormat::Csv, true, dir.path()).unwrap();
        emit_report(&sample(), ReportFormat::Json, false, dir.path()).unwrap();
        assert!(dir.path().join("sweep.csv").is_file());
        assert!(dir.path().join("sweep.json").is_file());
        let iou = fs::read_to_string(dir.path().join("plot_iou_vs_n_images.csv")).unwrap();
        assert_eq!(iou.lines().count(), 5);
        let empty = SweepResult { kind: SweepKind::Theta, rows: vec![] };
        assert!(emit_report(&empty, ReportFormat::Csv, false, dir.path()).is_err());
    }
}
