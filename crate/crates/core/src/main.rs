use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hullbench::harness::{self, ConfigError, ObjectSpec, PipelineConfig, PipelineError, ReportFormat, SweepKind, SweepResult};

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "hullbench", version, about = "Silhouette-based few-shot reconstruction benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus per-key overrides; flags win over the file.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// JSON config file; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// output_dir
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Replaces the object list; repeat as NAME=MESH (path or builtin:NAME).
    #[arg(long = "object", value_name = "NAME=MESH")]
    objects: Vec<String>,
    #[arg(long)]
    query: Option<String>,
    /// padding_px
    #[arg(long)]
    padding: Option<usize>,
    /// Carving resolution along the longest axis.
    #[arg(long)]
    resolution: Option<usize>,
    /// rig.theta_deg; comma-separated for several rings.
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    /// rig.delta_phi_deg
    #[arg(long)]
    delta_phi: Option<f64>,
    /// rig.count_per_ring
    #[arg(long)]
    count: Option<usize>,
    /// rig.radius
    #[arg(long)]
    radius: Option<f64>,
    /// clean.min_face_fraction
    #[arg(long)]
    min_face_fraction: Option<f64>,
    /// clean.keep_largest
    #[arg(long)]
    keep_largest: bool,
    /// metrics.samples
    #[arg(long)]
    samples: Option<usize>,
    /// metrics.resolution
    #[arg(long)]
    iou_resolution: Option<usize>,
    /// tracks.candidates
    #[arg(long)]
    track_candidates: Option<usize>,
    /// holdout.enabled = false
    #[arg(long)]
    no_holdout: bool,
    /// write_views = false
    #[arg(long)]
    no_views: bool,
    #[arg(long)]
    seed: Option<u64>,
}

impl Overrides {
    fn config(&self) -> Result<PipelineConfig, ConfigError> {
        let mut c = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        if !self.objects.is_empty() {
            c.objects = self
                .objects
                .iter()
                .map(|s| {
                    let (name, mesh) =
                        s.split_once('=').ok_or_else(|| ConfigError::Invalid(format!("--object expects NAME=MESH, got '{s}'")))?;
                    Ok(ObjectSpec { name: name.into(), mesh: mesh.into(), offset: [0.0; 3] })
                })
                .collect::<Result<_, ConfigError>>()?;
        }
        macro_rules! set {
            ($flag:ident => $($key:ident).+) => {
                if let Some(v) = self.$flag.clone() {
                    c.$($key).+ = v;
                }
            };
        }
        set!(out => output_dir);
        set!(query => query);
        set!(padding => padding_px);
        set!(resolution => resolution);
        set!(theta => rig.theta_deg);
        set!(delta_phi => rig.delta_phi_deg);
        set!(count => rig.count_per_ring);
        set!(radius => rig.radius);
        set!(min_face_fraction => clean.min_face_fraction);
        set!(samples => metrics.samples);
        set!(iou_resolution => metrics.resolution);
        set!(track_candidates => tracks.candidates);
        set!(seed => seed);
        c.clean.keep_largest |= self.keep_largest;
        c.holdout.enabled &= !self.no_holdout;
        c.write_views &= !self.no_views;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write cameras.json for the configured rig.
    Rig(Overrides),
    /// Render views and per-object masks.
    Render(Overrides),
    /// Select the queried object and write padded, cropped views.
    Segment(Overrides),
    /// Carve the visual hull and sample sparse tracks.
    Reconstruct(Overrides),
    /// Remove floaters and color the hull.
    Clean(Overrides),
    /// Chamfer distance and volumetric IoU against the ground truth.
    EvalGeom(EvalArgs),
    /// PSNR, SSIM and LPIPS on held-out views.
    EvalTex(EvalArgs),
    /// Full pipeline.
    Run(Overrides),
    /// Parameter sweep with one pipeline run per row.
    Sweep(SweepArgs),
    /// Re-emit a saved sweep.json as CSV/JSON and plot data.
    Report(ReportArgs),
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Mesh to evaluate; defaults to <out>/mesh.ply.
    #[arg(long)]
    mesh: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, value_enum)]
    kind: SweepKind,
    /// Image counts (images) or polar angles (theta), comma-separated.
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// N:DPHI pairs for the overlap sweep, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pairs: Vec<String>,
    /// Image-count sweep keeps the configured Δφ instead of spreading views over 360°.
    #[arg(long)]
    keep_delta_phi: bool,
    /// Leave timings out of the report so reruns compare byte-for-byte.
    #[arg(long)]
    no_timings: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: ReportFormat,
    /// Also write per-figure plot-data files.
    #[arg(long)]
    plotdata: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// sweep.json written by `sweep`.
    #[arg(long)]
    input: PathBuf,
    /// Defaults to the input's directory.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: ReportFormat,
    #[arg(long)]
    plotdata: bool,
    #[arg(long)]
    no_timings: bool,
}

enum Failure {
    Config(String),
    Stage(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Stage(e.to_string())
        }
    }
}

// A closed pipe (`| head`) is not an error worth reporting.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn print<T: Serialize>(value: &T) {
    emit(&(serde_json::to_string_pretty(value).expect("output serializes") + "\n"));
}

fn parse_pairs(pairs: &[String]) -> Result<Vec<(usize, f64)>, ConfigError> {
    pairs
        .iter()
        .map(|p| {
            let bad = || ConfigError::Invalid(format!("pair '{p}' is not N:DPHI"));
            let (n, d) = p.split_once(':').ok_or_else(bad)?;
            Ok((n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    let base = args.overrides.config()?;
    let result = match args.kind {
        SweepKind::Images => {
            let counts: Vec<usize> = if args.values.is_empty() {
                vec![4, 8, 12, 18, 36]
            } else {
                args.values
                    .iter()
                    .map(|&v| if v >= 1.0 && v.fract() == 0.0 { Ok(v as usize) } else { Err(ConfigError::Invalid(format!("bad image count {v}"))) })
                    .collect::<Result<_, _>>()?
            };
            harness::sweep_image_count(&base, &counts, !args.keep_delta_phi)
        }
        SweepKind::Theta => {
            let thetas = if args.values.is_empty() { vec![30.0, 45.0, 75.0] } else { args.values.clone() };
            harness::sweep_theta(&base, &thetas)
        }
        SweepKind::Overlap => {
            let pairs = if args.pairs.is_empty() {
                vec![(4, 10.0), (4, 90.0), (12, 10.0), (12, 30.0), (36, 10.0)]
            } else {
                parse_pairs(&args.pairs)?
            };
            harness::sweep_overlap(&base, &pairs)
        }
    };
    let result = if args.no_timings { result.without_timings() } else { result };
    write_report(&result, args.format, args.plotdata, &base.output_dir)?;
    let failed = result.rows.iter().filter(|r| r.status != "ok").count();
    emit(&harness::to_csv(&result));
    if failed > 0 {
        return Err(Failure::Stage(format!("{failed} of {} sweep rows failed", result.rows.len())));
    }
    Ok(())
}

/// The requested format plus `sweep.json`, which `report` reads back.
fn write_report(result: &SweepResult, format: ReportFormat, plotdata: bool, dir: &std::path::Path) -> Result<(), Failure> {
    harness::emit_report(result, format, plotdata, dir).map_err(|e| Failure::Stage(e.to_string()))?;
    if format != ReportFormat::Json {
        let path = dir.join("sweep.json");
        std::fs::write(&path, harness::to_json(result)).map_err(|e| Failure::Stage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn report(args: &ReportArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| Failure::Config(format!("{}: {e}", args.input.display())))?;
    let result: SweepResult =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", args.input.display())))?;
    let result = if args.no_timings { result.without_timings() } else { result };
    let dir = args.out.clone().unwrap_or_else(|| args.input.parent().map(PathBuf::from).unwrap_or_default());
    harness::emit_report(&result, args.format, args.plotdata, &dir).map_err(|e| Failure::Stage(e.to_string()))?;
    emit(&harness::to_csv(&result));
    Ok(())
}

fn eval_mesh(args: &EvalArgs, config: &PipelineConfig) -> PathBuf {
    args.mesh.clone().unwrap_or_else(|| config.output_dir.join("mesh.ply"))
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    harness::init_threads()?;
    match &cli.command {
        Command::Rig(o) => print(&harness::stage_rig(&o.config()?)?.len()),
        Command::Render(o) => print(&harness::stage_render(&o.config()?)?),
        Command::Segment(o) => print(&harness::stage_segment(&o.config()?)?),
        Command::Reconstruct(o) => print(&harness::stage_reconstruct(&o.config()?)?),
        Command::Clean(o) => print(&harness::stage_clean(&o.config()?)?),
        Command::EvalGeom(a) => {
            let c = a.overrides.config()?;
            print(&harness::stage_eval_geom(&c, &eval_mesh(a, &c))?)
        }
        Command::EvalTex(a) => {
            let c = a.overrides.config()?;
            print(&harness::stage_eval_tex(&c, &eval_mesh(a, &c))?)
        }
        Command::Run(o) => {
            let out = harness::run_pipeline(&o.config()?)?;
            print(&serde_json::json!({ "metrics": out.metrics, "timings": out.timings }))
        }
        Command::Sweep(a) => sweep(a)?,
        Command::Report(a) => report(a)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("hullbench: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Stage(m)) => {
            eprintln!("hullbench: {m}");
            ExitCode::from(EXIT_STAGE)
        }
    }
}
