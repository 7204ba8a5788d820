use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use shadowkit::eval::{evaluate_manifest, write_csv};
use shadowkit::manifest::load_annotation;
use shadowkit::server::{serve, AppState};
use shadowkit::synth::{demo_tuples, write_fixture};
use shadowkit::{load_manifest, run_shadow_pipeline, Config, Overrides, PipelineError};
use shadowkit_core::io::{read_mask, write_mask, write_rgb};
use shadowkit_core::sta::theta_from_k;
use shadowkit_core::{
    compute_k, estimate_light_from_background, extract_shadow_triangle, rasterize_skeleton, validate_k_consistency,
    LightEstimate, LimbCorrespondence, Point2,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "shadowkit", version, about = "Keypoint-driven shadow synthesis and evaluation")]
struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rasterize an annotation's skeleton into a binary mask.
    Skeleton {
        annotation: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Output width; defaults to the annotated image's width.
        #[arg(long)]
        width: Option<u32>,
        /// Output height; defaults to the annotated image's height.
        #[arg(long)]
        height: Option<u32>,
        /// Line thickness in output pixels; defaults to the render thickness.
        #[arg(long)]
        thickness: Option<u32>,
    },
    /// Extract the shadow triangle of a mask.
    Sta {
        mask: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Estimate the light from a background object and its shadow.
    Light { object_and_shadow: PathBuf, object: PathBuf },
    /// Render one tuple's shadow.
    Shadow {
        tuple_id: String,
        #[arg(long)]
        manifest: PathBuf,
        /// Annotation record; defaults to the manifest's entry for the tuple.
        #[arg(long)]
        annotation: Option<PathBuf>,
        /// Light elevation in radians; overrides estimation.
        #[arg(long)]
        theta: Option<f64>,
        /// Shadow direction as X,Y; overrides estimation.
        #[arg(long, value_parser = parse_pair)]
        azimuth: Option<Point2>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        /// Output directory for `<id>.png`, `<id>_mask.png`, `<id>_report.json`.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Score predictions in a directory against the manifest's ground truth.
    Eval {
        pred_dir: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Per-tuple reports and split summaries as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Per-limb K consistency of a correspondence list.
    ValidateK {
        correspondences: PathBuf,
        /// Round reported values to this many decimals.
        #[arg(long)]
        decimals: Option<i32>,
    },
    /// Run the annotation and preview service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Write a small synthetic dataset with a known light.
    Fixture {
        dir: PathBuf,
        #[arg(long, default_value_t = 256)]
        size: u32,
        /// Light elevation in radians.
        #[arg(long, default_value_t = 0.6)]
        theta: f64,
        /// Shadow direction as X,Y.
        #[arg(long, value_parser = parse_pair, default_value = "1,0.3")]
        azimuth: Point2,
    },
}

fn parse_pair(s: &str) -> Result<Point2, String> {
    let (x, y) = s.split_once(',').ok_or("expected X,Y")?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}"));
    Ok(Point2::new(p(x)?, p(y)?))
}

fn unit(p: Point2) -> Result<Point2, PipelineError> {
    let n = p.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(shadowkit_core::StaError::NonUnitAzimuth(p.x, p.y).into());
    }
    Ok(p * (1.0 / n))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::file(path, e))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| PipelineError::file(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| PipelineError::file(path, e))
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("serializable value")
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Skeleton { annotation, out, width, height, thickness } => {
            let rec = load_annotation(&annotation)?;
            let w = width.unwrap_or(rec.original_width);
            let h = height.unwrap_or(rec.original_height);
            let t = thickness.unwrap_or(cfg.render.thickness);
            let mask = rasterize_skeleton(&rec, &cfg.topology(), t, w, h, cfg.width_ratio)?;
            write_mask(&out, &mask)?;
        }
        Command::Sta { mask, json } => {
            let tri = extract_shadow_triangle(&read_mask(&mask)?)?;
            let k = (!tri.degenerate).then(|| compute_k(tri.a, tri.b, tri.c)).transpose()?;
            let theta = k.map(theta_from_k).transpose()?;
            if json {
                println!("{}", pretty(&json!({ "triangle": tri, "k": k, "theta": theta })));
            } else {
                println!("A = ({}, {})", tri.a.x, tri.a.y);
                println!("B = ({}, {})", tri.b.x, tri.b.y);
                println!("C = ({}, {})", tri.c.x, tri.c.y);
                match (k, theta) {
                    (Some(k), Some(t)) => println!("K = {k}\ntheta = {t} rad ({:.2} deg)", t.to_degrees()),
                    _ => println!("degenerate triangle"),
                }
            }
        }
        Command::Light { object_and_shadow, object } => {
            let l = estimate_light_from_background(&read_mask(&object_and_shadow)?, &read_mask(&object)?)?;
            println!("{}", pretty(&l));
        }
        Command::Shadow { tuple_id, manifest, annotation, theta, azimuth, alpha, sigma, out } => {
            let m = load_manifest(&manifest)?;
            let tuple = m.tuple(&tuple_id)?;
            let rec = match annotation {
                Some(p) => load_annotation(&p)?,
                None => m.load_annotation(&tuple_id)?,
            }
            .clone();
            let light = match (theta, azimuth) {
                (None, None) => None,
                (t, a) => {
                    let d = cfg.default_light()?;
                    let az = a.map(unit).transpose()?.unwrap_or(d.azimuth);
                    Some(LightEstimate::from_theta(t.unwrap_or(d.theta), az)?)
                }
            };
            let over = Overrides { light, alpha, sigma };
            let res = run_shadow_pipeline(tuple, &rec, &cfg, &over)?;
            write_rgb(&out.join(format!("{tuple_id}.png")), &res.image)?;
            write_mask(&out.join(format!("{tuple_id}_mask.png")), &res.shadow_mask)?;
            let report = json!({
                "tuple_id": tuple_id,
                "light": res.light,
                "light_source": res.light_source,
                "k_report": res.k_report,
            });
            write_text(&out.join(format!("{tuple_id}_report.json")), &pretty(&report))?;
            println!("{}", pretty(&report));
        }
        Command::Eval { pred_dir, manifest, csv, json } => {
            let m = load_manifest(&manifest)?;
            let ev = evaluate_manifest(&m, &pred_dir, &cfg)?;
            match csv {
                Some(p) => {
                    let f = std::fs::File::create(&p).map_err(|e| PipelineError::file(&p, e))?;
                    write_csv(f, &ev.reports)?;
                }
                None => write_csv(std::io::stdout().lock(), &ev.reports)?,
            }
            if let Some(p) = json {
                write_text(&p, &pretty(&ev))?;
            }
            eprintln!("{}", pretty(&ev.summary));
        }
        Command::ValidateK { correspondences, decimals } => {
            let cs: Vec<LimbCorrespondence> = read_json(&correspondences)?;
            let report = validate_k_consistency(&cs)?;
            let report = decimals.map_or(report.clone(), |d| report.rounded(d));
            println!("{}", pretty(&report));
        }
        Command::Serve { bind, manifest } => {
            let m = load_manifest(&manifest)?;
            let addr = bind.unwrap_or_else(|| cfg.bind.clone());
            let state = AppState::new(m, cfg);
            let rt = tokio::runtime::Runtime::new().map_err(|e| PipelineError::file("<runtime>", e))?;
            rt.block_on(serve(state, &addr)).map_err(|e| PipelineError::file(addr, e))?;
        }
        Command::Fixture { dir, size, theta, azimuth } => {
            let light = LightEstimate::from_theta(theta, unit(azimuth)?)?;
            write_fixture(&dir, size, &demo_tuples(light), &cfg)?;
            println!("{}", dir.join("manifest.json").display());
        }
    }
    Ok(())
}

fn exit_code(e: &PipelineError) -> u8 {
    match e.root() {
        PipelineError::File { .. } => EXIT_INTERNAL,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
