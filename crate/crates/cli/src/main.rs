use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::warn;

use shadowroad::colorfeat::TrainingRegion;
use shadowroad::imagecore::{
    load_image, load_mask, save_gray, save_image, save_mask, StructuringElement,
};
use shadowroad::metrics::{confusion, metrics_csv};
use shadowroad::pipeline::{
    benchmark_sources, compare, frames_in_dir, manifest_text, run_to_dir, FrameSource,
    PipelineConfig, SyntheticScene, MANIFEST,
};
use shadowroad::shadowfilter::remove_shadows;

/// Road region recognition robust to cast shadows.
#[derive(Parser)]
#[command(name = "shadowroad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over a frame directory or a scene file.
    Run(RunArgs),
    /// Detect and compensate shadows in one image.
    Shadow(ShadowArgs),
    /// Score predicted masks against ground truth masks.
    Eval(EvalArgs),
    /// Write a synthetic benchmark dataset.
    Synth(SynthArgs),
    /// Run with and without shadow filtering and compare error rates.
    Compare(CompareArgs),
}

/// Pipeline settings; each flag overrides the same key of `--config`.
#[derive(Args)]
struct ConfigArgs {
    /// Key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `trapezoid`, `rect:x0,y0,x1,y1` or `poly:x,y;x,y;...`.
    #[arg(long)]
    training_region: Option<TrainingRegion>,
    #[arg(long)]
    d_max: Option<f64>,
    /// Skip shadow detection and compensation.
    #[arg(long)]
    no_filter: bool,
    #[arg(long)]
    min_shadow_area: Option<usize>,
    /// `square:N` or `cross:N`.
    #[arg(long)]
    se_detect: Option<StructuringElement>,
    #[arg(long)]
    se_post: Option<StructuringElement>,
    #[arg(long)]
    svm_c: Option<f64>,
    #[arg(long)]
    svm_tol: Option<f64>,
    #[arg(long)]
    samples_per_class: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_open: bool,
    #[arg(long)]
    no_fill_holes: bool,
    #[arg(long)]
    no_keep_largest: bool,
    #[arg(long)]
    group_size: Option<usize>,
    /// Also write every intermediate mask and the compensated image.
    #[arg(long)]
    dump_stages: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! over {
            ($($f:ident),*) => {
                $(if let Some(v) = &self.$f {
                    cfg.$f = v.clone();
                })*
            };
        }
        over!(
            training_region,
            d_max,
            min_shadow_area,
            se_detect,
            se_post,
            svm_c,
            svm_tol,
            samples_per_class,
            seed,
            group_size
        );
        cfg.filtering_enabled &= !self.no_filter;
        cfg.open_first &= !self.no_open;
        cfg.fill_holes &= !self.no_fill_holes;
        cfg.keep_largest &= !self.no_keep_largest;
        cfg.dump_stages |= self.dump_stages;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Directory of frames, optionally with a manifest.
    #[arg(long, conflicts_with = "scene")]
    frames: Option<PathBuf>,
    /// Scene file; frames differ only in noise seed.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Number of frames rendered from `--scene`.
    #[arg(long, default_value_t = 10, requires = "scene")]
    count: usize,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ShadowArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory of predicted masks.
    #[arg(long)]
    pred: PathBuf,
    /// Directory of truth masks named `<id>` or `<id>_truth`.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = shadowroad::pipeline::DEFAULT_GROUP_SIZE)]
    group_size: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    frames: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Consecutive frames sharing one scene.
    #[arg(long, default_value_t = 10)]
    per_scene: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Frame directory with ground truth; the built-in benchmark otherwise.
    #[arg(long)]
    scenes: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("SHADOWROAD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| anyhow!("SHADOWROAD_THREADS must be a positive integer, got {v:?}"))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let sources = match (&args.frames, &args.scene) {
        (Some(dir), _) => frames_in_dir(dir)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            let scene = SyntheticScene::from_text(&text)?;
            (0..args.count)
                .map(|k| FrameSource::Scene {
                    id: format!("frame_{k:03}"),
                    scene: SyntheticScene {
                        seed: scene.seed.wrapping_add(k as u64),
                        ..scene.clone()
                    },
                })
                .collect()
        }
        (None, None) => bail!("missing input: pass --frames or --scene"),
    };
    let out = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| anyhow!("missing output: pass --out or set output_dir"))?;
    let report = run_to_dir(&sources, &cfg, &out)?;
    for (id, e) in &report.skipped {
        warn!("skipped {id}: {e}");
    }
    println!(
        "{} frames processed, {} skipped, results in {}",
        report.frames.len(),
        report.skipped.len(),
        out.display()
    );
    Ok(())
}

fn shadow(args: ShadowArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let img = load_image(&args.input)?;
    let r = remove_shadows(&img, &cfg.se_detect, cfg.min_shadow_area)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    save_image(&r.image, args.out.join("compensated.png"))?;
    save_mask(&r.shadow_mask, args.out.join("shadow.pgm"))?;
    save_gray(&r.ndi, -1.0, 1.0, args.out.join("ndi.pgm"))?;
    let fixed = r.components.iter().filter(|c| c.compensated).count();
    println!(
        "threshold {:.6}, {} shadow pixels, {} of {} components compensated",
        r.threshold.threshold,
        r.shadow_mask.count(),
        fixed,
        r.components.len()
    );
    Ok(())
}

fn mask_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("cannot read {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "png")))
        .collect();
    out.sort();
    if out.is_empty() {
        bail!("missing input: no masks in {}", dir.display());
    }
    Ok(out)
}

fn truth_for(dir: &Path, id: &str) -> Result<PathBuf> {
    ["_truth", ""]
        .iter()
        .flat_map(|suffix| ["pgm", "png"].map(|ext| dir.join(format!("{id}{suffix}.{ext}"))))
        .find(|p| p.is_file())
        .ok_or_else(|| anyhow!("missing input: no truth mask for {id} in {}", dir.display()))
}

fn eval(args: EvalArgs) -> Result<()> {
    let mut frames = Vec::new();
    for (k, pred_path) in mask_files(&args.pred)?.iter().enumerate() {
        let id = pred_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let pred = load_mask(pred_path)?;
        let truth = load_mask(truth_for(&args.truth, &id)?)?;
        if !pred.same_dims(&truth) {
            bail!("dimension mismatch: frame {k}");
        }
        frames.push((id, confusion(&pred, &truth)?));
    }
    let csv = metrics_csv(&frames, args.group_size)?;
    match &args.out {
        Some(p) => fs::write(p, csv).with_context(|| format!("cannot write {}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    if args.frames == 0 || args.per_scene == 0 {
        bail!("invalid argument: --frames and --per-scene must be positive");
    }
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let scenes = args.frames.div_ceil(args.per_scene);
    let sources = benchmark_sources(scenes, args.per_scene, args.seed);
    let mut pairs = Vec::new();
    for src in sources.iter().take(args.frames) {
        let FrameSource::Scene { id, scene } = src else {
            unreachable!("benchmark sources are scenes")
        };
        let f = scene.generate()?;
        let (img, truth) = (format!("{id}.png"), format!("{id}_truth.pgm"));
        save_image(&f.image, args.out.join(&img))?;
        save_mask(&f.truth, args.out.join(&truth))?;
        fs::write(args.out.join(format!("{id}_scene.txt")), scene.to_text())?;
        pairs.push((img, Some(truth)));
    }
    fs::write(args.out.join(MANIFEST), manifest_text(&pairs))?;
    println!("{} frames written to {}", pairs.len(), args.out.display());
    Ok(())
}

fn compare_cmd(args: CompareArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let sources = match &args.scenes {
        Some(dir) => frames_in_dir(dir)?,
        None => benchmark_sources(10, 10, cfg.seed),
    };
    let cmp = compare(&sources, &cfg)?;
    cmp.write(&args.out)?;
    for (k, (w, wo)) in cmp.groups_with.iter().zip(&cmp.groups_without).enumerate() {
        let f = |v: Option<f64>| v.map_or_else(|| "NA".into(), |v| format!("{v:.4}"));
        println!(
            "group_{k:02}: ERR {} vs {}, FNR {} vs {}",
            f(w.micro.err),
            f(wo.micro.err),
            f(w.micro.fnr),
            f(wo.micro.fnr)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = init_threads().and_then(|()| match cli.command {
        Command::Run(a) => run(a),
        Command::Shadow(a) => shadow(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
        Command::Compare(a) => compare_cmd(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
