//! The `weftcodec` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 I/O failure,
//! 4 a decode stage failed.

pub mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use weftcodec::eval::{
    kfold_split, pattern_metrics, pattern_metrics_on_grid, reports_to_csv, roc_curve, summarize, MatchReport, MatchRule,
    PatternReport, Summary,
};
use weftcodec::io::{self, Annotation};
use weftcodec::postproc::{decode, Backend, DecodeConfig};
use weftcodec::pre::WarpShade;
use weftcodec::weavesim::{gen_dataset, random_pattern, render, RenderParams};
use weftcodec::{BinaryPattern, Error, GrayImage};

use crate::config::ToolConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_DECODE: u8 = 4;

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => EXIT_IO,
        Error::Stage { .. } => match err.root() {
            Error::Io { .. } => EXIT_IO,
            Error::ContractViolation(_) => EXIT_INVALID,
            _ => EXIT_DECODE,
        },
        _ => EXIT_INVALID,
    }
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        Self {
            code: exit_code(&err),
            message: err.to_string(),
        }
    }
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

#[derive(Debug, Parser)]
#[command(name = "weftcodec", version, about = "Decode Jacquard weave patterns from fabric images")]
pub struct Cli {
    /// Configuration file of `key = value` lines; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for batch commands.
    #[arg(long, short = 'j', global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic fabric with exact ground truth.
    Render(RenderArgs),
    /// Decode fabric images into weave patterns.
    Decode(DecodeArgs),
    /// Score decoded results against ground truth.
    Eval(EvalArgs),
    /// Render a dataset of random fabrics.
    Dataset(DatasetArgs),
    /// Serve the annotation API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RenderFlags {
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Spacing of both warps and wefts, in pixels.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Peak yarn displacement in pixels.
    #[arg(long)]
    pub jitter: Option<f64>,
    /// Fraction of pixels covered by loose fibers.
    #[arg(long)]
    pub fiber_noise: Option<f64>,
}

impl RenderFlags {
    fn apply(&self, p: &mut RenderParams) {
        if let Some(v) = self.width {
            p.width = v;
        }
        if let Some(v) = self.height {
            p.height = v;
        }
        if let Some(v) = self.spacing {
            p.warp_spacing = v;
            p.weft_spacing = v;
        }
        if let Some(v) = self.jitter {
            p.jitter_amp = v;
        }
        if let Some(v) = self.fiber_noise {
            p.fiber_noise_density = v;
        }
    }
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// Pattern to weave (PBM or plain 0/1 grid).
    #[arg(required_unless_present = "random", conflicts_with = "random")]
    pub pattern: Option<PathBuf>,
    /// Weave a random pattern instead.
    #[arg(long, num_args = 4, value_names = ["ROWS", "COLS", "DENSITY", "SEED"])]
    pub random: Option<Vec<String>>,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Output file stem.
    #[arg(long, default_value = "fabric")]
    pub name: String,
    #[command(flatten)]
    pub render: RenderFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Classical,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShadeArg {
    Dark,
    Light,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "classical")]
    pub backend: BackendKind,
    /// Likelihood map for a single image (external backend).
    #[arg(long, conflicts_with = "map_dir")]
    pub map: Option<PathBuf>,
    /// Directory of likelihood maps named after each image (external backend).
    #[arg(long)]
    pub map_dir: Option<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Also write the likelihood, tri-valued and merged images.
    #[arg(long)]
    pub dump_stages: bool,
    /// Grid-assignment radius in pixels.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub border_margin: Option<f64>,
    /// Scale of the LoG filter used to find yarn axes.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub warp_shade: Option<ShadeArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    OneToOne,
    ManyToOne,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of ground-truth annotations and patterns.
    pub truth: PathBuf,
    /// Directory of decoded annotations and patterns.
    pub pred: PathBuf,
    /// Distance thresholds: `A..B` (integers) or a comma-separated list.
    #[arg(long, default_value = "1..20")]
    pub s_list: String,
    #[arg(long, value_enum, default_value = "one-to-one")]
    pub rule: RuleArg,
    /// Report directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Also summarize accuracy over this many cross-validation folds.
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Print the per-threshold CSV to standard output.
    #[arg(long)]
    pub emit_csv: bool,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Number of fabrics to render.
    pub count: usize,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Add mirrored and rotated copies of every fabric.
    #[arg(long)]
    pub augment: bool,
    /// Probability of a weft-on-top crossing.
    #[arg(long)]
    pub density: Option<f64>,
    /// Base seed; each sample derives its own.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub render: RenderFlags,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory of fabric images.
    #[arg(long)]
    pub dir: PathBuf,
    /// Where sessions and exports are written; defaults to `<dir>/.sessions`.
    #[arg(long)]
    pub state_dir: Option<PathBuf>,
    /// Grid-assignment radius for exported patterns.
    #[arg(long)]
    pub s: Option<f64>,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let name = match &cli.command {
        Command::Render(_) => "render",
        Command::Decode(_) => "decode",
        Command::Eval(_) => "eval",
        Command::Dataset(_) => "dataset",
        Command::Serve(_) => "serve",
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("weftcodec {name}: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: &Cli) -> CliResult {
    let file = match &cli.config {
        Some(path) => ToolConfig::load(path)?,
        None => ToolConfig::default(),
    };
    let jobs = cli.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(Failure::invalid("--jobs must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::invalid(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Render(args) => cmd_render(args, &file),
        Command::Decode(args) => cmd_decode(args, &file),
        Command::Eval(args) => cmd_eval(args),
        Command::Dataset(args) => cmd_dataset(args, &file),
        Command::Serve(args) => cmd_serve(args, &file),
    })
}

fn create_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn parse_random(values: &[String]) -> CliResult<(usize, usize, f64, u64)> {
    let bad = |what: &str, v: &str| Failure::invalid(format!("--random {what} must be a number, got {v:?}"));
    Ok((
        values[0].parse().map_err(|_| bad("ROWS", &values[0]))?,
        values[1].parse().map_err(|_| bad("COLS", &values[1]))?,
        values[2].parse().map_err(|_| bad("DENSITY", &values[2]))?,
        values[3].parse().map_err(|_| bad("SEED", &values[3]))?,
    ))
}

fn cmd_render(args: &RenderArgs, file: &ToolConfig) -> CliResult {
    let mut params = file.render_params();
    args.render.apply(&mut params);
    let pattern = match (&args.pattern, &args.random) {
        (_, Some(values)) => {
            let (rows, cols, density, seed) = parse_random(values)?;
            if file.seed.is_none() {
                params.seed = seed;
            }
            random_pattern(rows, cols, density, seed)?
        }
        (Some(path), None) => io::load_pattern(path)?,
        (None, None) => return Err(Failure::invalid("give a pattern file or --random")),
    };
    params.validate()?;
    let (img, truth) = render::<f64>(&pattern, &params)?;
    create_dir(&args.out)?;
    let image = format!("{}.png", args.name);
    io::save_gray_png(&img, &args.out.join(&image))?;
    truth.annotation(image.clone()).save(&args.out.join(format!("{}.json", args.name)))?;
    io::save_pattern(&truth.pattern, &args.out.join(format!("{}.pbm", args.name)))?;
    println!("wrote {} ({}x{} crossings)", args.out.join(&image).display(), pattern.rows(), pattern.cols());
    Ok(())
}

fn stem(path: &Path) -> CliResult<String> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| Failure::invalid(format!("{} has no usable file name", path.display())))
}

fn decode_one(path: &Path, backend: &Backend, cfg: &DecodeConfig, out: &Path, dump: bool) -> CliResult<String> {
    let name = stem(path)?;
    let img: GrayImage = io::load_gray(path)?;
    let result = decode(&img, backend, cfg)?;
    io::save_pattern(&result.pattern, &out.join(format!("{name}.pbm")))?;
    Annotation::new(path.display().to_string(), &result.grid, &result.crossings, result.colors).save(&out.join(format!("{name}.json")))?;
    if dump {
        io::save_gray_png(&result.stages.likelihood, &out.join(format!("{name}_likelihood.png")))?;
        io::save_gray_png(&result.stages.tri.to_gray::<f64>(), &out.join(format!("{name}_tri.png")))?;
        io::save_gray_png(&result.stages.merged.to_gray::<f64>(), &out.join(format!("{name}_merged.png")))?;
    }
    Ok(format!(
        "{}: {}x{} pattern from {} crossings",
        path.display(),
        result.pattern.rows(),
        result.pattern.cols(),
        result.crossings.len()
    ))
}

fn cmd_decode(args: &DecodeArgs, file: &ToolConfig) -> CliResult {
    let mut cfg = file.decode_config();
    if let Some(v) = args.s {
        cfg.s = v;
    }
    if let Some(v) = args.border_margin {
        cfg.border_margin = v;
    }
    if let Some(v) = args.sigma {
        cfg.classical.axes.sigma = v;
    }
    if let Some(v) = args.warp_shade {
        cfg.classical.warp_shade = match v {
            ShadeArg::Dark => WarpShade::Dark,
            ShadeArg::Light => WarpShade::Light,
        };
    }
    cfg.validate()?;

    let backends: Vec<Backend> = match args.backend {
        BackendKind::Classical => {
            if args.map.is_some() || args.map_dir.is_some() {
                return Err(Failure::invalid("--map and --map-dir need --backend external"));
            }
            vec![Backend::Classical; args.images.len()]
        }
        BackendKind::External => match (&args.map, &args.map_dir) {
            (Some(map), None) if args.images.len() == 1 => vec![Backend::External(map.clone())],
            (Some(_), None) => return Err(Failure::invalid("--map takes one image; use --map-dir for several")),
            (None, Some(dir)) => args
                .images
                .iter()
                .map(|p| Ok(Backend::External(dir.join(format!("{}.png", stem(p)?)))))
                .collect::<CliResult<_>>()?,
            _ => return Err(Failure::invalid("--backend external needs --map or --map-dir")),
        },
    };

    create_dir(&args.out)?;
    let results: Vec<CliResult<String>> = args
        .images
        .par_iter()
        .zip(&backends)
        .map(|(path, backend)| decode_one(path, backend, &cfg, &args.out, args.dump_stages))
        .collect();
    let mut first_failure = None;
    for (path, result) in args.images.iter().zip(results) {
        match result {
            Ok(line) => println!("{line}"),
            Err(f) => {
                eprintln!("{}: {}", path.display(), f.message);
                first_failure.get_or_insert(f);
            }
        }
    }
    first_failure.map_or(Ok(()), Err)
}

/// `A..B` (inclusive, integers) or `a,b,c`.
pub fn parse_s_list(text: &str) -> Result<Vec<f64>, String> {
    let values: Vec<f64> = if let Some((a, b)) = text.split_once("..") {
        let a: u32 = a.trim().parse().map_err(|_| format!("bad range start in {text:?}"))?;
        let b: u32 = b.trim().parse().map_err(|_| format!("bad range end in {text:?}"))?;
        (a..=b).map(f64::from).collect()
    } else {
        text.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad threshold {v:?}")))
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() || values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(format!("thresholds must be a non-empty list of positive numbers, got {text:?}"));
    }
    Ok(values)
}

fn annotation_stems(dir: &Path) -> CliResult<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut stems: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(str::to_string))
        .collect();
    stems.sort();
    Ok(stems)
}

#[derive(Debug, Serialize)]
struct ImageResult {
    name: String,
    pattern: PatternReport,
    curve: Vec<MatchReport>,
}

#[derive(Debug, Serialize)]
struct FoldResult {
    fold: usize,
    images: usize,
    mean_accuracy: f64,
    mean_f_measure: f64,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    images: usize,
    rule: MatchRule,
    /// Counts pooled over all images, one entry per threshold.
    curve: Vec<MatchReport>,
    accuracy: Summary,
    f_measure: Summary,
    per_image: Vec<ImageResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    folds: Option<Vec<FoldResult>>,
}

fn evaluate_one(truth_dir: &Path, pred_dir: &Path, name: &str, s_values: &[f64], rule: MatchRule) -> CliResult<ImageResult> {
    let truth = Annotation::load(&truth_dir.join(format!("{name}.json")))?;
    let pred = Annotation::load(&pred_dir.join(format!("{name}.json")))?;
    let truth_pattern: BinaryPattern = io::load_pattern(&truth_dir.join(format!("{name}.pbm")))?;
    let pred_pattern: BinaryPattern = io::load_pattern(&pred_dir.join(format!("{name}.pbm")))?;
    let pattern = if (truth_pattern.rows(), truth_pattern.cols()) == (pred_pattern.rows(), pred_pattern.cols()) {
        pattern_metrics(&truth_pattern, &pred_pattern)?
    } else {
        pattern_metrics_on_grid(&truth.crossings, &pred.grid()?, &pred_pattern)?
    };
    let curve = roc_curve(&truth.crossings, &pred.crossings, s_values, rule)?;
    Ok(ImageResult {
        name: name.to_string(),
        pattern,
        curve,
    })
}

fn pooled_curve(results: &[ImageResult], s_values: &[f64]) -> Vec<MatchReport> {
    s_values
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let (mut total, mut correct, mut error) = (0, 0, 0);
            for r in results {
                total += r.curve[k].total;
                correct += r.curve[k].correct;
                error += r.curve[k].error;
            }
            let correct_rate = correct as f64 / total as f64;
            let error_rate = error as f64 / total as f64;
            MatchReport {
                s,
                total,
                correct,
                error,
                missed: total - correct - error,
                correct_rate,
                error_rate,
                missed_rate: 1.0 - (correct_rate + error_rate),
                pairs: Vec::new(),
            }
        })
        .collect()
}

fn summary_row(out: &mut String, name: &str, s: &Summary) {
    let _ = writeln!(out, "{name},{},{},{},{},{}", s.count, s.mean, s.min, s.max, s.std);
}

fn cmd_eval(args: &EvalArgs) -> CliResult {
    let s_values = parse_s_list(&args.s_list).map_err(Failure::invalid)?;
    let rule = match args.rule {
        RuleArg::OneToOne => MatchRule::OneToOne,
        RuleArg::ManyToOne => MatchRule::ManyToOne,
    };
    let truth_names = annotation_stems(&args.truth)?;
    let pred_names = annotation_stems(&args.pred)?;
    let unmatched: Vec<String> = truth_names
        .iter()
        .filter(|n| !pred_names.contains(n))
        .map(|n| format!("{n} (no prediction)"))
        .chain(pred_names.iter().filter(|n| !truth_names.contains(n)).map(|n| format!("{n} (no ground truth)")))
        .collect();
    if !unmatched.is_empty() {
        return Err(Failure::invalid(format!("unmatched files: {}", unmatched.join(", "))));
    }
    if truth_names.is_empty() {
        return Err(Failure::invalid(format!("no annotations found in {}", args.truth.display())));
    }

    let per_image: Vec<ImageResult> = truth_names
        .par_iter()
        .map(|name| evaluate_one(&args.truth, &args.pred, name, &s_values, rule))
        .collect::<CliResult<_>>()?;
    let accuracies: Vec<f64> = per_image.iter().map(|r| r.pattern.accuracy).collect();
    let f_measures: Vec<f64> = per_image.iter().map(|r| r.pattern.f_measure).collect();
    let folds = match args.folds {
        Some(k) => {
            let split = kfold_split(per_image.len(), k, args.seed)?;
            let mean = |ids: &[usize], values: &[f64]| ids.iter().map(|&i| values[i]).sum::<f64>() / ids.len() as f64;
            Some(
                split
                    .iter()
                    .enumerate()
                    .map(|(fold, f)| FoldResult {
                        fold,
                        images: f.test.len(),
                        mean_accuracy: mean(&f.test, &accuracies),
                        mean_f_measure: mean(&f.test, &f_measures),
                    })
                    .collect::<Vec<_>>(),
            )
        }
        None => None,
    };
    let report = EvalReport {
        images: per_image.len(),
        rule,
        curve: pooled_curve(&per_image, &s_values),
        accuracy: summarize(&accuracies).expect("at least one image"),
        f_measure: summarize(&f_measures).expect("at least one image"),
        per_image,
        folds,
    };

    create_dir(&args.out)?;
    let curve_csv = reports_to_csv(&report.curve);
    let mut patterns_csv = String::from("image,accuracy,f_measure,precision,recall,true_zero,true_one,false_one,false_zero\n");
    for r in &report.per_image {
        let p = &r.pattern;
        let _ = writeln!(
            patterns_csv,
            "{},{},{},{},{},{},{},{},{}",
            r.name, p.accuracy, p.f_measure, p.precision, p.recall, p.true_zero, p.true_one, p.false_one, p.false_zero
        );
    }
    let mut summary_csv = String::from("metric,count,mean,min,max,std\n");
    summary_row(&mut summary_csv, "accuracy", &report.accuracy);
    summary_row(&mut summary_csv, "f_measure", &report.f_measure);
    if let Some(folds) = &report.folds {
        let acc: Vec<f64> = folds.iter().map(|f| f.mean_accuracy).collect();
        let fm: Vec<f64> = folds.iter().map(|f| f.mean_f_measure).collect();
        summary_row(&mut summary_csv, "fold_accuracy", &summarize(&acc).expect("k >= 2"));
        summary_row(&mut summary_csv, "fold_f_measure", &summarize(&fm).expect("k >= 2"));
    }
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    for (file, text) in [
        ("curve.csv", &curve_csv),
        ("patterns.csv", &patterns_csv),
        ("summary.csv", &summary_csv),
        ("report.json", &json),
    ] {
        io::write_atomic(&args.out.join(file), text.as_bytes())?;
    }
    if args.emit_csv {
        print!("{curve_csv}");
    } else {
        println!(
            "{} images: accuracy mean {:.4} (min {:.4}, max {:.4}, std {:.4})",
            report.images, report.accuracy.mean, report.accuracy.min, report.accuracy.max, report.accuracy.std
        );
    }
    Ok(())
}

fn cmd_dataset(args: &DatasetArgs, file: &ToolConfig) -> CliResult {
    let mut params = file.render_params();
    args.render.apply(&mut params);
    if let Some(seed) = args.seed {
        params.seed = seed;
    }
    let density = args.density.or(file.density).unwrap_or(0.5);
    let entries = gen_dataset(args.count, &params, density, args.augment, &args.out)?;
    println!("wrote {} samples to {}", entries.len(), args.out.display());
    Ok(())
}

fn cmd_serve(args: &ServeArgs, file: &ToolConfig) -> CliResult {
    use weftcodec_annosvc::{ServiceConfig, SessionStore};

    let decode = file.decode_config();
    decode.validate()?;
    let mut config = ServiceConfig::new(&args.dir, args.state_dir.clone().unwrap_or_else(|| args.dir.join(".sessions")));
    config.classical = decode.classical;
    config.s = args.s.unwrap_or(decode.s);
    let store = SessionStore::new(config).map_err(|e| match e {
        weftcodec_annosvc::ServiceError::Core(err) => Failure::from(err),
        other => Failure::invalid(other.to_string()),
    })?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure {
        code: EXIT_IO,
        message: e.to_string(),
    })?;
    println!("serving {} on http://127.0.0.1:{}", args.dir.display(), args.port);
    runtime
        .block_on(weftcodec_annosvc::serve(Arc::new(store), args.port))
        .map_err(|e| Failure {
            code: EXIT_IO,
            message: e.to_string(),
        })
}
