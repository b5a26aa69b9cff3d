//! `capsule-screen`: synthesise, extract, train, evaluate and inspect.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::collections::HashSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use capsule_screen::dataset::{
    synth_dataset, ClassLabel, ClassMode, RgbImage, RoiMask, SplitSpec, SynthConfig,
};
use capsule_screen::detector::DetectorParams;
use capsule_screen::features::{read_csv, write_csv, DEFAULT_WINDOW};
use capsule_screen::learn::{KernelSpec, TrainConfig, DEFAULT_GAMMA};
use capsule_screen::overlay;
use capsule_screen::pipeline::{
    comparison_table, evaluate, extract_manifest, predict_frame, read_ids, render_table,
    test_ids_path, train_from_samples, write_ids, Channel, ExtractConfig, ModelFile,
};
use capsule_screen::{Error, ErrorKind};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "capsule-screen",
    version,
    about = "Capsule endoscopy frame screening"
)]
struct Cli {
    /// TOML file of flag defaults; top-level keys apply to every subcommand,
    /// `[<subcommand>]` tables to one. Command-line flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic labelled dataset with ROI masks.
    Synth(SynthArgs),
    /// Detect interest points and write the feature table.
    Extract(ExtractArgs),
    /// Split images, train a classifier and write the model.
    Train(TrainArgs),
    /// Evaluate a model on its held-out images.
    Eval(EvalArgs),
    /// Classify the points of one frame and the frame itself.
    Predict(PredictArgs),
    /// Draw classified interest points onto a frame.
    Overlay(OverlayArgs),
    /// Linear/RBF × kernel PCA comparison over bi-class and multi-class.
    Table(TableArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    /// Comma-separated class tokens; must include `normal`.
    #[arg(long, value_delimiter = ',', default_value = "normal,bleeding")]
    classes: Vec<String>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct DetectArgs {
    #[arg(long, default_value = "a")]
    channel: String,
    #[arg(long, default_value_t = DetectorParams::default().threshold)]
    threshold: f64,
    #[arg(long, default_value_t = DetectorParams::default().min_points)]
    min_points: usize,
    #[arg(long, default_value_t = DetectorParams::default().max_points)]
    max_points: usize,
    #[arg(long, default_value_t = DetectorParams::default().octaves)]
    octaves: usize,
    #[arg(long, default_value_t = DetectorParams::default().intervals_per_octave)]
    intervals: usize,
    #[arg(long, default_value_t = DetectorParams::default().initial_filter)]
    initial_filter: usize,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
}

impl DetectArgs {
    fn config(&self) -> Result<ExtractConfig, Error> {
        let channel = self.channel.parse::<Channel>().map_err(Error::Parameter)?;
        let detector = DetectorParams {
            threshold: self.threshold,
            octaves: self.octaves,
            intervals_per_octave: self.intervals,
            initial_filter: self.initial_filter,
            min_points: self.min_points,
            max_points: self.max_points,
        };
        detector.validate()?;
        if self.window < 2 || !self.window.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "window must be even and at least 2, got {}",
                self.window
            )));
        }
        Ok(ExtractConfig {
            channel,
            detector,
            window: self.window,
        })
    }
}

#[derive(Args, Debug)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    detect: DetectArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum KernelArg {
    Linear,
    Rbf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
enum Switch {
    On,
    Off,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ModeArg {
    Biclass,
    Multiclass,
}

impl From<ModeArg> for ClassMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Biclass => ClassMode::Biclass,
            ModeArg::Multiclass => ClassMode::Multiclass,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value_t = 0.75)]
    train_fraction: f64,
    #[arg(long, value_enum, default_value_t = KernelArg::Rbf)]
    kernel: KernelArg,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, value_enum, default_value_t = Switch::Off)]
    kpca: Switch,
    #[arg(long, value_enum, default_value_t = ModeArg::Biclass)]
    mode: ModeArg,
    /// Seeds the solver's scan order and kernel PCA subsampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Held-out image ids; defaults to the list written next to the model.
    #[arg(long)]
    test_ids: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    detect: DetectArgs,
}

#[derive(Args, Debug)]
struct OverlayArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    detect: DetectArgs,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "biclass,multiclass"
    )]
    modes: Vec<ModeArg>,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long, default_value_t = 0.75)]
    train_fraction: f64,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Synth(a) => {
            let classes = a
                .classes
                .iter()
                .map(|c| {
                    c.parse::<ClassLabel>()
                        .map_err(|t| Error::Parameter(format!("unknown class '{t}'")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let manifest = synth_dataset(
                &SynthConfig {
                    n_per_class: a.per_class,
                    classes,
                    seed: a.seed,
                },
                &a.out,
            )?;
            println!("{}", manifest.display());
        }
        Command::Extract(a) => {
            let cfg = a.detect.config()?;
            let outcome = extract_manifest(&a.manifest, &cfg)?;
            write_csv(&a.out, &outcome.samples)?;
            for (id, e) in &outcome.failures {
                eprintln!("error: {id}: {e}");
            }
            println!(
                "extracted {} points from {} images ({} failed) -> {}",
                outcome.samples.len(),
                outcome.images,
                outcome.failures.len(),
                a.out.display()
            );
            if !outcome.failures.is_empty() {
                return Err(Error::Data(format!(
                    "{} images could not be processed",
                    outcome.failures.len()
                )));
            }
        }
        Command::Train(a) => {
            let samples = read_csv(&a.features)?;
            let kernel = match a.kernel {
                KernelArg::Linear => KernelSpec::Linear,
                KernelArg::Rbf => KernelSpec::Rbf { gamma: a.gamma },
            };
            let split = SplitSpec {
                train_fraction: a.train_fraction,
                seed: a.split_seed,
                stratified: true,
            };
            let cfg = TrainConfig {
                kernel,
                c: a.c,
                use_kpca: a.kpca == Switch::On,
                seed: a.seed,
                ..Default::default()
            };
            let trained = train_from_samples(&samples, a.mode.into(), &split, &cfg)?;
            trained.model.save(&a.model)?;
            let ids = test_ids_path(&a.model);
            write_ids(&ids, &trained.test_ids)?;
            println!(
                "trained {} machines over {} classes on {} images; {} held out -> {}",
                trained.model.classifier.machines.len(),
                trained.model.classifier.classes.len(),
                trained.model.train_ids.len(),
                trained.test_ids.len(),
                a.model.display()
            );
        }
        Command::Eval(a) => {
            let model = ModelFile::load(&a.model)?;
            let ids_path = a.test_ids.unwrap_or_else(|| test_ids_path(&a.model));
            let ids = read_ids(&ids_path)?;
            let samples = read_csv(&a.features)?;
            let report = evaluate(&model, &samples, &ids)?;
            report.save(&a.report)?;
            println!(
                "point: accuracy {:.4} macro-F1 {:.4} | image: accuracy {:.4} macro-F1 {:.4}",
                report.point.accuracy,
                report.point.macro_f1,
                report.image.accuracy,
                report.image.macro_f1
            );
        }
        Command::Predict(a) => {
            let model = ModelFile::load(&a.model)?;
            let cfg = a.detect.config()?;
            let (image, mask) = load_frame(&a.image, a.mask.as_deref())?;
            let pred = predict_frame(&model, &image, mask.as_ref(), &cfg)?;
            for (p, pr) in &pred.points {
                println!(
                    "point x={} y={} scale={:.3} label={} margin={:.4}",
                    p.x, p.y, p.scale, pr.target, pr.margin
                );
            }
            println!("image label={}", pred.label);
        }
        Command::Overlay(a) => {
            let model = ModelFile::load(&a.model)?;
            let cfg = a.detect.config()?;
            let (image, mask) = load_frame(&a.image, a.mask.as_deref())?;
            let pred = predict_frame(&model, &image, mask.as_ref(), &cfg)?;
            let marks: Vec<_> = pred.points.iter().map(|(p, pr)| (*p, pr.target)).collect();
            let out = overlay::render(&image, &marks, &model.classifier.classes);
            out.save(&a.out)?;
            println!(
                "{} points, image label={} -> {}",
                marks.len(),
                pred.label,
                a.out.display()
            );
        }
        Command::Table(a) => {
            let samples = read_csv(&a.features)?;
            let cfg = capsule_screen::pipeline::TableConfig {
                split: SplitSpec {
                    train_fraction: a.train_fraction,
                    seed: a.split_seed,
                    stratified: true,
                },
                c: a.c,
                gamma: a.gamma,
                seed: a.seed,
            };
            let modes: Vec<ClassMode> = a.modes.iter().map(|m| (*m).into()).collect();
            let table = comparison_table(&samples, &modes, &cfg)?;
            let mut text =
                serde_json::to_string_pretty(&table).map_err(|e| Error::Data(e.to_string()))?;
            text.push('\n');
            std::fs::write(&a.out, text)
                .map_err(|e| Error::Data(format!("{}: {e}", a.out.display())))?;
            print!("{}", render_table(&table));
        }
    }
    Ok(())
}

fn load_frame(image: &Path, mask: Option<&Path>) -> Result<(RgbImage, Option<RoiMask>), Error> {
    let image = RgbImage::load(image)?;
    let mask = mask.map(RoiMask::load).transpose()?;
    Ok((image, mask))
}

fn toml_scalar(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        toml::Value::Array(items) => {
            let parts: Option<Vec<String>> = items.iter().map(toml_scalar).collect();
            parts.map(|p| p.join(","))
        }
        _ => None,
    }
}

/// Re-parses `argv` with config-file values inserted ahead of the user's
/// own flags for the chosen subcommand; later flags override earlier ones.
fn parse_with_config(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let cmd = Cli::command().args_override_self(true);
    let matches = cmd.clone().try_get_matches_from(&argv)?;
    let Some(config) = matches.get_one::<PathBuf>("config").cloned() else {
        return Cli::from_arg_matches(&matches);
    };
    let Some((sub, _)) = matches.subcommand() else {
        return Cli::from_arg_matches(&matches);
    };
    let usage = |msg: String| cmd.clone().error(clap::error::ErrorKind::InvalidValue, msg);
    let text = std::fs::read_to_string(&config)
        .map_err(|e| usage(format!("{}: {e}", config.display())))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| usage(format!("{}: {e}", config.display())))?;

    let sub_cmd = cmd.find_subcommand(sub).expect("matched subcommand exists");
    let known: HashSet<String> = sub_cmd
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .filter(|l| l != "config")
        .collect();
    let mut injected: Vec<OsString> = Vec::new();
    let scoped = table.get(sub).and_then(|v| v.as_table());
    let entries = table
        .iter()
        .filter(|(_, v)| !v.is_table())
        .chain(scoped.into_iter().flatten());
    for (key, value) in entries {
        let flag = key.replace('_', "-");
        if !known.contains(&flag) {
            continue;
        }
        let value = toml_scalar(value)
            .ok_or_else(|| usage(format!("config key '{key}' must be a scalar or list")))?;
        injected.push(format!("--{flag}").into());
        injected.push(value.into());
    }

    let pos = argv
        .iter()
        .enumerate()
        .skip(1)
        .position(|(i, a)| a == sub && argv[i - 1] != "--config")
        .map(|p| p + 1)
        .expect("subcommand appears in argv");
    let mut merged: Vec<OsString> = argv[..=pos].to_vec();
    merged.extend(injected);
    merged.extend_from_slice(&argv[pos + 1..]);
    Cli::from_arg_matches(&cmd.try_get_matches_from(merged)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match parse_with_config(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numeric => 3,
            })
        }
    }
}
