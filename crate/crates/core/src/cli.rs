//! The `motionsep` command line.
//!
//! Exit status is 0 on success, 1 when input data is unusable and 2 for
//! usage errors (reported by clap).

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::camera::{classify_camera_motion, fit_model, MotionTolerance};
use crate::descriptor::{
    train_classifier, Activity, DescriptorConfig, StreamKind, TrainConfig, NUM_ACTIVITIES,
};
use crate::events::{
    binarize, clip_success, event11_index, event11_name, kronecker_fuse, merge_steal,
    threshold_sweep, DEFAULT_SF_THRESHOLD, NUM_EVENTS11, STEAL_EVENT,
};
use crate::flow::{color_code, write_flow, FlowField};
use crate::manifest::{load_flow_file, load_manifest, outcome_label, record_line, ClipEntry, ClipRecord};
use crate::metrics::{accuracy, confusion, mean_average_precision, ConfusionMatrix};
use crate::pipeline::{clip_features, ClipFeatures, ModelBundle};
use crate::separation::{separate, DEFAULT_THRESHOLD};
use crate::synth::{dataset_specs, default_templates, generate_clip, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "motionsep", version, about = "Camera/player motion separation and basketball event recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split mixed flow into global (camera) and local (player) flow.
    Separate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        theta: f64,
        /// Output directory (defaults to each input's directory).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also write color-coded PPM images.
        #[arg(long)]
        viz: bool,
    },
    /// Color-code a flow field as a PPM image.
    Visualize {
        input: PathBuf,
        /// Magnitude mapped to full saturation (defaults to the field maximum).
        #[arg(long)]
        max_mag: Option<f64>,
        /// Output path (defaults to the input with a .ppm extension).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Fit the camera model to a flow field and name the camera motion.
    Fit {
        input: PathBuf,
        #[arg(long, default_value_t = MotionTolerance::default().translation)]
        translation_tol: f64,
        #[arg(long, default_value_t = MotionTolerance::default().scale)]
        scale_tol: f64,
    },
    /// Generate a labeled synthetic dataset and its manifest.
    Synth {
        #[arg(long)]
        per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = SynthConfig::default().width)]
        width: usize,
        #[arg(long, default_value_t = SynthConfig::default().height)]
        height: usize,
        #[arg(long, default_value_t = SynthConfig::default().frames)]
        frames: usize,
        #[arg(long, default_value_t = SynthConfig::default().noise_sigma)]
        noise: f64,
        /// Also write the ground-truth global and local frames.
        #[arg(long)]
        ground_truth: bool,
    },
    /// Train activity classifiers on a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        stream: StreamArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
        lr: f64,
        #[arg(long, default_value_t = TrainConfig::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = TrainConfig::default().weight_decay)]
        weight_decay: f64,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        theta: f64,
        #[command(flatten)]
        descriptor: DescriptorArgs,
    },
    /// Activity accuracy, MAP and confusion matrix of a model.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        fuse_ratio: f64,
    },
    /// Clip success accuracy over the threshold grid 0.50..1.00.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Full event pipeline: activity, success/failure, 11 final events.
    Events {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SF_THRESHOLD)]
        sf_threshold: f64,
        #[arg(long, default_value_t = 1.0)]
        fuse_ratio: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StreamArg {
    Global,
    Local,
    Mixed,
    Two,
}

#[derive(Debug, Args)]
struct DescriptorArgs {
    #[arg(long, default_value_t = DescriptorConfig::default().grid)]
    grid: usize,
    #[arg(long, default_value_t = DescriptorConfig::default().segments)]
    segments: usize,
    #[arg(long, default_value_t = DescriptorConfig::default().bins)]
    bins: usize,
}

/// Entry point used by the binary.
pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Parses `args` (program name first), runs the command, returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Separate {
            inputs,
            theta,
            out_dir,
            viz,
        } => cmd_separate(&inputs, theta, out_dir.as_deref(), viz),
        Command::Visualize {
            input,
            max_mag,
            out,
        } => cmd_visualize(&input, max_mag, out),
        Command::Fit {
            input,
            translation_tol,
            scale_tol,
        } => cmd_fit(
            &input,
            MotionTolerance {
                translation: translation_tol,
                scale: scale_tol,
            },
        ),
        Command::Synth {
            per_class,
            seed,
            out_dir,
            width,
            height,
            frames,
            noise,
            ground_truth,
        } => cmd_synth(
            per_class,
            seed,
            &out_dir,
            SynthConfig {
                width,
                height,
                frames,
                noise_sigma: noise,
            },
            ground_truth,
        ),
        Command::Train {
            manifest,
            stream,
            seed,
            out,
            lr,
            epochs,
            weight_decay,
            theta,
            descriptor,
        } => {
            let config = TrainConfig {
                learning_rate: lr,
                epochs,
                seed,
                weight_decay,
                ..TrainConfig::default()
            };
            let descriptor = DescriptorConfig {
                grid: descriptor.grid,
                segments: descriptor.segments,
                bins: descriptor.bins,
            };
            cmd_train(&manifest, stream, &config, theta, descriptor, &out)
        }
        Command::Eval {
            manifest,
            model,
            fuse_ratio,
        } => cmd_eval(&manifest, &model, fuse_ratio),
        Command::Sweep { manifest } => cmd_sweep(&manifest),
        Command::Events {
            manifest,
            model,
            sf_threshold,
            fuse_ratio,
        } => cmd_events(&manifest, &model, sf_threshold, fuse_ratio),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "flow".to_string())
}

fn write_flo(path: &Path, field: &FlowField) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("{}", path.display()))?;
    let mut w = BufWriter::new(file);
    write_flow(field, &mut w).with_context(|| format!("{}", path.display()))?;
    w.flush().with_context(|| format!("{}", path.display()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("{}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("{}", path.display()))
}

fn cmd_separate(inputs: &[PathBuf], theta: f64, out_dir: Option<&Path>, viz: bool) -> Result<()> {
    if let Some(dir) = out_dir {
        create_dir(dir)?;
    }
    for input in inputs {
        let mixed = load_flow_file(input)?;
        let result = separate(&mixed, theta).with_context(|| format!("{}", input.display()))?;
        let dir = match out_dir {
            Some(d) => d.to_path_buf(),
            None => input.parent().unwrap_or(Path::new(".")).to_path_buf(),
        };
        let name = stem(input);
        let global = dir.join(format!("{name}.global.flo"));
        let local = dir.join(format!("{name}.local.flo"));
        write_flo(&global, &result.global)?;
        write_flo(&local, &result.local)?;
        println!("{} -> {} {}", input.display(), global.display(), local.display());
        if viz {
            // one shared scale keeps the three images comparable
            let max = mixed.magnitudes().fold(0.0, f64::max);
            for (tag, field) in [("mixed", &mixed), ("global", &result.global), ("local", &result.local)] {
                let path = dir.join(format!("{name}.{tag}.ppm"));
                write_bytes(&path, &color_code(field, Some(max)).to_ppm())?;
            }
        }
    }
    Ok(())
}

fn cmd_visualize(input: &Path, max_mag: Option<f64>, out: Option<PathBuf>) -> Result<()> {
    if let Some(m) = max_mag {
        if !(m.is_finite() && m > 0.0) {
            bail!("--max-mag must be positive, got {m}");
        }
    }
    let field = load_flow_file(input)?;
    let out = out.unwrap_or_else(|| input.with_extension("ppm"));
    write_bytes(&out, &color_code(&field, max_mag).to_ppm())?;
    println!("{}", out.display());
    Ok(())
}

fn cmd_fit(input: &Path, tol: MotionTolerance) -> Result<()> {
    let field = load_flow_file(input)?;
    let model = fit_model(&field).with_context(|| format!("{}", input.display()))?;
    let label = classify_camera_motion(&model, field.width(), field.height(), tol);
    println!("{model}");
    println!("{label}");
    Ok(())
}

fn cmd_synth(
    per_class: usize,
    seed: u64,
    out_dir: &Path,
    config: SynthConfig,
    ground_truth: bool,
) -> Result<()> {
    let specs = dataset_specs(per_class, &default_templates(), &config, seed)?;
    create_dir(out_dir)?;
    let lines = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| -> Result<String> {
            let clip = generate_clip(spec)?;
            let id = format!("clip-{i:05}");
            let dir = out_dir.join(&id);
            create_dir(&dir)?;
            let mut frames = Vec::with_capacity(spec.frames);
            for t in 0..spec.frames {
                let name = format!("mixed-{t:02}.flo");
                write_flo(&dir.join(&name), &clip.mixed.frames()[t])?;
                if ground_truth {
                    write_flo(&dir.join(format!("global-{t:02}.flo")), &clip.global.frames()[t])?;
                    write_flo(&dir.join(format!("local-{t:02}.flo")), &clip.local.frames()[t])?;
                }
                frames.push(PathBuf::from(&id).join(name));
            }
            let activity = Activity::from_index(spec.activity).expect("validated activity");
            Ok(record_line(&ClipRecord {
                id,
                frames,
                activity: activity.name().to_string(),
                sf: outcome_label(spec.sf).to_string(),
                scores: Some(clip.scores.as_slice().to_vec()),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = out_dir.join("manifest.jsonl");
    let mut text = lines.join("\n");
    text.push('\n');
    write_bytes(&manifest, text.as_bytes())?;
    println!("{} clips -> {}", lines.len(), manifest.display());
    Ok(())
}

fn load_features(
    entries: &[ClipEntry],
    theta: f64,
    descriptor: DescriptorConfig,
) -> Result<Vec<ClipFeatures>> {
    entries
        .par_iter()
        .map(|e| {
            let mixed = e.load_frames()?;
            clip_features(&mixed, theta, descriptor).with_context(|| format!("clip {}", e.id))
        })
        .collect()
}

fn load_entries(manifest: &Path) -> Result<Vec<ClipEntry>> {
    let entries = load_manifest(manifest)?;
    if entries.is_empty() {
        bail!("{}: no clips", manifest.display());
    }
    Ok(entries)
}

fn load_model(path: &Path) -> Result<ModelBundle> {
    let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    ModelBundle::from_text(&text).with_context(|| format!("{}", path.display()))
}

fn cmd_train(
    manifest: &Path,
    stream: StreamArg,
    config: &TrainConfig,
    theta: f64,
    descriptor: DescriptorConfig,
    out: &Path,
) -> Result<()> {
    let entries = load_entries(manifest)?;
    let features = load_features(&entries, theta, descriptor)?;
    let labels: Vec<usize> = entries.iter().map(|e| e.activity.index()).collect();
    let kinds: &[StreamKind] = match stream {
        StreamArg::Global => &[StreamKind::Global],
        StreamArg::Local => &[StreamKind::Local],
        StreamArg::Mixed => &[StreamKind::Mixed],
        StreamArg::Two => &[StreamKind::Global, StreamKind::Local],
    };
    let mut streams = Vec::new();
    for &kind in kinds {
        let x: Vec<Vec<f64>> = features.iter().map(|f| f.stream(kind).values.clone()).collect();
        let (model, report) = train_classifier(&x, &labels, NUM_ACTIVITIES, config)
            .with_context(|| format!("training the {} stream", kind.as_str()))?;
        let first = report.epoch_losses.first().copied().unwrap_or(f64::NAN);
        let last = report.epoch_losses.last().copied().unwrap_or(f64::NAN);
        println!("{}: loss {first:.4} -> {last:.4}", kind.as_str());
        streams.push((kind, model));
    }
    let bundle = ModelBundle {
        descriptor,
        threshold: theta,
        streams,
    };
    write_bytes(out, bundle.to_text().as_bytes())?;
    println!("model -> {}", out.display());
    Ok(())
}

fn activity_names() -> Vec<String> {
    Activity::ALL.iter().map(|a| a.name().to_string()).collect()
}

fn print_scores(cm: &ConfusionMatrix, names: &[String]) -> Result<()> {
    println!("accuracy {:.4}", accuracy(cm)?);
    println!("map {:.4}", mean_average_precision(cm)?);
    print!("{}", cm.to_csv(names));
    Ok(())
}

fn predict_activities(
    bundle: &ModelBundle,
    entries: &[ClipEntry],
    fuse_ratio: f64,
) -> Result<Vec<crate::descriptor::ProbVector>> {
    if !(fuse_ratio.is_finite() && fuse_ratio > 0.0) {
        bail!("--fuse-ratio must be positive, got {fuse_ratio}");
    }
    let features = load_features(entries, bundle.threshold, bundle.descriptor)?;
    features
        .iter()
        .zip(entries)
        .map(|(f, e)| {
            bundle
                .predict(f, fuse_ratio)
                .with_context(|| format!("clip {}", e.id))
        })
        .collect()
}

fn cmd_eval(manifest: &Path, model: &Path, fuse_ratio: f64) -> Result<()> {
    let bundle = load_model(model)?;
    let entries = load_entries(manifest)?;
    let probs = predict_activities(&bundle, &entries, fuse_ratio)?;
    let truth: Vec<usize> = entries.iter().map(|e| e.activity.index()).collect();
    let predicted: Vec<usize> = probs.iter().map(|p| p.argmax()).collect();
    let cm = confusion(&truth, &predicted, NUM_ACTIVITIES)?;
    print_scores(&cm, &activity_names())
}

fn cmd_sweep(manifest: &Path) -> Result<()> {
    let entries = load_entries(manifest)?;
    let clips: Vec<_> = entries
        .iter()
        .filter_map(|e| Some((e.scores.clone()?, e.sf?)))
        .collect();
    if clips.is_empty() {
        bail!(
            "{}: no clips carry both frame scores and a success/failure label",
            manifest.display()
        );
    }
    let table = threshold_sweep(&clips)?;
    print!("{}", table.to_csv());
    let best = table.best();
    println!("best {:.2} {:.4}", best.threshold, best.overall_accuracy);
    Ok(())
}

fn cmd_events(manifest: &Path, model: &Path, sf_threshold: f64, fuse_ratio: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&sf_threshold) {
        bail!("--sf-threshold must lie in [0, 1], got {sf_threshold}");
    }
    let bundle = load_model(model)?;
    let entries = load_entries(manifest)?;
    let mut truth = Vec::with_capacity(entries.len());
    for e in &entries {
        if e.scores.is_none() {
            bail!("clip {}: no frame scores", e.id);
        }
        let t = match (e.activity, e.sf) {
            (Activity::Steal, _) => STEAL_EVENT,
            (a, Some(sf)) => event11_index(a.index(), sf),
            (a, None) => bail!("clip {}: {} needs a success/failure label", e.id, a.name()),
        };
        truth.push(t);
    }
    let probs = predict_activities(&bundle, &entries, fuse_ratio)?;
    let predicted = probs
        .iter()
        .zip(&entries)
        .map(|(p, e)| -> Result<usize> {
            let scores = e.scores.as_ref().expect("checked above");
            let event = merge_steal(&kronecker_fuse(&binarize(p)?, &clip_success(scores, sf_threshold)?)?)?;
            event
                .hot_index()
                .ok_or_else(|| anyhow!("clip {}: fused event is not one-hot", e.id))
        })
        .collect::<Result<Vec<_>>>()?;
    let cm = confusion(&truth, &predicted, NUM_EVENTS11)?;
    let names: Vec<String> = (0..NUM_EVENTS11).map(event11_name).collect();
    print_scores(&cm, &names)
}
