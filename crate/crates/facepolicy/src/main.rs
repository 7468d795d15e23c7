use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use facepolicy::checkpoint::{load_checkpoint, MAGIC as FCKP_MAGIC};
use facepolicy::config::{RunConfig, TrainOverrides, SEED_ENV};
use facepolicy::dataset::{make_dataset, split_counts};
use facepolicy::eval::{evaluate_dirs, render};
use facepolicy::format::{read_animation, read_audio, FANIM_MAGIC, FAUD_MAGIC};
use facepolicy::pipeline::{generate_run, load_training_data, print_resolved, train_run, GenerateRequest};
use facepolicy_core::diffusion::PredictionMode;
use serde::Serialize;

/// Speech-driven facial motion with a diffusion policy.
#[derive(Parser)]
#[command(name = "facepolicy", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset (FANIM + FAUD pairs and manifest.json).
    Synth(SynthArgs),
    /// Train a policy on the train split of a dataset.
    Train(TrainArgs),
    /// Roll out a trained policy on an audio track.
    Generate(GenerateArgs),
    /// Score predicted animations against ground truth.
    Eval(EvalArgs),
    /// Print header fields and value ranges of a FANIM, FAUD or FCKP file.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Run config whose `synth` section supplies defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 12)]
    count: usize,
    #[arg(long)]
    vertices: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Sample,
    Epsilon,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output training log (one JSON record per line).
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    max_steps: Option<u64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// FAUD track to speak.
    #[arg(long)]
    audio: PathBuf,
    /// FANIM providing the template and the first frame.
    #[arg(long)]
    template: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    /// Frames to generate; defaults to the length of the audio.
    #[arg(long)]
    frames: Option<usize>,
    /// Observe the template file's frames instead of generated ones.
    #[arg(long)]
    teacher_forced: bool,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// JSON list of vertex indices; defaults to each template's upper half.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct InspectArgs {
    file: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Generate(a) => generate(a),
        Command::Eval(a) => eval(a),
        Command::Inspect(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn resolved<T: Serialize>(label: &str, value: &T) -> Result<()> {
    print_resolved(&mut std::io::stdout().lock(), label, value)?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.config.as_deref())?.synth;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(v) = a.vertices {
        cfg.vertices = v;
    }
    if let Some(n) = a.frames {
        cfg.frames = n;
    }
    if let Some(f) = a.fps {
        cfg.fps = f;
    }
    #[derive(Serialize)]
    struct Resolved<'a> {
        count: usize,
        out: &'a Path,
        synth: &'a facepolicy_core::synth::SynthConfig,
    }
    resolved(
        "config",
        &Resolved {
            count: a.count,
            out: &a.out,
            synth: &cfg,
        },
    )?;
    let manifest = make_dataset(&cfg, a.count, &a.out)?;
    let [train, val, test] = split_counts(a.count);
    println!(
        "wrote {} sequences to {} (train {train}, val {val}, test {test})",
        manifest.entries.len(),
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(a.config.as_deref())?;
    TrainOverrides {
        manifest: a.manifest,
        checkpoint: a.checkpoint,
        log: a.log,
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        max_steps: a.max_steps,
        mode: a.mode.map(|m| match m {
            Mode::Sample => PredictionMode::Sample,
            Mode::Epsilon => PredictionMode::Epsilon,
        }),
        seed: a.seed,
    }
    .apply(&mut cfg);
    let items = load_training_data(&mut cfg)?;
    resolved("config", &cfg)?;
    let report = train_run(&cfg, &items)?;
    for e in &report.epochs {
        println!("epoch {} steps {} mean loss {:.6e}", e.epoch, e.steps, e.mean_loss);
    }
    println!(
        "trained on {} windows from {} sequences; checkpoint {}",
        report.windows,
        report.sequences,
        cfg.checkpoint.display()
    );
    Ok(())
}

fn generate(a: GenerateArgs) -> Result<()> {
    let req = GenerateRequest {
        checkpoint: a.checkpoint,
        audio: a.audio,
        template: a.template,
        out: a.out,
        seed: a.seed,
        frames: a.frames,
        teacher_forced: a.teacher_forced,
    };
    resolved("config", &req)?;
    let anim = generate_run(&req)?;
    println!(
        "wrote {} frames of {} vertices to {}",
        anim.sequence.num_frames(),
        anim.sequence.num_vertices(),
        req.out.display()
    );
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    resolved("config", &a)?;
    let mask: Option<Vec<usize>> = match &a.mask {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| p.display().to_string())?;
            Some(
                serde_json::from_str(&text)
                    .with_context(|| format!("{}: expected a JSON list of indices", p.display()))?,
            )
        }
        None => None,
    };
    let table = evaluate_dirs(&a.pred, &a.gt, mask.as_deref())?;
    let mut json = serde_json::to_string_pretty(&table)?;
    json.push('\n');
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    }
    std::fs::write(&a.out, json).with_context(|| a.out.display().to_string())?;
    print!("{}", render(&table));
    if !table.unpaired.is_empty() {
        bail!(
            "{} unpaired file(s) excluded: {}",
            table.unpaired.len(),
            table.unpaired.join(", ")
        );
    }
    Ok(())
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

fn inspect(a: InspectArgs) -> Result<()> {
    resolved("config", &a)?;
    let path = &a.file;
    let head = {
        use std::io::Read;
        let mut buf = [0u8; 4];
        let mut f = std::fs::File::open(path).with_context(|| path.display().to_string())?;
        f.read_exact(&mut buf)
            .with_context(|| format!("{}: shorter than a magic number", path.display()))?;
        buf
    };
    if &head == FANIM_MAGIC {
        let anim = read_animation(path)?;
        let s = &anim.sequence;
        println!("format: FANIM v1");
        println!("V: {}", s.num_vertices());
        println!("N: {}", s.num_frames());
        println!("fps: {}", s.fps());
        for (axis, name) in ["x", "y", "z"].iter().enumerate() {
            let (tlo, thi) = range(anim.template.vertices().iter().map(|p| p[axis]));
            let (lo, hi) = range(s.data().iter().skip(axis).step_by(3).copied());
            println!("{name}: template [{tlo:.6}, {thi:.6}] frames [{lo:.6}, {hi:.6}]");
        }
    } else if &head == FAUD_MAGIC {
        let t = read_audio(path)?;
        let (lo, hi) = range(t.samples.iter().map(|&x| x as f64));
        println!("format: FAUD v1");
        println!("sample_rate: {}", t.sample_rate);
        println!("samples: {}", t.samples.len());
        println!("seconds: {:.6}", t.samples.len() as f64 / t.sample_rate as f64);
        println!("range: [{lo:.6}, {hi:.6}]");
    } else if &head == FCKP_MAGIC {
        let (policy, train) = load_checkpoint(path)?;
        println!("format: FCKP v1");
        println!("policy: {}", serde_json::to_string(&policy.config)?);
        println!("train: {}", serde_json::to_string(&train)?);
        for t in policy.tensors() {
            let (lo, hi) = range(t.value.iter().copied());
            println!("{}: {} values in [{lo:.6}, {hi:.6}]", t.name, t.value.len());
        }
    } else {
        bail!("{}: unknown magic {:?}", path.display(), String::from_utf8_lossy(&head));
    }
    Ok(())
}
