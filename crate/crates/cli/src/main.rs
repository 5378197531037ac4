use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use synthforge::config::{dump_effective_config, parse_config, ConfigError, ExperimentConfig, LabelingParadigm};
use synthforge::data::{
    denormalize, generate_phantom_dataset, load_cohort, read_manifest, read_manifest_auto, seeded_rng, write_manifest,
    write_pgm, DataError, Manifest, SampleRecord,
};
use synthforge::metrics::{compare_cohorts, MetricsError};
use synthforge::models::ModelError;
use synthforge::tensor::Tensor;
use synthforge::trainer::{load_checkpoint_module, train_run, Checkpoint, TrainerError, FORMAT_VERSION};

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "synthforge", version, about = "Train and sample generative models for medical images from text files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a config, then print the effective config
    ValidateConfig(ValidateArgs),
    /// Write a synthetic two-class phantom cohort
    Phantom(PhantomArgs),
    /// Train a model
    Train(TrainArgs),
    /// Sample images from a checkpoint
    Generate(GenerateArgs),
    /// Compare first-order intensity features of two cohorts
    Compare(CompareArgs),
    /// Print version and, optionally, checkpoint metadata
    Info(InfoArgs),
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long)]
    output_dir: PathBuf,
    /// Images per class
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the manifest without a Label column
    #[arg(long)]
    unlabeled: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Directory manifest paths are relative to (default: the manifest's directory)
    #[arg(long)]
    data_root: Option<PathBuf>,
    #[arg(long)]
    output_dir: PathBuf,
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    num_samples: usize,
    /// Class for every sample (conditional models; default cycles through classes)
    #[arg(long)]
    class_id: Option<usize>,
    #[arg(long)]
    output_dir: PathBuf,
    /// Sampling seed (default: the checkpoint's training seed)
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct CompareArgs {
    /// Manifest CSV, or a directory containing manifest.csv
    #[arg(long)]
    real_manifest: PathBuf,
    #[arg(long)]
    synth_manifest: PathBuf,
    /// Report path; a .json extension selects JSON, anything else CSV
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct InfoArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

/// A bad flag combination or value caught after argument parsing.
#[derive(Debug)]
struct Invalid(String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    Invalid(msg.into()).into()
}

fn is_validation(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        if e.is::<Invalid>() || e.is::<ConfigError>() {
            return true;
        }
        let data = |d: &DataError| matches!(d, DataError::Manifest { .. } | DataError::Argument(_));
        let model = |m: &ModelError| matches!(m, ModelError::Argument(_) | ModelError::Config(_) | ModelError::Capability(_));
        if let Some(d) = e.downcast_ref::<DataError>() {
            return data(d);
        }
        if let Some(m) = e.downcast_ref::<ModelError>() {
            return model(m);
        }
        if let Some(MetricsError::Argument(_)) = e.downcast_ref::<MetricsError>() {
            return true;
        }
        match e.downcast_ref::<TrainerError>() {
            Some(TrainerError::Config(_) | TrainerError::Startup(_) | TrainerError::Argument(_)) => true,
            Some(TrainerError::Data(d)) => data(d),
            Some(TrainerError::Model(m)) => model(m),
            _ => false,
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SYNTHFORGE_LOG_LEVEL", "info"))
        .format_timestamp(None)
        .init();

    let result = match cli.command {
        Command::ValidateConfig(a) => validate_config(&a),
        Command::Phantom(a) => phantom(&a),
        Command::Train(a) => train(&a),
        Command::Generate(a) => generate(&a),
        Command::Compare(a) => compare(&a),
        Command::Info(a) => show_info(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(if is_validation(&err) { EXIT_VALIDATION } else { EXIT_RUNTIME })
        }
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("--config {}", path.display()))?;
    parse_config(&text).with_context(|| format!("--config {}", path.display()))
}

fn validate_config(a: &ValidateArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    print!("{}", dump_effective_config(&cfg));
    Ok(())
}

fn phantom(a: &PhantomArgs) -> Result<()> {
    let ds = generate_phantom_dataset(&a.output_dir, a.per_class, a.size, a.seed)
        .with_context(|| format!("--output-dir {}", a.output_dir.display()))?;
    if a.unlabeled {
        let mut m = ds.manifest;
        m.paradigm = LabelingParadigm::Unlabeled;
        m.records.iter_mut().for_each(|r| r.label = None);
        write_manifest(&m, &ds.manifest_path)?;
    }
    info!("wrote {} images and {}", 2 * a.per_class, ds.manifest_path.display());
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let mut cfg = load_config(&a.config)?;
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.check().map_err(|e| invalid(format!("--workers/--seed override: {}", e.message)))?;
    let manifest = read_manifest(&a.manifest, cfg.labeling_paradigm, cfg.num_classes)
        .with_context(|| format!("--manifest {}", a.manifest.display()))?;
    let root = match &a.data_root {
        Some(r) => r.clone(),
        None => a.manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    info!("training {} on {} samples (workers {})", cfg.model_family, manifest.len(), cfg.workers);
    match train_run(&cfg, &manifest, &root, &a.output_dir, a.resume) {
        Ok(outcome) => {
            info!(
                "finished epoch {} at step {}; checkpoint {}",
                outcome.checkpoint.epoch,
                outcome.checkpoint.step,
                outcome.checkpoint_path.display()
            );
            Ok(())
        }
        Err(err) => {
            // anything already in the output directory is partial
            if a.output_dir.is_dir() && !matches!(err, TrainerError::Startup(_) | TrainerError::Config(_)) {
                let _ = std::fs::write(a.output_dir.join("FAILED"), format!("{err}\n"));
            }
            Err(anyhow::Error::new(err).context(format!("train --output-dir {}", a.output_dir.display())))
        }
    }
}

fn generate(a: &GenerateArgs) -> Result<()> {
    let (ckpt, state) =
        load_checkpoint_module(&a.checkpoint).with_context(|| format!("--checkpoint {}", a.checkpoint.display()))?;
    let cfg = &state.config;
    if a.num_samples == 0 {
        return Err(invalid("--num-samples must be ≥ 1"));
    }
    let labels: Option<Vec<usize>> = match (cfg.is_conditional(), a.class_id) {
        (false, Some(_)) => return Err(invalid("--class-id given but the checkpoint's model is unconditional")),
        (false, None) => None,
        (true, Some(c)) if c >= cfg.num_classes => {
            return Err(invalid(format!("--class-id {c} out of range [0, {})", cfg.num_classes)))
        }
        (true, Some(c)) => Some(vec![c; a.num_samples]),
        (true, None) => Some((0..a.num_samples).map(|i| i % cfg.num_classes).collect()),
    };
    let seed = a.seed.unwrap_or(cfg.seed);
    info!("sampling {} images from epoch {} {} model", a.num_samples, ckpt.epoch, cfg.model_family);
    let mut rng = seeded_rng(seed, u64::MAX, 1);
    let images = state.module.generate(a.num_samples, labels.as_deref(), cfg.normalization_range, &mut rng)?;
    let images = denormalize(&images, cfg.normalization_range);

    std::fs::create_dir_all(&a.output_dir).with_context(|| format!("--output-dir {}", a.output_dir.display()))?;
    let [channels, h, w] = cfg.image_shape();
    let mut records = Vec::with_capacity(a.num_samples);
    let per_sample = channels * h * w;
    for i in 0..a.num_samples {
        let sample = &images.data()[i * per_sample..(i + 1) * per_sample];
        let label = labels.as_ref().map(|l| l[i]);
        let stem = match label {
            Some(c) => format!("sample_{c}_{i:04}"),
            None => format!("sample_{i:04}"),
        };
        let mut channel_paths = Vec::with_capacity(channels);
        for k in 0..channels {
            let name = if channels == 1 { format!("{stem}.pgm") } else { format!("{stem}_ch{k}.pgm") };
            let plane = Tensor::new(vec![h, w], sample[k * h * w..(k + 1) * h * w].to_vec())?;
            write_pgm(&plane, &a.output_dir.join(&name))?;
            channel_paths.push(PathBuf::from(name));
        }
        records.push(SampleRecord { subject_id: stem, channel_paths, label, row: i + 2 });
    }
    let paradigm = if labels.is_some() { LabelingParadigm::Labeled } else { LabelingParadigm::Unlabeled };
    let manifest_path = a.output_dir.join("manifest.csv");
    write_manifest(&Manifest { records, paradigm, channels }, &manifest_path)?;
    info!("wrote {} samples and {}", a.num_samples, manifest_path.display());
    Ok(())
}

fn read_cohort(flag: &str, path: &Path) -> Result<Vec<Tensor>> {
    let file = if path.is_dir() { path.join("manifest.csv") } else { path.to_path_buf() };
    let manifest = read_manifest_auto(&file).with_context(|| format!("{flag} {}", file.display()))?;
    let root = file.parent().map(Path::to_path_buf).unwrap_or_default();
    load_cohort(&manifest, &root).with_context(|| format!("{flag} {}", file.display()))
}

fn compare(a: &CompareArgs) -> Result<()> {
    let real = read_cohort("--real-manifest", &a.real_manifest)?;
    let synth = read_cohort("--synth-manifest", &a.synth_manifest)?;
    if real.is_empty() || synth.is_empty() {
        bail!(invalid("both cohorts need at least one image"));
    }
    let report = compare_cohorts(&real, &synth)?;
    report.write(&a.output).with_context(|| format!("--output {}", a.output.display()))?;
    for row in &report.rows {
        info!("{:>16}  d {:.4}  ks {:.4}", row.feature, row.standardized_diff, row.ks_distance);
    }
    Ok(())
}

fn show_info(a: &InfoArgs) -> Result<()> {
    println!("synthforge {}", env!("CARGO_PKG_VERSION"));
    println!("checkpoint format version {FORMAT_VERSION}");
    let Some(path) = &a.checkpoint else { return Ok(()) };
    let ckpt = Checkpoint::load(path).with_context(|| format!("--checkpoint {}", path.display()))?;
    let (_, state) = load_checkpoint_module(path).with_context(|| format!("--checkpoint {}", path.display()))?;
    println!("checkpoint: {}", path.display());
    println!("model family: {}", state.config.model_family);
    println!("epoch: {}", ckpt.epoch);
    println!("step: {}", ckpt.step);
    println!("tensors: {}", ckpt.tensors.len());
    for g in state.module.groups() {
        println!("group {}: {} parameters", g.name, g.numel());
    }
    println!("effective config:");
    print!("{}", ckpt.config_text);
    Ok(())
}
