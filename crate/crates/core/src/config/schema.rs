use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::nn::{LrSchedule, OptimizerKind};

use super::document::{ConfigDocument, Entry, Node, NodeKind, Scalar};
use super::ConfigError;

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident, $field:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown {} '{}' (expected one of {})",
                        $field,
                        other,
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

named_enum!(
    /// The three synthesis families.
    ModelFamily, "model_family" { Autoencoder => "autoencoder", Gan => "gan", Diffusion => "diffusion" }
);
named_enum!(LabelingParadigm, "labeling_paradigm" { Unlabeled => "unlabeled", Labeled => "labeled" });
named_enum!(OptimizerName, "optimizer.kind" { Adam => "adam", Sgd => "sgd" });
named_enum!(SchedulerName, "scheduler.kind" { Constant => "constant", Step => "step", Cosine => "cosine" });

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerName,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub momentum: f64,
    /// 0 disables clipping.
    pub grad_clip_norm: f64,
}

impl OptimizerConfig {
    pub fn kind(&self) -> OptimizerKind {
        match self.kind {
            OptimizerName::Adam => OptimizerKind::Adam { beta1: self.beta1, beta2: self.beta2, eps: self.eps },
            OptimizerName::Sgd => OptimizerKind::Sgd { momentum: self.momentum },
        }
    }

    pub fn clip_norm(&self) -> Option<f64> {
        (self.grad_clip_norm > 0.0).then_some(self.grad_clip_norm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    pub kind: SchedulerName,
    pub gamma: f64,
    pub period: usize,
    pub lr_min: f64,
    pub t_max: usize,
}

impl SchedulerConfig {
    pub fn schedule(&self) -> LrSchedule {
        match self.kind {
            SchedulerName::Constant => LrSchedule::Constant,
            SchedulerName::Step => LrSchedule::Step { gamma: self.gamma, period: self.period },
            SchedulerName::Cosine => LrSchedule::Cosine { lr_min: self.lr_min, t_max: self.t_max },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderConfig {
    pub variational: bool,
    pub beta_kl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanConfig {
    pub label_smoothing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionConfig {
    pub timesteps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub sampling_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationConfig {
    pub hflip: bool,
    pub vflip: bool,
    pub rot90: bool,
    pub noise_std: f64,
}

impl AugmentationConfig {
    pub fn is_identity(&self) -> bool {
        !self.hflip && !self.vflip && !self.rot90 && self.noise_std == 0.0
    }
}

/// Every knob of a training or inference run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model_family: ModelFamily,
    pub labeling_paradigm: LabelingParadigm,
    pub image_size: usize,
    pub channels: usize,
    pub num_classes: usize,
    pub latent_dim: usize,
    pub base_channels: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub checkpoint_every: usize,
    pub workers: usize,
    pub optimizer: OptimizerConfig,
    pub scheduler: SchedulerConfig,
    pub autoencoder: AutoencoderConfig,
    pub gan: GanConfig,
    pub diffusion: DiffusionConfig,
    pub augmentation: AugmentationConfig,
    pub normalization_range: (f64, f64),
}

impl ExperimentConfig {
    /// Defaults for everything except the three required keys.
    pub fn with_defaults(model_family: ModelFamily, image_size: usize, epochs: usize) -> Self {
        ExperimentConfig {
            model_family,
            labeling_paradigm: LabelingParadigm::Unlabeled,
            image_size,
            channels: 1,
            num_classes: 0,
            latent_dim: 16,
            base_channels: 16,
            batch_size: 16,
            epochs,
            seed: 0,
            checkpoint_every: 10,
            workers: 1,
            optimizer: OptimizerConfig {
                kind: OptimizerName::Adam,
                lr: 1e-3,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                momentum: 0.0,
                grad_clip_norm: 0.0,
            },
            scheduler: SchedulerConfig { kind: SchedulerName::Constant, gamma: 0.5, period: 10, lr_min: 0.0, t_max: 100 },
            autoencoder: AutoencoderConfig { variational: true, beta_kl: 0.01 },
            gan: GanConfig { label_smoothing: false },
            diffusion: DiffusionConfig { timesteps: 1000, beta_start: 1e-4, beta_end: 0.02, sampling_steps: 1000 },
            augmentation: AugmentationConfig { hflip: false, vflip: false, rot90: false, noise_std: 0.0 },
            normalization_range: (-1.0, 1.0),
        }
    }

    pub fn is_conditional(&self) -> bool {
        self.labeling_paradigm == LabelingParadigm::Labeled
    }

    /// [C, H, W] of one sample.
    pub fn image_shape(&self) -> [usize; 3] {
        [self.channels, self.image_size, self.image_size]
    }

    /// Cross-field invariants, for records built in code rather than parsed.
    pub fn check(&self) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError::new(1, 1, m));
        if ![8, 16, 32, 64].contains(&self.image_size) {
            return err(format!("image_size {} must be one of 8, 16, 32, 64", self.image_size));
        }
        if self.is_conditional() && self.num_classes < 2 {
            return err("labeled paradigm requires num_classes ≥ 2".into());
        }
        if self.model_family == ModelFamily::Diffusion {
            let d = &self.diffusion;
            if d.timesteps < 2 || !(d.beta_start > 0.0 && d.beta_start <= d.beta_end && d.beta_end < 1.0) {
                return err("diffusion schedule needs T ≥ 2 and 0 < β_start ≤ β_end < 1".into());
            }
        }
        if self.batch_size == 0 || self.workers == 0 || self.workers > self.batch_size {
            return err("batch_size ≥ 1 and 1 ≤ workers ≤ batch_size required".into());
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- validation

struct Located<T> {
    value: T,
    line: usize,
    column: usize,
}

/// Typed access to one map level; unknown keys are rejected on construction.
struct Section<'a> {
    path: &'static str,
    entries: &'a [Entry],
    line: usize,
    column: usize,
}

fn full_key(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

impl<'a> Section<'a> {
    fn new(path: &'static str, node: &'a Node, allowed: &[&str]) -> Result<Self, ConfigError> {
        let entries = node.as_map().ok_or_else(|| {
            let what = if path.is_empty() { "document" } else { path };
            ConfigError::new(node.line, node.column, format!("'{what}' must be a map, found {}", node.kind_name()))
        })?;
        for e in entries {
            if !allowed.contains(&e.key.as_str()) {
                let nearest = allowed
                    .iter()
                    .min_by_key(|k| strsim::levenshtein(k, &e.key))
                    .map(|k| format!("; did you mean '{}'?", full_key(path, k)))
                    .unwrap_or_default();
                return Err(ConfigError::new(e.line, e.column, format!("unknown key '{}'{nearest}", full_key(path, &e.key))));
            }
        }
        Ok(Section { path, entries, line: node.line, column: node.column })
    }

    fn node(&self, key: &str) -> Option<&'a Node> {
        self.entries.iter().find(|e| e.key == key).map(|e| &e.value)
    }

    fn missing(&self, key: &str) -> ConfigError {
        ConfigError::new(self.line, self.column, format!("missing required key '{}'", full_key(self.path, key)))
    }

    fn type_error(&self, key: &str, node: &Node, expected: &str) -> ConfigError {
        ConfigError::new(
            node.line,
            node.column,
            format!("'{}' must be {expected}, found {}", full_key(self.path, key), node.kind_name()),
        )
    }

    /// Location to blame when `key` violates a constraint: the key itself, or
    /// the enclosing section when it was defaulted.
    fn at(&self, key: &str) -> (usize, usize) {
        self.node(key).map_or((self.line, self.column), |n| (n.line, n.column))
    }

    fn violation(&self, key: &str, message: impl fmt::Display) -> ConfigError {
        let (line, column) = self.at(key);
        ConfigError::new(line, column, format!("'{}': {message}", full_key(self.path, key)))
    }

    fn scalar(&self, key: &str) -> Result<Option<(&'a Scalar, &'a Node)>, ConfigError> {
        match self.node(key) {
            None => Ok(None),
            Some(n) => match &n.kind {
                NodeKind::Scalar(s) => Ok(Some((s, n))),
                _ => Err(self.type_error(key, n, "a scalar")),
            },
        }
    }

    fn located<T>(value: T, node: &Node) -> Located<T> {
        Located { value, line: node.line, column: node.column }
    }

    fn int(&self, key: &str) -> Result<Option<Located<i128>>, ConfigError> {
        match self.scalar(key)? {
            None => Ok(None),
            Some((Scalar::Int(v), n)) => Ok(Some(Self::located(*v, n))),
            Some((_, n)) => Err(self.type_error(key, n, "an integer")),
        }
    }

    fn count(&self, key: &str, default: usize, min: usize) -> Result<usize, ConfigError> {
        match self.int(key)? {
            None => Ok(default),
            Some(l) if l.value >= min as i128 && l.value <= u32::MAX as i128 => Ok(l.value as usize),
            Some(l) => Err(ConfigError::new(
                l.line,
                l.column,
                format!("'{}' must be an integer ≥ {min}, got {}", full_key(self.path, key), l.value),
            )),
        }
    }

    fn required_count(&self, key: &str, min: usize) -> Result<usize, ConfigError> {
        if self.node(key).is_none() {
            return Err(self.missing(key));
        }
        self.count(key, 0, min)
    }

    fn float(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.scalar(key)? {
            None => Ok(default),
            Some((Scalar::Float(v), _)) => Ok(*v),
            Some((Scalar::Int(v), _)) => Ok(*v as f64),
            Some((_, n)) => Err(self.type_error(key, n, "a number")),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.scalar(key)? {
            None => Ok(default),
            Some((Scalar::Bool(v), _)) => Ok(*v),
            Some((_, n)) => Err(self.type_error(key, n, "true or false")),
        }
    }

    fn name<T: FromStr<Err = String>>(&self, key: &str, default: Option<T>) -> Result<T, ConfigError> {
        match self.scalar(key)? {
            None => default.ok_or_else(|| self.missing(key)),
            Some((Scalar::Str(s), n)) => s.parse().map_err(|m| ConfigError::new(n.line, n.column, m)),
            Some((_, n)) => Err(self.type_error(key, n, "a name")),
        }
    }

    fn section(&self, key: &str, path: &'static str, allowed: &[&str]) -> Result<Option<Section<'a>>, ConfigError> {
        self.node(key).map(|n| Section::new(path, n, allowed)).transpose()
    }
}

const TOP_KEYS: &[&str] = &[
    "model_family",
    "labeling_paradigm",
    "image_size",
    "channels",
    "num_classes",
    "latent_dim",
    "base_channels",
    "batch_size",
    "epochs",
    "seed",
    "checkpoint_every",
    "workers",
    "optimizer",
    "scheduler",
    "autoencoder",
    "gan",
    "diffusion",
    "augmentation",
    "normalization_range",
];
const OPTIMIZER_KEYS: &[&str] = &["kind", "lr", "beta1", "beta2", "eps", "momentum", "grad_clip_norm"];
const SCHEDULER_KEYS: &[&str] = &["kind", "gamma", "period", "lr_min", "t_max"];
const AE_KEYS: &[&str] = &["variational", "beta_kl"];
const GAN_KEYS: &[&str] = &["label_smoothing"];
const DIFFUSION_KEYS: &[&str] = &["timesteps", "beta_start", "beta_end", "sampling_steps"];
const AUGMENT_KEYS: &[&str] = &["hflip", "vflip", "rot90", "noise_std"];

fn ensure(ok: bool, err: impl FnOnce() -> ConfigError) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(err())
    }
}

/// Checks a parsed document against the schema and fills defaults.
pub fn validate_config(doc: &ConfigDocument) -> Result<ExperimentConfig, ConfigError> {
    let top = Section::new("", &doc.root, TOP_KEYS)?;
    let family: ModelFamily = top.name("model_family", None)?;
    let image_size = top.required_count("image_size", 1)?;
    let epochs = top.required_count("epochs", 1)?;
    let d = ExperimentConfig::with_defaults(family, image_size, epochs);

    ensure([8, 16, 32, 64].contains(&image_size), || {
        top.violation("image_size", format_args!("{image_size} must be a power of two in {{8, 16, 32, 64}}"))
    })?;

    let labeling_paradigm = top.name("labeling_paradigm", Some(d.labeling_paradigm))?;
    let channels = top.count("channels", d.channels, 1)?;
    let num_classes = top.count("num_classes", d.num_classes, 0)?;
    match labeling_paradigm {
        LabelingParadigm::Labeled => ensure(num_classes >= 2, || {
            top.violation("num_classes", "labeled paradigm requires num_classes ≥ 2")
        })?,
        LabelingParadigm::Unlabeled => ensure(num_classes == 0, || {
            top.violation("num_classes", "must be 0 under the unlabeled paradigm")
        })?,
    }
    let latent_dim = top.count("latent_dim", d.latent_dim, 1)?;
    let base_channels = top.count("base_channels", d.base_channels, 1)?;
    let batch_size = top.count("batch_size", d.batch_size, 1)?;
    let seed = match top.int("seed")? {
        None => d.seed,
        Some(l) => u64::try_from(l.value).map_err(|_| {
            ConfigError::new(l.line, l.column, format!("'seed' must be in 0..=2^64-1, got {}", l.value))
        })?,
    };
    let checkpoint_every = top.count("checkpoint_every", d.checkpoint_every, 0)?;
    let workers = top.count("workers", d.workers, 1)?;
    ensure(workers <= batch_size, || top.violation("workers", format_args!("{workers} exceeds batch_size {batch_size}")))?;

    let optimizer = match top.section("optimizer", "optimizer", OPTIMIZER_KEYS)? {
        None => d.optimizer.clone(),
        Some(s) => {
            let o = OptimizerConfig {
                kind: s.name("kind", Some(d.optimizer.kind))?,
                lr: s.float("lr", d.optimizer.lr)?,
                beta1: s.float("beta1", d.optimizer.beta1)?,
                beta2: s.float("beta2", d.optimizer.beta2)?,
                eps: s.float("eps", d.optimizer.eps)?,
                momentum: s.float("momentum", d.optimizer.momentum)?,
                grad_clip_norm: s.float("grad_clip_norm", d.optimizer.grad_clip_norm)?,
            };
            ensure(o.lr > 0.0, || s.violation("lr", "must be > 0"))?;
            ensure((0.0..1.0).contains(&o.beta1), || s.violation("beta1", "must lie in [0, 1)"))?;
            ensure((0.0..1.0).contains(&o.beta2), || s.violation("beta2", "must lie in [0, 1)"))?;
            ensure(o.eps > 0.0, || s.violation("eps", "must be > 0"))?;
            ensure((0.0..1.0).contains(&o.momentum), || s.violation("momentum", "must lie in [0, 1)"))?;
            ensure(o.grad_clip_norm >= 0.0, || s.violation("grad_clip_norm", "must be ≥ 0"))?;
            o
        }
    };

    let scheduler = match top.section("scheduler", "scheduler", SCHEDULER_KEYS)? {
        None => d.scheduler.clone(),
        Some(s) => {
            let c = SchedulerConfig {
                kind: s.name("kind", Some(d.scheduler.kind))?,
                gamma: s.float("gamma", d.scheduler.gamma)?,
                period: s.count("period", d.scheduler.period, 1)?,
                lr_min: s.float("lr_min", d.scheduler.lr_min)?,
                t_max: s.count("t_max", d.scheduler.t_max, 1)?,
            };
            ensure(c.gamma > 0.0, || s.violation("gamma", "must be > 0"))?;
            ensure(c.lr_min >= 0.0 && c.lr_min <= optimizer.lr, || {
                s.violation("lr_min", "must lie in [0, optimizer.lr]")
            })?;
            c
        }
    };

    let autoencoder = match top.section("autoencoder", "autoencoder", AE_KEYS)? {
        None => d.autoencoder.clone(),
        Some(s) => {
            let a = AutoencoderConfig {
                variational: s.bool("variational", d.autoencoder.variational)?,
                beta_kl: s.float("beta_kl", d.autoencoder.beta_kl)?,
            };
            ensure(a.beta_kl >= 0.0, || s.violation("beta_kl", "must be ≥ 0"))?;
            a
        }
    };

    let gan = match top.section("gan", "gan", GAN_KEYS)? {
        None => d.gan.clone(),
        Some(s) => GanConfig { label_smoothing: s.bool("label_smoothing", d.gan.label_smoothing)? },
    };

    let diffusion = match top.section("diffusion", "diffusion", DIFFUSION_KEYS)? {
        None => d.diffusion.clone(),
        Some(s) => {
            let timesteps = s.count("timesteps", d.diffusion.timesteps, 2)?;
            let dc = DiffusionConfig {
                timesteps,
                beta_start: s.float("beta_start", d.diffusion.beta_start)?,
                beta_end: s.float("beta_end", d.diffusion.beta_end)?,
                sampling_steps: s.count("sampling_steps", timesteps, 1)?,
            };
            ensure(dc.beta_start > 0.0, || s.violation("beta_start", "0 < β_start required"))?;
            ensure(dc.beta_start <= dc.beta_end, || {
                s.violation("beta_start", format_args!("{} > beta_end {}: β_start ≤ β_end required", dc.beta_start, dc.beta_end))
            })?;
            ensure(dc.beta_end < 1.0, || s.violation("beta_end", "β_end < 1 required"))?;
            ensure(dc.sampling_steps == dc.timesteps, || {
                s.violation("sampling_steps", "must equal timesteps (only full ancestral sampling is supported)")
            })?;
            dc
        }
    };

    let augmentation = match top.section("augmentation", "augmentation", AUGMENT_KEYS)? {
        None => d.augmentation.clone(),
        Some(s) => {
            let a = AugmentationConfig {
                hflip: s.bool("hflip", false)?,
                vflip: s.bool("vflip", false)?,
                rot90: s.bool("rot90", false)?,
                noise_std: s.float("noise_std", 0.0)?,
            };
            ensure(a.noise_std >= 0.0, || s.violation("noise_std", "must be ≥ 0"))?;
            a
        }
    };

    let normalization_range = match top.entries.iter().find(|e| e.key == "normalization_range") {
        None => d.normalization_range,
        Some(entry) => {
            let n = &entry.value;
            let bad = || ConfigError::new(entry.line, entry.column, "'normalization_range' must be a list of two numbers [lo, hi]");
            let NodeKind::List(items) = &n.kind else { return Err(bad()) };
            let nums: Vec<f64> = items
                .iter()
                .map(|i| match &i.kind {
                    NodeKind::Scalar(Scalar::Float(v)) => Some(*v),
                    NodeKind::Scalar(Scalar::Int(v)) => Some(*v as f64),
                    _ => None,
                })
                .collect::<Option<_>>()
                .ok_or_else(bad)?;
            match nums[..] {
                [lo, hi] if lo < hi => (lo, hi),
                [_, _] => return Err(ConfigError::new(entry.line, entry.column, "'normalization_range': lo < hi required")),
                _ => return Err(bad()),
            }
        }
    };

    Ok(ExperimentConfig {
        model_family: family,
        labeling_paradigm,
        image_size,
        channels,
        num_classes,
        latent_dim,
        base_channels,
        batch_size,
        epochs,
        seed,
        checkpoint_every,
        workers,
        optimizer,
        scheduler,
        autoencoder,
        gan,
        diffusion,
        augmentation,
        normalization_range,
    })
}

// ---------------------------------------------------------------- rendering

enum Out {
    Scalar(String),
    List(Vec<String>),
    Map(BTreeMap<&'static str, Out>),
}

fn float(v: f64) -> Out {
    // Debug formatting is the shortest round-trip form and always carries '.' or 'e'.
    Out::Scalar(format!("{v:?}"))
}

fn int(v: impl fmt::Display) -> Out {
    Out::Scalar(v.to_string())
}

fn text(v: impl fmt::Display) -> Out {
    Out::Scalar(v.to_string())
}

fn map<const N: usize>(entries: [(&'static str, Out); N]) -> Out {
    Out::Map(entries.into_iter().collect())
}

fn render(out: &Out, indent: usize, buf: &mut String) {
    let Out::Map(entries) = out else { unreachable!("render starts from a map") };
    let pad = " ".repeat(indent);
    for (key, value) in entries {
        match value {
            Out::Scalar(s) => buf.push_str(&format!("{pad}{key}: {s}\n")),
            Out::List(items) => {
                buf.push_str(&format!("{pad}{key}:\n"));
                for item in items {
                    buf.push_str(&format!("{pad}  - {item}\n"));
                }
            }
            Out::Map(_) => {
                buf.push_str(&format!("{pad}{key}:\n"));
                render(value, indent + 2, buf);
            }
        }
    }
}

/// Canonical rendering: every key present, keys sorted at every level.
pub fn dump_effective_config(cfg: &ExperimentConfig) -> String {
    let o = &cfg.optimizer;
    let s = &cfg.scheduler;
    let d = &cfg.diffusion;
    let a = &cfg.augmentation;
    let tree = map([
        ("model_family", text(cfg.model_family)),
        ("labeling_paradigm", text(cfg.labeling_paradigm)),
        ("image_size", int(cfg.image_size)),
        ("channels", int(cfg.channels)),
        ("num_classes", int(cfg.num_classes)),
        ("latent_dim", int(cfg.latent_dim)),
        ("base_channels", int(cfg.base_channels)),
        ("batch_size", int(cfg.batch_size)),
        ("epochs", int(cfg.epochs)),
        ("seed", int(cfg.seed)),
        ("checkpoint_every", int(cfg.checkpoint_every)),
        ("workers", int(cfg.workers)),
        (
            "optimizer",
            map([
                ("kind", text(o.kind)),
                ("lr", float(o.lr)),
                ("beta1", float(o.beta1)),
                ("beta2", float(o.beta2)),
                ("eps", float(o.eps)),
                ("momentum", float(o.momentum)),
                ("grad_clip_norm", float(o.grad_clip_norm)),
            ]),
        ),
        (
            "scheduler",
            map([
                ("kind", text(s.kind)),
                ("gamma", float(s.gamma)),
                ("period", int(s.period)),
                ("lr_min", float(s.lr_min)),
                ("t_max", int(s.t_max)),
            ]),
        ),
        (
            "autoencoder",
            map([("variational", text(cfg.autoencoder.variational)), ("beta_kl", float(cfg.autoencoder.beta_kl))]),
        ),
        ("gan", map([("label_smoothing", text(cfg.gan.label_smoothing))])),
        (
            "diffusion",
            map([
                ("timesteps", int(d.timesteps)),
                ("beta_start", float(d.beta_start)),
                ("beta_end", float(d.beta_end)),
                ("sampling_steps", int(d.sampling_steps)),
            ]),
        ),
        (
            "augmentation",
            map([
                ("hflip", text(a.hflip)),
                ("vflip", text(a.vflip)),
                ("rot90", text(a.rot90)),
                ("noise_std", float(a.noise_std)),
            ]),
        ),
        (
            "normalization_range",
            Out::List(vec![format!("{:?}", cfg.normalization_range.0), format!("{:?}", cfg.normalization_range.1)]),
        ),
    ]);
    let mut buf = String::new();
    render(&tree, 0, &mut buf);
    buf
}
