use std::path::PathBuf;

use clap::{Args, ValueEnum};
use fallwatch::dataset::{export_curves, load_manifest, load_samples};
use fallwatch::fallnet::{
    save_checkpoint, train_with_progress, FallNetModel, InitScheme, InputSize, TrainConfig, TrainError,
};

use super::{opt_path, path_or_none, require};
use crate::config::{self, parse_value, Settings};
use crate::{CliError, ConfigArg, ExitCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Init {
    /// Gaussian scaled by fan-in.
    He,
    /// Gaussian with SD 0.01.
    Fixed,
}

impl Init {
    fn as_str(self) -> &'static str {
        match self {
            Init::He => "he",
            Init::Fixed => "fixed",
        }
    }

    fn scheme(self) -> InitScheme {
        match self {
            Init::He => InitScheme::HeNormal,
            Init::Fixed => InitScheme::FIXED_0_01,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Dataset root with fall/ and not_fall/ (or manifest.csv).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Fraction of each class held out for validation.
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Square input side in pixels.
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long, value_enum)]
    pub init: Option<Init>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Training-curve CSV to write.
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    pub data: Option<PathBuf>,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub val_fraction: f64,
    pub split_seed: u64,
    pub size: usize,
    pub init: Init,
    pub out: PathBuf,
    pub curves: PathBuf,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSettings {
            data: None,
            epochs: t.epochs,
            lr: t.learning_rate,
            seed: t.seed,
            batch_size: t.batch_size,
            val_fraction: fallwatch::dataset::DEFAULT_VAL_FRACTION,
            split_seed: fallwatch::dataset::DEFAULT_SPLIT_SEED,
            size: 64,
            init: Init::He,
            out: PathBuf::from("fallnet.ckpt"),
            curves: PathBuf::from("curves.csv"),
        }
    }
}

impl Settings for TrainSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "data" => self.data = path_or_none(value),
            "epochs" => self.epochs = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "val_fraction" => self.val_fraction = parse_value(key, value)?,
            "split_seed" => self.split_seed = parse_value(key, value)?,
            "size" => self.size = parse_value(key, value)?,
            "init" => self.init = Init::from_str(value, true).map_err(|e| format!("init: {e}"))?,
            "out" => self.out = PathBuf::from(value),
            "curves" => self.curves = PathBuf::from(value),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("data", opt_path(&self.data)),
            ("epochs", self.epochs.to_string()),
            ("lr", self.lr.to_string()),
            ("seed", self.seed.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("val_fraction", self.val_fraction.to_string()),
            ("split_seed", self.split_seed.to_string()),
            ("size", self.size.to_string()),
            ("init", self.init.as_str().to_string()),
            ("out", self.out.display().to_string()),
            ("curves", self.curves.display().to_string()),
        ]
    }
}

pub fn resolve(args: &TrainArgs) -> Result<TrainSettings, CliError> {
    let mut s: TrainSettings = config::load(args.config.config.as_deref())?;
    if let Some(v) = &args.data {
        s.data = Some(v.clone());
    }
    macro_rules! take {
        ($($f:ident),*) => { $(if let Some(v) = args.$f { s.$f = v; })* };
    }
    take!(epochs, lr, seed, batch_size, val_fraction, split_seed, size, init);
    if let Some(v) = &args.out {
        s.out = v.clone();
    }
    if let Some(v) = &args.curves {
        s.curves = v.clone();
    }
    if s.epochs < 1 {
        return Err(CliError::usage("--epochs must be at least 1"));
    }
    if !(s.lr > 0.0 && s.lr.is_finite()) {
        return Err(CliError::usage("--lr must be positive"));
    }
    if s.batch_size < 1 {
        return Err(CliError::usage("--batch-size must be at least 1"));
    }
    if !(s.val_fraction > 0.0 && s.val_fraction < 1.0) {
        return Err(CliError::usage("--val-fraction must be in (0, 1)"));
    }
    if s.size < 1 {
        return Err(CliError::usage("--size must be at least 1"));
    }
    require(&s.data, "data")?;
    Ok(s)
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let s = resolve(args)?;
    print!("{}", config::render("train", &s));
    let data = require(&s.data, "data")?;

    let manifest = load_manifest(data).map_err(|e| CliError::io(format!("{}: {e}", data.display())))?;
    let (train_m, val_m) = manifest
        .split(s.val_fraction, s.split_seed)
        .map_err(|e| CliError::io(e.to_string()))?;
    let input = InputSize::new(s.size, s.size, 3);
    let train_set = load_samples(&train_m, input).map_err(|e| CliError::io(e.to_string()))?;
    let val_set = load_samples(&val_m, input).map_err(|e| CliError::io(e.to_string()))?;
    println!(
        "# {} training / {} validation images at {input}",
        train_set.len(),
        val_set.len()
    );

    let mut model =
        FallNetModel::build_with(input, s.seed, s.init.scheme()).map_err(|e| CliError::usage(e.to_string()))?;
    let cfg = TrainConfig {
        epochs: s.epochs,
        learning_rate: s.lr,
        batch_size: s.batch_size,
        seed: s.seed,
        shuffle: true,
    };
    println!(
        "{:>5}  {:>9}  {:>9}  {:>9}  {:>12}",
        "epoch", "loss", "accuracy", "val_loss", "val_accuracy"
    );
    let stats = train_with_progress(&mut model, &train_set, &val_set, &cfg, |r| {
        println!(
            "{:>5}  {:>9.4}  {:>9.4}  {:>9.4}  {:>12.4}",
            r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
        );
    })
    .map_err(|e| match e {
        TrainError::Diverged { .. } => CliError::new(ExitCode::Diverged, e.to_string()),
        TrainError::Config(_) => CliError::usage(e.to_string()),
        other => CliError::io(other.to_string()),
    })?;

    save_checkpoint(&model, &s.out).map_err(|e| CliError::io(format!("{}: {e}", s.out.display())))?;
    export_curves(&stats, &s.curves).map_err(|e| CliError::io(format!("{}: {e}", s.curves.display())))?;
    println!("# wrote {} and {}", s.out.display(), s.curves.display());
    Ok(())
}
