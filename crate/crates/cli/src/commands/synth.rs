use std::path::PathBuf;

use clap::{Args, ValueEnum};
use fallwatch::dataset::synth::{write_dataset, SceneKind};
use fallwatch_sentinel::scenario::{script_by_name, write_script};

use super::{opt_path, path_or_none, require};
use crate::config::{self, parse_value, Settings};
use crate::{CliError, ConfigArg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    /// Room scenes with an upright or lying figure.
    Silhouette,
    /// Uniform bright (fall) and dark (not fall) frames.
    BrightDark,
    /// A flat replay folder from a named monitor script.
    Scenario,
}

impl Kind {
    fn as_str(self) -> &'static str {
        match self {
            Kind::Silhouette => "silhouette",
            Kind::BrightDark => "bright-dark",
            Kind::Scenario => "scenario",
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long, value_enum)]
    pub kind: Option<Kind>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Script for `--kind scenario`: fall, quiet or uncertain.
    #[arg(long)]
    pub scenario: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub kind: Kind,
    pub out: Option<PathBuf>,
    pub per_class: usize,
    pub size: usize,
    pub seed: u64,
    pub scenario: String,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            kind: Kind::Silhouette,
            out: None,
            per_class: 100,
            size: 64,
            seed: 1,
            scenario: "fall".into(),
        }
    }
}

impl Settings for SynthSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "kind" => self.kind = Kind::from_str(value, true).map_err(|e| format!("kind: {e}"))?,
            "out" => self.out = path_or_none(value),
            "per_class" => self.per_class = parse_value(key, value)?,
            "size" => self.size = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "scenario" => self.scenario = value.to_string(),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("kind", self.kind.as_str().into()),
            ("out", opt_path(&self.out)),
            ("per_class", self.per_class.to_string()),
            ("size", self.size.to_string()),
            ("seed", self.seed.to_string()),
            ("scenario", self.scenario.clone()),
        ]
    }
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    let mut s: SynthSettings = config::load(args.config.config.as_deref())?;
    if let Some(v) = args.kind {
        s.kind = v;
    }
    if let Some(v) = &args.out {
        s.out = Some(v.clone());
    }
    if let Some(v) = args.per_class {
        s.per_class = v;
    }
    if let Some(v) = args.size {
        s.size = v;
    }
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if let Some(v) = &args.scenario {
        s.scenario = v.clone();
    }
    if s.size < 1 || s.per_class < 1 {
        return Err(CliError::usage("--size and --per-class must be at least 1"));
    }
    print!("{}", config::render("synth", &s));
    let out = require(&s.out, "out")?;
    let written = match s.kind {
        Kind::Scenario => {
            let script = script_by_name(&s.scenario).ok_or_else(|| {
                CliError::usage(format!("unknown scenario {:?} (fall, quiet, uncertain)", s.scenario))
            })?;
            write_script(out, &script, s.size).map_err(|e| CliError::io(format!("{}: {e}", out.display())))?
        }
        kind => {
            let scene = if kind == Kind::Silhouette {
                SceneKind::Silhouette
            } else {
                SceneKind::BrightDark
            };
            write_dataset(out, scene, s.per_class, s.size, s.seed)
                .map_err(|e| CliError::io(format!("{}: {e}", out.display())))?;
            s.per_class * 2
        }
    };
    println!("# wrote {written} images to {}", out.display());
    Ok(())
}
