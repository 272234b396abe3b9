use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use fallwatch::dataset::{encode_ppm, load_image, resize_bilinear};

use super::{opt_path, path_or_none, require};
use crate::config::{self, parse_value, Settings};
use crate::{CliError, ConfigArg};

const EXTENSIONS: [&str; 3] = ["ppm", "pgm", "pnm"];

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// Folder searched recursively for NetPBM files.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output root; the relative layout is kept.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Square output side in pixels.
    #[arg(long)]
    pub size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvertSettings {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub size: usize,
}

impl Default for ConvertSettings {
    fn default() -> Self {
        ConvertSettings {
            input: None,
            output: None,
            size: 64,
        }
    }
}

impl Settings for ConvertSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "input" => self.input = path_or_none(value),
            "output" => self.output = path_or_none(value),
            "size" => self.size = parse_value(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("input", opt_path(&self.input)),
            ("output", opt_path(&self.output)),
            ("size", self.size.to_string()),
        ]
    }
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect(&path, out)?;
        } else if path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        {
            out.push(path);
        }
    }
    Ok(())
}

pub fn run(args: &ConvertArgs) -> Result<(), CliError> {
    let mut s: ConvertSettings = config::load(args.config.config.as_deref())?;
    if let Some(v) = &args.input {
        s.input = Some(v.clone());
    }
    if let Some(v) = &args.output {
        s.output = Some(v.clone());
    }
    if let Some(v) = args.size {
        s.size = v;
    }
    if s.size < 1 {
        return Err(CliError::usage("--size must be at least 1"));
    }
    print!("{}", config::render("convert", &s));
    let input = require(&s.input, "input")?;
    let output = require(&s.output, "output")?;
    let mut files = Vec::new();
    collect(input, &mut files).map_err(|e| CliError::io(format!("{}: {e}", input.display())))?;
    files.sort();
    if files.is_empty() {
        return Err(CliError::io(format!("no NetPBM files under {}", input.display())));
    }
    for path in &files {
        let rel = path.strip_prefix(input).expect("collected under input");
        let dest = output.join(rel).with_extension("ppm");
        let image = load_image(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let resized = resize_bilinear(&image, s.size, s.size).map_err(|e| CliError::io(e.to_string()))?;
        let bytes = encode_ppm(&resized).map_err(|e| CliError::io(e.to_string()))?;
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&dest, bytes).map_err(|e| CliError::io(format!("{}: {e}", dest.display())))?;
    }
    println!("# converted {} images into {}", files.len(), output.display());
    Ok(())
}
