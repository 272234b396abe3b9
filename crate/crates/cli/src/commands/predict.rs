use std::path::PathBuf;

use clap::Args;
use fallwatch::dataset::{load_image, resize_bilinear};
use fallwatch::fallnet::predict_label;

use super::{load_model, opt_path, path_or_none, require};
use crate::config::{self, parse_value, Settings};
use crate::{CliError, ConfigArg};

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// NetPBM images to score.
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictSettings {
    pub model: Option<PathBuf>,
    pub threshold: f64,
}

impl Default for PredictSettings {
    fn default() -> Self {
        PredictSettings {
            model: None,
            threshold: 0.5,
        }
    }
}

impl Settings for PredictSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "model" => self.model = path_or_none(value),
            "threshold" => self.threshold = parse_value(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("model", opt_path(&self.model)),
            ("threshold", self.threshold.to_string()),
        ]
    }
}

pub fn run(args: &PredictArgs) -> Result<(), CliError> {
    let mut s: PredictSettings = config::load(args.config.config.as_deref())?;
    if let Some(v) = &args.model {
        s.model = Some(v.clone());
    }
    if let Some(v) = args.threshold {
        s.threshold = v;
    }
    if !(0.0..=1.0).contains(&s.threshold) {
        return Err(CliError::usage("--threshold must be in [0, 1]"));
    }
    print!("{}", config::render("predict", &s));
    let model = load_model(require(&s.model, "model")?)?;
    let input = model.input_size();
    for path in &args.images {
        let image = load_image(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        let image = if image.shape() == input.shape() {
            image
        } else {
            resize_bilinear(&image, input.height, input.width).map_err(|e| CliError::io(e.to_string()))?
        };
        let p = model.forward(&image).map_err(|e| CliError::io(e.to_string()))?;
        let label = predict_label(f64::from(p), s.threshold).map_err(|e| CliError::usage(e.to_string()))?;
        println!("{}\t{:.6}\t{label}", path.display(), p);
    }
    Ok(())
}
