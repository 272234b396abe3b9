use std::path::PathBuf;

use clap::Args;
use fallwatch::dataset::{evaluate, load_manifest, load_samples, metrics_from_counts, Metrics};

use super::{load_model, opt_path, path_or_none, require};
use crate::config::{self, parse_value, Settings};
use crate::{CliError, ConfigArg};

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Probabilities at or above this are falls.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Report metrics for a confusion matrix `tp,fp,fn,tn` instead.
    #[arg(long, value_name = "TP,FP,FN,TN")]
    pub counts: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub model: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub threshold: f64,
    pub counts: String,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            model: None,
            data: None,
            threshold: 0.5,
            counts: String::new(),
        }
    }
}

impl Settings for EvalSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "model" => self.model = path_or_none(value),
            "data" => self.data = path_or_none(value),
            "threshold" => self.threshold = parse_value(key, value)?,
            "counts" => self.counts = value.to_string(),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("model", opt_path(&self.model)),
            ("data", opt_path(&self.data)),
            ("threshold", self.threshold.to_string()),
            ("counts", self.counts.clone()),
        ]
    }
}

fn parse_counts(text: &str) -> Result<[u64; 4], CliError> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let bad = || CliError::usage(format!("--counts expects tp,fp,fn,tn, got {text:?}"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let mut out = [0u64; 4];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| bad())?;
    }
    Ok(out)
}

/// The metrics block printed by `eval`.
pub fn format_metrics(m: &Metrics) -> String {
    let undefined = |defined: bool, v: f64| if defined { format!("{v:.5}") } else { "undefined".into() };
    let mut out = format!("tp = {}\nfp = {}\nfn = {}\ntn = {}\n", m.tp, m.fp, m.fn_, m.tn);
    out.push_str(&format!(
        "precision = {}\n",
        undefined(m.precision_defined, m.precision)
    ));
    out.push_str(&format!("recall = {}\n", undefined(m.recall_defined, m.recall)));
    out.push_str(&format!("accuracy = {:.5}\n", m.accuracy));
    out.push_str(&format!("f1 = {:.5}\n", m.f1));
    match m.mean_loss {
        Some(l) => out.push_str(&format!("mean_loss = {l:.5}\n")),
        None => out.push_str("mean_loss = n/a\n"),
    }
    out
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let mut s: EvalSettings = config::load(args.config.config.as_deref())?;
    if let Some(v) = &args.model {
        s.model = Some(v.clone());
    }
    if let Some(v) = &args.data {
        s.data = Some(v.clone());
    }
    if let Some(v) = args.threshold {
        s.threshold = v;
    }
    if let Some(v) = &args.counts {
        s.counts = v.clone();
    }
    if !(0.0..=1.0).contains(&s.threshold) {
        return Err(CliError::usage("--threshold must be in [0, 1]"));
    }
    print!("{}", config::render("eval", &s));

    let metrics = if !s.counts.is_empty() {
        let [tp, fp, fn_, tn] = parse_counts(&s.counts)?;
        metrics_from_counts(tp, fp, fn_, tn).map_err(|e| CliError::usage(e.to_string()))?
    } else {
        let model_path = require(&s.model, "model")?;
        let data = require(&s.data, "data")?;
        let model = load_model(model_path)?;
        let manifest = load_manifest(data).map_err(|e| CliError::io(format!("{}: {e}", data.display())))?;
        let samples = load_samples(&manifest, model.input_size()).map_err(|e| CliError::io(e.to_string()))?;
        evaluate(&model, &samples, s.threshold).map_err(|e| CliError::io(e.to_string()))?
    };
    print!("{}", format_metrics(&metrics));
    Ok(())
}
