use std::time::Instant;

use clap::Args;
use fallwatch::gradcheck::{run_gradcheck, GradcheckConfig, DEFAULT_FALLNET_COORDS, DEFAULT_SEEDS};
use fallwatch::nn::{dense_backward, DenseGrads};
use fallwatch::{ShapeError, Tensor};

use crate::config::{self, parse_value, Settings};
use crate::{CliError, ConfigArg};

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub config: ConfigArg,
    /// First seed; the run covers `seed..seed + seeds`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Coordinates sampled per parameter tensor of the small network.
    #[arg(long)]
    pub coords: Option<usize>,
    /// Scale dense weight gradients by 1.01 to prove the check bites.
    #[arg(long, hide = true)]
    pub corrupt_dense: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckSettings {
    pub seed: u64,
    pub seeds: usize,
    pub coords: usize,
}

impl Default for GradcheckSettings {
    fn default() -> Self {
        GradcheckSettings {
            seed: 0,
            seeds: DEFAULT_SEEDS,
            coords: DEFAULT_FALLNET_COORDS,
        }
    }
}

impl Settings for GradcheckSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "seeds" => self.seeds = parse_value(key, value)?,
            "coords" => self.coords = parse_value(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed", self.seed.to_string()),
            ("seeds", self.seeds.to_string()),
            ("coords", self.coords.to_string()),
        ]
    }
}

fn corrupted_dense_backward(x: &Tensor<f64>, w: &Tensor<f64>, dy: &Tensor<f64>) -> Result<DenseGrads<f64>, ShapeError> {
    let mut g = dense_backward(x, w, dy)?;
    g.weights.scale(1.01);
    Ok(g)
}

pub fn run(args: &GradcheckArgs) -> Result<(), CliError> {
    let mut s: GradcheckSettings = config::load(args.config.config.as_deref())?;
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if let Some(v) = args.seeds {
        s.seeds = v;
    }
    if let Some(v) = args.coords {
        s.coords = v;
    }
    if s.seeds < 1 || s.coords < 1 {
        return Err(CliError::usage("--seeds and --coords must be at least 1"));
    }
    print!("{}", config::render("gradcheck", &s));
    let mut cfg = GradcheckConfig {
        seed: s.seed,
        seeds: s.seeds,
        fallnet_coords: s.coords,
        ..Default::default()
    };
    if args.corrupt_dense {
        cfg.dense_backward = corrupted_dense_backward;
    }
    let started = Instant::now();
    let report = run_gradcheck(&cfg);
    println!("{report}");
    log::info!("gradcheck took {:.2?}", started.elapsed());
    if report.passed() {
        Ok(())
    } else {
        let worst: Vec<String> = report
            .violations()
            .filter_map(|l| {
                l.worst
                    .as_ref()
                    .map(|c| format!("{} seed {} {}[{}]", l.layer, c.seed, c.tensor, c.index))
            })
            .collect();
        Err(CliError::check(format!(
            "gradient check failed at {}",
            worst.join(", ")
        )))
    }
}
