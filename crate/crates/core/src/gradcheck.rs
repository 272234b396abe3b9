//! Analytic-versus-numeric gradient comparison over every layer type and a
//! small end-to-end FallNet, all in 64-bit arithmetic.
//!
//! Layer fixtures are checked at every coordinate. The FallNet fixture
//! (8×8×3 input) checks a seeded sample of coordinates in each parameter
//! tensor, since a full sweep costs two forward passes per parameter.

use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fallnet::{FallNetModel, InputSize};
use crate::nn::{
    bce_loss, conv2d_backward, conv2d_forward, dense_backward, dense_forward, finite_diff_at, maxpool2d,
    maxpool2d_backward, relative_error, relu, relu_backward, sigmoid, sigmoid_backward, DenseGrads, DEFAULT_STEP,
};
use crate::tensor::{ShapeError, Tensor};

pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_SEEDS: usize = 20;
pub const DEFAULT_FALLNET_COORDS: usize = 32;

pub type DenseBackwardFn = fn(&Tensor<f64>, &Tensor<f64>, &Tensor<f64>) -> Result<DenseGrads<f64>, ShapeError>;

#[derive(Debug, Clone)]
pub struct GradcheckConfig {
    /// First seed; seeds `seed..seed + seeds` are run.
    pub seed: u64,
    pub seeds: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Coordinates sampled per FallNet parameter tensor.
    pub fallnet_coords: usize,
    /// Dense backward under test; replaceable for fault injection.
    pub dense_backward: DenseBackwardFn,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            seed: 0,
            seeds: DEFAULT_SEEDS,
            step: DEFAULT_STEP,
            tolerance: DEFAULT_TOLERANCE,
            fallnet_coords: DEFAULT_FALLNET_COORDS,
            dense_backward: dense_backward::<f64>,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coordinate {
    pub seed: u64,
    pub tensor: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerReport {
    pub layer: &'static str,
    pub coordinates: usize,
    pub max_error: f64,
    pub worst: Option<Coordinate>,
}

impl LayerReport {
    fn new(layer: &'static str) -> Self {
        LayerReport {
            layer,
            coordinates: 0,
            max_error: 0.0,
            worst: None,
        }
    }

    fn record(&mut self, seed: u64, tensor: &str, indices: &[usize], analytic: &[f64], numeric: &[f64]) {
        for ((&index, &a), &n) in indices.iter().zip(analytic).zip(numeric) {
            self.coordinates += 1;
            let error = relative_error(a, n);
            // NaN compares false, so test for it explicitly.
            if error > self.max_error || error.is_nan() && !self.max_error.is_nan() {
                self.max_error = error;
                self.worst = Some(Coordinate {
                    seed,
                    tensor: tensor.to_string(),
                    index,
                    analytic: a,
                    numeric: n,
                    error,
                });
            }
        }
    }

    fn record_all(&mut self, seed: u64, tensor: &str, analytic: &Tensor<f64>, numeric: &[f64]) {
        let all: Vec<usize> = (0..analytic.len()).collect();
        self.record(seed, tensor, &all, analytic.data(), numeric);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub first_seed: u64,
    pub seeds: usize,
    pub step: f64,
    pub tolerance: f64,
    pub layers: Vec<LayerReport>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn violations(&self) -> impl Iterator<Item = &LayerReport> {
        self.layers
            .iter()
            .filter(|l| l.max_error.is_nan() || l.max_error > self.tolerance)
    }
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "gradient check: seeds {}..{}, h = {:e}, tolerance {:e}",
            self.first_seed,
            self.first_seed + self.seeds as u64,
            self.step,
            self.tolerance
        )?;
        for l in &self.layers {
            let status = if l.max_error <= self.tolerance { "ok" } else { "FAIL" };
            writeln!(
                f,
                "{:<12} {:>7} coords  max rel error {:.3e}  {status}",
                l.layer, l.coordinates, l.max_error
            )?;
            if status == "FAIL" {
                if let Some(w) = &l.worst {
                    writeln!(
                        f,
                        "  worst: seed {} {}[{}] analytic {:.9e} numeric {:.9e}",
                        w.seed, w.tensor, w.index, w.analytic, w.numeric
                    )?;
                }
            }
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut impl Rng) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi)).expect("fixture shapes are positive")
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn check_conv(report: &mut LayerReport, seed: u64, h: f64, rng: &mut impl Rng) {
    let x = uniform(&[5, 5, 2], -1.0, 1.0, rng);
    let k = uniform(&[3, 3, 2, 3], -1.0, 1.0, rng);
    let b = uniform(&[3], -1.0, 1.0, rng);
    let u = uniform(&[5, 5, 3], -1.0, 1.0, rng);
    let g = conv2d_backward(&x, &k, &u).expect("fixture shapes agree");
    let loss = |x: &Tensor<f64>, k: &Tensor<f64>, b: &Tensor<f64>| {
        dot(&u, &conv2d_forward(x, k, b).expect("fixture shapes agree"))
    };
    let idx = |t: &Tensor<f64>| (0..t.len()).collect::<Vec<_>>();
    report.record_all(
        seed,
        "input",
        &g.input,
        &finite_diff_at(|p| loss(p, &k, &b), &x, &idx(&x), h),
    );
    report.record_all(
        seed,
        "kernels",
        &g.kernels,
        &finite_diff_at(|p| loss(&x, p, &b), &k, &idx(&k), h),
    );
    report.record_all(
        seed,
        "bias",
        &g.bias,
        &finite_diff_at(|p| loss(&x, &k, p), &b, &idx(&b), h),
    );
}

fn check_relu(report: &mut LayerReport, seed: u64, h: f64, rng: &mut impl Rng) {
    // Keep inputs clear of the kink so central differences stay one-sided.
    let x = Tensor::from_fn(&[4, 4, 3], |_| {
        let m: f64 = rng.random_range(0.05..1.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
    .expect("fixture shape");
    let u = uniform(&[4, 4, 3], -1.0, 1.0, rng);
    let g = relu_backward(&x, &u).expect("fixture shapes agree");
    let all: Vec<usize> = (0..x.len()).collect();
    report.record_all(seed, "input", &g, &finite_diff_at(|p| dot(&u, &relu(p)), &x, &all, h));
}

fn check_pool(report: &mut LayerReport, seed: u64, h: f64, rng: &mut impl Rng) {
    // Distinct values at least 0.01 apart so no window is near a tie; odd
    // sides exercise the padded edge windows.
    let shape = [5, 5, 2];
    let n = 50;
    let ranks = sample(rng, n, n).into_vec();
    let x = Tensor::from_fn(&shape, |i| ranks[i] as f64 * 0.02 - 0.5).expect("fixture shape");
    let pooled = maxpool2d(&x).expect("fixture shape");
    let u = uniform(pooled.output.shape(), -1.0, 1.0, rng);
    let g = maxpool2d_backward(&shape, &pooled.argmax, &u).expect("fixture shapes agree");
    let all: Vec<usize> = (0..n).collect();
    let loss = |p: &Tensor<f64>| dot(&u, &maxpool2d(p).expect("fixture shape").output);
    report.record_all(seed, "input", &g, &finite_diff_at(loss, &x, &all, h));
}

fn check_flatten(report: &mut LayerReport, seed: u64, h: f64, rng: &mut impl Rng) {
    let x = uniform(&[3, 2, 2], -1.0, 1.0, rng);
    let u = uniform(&[12], -1.0, 1.0, rng);
    let g = u.clone().reshape(x.shape()).expect("same length");
    let all: Vec<usize> = (0..x.len()).collect();
    let loss = |p: &Tensor<f64>| dot(&u, &p.clone().reshape(&[12]).expect("same length"));
    report.record_all(seed, "input", &g, &finite_diff_at(loss, &x, &all, h));
}

fn check_dense(report: &mut LayerReport, seed: u64, h: f64, backward: DenseBackwardFn, rng: &mut impl Rng) {
    let x = uniform(&[8], -1.0, 1.0, rng);
    let w = uniform(&[8, 4], -1.0, 1.0, rng);
    let b = uniform(&[4], -1.0, 1.0, rng);
    let u = uniform(&[4], -1.0, 1.0, rng);
    let g = backward(&x, &w, &u).expect("fixture shapes agree");
    let loss = |x: &Tensor<f64>, w: &Tensor<f64>, b: &Tensor<f64>| {
        dot(&u, &dense_forward(x, w, b).expect("fixture shapes agree"))
    };
    let idx = |t: &Tensor<f64>| (0..t.len()).collect::<Vec<_>>();
    report.record_all(
        seed,
        "input",
        &g.input,
        &finite_diff_at(|p| loss(p, &w, &b), &x, &idx(&x), h),
    );
    report.record_all(
        seed,
        "weights",
        &g.weights,
        &finite_diff_at(|p| loss(&x, p, &b), &w, &idx(&w), h),
    );
    report.record_all(
        seed,
        "bias",
        &g.bias,
        &finite_diff_at(|p| loss(&x, &w, p), &b, &idx(&b), h),
    );
}

fn check_sigmoid(report: &mut LayerReport, seed: u64, h: f64, rng: &mut impl Rng) {
    let x = uniform(&[6], -4.0, 4.0, rng);
    let u = uniform(&[6], -1.0, 1.0, rng);
    let g = sigmoid_backward(&sigmoid(&x), &u).expect("fixture shapes agree");
    let all: Vec<usize> = (0..x.len()).collect();
    report.record_all(
        seed,
        "input",
        &g,
        &finite_diff_at(|p| dot(&u, &sigmoid(p)), &x, &all, h),
    );
}

fn check_bce(report: &mut LayerReport, seed: u64, h: f64, rng: &mut impl Rng) {
    for y in [0.0, 1.0] {
        let p = Tensor::from_vec(&[1], vec![rng.random_range(0.05..0.95)]).expect("scalar");
        let (_, dp) = bce_loss(p.data()[0], y).expect("valid target");
        let loss = |t: &Tensor<f64>| bce_loss(t.data()[0], y).expect("valid target").0;
        let numeric = finite_diff_at(loss, &p, &[0], h);
        let name = if y == 1.0 { "p|y=1" } else { "p|y=0" };
        report.record(seed, name, &[0], &[dp], &numeric);
    }
}

fn check_fallnet(report: &mut LayerReport, seed: u64, h: f64, coords: usize, rng: &mut impl Rng) {
    let input = InputSize::new(8, 8, 3);
    let model = FallNetModel::<f64>::build(input, seed).expect("8x8 model builds");
    let image = uniform(&input.shape(), 0.0, 1.0, rng);
    let y = if seed.is_multiple_of(2) { 1.0 } else { 0.0 };
    let trace = model.forward_trace(&image).expect("input matches model");
    let (_, dp) = bce_loss(trace.probability(), y).expect("valid target");
    let grads = model.backward(&trace, dp).expect("trace matches model");

    let n_params = model.params().len();
    for t in 0..n_params {
        let param = model.params()[t].clone();
        let indices = sample(rng, param.len(), coords.min(param.len())).into_vec();
        let loss = |p: &Tensor<f64>| {
            let mut probe = model.clone();
            *probe.params_mut()[t] = p.clone();
            let prob = probe.forward(&image).expect("input matches model");
            bce_loss(prob, y).expect("valid target").0
        };
        let numeric = finite_diff_at(loss, &param, &indices, h);
        let analytic: Vec<f64> = indices.iter().map(|&i| grads.0[t].data()[i]).collect();
        report.record(seed, &format!("param{t}"), &indices, &analytic, &numeric);
    }
}

/// Runs every fixture for each seed and keeps the worst coordinate per layer.
pub fn run_gradcheck(config: &GradcheckConfig) -> GradcheckReport {
    let names = [
        "conv2d",
        "relu",
        "maxpool2d",
        "flatten",
        "dense",
        "sigmoid",
        "bce",
        "fallnet_8x8",
    ];
    let mut layers: Vec<LayerReport> = names.iter().map(|n| LayerReport::new(n)).collect();
    let h = config.step;
    for seed in config.seed..config.seed + config.seeds as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        check_conv(&mut layers[0], seed, h, &mut rng);
        check_relu(&mut layers[1], seed, h, &mut rng);
        check_pool(&mut layers[2], seed, h, &mut rng);
        check_flatten(&mut layers[3], seed, h, &mut rng);
        check_dense(&mut layers[4], seed, h, config.dense_backward, &mut rng);
        check_sigmoid(&mut layers[5], seed, h, &mut rng);
        check_bce(&mut layers[6], seed, h, &mut rng);
        check_fallnet(&mut layers[7], seed, h, config.fallnet_coords, &mut rng);
    }
    GradcheckReport {
        first_seed: config.seed,
        seeds: config.seeds,
        step: h,
        tolerance: config.tolerance,
        layers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skewed_dense(
        input: &Tensor<f64>,
        weights: &Tensor<f64>,
        upstream: &Tensor<f64>,
    ) -> Result<DenseGrads<f64>, ShapeError> {
        let mut g = dense_backward(input, weights, upstream)?;
        g.weights.scale(1.01);
        Ok(g)
    }

    #[test]
    fn short_run_passes_and_is_deterministic() {
        let cfg = GradcheckConfig {
            seeds: 2,
            fallnet_coords: 4,
            ..Default::default()
        };
        let a = run_gradcheck(&cfg);
        assert!(a.passed(), "{a}");
        assert_eq!(a.to_string(), run_gradcheck(&cfg).to_string());
    }

    #[test]
    fn corrupted_dense_backward_is_caught() {
        let cfg = GradcheckConfig {
            seeds: 1,
            fallnet_coords: 1,
            dense_backward: skewed_dense,
            ..Default::default()
        };
        let report = run_gradcheck(&cfg);
        assert!(!report.passed());
        let bad: Vec<_> = report.violations().map(|l| l.layer).collect();
        assert_eq!(bad, vec!["dense"]);
        assert!(report.to_string().contains("worst: seed 0 weights["));
    }
}
