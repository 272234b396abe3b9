use std::fmt;

use crate::nn::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, gaussian_init, maxpool2d, maxpool2d_backward, relu,
    relu_backward, sigmoid, sigmoid_backward, NnError, DEFAULT_INIT_SD, KERNEL_SIZE,
};
use crate::tensor::{Scalar, ShapeError, Tensor};

use super::ModelError;

/// Filters of the six convolution blocks.
pub const FILTER_SCHEDULE: [usize; 6] = [16, 16, 32, 32, 64, 64];
/// Width of the hidden dense layer in the head.
pub const HEAD_UNITS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InputSize {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl InputSize {
    pub const fn new(height: usize, width: usize, channels: usize) -> Self {
        InputSize {
            height,
            width,
            channels,
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }
}

impl Default for InputSize {
    fn default() -> Self {
        InputSize::new(64, 64, 3)
    }
}

impl fmt::Display for InputSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.height, self.width, self.channels)
    }
}

/// How weight tensors are drawn. Biases always start at zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitScheme {
    /// `Normal(0, 2/fan_in)`: zero-mean Gaussian scaled to the layer's fan-in.
    #[default]
    HeNormal,
    /// `Normal(0, sd²)` for every weight tensor.
    FixedSd(f64),
}

impl InitScheme {
    /// The fixed-SD scheme with SD 0.01.
    pub const FIXED_0_01: InitScheme = InitScheme::FixedSd(DEFAULT_INIT_SD);

    fn sd(&self, shape: &[usize]) -> f64 {
        match *self {
            InitScheme::HeNormal => {
                let fan_in: usize = shape[..shape.len() - 1].iter().product();
                (2.0 / fan_in as f64).sqrt()
            }
            InitScheme::FixedSd(sd) => sd,
        }
    }
}

/// Layer kinds, without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerSpec {
    /// 3×3, stride 1, same padding.
    Conv2d {
        filters: usize,
    },
    Relu,
    /// 2×2 window, stride 2.
    MaxPool2d,
    Flatten,
    Dense {
        units: usize,
    },
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv2d { kernels: Tensor<T>, bias: Tensor<T> },
    Relu,
    MaxPool2d,
    Flatten,
    Dense { weights: Tensor<T>, bias: Tensor<T> },
    Sigmoid,
}

impl<T: Scalar> Layer<T> {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv2d { kernels, .. } => LayerSpec::Conv2d {
                filters: kernels.shape()[3],
            },
            Layer::Relu => LayerSpec::Relu,
            Layer::MaxPool2d => LayerSpec::MaxPool2d,
            Layer::Flatten => LayerSpec::Flatten,
            Layer::Dense { weights, .. } => LayerSpec::Dense {
                units: weights.shape()[1],
            },
            Layer::Sigmoid => LayerSpec::Sigmoid,
        }
    }

    /// Weight then bias, for parameterised layers.
    pub fn params(&self) -> Option<(&Tensor<T>, &Tensor<T>)> {
        match self {
            Layer::Conv2d { kernels, bias } => Some((kernels, bias)),
            Layer::Dense { weights, bias } => Some((weights, bias)),
            _ => None,
        }
    }

    fn params_mut(&mut self) -> Option<(&mut Tensor<T>, &mut Tensor<T>)> {
        match self {
            Layer::Conv2d { kernels, bias } => Some((kernels, bias)),
            Layer::Dense { weights, bias } => Some((weights, bias)),
            _ => None,
        }
    }

    fn cast<U: Scalar>(&self) -> Layer<U> {
        match self {
            Layer::Conv2d { kernels, bias } => Layer::Conv2d {
                kernels: kernels.cast(),
                bias: bias.cast(),
            },
            Layer::Dense { weights, bias } => Layer::Dense {
                weights: weights.cast(),
                bias: bias.cast(),
            },
            Layer::Relu => Layer::Relu,
            Layer::MaxPool2d => Layer::MaxPool2d,
            Layer::Flatten => Layer::Flatten,
            Layer::Sigmoid => Layer::Sigmoid,
        }
    }
}

/// The fall classifier: six conv→ReLU→maxpool blocks, then
/// flatten → dense(32) → ReLU → dense(1) → sigmoid.
#[derive(Debug, Clone, PartialEq)]
pub struct FallNetModel<T = f32> {
    input: InputSize,
    seed: Option<u64>,
    layers: Vec<Layer<T>>,
}

/// Per-layer values kept from a forward pass for backprop.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    /// `inputs[i]` is the input of layer `i`; the final entry is the output.
    inputs: Vec<Tensor<T>>,
    argmax: Vec<Option<Vec<usize>>>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn probability(&self) -> T {
        self.inputs.last().expect("trace holds the output").data()[0]
    }
}

/// Gradients aligned with [`FallNetModel::params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T>(pub Vec<Tensor<T>>);

impl<T: Scalar> Gradients<T> {
    pub fn add_assign(&mut self, other: &Gradients<T>) -> Result<(), ShapeError> {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, k: T) {
        self.0.iter_mut().for_each(|g| g.scale(k));
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Tensor::is_finite)
    }
}

fn derive_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finaliser over (seed, index)
    let mut z = seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<T: Scalar> FallNetModel<T> {
    /// Builds the network with the default [`InitScheme`] and zero biases.
    pub fn build(input: InputSize, seed: u64) -> Result<Self, ModelError> {
        Self::build_with(input, seed, InitScheme::default())
    }

    pub fn build_with(input: InputSize, seed: u64, init: InitScheme) -> Result<Self, ModelError> {
        if input.height == 0 || input.width == 0 || input.channels == 0 {
            return Err(ModelError::Config(format!(
                "input {input} cannot pass six pooling stages"
            )));
        }
        let mut layers = Vec::new();
        let mut channels = input.channels;
        let mut param_index = 0;
        let mut weights = |shape: &[usize]| -> Result<Tensor<T>, NnError> {
            param_index += 1;
            gaussian_init(shape, init.sd(shape), derive_seed(seed, param_index))
        };
        for &filters in &FILTER_SCHEDULE {
            layers.push(Layer::Conv2d {
                kernels: weights(&[KERNEL_SIZE, KERNEL_SIZE, channels, filters])?,
                bias: Tensor::zeros(&[filters])?,
            });
            layers.push(Layer::Relu);
            layers.push(Layer::MaxPool2d);
            channels = filters;
        }
        let (fh, fw) = Self::feature_dims(input);
        let flat = fh * fw * channels;
        layers.push(Layer::Flatten);
        layers.push(Layer::Dense {
            weights: weights(&[flat, HEAD_UNITS])?,
            bias: Tensor::zeros(&[HEAD_UNITS])?,
        });
        layers.push(Layer::Relu);
        layers.push(Layer::Dense {
            weights: weights(&[HEAD_UNITS, 1])?,
            bias: Tensor::zeros(&[1])?,
        });
        layers.push(Layer::Sigmoid);
        Ok(FallNetModel {
            input,
            seed: Some(seed),
            layers,
        })
    }

    /// Spatial size of the last pooled feature map.
    pub fn feature_dims(input: InputSize) -> (usize, usize) {
        let mut h = input.height;
        let mut w = input.width;
        for _ in 0..FILTER_SCHEDULE.len() {
            h = h.div_ceil(2);
            w = w.div_ceil(2);
        }
        (h, w)
    }

    /// Reassembles a model from layers, checking the block structure.
    pub fn from_layers(input: InputSize, layers: Vec<Layer<T>>) -> Result<Self, ModelError> {
        if input.height == 0 || input.width == 0 || input.channels == 0 {
            return Err(ModelError::Config(format!("input {input} has an empty dimension")));
        }
        let model = FallNetModel {
            input,
            seed: None,
            layers,
        };
        model.check_architecture()?;
        Ok(model)
    }

    pub fn expected_specs() -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        for &filters in &FILTER_SCHEDULE {
            specs.extend([LayerSpec::Conv2d { filters }, LayerSpec::Relu, LayerSpec::MaxPool2d]);
        }
        specs.extend([
            LayerSpec::Flatten,
            LayerSpec::Dense { units: HEAD_UNITS },
            LayerSpec::Relu,
            LayerSpec::Dense { units: 1 },
            LayerSpec::Sigmoid,
        ]);
        specs
    }

    /// Verifies layer order, filter schedule and parameter shapes.
    pub fn check_architecture(&self) -> Result<(), ModelError> {
        let specs = self.layer_specs();
        let expected = Self::expected_specs();
        if specs != expected {
            return Err(ModelError::Architecture(format!(
                "layer sequence {specs:?} differs from {expected:?}"
            )));
        }
        let mut channels = self.input.channels;
        let (fh, fw) = Self::feature_dims(self.input);
        let mut dense_in = None;
        for layer in &self.layers {
            match layer {
                Layer::Conv2d { kernels, bias } => {
                    let f = kernels.shape()[3];
                    if kernels.shape() != [KERNEL_SIZE, KERNEL_SIZE, channels, f] || bias.shape() != [f] {
                        return Err(ModelError::Architecture(format!(
                            "conv parameters {:?}/{:?} do not fit {channels} input channels",
                            kernels.shape(),
                            bias.shape()
                        )));
                    }
                    channels = f;
                }
                Layer::Flatten => dense_in = Some(fh * fw * channels),
                Layer::Dense { weights, bias } => {
                    let n = dense_in.unwrap_or(0);
                    let m = weights.shape()[1];
                    if weights.shape() != [n, m] || bias.shape() != [m] {
                        return Err(ModelError::Architecture(format!(
                            "dense parameters {:?}/{:?} do not fit {n} inputs",
                            weights.shape(),
                            bias.shape()
                        )));
                    }
                    dense_in = Some(m);
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn input_size(&self) -> InputSize {
        self.input
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn conv_filters(&self) -> Vec<usize> {
        self.layer_specs()
            .into_iter()
            .filter_map(|s| match s {
                LayerSpec::Conv2d { filters } => Some(filters),
                _ => None,
            })
            .collect()
    }

    /// Flattened feature length feeding the head.
    pub fn flatten_len(&self) -> usize {
        let (h, w) = Self::feature_dims(self.input);
        h * w * FILTER_SCHEDULE[FILTER_SCHEDULE.len() - 1]
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .filter_map(Layer::params_mut)
            .flat_map(|(w, b)| [w, b])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> FallNetModel<U> {
        FallNetModel {
            input: self.input,
            seed: self.seed,
            layers: self.layers.iter().map(Layer::cast).collect(),
        }
    }

    /// Overwrites every weight and bias with `value`.
    pub fn fill_params(&mut self, value: T) {
        self.params_mut().into_iter().for_each(|p| p.fill(value));
    }

    fn check_input(&self, image: &Tensor<T>) -> Result<(), ShapeError> {
        if image.shape() != self.input.shape() {
            return Err(ShapeError::mismatch("model input", &self.input.shape(), image.shape()));
        }
        Ok(())
    }

    /// Probability that `image` shows a fall.
    pub fn forward(&self, image: &Tensor<T>) -> Result<T, ModelError> {
        self.check_input(image)?;
        let mut x = image.clone();
        for layer in &self.layers {
            x = match layer {
                Layer::Conv2d { kernels, bias } => conv2d_forward(&x, kernels, bias)?,
                Layer::Relu => relu(&x),
                Layer::MaxPool2d => maxpool2d(&x)?.output,
                Layer::Flatten => {
                    let n = x.len();
                    x.reshape(&[n])?
                }
                Layer::Dense { weights, bias } => dense_forward(&x, weights, bias)?,
                Layer::Sigmoid => sigmoid(&x),
            };
        }
        Ok(x.data()[0])
    }

    pub fn forward_trace(&self, image: &Tensor<T>) -> Result<ForwardTrace<T>, ModelError> {
        self.check_input(image)?;
        let mut inputs = Vec::with_capacity(self.layers.len() + 1);
        let mut argmax = Vec::with_capacity(self.layers.len());
        inputs.push(image.clone());
        for layer in &self.layers {
            let x = inputs.last().expect("non-empty");
            let (next, routes) = match layer {
                Layer::Conv2d { kernels, bias } => (conv2d_forward(x, kernels, bias)?, None),
                Layer::Relu => (relu(x), None),
                Layer::MaxPool2d => {
                    let p = maxpool2d(x)?;
                    (p.output, Some(p.argmax))
                }
                Layer::Flatten => (x.clone().reshape(&[x.len()])?, None),
                Layer::Dense { weights, bias } => (dense_forward(x, weights, bias)?, None),
                Layer::Sigmoid => (sigmoid(x), None),
            };
            inputs.push(next);
            argmax.push(routes);
        }
        Ok(ForwardTrace { inputs, argmax })
    }

    /// Backpropagates `dloss/dprobability` through a recorded forward pass.
    pub fn backward(&self, trace: &ForwardTrace<T>, dloss_dp: T) -> Result<Gradients<T>, ModelError> {
        let mut upstream = Tensor::from_vec(&[1], vec![dloss_dp])?;
        let mut grads: Vec<Tensor<T>> = Vec::new();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[i];
            upstream = match layer {
                Layer::Conv2d { kernels, .. } => {
                    let g = conv2d_backward(input, kernels, &upstream)?;
                    grads.push(g.bias);
                    grads.push(g.kernels);
                    g.input
                }
                Layer::Relu => relu_backward(input, &upstream)?,
                Layer::MaxPool2d => {
                    let routes = trace.argmax[i].as_deref().unwrap_or(&[]);
                    maxpool2d_backward(input.shape(), routes, &upstream)?
                }
                Layer::Flatten => upstream.reshape(input.shape())?,
                Layer::Dense { weights, .. } => {
                    let g = dense_backward(input, weights, &upstream)?;
                    grads.push(g.bias);
                    grads.push(g.weights);
                    g.input
                }
                Layer::Sigmoid => sigmoid_backward(&trace.inputs[i + 1], &upstream)?,
            };
        }
        grads.reverse();
        Ok(Gradients(grads))
    }
}
