//! A small feed-forward engine: dense, 1-D convolution, ReLU and flatten
//! layers, plus the fixed inverse-Fourier input layer used for virtual
//! inspection. Activations are flat row-major `f64` buffers; batches are
//! stacked along the leading axis.

mod model_file;
mod train;

pub use model_file::{load, save, FORMAT_VERSION};
pub use train::{accuracy, train, EpochStats, Optimizer, TrainConfig, TrainReport, SYNTHETIC_WEIGHT_DECAY};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attribution::InverseFourier;
use crate::error::{Error, Result};
use crate::linalg;

/// Fully connected layer, `weights` is `out × in` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn new(in_features: usize, out_features: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_features == 0 || out_features == 0 {
            return Err(Error::Config("dense layer needs non-zero dimensions".into()));
        }
        if weights.len() != in_features * out_features {
            return Err(Error::dim("dense weights", in_features * out_features, weights.len()));
        }
        if bias.len() != out_features {
            return Err(Error::dim("dense bias", out_features, bias.len()));
        }
        check_finite(&weights, "dense weights")?;
        check_finite(&bias, "dense bias")?;
        Ok(Self {
            in_features,
            out_features,
            weights,
            bias,
        })
    }

    /// He-style uniform initialization scaled by fan-in, zero bias.
    pub fn init(in_features: usize, out_features: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / in_features as f64).sqrt();
        Self {
            in_features,
            out_features,
            weights: (0..in_features * out_features)
                .map(|_| rng.gen_range(-limit..limit))
                .collect(),
            bias: vec![0.0; out_features],
        }
    }
}

/// 1-D convolution without padding. Input is `in_channels × T` channel-major,
/// kernels are `out_channels × in_channels × kernel_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Conv1d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel_size == 0 || stride == 0 {
            return Err(Error::Config("conv1d needs non-zero channels, kernel size and stride".into()));
        }
        let expected = out_channels * in_channels * kernel_size;
        if weights.len() != expected {
            return Err(Error::dim("conv1d kernels", expected, weights.len()));
        }
        if bias.len() != out_channels {
            return Err(Error::dim("conv1d bias", out_channels, bias.len()));
        }
        check_finite(&weights, "conv1d kernels")?;
        check_finite(&bias, "conv1d bias")?;
        Ok(Self {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            weights,
            bias,
        })
    }

    pub fn init(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let fan_in = in_channels * kernel_size;
        let limit = (6.0 / fan_in as f64).sqrt();
        Self {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            weights: (0..out_channels * fan_in)
                .map(|_| rng.gen_range(-limit..limit))
                .collect(),
            bias: vec![0.0; out_channels],
        }
    }

    fn steps(&self, input_len: usize) -> Result<usize> {
        if input_len % self.in_channels != 0 {
            return Err(Error::dim(
                "conv1d input (multiple of in_channels)",
                input_len.div_ceil(self.in_channels) * self.in_channels,
                input_len,
            ));
        }
        let t = input_len / self.in_channels;
        if t < self.kernel_size {
            return Err(Error::dim("conv1d input steps", self.kernel_size, t));
        }
        Ok((t - self.kernel_size) / self.stride + 1)
    }

    /// Convolution of one sample with the given kernels; bias optional.
    pub(crate) fn convolve(&self, kernels: &[f64], input: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
        let t_in = input.len() / self.in_channels;
        let t_out = (t_in - self.kernel_size) / self.stride + 1;
        let mut out = vec![0.0; self.out_channels * t_out];
        for co in 0..self.out_channels {
            for t in 0..t_out {
                let mut s = bias.map_or(0.0, |b| b[co]);
                for ci in 0..self.in_channels {
                    let row = &input[ci * t_in + t * self.stride..];
                    let ker = &kernels[(co * self.in_channels + ci) * self.kernel_size..][..self.kernel_size];
                    for (w, x) in ker.iter().zip(row) {
                        s += w * x;
                    }
                }
                out[co * t_out + t] = s;
            }
        }
        out
    }

    /// Transpose of [`Conv1d::convolve`] (without bias) for one sample.
    pub(crate) fn convolve_transpose(&self, kernels: &[f64], grad_out: &[f64], input_len: usize) -> Vec<f64> {
        let t_in = input_len / self.in_channels;
        let t_out = grad_out.len() / self.out_channels;
        let mut g = vec![0.0; input_len];
        for co in 0..self.out_channels {
            for t in 0..t_out {
                let go = grad_out[co * t_out + t];
                if go == 0.0 {
                    continue;
                }
                for ci in 0..self.in_channels {
                    let ker = &kernels[(co * self.in_channels + ci) * self.kernel_size..][..self.kernel_size];
                    let base = ci * t_in + t * self.stride;
                    for (k, w) in ker.iter().enumerate() {
                        g[base + k] += w * go;
                    }
                }
            }
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Conv1d(Conv1d),
    Relu,
    Flatten,
    /// Fixed linear map from Fourier coefficients back to the time signal.
    InverseFourier(InverseFourier),
}

/// Gradient buffers for a trainable layer, same layout as its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ParamGrad {
    fn zeros_like(layer: &Layer) -> Option<Self> {
        layer.params().map(|(w, b)| Self {
            weights: vec![0.0; w.len()],
            bias: vec![0.0; b.len()],
        })
    }
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Conv1d(_) => "conv1d",
            Layer::Relu => "relu",
            Layer::Flatten => "flatten",
            Layer::InverseFourier(_) => "inverse_fourier",
        }
    }

    /// Layers that carry a linear map and therefore take an LRP rule.
    pub fn is_linear(&self) -> bool {
        matches!(self, Layer::Dense(_) | Layer::Conv1d(_) | Layer::InverseFourier(_))
    }

    pub fn params(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Layer::Dense(d) => Some((&d.weights, &d.bias)),
            Layer::Conv1d(c) => Some((&c.weights, &c.bias)),
            _ => None,
        }
    }

    pub fn params_mut(&mut self) -> Option<(&mut [f64], &mut [f64])> {
        match self {
            Layer::Dense(d) => Some((&mut d.weights, &mut d.bias)),
            Layer::Conv1d(c) => Some((&mut c.weights, &mut c.bias)),
            _ => None,
        }
    }

    pub fn output_len(&self, input_len: usize) -> Result<usize> {
        match self {
            Layer::Dense(d) => {
                if input_len != d.in_features {
                    return Err(Error::dim("dense input", d.in_features, input_len));
                }
                Ok(d.out_features)
            }
            Layer::Conv1d(c) => Ok(c.out_channels * c.steps(input_len)?),
            Layer::Relu | Layer::Flatten => Ok(input_len),
            Layer::InverseFourier(f) => {
                if input_len != f.input_len() {
                    return Err(Error::dim("inverse fourier input", f.input_len(), input_len));
                }
                Ok(f.output_len())
            }
        }
    }

    /// Batched forward pass; `input` holds `batch` rows of `in_len` values.
    pub fn forward(&self, input: &[f64], batch: usize, in_len: usize) -> Vec<f64> {
        debug_assert_eq!(input.len(), batch * in_len);
        match self {
            Layer::Dense(d) => {
                let mut out = Vec::with_capacity(batch * d.out_features);
                for _ in 0..batch {
                    out.extend_from_slice(&d.bias);
                }
                linalg::gemm_nt(batch, d.in_features, d.out_features, input, &d.weights, 1.0, &mut out);
                out
            }
            Layer::Conv1d(c) => input
                .chunks(in_len)
                .flat_map(|x| c.convolve(&c.weights, x, Some(&c.bias)))
                .collect(),
            Layer::Relu => input.iter().map(|&v| v.max(0.0)).collect(),
            Layer::Flatten => input.to_vec(),
            Layer::InverseFourier(f) => input.chunks(in_len).flat_map(|z| f.apply(z)).collect(),
        }
    }

    /// Batched reverse pass. Returns the gradient with respect to the layer
    /// input and accumulates parameter gradients into `param_grad`.
    pub fn backward(
        &self,
        input: &[f64],
        batch: usize,
        in_len: usize,
        grad_out: &[f64],
        param_grad: Option<&mut ParamGrad>,
    ) -> Vec<f64> {
        match self {
            Layer::Dense(d) => {
                let (i, o) = (d.in_features, d.out_features);
                if let Some(pg) = param_grad {
                    linalg::gemm_tn(o, batch, i, grad_out, input, 1.0, &mut pg.weights);
                    for row in grad_out.chunks(o) {
                        for (b, g) in pg.bias.iter_mut().zip(row) {
                            *b += g;
                        }
                    }
                }
                let mut grad_in = vec![0.0; batch * i];
                linalg::gemm(batch, o, i, grad_out, &d.weights, 0.0, &mut grad_in);
                grad_in
            }
            Layer::Conv1d(c) => {
                let out_len = grad_out.len() / batch;
                let t_in = in_len / c.in_channels;
                let t_out = out_len / c.out_channels;
                let mut grad_in = Vec::with_capacity(batch * in_len);
                let mut pg = param_grad;
                for (x, go) in input.chunks(in_len).zip(grad_out.chunks(out_len)) {
                    if let Some(pg) = pg.as_deref_mut() {
                        for co in 0..c.out_channels {
                            for t in 0..t_out {
                                let g = go[co * t_out + t];
                                pg.bias[co] += g;
                                for ci in 0..c.in_channels {
                                    let base = ci * t_in + t * c.stride;
                                    let wbase = (co * c.in_channels + ci) * c.kernel_size;
                                    for k in 0..c.kernel_size {
                                        pg.weights[wbase + k] += g * x[base + k];
                                    }
                                }
                            }
                        }
                    }
                    grad_in.extend(c.convolve_transpose(&c.weights, go, in_len));
                }
                grad_in
            }
            Layer::Relu => input
                .iter()
                .zip(grad_out)
                .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                .collect(),
            Layer::Flatten => grad_out.to_vec(),
            Layer::InverseFourier(f) => {
                let out_len = f.output_len();
                grad_out.chunks(out_len).flat_map(|g| f.apply_transpose(g)).collect()
            }
        }
    }
}

/// Per-layer activations of one forward pass; `activations[0]` is the input
/// and `activations[i + 1]` the output of layer `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        self.activations.last().expect("trace holds at least the input")
    }

    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub input: Vec<f64>,
    /// One entry per layer; `None` for layers without trainable parameters.
    pub params: Vec<Option<ParamGrad>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    input_length: usize,
    num_classes: usize,
}

impl Network {
    /// Builds a network, shape-checking the layer chain for `input_length`.
    pub fn new(layers: Vec<Layer>, input_length: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if input_length == 0 {
            return Err(Error::Config("input length must be positive".into()));
        }
        let mut len = input_length;
        for layer in &layers {
            len = layer.output_len(len)?;
        }
        Ok(Self {
            layers,
            input_length,
            num_classes: len,
        })
    }

    /// ReLU multilayer perceptron with seeded He-uniform initialization.
    pub fn mlp(input_length: usize, hidden: &[usize], num_classes: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut prev = input_length;
        for &h in hidden {
            layers.push(Layer::Dense(Dense::init(prev, h, &mut rng)));
            layers.push(Layer::Relu);
            prev = h;
        }
        layers.push(Layer::Dense(Dense::init(prev, num_classes, &mut rng)));
        Self::new(layers, input_length)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_length(&self) -> usize {
        self.input_length
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(Layer::params)
            .map(|(w, b)| w.len() + b.len())
            .sum()
    }

    /// Mutable access to one layer's trainable parameters. Shapes cannot
    /// change through this handle.
    pub fn params_mut(&mut self, layer: usize) -> Option<(&mut [f64], &mut [f64])> {
        self.layers.get_mut(layer).and_then(Layer::params_mut)
    }

    /// The inverse-Fourier input layer, if this network was augmented.
    pub fn virtual_input(&self) -> Option<&InverseFourier> {
        match self.layers.first() {
            Some(Layer::InverseFourier(f)) => Some(f),
            _ => None,
        }
    }

    pub(crate) fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    pub(crate) fn check_input(&self, len: usize) -> Result<()> {
        if len != self.input_length {
            return Err(Error::dim("network input", self.input_length, len));
        }
        Ok(())
    }

    pub(crate) fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.num_classes {
            return Err(Error::InvalidClass {
                class,
                num_classes: self.num_classes,
            });
        }
        Ok(())
    }

    /// Forward pass over `batch` stacked inputs, keeping every activation.
    pub fn forward_batch_trace(&self, inputs: &[f64], batch: usize) -> Result<Vec<Vec<f64>>> {
        if inputs.len() != batch * self.input_length {
            return Err(Error::dim("batched network input", batch * self.input_length, inputs.len()));
        }
        check_finite(inputs, "network input")?;
        Ok(self.forward_tail(0, inputs.to_vec(), batch))
    }

    /// Runs `layers[start..]` on `batch` rows; `activations[0]` is `inputs`.
    pub(crate) fn forward_tail(&self, start: usize, inputs: Vec<f64>, batch: usize) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1 - start);
        let mut len = inputs.len() / batch.max(1);
        acts.push(inputs);
        for layer in &self.layers[start..] {
            let out = layer.forward(acts.last().unwrap(), batch, len);
            len = out.len() / batch.max(1);
            acts.push(out);
        }
        acts
    }

    /// Logits for `batch` stacked inputs.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        Ok(self.forward_batch_trace(inputs, batch)?.pop().unwrap())
    }

    pub fn forward_trace(&self, x: &[f64]) -> Result<Trace> {
        self.check_input(x.len())?;
        Ok(Trace {
            activations: self.forward_batch_trace(x, 1)?,
        })
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(x, 1).map_err(|e| match e {
            Error::Dimension { expected, found, .. } => Error::dim("network input", expected, found),
            other => other,
        })
    }

    pub fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.forward(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Reverse pass from a per-sample output cotangent through a stored
    /// batched trace. Returns the input gradient.
    pub(crate) fn backward_from(
        &self,
        acts: &[Vec<f64>],
        batch: usize,
        grad_logits: Vec<f64>,
        param_grads: Option<&mut [Option<ParamGrad>]>,
    ) -> Vec<f64> {
        self.backward_tail(0, acts, batch, grad_logits, param_grads)
    }

    /// Reverse pass through `layers[start..]` with a trace produced by
    /// [`Network::forward_tail`] for the same `start`.
    pub(crate) fn backward_tail(
        &self,
        start: usize,
        acts: &[Vec<f64>],
        batch: usize,
        grad_logits: Vec<f64>,
        mut param_grads: Option<&mut [Option<ParamGrad>]>,
    ) -> Vec<f64> {
        let mut grad = grad_logits;
        for (i, layer) in self.layers.iter().enumerate().skip(start).rev() {
            let a = &acts[i - start];
            let in_len = a.len() / batch;
            let pg = param_grads.as_deref_mut().and_then(|p| p[i].as_mut());
            grad = layer.backward(a, batch, in_len, &grad, pg);
        }
        grad
    }

    /// Gradient of logit `target` with respect to the input.
    pub fn input_gradient(&self, x: &[f64], target: usize) -> Result<Vec<f64>> {
        self.check_class(target)?;
        let trace = self.forward_trace(x)?;
        let mut seed = vec![0.0; self.num_classes];
        seed[target] = 1.0;
        Ok(self.backward_from(&trace.activations, 1, seed, None))
    }

    /// Gradient of logit `target` with respect to the input and all
    /// trainable parameters.
    pub fn gradients(&self, x: &[f64], target: usize) -> Result<Gradients> {
        self.check_class(target)?;
        let trace = self.forward_trace(x)?;
        let mut seed = vec![0.0; self.num_classes];
        seed[target] = 1.0;
        let mut params: Vec<Option<ParamGrad>> = self.layers.iter().map(ParamGrad::zeros_like).collect();
        let input = self.backward_from(&trace.activations, 1, seed, Some(&mut params));
        Ok(Gradients { input, params })
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::InvalidInput(format!("non-finite value in {what} at index {i}"))),
        None => Ok(()),
    }
}
