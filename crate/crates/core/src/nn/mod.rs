//! Layers, the model builder, and exact parameter accounting.
//!
//! A [`ModelSpec`] is a declarative layer list; a [`Model`] is its
//! instantiated parameter storage with mirrored gradient buffers. Gradients
//! are layer-local: the backward pass walks the layer list in reverse and
//! accumulates into each parameter's gradient buffer, there is no general
//! autodiff graph.

pub mod gradcheck;
pub mod ops;

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::tensor::Tensor;
use ops::PoolIndices;

/// Default LeakyReLU slope. Configurable everywhere it appears; 0.3 is the
/// conventional default for this style of network.
pub const DEFAULT_LEAKY_SLOPE: f32 = 0.3;
/// Default dropout rate of the classifier head.
pub const DEFAULT_DROPOUT: f32 = 0.5;

/// One layer of a model, with its layer-specific hyperparameters.
///
/// Convolutions are fixed at 3x3 kernels with "same" padding; pooling is
/// fixed at 2x2 windows with stride 2 and floor semantics.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    Conv2d { filters: usize },
    MaxPool2d,
    LeakyRelu { slope: f32 },
    Flatten,
    Dense { units: usize },
    Dropout { rate: f32 },
    SoftmaxOutput,
}

/// Shape of the value flowing between layers.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureShape {
    /// Height, width, channels (batch axis implied).
    Spatial { h: usize, w: usize, c: usize },
    Flat(usize),
}

impl std::fmt::Display for FeatureShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureShape::Spatial { h, w, c } => write!(f, "{h}x{w}x{c}"),
            FeatureShape::Flat(n) => write!(f, "{n}"),
        }
    }
}

/// Declarative model description: input shape, layer list, class count.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub input: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    pub classes: usize,
}

/// One row of the architecture table printed by `params`.
#[derive(Clone, Debug)]
pub struct LayerRow {
    pub name: String,
    pub output: FeatureShape,
    pub params: usize,
}

impl ModelSpec {
    /// Shape entering each layer, plus the final output shape.
    ///
    /// Fails if any intermediate shape is not computable and positive (for
    /// example when pooling floors a spatial extent to zero).
    pub fn shape_trace(&self) -> Result<Vec<FeatureShape>> {
        let (h, w, c) = self.input;
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::Build(format!("input shape {:?} has a zero extent", self.input)));
        }
        let mut trace = vec![FeatureShape::Spatial { h, w, c }];
        for (i, layer) in self.layers.iter().enumerate() {
            let cur = *trace.last().expect("non-empty trace");
            let next = match (layer, cur) {
                (LayerSpec::Conv2d { filters }, FeatureShape::Spatial { h, w, .. }) => {
                    if *filters == 0 {
                        return Err(Error::Build(format!("layer {i}: conv with 0 filters")));
                    }
                    FeatureShape::Spatial { h, w, c: *filters }
                }
                (LayerSpec::MaxPool2d, FeatureShape::Spatial { h, w, c }) => {
                    if h < 2 || w < 2 {
                        return Err(Error::Build(format!(
                            "layer {i}: cannot pool a {h}x{w} map; input too small for the pooling stages"
                        )));
                    }
                    FeatureShape::Spatial { h: h / 2, w: w / 2, c }
                }
                (LayerSpec::LeakyRelu { slope }, shape) => {
                    if *slope <= 0.0 {
                        return Err(Error::Build(format!("layer {i}: LeakyReLU slope must be positive")));
                    }
                    shape
                }
                (LayerSpec::Flatten, FeatureShape::Spatial { h, w, c }) => FeatureShape::Flat(h * w * c),
                (LayerSpec::Dense { units }, FeatureShape::Flat(_)) => {
                    if *units == 0 {
                        return Err(Error::Build(format!("layer {i}: dense with 0 units")));
                    }
                    FeatureShape::Flat(*units)
                }
                (LayerSpec::Dropout { rate }, shape) => {
                    if !(0.0..1.0).contains(rate) {
                        return Err(Error::Build(format!("layer {i}: dropout rate {rate} outside [0, 1)")));
                    }
                    shape
                }
                (LayerSpec::SoftmaxOutput, FeatureShape::Flat(n)) => {
                    if i + 1 != self.layers.len() {
                        return Err(Error::Build("softmax output must be the last layer".into()));
                    }
                    if n != self.classes {
                        return Err(Error::Build(format!(
                            "softmax over {n} units but the model declares {} classes",
                            self.classes
                        )));
                    }
                    FeatureShape::Flat(n)
                }
                (layer, shape) => {
                    return Err(Error::Build(format!(
                        "layer {i}: {layer:?} cannot follow a {shape} value"
                    )))
                }
            };
            trace.push(next);
        }
        match self.layers.last() {
            Some(LayerSpec::SoftmaxOutput) => Ok(trace),
            _ => Err(Error::Build("model must end in a softmax output layer".into())),
        }
    }

    /// Architecture table: layer name, output shape, trainable parameters.
    pub fn layer_table(&self) -> Result<Vec<LayerRow>> {
        let trace = self.shape_trace()?;
        let mut rows = Vec::with_capacity(self.layers.len());
        let (mut conv_n, mut pool_n, mut relu_n, mut dense_n, mut drop_n) = (0, 0, 0, 0, 0);
        for (i, layer) in self.layers.iter().enumerate() {
            let (name, params) = match (layer, trace[i]) {
                (LayerSpec::Conv2d { filters }, FeatureShape::Spatial { c, .. }) => {
                    conv_n += 1;
                    (format!("conv{conv_n}"), (ops::KERNEL * ops::KERNEL * c + 1) * filters)
                }
                (LayerSpec::MaxPool2d, _) => {
                    pool_n += 1;
                    (format!("maxpool{pool_n}"), 0)
                }
                (LayerSpec::LeakyRelu { .. }, _) => {
                    relu_n += 1;
                    (format!("leakyrelu{relu_n}"), 0)
                }
                (LayerSpec::Flatten, _) => ("flatten".to_string(), 0),
                (LayerSpec::Dense { units }, FeatureShape::Flat(f)) => {
                    dense_n += 1;
                    (format!("dense{dense_n}"), (f + 1) * units)
                }
                (LayerSpec::Dropout { .. }, _) => {
                    drop_n += 1;
                    (format!("dropout{drop_n}"), 0)
                }
                (LayerSpec::SoftmaxOutput, _) => ("softmax".to_string(), 0),
                _ => unreachable!("shape_trace validated layer/shape pairing"),
            };
            rows.push(LayerRow { name, output: trace[i + 1], params });
        }
        Ok(rows)
    }
}

/// Analytic count of trainable parameters, summed per layer.
pub fn trainable_param_count(spec: &ModelSpec) -> Result<usize> {
    Ok(spec.layer_table()?.iter().map(|r| r.params).sum())
}

/// The four-block CNN: two 64-filter conv blocks, two 128-filter blocks,
/// each block closed by max-pooling, then a 1024-unit classifier head with
/// dropout and a softmax output.
pub fn build_proposed_cnn(input: (usize, usize, usize), classes: usize) -> Result<ModelSpec> {
    build_proposed_cnn_with(input, classes, DEFAULT_LEAKY_SLOPE, DEFAULT_DROPOUT)
}

/// [`build_proposed_cnn`] with explicit activation slope and dropout rate.
pub fn build_proposed_cnn_with(
    input: (usize, usize, usize),
    classes: usize,
    slope: f32,
    dropout: f32,
) -> Result<ModelSpec> {
    if classes < 2 {
        return Err(Error::Build(format!("need at least 2 classes, got {classes}")));
    }
    let relu = || LayerSpec::LeakyRelu { slope };
    let spec = ModelSpec {
        input,
        layers: vec![
            LayerSpec::Conv2d { filters: 64 },
            relu(),
            LayerSpec::MaxPool2d,
            LayerSpec::Conv2d { filters: 64 },
            relu(),
            LayerSpec::MaxPool2d,
            LayerSpec::Conv2d { filters: 128 },
            relu(),
            LayerSpec::MaxPool2d,
            LayerSpec::Conv2d { filters: 128 },
            relu(),
            LayerSpec::MaxPool2d,
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 1024 },
            relu(),
            LayerSpec::Dropout { rate: dropout },
            LayerSpec::Dense { units: classes },
            LayerSpec::SoftmaxOutput,
        ],
        classes,
    };
    spec.shape_trace()?;
    Ok(spec)
}

/// A named parameter tensor and its like-shaped gradient buffer.
#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// An instantiated model: spec plus parameter and gradient storage.
///
/// A `Model` is confined to one thread while training (backward mutates the
/// gradient buffers); eval-mode forward takes `&self` and is safe to share.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    params: Vec<Param>,
    /// Index into `params` of each layer's weight tensor (bias follows).
    layer_param: Vec<Option<usize>>,
}

/// Cached activations from a train-mode forward pass, consumed by
/// [`Model::backward`].
pub struct TrainTrace {
    /// `acts[i]` is the input to layer `i`; the last entry is the logits.
    acts: Vec<Tensor>,
    pool: Vec<Option<PoolIndices>>,
    masks: Vec<Option<Vec<f32>>>,
}

impl TrainTrace {
    /// The pre-softmax output cached by the forward pass.
    pub fn logits(&self) -> &Tensor {
        self.acts.last().expect("trace holds at least the input")
    }
}

impl Model {
    /// Allocate a model with all parameters zero.
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        let trace = spec.shape_trace()?;
        let mut params = Vec::new();
        let mut layer_param = Vec::with_capacity(spec.layers.len());
        let (mut conv_n, mut dense_n) = (0, 0);
        for (i, layer) in spec.layers.iter().enumerate() {
            let entry = match (layer, trace[i]) {
                (LayerSpec::Conv2d { filters }, FeatureShape::Spatial { c, .. }) => {
                    conv_n += 1;
                    let w_shape = [ops::KERNEL, ops::KERNEL, c, *filters];
                    Some((format!("conv{conv_n}"), w_shape.to_vec(), *filters))
                }
                (LayerSpec::Dense { units }, FeatureShape::Flat(f)) => {
                    dense_n += 1;
                    Some((format!("dense{dense_n}"), vec![f, *units], *units))
                }
                _ => None,
            };
            match entry {
                Some((name, w_shape, out_units)) => {
                    layer_param.push(Some(params.len()));
                    params.push(Param {
                        name: format!("{name}.w"),
                        value: Tensor::zeros(&w_shape),
                        grad: Tensor::zeros(&w_shape),
                    });
                    params.push(Param {
                        name: format!("{name}.b"),
                        value: Tensor::zeros(&[out_units]),
                        grad: Tensor::zeros(&[out_units]),
                    });
                }
                None => layer_param.push(None),
            }
        }
        Ok(Model { spec, params, layer_param })
    }

    /// Allocate and initialize: weights from a truncated normal with
    /// variance `2 / fan_in`, biases zero.
    pub fn seeded(spec: ModelSpec, rng: &mut CounterRng) -> Result<Self> {
        let mut model = Model::zeros(spec)?;
        for param in &mut model.params {
            if !param.name.ends_with(".w") {
                continue;
            }
            let shape = param.value.shape();
            let fan_in: usize = shape[..shape.len() - 1].iter().product();
            let stddev = (2.0 / fan_in as f64).sqrt();
            for v in param.value.data_mut() {
                *v = rng.truncated_normal(stddev) as f32;
            }
        }
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    /// Clear every gradient buffer.
    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    fn check_batch(&self, x: &Tensor) -> Result<()> {
        let (h, w, c) = self.spec.input;
        match x.shape() {
            [n, xh, xw, xc] if *n > 0 && (*xh, *xw, *xc) == (h, w, c) => Ok(()),
            other => Err(Error::ShapeMismatch {
                op: "model forward",
                left: other.to_vec(),
                right: vec![0, h, w, c],
            }),
        }
    }

    fn layer_wb(&self, layer: usize) -> (&Tensor, &Tensor) {
        let i = self.layer_param[layer].expect("layer has parameters");
        (&self.params[i].value, &self.params[i + 1].value)
    }

    /// Deterministic eval-mode forward: dropout is the identity, no
    /// activations are cached. Returns softmax probabilities.
    pub fn forward_eval(&self, x: &Tensor) -> Result<Tensor> {
        self.check_batch(x)?;
        let batch = x.shape()[0];
        let mut cur = x.clone();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            cur = match layer {
                LayerSpec::Conv2d { .. } => {
                    let (w, b) = self.layer_wb(i);
                    ops::conv2d_forward(&cur, w, b)?
                }
                LayerSpec::MaxPool2d => ops::maxpool2x2_forward(&cur)?.0,
                LayerSpec::LeakyRelu { slope } => ops::leaky_relu_forward(&cur, *slope),
                LayerSpec::Flatten => {
                    let flat = cur.len() / batch;
                    cur.reshape(&[batch, flat])?
                }
                LayerSpec::Dense { .. } => {
                    let (w, b) = self.layer_wb(i);
                    ops::dense_forward(&cur, w, b)?
                }
                LayerSpec::Dropout { .. } => cur,
                LayerSpec::SoftmaxOutput => ops::softmax_rows(&cur)?,
            };
        }
        Ok(cur)
    }

    /// Train-mode forward: dropout masks are sampled from `rng` and every
    /// layer input is cached for the backward pass. Stops at the logits.
    pub fn forward_train(&self, x: Tensor, rng: &mut CounterRng) -> Result<TrainTrace> {
        self.check_batch(&x)?;
        let batch = x.shape()[0];
        let n_layers = self.spec.layers.len();
        let mut acts = Vec::with_capacity(n_layers);
        let mut pool = vec![None; n_layers];
        let mut masks = vec![None; n_layers];
        let mut cur = x;
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let next = match layer {
                LayerSpec::Conv2d { .. } => {
                    let (w, b) = self.layer_wb(i);
                    ops::conv2d_forward(&cur, w, b)?
                }
                LayerSpec::MaxPool2d => {
                    let (out, idx) = ops::maxpool2x2_forward(&cur)?;
                    pool[i] = Some(idx);
                    out
                }
                LayerSpec::LeakyRelu { slope } => ops::leaky_relu_forward(&cur, *slope),
                LayerSpec::Flatten => {
                    let flat = cur.len() / batch;
                    cur.clone().reshape(&[batch, flat])?
                }
                LayerSpec::Dense { .. } => {
                    let (w, b) = self.layer_wb(i);
                    ops::dense_forward(&cur, w, b)?
                }
                LayerSpec::Dropout { rate } => {
                    let (out, mask) = ops::dropout_forward(&cur, *rate as f64, true, rng)?;
                    masks[i] = mask;
                    out
                }
                LayerSpec::SoftmaxOutput => {
                    // The loss consumes logits directly; nothing to do here.
                    acts.push(cur);
                    return Ok(TrainTrace { acts, pool, masks });
                }
            };
            acts.push(std::mem::replace(&mut cur, next));
        }
        Err(Error::Build("model must end in a softmax output layer".into()))
    }

    /// Backward pass from a cached train-mode forward. Computes the softmax
    /// cross-entropy against one-hot `labels`, accumulates parameter
    /// gradients, and returns the loss and the batch probabilities.
    pub fn backward(&mut self, trace: &TrainTrace, labels: &Tensor) -> Result<(f32, Tensor)> {
        if trace.acts.len() != self.spec.layers.len() {
            return Err(Error::Contract(format!(
                "stale trace: {} cached activations for {} layers",
                trace.acts.len(),
                self.spec.layers.len()
            )));
        }
        let (loss, probs, grad_logits) = ops::softmax_xent(trace.logits(), labels)?;
        let mut grad = grad_logits;
        // Walk everything below the softmax layer in reverse.
        for i in (0..self.spec.layers.len() - 1).rev() {
            let input = &trace.acts[i];
            grad = match &self.spec.layers[i] {
                LayerSpec::Conv2d { .. } => {
                    let pi = self.layer_param[i].expect("conv has parameters");
                    let w = &self.params[pi].value;
                    // The input gradient of the first layer is never used.
                    let (gx, gw, gb) = ops::conv2d_backward_impl(input, w, &grad, i > 0)?;
                    self.accumulate(pi, gw, gb)?;
                    gx
                }
                LayerSpec::MaxPool2d => {
                    let idx = trace.pool[i].as_ref().ok_or_else(|| {
                        Error::Contract("trace is missing pool indices".into())
                    })?;
                    ops::maxpool2x2_backward(idx, &grad)?
                }
                LayerSpec::LeakyRelu { slope } => ops::leaky_relu_backward(input, &grad, *slope)?,
                LayerSpec::Flatten => grad.reshape(input.shape())?,
                LayerSpec::Dense { .. } => {
                    let pi = self.layer_param[i].expect("dense has parameters");
                    let w = &self.params[pi].value;
                    let (gx, gw, gb) = ops::dense_backward(input, w, &grad)?;
                    self.accumulate(pi, gw, gb)?;
                    gx
                }
                LayerSpec::Dropout { .. } => ops::dropout_backward(&grad, trace.masks[i].as_deref()),
                LayerSpec::SoftmaxOutput => {
                    return Err(Error::Build("softmax output below the last layer".into()))
                }
            };
        }
        Ok((loss, probs))
    }

    fn accumulate(&mut self, weight_idx: usize, gw: Tensor, gb: Tensor) -> Result<()> {
        let w = &mut self.params[weight_idx];
        w.grad = w.grad.add(&gw)?;
        let b = &mut self.params[weight_idx + 1];
        b.grad = b.grad.add(&gb)?;
        Ok(())
    }
}
