//! Fully connected networks used as additive-predictor terms.
//!
//! Parameters are stored flat, layer by layer: the `fan_in × units` weight
//! matrix in row-major order, followed by the bias vector when the layer has
//! one. The same layout is used for the network's segment of the model's
//! parameter vector.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{sigmoid, softplus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Softplus,
    #[serde(alias = "linear")]
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus => softplus(z),
            Activation::Identity => z,
        }
    }

    // ReLU'(0) = 0
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => sigmoid(z),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
    #[serde(rename = "bias", default = "default_bias")]
    pub use_bias: bool,
}

fn default_bias() -> bool {
    true
}

impl LayerSpec {
    pub fn new(units: usize, activation: Activation, use_bias: bool) -> LayerSpec {
        LayerSpec { units, activation, use_bias }
    }
}

/// A named architecture as declared in a model spec.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDecl {
    pub name: String,
    pub layers: Vec<LayerSpec>,
}

impl NetworkDecl {
    /// 64-64-32 ReLU trunk without bias followed by a one-unit head.
    pub fn mdn_default(name: impl Into<String>, head: Activation) -> NetworkDecl {
        NetworkDecl {
            name: name.into(),
            layers: vec![
                LayerSpec::new(64, Activation::Relu, false),
                LayerSpec::new(64, Activation::Relu, false),
                LayerSpec::new(32, Activation::Relu, false),
                LayerSpec::new(1, head, true),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Spec(format!("network `{}` has no layers", self.name)));
        }
        if let Some(l) = self.layers.iter().position(|l| l.units == 0) {
            return Err(Error::Spec(format!("network `{}` layer {l} has zero units", self.name)));
        }
        if self.layers.last().map(|l| l.units) != Some(1) {
            return Err(Error::Spec(format!(
                "network `{}` must end in a single-unit layer",
                self.name
            )));
        }
        Ok(())
    }
}

/// Activations retained by a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    inputs: Array2<f64>,
    /// Pre-activations per layer.
    pre: Vec<Array2<f64>>,
    /// Post-activations per layer.
    post: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> Vec<f64> {
        self.post.last().expect("non-empty network").column(0).to_vec()
    }
}

/// Gradients from a backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct NetGradients {
    /// Same flat layout as [`Network::params`].
    pub params: Vec<f64>,
    pub inputs: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    input_dim: usize,
    params: Vec<f64>,
    cache: Option<ForwardCache>,
}

/// Glorot-uniform initialization of a network. Weights are drawn from a
/// ChaCha stream keyed by `seed`; biases start at zero.
pub fn init_network(specs: &[LayerSpec], input_dim: usize, seed: u64) -> Result<Network> {
    if specs.is_empty() {
        return Err(Error::Spec("network needs at least one layer".into()));
    }
    if input_dim == 0 || specs.iter().any(|l| l.units == 0) {
        return Err(Error::Spec("layer widths and input dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = Vec::with_capacity(param_count(specs, input_dim));
    let mut fan_in = input_dim;
    for layer in specs {
        let limit = (6.0 / (fan_in + layer.units) as f64).sqrt();
        params.extend((0..fan_in * layer.units).map(|_| rng.random_range(-limit..=limit)));
        if layer.use_bias {
            params.extend(std::iter::repeat_n(0.0, layer.units));
        }
        fan_in = layer.units;
    }
    Ok(Network { layers: specs.to_vec(), input_dim, params, cache: None })
}

pub fn param_count(specs: &[LayerSpec], input_dim: usize) -> usize {
    let mut fan_in = input_dim;
    let mut n = 0;
    for l in specs {
        n += fan_in * l.units + if l.use_bias { l.units } else { 0 };
        fan_in = l.units;
    }
    n
}

impl Network {
    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "network has {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params.copy_from_slice(params);
        self.cache = None;
        Ok(())
    }

    /// Weight matrix of layer `l` (`fan_in × units`).
    pub fn weight(&self, l: usize) -> ArrayView2<'_, f64> {
        let (off, fan_in, units) = self.layout(l);
        ArrayView2::from_shape((fan_in, units), &self.params[off..off + fan_in * units])
            .expect("layout matches parameter length")
    }

    pub fn bias(&self, l: usize) -> Option<ArrayView1<'_, f64>> {
        let (off, fan_in, units) = self.layout(l);
        self.layers[l]
            .use_bias
            .then(|| ArrayView1::from(&self.params[off + fan_in * units..off + fan_in * units + units]))
    }

    fn layout(&self, l: usize) -> (usize, usize, usize) {
        layer_offset(&self.layers, self.input_dim, l)
    }

    /// Forward pass; the cache is kept for a following [`backward`](Self::backward).
    pub fn forward(&mut self, inputs: &Array2<f64>) -> Result<Vec<f64>> {
        let cache = forward_with(&self.layers, self.input_dim, &self.params, inputs)?;
        let out = cache.output();
        self.cache = Some(cache);
        Ok(out)
    }

    /// Forward pass without touching the cache.
    pub fn predict(&self, inputs: &Array2<f64>) -> Result<Vec<f64>> {
        Ok(forward_with(&self.layers, self.input_dim, &self.params, inputs)?.output())
    }

    /// Reverse-mode gradients for the inputs of the last [`forward`](Self::forward).
    pub fn backward(&self, upstream: &[f64]) -> Result<NetGradients> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::StaleCache("backward called without a forward pass".into()))?;
        backward_with(&self.layers, self.input_dim, &self.params, cache, upstream)
    }
}

fn layer_offset(layers: &[LayerSpec], input_dim: usize, l: usize) -> (usize, usize, usize) {
    let mut off = 0;
    let mut fan_in = input_dim;
    for layer in &layers[..l] {
        off += fan_in * layer.units + if layer.use_bias { layer.units } else { 0 };
        fan_in = layer.units;
    }
    (off, fan_in, layers[l].units)
}

pub(crate) fn forward_with(
    layers: &[LayerSpec],
    input_dim: usize,
    params: &[f64],
    inputs: &Array2<f64>,
) -> Result<ForwardCache> {
    if inputs.ncols() != input_dim {
        return Err(Error::Dimension(format!(
            "network expects {input_dim} inputs, got {}",
            inputs.ncols()
        )));
    }
    let mut pre = Vec::with_capacity(layers.len());
    let mut post: Vec<Array2<f64>> = Vec::with_capacity(layers.len());
    let mut off = 0;
    let mut fan_in = input_dim;
    for layer in layers {
        let w = ArrayView2::from_shape((fan_in, layer.units), &params[off..off + fan_in * layer.units])
            .map_err(|e| Error::Dimension(e.to_string()))?;
        off += fan_in * layer.units;
        let h = post.last().unwrap_or(inputs);
        let mut z = h.dot(&w);
        if layer.use_bias {
            let b = ArrayView1::from(&params[off..off + layer.units]);
            z += &b;
            off += layer.units;
        }
        let a = z.mapv(|v| layer.activation.apply(v));
        pre.push(z);
        post.push(a);
        fan_in = layer.units;
    }
    Ok(ForwardCache { inputs: inputs.clone(), pre, post })
}

pub(crate) fn backward_with(
    layers: &[LayerSpec],
    input_dim: usize,
    params: &[f64],
    cache: &ForwardCache,
    upstream: &[f64],
) -> Result<NetGradients> {
    let n = cache.inputs.nrows();
    if upstream.len() != n {
        return Err(Error::StaleCache(format!(
            "upstream has {} rows but the cached forward pass had {n}",
            upstream.len()
        )));
    }
    let mut grads = vec![0.0; params.len()];
    // dL/d(post-activation) of the current layer
    let mut delta = Array2::from_shape_vec((n, 1), upstream.to_vec())
        .map_err(|e| Error::Dimension(e.to_string()))?;
    for l in (0..layers.len()).rev() {
        let layer = &layers[l];
        let (off, fan_in, units) = layer_offset(layers, input_dim, l);
        let dz = &delta * &cache.pre[l].mapv(|z| layer.activation.derivative(z));
        let h = if l == 0 { &cache.inputs } else { &cache.post[l - 1] };
        let dw = h.t().dot(&dz);
        grads[off..off + fan_in * units].copy_from_slice(dw.as_slice().expect("standard layout"));
        if layer.use_bias {
            let db: Array1<f64> = dz.sum_axis(Axis(0));
            grads[off + fan_in * units..off + fan_in * units + units]
                .copy_from_slice(db.as_slice().expect("standard layout"));
        }
        let w = ArrayView2::from_shape((fan_in, units), &params[off..off + fan_in * units])
            .map_err(|e| Error::Dimension(e.to_string()))?;
        delta = dz.dot(&w.t());
    }
    Ok(NetGradients { params: grads, inputs: delta })
}
