//! Small fully connected networks with hand-written reverse-mode gradients.
//!
//! Inputs are batched row-wise: an `(n, in)` matrix produces an `(n, out)`
//! matrix. Hidden layers use a rectifier; the output layer is either linear
//! (critic) or `tanh` (actor).
//!
//! [`Mlp::backward`] returns gradients of `sum_i <g_i, y_i>` for an output
//! gradient `g`, so callers fold any batch averaging into `g`.

mod optim;
mod record;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use optim::{adam_step, sgd_step, AdamState, Optimizer, OptimizerKind};
pub use record::{LayerRecord, MlpRecord, OptimizerRecord};

static NEXT_TOKEN: AtomicU64 = AtomicU64::new(1);

fn fresh_token() -> u64 {
    NEXT_TOKEN.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
}

impl Activation {
    fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(T::zero()),
        }
    }

    /// Derivative given the pre-activation `z` and the activation `y`.
    fn derivative<T: Scalar>(self, z: T, y: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Tanh => T::one() - y * y,
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// One affine layer; `weights` is `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weights: Array2::zeros((outputs, inputs)), bias: Array1::zeros(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// Weight initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Init {
    /// Multiplier on the output layer's `1/sqrt(fan_in)` uniform bound.
    pub output_scale: f64,
}

impl Init {
    /// Near-zero initial actions.
    pub fn actor() -> Self {
        Self { output_scale: 1e-3 }
    }

    pub fn critic() -> Self {
        Self { output_scale: 1.0 }
    }
}

/// Rectifier MLP with a configurable output activation.
#[derive(Debug)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
    output: Activation,
    token: u64,
}

impl<T: Scalar> Clone for Mlp<T> {
    fn clone(&self) -> Self {
        Self { layers: self.layers.clone(), output: self.output, token: fresh_token() }
    }
}

impl<T: Scalar> PartialEq for Mlp<T> {
    fn eq(&self, other: &Self) -> bool {
        self.output == other.output && self.layers == other.layers
    }
}

/// Values recorded by [`Mlp::forward`] for the matching backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    token: u64,
    /// Input to each layer.
    inputs: Vec<Array2<T>>,
    /// Pre-activation of each layer.
    pre: Vec<Array2<T>>,
    output: Array2<T>,
}

impl<T> ForwardCache<T> {
    pub fn output(&self) -> &Array2<T> {
        &self.output
    }
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Dense<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(net: &Mlp<T>) -> Self {
        Self { layers: net.layers.iter().map(|l| Dense::zeros(l.inputs(), l.outputs())).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> T {
        self.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Same ordering as [`Mlp::parameters`].
    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.iter().collect()
    }

    fn same_shape(&self, net: &Mlp<T>) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.dim() == l.weights.dim() && g.bias.len() == l.bias.len())
    }
}

impl<T: Scalar> Mlp<T> {
    /// Randomly initialized network with layer widths `widths = [in, hidden.., out]`.
    ///
    /// Hidden layers draw from `U(+-sqrt(6 / fan_in))`; the output layer from
    /// `U(+-output_scale / sqrt(fan_in))`. Biases start at zero.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], output: Activation, init: Init, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths, output)?;
        let last = net.layers.len() - 1;
        for (i, layer) in net.layers.iter_mut().enumerate() {
            let fan_in = T::of(layer.inputs() as f64);
            let bound = if i == last {
                T::of(init.output_scale) / fan_in.sqrt()
            } else {
                (T::of(6.0) / fan_in).sqrt()
            };
            layer.weights.mapv_inplace(|_| rng.random_range(-bound..=bound));
        }
        Ok(net)
    }

    pub fn zeros(widths: &[usize], output: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Shape(format!("layer widths {widths:?} need at least two positive entries")));
        }
        if output == Activation::Relu {
            return Err(Error::InvalidConfig("output activation must be identity or tanh".into()));
        }
        let layers = widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect();
        Ok(Self { layers, output, token: fresh_token() })
    }

    pub fn from_layers(layers: Vec<Dense<T>>, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() || l.inputs() == 0 || l.outputs() == 0 {
                return Err(Error::Shape(format!("layer {i} has inconsistent weight/bias shapes")));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs but the previous layer emits {}",
                    l.inputs(),
                    layers[i - 1].outputs()
                )));
            }
            if !(l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite())) {
                return Err(Error::InvalidInput(format!("layer {i} has non-finite parameters")));
            }
        }
        if output == Activation::Relu {
            return Err(Error::InvalidConfig("output activation must be identity or tanh".into()));
        }
        Ok(Self { layers, output, token: fresh_token() })
    }

    pub fn widths(&self) -> Vec<usize> {
        std::iter::once(self.input_width()).chain(self.layers.iter().map(|l| l.outputs())).collect()
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    /// Mutable access; invalidates outstanding forward caches.
    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        self.token = fresh_token();
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Flattened parameters, layer by layer, weights (row-major) then bias.
    pub fn parameters(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied()).collect()
    }

    pub fn set_parameters(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.parameter_count(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for layer in self.layers_mut() {
            layer.weights.iter_mut().chain(layer.bias.iter_mut()).for_each(|p| *p = it.next().unwrap_or_default());
        }
        Ok(())
    }

    pub fn same_architecture(&self, other: &Self) -> bool {
        self.output == other.output && self.widths() == other.widths()
    }

    fn check_input(&self, input: &ArrayView2<T>) -> Result<()> {
        if input.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "network expects {} inputs per row, got {}",
                self.input_width(),
                input.ncols()
            )));
        }
        Ok(())
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            Activation::Relu
        }
    }

    fn affine(layer: &Dense<T>, x: &ArrayView2<T>) -> Array2<T> {
        let mut z = x.dot(&layer.weights.t());
        z += &layer.bias;
        z
    }

    /// Batched inference without keeping intermediates.
    pub fn predict(&self, input: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(&input)?;
        let mut x = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let act = self.activation(i);
            x = Self::affine(layer, &x.view()).mapv_into(|z| act.apply(z));
        }
        Ok(x)
    }

    /// Single-sample inference.
    pub fn predict_one(&self, input: &[T]) -> Result<Vec<T>> {
        let view = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.predict(view)?.into_raw_vec_and_offset().0)
    }

    /// Batched forward pass that records what [`Mlp::backward`] needs.
    pub fn forward(&self, input: ArrayView2<T>) -> Result<(Array2<T>, ForwardCache<T>)> {
        self.check_input(&input)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let act = self.activation(i);
            let z = Self::affine(layer, &x.view());
            let y = z.mapv(|v| act.apply(v));
            inputs.push(x);
            pre.push(z);
            x = y;
        }
        let cache = ForwardCache { token: self.token, inputs, pre, output: x.clone() };
        Ok((x, cache))
    }

    /// Gradients of `sum(output_gradient * output)` with respect to the
    /// parameters and to the input rows.
    pub fn backward(
        &self,
        cache: &ForwardCache<T>,
        output_gradient: ArrayView2<T>,
    ) -> Result<(Gradients<T>, Array2<T>)> {
        if cache.token != self.token || cache.pre.len() != self.layers.len() {
            return Err(Error::Contract(
                "forward cache does not belong to this network's current parameters".into(),
            ));
        }
        if output_gradient.dim() != cache.output.dim() {
            return Err(Error::Shape(format!(
                "output gradient has shape {:?}, forward output was {:?}",
                output_gradient.dim(),
                cache.output.dim()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let last = self.layers.len() - 1;
        let mut delta = Array2::zeros(output_gradient.dim());
        Zip::from(&mut delta)
            .and(&output_gradient)
            .and(&cache.pre[last])
            .and(&cache.output)
            .for_each(|d, &g, &z, &y| *d = g * self.output.derivative(z, y));

        for i in (0..self.layers.len()).rev() {
            let g = &mut grads.layers[i];
            g.weights = delta.t().dot(&cache.inputs[i]);
            g.bias = delta.sum_axis(Axis(0));
            let upstream = delta.dot(&self.layers[i].weights);
            if i == 0 {
                return Ok((grads, upstream));
            }
            delta = upstream;
            Zip::from(&mut delta)
                .and(&cache.pre[i - 1])
                .for_each(|d, &z| *d = *d * Activation::Relu.derivative(z, T::zero()));
        }
        unreachable!("network has at least one layer")
    }

    fn touch(&mut self) {
        self.token = fresh_token();
    }
}

/// Polyak averaging: `target <- tau * source + (1 - tau) * target`.
pub fn soft_update<T: Scalar>(target: &mut Mlp<T>, source: &Mlp<T>, tau: T) -> Result<()> {
    if !target.same_architecture(source) {
        return Err(Error::Shape(format!(
            "soft update between {:?} and {:?}",
            target.widths(),
            source.widths()
        )));
    }
    if !(tau >= T::zero() && tau <= T::one()) {
        return Err(Error::InvalidConfig(format!("tau must lie in [0, 1], got {tau}")));
    }
    let keep = T::one() - tau;
    for (t, s) in target.layers_mut().iter_mut().zip(&source.layers) {
        Zip::from(&mut t.weights).and(&s.weights).for_each(|t, &s| *t = tau * s + keep * *t);
        Zip::from(&mut t.bias).and(&s.bias).for_each(|t, &s| *t = tau * s + keep * *t);
    }
    Ok(())
}
