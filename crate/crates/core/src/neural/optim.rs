use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

/// Bias-corrected first/second moment estimates, one slot per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub(crate) first: Gradients<T>,
    pub(crate) second: Gradients<T>,
    pub(crate) step: u64,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> AdamState<T> {
    /// `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn new(net: &Mlp<T>) -> Self {
        Self::with_hyperparameters(net, T::of(0.9), T::of(0.999), T::of(1e-8))
    }

    pub fn with_hyperparameters(net: &Mlp<T>, beta1: T, beta2: T, epsilon: T) -> Self {
        Self { first: Gradients::zeros_like(net), second: Gradients::zeros_like(net), step: 0, beta1, beta2, epsilon }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

fn check<T: Scalar>(net: &Mlp<T>, grads: &Gradients<T>) -> Result<()> {
    if !grads.same_shape(net) {
        return Err(Error::Shape("gradient shapes do not match the network".into()));
    }
    if !grads.is_finite() {
        return Err(Error::Divergence("non-finite gradient".into()));
    }
    Ok(())
}

/// One Adam update of `net` in place.
pub fn adam_step<T: Scalar>(net: &mut Mlp<T>, grads: &Gradients<T>, state: &mut AdamState<T>, lr: T) -> Result<()> {
    check(net, grads)?;
    if !state.first.same_shape(net) {
        return Err(Error::Shape("optimizer state does not match the network".into()));
    }
    state.step += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let t = i32::try_from(state.step).unwrap_or(i32::MAX);
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    let one = T::one();
    let update = |p: &mut T, &g: &T, m: &mut T, v: &mut T| {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    net.touch();
    for (i, layer) in net.layers.iter_mut().enumerate() {
        let (m, v, g) = (&mut state.first.layers[i], &mut state.second.layers[i], &grads.layers[i]);
        Zip::from(&mut layer.weights).and(&g.weights).and(&mut m.weights).and(&mut v.weights).for_each(update);
        Zip::from(&mut layer.bias).and(&g.bias).and(&mut m.bias).and(&mut v.bias).for_each(update);
    }
    Ok(())
}

/// Plain gradient descent.
pub fn sgd_step<T: Scalar>(net: &mut Mlp<T>, grads: &Gradients<T>, lr: T) -> Result<()> {
    check(net, grads)?;
    net.touch();
    for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
        layer.weights.scaled_add(-lr, &g.weights);
        layer.bias.scaled_add(-lr, &g.bias);
    }
    Ok(())
}

/// Optimizer bound to one network.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer<T> {
    Adam(AdamState<T>),
    Sgd,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, net: &Mlp<T>) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(net)),
            OptimizerKind::Sgd => Optimizer::Sgd,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            Optimizer::Adam(_) => OptimizerKind::Adam,
            Optimizer::Sgd => OptimizerKind::Sgd,
        }
    }

    pub fn apply(&mut self, net: &mut Mlp<T>, grads: &Gradients<T>, lr: T) -> Result<()> {
        match self {
            Optimizer::Adam(state) => adam_step(net, grads, state, lr),
            Optimizer::Sgd => sgd_step(net, grads, lr),
        }
    }
}
