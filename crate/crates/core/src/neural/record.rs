//! Serializable mirrors of networks and optimizer state.
//!
//! Weight matrices are stored row-major with shape `(out, in)`.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, AdamState, Dense, Gradients, Mlp, Optimizer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpRecord<T> {
    pub widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub layers: Vec<LayerRecord<T>>,
}

fn layers_to_records<T: Scalar>(layers: &[Dense<T>]) -> Vec<LayerRecord<T>> {
    layers
        .iter()
        .map(|l| LayerRecord { weights: l.weights.iter().copied().collect(), bias: l.bias.to_vec() })
        .collect()
}

fn records_to_layers<T: Scalar>(widths: &[usize], records: &[LayerRecord<T>]) -> Result<Vec<Dense<T>>> {
    if widths.len() < 2 || records.len() + 1 != widths.len() {
        return Err(Error::Checkpoint(format!(
            "{} layer records do not fit widths {widths:?}",
            records.len()
        )));
    }
    records
        .iter()
        .zip(widths.windows(2))
        .map(|(r, w)| {
            let weights = Array2::from_shape_vec((w[1], w[0]), r.weights.clone())
                .map_err(|e| Error::Checkpoint(format!("weight array: {e}")))?;
            if r.bias.len() != w[1] {
                return Err(Error::Checkpoint(format!("bias has {} entries, expected {}", r.bias.len(), w[1])));
            }
            Ok(Dense { weights, bias: Array1::from_vec(r.bias.clone()) })
        })
        .collect()
}

impl<T: Scalar> Mlp<T> {
    pub fn to_record(&self) -> MlpRecord<T> {
        MlpRecord {
            widths: self.widths(),
            hidden_activation: Activation::Relu,
            output_activation: self.output,
            layers: layers_to_records(&self.layers),
        }
    }

    pub fn from_record(record: &MlpRecord<T>) -> Result<Self> {
        if record.hidden_activation != Activation::Relu {
            return Err(Error::Checkpoint("only rectifier hidden layers are supported".into()));
        }
        let layers = records_to_layers(&record.widths, &record.layers)?;
        Mlp::from_layers(layers, record.output_activation).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum OptimizerRecord<T> {
    Adam {
        beta1: T,
        beta2: T,
        epsilon: T,
        step: u64,
        first: Vec<LayerRecord<T>>,
        second: Vec<LayerRecord<T>>,
    },
    Sgd,
}

impl<T: Scalar> Optimizer<T> {
    pub fn to_record(&self) -> OptimizerRecord<T> {
        match self {
            Optimizer::Adam(s) => OptimizerRecord::Adam {
                beta1: s.beta1,
                beta2: s.beta2,
                epsilon: s.epsilon,
                step: s.step,
                first: layers_to_records(&s.first.layers),
                second: layers_to_records(&s.second.layers),
            },
            Optimizer::Sgd => OptimizerRecord::Sgd,
        }
    }

    /// Rebuilds optimizer state for `net`, checking that shapes agree.
    pub fn from_record(record: &OptimizerRecord<T>, net: &Mlp<T>) -> Result<Self> {
        match record {
            OptimizerRecord::Sgd => Ok(Optimizer::Sgd),
            OptimizerRecord::Adam { beta1, beta2, epsilon, step, first, second } => {
                let widths = net.widths();
                let first = Gradients { layers: records_to_layers(&widths, first)? };
                let second = Gradients { layers: records_to_layers(&widths, second)? };
                Ok(Optimizer::Adam(AdamState {
                    first,
                    second,
                    step: *step,
                    beta1: *beta1,
                    beta2: *beta2,
                    epsilon: *epsilon,
                }))
            }
        }
    }
}
