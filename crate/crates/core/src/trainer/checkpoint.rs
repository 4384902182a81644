//! Single-document JSON checkpoints.
//!
//! A document carries the format version, scalar type, full run config,
//! agent networks and optimizer moments, the three RNG streams, counters,
//! metrics so far, and optionally the replay buffer contents.

use std::path::Path;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MetricsRecord, RunConfig, Trainer};
use crate::agent::{AgentRecord, DdpgAgent, ReplayBuffer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferMeta {
    pub capacity: usize,
    pub len: usize,
    pub cursor: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RngStates {
    pub rollout: ChaCha8Rng,
    pub replay: ChaCha8Rng,
    pub eval: ChaCha8Rng,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct CheckpointDocument<T> {
    pub format_version: u32,
    pub scalar: String,
    pub config: RunConfig,
    pub epoch: u64,
    pub acc_steps: u64,
    pub elapsed_s: f64,
    pub agent: AgentRecord<T>,
    pub rng: RngStates,
    pub buffer_meta: BufferMeta,
    pub buffer: Option<ReplayBuffer<T>>,
    pub metrics: Vec<MetricsRecord>,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

impl<T: Scalar> Trainer<T> {
    pub fn to_checkpoint(&self, include_buffer: bool) -> CheckpointDocument<T> {
        CheckpointDocument {
            format_version: CHECKPOINT_VERSION,
            scalar: T::NAME.to_string(),
            config: self.config.clone(),
            epoch: self.epoch,
            acc_steps: self.acc_steps,
            elapsed_s: self.elapsed_seconds(),
            agent: self.agent.to_record(),
            rng: RngStates {
                rollout: self.rollout_rng.clone(),
                replay: self.replay_rng.clone(),
                eval: self.eval_rng.clone(),
            },
            buffer_meta: BufferMeta {
                capacity: self.buffer.capacity(),
                len: self.buffer.len(),
                cursor: self.buffer.cursor(),
            },
            buffer: include_buffer.then(|| self.buffer.clone()),
            metrics: self.metrics.clone(),
        }
    }

    /// Writes the checkpoint through a temporary file so a crash never
    /// leaves a truncated document behind.
    pub fn save_checkpoint(&self, path: impl AsRef<Path>, include_buffer: bool) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.tmp");
        let file = std::fs::File::create(&tmp)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &self.to_checkpoint(include_buffer))?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn from_checkpoint(doc: CheckpointDocument<T>) -> Result<Self> {
        if doc.format_version != CHECKPOINT_VERSION {
            return Err(Error::Version { found: doc.format_version, expected: CHECKPOINT_VERSION });
        }
        if doc.scalar != T::NAME {
            return Err(Error::Checkpoint(format!("checkpoint holds {} values, expected {}", doc.scalar, T::NAME)));
        }
        let mut trainer = Trainer::new(doc.config.clone()).map_err(|e| Error::Checkpoint(e.to_string()))?;
        trainer.agent = DdpgAgent::from_record(doc.config.agent_config(), &doc.agent)?;
        let restored = doc.buffer.is_some();
        trainer.buffer = match doc.buffer {
            Some(buffer) => {
                buffer.validate()?;
                if buffer.capacity() != doc.buffer_meta.capacity || buffer.len() != doc.buffer_meta.len {
                    return Err(Error::Checkpoint("buffer contents disagree with buffer metadata".into()));
                }
                buffer
            }
            None => ReplayBuffer::new(doc.buffer_meta.capacity)?,
        };
        if doc.epoch > doc.config.training.epochs {
            return Err(Error::Checkpoint(format!(
                "checkpoint epoch {} exceeds configured {}",
                doc.epoch, doc.config.training.epochs
            )));
        }
        trainer.rollout_rng = doc.rng.rollout;
        trainer.replay_rng = doc.rng.replay;
        trainer.eval_rng = doc.rng.eval;
        trainer.epoch = doc.epoch;
        trainer.acc_steps = doc.acc_steps;
        trainer.metrics = doc.metrics;
        trainer.elapsed_before = doc.elapsed_s;
        trainer.clock = Instant::now();
        trainer.metadata.resumed_at_epoch = Some(doc.epoch);
        trainer.metadata.buffer_restored = restored;
        Ok(trainer)
    }

    pub fn checkpoint_from_str(text: &str) -> Result<Self> {
        let probe: VersionProbe =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
        if probe.format_version != CHECKPOINT_VERSION {
            return Err(Error::Version { found: probe.format_version, expected: CHECKPOINT_VERSION });
        }
        let doc: CheckpointDocument<T> =
            serde_json::from_str(text).map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))?;
        Self::from_checkpoint(doc)
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut trainer = Self::checkpoint_from_str(&std::fs::read_to_string(path)?)?;
        trainer.metadata.resumed_from = Some(path.to_path_buf());
        Ok(trainer)
    }
}
