//! Run configuration, read from TOML. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::AgentConfig;
use crate::curriculum::DecaySchedule;
use crate::environment::{ArmModel, RewardMode};
use crate::error::{Error, Result};
use crate::kinematics::{DhChain, DistanceWeights, JointLimits, UR5E_DH};
use crate::neural::OptimizerKind;
use crate::scalar::Scalar;

use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Hyperparameters of the full-scale experiments.
    Paper,
    /// Shrunken profile for a single desktop CPU.
    Desk,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Self::Paper),
            "desk" => Ok(Self::Desk),
            other => Err(Error::InvalidConfig(format!("unknown profile '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurriculumSection {
    pub e0: f64,
    pub em: f64,
    /// Decay length in epochs.
    pub s: u64,
    pub alpha: f64,
    /// Train at a fixed precision instead of following the decay.
    #[serde(default)]
    pub baseline: bool,
    /// Precision used when `baseline` is set; defaults to `em`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub tau: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub sigma: f64,
    pub explore_start: f64,
    pub explore_end: f64,
    /// Defaults to half of the training epochs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explore_anneal_epochs: Option<u64>,
    #[serde(default)]
    pub optimizer: OptimizerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: u64,
    pub episodes_per_epoch: usize,
    pub steps_per_episode: usize,
    pub train_steps_per_epoch: usize,
    pub batch_size: usize,
    pub buffer_capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationSection {
    pub every_epochs: u64,
    pub goals: usize,
    /// Shared precision for the final head-to-head evaluation.
    pub final_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub every_epochs: u64,
    /// Fill the `wall_s` column. Off makes metrics files byte-reproducible.
    #[serde(default = "default_true")]
    pub wall_clock: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointSection {
    /// 0 writes only the final checkpoint.
    pub every_epochs: u64,
    pub include_buffer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSection {
    /// Six `[a, d, alpha, theta0]` rows.
    pub dh: Vec<[f64; 4]>,
    /// Six `[lo, hi]` intervals; a collapsed interval freezes the joint.
    pub limits: Vec<[f64; 2]>,
    pub position_weight: f64,
    pub orientation_weight: f64,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub reward: RewardMode,
    pub curriculum: CurriculumSection,
    pub agent: AgentSection,
    pub training: TrainingSection,
    pub evaluation: EvaluationSection,
    pub metrics: MetricsSection,
    pub checkpoint: CheckpointSection,
    pub arm: ArmSection,
}

impl RunConfig {
    pub fn profile(profile: Profile, reward: RewardMode) -> Self {
        match profile {
            Profile::Paper => Self::paper(reward),
            Profile::Desk => Self::desk(reward),
        }
    }

    /// Full-scale hyperparameters. `em` and the final evaluation precision
    /// are not published; both default to 0.01.
    pub fn paper(reward: RewardMode) -> Self {
        let (e0, s) = match reward {
            RewardMode::Dense => (0.15, 1000),
            RewardMode::Sparse => (0.25, 2500),
        };
        Self {
            seed: 0,
            reward,
            curriculum: CurriculumSection { e0, em: 0.01, s, alpha: 0.8, baseline: false, baseline_epsilon: None },
            agent: AgentSection {
                hidden: vec![512, 256, 64],
                gamma: 0.98,
                tau: 0.01,
                actor_lr: 1e-4,
                critic_lr: 1e-3,
                sigma: 0.1,
                explore_start: 0.2,
                explore_end: 0.05,
                explore_anneal_epochs: None,
                optimizer: OptimizerKind::Adam,
            },
            training: TrainingSection {
                epochs: 3000,
                episodes_per_epoch: 10,
                steps_per_episode: 100,
                train_steps_per_epoch: 64,
                batch_size: 128,
                buffer_capacity: 5_000_000,
            },
            evaluation: EvaluationSection { every_epochs: 100, goals: 100, final_epsilon: 0.01 },
            metrics: MetricsSection { every_epochs: 10, wall_clock: true },
            checkpoint: CheckpointSection { every_epochs: 500, include_buffer: false },
            arm: ArmSection {
                dh: UR5E_DH.to_vec(),
                limits: vec![[-PI, PI]; 6],
                position_weight: 0.5,
                orientation_weight: 0.5,
            },
        }
    }

    /// Desktop-scale profile: joints 1-3 active, joint 4 coupled to them,
    /// joints 5 and 6 frozen at their start angles; (64, 64) networks;
    /// 600 epochs of 10 episodes of at most 50 steps; decay to 0.05 over 400
    /// epochs.
    pub fn desk(reward: RewardMode) -> Self {
        let mut cfg = Self::paper(reward);
        cfg.curriculum.em = 0.05;
        cfg.curriculum.s = 400;
        cfg.agent.hidden = vec![64, 64];
        cfg.training = TrainingSection {
            epochs: 600,
            episodes_per_epoch: 10,
            steps_per_episode: 50,
            train_steps_per_epoch: 64,
            batch_size: 128,
            buffer_capacity: 1_000_000,
        };
        cfg.evaluation = EvaluationSection { every_epochs: 100, goals: 100, final_epsilon: 0.05 };
        cfg.checkpoint = CheckpointSection { every_epochs: 0, include_buffer: true };
        cfg.arm.limits = desk_limits();
        cfg
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.training;
        let positive = [
            t.epochs as usize,
            t.episodes_per_epoch,
            t.steps_per_episode,
            t.batch_size,
            t.buffer_capacity,
            self.evaluation.goals,
            self.evaluation.every_epochs as usize,
            self.metrics.every_epochs as usize,
        ];
        if positive.contains(&0) {
            return Err(Error::InvalidConfig(
                "epochs, episodes, steps, batch size, buffer capacity, goal count and cadences must be positive".into(),
            ));
        }
        if !self.curriculum.baseline {
            self.schedule::<f64>()?;
        }
        let eps = self.training_epsilon_fixed();
        if !(eps.is_finite() && eps > 0.0) || !(self.evaluation.final_epsilon > 0.0) {
            return Err(Error::InvalidConfig("precisions must be positive".into()));
        }
        self.agent_config::<f64>().validate()?;
        self.arm_model::<f64>()?;
        Ok(())
    }

    pub fn schedule<T: Scalar>(&self) -> Result<DecaySchedule<T>> {
        let c = &self.curriculum;
        DecaySchedule::new(T::of(c.e0), T::of(c.em), c.s, T::of(c.alpha))
    }

    /// Precision used throughout a baseline run.
    pub fn training_epsilon_fixed(&self) -> f64 {
        self.curriculum.baseline_epsilon.unwrap_or(self.curriculum.em)
    }

    pub fn agent_config<T: Scalar>(&self) -> AgentConfig<T> {
        let a = &self.agent;
        AgentConfig {
            hidden: a.hidden.clone(),
            gamma: T::of(a.gamma),
            tau: T::of(a.tau),
            actor_lr: T::of(a.actor_lr),
            critic_lr: T::of(a.critic_lr),
            sigma: T::of(a.sigma),
            explore_start: T::of(a.explore_start),
            explore_end: T::of(a.explore_end),
            explore_anneal_epochs: a.explore_anneal_epochs.unwrap_or(self.training.epochs / 2),
            optimizer: a.optimizer,
        }
    }

    pub fn arm_model<T: Scalar>(&self) -> Result<ArmModel<T>> {
        Ok(ArmModel {
            chain: DhChain::from_rows(&self.arm.dh)?,
            limits: JointLimits::from_pairs(&self.arm.limits)?,
            weights: DistanceWeights::new(T::of(self.arm.position_weight), T::of(self.arm.orientation_weight))?,
        })
    }

    /// Copy configured as the fixed-precision baseline.
    pub fn as_baseline(&self) -> Self {
        let mut cfg = self.clone();
        cfg.curriculum.baseline = true;
        cfg
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hash_json(&serde_json::to_value(self).expect("config serializes"))
    }

    /// Hash of everything except the curriculum section and seed.
    pub fn hash_without_curriculum(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("curriculum");
            obj.remove("seed");
        }
        hash_json(&v)
    }
}

fn hash_json(v: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(v.to_string().as_bytes()))
}

/// Joint intervals of the desk profile.
///
/// Inside this box the coupled joint 4 stays in `[-pi/4, pi]` and is never
/// clamped, and joint 1 stays clear of the angles where the end-effector yaw
/// wraps around.
pub fn desk_limits() -> Vec<[f64; 2]> {
    let q0 = [-FRAC_PI_2, -FRAC_PI_2, 0.0, FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2];
    let eighth = PI / 8.0;
    vec![
        [q0[0] - 3.0 * eighth, q0[0] + 3.0 * eighth],
        [q0[1] - 2.0 * eighth, q0[1] + 3.0 * eighth],
        [q0[2] - 2.0 * eighth, q0[2] + 3.0 * eighth],
        [-PI, PI],
        [q0[4], q0[4]],
        [q0[5], q0[5]],
    ]
}
