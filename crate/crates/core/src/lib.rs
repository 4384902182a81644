//! Goal-conditioned DDPG for reaching end-effector poses with a kinematic
//! 6-DOF arm, trained under a precision-decay curriculum: the tolerance a
//! reach must meet starts loose and shrinks epoch by epoch.
//!
//! Every numeric type is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below pin the double-precision versions used by the CLI.

pub mod agent;
pub mod curriculum;
pub mod environment;
pub mod error;
pub mod kinematics;
pub mod neural;
pub mod scalar;
pub mod trainer;

pub use agent::{AgentConfig, DdpgAgent, ReplayBuffer, Transition};
pub use curriculum::{augment_goal, DecaySchedule};
pub use environment::{Action, ArmModel, AugmentedGoal, ReachEnv, RewardMode, State, StepResult};
pub use error::{Error, Result};
pub use kinematics::{forward_kinematics, pose_distance, DhChain, JointLimits, JointVector, Pose};
pub use neural::{Activation, Mlp};
pub use scalar::Scalar;
pub use trainer::{compare, evaluate, train, MetricsRecord, Policy, RunConfig, Trainer};

pub type Pose64 = Pose<f64>;
pub type JointVector64 = JointVector<f64>;
pub type DecaySchedule64 = DecaySchedule<f64>;
pub type Mlp64 = Mlp<f64>;
pub type Mlp32 = Mlp<f32>;
pub type DdpgAgent64 = DdpgAgent<f64>;
pub type Trainer64 = Trainer<f64>;
pub type Trainer32 = Trainer<f32>;
