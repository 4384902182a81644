//! Epoch loop, evaluation protocol, metrics, checkpoints and the
//! curriculum-versus-baseline comparison.
//!
//! One epoch: look up the precision for the epoch (or the fixed baseline
//! precision), collect `M` exploratory episodes of at most `T` steps into
//! the replay buffer, then run `K` DDPG updates on batches of `N`.

mod checkpoint;
mod compare;
mod config;
mod metrics;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{DdpgAgent, ReplayBuffer, Transition};
use crate::curriculum::DecaySchedule;
use crate::environment::{Action, AugmentedGoal, ReachEnv, State, max_joint_increment};
use crate::error::{Error, Result};
use crate::kinematics::{JointVector, DOF};
use crate::neural::Mlp;
use crate::scalar::Scalar;

pub use checkpoint::{CheckpointDocument, CHECKPOINT_VERSION};
pub use compare::{compare, ArmReport, ComparisonReport, RunSummary};
pub use config::{
    desk_limits, AgentSection, ArmSection, CheckpointSection, CurriculumSection, EvaluationSection, MetricsSection,
    Profile, RunConfig, TrainingSection,
};
pub use metrics::{load_metrics, save_metrics, write_metrics_csv, MetricsRecord, METRICS_HEADER};

/// What a policy sees at every evaluation step.
pub struct Observation<'a, T> {
    pub state: &'a State<T>,
    pub goal: &'a AugmentedGoal<T>,
    /// Joint configuration the goal was generated from. Only scripted
    /// reference policies look at this.
    pub goal_joints: &'a JointVector<T>,
}

pub trait Policy<T: Scalar> {
    fn act(&self, obs: &Observation<'_, T>) -> Result<Action<T>>;
}

impl<T: Scalar> Policy<T> for DdpgAgent<T> {
    fn act(&self, obs: &Observation<'_, T>) -> Result<Action<T>> {
        self.policy(&obs.state.to_array(), &obs.goal.to_array())
    }
}

/// Frozen copy of an actor network.
#[derive(Debug, Clone)]
pub struct ActorSnapshot<T: Scalar>(pub Mlp<T>);

impl<T: Scalar> Policy<T> for ActorSnapshot<T> {
    fn act(&self, obs: &Observation<'_, T>) -> Result<Action<T>> {
        let input: Vec<T> = obs.state.to_array().into_iter().chain(obs.goal.to_array()).collect();
        let out = self.0.predict_one(&input)?;
        let mut values = [T::zero(); DOF];
        values.copy_from_slice(&out);
        Ok(Action::clamped(values))
    }
}

/// Drives the joints straight toward the goal's generating configuration.
#[derive(Debug, Clone, Copy, Default)]
pub struct GoalReplayPolicy;

impl<T: Scalar> Policy<T> for GoalReplayPolicy {
    fn act(&self, obs: &Observation<'_, T>) -> Result<Action<T>> {
        let step = max_joint_increment::<T>();
        let now = obs.state.joints().0;
        let target = obs.goal_joints.0;
        Ok(Action::clamped(std::array::from_fn(|i| (target[i] - now[i]) / step)))
    }
}

/// Never moves.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl<T: Scalar> Policy<T> for ZeroPolicy {
    fn act(&self, _obs: &Observation<'_, T>) -> Result<Action<T>> {
        Ok(Action::zeros())
    }
}

/// Fraction of `n_goals` fresh goals the policy reaches within the
/// episode step cap at precision `epsilon`.
pub fn evaluate<T, P, R>(policy: &P, env: &ReachEnv<T>, n_goals: usize, epsilon: T, rng: &mut R) -> Result<f64>
where
    T: Scalar,
    P: Policy<T> + ?Sized,
    R: Rng + ?Sized,
{
    if n_goals == 0 {
        return Err(Error::InvalidInput("evaluation needs at least one goal".into()));
    }
    let mut env = env.clone();
    let mut successes = 0usize;
    for _ in 0..n_goals {
        env.reset(rng, epsilon)?;
        while !env.episode_over() {
            let goal = *env.goal();
            let goal_joints = *env.goal_joints();
            let obs = Observation { state: env.state(), goal: &goal, goal_joints: &goal_joints };
            let action = policy.act(&obs)?;
            if env.step(&action)?.success {
                successes += 1;
            }
        }
    }
    Ok(successes as f64 / n_goals as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub epoch: u64,
    pub epsilon: f64,
    pub steps: u64,
    pub episodes: usize,
    pub successes: usize,
    pub mean_reward: f64,
}

/// Run metadata written next to the metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub scalar: String,
    pub config_hash: String,
    pub resumed_from: Option<PathBuf>,
    pub resumed_at_epoch: Option<u64>,
    /// False when a resume started from an empty buffer; the run then
    /// diverges from an uninterrupted one.
    pub buffer_restored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) enum RngStream {
    Init = 0,
    Rollout = 1,
    Replay = 2,
    Eval = 3,
}

pub(crate) fn stream_rng(seed: u64, stream: RngStream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Goal stream for standalone evaluations of a run with this seed.
pub fn stream_eval_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, RngStream::Eval)
}

pub struct Trainer<T: Scalar> {
    config: RunConfig,
    schedule: Option<DecaySchedule<T>>,
    env: ReachEnv<T>,
    agent: DdpgAgent<T>,
    buffer: ReplayBuffer<T>,
    rollout_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    epoch: u64,
    acc_steps: u64,
    metrics: Vec<MetricsRecord>,
    elapsed_before: f64,
    clock: Instant,
    metadata: RunMetadata,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let schedule = if config.curriculum.baseline { None } else { Some(config.schedule()?) };
        let env = ReachEnv::new(config.arm_model()?, config.reward, config.training.steps_per_episode)?;
        let agent = DdpgAgent::new(config.agent_config(), &mut stream_rng(config.seed, RngStream::Init))?;
        let buffer = ReplayBuffer::new(config.training.buffer_capacity)?;
        let metadata = RunMetadata {
            seed: config.seed,
            scalar: T::NAME.to_string(),
            config_hash: config.hash(),
            resumed_from: None,
            resumed_at_epoch: None,
            buffer_restored: true,
        };
        Ok(Self {
            schedule,
            env,
            agent,
            buffer,
            rollout_rng: stream_rng(config.seed, RngStream::Rollout),
            replay_rng: stream_rng(config.seed, RngStream::Replay),
            eval_rng: stream_rng(config.seed, RngStream::Eval),
            epoch: 0,
            acc_steps: 0,
            metrics: Vec::new(),
            elapsed_before: 0.0,
            clock: Instant::now(),
            metadata,
            config,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn agent(&self) -> &DdpgAgent<T> {
        &self.agent
    }

    pub fn agent_mut(&mut self) -> &mut DdpgAgent<T> {
        &mut self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer<T> {
        &self.buffer
    }

    pub fn env(&self) -> &ReachEnv<T> {
        &self.env
    }

    /// Index of the next epoch to run.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn accumulated_steps(&self) -> u64 {
        self.acc_steps
    }

    pub fn metrics(&self) -> &[MetricsRecord] {
        &self.metrics
    }

    pub fn metadata(&self) -> &RunMetadata {
        &self.metadata
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.training.epochs
    }

    /// Training precision for epoch `k`.
    pub fn epsilon_at(&self, k: u64) -> T {
        match &self.schedule {
            Some(s) => s.precision_at(k),
            None => T::of(self.config.training_epsilon_fixed()),
        }
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.elapsed_before + self.clock.elapsed().as_secs_f64()
    }

    /// Evaluates the current deterministic policy on the trainer's own
    /// evaluation stream. Never touches the replay buffer or parameters.
    pub fn evaluate(&mut self, n_goals: usize, epsilon: T) -> Result<f64> {
        evaluate(&self.agent, &self.env, n_goals, epsilon, &mut self.eval_rng)
    }

    fn collect_episode(&mut self, epsilon: T) -> Result<(u64, T, bool)> {
        let (_, goal) = self.env.reset(&mut self.rollout_rng, epsilon)?;
        let goal_vec = goal.to_array();
        let mut ret = T::zero();
        let mut steps = 0;
        let mut reached = false;
        while !self.env.episode_over() {
            let state = self.env.state().to_array();
            let action = self.agent.select_action(&state, &goal_vec, &mut self.rollout_rng, true)?;
            let result = self.env.step(&action)?;
            self.buffer.push(Transition {
                state,
                action: action.0,
                next_state: result.next_state.to_array(),
                reward: result.reward,
                goal: goal_vec,
                terminal: result.success,
            });
            ret += result.reward;
            steps += 1;
            reached |= result.success;
        }
        Ok((steps, ret, reached))
    }

    /// Runs one epoch and appends a metrics row when the cadence says so.
    pub fn run_epoch(&mut self) -> Result<EpochSummary> {
        if self.is_finished() {
            return Err(Error::Contract("all configured epochs have already run".into()));
        }
        let k = self.epoch;
        let epsilon = self.epsilon_at(k);
        let t = &self.config.training;
        let (episodes, train_steps, batch_size) = (t.episodes_per_epoch, t.train_steps_per_epoch, t.batch_size);

        let mut steps = 0;
        let mut total_return = 0.0;
        let mut successes = 0;
        for _ in 0..episodes {
            let (n, ret, reached) = self.collect_episode(epsilon)?;
            steps += n;
            total_return += ret.to_f64_lossy();
            successes += usize::from(reached);
        }
        self.acc_steps += steps;

        for _ in 0..train_steps {
            let batch = self.buffer.sample(&mut self.replay_rng, batch_size)?;
            self.agent.train_step(&batch).map_err(|e| match e {
                Error::Divergence(msg) => Error::Divergence(format!("epoch {k}: {msg}")),
                other => other,
            })?;
        }
        self.agent.finish_epoch();
        self.epoch += 1;

        let summary = EpochSummary {
            epoch: k,
            epsilon: epsilon.to_f64_lossy(),
            steps,
            episodes,
            successes,
            mean_reward: total_return / episodes as f64,
        };
        self.record_metrics(&summary)?;
        Ok(summary)
    }

    fn record_metrics(&mut self, summary: &EpochSummary) -> Result<()> {
        let done = summary.epoch + 1;
        let last = self.is_finished();
        if !(last || done % self.config.metrics.every_epochs == 0) {
            return Ok(());
        }
        let eval_success = if last || done % self.config.evaluation.every_epochs == 0 {
            let eps = self.epsilon_at(summary.epoch);
            Some(self.evaluate(self.config.evaluation.goals, eps)?)
        } else {
            None
        };
        let wall_s = self.config.metrics.wall_clock.then(|| self.elapsed_seconds());
        self.metrics.push(MetricsRecord {
            epoch: summary.epoch,
            epsilon: summary.epsilon,
            acc_steps: self.acc_steps,
            eval_success,
            mean_reward: summary.mean_reward,
            wall_s,
        });
        Ok(())
    }

    /// Runs every remaining epoch; with `out_dir` set, writes metrics,
    /// metadata and checkpoints there. On divergence the most recent
    /// periodic checkpoint is left in place and the metrics collected so
    /// far are still written.
    pub fn run(&mut self, out_dir: Option<&Path>) -> Result<()> {
        if let Some(dir) = out_dir {
            std::fs::create_dir_all(dir)?;
            self.write_metadata(dir)?;
        }
        let every = self.config.checkpoint.every_epochs;
        while !self.is_finished() {
            if let Err(e) = self.run_epoch() {
                if let Some(dir) = out_dir {
                    save_metrics(dir.join("metrics.csv"), &self.metrics)?;
                }
                return Err(e);
            }
            if let Some(dir) = out_dir {
                if every > 0 && self.epoch % every == 0 && !self.is_finished() {
                    self.save_checkpoint(dir.join("checkpoint.json"), self.config.checkpoint.include_buffer)?;
                }
            }
        }
        if let Some(dir) = out_dir {
            save_metrics(dir.join("metrics.csv"), &self.metrics)?;
            self.save_checkpoint(dir.join("checkpoint.json"), self.config.checkpoint.include_buffer)?;
        }
        Ok(())
    }

    pub fn write_metadata(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.metadata)?;
        std::fs::write(dir.join("run.json"), text)?;
        Ok(())
    }

    /// Success rate at the shared final precision, on a stream independent
    /// of the training-time evaluations.
    pub fn final_evaluation(&self) -> Result<f64> {
        let mut rng = stream_rng(self.config.seed, RngStream::Eval);
        rng.set_word_pos(1 << 40);
        let eps = T::of(self.config.evaluation.final_epsilon);
        evaluate(&self.agent, &self.env, self.config.evaluation.goals, eps, &mut rng)
    }
}

/// Trains `config` to completion.
pub fn train<T: Scalar>(config: RunConfig, out_dir: Option<&Path>) -> Result<Trainer<T>> {
    let mut trainer = Trainer::new(config)?;
    trainer.run(out_dir)?;
    Ok(trainer)
}
