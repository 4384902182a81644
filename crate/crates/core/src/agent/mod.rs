//! Goal-conditioned DDPG.
//!
//! The actor maps `[state, goal]` (12 + 7 inputs) to six `tanh`-bounded
//! joint increments; the critic maps `[state, action, goal]` (12 + 6 + 7) to
//! a scalar value. The goal's last component is the required precision, so
//! both networks see how strict the current task is.

mod replay;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{Action, ACTION_DIM, GOAL_DIM, STATE_DIM};
use crate::error::{Error, Result};
use crate::neural::{soft_update, Activation, Gradients, Init, Mlp, MlpRecord, Optimizer, OptimizerKind, OptimizerRecord};
use crate::scalar::Scalar;

pub use replay::{Batch, ReplayBuffer, Transition};

pub const ACTOR_INPUT: usize = STATE_DIM + GOAL_DIM;
pub const CRITIC_INPUT: usize = STATE_DIM + ACTION_DIM + GOAL_DIM;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig<T> {
    pub hidden: Vec<usize>,
    pub gamma: T,
    pub tau: T,
    pub actor_lr: T,
    pub critic_lr: T,
    /// Gaussian noise added to policy actions while exploring.
    pub sigma: T,
    /// Probability of a uniformly random action, annealed linearly from
    /// `explore_start` to `explore_end` over `explore_anneal_epochs`.
    pub explore_start: T,
    pub explore_end: T,
    pub explore_anneal_epochs: u64,
    pub optimizer: OptimizerKind,
}

impl<T: Scalar> Default for AgentConfig<T> {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            gamma: T::of(0.98),
            tau: T::of(0.01),
            actor_lr: T::of(1e-4),
            critic_lr: T::of(1e-3),
            sigma: T::of(0.1),
            explore_start: T::of(0.2),
            explore_end: T::of(0.05),
            explore_anneal_epochs: 1500,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl<T: Scalar> AgentConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if self.hidden.contains(&0) {
            return Err(Error::InvalidConfig("hidden widths must be positive".into()));
        }
        if !(unit(self.gamma) && unit(self.tau) && unit(self.explore_start) && unit(self.explore_end)) {
            return Err(Error::InvalidConfig("gamma, tau and exploration probabilities must lie in [0, 1]".into()));
        }
        if !(self.actor_lr > T::zero() && self.critic_lr > T::zero() && self.sigma >= T::zero()) {
            return Err(Error::InvalidConfig("learning rates must be positive and sigma non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats<T> {
    pub critic_loss: T,
    pub mean_q: T,
}

#[derive(Debug, Clone)]
pub struct DdpgAgent<T: Scalar> {
    config: AgentConfig<T>,
    actor: Mlp<T>,
    critic: Mlp<T>,
    target_actor: Mlp<T>,
    target_critic: Mlp<T>,
    actor_opt: Optimizer<T>,
    critic_opt: Optimizer<T>,
    epochs_seen: u64,
}

fn widths(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    std::iter::once(input).chain(hidden.iter().copied()).chain(std::iter::once(output)).collect()
}

fn actor_input<T: Scalar>(states: ArrayView2<T>, goals: ArrayView2<T>) -> Array2<T> {
    concatenate![Axis(1), states, goals]
}

fn critic_input<T: Scalar>(states: ArrayView2<T>, actions: ArrayView2<T>, goals: ArrayView2<T>) -> Array2<T> {
    concatenate![Axis(1), states, actions, goals]
}

impl<T: Scalar> DdpgAgent<T> {
    /// Fresh agent; targets start as exact copies of the online networks.
    pub fn new<R: Rng + ?Sized>(config: AgentConfig<T>, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let actor = Mlp::new(&widths(ACTOR_INPUT, &config.hidden, ACTION_DIM), Activation::Tanh, Init::actor(), rng)?;
        let critic = Mlp::new(&widths(CRITIC_INPUT, &config.hidden, 1), Activation::Identity, Init::critic(), rng)?;
        Self::from_networks(config, actor, critic)
    }

    pub fn from_networks(config: AgentConfig<T>, actor: Mlp<T>, critic: Mlp<T>) -> Result<Self> {
        config.validate()?;
        if actor.input_width() != ACTOR_INPUT || actor.output_width() != ACTION_DIM {
            return Err(Error::Shape(format!("actor widths {:?} do not map 19 -> 6", actor.widths())));
        }
        if critic.input_width() != CRITIC_INPUT || critic.output_width() != 1 {
            return Err(Error::Shape(format!("critic widths {:?} do not map 25 -> 1", critic.widths())));
        }
        let actor_opt = Optimizer::new(config.optimizer, &actor);
        let critic_opt = Optimizer::new(config.optimizer, &critic);
        Ok(Self {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            actor_opt,
            critic_opt,
            config,
            epochs_seen: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig<T> {
        &self.config
    }

    pub fn actor(&self) -> &Mlp<T> {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp<T> {
        &self.critic
    }

    pub fn target_actor(&self) -> &Mlp<T> {
        &self.target_actor
    }

    pub fn target_critic(&self) -> &Mlp<T> {
        &self.target_critic
    }

    pub fn actor_mut(&mut self) -> &mut Mlp<T> {
        &mut self.actor
    }

    pub fn critic_mut(&mut self) -> &mut Mlp<T> {
        &mut self.critic
    }

    pub fn target_critic_mut(&mut self) -> &mut Mlp<T> {
        &mut self.target_critic
    }

    pub fn target_actor_mut(&mut self) -> &mut Mlp<T> {
        &mut self.target_actor
    }

    pub fn epochs_seen(&self) -> u64 {
        self.epochs_seen
    }

    /// Advances the exploration annealing clock by one epoch.
    pub fn finish_epoch(&mut self) {
        self.epochs_seen += 1;
    }

    /// Current probability of taking a uniformly random action.
    pub fn explore_probability(&self) -> T {
        let c = &self.config;
        if c.explore_anneal_epochs == 0 {
            return c.explore_end;
        }
        let frac = T::of((self.epochs_seen.min(c.explore_anneal_epochs)) as f64 / c.explore_anneal_epochs as f64);
        c.explore_start + (c.explore_end - c.explore_start) * frac
    }

    /// Deterministic policy output.
    pub fn policy(&self, state: &[T; STATE_DIM], goal: &[T; GOAL_DIM]) -> Result<Action<T>> {
        let mut input = [T::zero(); ACTOR_INPUT];
        input[..STATE_DIM].copy_from_slice(state);
        input[STATE_DIM..].copy_from_slice(goal);
        let out = self.actor.predict_one(&input)?;
        let mut values = [T::zero(); ACTION_DIM];
        values.copy_from_slice(&out);
        Ok(Action::clamped(values))
    }

    /// Behavior policy: with probability `explore_probability` a uniform
    /// random action, otherwise the actor's action plus Gaussian noise.
    /// Without `explore` this is exactly [`DdpgAgent::policy`].
    pub fn select_action<R: Rng + ?Sized>(
        &self,
        state: &[T; STATE_DIM],
        goal: &[T; GOAL_DIM],
        rng: &mut R,
        explore: bool,
    ) -> Result<Action<T>> {
        if !explore {
            return self.policy(state, goal);
        }
        let one = T::one();
        if T::of(rng.random::<f64>()) < self.explore_probability() {
            let mut values = [T::zero(); ACTION_DIM];
            for v in &mut values {
                *v = rng.random_range(-one..=one);
            }
            return Ok(Action::clamped(values));
        }
        let mut action = self.policy(state, goal)?.0;
        for v in &mut action {
            *v += self.config.sigma * T::standard_normal(rng);
        }
        Ok(Action::clamped(action))
    }

    /// Bellman targets `r + gamma * (1 - terminal) * Q'(s', pi'(s', g), g)`.
    /// Target networks are evaluated only on the non-terminal rows.
    pub fn critic_target(&self, batch: &Batch<T>) -> Result<Array1<T>> {
        let mut y = batch.rewards.clone();
        let live: Vec<usize> = (0..batch.len()).filter(|&i| !batch.terminal[i]).collect();
        if live.is_empty() || self.config.gamma == T::zero() {
            return Ok(y);
        }
        let next = batch.next_states.select(Axis(0), &live);
        let goals = batch.goals.select(Axis(0), &live);
        let next_actions = self.target_actor.predict(actor_input(next.view(), goals.view()).view())?;
        let q = self.target_critic.predict(critic_input(next.view(), next_actions.view(), goals.view()).view())?;
        for (row, &i) in live.iter().enumerate() {
            y[i] += self.config.gamma * q[[row, 0]];
        }
        Ok(y)
    }

    /// Mean squared TD error of the online critic against `targets`.
    pub fn critic_loss(&self, batch: &Batch<T>, targets: &Array1<T>) -> Result<T> {
        let q = self.critic.predict(critic_input(batch.states.view(), batch.actions.view(), batch.goals.view()).view())?;
        let n = T::of(batch.len() as f64);
        Ok(q.column(0).iter().zip(targets).map(|(&q, &y)| (q - y) * (q - y)).sum::<T>() / n)
    }

    /// Gradient of the critic's mean squared TD error.
    pub fn critic_gradient(&self, batch: &Batch<T>, targets: &Array1<T>) -> Result<(Gradients<T>, T)> {
        let input = critic_input(batch.states.view(), batch.actions.view(), batch.goals.view());
        let (q, cache) = self.critic.forward(input.view())?;
        let n = T::of(batch.len() as f64);
        let diff = &q.column(0) - targets;
        let loss = diff.iter().map(|&d| d * d).sum::<T>() / n;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "critic loss is {loss} (|y| max {}, |q| max {})",
                targets.iter().fold(T::zero(), |m, v| m.max(v.abs())),
                q.iter().fold(T::zero(), |m, v| m.max(v.abs()))
            )));
        }
        let two = T::of(2.0);
        let dq = diff.mapv(|d| two * d / n).insert_axis(Axis(1));
        let (grads, _) = self.critic.backward(&cache, dq.view())?;
        Ok((grads, loss))
    }

    /// Gradient of `-mean_i Q(s_i, pi(s_i, g_i), g_i)` with respect to the
    /// actor's parameters, chained through the critic's action input.
    pub fn actor_gradient(&self, batch: &Batch<T>) -> Result<(Gradients<T>, T)> {
        let (actions, actor_cache) = self.actor.forward(actor_input(batch.states.view(), batch.goals.view()).view())?;
        let input = critic_input(batch.states.view(), actions.view(), batch.goals.view());
        let (q, critic_cache) = self.critic.forward(input.view())?;
        let n = T::of(batch.len() as f64);
        let mean_q = q.sum() / n;
        let dq = Array2::from_elem((batch.len(), 1), -T::one() / n);
        let (_, d_input) = self.critic.backward(&critic_cache, dq.view())?;
        let d_actions = d_input.slice(s![.., STATE_DIM..STATE_DIM + ACTION_DIM]);
        let (grads, _) = self.actor.backward(&actor_cache, d_actions)?;
        Ok((grads, mean_q))
    }

    /// One DDPG update: critic descent on the squared TD error, actor ascent
    /// on Q, then Polyak averaging of both targets.
    pub fn train_step(&mut self, batch: &Batch<T>) -> Result<TrainStats<T>> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("training batch is empty".into()));
        }
        let targets = self.critic_target(batch)?;
        let (critic_grads, critic_loss) = self.critic_gradient(batch, &targets)?;
        self.critic_opt.apply(&mut self.critic, &critic_grads, self.config.critic_lr)?;

        let (actor_grads, mean_q) = self.actor_gradient(batch)?;
        if !mean_q.is_finite() {
            return Err(Error::Divergence(format!("mean Q is {mean_q}")));
        }
        self.actor_opt.apply(&mut self.actor, &actor_grads, self.config.actor_lr)?;

        soft_update(&mut self.target_critic, &self.critic, self.config.tau)?;
        soft_update(&mut self.target_actor, &self.actor, self.config.tau)?;
        Ok(TrainStats { critic_loss, mean_q })
    }

    pub fn to_record(&self) -> AgentRecord<T> {
        AgentRecord {
            actor: self.actor.to_record(),
            critic: self.critic.to_record(),
            target_actor: self.target_actor.to_record(),
            target_critic: self.target_critic.to_record(),
            actor_optimizer: self.actor_opt.to_record(),
            critic_optimizer: self.critic_opt.to_record(),
            epochs_seen: self.epochs_seen,
        }
    }

    pub fn from_record(config: AgentConfig<T>, record: &AgentRecord<T>) -> Result<Self> {
        let actor = Mlp::from_record(&record.actor)?;
        let critic = Mlp::from_record(&record.critic)?;
        let target_actor = Mlp::from_record(&record.target_actor)?;
        let target_critic = Mlp::from_record(&record.target_critic)?;
        if !(target_actor.same_architecture(&actor) && target_critic.same_architecture(&critic)) {
            return Err(Error::Checkpoint("target networks differ from online networks".into()));
        }
        let mut agent = Self::from_networks(config, actor, critic)?;
        agent.actor_opt = Optimizer::from_record(&record.actor_optimizer, &agent.actor)?;
        agent.critic_opt = Optimizer::from_record(&record.critic_optimizer, &agent.critic)?;
        if agent.actor_opt.kind() != agent.config.optimizer || agent.critic_opt.kind() != agent.config.optimizer {
            return Err(Error::Checkpoint("stored optimizer kind differs from the configuration".into()));
        }
        agent.target_actor = target_actor;
        agent.target_critic = target_critic;
        agent.epochs_seen = record.epochs_seen;
        Ok(agent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentRecord<T> {
    pub actor: MlpRecord<T>,
    pub critic: MlpRecord<T>,
    pub target_actor: MlpRecord<T>,
    pub target_critic: MlpRecord<T>,
    pub actor_optimizer: OptimizerRecord<T>,
    pub critic_optimizer: OptimizerRecord<T>,
    pub epochs_seen: u64,
}
