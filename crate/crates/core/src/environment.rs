//! Multi-goal reaching MDP on a kinematic arm.
//!
//! A state is the end-effector pose followed by the six joint angles. An
//! action is a vector of normalized joint increments in `[-1, 1]`, scaled by
//! `pi/6` per step. Joint 4 is never driven directly: after every increment it
//! is recomputed from joints 2 and 3 and then clamped like the others.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{
    forward_kinematics, initial_configuration, pose_distance, DhChain, DistanceWeights, JointLimits, JointVector,
    Pose, DOF,
};
use crate::scalar::Scalar;

pub const STATE_DIM: usize = 12;
pub const GOAL_DIM: usize = 7;
pub const ACTION_DIM: usize = DOF;

/// Largest joint change produced by a unit action component.
pub fn max_joint_increment<T: Scalar>() -> T {
    T::PI() / T::of(6.0)
}

/// End-effector pose together with the joint angles that produce it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State<T> {
    pose: Pose<T>,
    joints: JointVector<T>,
}

impl<T: Scalar> State<T> {
    pub fn from_joints(joints: JointVector<T>, chain: &DhChain<T>) -> Result<Self> {
        Ok(Self { pose: forward_kinematics(&joints, chain)?, joints })
    }

    pub fn pose(&self) -> &Pose<T> {
        &self.pose
    }

    pub fn joints(&self) -> &JointVector<T> {
        &self.joints
    }

    /// Network input layout: `[x, y, z, rx, ry, rz, j1..j6]`.
    pub fn to_array(&self) -> [T; STATE_DIM] {
        let mut out = [T::zero(); STATE_DIM];
        out[..6].copy_from_slice(&self.pose.to_array());
        out[6..].copy_from_slice(&self.joints.0);
        out
    }
}

/// Normalized joint increments, each in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Action<T>(pub [T; ACTION_DIM]);

impl<T: Scalar> Action<T> {
    pub fn new(values: [T; ACTION_DIM]) -> Result<Self> {
        let action = Self(values);
        action.validate()?;
        Ok(action)
    }

    /// Clamps into `[-1, 1]`; NaN components become 0.
    pub fn clamped(values: [T; ACTION_DIM]) -> Self {
        let one = T::one();
        Self(values.map(|v| if v.is_nan() { T::zero() } else { v.max(-one).min(one) }))
    }

    pub fn zeros() -> Self {
        Self([T::zero(); ACTION_DIM])
    }

    pub fn validate(&self) -> Result<()> {
        let one = T::one();
        if self.0.iter().all(|v| *v >= -one && *v <= one) {
            Ok(())
        } else {
            Err(Error::InvalidAction(format!("components must lie in [-1, 1], got {:?}", self.0)))
        }
    }
}

/// Target pose plus the precision it must be reached with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentedGoal<T> {
    target: Pose<T>,
    epsilon: T,
}

impl<T: Scalar> AugmentedGoal<T> {
    pub fn new(target: Pose<T>, epsilon: T) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > T::zero()) {
            return Err(Error::InvalidInput(format!("goal precision must be positive, got {epsilon}")));
        }
        Ok(Self { target, epsilon })
    }

    pub fn target(&self) -> &Pose<T> {
        &self.target
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// `[x, y, z, rx, ry, rz, eps]`.
    pub fn to_array(&self) -> [T; GOAL_DIM] {
        let mut out = [T::zero(); GOAL_DIM];
        out[..6].copy_from_slice(&self.target.to_array());
        out[6] = self.epsilon;
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardMode {
    Dense,
    Sparse,
}

impl std::str::FromStr for RewardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(Self::Dense),
            "sparse" => Ok(Self::Sparse),
            other => Err(Error::InvalidConfig(format!("unknown reward mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult<T> {
    pub next_state: State<T>,
    pub reward: T,
    pub done: bool,
    pub success: bool,
    pub dist_p: T,
    pub dist_o: T,
}

/// Both distances within `epsilon`; the boundary counts as reached.
pub fn is_success<T: Scalar>(dist_p: T, dist_o: T, epsilon: T) -> bool {
    dist_p <= epsilon && dist_o <= epsilon
}

/// 1 on success, otherwise the negative weighted distance.
pub fn reward_dense<T: Scalar>(dist_p: T, dist_o: T, weighted: T, epsilon: T) -> T {
    if is_success(dist_p, dist_o, epsilon) {
        T::one()
    } else {
        -weighted
    }
}

/// 1 on success, otherwise a flat -0.02.
pub fn reward_sparse<T: Scalar>(dist_p: T, dist_o: T, epsilon: T) -> T {
    if is_success(dist_p, dist_o, epsilon) {
        T::one()
    } else {
        T::of(-0.02)
    }
}

/// Static description of the arm shared by environments and goal sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmModel<T> {
    pub chain: DhChain<T>,
    pub limits: JointLimits<T>,
    pub weights: DistanceWeights<T>,
}

impl<T: Scalar> ArmModel<T> {
    pub fn ur5e() -> Self {
        Self { chain: DhChain::ur5e(), limits: JointLimits::full(), weights: DistanceWeights::default() }
    }
}

/// A goal pose along with the joint configuration it was generated from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledGoal<T> {
    pub pose: Pose<T>,
    pub joints: JointVector<T>,
}

/// Draws each joint uniformly inside its limits, couples joint 4, and
/// returns the resulting end-effector pose.
pub fn sample_goal<T: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    limits: &JointLimits<T>,
    chain: &DhChain<T>,
) -> Result<SampledGoal<T>> {
    let mut angles = [T::zero(); DOF];
    for (i, q) in angles.iter_mut().enumerate() {
        *q = rng.random_range(limits.lo()[i]..=limits.hi()[i]);
    }
    let joints = coupled_and_clamped(JointVector::new(angles), limits);
    Ok(SampledGoal { pose: forward_kinematics(&joints, chain)?, joints })
}

fn coupled_and_clamped<T: Scalar>(joints: JointVector<T>, limits: &JointLimits<T>) -> JointVector<T> {
    let mut out = joints.with_coupled_wrist();
    out.0[3] = limits.clamp_joint(3, out.0[3]);
    out
}

/// Applies `action` to `state` and scores the result against `goal`.
pub fn transition<T: Scalar>(
    model: &ArmModel<T>,
    mode: RewardMode,
    state: &State<T>,
    action: &Action<T>,
    goal: &AugmentedGoal<T>,
) -> Result<StepResult<T>> {
    action.validate()?;
    let scale = max_joint_increment::<T>();
    let mut next = *state.joints();
    for i in (0..DOF).filter(|&i| i != 3) {
        next.0[i] = model.limits.clamp_joint(i, next.0[i] + action.0[i] * scale);
    }
    let next = coupled_and_clamped(next, &model.limits);
    let next_state = State::from_joints(next, &model.chain)?;
    let dist = pose_distance(next_state.pose(), goal.target(), &model.weights);
    let eps = goal.epsilon();
    let success = is_success(dist.position, dist.orientation, eps);
    let reward = match mode {
        RewardMode::Dense => reward_dense(dist.position, dist.orientation, dist.weighted, eps),
        RewardMode::Sparse => reward_sparse(dist.position, dist.orientation, eps),
    };
    Ok(StepResult { next_state, reward, done: success, success, dist_p: dist.position, dist_o: dist.orientation })
}

/// One episode-at-a-time reaching environment.
#[derive(Debug, Clone)]
pub struct ReachEnv<T> {
    model: ArmModel<T>,
    mode: RewardMode,
    max_steps: usize,
    initial: JointVector<T>,
    state: State<T>,
    goal: AugmentedGoal<T>,
    goal_joints: JointVector<T>,
    steps: usize,
    done: bool,
}

impl<T: Scalar> ReachEnv<T> {
    pub fn new(model: ArmModel<T>, mode: RewardMode, max_steps: usize) -> Result<Self> {
        if max_steps == 0 {
            return Err(Error::InvalidConfig("steps per episode must be positive".into()));
        }
        let initial = initial_configuration::<T>();
        if !model.limits.contains(&initial) {
            return Err(Error::InvalidConfig(format!(
                "joint limits {:?} exclude the initial configuration",
                model.limits.to_pairs()
            )));
        }
        let state = State::from_joints(initial, &model.chain)?;
        let goal = AugmentedGoal::new(*state.pose(), T::one())?;
        Ok(Self { model, mode, max_steps, initial, state, goal, goal_joints: initial, steps: 0, done: true })
    }

    pub fn model(&self) -> &ArmModel<T> {
        &self.model
    }

    pub fn mode(&self) -> RewardMode {
        self.mode
    }

    pub fn max_steps(&self) -> usize {
        self.max_steps
    }

    pub fn state(&self) -> &State<T> {
        &self.state
    }

    pub fn goal(&self) -> &AugmentedGoal<T> {
        &self.goal
    }

    /// Joint configuration the current goal was generated from.
    pub fn goal_joints(&self) -> &JointVector<T> {
        &self.goal_joints
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// True once the goal was reached or the step cap was hit.
    pub fn episode_over(&self) -> bool {
        self.done || self.steps >= self.max_steps
    }

    /// Puts the arm back at the initial configuration and samples a new goal.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R, epsilon: T) -> Result<(State<T>, AugmentedGoal<T>)> {
        let sampled = sample_goal(rng, &self.model.limits, &self.model.chain)?;
        let goal = AugmentedGoal::new(sampled.pose, epsilon)?;
        self.state = State::from_joints(self.initial, &self.model.chain)?;
        self.goal = goal;
        self.goal_joints = sampled.joints;
        self.steps = 0;
        self.done = false;
        Ok((self.state, goal))
    }

    pub fn step(&mut self, action: &Action<T>) -> Result<StepResult<T>> {
        if self.episode_over() {
            return Err(Error::Contract(format!(
                "step called on a finished episode ({} of {} steps, done = {})",
                self.steps, self.max_steps, self.done
            )));
        }
        let result = transition(&self.model, self.mode, &self.state, action, &self.goal)?;
        self.state = result.next_state;
        self.steps += 1;
        self.done = result.done;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::couple_joint4;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn env(mode: RewardMode) -> ReachEnv<f64> {
        ReachEnv::new(ArmModel::ur5e(), mode, 100).unwrap()
    }

    #[test]
    fn reset_uses_fixed_start() {
        let mut e = env(RewardMode::Dense);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (s, g) = e.reset(&mut rng, 0.15).unwrap();
        assert_eq!(s.joints().0, [-FRAC_PI_2, -FRAC_PI_2, 0.0, FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2]);
        assert_eq!(g.epsilon(), 0.15);
        assert_eq!(*s.pose(), forward_kinematics(s.joints(), &DhChain::ur5e()).unwrap());
    }

    #[test]
    fn reset_is_seed_deterministic() {
        let mut a = env(RewardMode::Dense);
        let mut b = env(RewardMode::Dense);
        let ga = a.reset(&mut ChaCha8Rng::seed_from_u64(9), 0.1).unwrap().1;
        let gb = b.reset(&mut ChaCha8Rng::seed_from_u64(9), 0.1).unwrap().1;
        assert_eq!(ga, gb);
    }

    #[test]
    fn goal_is_reachable_from_its_preimage() {
        let mut e = env(RewardMode::Sparse);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (_, g) = e.reset(&mut rng, 0.05).unwrap();
            let q = *e.goal_joints();
            assert!(e.model().limits.contains(&q));
            let p = forward_kinematics(&q, &e.model().chain).unwrap();
            let d = pose_distance(&p, g.target(), &DistanceWeights::default());
            assert_eq!(d.weighted, 0.0);
        }
    }

    #[test]
    fn degenerate_limits_give_constant_goal() {
        let lo = [0.3, -1.0, 0.5, 0.0, 0.2, -0.7];
        let pairs: Vec<[f64; 2]> = lo.iter().map(|&v| [v, v]).collect();
        let limits = JointLimits::from_pairs(&pairs).unwrap();
        let chain = DhChain::ur5e();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let expected = forward_kinematics(
            &coupled_and_clamped(JointVector::new(lo), &limits),
            &chain,
        )
        .unwrap();
        for _ in 0..10 {
            assert_eq!(sample_goal(&mut rng, &limits, &chain).unwrap().pose, expected);
        }
    }

    #[test]
    fn zero_action_is_a_fixed_point() {
        let model = ArmModel::ur5e();
        let state = State::from_joints(initial_configuration(), &model.chain).unwrap();
        let goal = AugmentedGoal::new(Pose::from_array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0]), 0.05).unwrap();
        let r = transition(&model, RewardMode::Dense, &state, &Action::zeros(), &goal).unwrap();
        assert_eq!(r.next_state, state);
    }

    #[test]
    fn unit_action_moves_joint_by_pi_over_six() {
        let model = ArmModel::ur5e();
        let state = State::from_joints(initial_configuration(), &model.chain).unwrap();
        let goal = AugmentedGoal::new(*state.pose(), 0.05).unwrap();
        let a = Action::new([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let r = transition(&model, RewardMode::Dense, &state, &a, &goal).unwrap();
        assert_eq!(r.next_state.joints().0[0], -FRAC_PI_2 + PI / 6.0);
        assert_eq!(r.next_state.joints().0[1..], state.joints().0[1..]);
    }

    #[test]
    fn wrist_follows_shoulder_and_elbow() {
        let model = ArmModel::ur5e();
        let state = State::from_joints(initial_configuration(), &model.chain).unwrap();
        let goal = AugmentedGoal::new(*state.pose(), 0.05).unwrap();
        let a = Action::new([0.0, 0.5, -0.7, 1.0, 0.0, 0.0]).unwrap();
        let r = transition(&model, RewardMode::Dense, &state, &a, &goal).unwrap();
        let q = r.next_state.joints().0;
        assert_eq!(q[3], couple_joint4(q[1], q[2]));
    }

    #[test]
    fn reaching_goal_pays_one_and_ends() {
        let model = ArmModel::ur5e();
        let state = State::from_joints(initial_configuration(), &model.chain).unwrap();
        let goal = AugmentedGoal::new(*state.pose(), 0.01).unwrap();
        for mode in [RewardMode::Dense, RewardMode::Sparse] {
            let r = transition(&model, mode, &state, &Action::zeros(), &goal).unwrap();
            assert!(r.success && r.done);
            assert_eq!(r.reward, 1.0);
        }
    }

    #[test]
    fn out_of_range_action_rejected() {
        let model = ArmModel::ur5e();
        let state = State::from_joints(initial_configuration(), &model.chain).unwrap();
        let goal = AugmentedGoal::new(*state.pose(), 0.01).unwrap();
        let a = Action([1.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            transition(&model, RewardMode::Dense, &state, &a, &goal),
            Err(Error::InvalidAction(_))
        ));
        assert!(Action::<f64>::new([0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn dense_reward_cases() {
        assert_eq!(reward_dense(0.0, 0.0, 0.0, 0.05), 1.0);
        assert!((reward_dense(0.2f64, 0.1, 0.15, 0.05) + 0.15).abs() < 1e-15);
        assert_eq!(reward_dense(0.05, 0.05, 0.05, 0.05), 1.0);
    }

    #[test]
    fn sparse_reward_cases() {
        assert_eq!(reward_sparse(0.01, 0.01, 0.05), 1.0);
        assert_eq!(reward_sparse(0.3, 0.01, 0.05), -0.02);
        assert_eq!(reward_sparse(0.0, 0.1, 0.05), -0.02);
    }

    #[test]
    fn step_cap_enforced() {
        let mut e = ReachEnv::<f64>::new(ArmModel::ur5e(), RewardMode::Sparse, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        e.reset(&mut rng, 1e-6).unwrap();
        let a = Action::new([0.1; 6]).unwrap();
        for _ in 0..3 {
            e.step(&a).unwrap();
        }
        assert!(e.episode_over());
        assert!(matches!(e.step(&a), Err(Error::Contract(_))));
    }

    #[test]
    fn limits_must_hold_start_configuration() {
        let mut model = ArmModel::<f64>::ur5e();
        model.limits = JointLimits::from_pairs(&[[0.0, 1.0]; 6]).unwrap();
        assert!(ReachEnv::new(model, RewardMode::Dense, 10).is_err());
    }

    #[test]
    fn augmented_goal_rejects_non_positive_precision() {
        let p = Pose::from_array([0.0; 6]);
        assert!(AugmentedGoal::new(p, 0.0).is_err());
        assert!(AugmentedGoal::new(p, -1.0).is_err());
        assert!(AugmentedGoal::<f64>::new(p, f64::NAN).is_err());
    }
}
