//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Matrix4, Rotation3, Vector3};
use reach_curriculum::neural::{Activation, Mlp};
use rug::float::Round;
use rug::ops::Pow;
use rug::Float;

/// Homogeneous transform of one standard DH link.
pub fn dh_link(theta: f64, d: f64, a: f64, alpha: f64) -> Matrix4<f64> {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = alpha.sin_cos();
    #[rustfmt::skip]
    let m = Matrix4::new(
        ct, -st * ca,  st * sa, a * ct,
        st,  ct * ca, -ct * sa, a * st,
        0.0,      sa,       ca,      d,
        0.0,     0.0,      0.0,    1.0,
    );
    m
}

/// Base-to-flange transform for rows `[a, d, alpha, theta_offset]`.
pub fn chain_transform(q: &[f64; 6], dh: &[[f64; 4]]) -> Matrix4<f64> {
    dh.iter()
        .zip(q)
        .fold(Matrix4::identity(), |t, (row, &qi)| t * dh_link(qi + row[3], row[1], row[0], row[2]))
}

/// Pose `[x, y, z, rx, ry, rz]` with `R = Rx(rx) Ry(ry) Rz(rz)`.
///
/// nalgebra extracts `R' = Rz(yaw) Ry(pitch) Rx(roll)`; applied to the
/// transpose that yields the negated intrinsic X-Y-Z angles.
pub fn reference_pose(q: &[f64; 6], dh: &[[f64; 4]]) -> [f64; 6] {
    let t = chain_transform(q, dh);
    let r = t.fixed_view::<3, 3>(0, 0).into_owned();
    let rt = Rotation3::from_matrix_unchecked(r.transpose());
    let (roll, pitch, yaw) = rt.euler_angles();
    [t[(0, 3)], t[(1, 3)], t[(2, 3)], -roll, -pitch, -yaw]
}

pub fn rotation_xyz(rpy: [f64; 3]) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), rpy[0])
        * Rotation3::from_axis_angle(&Vector3::y_axis(), rpy[1])
        * Rotation3::from_axis_angle(&Vector3::z_axis(), rpy[2])
}

pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Joint-4 coupling written out from its definition.
pub fn coupled_joint4(j2: f64, j3: f64) -> f64 {
    if (PI / 2.0 + j2).abs() + j3 >= PI {
        -PI - j2
    } else {
        -j3 - j2
    }
}

/// `em + ((s - k) / s)^alpha * (e0 - em)` evaluated with 256-bit MPFR
/// arithmetic and rounded once to the nearest double.
pub fn reference_precision(e0: f64, em: f64, s: u64, alpha: f64, k: u64) -> f64 {
    const BITS: u32 = 256;
    if k >= s {
        return em;
    }
    let ratio = Float::with_val(BITS, s - k) / Float::with_val(BITS, s);
    let scale = ratio.pow(Float::with_val(BITS, alpha));
    let span = Float::with_val(BITS, e0) - Float::with_val(BITS, em);
    let value = Float::with_val(BITS, em) + scale * span;
    value.to_f64_round(Round::Nearest)
}

/// Naive per-sample forward pass straight from the layer weights.
pub fn reference_forward(net: &Mlp<f64>, x: &[f64]) -> Vec<f64> {
    let layers = net.layers();
    let mut h = x.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        let w = &layer.weights;
        let mut z: Vec<f64> = (0..w.nrows())
            .map(|r| layer.bias[r] + (0..w.ncols()).map(|c| w[[r, c]] * h[c]).sum::<f64>())
            .collect();
        let act = if i + 1 == layers.len() { net.output_activation() } else { Activation::Relu };
        for v in &mut z {
            *v = match act {
                Activation::Identity => *v,
                Activation::Tanh => v.tanh(),
                Activation::Relu => v.max(0.0),
            };
        }
        h = z;
    }
    h
}

/// Signs of every hidden pre-activation, used to detect finite-difference
/// steps that cross a ReLU kink.
pub fn relu_pattern(net: &Mlp<f64>, x: &[f64]) -> Vec<bool> {
    let layers = net.layers();
    let mut h = x.to_vec();
    let mut pattern = Vec::new();
    for layer in &layers[..layers.len() - 1] {
        let w = &layer.weights;
        h = (0..w.nrows())
            .map(|r| layer.bias[r] + (0..w.ncols()).map(|c| w[[r, c]] * h[c]).sum::<f64>())
            .map(|z| {
                pattern.push(z > 0.0);
                z.max(0.0)
            })
            .collect();
    }
    pattern
}

/// `|a - b| / max(|a|, |b|)`, falling back to the absolute gap when both
/// magnitudes are below `floor`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < floor {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Kolmogorov-Smirnov statistic of `samples` against U(lo, hi).
pub fn ks_uniform(samples: &mut [f64], lo: f64, hi: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Asymptotic KS critical value at the 1% level.
pub fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Backprop versus central differences; steps that cross a ReLU kink are
/// counted in `skipped` instead of compared.
pub struct GradientCheck {
    pub max_error: f64,
    pub checked: usize,
    pub skipped: usize,
}

/// Checks parameter and input gradients of `L = sum(g * net(x))` for one
/// random network.
pub fn check_network_gradient(seed: u64, output: Activation) -> GradientCheck {
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use reach_curriculum::neural::Init;

    const H: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = rng.random_range(1..=3);
    let mut widths = vec![rng.random_range(1..=6)];
    for _ in 0..depth {
        widths.push(rng.random_range(2..=8));
    }
    widths.push(rng.random_range(1..=4));
    let net = Mlp::<f64>::new(&widths, output, Init { output_scale: 1.0 }, &mut rng).unwrap();
    let batch = 3;
    let x = Array2::from_shape_fn((batch, widths[0]), |_| rng.random_range(-1.0..1.0));
    let g = Array2::from_shape_fn((batch, *widths.last().unwrap()), |_| rng.random_range(-1.0..1.0));

    let loss = |net: &Mlp<f64>, x: &Array2<f64>| -> f64 {
        x.rows()
            .into_iter()
            .zip(g.rows())
            .map(|(xr, gr)| reference_forward(net, xr.as_slice().unwrap()).iter().zip(gr).map(|(y, g)| y * g).sum::<f64>())
            .sum()
    };
    let patterns = |net: &Mlp<f64>, x: &Array2<f64>| -> Vec<Vec<bool>> {
        x.rows().into_iter().map(|r| relu_pattern(net, r.as_slice().unwrap())).collect()
    };

    let (_, cache) = net.forward(x.view()).unwrap();
    let (grads, input_grad) = net.backward(&cache, g.view()).unwrap();
    let analytic = grads.to_vec();
    let params = net.parameters();
    let base = patterns(&net, &x);

    let mut out = GradientCheck { max_error: 0.0, checked: 0, skipped: 0 };
    let mut probe = net.clone();
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] += H;
        probe.set_parameters(&p).unwrap();
        let (up, up_pat) = (loss(&probe, &x), patterns(&probe, &x));
        p[i] -= 2.0 * H;
        probe.set_parameters(&p).unwrap();
        let (down, down_pat) = (loss(&probe, &x), patterns(&probe, &x));
        if up_pat != base || down_pat != base {
            out.skipped += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * H);
        out.max_error = out.max_error.max(relative_error(analytic[i], numeric, 1e-6));
        out.checked += 1;
    }
    for ((r, c), &a) in input_grad.indexed_iter() {
        let mut xp = x.clone();
        xp[[r, c]] += H;
        let mut xm = x.clone();
        xm[[r, c]] -= H;
        if patterns(&net, &xp) != base || patterns(&net, &xm) != base {
            out.skipped += 1;
            continue;
        }
        let numeric = (loss(&net, &xp) - loss(&net, &xm)) / (2.0 * H);
        out.max_error = out.max_error.max(relative_error(a, numeric, 1e-6));
        out.checked += 1;
    }
    out
}

/// Same comparison for the actor gradient of `-mean Q(s, pi(s, g), g)`.
pub fn check_actor_through_critic(seed: u64) -> GradientCheck {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use reach_curriculum::agent::{AgentConfig, Batch, DdpgAgent, Transition};

    const H: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let config = AgentConfig::<f64> { hidden: vec![rng.random_range(4..=10), rng.random_range(4..=10)], ..Default::default() };
    let mut agent = DdpgAgent::new(config, &mut rng).unwrap();
    let rows: Vec<Transition<f64>> = (0..4)
        .map(|_| Transition {
            state: std::array::from_fn(|_| rng.random_range(-1.5..1.5)),
            action: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
            next_state: std::array::from_fn(|_| rng.random_range(-1.5..1.5)),
            reward: -0.02,
            goal: std::array::from_fn(|_| rng.random_range(-1.5..1.5)),
            terminal: false,
        })
        .collect();
    let batch = Batch::from_transitions(&rows);

    let objective = |agent: &DdpgAgent<f64>| -> (f64, Vec<Vec<bool>>) {
        let mut pattern = Vec::new();
        let total: f64 = rows
            .iter()
            .map(|t| {
                let xa: Vec<f64> = t.state.iter().chain(&t.goal).copied().collect();
                let a = reference_forward(agent.actor(), &xa);
                let xc: Vec<f64> = t.state.iter().chain(&a).chain(&t.goal).copied().collect();
                pattern.push(relu_pattern(agent.actor(), &xa));
                pattern.push(relu_pattern(agent.critic(), &xc));
                reference_forward(agent.critic(), &xc)[0]
            })
            .sum();
        (-total / rows.len() as f64, pattern)
    };

    let (grads, _) = agent.actor_gradient(&batch).unwrap();
    let analytic = grads.to_vec();
    let params = agent.actor().parameters();
    let (_, base) = objective(&agent);
    let mut out = GradientCheck { max_error: 0.0, checked: 0, skipped: 0 };
    for i in 0..params.len() {
        let mut p = params.clone();
        p[i] += H;
        agent.actor_mut().set_parameters(&p).unwrap();
        let (up, up_pat) = objective(&agent);
        p[i] -= 2.0 * H;
        agent.actor_mut().set_parameters(&p).unwrap();
        let (down, down_pat) = objective(&agent);
        if up_pat != base || down_pat != base {
            out.skipped += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * H);
        out.max_error = out.max_error.max(relative_error(analytic[i], numeric, 1e-6));
        out.checked += 1;
    }
    agent.actor_mut().set_parameters(&params).unwrap();
    out
}

#[derive(Debug, Default)]
pub struct MdpReport {
    pub episodes: usize,
    pub steps: usize,
    pub violations: Vec<String>,
}

/// Random-action episodes over full and desk joint limits in both reward
/// modes, checking containment, joint-4 coupling, reward codomains and
/// success monotonicity in the precision.
pub fn run_mdp_properties(episodes: usize, seed: u64) -> MdpReport {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use reach_curriculum::environment::{transition, Action, AugmentedGoal, ReachEnv, RewardMode};
    use reach_curriculum::kinematics::JointLimits;
    use reach_curriculum::trainer::desk_limits;
    use reach_curriculum::ArmModel;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let desk = ArmModel { limits: JointLimits::from_pairs(&desk_limits()).unwrap(), ..ArmModel::ur5e() };
    let models = [ArmModel::<f64>::ur5e(), desk];
    let mut report = MdpReport::default();
    let fail = |report: &mut MdpReport, msg: String| {
        if report.violations.len() < 20 {
            report.violations.push(msg);
        }
    };
    for ep in 0..episodes {
        let model = models[ep % 2];
        let mode = if (ep / 2) % 2 == 0 { RewardMode::Sparse } else { RewardMode::Dense };
        let mut env = ReachEnv::new(model, mode, 20).unwrap();
        let eps = rng.random_range(0.01..0.3);
        env.reset(&mut rng, eps).unwrap();
        while !env.episode_over() {
            let action = Action::new(std::array::from_fn(|_| rng.random_range(-1.0..=1.0))).unwrap();
            let before = *env.state();
            let goal = *env.goal();
            let r = env.step(&action).unwrap();
            report.steps += 1;
            let q = r.next_state.joints().0;
            let (lo, hi) = (model.limits.lo(), model.limits.hi());
            if (0..6).any(|i| q[i] < lo[i] || q[i] > hi[i]) {
                fail(&mut report, format!("episode {ep}: joints {q:?} leave limits"));
            }
            let j4 = coupled_joint4(q[1], q[2]).clamp(lo[3], hi[3]);
            if q[3] != j4 {
                fail(&mut report, format!("episode {ep}: joint 4 is {} but coupling gives {j4}", q[3]));
            }
            match mode {
                RewardMode::Sparse if r.reward != 1.0 && r.reward != -0.02 => {
                    fail(&mut report, format!("episode {ep}: sparse reward {}", r.reward))
                }
                RewardMode::Dense if r.reward != 1.0 && r.reward >= 0.0 => {
                    fail(&mut report, format!("episode {ep}: dense reward {}", r.reward))
                }
                _ => {}
            }
            if (r.reward == 1.0) != r.success {
                fail(&mut report, format!("episode {ep}: reward {} with success {}", r.reward, r.success));
            }
            let mut reached = false;
            for k in 0..6 {
                let e = eps * (0.25 + 0.5 * k as f64);
                let g = AugmentedGoal::new(*goal.target(), e).unwrap();
                let s = transition(&model, mode, &before, &action, &g).unwrap().success;
                if reached && !s {
                    fail(&mut report, format!("episode {ep}: success lost when precision loosened to {e}"));
                }
                reached |= s;
            }
        }
        report.episodes += 1;
    }
    report
}

/// Small configuration that still exercises every part of the epoch loop.
pub fn tiny_config(reward: reach_curriculum::RewardMode) -> reach_curriculum::RunConfig {
    let mut c = reach_curriculum::RunConfig::desk(reward);
    c.agent.hidden = vec![16, 16];
    c.curriculum.s = 6;
    c.training.epochs = 8;
    c.training.episodes_per_epoch = 3;
    c.training.steps_per_episode = 10;
    c.training.train_steps_per_epoch = 4;
    c.training.batch_size = 16;
    c.training.buffer_capacity = 500;
    c.evaluation.every_epochs = 2;
    c.evaluation.goals = 10;
    c.metrics.every_epochs = 1;
    c.metrics.wall_clock = false;
    c.checkpoint.every_epochs = 0;
    c
}

pub struct DeterminismReport {
    pub metrics_identical: bool,
    pub resumed_metrics_identical: bool,
    pub next_evaluation: (f64, f64),
}

/// Trains the same config twice through the file-writing path, then once
/// more with a save and reload halfway through.
pub fn check_determinism(config: &reach_curriculum::RunConfig, dir: &std::path::Path) -> DeterminismReport {
    use reach_curriculum::Trainer;

    let run = |name: &str| {
        let out = dir.join(name);
        reach_curriculum::train::<f64>(config.clone(), Some(&out)).unwrap();
        std::fs::read(out.join("metrics.csv")).unwrap()
    };
    let first = run("a");
    let second = run("b");

    let half = config.training.epochs / 2;
    let mut straight = Trainer::<f64>::new(config.clone()).unwrap();
    let mut interrupted = Trainer::<f64>::new(config.clone()).unwrap();
    for _ in 0..half {
        straight.run_epoch().unwrap();
        interrupted.run_epoch().unwrap();
    }
    let path = dir.join("half.json");
    interrupted.save_checkpoint(&path, true).unwrap();
    drop(interrupted);
    let mut resumed = Trainer::<f64>::load_checkpoint(&path).unwrap();
    let eps = config.evaluation.final_epsilon;
    let next_evaluation = (straight.evaluate(20, eps).unwrap(), resumed.evaluate(20, eps).unwrap());
    straight.run(None).unwrap();
    resumed.run(None).unwrap();
    DeterminismReport {
        metrics_identical: first == second,
        resumed_metrics_identical: straight.metrics() == resumed.metrics()
            && straight.agent().to_record() == resumed.agent().to_record(),
        next_evaluation,
    }
}
