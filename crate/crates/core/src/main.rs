use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use reach_curriculum::trainer::{compare, stream_eval_rng, Profile, RunConfig, Trainer};
use reach_curriculum::{evaluate, RewardMode, Scalar};

#[derive(Parser)]
#[command(name = "reach-curriculum", version, about = "Precision-curriculum DDPG for arm reaching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and write metrics and a checkpoint.
    Train {
        #[command(flatten)]
        source: ConfigArgs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Continue from a checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Precision::F64)]
        precision: Precision,
    },
    /// Evaluate a checkpoint's deterministic policy.
    Eval {
        #[arg(long)]
        resume: PathBuf,
        /// Required precision; defaults to the config's final precision.
        #[arg(long)]
        epsilon: Option<f64>,
        /// Number of goals; defaults to the config's evaluation size.
        #[arg(long)]
        goals: Option<usize>,
        /// Seed for the goal stream; defaults to the run's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Precision::F64)]
        precision: Precision,
    },
    /// Train the curriculum and the fixed-precision baseline on several seeds.
    Compare {
        #[command(flatten)]
        source: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        seeds: Vec<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Precision::F64)]
        precision: Precision,
    },
    /// Print the precision schedule as CSV.
    Schedule {
        #[command(flatten)]
        source: ConfigArgs,
        /// Last epoch to print; defaults to the decay length.
        #[arg(long)]
        through: Option<u64>,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration. Overrides the profile.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    profile: Profile,
    #[arg(long, default_value = "sparse")]
    reward: RewardMode,
    #[arg(long)]
    seed: Option<u64>,
    /// Train at a fixed precision instead of following the schedule.
    #[arg(long)]
    baseline: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => RunConfig::profile(self.profile, self.reward),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.baseline {
            cfg = cfg.as_baseline();
        }
        Ok(cfg)
    }
}

fn run_train<T: Scalar>(cfg: RunConfig, out_dir: &Path, resume: Option<&Path>) -> Result<()> {
    let mut trainer = match resume {
        Some(path) => Trainer::<T>::load_checkpoint(path).with_context(|| format!("resuming {}", path.display()))?,
        None => Trainer::<T>::new(cfg)?,
    };
    trainer.run(Some(out_dir))?;
    let last = trainer.metrics().last();
    println!(
        "epochs={} acc_steps={} eval_success={}",
        trainer.epoch(),
        trainer.accumulated_steps(),
        last.and_then(|m| m.eval_success).map_or("n/a".into(), |s| s.to_string()),
    );
    Ok(())
}

fn run_eval<T: Scalar>(path: &Path, epsilon: Option<f64>, goals: Option<usize>, seed: Option<u64>) -> Result<()> {
    let trainer = Trainer::<T>::load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
    let cfg = trainer.config();
    let eps = epsilon.unwrap_or(cfg.evaluation.final_epsilon);
    let n = goals.unwrap_or(cfg.evaluation.goals);
    let mut rng = stream_eval_rng(seed.unwrap_or(cfg.seed));
    let rate = evaluate(trainer.agent(), trainer.env(), n, T::of(eps), &mut rng)?;
    println!("epsilon={eps} goals={n} success={rate}");
    Ok(())
}

fn run_compare<T: Scalar>(cfg: RunConfig, seeds: &[u64], out_dir: &Path) -> Result<()> {
    let mut pccl = cfg.clone();
    pccl.curriculum.baseline = false;
    let report = compare::<T>(&pccl, &cfg.as_baseline(), seeds, Some(out_dir))?;
    for arm in [&report.curriculum, &report.baseline] {
        println!(
            "{}: median_success={} median_acc_steps={}",
            arm.name,
            arm.median_success(),
            arm.median_steps()
        );
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train { source, out_dir, resume, precision } => {
            let cfg = source.resolve()?;
            let out_dir = out_dir.unwrap_or_else(|| PathBuf::from("runs").join(format!("seed{}", cfg.seed)));
            match precision {
                Precision::F32 => run_train::<f32>(cfg, &out_dir, resume.as_deref()),
                Precision::F64 => run_train::<f64>(cfg, &out_dir, resume.as_deref()),
            }
        }
        Command::Eval { resume, epsilon, goals, seed, precision } => match precision {
            Precision::F32 => run_eval::<f32>(&resume, epsilon, goals, seed),
            Precision::F64 => run_eval::<f64>(&resume, epsilon, goals, seed),
        },
        Command::Compare { source, seeds, out_dir, precision } => {
            if seeds.is_empty() {
                bail!("--seeds must list at least one seed");
            }
            let cfg = source.resolve()?;
            let out_dir = out_dir.unwrap_or_else(|| PathBuf::from("runs").join("compare"));
            match precision {
                Precision::F32 => run_compare::<f32>(cfg, &seeds, &out_dir),
                Precision::F64 => run_compare::<f64>(cfg, &seeds, &out_dir),
            }
        }
        Command::Schedule { source, through } => {
            let cfg = source.resolve()?;
            let schedule = cfg.schedule::<f64>()?;
            let last = through.unwrap_or(schedule.length());
            println!("k,epsilon");
            for k in 0..=last {
                println!("{k},{}", schedule.precision_at(k));
            }
            Ok(())
        }
    }
}
