//! Curriculum versus fixed-precision baseline over a set of seeds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MetricsRecord, RunConfig, Trainer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    /// Success rate at the shared final precision.
    pub final_success: f64,
    pub acc_steps: u64,
    pub metrics: Vec<MetricsRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub name: String,
    pub runs: Vec<RunSummary>,
}

impl ArmReport {
    pub fn median_success(&self) -> f64 {
        median(self.runs.iter().map(|r| r.final_success).collect())
    }

    pub fn median_steps(&self) -> f64 {
        median(self.runs.iter().map(|r| r.acc_steps as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub config_hash: String,
    pub final_epsilon: f64,
    pub curriculum: ArmReport,
    pub baseline: ArmReport,
}

#[derive(Serialize)]
struct ArmRow {
    seed: u64,
    epoch: u64,
    epsilon: f64,
    acc_steps: u64,
    eval_success: Option<f64>,
    mean_reward: f64,
    wall_s: Option<f64>,
}

impl ArmRow {
    fn new(seed: u64, m: &MetricsRecord) -> Self {
        Self {
            seed,
            epoch: m.epoch,
            epsilon: m.epsilon,
            acc_steps: m.acc_steps,
            eval_success: m.eval_success,
            mean_reward: m.mean_reward,
            wall_s: m.wall_s,
        }
    }
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    arm: &'a str,
    seed: String,
    final_success: f64,
    acc_steps: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 { xs[n / 2] } else { 0.5 * (xs[n / 2 - 1] + xs[n / 2]) }
}

fn run_arm<T: Scalar>(name: &str, config: &RunConfig, seeds: &[u64], out_dir: Option<&Path>) -> Result<ArmReport> {
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut cfg = config.clone();
        cfg.seed = seed;
        let mut trainer = Trainer::<T>::new(cfg)?;
        let dir = out_dir.map(|d| d.join(format!("{name}-seed{seed}")));
        trainer.run(dir.as_deref())?;
        runs.push(RunSummary {
            seed,
            final_success: trainer.final_evaluation()?,
            acc_steps: trainer.accumulated_steps(),
            metrics: trainer.metrics().to_vec(),
        });
    }
    Ok(ArmReport { name: name.to_string(), runs })
}

/// Trains both arms on every seed. The two configurations must agree on
/// everything except the curriculum section.
pub fn compare<T: Scalar>(
    curriculum: &RunConfig,
    baseline: &RunConfig,
    seeds: &[u64],
    out_dir: Option<&Path>,
) -> Result<ComparisonReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("comparison needs at least one seed".into()));
    }
    if curriculum.curriculum.baseline || !baseline.curriculum.baseline {
        return Err(Error::InvalidConfig("first config must use the curriculum, second the baseline".into()));
    }
    let hash = curriculum.hash_without_curriculum();
    if hash != baseline.hash_without_curriculum() {
        return Err(Error::InvalidConfig("arms differ outside the curriculum section".into()));
    }
    let report = ComparisonReport {
        config_hash: hash,
        final_epsilon: curriculum.evaluation.final_epsilon,
        curriculum: run_arm::<T>("pccl", curriculum, seeds, out_dir)?,
        baseline: run_arm::<T>("baseline", baseline, seeds, out_dir)?,
    };
    if let Some(dir) = out_dir {
        report.write(dir)?;
    }
    Ok(report)
}

impl ComparisonReport {
    /// Writes `pccl.csv`, `baseline.csv` (metrics rows with a seed column)
    /// and `summary.csv` (final numbers per seed plus a median row per arm).
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for arm in [&self.curriculum, &self.baseline] {
            let mut w = csv::Writer::from_path(dir.join(format!("{}.csv", arm.name)))?;
            for run in &arm.runs {
                for row in &run.metrics {
                    w.serialize(ArmRow::new(run.seed, row))?;
                }
            }
            w.flush()?;
        }
        let mut w = csv::Writer::from_path(dir.join("summary.csv"))?;
        for arm in [&self.curriculum, &self.baseline] {
            for run in &arm.runs {
                w.serialize(SummaryRow {
                    arm: &arm.name,
                    seed: run.seed.to_string(),
                    final_success: run.final_success,
                    acc_steps: run.acc_steps as f64,
                })?;
            }
            w.serialize(SummaryRow {
                arm: &arm.name,
                seed: "median".into(),
                final_success: arm.median_success(),
                acc_steps: arm.median_steps(),
            })?;
        }
        w.flush()?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::RewardMode;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn mismatched_arms_are_rejected() {
        let a = RunConfig::desk(RewardMode::Sparse);
        let mut b = a.as_baseline();
        b.training.batch_size += 1;
        assert!(compare::<f64>(&a, &b, &[1], None).is_err());
        assert!(compare::<f64>(&a, &a, &[1], None).is_err());
        assert!(compare::<f64>(&a, &a.as_baseline(), &[], None).is_err());
    }

    #[test]
    fn writes_report_files() {
        let mut a = RunConfig::desk(RewardMode::Sparse);
        a.agent.hidden = vec![4];
        a.training.epochs = 2;
        a.training.episodes_per_epoch = 1;
        a.training.steps_per_episode = 3;
        a.training.train_steps_per_epoch = 1;
        a.training.batch_size = 2;
        a.evaluation.goals = 2;
        a.metrics.every_epochs = 1;
        let dir = tempfile::tempdir().unwrap();
        let report = compare::<f64>(&a, &a.as_baseline(), &[1, 2], Some(dir.path())).unwrap();
        assert_eq!(report.curriculum.runs.len(), 2);
        let pccl = std::fs::read_to_string(dir.path().join("pccl.csv")).unwrap();
        assert!(pccl.starts_with("seed,epoch,epsilon,acc_steps,eval_success,mean_reward,wall_s"));
        assert_eq!(pccl.lines().count(), 1 + 2 * 2);
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(summary.lines().count(), 1 + 2 * 3);
        assert!(dir.path().join("baseline-seed2").join("metrics.csv").exists());
    }
}
