use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One row of the metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Zero-based index of the epoch just finished.
    pub epoch: u64,
    pub epsilon: f64,
    /// Environment steps taken since the start of training.
    pub acc_steps: u64,
    pub eval_success: Option<f64>,
    /// Mean undiscounted episode return over the epoch.
    pub mean_reward: f64,
    pub wall_s: Option<f64>,
}

pub const METRICS_HEADER: &str = "epoch,epsilon,acc_steps,eval_success,mean_reward,wall_s";

pub fn write_metrics_csv<W: Write>(out: W, rows: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(METRICS_HEADER.split(','))?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_metrics(path: impl AsRef<Path>, rows: &[MetricsRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_metrics_csv(std::io::BufWriter::new(file), rows)
}

pub fn load_metrics(path: impl AsRef<Path>) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Into::into)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_empty_cells() {
        let rows = vec![
            MetricsRecord { epoch: 9, epsilon: 0.25, acc_steps: 500, eval_success: None, mean_reward: -1.0, wall_s: None },
            MetricsRecord {
                epoch: 99,
                epsilon: 0.1,
                acc_steps: 5000,
                eval_success: Some(0.5),
                mean_reward: -0.5,
                wall_s: Some(1.5),
            },
        ];
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], METRICS_HEADER);
        assert_eq!(lines[1], "9,0.25,500,,-1.0,");
        assert_eq!(lines[2], "99,0.1,5000,0.5,-0.5,1.5");
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![MetricsRecord {
            epoch: 0,
            epsilon: 0.123_456_789_012_345_67,
            acc_steps: 3,
            eval_success: Some(1.0),
            mean_reward: 0.0,
            wall_s: None,
        }];
        save_metrics(&path, &rows).unwrap();
        assert_eq!(load_metrics(&path).unwrap(), rows);
    }
}
