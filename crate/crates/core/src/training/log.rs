use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeaderRecord {
    pub scheme: String,
    pub config_hash: String,
    pub seed: u64,
    pub samples: usize,
    pub parameters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// Global epoch counter, strictly increasing over the whole run.
    pub epoch: u64,
    pub round: u32,
    /// Epoch within the round; the learning-rate schedule is indexed by it.
    pub round_epoch: usize,
    pub lr: f64,
    /// Objective averaged over every pixel seen in the epoch.
    pub loss: f64,
    pub batches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    /// Importance statistics of the maps the round trained with (AIL only).
    pub mean_importance: Option<f64>,
    pub fraction_saturated: Option<f64>,
    pub val_psnr: Option<f64>,
    pub val_ssim: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Header(HeaderRecord),
    Epoch(EpochRecord),
    Round(RoundRecord),
}

/// Wall-clock duration of one epoch. Kept apart from [`LogRecord`] so that
/// the main log is reproducible byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTiming {
    pub epoch: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
    pub timings: Vec<EpochTiming>,
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

impl TrainLog {
    pub fn epochs(&self) -> impl Iterator<Item = &EpochRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Epoch(e) => Some(e),
            _ => None,
        })
    }

    pub fn rounds(&self) -> impl Iterator<Item = &RoundRecord> {
        self.records.iter().filter_map(|r| match r {
            LogRecord::Round(e) => Some(e),
            _ => None,
        })
    }

    /// Validation PSNR after each round, in round order.
    pub fn psnr_series(&self) -> Vec<f64> {
        self.rounds().filter_map(|r| r.val_psnr).collect()
    }

    /// Epoch numbering must be strictly increasing and the mean importance
    /// must never decrease from one round to the next.
    pub fn check_invariants(&self) -> Result<()> {
        let mut last_epoch = None;
        for e in self.epochs() {
            if last_epoch.is_some_and(|prev| e.epoch <= prev) {
                return Err(Error::Domain(format!(
                    "epoch {} logged out of order",
                    e.epoch
                )));
            }
            last_epoch = Some(e.epoch);
        }
        let means: Vec<f64> = self.rounds().filter_map(|r| r.mean_importance).collect();
        if let Some(w) = means.windows(2).find(|w| w[1] < w[0]) {
            return Err(Error::Domain(format!(
                "mean importance fell from {} to {}",
                w[0], w[1]
            )));
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        write_lines(path.as_ref(), &self.records)
    }

    pub fn write_timings(&self, path: impl AsRef<Path>) -> Result<()> {
        write_lines(path.as_ref(), &self.timings)
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<LogRecord>> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn epoch(epoch: u64) -> LogRecord {
        LogRecord::Epoch(EpochRecord {
            epoch,
            round: 0,
            round_epoch: epoch as usize,
            lr: 0.1,
            loss: 1.0,
            batches: 1,
        })
    }

    fn round(round: u32, mean: f64) -> LogRecord {
        LogRecord::Round(RoundRecord {
            round,
            mean_importance: Some(mean),
            fraction_saturated: Some(0.0),
            val_psnr: Some(30.0 + round as f64),
            val_ssim: None,
        })
    }

    #[test]
    fn jsonl_round_trip() {
        let log = TrainLog {
            records: vec![epoch(0), epoch(1), round(0, 0.5)],
            timings: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        log.write_jsonl(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, log.to_jsonl().unwrap());
        assert!(text.lines().next().unwrap().contains("\"type\":\"epoch\""));
        assert_eq!(TrainLog::read_jsonl(&path).unwrap(), log.records);
        assert_eq!(log.psnr_series(), vec![30.0]);
    }

    #[test]
    fn invariants() {
        let ok = TrainLog {
            records: vec![epoch(0), epoch(1), round(0, 0.4), round(1, 0.6)],
            timings: vec![],
        };
        assert!(ok.check_invariants().is_ok());
        let bad_epochs = TrainLog {
            records: vec![epoch(1), epoch(1)],
            timings: vec![],
        };
        assert!(bad_epochs.check_invariants().is_err());
        let bad_means = TrainLog {
            records: vec![round(0, 0.6), round(1, 0.4)],
            timings: vec![],
        };
        assert!(bad_means.check_invariants().is_err());
    }
}
