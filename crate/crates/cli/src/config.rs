//! The run configuration: one JSON document per training run.
//!
//! ```json
//! {
//!   "scheme": "ail",
//!   "model": { "depth": 20, "base_width": 64, "ratio": 0.8 },
//!   "train": { "epochs_per_round": 50, "batch_size": 128 },
//!   "ail": { "lambda": 0.15, "iterations": 10 },
//!   "teacher_checkpoint": "../teacher/checkpoints/final.ckpt",
//!   "data": { "train": "prepared/train", "validation": "images/val" },
//!   "output": "runs/ail"
//! }
//! ```
//!
//! Every section except `scheme`, `data` and `output` may be omitted and
//! falls back to its defaults. Unknown keys anywhere are rejected. Relative
//! paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use ail_sr::importance::{AilConfig, TeacherInitConfig};
use ail_sr::model::ModelSpec;
use ail_sr::training::{DistillConfig, ImportanceInit, Scheme, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    /// Directory written by `ailsr prepare`.
    pub train: PathBuf,
    /// Image directory scored after every round, if any.
    #[serde(default)]
    pub validation: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scheme: Scheme,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub ail: AilConfig,
    #[serde(default)]
    pub teacher_init: TeacherInitConfig,
    #[serde(default)]
    pub distill: DistillConfig,
    #[serde(default = "default_init")]
    pub importance_init: ImportanceInit,
    /// Needed by `distill` and by `ail` with teacher initialization.
    #[serde(default)]
    pub teacher_checkpoint: Option<PathBuf>,
    pub data: DataPaths,
    pub output: PathBuf,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_init() -> ImportanceInit {
    ImportanceInit::Teacher
}

fn default_threads() -> usize {
    1
}

impl RunConfig {
    /// Parses and validates `path`, resolving relative paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        let bad = |e: serde_json::Error| Failure::usage(format!("{}: {e}", path.display()));
        let mut value: serde_json::Value = serde_json::from_str(&text).map_err(bad)?;
        // A run directory's config.json wraps the config together with its hash.
        if value.get("config_hash").is_some() && value.get("config").is_some() {
            value = value["config"].take();
        }
        let mut cfg: RunConfig = serde_json::from_value(value).map_err(bad)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut cfg.data.train);
        if let Some(v) = cfg.data.validation.as_mut() {
            resolve(v);
        }
        if let Some(t) = cfg.teacher_checkpoint.as_mut() {
            resolve(t);
        }
        resolve(&mut cfg.output);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.model.validate()?;
        self.train.validate()?;
        self.ail.validate()?;
        self.teacher_init.validate()?;
        self.distill.validate()?;
        if self.threads == 0 {
            return Err(Failure::usage("threads must be at least 1"));
        }
        Ok(())
    }

    /// Whether this run reads a teacher checkpoint.
    pub fn needs_teacher(&self) -> bool {
        match self.scheme {
            Scheme::Traditional => false,
            Scheme::Ail => self.importance_init == ImportanceInit::Teacher,
            Scheme::Distill => true,
        }
    }

    /// SHA-256 of the canonical JSON form without the output directory, so
    /// the same experiment written to two places shares one hash.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        value
            .as_object_mut()
            .expect("config is an object")
            .remove("output");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let path = dir.join("run.json");
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            r#"{"scheme": "ail", "data": {"train": "prep"}, "output": "out", "teacher_checkpoint": "t.ckpt"}"#,
        );
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.ail.iterations, 10);
        assert_eq!(cfg.ail.lambda, 0.15);
        assert_eq!(cfg.train.epochs_per_round, 50);
        assert_eq!(cfg.train.batch_size, 128);
        assert_eq!(cfg.model.depth, 20);
        assert_eq!(cfg.threads, 1);
        assert_eq!(cfg.data.train, dir.path().join("prep"));
        assert_eq!(
            cfg.teacher_checkpoint.as_deref(),
            Some(dir.path().join("t.ckpt").as_path())
        );
        assert!(cfg.needs_teacher());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for text in [
            r#"{"scheme": "ail", "data": {"train": "p"}, "output": "o", "colour": 1}"#,
            r#"{"scheme": "ail", "data": {"train": "p"}, "output": "o", "ail": {"lamda": 0.1}}"#,
            r#"{"scheme": "boosting", "data": {"train": "p"}, "output": "o"}"#,
        ] {
            let err = RunConfig::load(&write(dir.path(), text)).unwrap_err();
            assert_eq!(err.code, 2, "{text}");
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            r#"{"scheme": "traditional", "data": {"train": "p"}, "output": "o", "train": {"batch_size": 0}}"#,
        );
        assert_eq!(RunConfig::load(&path).unwrap_err().code, 2);
    }

    #[test]
    fn hash_ignores_output_but_not_threads() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunConfig::load(&write(
            dir.path(),
            r#"{"scheme": "traditional", "data": {"train": "p"}, "output": "a"}"#,
        ))
        .unwrap();
        let mut b = a.clone();
        b.output = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.threads = 2;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn saved_run_config_loads_back() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunConfig::load(&write(
            dir.path(),
            r#"{"scheme": "distill", "data": {"train": "p"}, "output": "a"}"#,
        ))
        .unwrap();
        let saved = serde_json::json!({"config_hash": a.hash(), "config": a});
        let b = RunConfig::load(&write(dir.path(), &saved.to_string())).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
    }
}
