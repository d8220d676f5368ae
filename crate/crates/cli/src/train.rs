use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ail_sr::data::load_dataset;
use ail_sr::eval::{evaluate, EvalReport, ValidationSet, SHAVE_CONVENTION};
use ail_sr::importance::ImportanceStore;
use ail_sr::model::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, Network};
use ail_sr::training::{
    run_ail, run_distill, run_traditional, EpochRecord, Hooks, RoundRecord, Scheme, TrainLog,
    TrainObserver,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{thread_pool, Failure, TrainArgs, TrainOverrides};

/// Files and directories a run owns inside its output directory.
const ARTIFACTS: &[&str] = &[
    "config.json",
    "log.jsonl",
    "timing.jsonl",
    "checkpoints",
    "importance",
    "reports",
];

fn apply(cfg: &mut RunConfig, o: &TrainOverrides) {
    fn set<T: Copy>(slot: &mut T, value: Option<T>) {
        if let Some(v) = value {
            *slot = v;
        }
    }
    set(&mut cfg.train.epochs_per_round, o.epochs);
    if o.round_epochs.is_some() {
        cfg.train.ail_round_epochs = o.round_epochs;
    }
    set(&mut cfg.train.batch_size, o.batch_size);
    set(&mut cfg.train.lr_initial, o.lr);
    set(&mut cfg.train.lr_decay_factor, o.lr_decay_factor);
    set(&mut cfg.train.lr_decay_every, o.lr_decay_every);
    set(&mut cfg.train.optimizer.momentum, o.momentum);
    set(&mut cfg.train.optimizer.weight_decay, o.weight_decay);
    set(&mut cfg.train.optimizer.clip, o.clip);
    set(&mut cfg.train.seed, o.seed);
    set(&mut cfg.ail.lambda, o.lambda);
    set(&mut cfg.ail.iterations, o.iterations);
    set(&mut cfg.teacher_init.mu0, o.mu0);
    set(&mut cfg.teacher_init.alpha0, o.alpha0);
    set(&mut cfg.distill.beta, o.beta);
    if let Some(out) = &o.output {
        cfg.output = out.clone();
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::data(format!("{}: {e}", path.display()))
}

/// Creates the run directory, refusing to overwrite an earlier run unless
/// `force` is set, in which case only that run's artifacts are removed.
fn prepare_output(dir: &Path, force: bool) -> Result<(), Failure> {
    let occupied = ARTIFACTS.iter().any(|a| dir.join(a).exists());
    if occupied && !force {
        return Err(Failure::usage(format!(
            "{} already holds a run; pass --force to replace it",
            dir.display()
        )));
    }
    for a in ARTIFACTS {
        let path = dir.join(a);
        if path.is_dir() {
            fs::remove_dir_all(&path).map_err(|e| io_failure(&path, e))?;
        } else if path.exists() {
            fs::remove_file(&path).map_err(|e| io_failure(&path, e))?;
        }
    }
    fs::create_dir_all(dir.join("checkpoints")).map_err(|e| io_failure(dir, e))
}

#[derive(Serialize)]
struct SavedConfig<'a> {
    config_hash: &'a str,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct TimingHeader<'a> {
    config_hash: &'a str,
}

struct RunObserver {
    checkpoints: PathBuf,
    meta: CheckpointMeta,
}

impl TrainObserver for RunObserver {
    fn on_epoch(&mut self, r: &EpochRecord) -> ail_sr::Result<()> {
        self.meta.epoch = r.epoch;
        eprintln!(
            "epoch {:>4}  round {:>2}  lr {:.2e}  loss {:.6e}",
            r.epoch, r.round, r.lr, r.loss
        );
        Ok(())
    }

    fn on_round_end(&mut self, net: &Network, r: &RoundRecord) -> ail_sr::Result<()> {
        let meta = CheckpointMeta {
            round: r.round,
            ..self.meta.clone()
        };
        save_checkpoint(
            &Checkpoint::new(net.clone(), meta),
            self.checkpoints.join(format!("round_{:02}.ckpt", r.round)),
        )?;
        if let Some(p) = r.val_psnr {
            eprintln!(
                "round {:>2}  val PSNR {p:.4}  SSIM {:.4}",
                r.round,
                r.val_ssim.unwrap_or(f64::NAN)
            );
        }
        Ok(())
    }
}

pub fn train(args: TrainArgs) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(&args.config)?;
    apply(&mut cfg, &args.overrides);
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    let hash = cfg.hash();

    let teacher = if cfg.needs_teacher() {
        let path = cfg.teacher_checkpoint.as_ref().ok_or_else(|| {
            Failure::missing(format!(
                "scheme {} needs \"teacher_checkpoint\"",
                cfg.scheme
            ))
        })?;
        if !path.is_file() {
            return Err(Failure::missing(format!(
                "teacher checkpoint {} does not exist",
                path.display()
            )));
        }
        Some(load_checkpoint(path)?.network)
    } else {
        None
    };
    if !cfg.data.train.is_dir() {
        return Err(Failure::missing(format!(
            "prepared dataset {} does not exist; run `ailsr prepare` first",
            cfg.data.train.display()
        )));
    }
    if let Some(v) = cfg.data.validation.as_ref().filter(|v| !v.is_dir()) {
        return Err(Failure::missing(format!(
            "validation directory {} does not exist",
            v.display()
        )));
    }

    let pool = thread_pool(cfg.threads)?;
    let (manifest, data) = pool.install(|| load_dataset(&cfg.data.train))?;
    let validation = match &cfg.data.validation {
        Some(dir) => Some(pool.install(|| ValidationSet::load(dir, manifest.scale))?),
        None => None,
    };

    let out = cfg.output.clone();
    prepare_output(&out, args.force)?;
    let config_path = out.join("config.json");
    let saved = serde_json::to_vec_pretty(&SavedConfig {
        config_hash: &hash,
        config: &cfg,
    })
    .expect("config serializes");
    fs::write(&config_path, saved).map_err(|e| io_failure(&config_path, e))?;

    let store = match cfg.scheme {
        Scheme::Ail => Some(ImportanceStore::open(out.join("importance"))?),
        _ => None,
    };
    let mut observer = RunObserver {
        checkpoints: out.join("checkpoints"),
        meta: CheckpointMeta {
            scheme: cfg.scheme.to_string(),
            seed: cfg.train.seed,
            epoch: 0,
            round: 0,
            config_hash: hash.clone(),
            scale: Some(manifest.scale),
        },
    };
    eprintln!(
        "{} run {}: {} patches, {} parameters, {} thread(s)",
        cfg.scheme,
        &hash[..12],
        data.len(),
        ail_sr::model::count_params(&cfg.model),
        cfg.threads
    );

    let (net, log) = pool.install(|| {
        let hooks = Hooks {
            validation: validation.as_ref(),
            store: store.as_ref(),
            observer: Some(&mut observer),
            config_hash: hash.clone(),
        };
        match cfg.scheme {
            Scheme::Traditional => run_traditional(&cfg.model, &data, &cfg.train, hooks),
            Scheme::Ail => run_ail(
                &cfg.model,
                &data,
                &cfg.train,
                &cfg.ail,
                cfg.importance_init,
                &cfg.teacher_init,
                teacher.as_ref(),
                hooks,
            ),
            Scheme::Distill => run_distill(
                &cfg.model,
                &data,
                &cfg.train,
                &cfg.distill,
                teacher.as_ref(),
                hooks,
            ),
        }
    })?;

    let last_round = log.rounds().last().map_or(0, |r| r.round);
    let final_meta = CheckpointMeta {
        round: last_round,
        ..observer.meta.clone()
    };
    let final_path = out.join("checkpoints").join("final.ckpt");
    save_checkpoint(&Checkpoint::new(net.clone(), final_meta), &final_path)?;
    log.write_jsonl(out.join("log.jsonl"))?;
    write_timings(&out.join("timing.jsonl"), &hash, &log)?;

    println!(
        "checkpoint {}  digest {}",
        final_path.display(),
        net.digest()
    );
    if let Some(set) = &validation {
        let result = pool.install(|| evaluate(&net, set))?;
        println!(
            "validation {} x{}: PSNR {:.4} dB  SSIM {:.4}",
            result.dataset, result.scale, result.mean_psnr, result.mean_ssim
        );
        let report = EvalReport {
            run: out
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            scheme: cfg.scheme.to_string(),
            config_hash: hash.clone(),
            checkpoint_digest: net.digest(),
            convention: SHAVE_CONVENTION.to_string(),
            rounds: log.rounds().cloned().collect(),
            result,
        };
        report.write(out.join("reports").join(&report.result.dataset))?;
    }
    Ok(())
}

fn write_timings(path: &Path, hash: &str, log: &TrainLog) -> Result<(), Failure> {
    let to_line = |v: serde_json::Result<String>| v.expect("record serializes") + "\n";
    let mut text = to_line(serde_json::to_string(&TimingHeader { config_hash: hash }));
    for t in &log.timings {
        text.push_str(&to_line(serde_json::to_string(t)));
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| io_failure(path, e))
}
