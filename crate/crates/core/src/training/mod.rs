//! Training loops for the three schemes.
//!
//! * **traditional** — plain per-pixel MSE against the ground truth.
//! * **ail** — adaptive importance learning: pixel weights are seeded from a
//!   teacher's errors, then alternately the network is trained under fixed
//!   weights and the weights are raised from the student's own residuals.
//! * **distill** — MSE against the ground truth plus `β` times MSE against a
//!   frozen teacher's output.
//!
//! All three share one epoch loop: a seeded permutation per `(round, epoch)`,
//! mini-batches whose last partial batch is kept, and a batch objective
//! averaged over every pixel in the batch. Per-sample gradients are computed
//! in fixed-size chunks that may run on any number of threads but are always
//! summed in the same order, so results do not depend on the thread count.

mod log;
mod loss;

pub use log::{EpochRecord, EpochTiming, HeaderRecord, LogRecord, RoundRecord, TrainLog};
pub use loss::{distill_loss, mse, weighted_mse};

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::TrainingPair;
use crate::error::{Error, Result};
use crate::eval::{evaluate, ValidationSet};
use crate::importance::{
    importance_init_from_teacher, indicator_init, random_init, update_map, zero_init, AilConfig,
    ImportanceMap, ImportanceStore, PixelError, PixelLossMap, TeacherInitConfig,
};
use crate::model::{build_network, ModelSpec, Network, NetworkGrads};
use crate::numcore::{sgd_step, OptimizerState, SgdConfig, Tensor};
use loss::{pixel_loss, PixelTerm};

/// Samples per gradient chunk. Chunks are the unit of parallel work and of
/// the fixed summation order.
const CHUNK: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Traditional,
    Ail,
    Distill,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Traditional => "traditional",
            Scheme::Ail => "ail",
            Scheme::Distill => "distill",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Epochs of the first (or only) round.
    pub epochs_per_round: usize,
    /// Epochs of each later AIL round; `None` means `epochs_per_round / 5`
    /// (at least 1).
    pub ail_round_epochs: Option<usize>,
    pub batch_size: usize,
    pub lr_initial: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub optimizer: SgdConfig,
    pub seed: u64,
    /// Continue each AIL round from the previous round's parameters rather
    /// than from a fresh initialization.
    pub warm_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs_per_round: 50,
            ail_round_epochs: None,
            batch_size: 128,
            lr_initial: 0.1,
            lr_decay_factor: 10.0,
            lr_decay_every: 10,
            optimizer: SgdConfig::default(),
            seed: 0,
            warm_start: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidConfig(what));
        if self.epochs_per_round == 0 {
            return bad("epochs_per_round must be at least 1".into());
        }
        if self.ail_round_epochs == Some(0) {
            return bad("ail_round_epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.lr_initial > 0.0) || !self.lr_initial.is_finite() {
            return bad(format!("lr_initial {} must be positive", self.lr_initial));
        }
        if !(self.lr_decay_factor > 0.0) || !self.lr_decay_factor.is_finite() {
            return bad(format!(
                "lr_decay_factor {} must be positive",
                self.lr_decay_factor
            ));
        }
        if self.lr_decay_every == 0 {
            return bad("lr_decay_every must be at least 1".into());
        }
        self.optimizer.validate()
    }

    pub fn round_epochs(&self) -> usize {
        self.ail_round_epochs
            .unwrap_or((self.epochs_per_round / 5).max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillConfig {
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    0.1
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            beta: default_beta(),
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "beta {} must be non-negative",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Where the first importance maps of an AIL run come from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImportanceInit {
    /// `g(x)` of the teacher's per-pixel error.
    Teacher,
    /// Every weight 1; with no further rounds this is traditional training.
    Ones,
    Zeros,
    Random {
        seed: u64,
    },
}

/// `lr_initial / lr_decay_factor^⌊epoch / lr_decay_every⌋`.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    cfg.lr_initial
        / cfg
            .lr_decay_factor
            .powi((epoch / cfg.lr_decay_every) as i32)
}

/// Per-pixel error maps of `net` on every sample, in sample order.
pub fn compute_error_maps(
    net: &Network,
    data: &[TrainingPair],
    kind: PixelError,
) -> Result<Vec<PixelLossMap>> {
    data.par_iter()
        .map(|pair| {
            let out = net.forward(&pair.x.to_tensor())?;
            Ok(PixelLossMap {
                sample_id: pair.id.clone(),
                height: pair.y.height(),
                width: pair.y.width(),
                values: out
                    .data()
                    .iter()
                    .zip(pair.y.values())
                    .map(|(p, t)| kind.apply(p - t))
                    .collect(),
            })
        })
        .collect()
}

/// Squared residual `(ŷ − y)²` of every pixel of every sample.
pub fn compute_residual_maps(net: &Network, data: &[TrainingPair]) -> Result<Vec<PixelLossMap>> {
    compute_error_maps(net, data, PixelError::Squared)
}

/// Callbacks invoked while a run progresses.
pub trait TrainObserver {
    fn on_epoch(&mut self, _record: &EpochRecord) -> Result<()> {
        Ok(())
    }

    /// Called once a round (including the first) has finished training.
    fn on_round_end(&mut self, _net: &Network, _record: &RoundRecord) -> Result<()> {
        Ok(())
    }
}

/// Optional side channels of a run.
#[derive(Default)]
pub struct Hooks<'a> {
    /// Evaluated after every round; results land in the round records.
    pub validation: Option<&'a ValidationSet>,
    /// AIL importance maps are persisted here, one directory per round.
    pub store: Option<&'a ImportanceStore>,
    pub observer: Option<&'a mut dyn TrainObserver>,
    /// Embedded in the log header and the importance store.
    pub config_hash: String,
}

struct Sample {
    x: Tensor,
    y: Vec<f64>,
}

/// Loss sum and summed parameter gradients of one batch.
fn batch_gradient(
    samples: &[Sample],
    net: &Network,
    batch: &[usize],
    terms: &[PixelTerm<'_>],
) -> Result<(f64, NetworkGrads)> {
    let norm: f64 = batch.iter().map(|&i| samples[i].y.len()).sum::<usize>() as f64;
    let partials = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc: Option<(f64, NetworkGrads)> = None;
            for &i in chunk {
                let s = &samples[i];
                let (out, cache) = net.forward_train(&s.x)?;
                let (loss, grad) = pixel_loss(terms[i], &s.y, out.data(), norm);
                let grads = net.backward(&cache, &Tensor::from_vec(out.shape(), grad)?)?;
                match acc.as_mut() {
                    None => acc = Some((loss, grads)),
                    Some((l, g)) => {
                        *l += loss;
                        g.accumulate(&grads);
                    }
                }
            }
            Ok(acc.expect("chunks are non-empty"))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut iter = partials.into_iter();
    let (mut loss, mut grads) = iter.next().expect("batches are non-empty");
    for (l, g) in iter {
        loss += l;
        grads.accumulate(&g);
    }
    Ok((loss, grads))
}

struct Trainer<'h> {
    samples: Vec<Sample>,
    cfg: TrainConfig,
    log: TrainLog,
    epoch: u64,
    hooks: Hooks<'h>,
}

impl<'h> Trainer<'h> {
    fn new(
        scheme: Scheme,
        spec: &ModelSpec,
        data: &[TrainingPair],
        cfg: &TrainConfig,
        hooks: Hooks<'h>,
    ) -> Result<Self> {
        cfg.validate()?;
        spec.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let samples = data
            .iter()
            .map(|p| {
                if p.x.dims() != p.y.dims() {
                    return Err(Error::shape("training pair", p.x.dims(), p.y.dims()));
                }
                Ok(Sample {
                    x: p.x.to_tensor(),
                    y: p.y.values().to_vec(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let header = HeaderRecord {
            scheme: scheme.to_string(),
            config_hash: hooks.config_hash.clone(),
            seed: cfg.seed,
            samples: samples.len(),
            parameters: crate::model::count_params(spec),
        };
        Ok(Trainer {
            samples,
            cfg: cfg.clone(),
            log: TrainLog {
                records: vec![LogRecord::Header(header)],
                timings: Vec::new(),
            },
            epoch: 0,
            hooks,
        })
    }
}

impl<'h> Trainer<'h> {
    fn train_round(
        &mut self,
        net: &mut Network,
        round: u32,
        epochs: usize,
        terms: &[PixelTerm<'_>],
    ) -> Result<()> {
        let lens = net
            .param_slices()
            .iter()
            .map(|p| p.len())
            .collect::<Vec<_>>();
        let mut opt = OptimizerState::new(lens, self.cfg.optimizer, self.cfg.lr_initial)?;
        let mut order: Vec<usize> = (0..self.samples.len()).collect();
        for round_epoch in 0..epochs {
            let started = Instant::now();
            opt.lr = lr_at(round_epoch, &self.cfg);
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
            rng.set_stream(((round as u64) << 32) | round_epoch as u64);
            order.sort_unstable();
            order.shuffle(&mut rng);

            let (mut loss_sum, mut pixels, mut batches) = (0.0, 0usize, 0usize);
            for batch in order.chunks(self.cfg.batch_size) {
                let (loss, grads) = batch_gradient(&self.samples, net, batch, terms)?;
                sgd_step(&mut net.param_slices_mut(), &grads.param_slices(), &mut opt)?;
                loss_sum += loss;
                pixels += batch
                    .iter()
                    .map(|&i| self.samples[i].y.len())
                    .sum::<usize>();
                batches += 1;
            }
            let record = EpochRecord {
                epoch: self.epoch,
                round,
                round_epoch,
                lr: opt.lr,
                loss: loss_sum / pixels as f64,
                batches,
            };
            if let Some(obs) = self.hooks.observer.as_deref_mut() {
                obs.on_epoch(&record)?;
            }
            self.log.records.push(LogRecord::Epoch(record));
            self.log.timings.push(EpochTiming {
                epoch: self.epoch,
                seconds: started.elapsed().as_secs_f64(),
            });
            self.epoch += 1;
        }
        Ok(())
    }

    fn finish_round(
        &mut self,
        net: &Network,
        round: u32,
        maps: Option<&[ImportanceMap]>,
    ) -> Result<()> {
        let (mean_importance, fraction_saturated) = match maps {
            Some(maps) => {
                let (total, ones, count) = maps
                    .iter()
                    .flat_map(|m| &m.weights)
                    .fold((0.0, 0usize, 0usize), |(t, o, c), &w| {
                        (t + w, o + usize::from(w == 1.0), c + 1)
                    });
                (Some(total / count as f64), Some(ones as f64 / count as f64))
            }
            None => (None, None),
        };
        let (val_psnr, val_ssim) = match self.hooks.validation {
            Some(set) => {
                let r = evaluate(net, set)?;
                (Some(r.mean_psnr), Some(r.mean_ssim))
            }
            None => (None, None),
        };
        let record = RoundRecord {
            round,
            mean_importance,
            fraction_saturated,
            val_psnr,
            val_ssim,
        };
        if let Some(obs) = self.hooks.observer.as_deref_mut() {
            obs.on_round_end(net, &record)?;
        }
        self.log.records.push(LogRecord::Round(record));
        Ok(())
    }

    /// Saves `maps` as round `round` and, when an earlier round exists,
    /// re-reads both to confirm no stored weight went down.
    fn persist(&self, round: u32, maps: &[ImportanceMap]) -> Result<()> {
        let Some(store) = self.hooks.store else {
            return Ok(());
        };
        store.save_round(round, maps, &self.hooks.config_hash)?;
        if round == 0 {
            return Ok(());
        }
        let (before, after) = (store.load_round(round - 1)?, store.load_round(round)?);
        for (a, b) in before.iter().zip(&after) {
            if a.sample_id != b.sample_id || a.weights.iter().zip(&b.weights).any(|(x, y)| y < x) {
                return Err(Error::CorruptStore(format!(
                    "importance of {} decreased between rounds {} and {round}",
                    b.sample_id,
                    round - 1
                )));
            }
        }
        Ok(())
    }
}

/// Plain MSE training for `cfg.epochs_per_round` epochs.
pub fn run_traditional(
    spec: &ModelSpec,
    data: &[TrainingPair],
    cfg: &TrainConfig,
    hooks: Hooks<'_>,
) -> Result<(Network, TrainLog)> {
    let mut t = Trainer::new(Scheme::Traditional, spec, data, cfg, hooks)?;
    let mut net = build_network(spec)?;
    let terms = vec![PixelTerm::Plain; data.len()];
    t.train_round(&mut net, 0, cfg.epochs_per_round, &terms)?;
    t.finish_round(&net, 0, None)?;
    Ok((net, t.log))
}

/// Adaptive importance learning.
///
/// Round 0 trains under the initial maps for `cfg.epochs_per_round` epochs.
/// Each of the `ail.iterations` later rounds first raises every weight from
/// the current student's squared residuals, then trains for
/// `cfg.round_epochs()` epochs under the new maps with a fresh optimizer and
/// learning-rate schedule.
pub fn run_ail(
    spec: &ModelSpec,
    data: &[TrainingPair],
    cfg: &TrainConfig,
    ail: &AilConfig,
    init: ImportanceInit,
    teacher_init: &TeacherInitConfig,
    teacher: Option<&Network>,
    hooks: Hooks<'_>,
) -> Result<(Network, TrainLog)> {
    ail.validate()?;
    teacher_init.validate()?;
    let mut t = Trainer::new(Scheme::Ail, spec, data, cfg, hooks)?;
    let mut maps: Vec<ImportanceMap> = match init {
        ImportanceInit::Teacher => {
            let teacher = teacher.ok_or(Error::MissingTeacher { scheme: "ail" })?;
            compute_error_maps(teacher, data, teacher_init.error)?
                .iter()
                .map(|e| importance_init_from_teacher(e, teacher_init))
                .collect()
        }
        ImportanceInit::Ones => data
            .iter()
            .map(|p| indicator_init(&p.id, p.y.height(), p.y.width()))
            .collect(),
        ImportanceInit::Zeros => data
            .iter()
            .map(|p| zero_init(&p.id, p.y.height(), p.y.width()))
            .collect(),
        ImportanceInit::Random { seed } => data
            .iter()
            .enumerate()
            .map(|(i, p)| {
                random_init(
                    &p.id,
                    p.y.height(),
                    p.y.width(),
                    seed.wrapping_add(i as u64),
                )
            })
            .collect(),
    };
    t.persist(0, &maps)?;

    let mut net = build_network(spec)?;
    {
        let terms: Vec<_> = maps
            .iter()
            .map(|m| PixelTerm::Weighted(&m.weights))
            .collect();
        t.train_round(&mut net, 0, cfg.epochs_per_round, &terms)?;
    }
    t.finish_round(&net, 0, Some(&maps))?;

    for round in 1..=ail.iterations {
        let losses = compute_error_maps(&net, data, ail.loss)?;
        maps = maps
            .iter()
            .zip(&losses)
            .map(|(m, d)| update_map(m, d, ail))
            .collect::<Result<Vec<_>>>()?;
        t.persist(round, &maps)?;
        if !cfg.warm_start {
            net = build_network(spec)?;
        }
        let terms: Vec<_> = maps
            .iter()
            .map(|m| PixelTerm::Weighted(&m.weights))
            .collect();
        t.train_round(&mut net, round, cfg.round_epochs(), &terms)?;
        t.finish_round(&net, round, Some(&maps))?;
    }
    Ok((net, t.log))
}

/// Ground-truth MSE plus `β` times MSE against the teacher's output, which
/// is computed once per sample up front.
pub fn run_distill(
    spec: &ModelSpec,
    data: &[TrainingPair],
    cfg: &TrainConfig,
    dcfg: &DistillConfig,
    teacher: Option<&Network>,
    hooks: Hooks<'_>,
) -> Result<(Network, TrainLog)> {
    dcfg.validate()?;
    let teacher = teacher.ok_or(Error::MissingTeacher { scheme: "distill" })?;
    let mut t = Trainer::new(Scheme::Distill, spec, data, cfg, hooks)?;
    let targets = data
        .par_iter()
        .map(|p| teacher.forward(&p.x.to_tensor()).map(Tensor::into_vec))
        .collect::<Result<Vec<_>>>()?;
    let terms: Vec<_> = targets
        .iter()
        .map(|t| PixelTerm::Distill {
            teacher: t,
            beta: dcfg.beta,
        })
        .collect();
    let mut net = build_network(spec)?;
    t.train_round(&mut net, 0, cfg.epochs_per_round, &terms)?;
    t.finish_round(&net, 0, None)?;
    Ok((net, t.log))
}
