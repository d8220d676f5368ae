//! Teacher → traditional student vs. AIL student on the bundled corpus.
//!
//! ```text
//! cargo run --release -p ail-sr --example toy_experiment
//! ```
//!
//! Knobs come from environment variables so the experiment can be re-sized
//! without editing code: `TEACHER_EPOCHS`, `STUDENT_EPOCHS`, `ROUND_EPOCHS`,
//! `ROUNDS`, `LR`, `TEACHER_LR`, `BATCH`, `DECAY_EVERY`, `CLIP`, `PATCH`.

use std::time::Instant;

use ail_sr::data::{extract_patches, load_images, make_pair};
use ail_sr::eval::{evaluate, evaluate_bicubic, ValidationSet};
use ail_sr::importance::{AilConfig, TeacherInitConfig};
use ail_sr::model::ModelSpec;
use ail_sr::numcore::SgdConfig;
use ail_sr::training::{run_ail, run_traditional, Hooks, ImportanceInit, TrainConfig};

fn knob<T: std::str::FromStr>(name: &str, default: T) -> T {
    std::env::var(name)
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(default)
}

fn main() -> ail_sr::Result<()> {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/corpus");
    let patch: usize = knob("PATCH", 32);
    let mut data = Vec::new();
    for (id, img) in load_images(root.join("train"))? {
        let pair = make_pair(format!("{id}|s1_r0"), &img, 2)?;
        data.extend(extract_patches(&pair, patch, patch)?);
    }
    let val = ValidationSet::load(root.join("val"), 2)?;
    println!(
        "{} patches, {} validation images",
        data.len(),
        val.pairs.len()
    );
    println!("bicubic     {:.4}", evaluate_bicubic(&val)?.mean_psnr);

    let base = TrainConfig {
        epochs_per_round: knob("STUDENT_EPOCHS", 40),
        ail_round_epochs: Some(knob("ROUND_EPOCHS", 8)),
        batch_size: knob("BATCH", 4),
        lr_initial: knob("LR", 0.03),
        lr_decay_every: knob("DECAY_EVERY", 20),
        optimizer: SgdConfig {
            clip: knob("CLIP", 0.0003),
            ..SgdConfig::default()
        },
        ..TrainConfig::default()
    };

    let t0 = Instant::now();
    let teacher_cfg = TrainConfig {
        epochs_per_round: knob("TEACHER_EPOCHS", 40),
        lr_initial: knob("TEACHER_LR", 0.03),
        ..base.clone()
    };
    let (teacher, log) = run_traditional(
        &ModelSpec::with_width(8, 32, 1),
        &data,
        &teacher_cfg,
        Hooks::default(),
    )?;
    let losses: Vec<String> = log.epochs().map(|e| format!("{:.2e}", e.loss)).collect();
    println!(
        "teacher     {:.4}  ({:.1}s) losses {}",
        evaluate(&teacher, &val)?.mean_psnr,
        t0.elapsed().as_secs_f64(),
        losses.join(" ")
    );

    let student = ModelSpec::with_width(8, 8, 2);
    let t1 = Instant::now();
    let hooks = Hooks {
        validation: Some(&val),
        ..Hooks::default()
    };
    let (trad, log) = run_traditional(&student, &data, &base, hooks)?;
    let losses: Vec<String> = log.epochs().map(|e| format!("{:.2e}", e.loss)).collect();
    println!(
        "traditional {:.4}  ({:.1}s) losses {}",
        evaluate(&trad, &val)?.mean_psnr,
        t1.elapsed().as_secs_f64(),
        losses.join(" ")
    );

    let t2 = Instant::now();
    let ail = AilConfig {
        iterations: knob("ROUNDS", 5),
        ..AilConfig::default()
    };
    let hooks = Hooks {
        validation: Some(&val),
        ..Hooks::default()
    };
    let (student_ail, log) = run_ail(
        &student,
        &data,
        &base,
        &ail,
        ImportanceInit::Teacher,
        &TeacherInitConfig::default(),
        Some(&teacher),
        hooks,
    )?;
    println!(
        "ail         {:.4}  ({:.1}s)",
        evaluate(&student_ail, &val)?.mean_psnr,
        t2.elapsed().as_secs_f64()
    );
    for r in log.rounds() {
        println!(
            "  round {}  mean w {:.4}  saturated {:.4}  psnr {:.4}",
            r.round,
            r.mean_importance.unwrap_or(f64::NAN),
            r.fraction_saturated.unwrap_or(f64::NAN),
            r.val_psnr.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
