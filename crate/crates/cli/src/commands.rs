use std::fs;
use std::path::{Path, PathBuf};

use ail_sr::data::{build_manifest, AugmentSpec, PrepareOptions};
use ail_sr::eval::{compare_reports, evaluate, EvalReport, ValidationSet, SHAVE_CONVENTION};
use ail_sr::model::load_checkpoint;
use ail_sr::training::TrainLog;

use crate::{thread_pool, AugMode, CompareArgs, EvalArgs, Failure, PrepareArgs};

fn require_dir(path: &Path, what: &str) -> Result<(), Failure> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::usage(format!(
            "{what} {} is not a directory",
            path.display()
        )))
    }
}

pub fn prepare(args: &PrepareArgs) -> Result<(), Failure> {
    require_dir(&args.images, "image directory")?;
    let opts = PrepareOptions {
        scale: args.scale,
        augment: match args.aug {
            AugMode::None => AugmentSpec::none(),
            AugMode::Full => AugmentSpec::full(),
        },
        patch_size: args.patch,
        stride: args.stride,
        seed: args.seed,
    };
    let manifest = build_manifest(&args.images, &args.out, &opts)?;
    println!("images   {}", manifest.sources.len());
    println!("patches  {}", manifest.patch_count);
    println!("sha256   {}", manifest.archive_sha256);
    println!("written  {}", args.out.display());
    Ok(())
}

/// `run/checkpoints/x.ckpt` belongs to the run directory `run`.
fn run_dir_of(checkpoint: &Path) -> Option<PathBuf> {
    let parent = checkpoint.parent()?;
    if parent.file_name()? == "checkpoints" {
        parent.parent().map(Path::to_path_buf)
    } else {
        None
    }
}

pub fn eval(args: &EvalArgs) -> Result<(), Failure> {
    if !args.checkpoint.is_file() {
        return Err(Failure::missing(format!(
            "checkpoint {} does not exist",
            args.checkpoint.display()
        )));
    }
    require_dir(&args.images, "image directory")?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    if let Some(trained) = ckpt.meta.scale {
        if trained != args.scale {
            eprintln!(
                "warning: {} was trained at scale {trained} but is evaluated at scale {}",
                args.checkpoint.display(),
                args.scale
            );
        }
    }
    let pool = thread_pool(args.threads)?;
    let result = pool.install(|| -> Result<_, Failure> {
        let set = ValidationSet::load(&args.images, args.scale)?;
        Ok(evaluate(&ckpt.network, &set)?)
    })?;

    let run_dir = run_dir_of(&args.checkpoint);
    let run = run_dir
        .as_deref()
        .and_then(Path::file_name)
        .or_else(|| args.checkpoint.file_stem())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let rounds = match run_dir.map(|d| d.join("log.jsonl")).filter(|p| p.is_file()) {
        Some(log) => TrainLog {
            records: TrainLog::read_jsonl(log)?,
            timings: vec![],
        }
        .rounds()
        .cloned()
        .collect(),
        None => vec![],
    };
    let report = EvalReport {
        run,
        scheme: ckpt.meta.scheme.clone(),
        config_hash: ckpt.meta.config_hash.clone(),
        checkpoint_digest: ckpt.network.digest(),
        convention: SHAVE_CONVENTION.to_string(),
        result,
        rounds,
    };

    for s in &report.result.images {
        println!("{:<32} {:>8.4} {:.4}", s.id, s.psnr, s.ssim);
    }
    println!(
        "mean {} x{}: PSNR {:.4} dB  SSIM {:.4}  ({} images)",
        report.result.dataset,
        report.result.scale,
        report.result.mean_psnr,
        report.result.mean_ssim,
        report.result.images.len()
    );
    if let Some(dir) = &args.report {
        report.write(dir)?;
        println!("report   {}", dir.display());
    }
    Ok(())
}

/// `dir/eval.json`, or the only `dir/reports/*/eval.json`.
fn find_report(dir: &Path) -> Result<PathBuf, Failure> {
    if dir.join("eval.json").is_file() {
        return Ok(dir.to_path_buf());
    }
    let reports = dir.join("reports");
    let found: Vec<PathBuf> = match fs::read_dir(&reports) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("eval.json").is_file())
            .collect(),
        Err(_) => vec![],
    };
    match found.as_slice() {
        [one] => Ok(one.clone()),
        [] => Err(Failure::missing(format!(
            "no evaluation report in {}",
            dir.display()
        ))),
        _ => Err(Failure::usage(format!(
            "{} holds several reports; name one of its reports/ subdirectories",
            dir.display()
        ))),
    }
}

pub fn compare(args: &CompareArgs) -> Result<(), Failure> {
    let reports = args
        .runs
        .iter()
        .map(|dir| Ok(EvalReport::read(find_report(dir)?)?))
        .collect::<Result<Vec<_>, Failure>>()?;
    let table = compare_reports(&reports)?;
    let text = table.to_text();
    print!("{text}");
    if let Some(out) = &args.out {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)
                .map_err(|e| Failure::data(format!("{}: {e}", parent.display())))?;
        }
        let write = |path: &Path, body: &str| {
            fs::write(path, body).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
        };
        write(out, &table.to_csv()?)?;
        write(&out.with_extension("txt"), &text)?;
    }
    Ok(())
}
