//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits with a non-zero status if any of them fails.
//!
//! Everything runs on a single worker thread so that results are
//! reproducible and the runtime budgets are meaningful.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ail_sr::data::{extract_patches, load_images, make_pair, ImageY, TrainingPair};
use ail_sr::eval::{evaluate, psnr, ssim, ValidationSet};
use ail_sr::importance::{
    importance_update, penalty_h, AilConfig, ImportanceStore, TeacherInitConfig,
};
use ail_sr::model::{
    build_network, count_params, count_weights, Checkpoint, CheckpointMeta, ModelSpec, Network,
};
use ail_sr::numcore::{
    conv2d_backward, conv2d_forward, grad_check, relu_backward, relu_forward, ConvParams,
    SgdConfig, Tensor, DEFAULT_EPS,
};
use ail_sr::training::{
    distill_loss, run_ail, run_distill, run_traditional, weighted_mse, DistillConfig, Hooks,
    ImportanceInit, TrainConfig, TrainLog,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/corpus")
}

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn within(elapsed: Duration, budget_secs: u64) -> Result<(), String> {
    ensure(elapsed <= Duration::from_secs(budget_secs), || {
        format!("took {:.1}s, budget {budget_secs}s", elapsed.as_secs_f64())
    })
}

fn fail(e: ail_sr::Error) -> String {
    e.to_string()
}

// ---------------------------------------------------------------------------
// importance update

const GRID_STEP: f64 = 1e-6;

fn random_triples() -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..1000)
        .map(|_| {
            let w_prev = rng.random_range(0.0..=1.0);
            let d = rng.random_range(0.0..=10.0);
            let lambda = 1.0 - rng.random_range(0.0..1.0);
            (w_prev, d, lambda)
        })
        .collect()
}

/// Grid `w′ + k·step` for `k = 0..=last`, all inside `[w′, 1]`.
fn grid_last(w_prev: f64) -> usize {
    ((1.0 - w_prev) / GRID_STEP).floor() as usize
}

fn objective(w_prev: f64, d: f64, lambda: f64, k: usize) -> f64 {
    let w = w_prev + k as f64 * GRID_STEP;
    d * w + penalty_h(w, w_prev, lambda).expect("grid point above w′")
}

/// Minimizing grid index by ternary search; relies on the convexity that the
/// second-difference criterion establishes on the very same grid.
fn grid_argmin(w_prev: f64, d: f64, lambda: f64) -> usize {
    let f = |k| objective(w_prev, d, lambda, k);
    let (mut lo, mut hi) = (0usize, grid_last(w_prev));
    while hi - lo > 2 {
        let m1 = lo + (hi - lo) / 3;
        let m2 = hi - (hi - lo) / 3;
        if f(m1) <= f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    (lo..=hi).min_by(|&a, &b| f(a).total_cmp(&f(b))).unwrap()
}

fn scan_argmin(w_prev: f64, d: f64, lambda: f64) -> usize {
    (0..=grid_last(w_prev))
        .min_by(|&a, &b| {
            objective(w_prev, d, lambda, a).total_cmp(&objective(w_prev, d, lambda, b))
        })
        .unwrap()
}

fn criterion_closed_form() -> Outcome {
    let start = Instant::now();
    let triples = random_triples();
    let mut worst: f64 = 0.0;
    for (i, &(w_prev, d, lambda)) in triples.iter().enumerate() {
        let closed = importance_update(w_prev, d, lambda).map_err(fail)?;
        let k = grid_argmin(w_prev, d, lambda);
        // the exhaustive scan cross-checks the search on a sample of triples
        if i % 100 == 0 {
            let full = scan_argmin(w_prev, d, lambda);
            ensure(full == k, || {
                format!("triple {i}: search found {k}, scan found {full}")
            })?;
        }
        let grid_w = w_prev + k as f64 * GRID_STEP;
        let gap = (closed - grid_w).abs();
        worst = worst.max(gap);
        ensure(gap <= 2e-6, || {
            format!("w′={w_prev} d={d} λ={lambda}: closed form {closed} vs grid {grid_w}")
        })?;
    }
    let elapsed = start.elapsed();
    within(elapsed, 5)?;
    Ok(format!(
        "1000 triples, max |closed − grid| = {worst:.2e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

fn criterion_convexity() -> Outcome {
    let start = Instant::now();
    let mut min_second: f64 = f64::INFINITY;
    let mut points = 0usize;
    for &(w_prev, d, lambda) in &random_triples() {
        let last = grid_last(w_prev);
        if last < 2 {
            continue;
        }
        let (mut a, mut b) = (
            objective(w_prev, d, lambda, 0),
            objective(w_prev, d, lambda, 1),
        );
        for k in 2..=last {
            let c = objective(w_prev, d, lambda, k);
            let second = c - 2.0 * b + a;
            min_second = min_second.min(second);
            ensure(second >= -1e-12, || {
                format!("w′={w_prev} d={d} λ={lambda}: second difference {second:.3e} at k={k}")
            })?;
            (a, b) = (b, c);
            points += 1;
        }
    }
    Ok(format!(
        "{points} second differences, min {min_second:.3e}, {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------
// network size

fn criterion_parameter_counts() -> Outcome {
    // Closed form (weights and biases) and the published table, which counts
    // weights only and rounds to thousands.
    let expected = [
        (13, 27_860, 28),
        (16, 42_065, 42),
        (22, 79_223, 79),
        (32, 167_073, 166),
        (64, 665_921, 665),
    ];
    let mut parts = Vec::new();
    for (width, total, thousands) in expected {
        let spec = ModelSpec::with_width(20, width, 0);
        let n = count_params(&spec);
        ensure(n == total, || {
            format!("width {width}: {n} parameters, expected {total}")
        })?;
        let net = build_network(&spec).map_err(fail)?;
        ensure(net.num_params() == n, || {
            format!("width {width}: network stores {} scalars", net.num_params())
        })?;
        let weights = count_weights(&spec);
        let rounded = (weights as f64 / 1000.0).round() as usize;
        ensure(rounded == thousands, || {
            format!("width {width}: {weights} weights round to {rounded}K, table says {thousands}K")
        })?;
        parts.push(format!("f{width}={n}"));
    }
    Ok(format!(
        "{} (weights-only counts round to the published K)",
        parts.join(" ")
    ))
}

// ---------------------------------------------------------------------------
// gradients

fn random_tensor(rng: &mut ChaCha8Rng, shape: [usize; 4], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape, |_, _, _, _| rng.random_range(lo..hi))
}

fn dot(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn checked(
    name: &str,
    report: ail_sr::numcore::GradCheckReport,
    worst: &mut f64,
) -> Result<(), String> {
    *worst = worst.max(report.max_rel_error);
    ensure(report.passed, || format!("{name}: {report:?}"))
}

fn criterion_gradients() -> Outcome {
    let start = Instant::now();
    let tol = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;

    // convolution: input, weights and biases
    let x = random_tensor(&mut rng, [1, 2, 8, 8], -1.0, 1.0);
    let params = ConvParams::new(
        random_tensor(&mut rng, [3, 2, 3, 3], -0.5, 0.5),
        (0..3).map(|_| rng.random_range(-0.5..0.5)).collect(),
    )
    .map_err(fail)?;
    let go = random_tensor(&mut rng, [1, 3, 8, 8], -1.0, 1.0);
    let grads = conv2d_backward(&x, &params, &go, 1).map_err(fail)?;
    let conv_obj = |x: &Tensor, p: &ConvParams| dot(&conv2d_forward(x, p, 1).unwrap(), &go);
    checked(
        "conv input",
        grad_check(x.data(), grads.input.data(), DEFAULT_EPS, tol, |v| {
            conv_obj(&Tensor::from_vec(x.shape(), v.to_vec()).unwrap(), &params)
        }),
        &mut worst,
    )?;
    checked(
        "conv weights",
        grad_check(
            params.weights.data(),
            grads.weights.data(),
            DEFAULT_EPS,
            tol,
            |v| {
                let p = ConvParams::new(
                    Tensor::from_vec(params.weights.shape(), v.to_vec()).unwrap(),
                    params.biases.clone(),
                )
                .unwrap();
                conv_obj(&x, &p)
            },
        ),
        &mut worst,
    )?;
    checked(
        "conv biases",
        grad_check(&params.biases, &grads.biases, DEFAULT_EPS, tol, |v| {
            let p = ConvParams::new(params.weights.clone(), v.to_vec()).unwrap();
            conv_obj(&x, &p)
        }),
        &mut worst,
    )?;

    // ReLU, away from the kink so central differences are exact
    let x = Tensor::from_fn([1, 1, 8, 8], |_, _, _, _| {
        let v: f64 = rng.random_range(0.01..1.0);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    });
    let go = random_tensor(&mut rng, [1, 1, 8, 8], -1.0, 1.0);
    let analytic = relu_backward(&x, &go).map_err(fail)?;
    checked(
        "relu",
        grad_check(x.data(), analytic.data(), DEFAULT_EPS, tol, |v| {
            dot(
                &relu_forward(&Tensor::from_vec(x.shape(), v.to_vec()).unwrap()),
                &go,
            )
        }),
        &mut worst,
    )?;

    // residual add: the whole network, whose output is x + body(x); the
    // input gradient carries the identity path
    let mut net = build_network(&ModelSpec::with_width(3, 2, 5)).map_err(fail)?;
    for s in net.param_slices_mut() {
        for v in s.iter_mut() {
            *v += rng.random_range(-0.1..0.1);
        }
    }
    let x = random_tensor(&mut rng, [1, 1, 6, 6], 0.0, 1.0);
    let go = random_tensor(&mut rng, [1, 1, 6, 6], -1.0, 1.0);
    let (_, cache) = net.forward_train(&x).map_err(fail)?;
    let grads = net.backward(&cache, &go).map_err(fail)?;
    let net_obj = |net: &Network, x: &Tensor| dot(&net.forward(x).unwrap(), &go);
    checked(
        "residual input",
        grad_check(x.data(), grads.input.data(), DEFAULT_EPS, tol, |v| {
            net_obj(&net, &Tensor::from_vec(x.shape(), v.to_vec()).unwrap())
        }),
        &mut worst,
    )?;
    let flat: Vec<f64> = net.param_slices().concat();
    checked(
        "residual parameters",
        grad_check(
            &flat,
            &grads.param_slices().concat(),
            DEFAULT_EPS,
            tol,
            |v| {
                let mut probe = net.clone();
                let mut offset = 0;
                for s in probe.param_slices_mut() {
                    let n = s.len();
                    s.copy_from_slice(&v[offset..offset + n]);
                    offset += n;
                }
                net_obj(&probe, &x)
            },
        ),
        &mut worst,
    )?;

    // losses with respect to the prediction
    let y = random_tensor(&mut rng, [1, 1, 8, 8], 0.0, 1.0);
    let y_hat = random_tensor(&mut rng, [1, 1, 8, 8], 0.0, 1.0);
    let teacher = random_tensor(&mut rng, [1, 1, 8, 8], 0.0, 1.0);
    let mut w = ail_sr::importance::ImportanceMap::filled("g", 8, 8, 0.0);
    for v in &mut w.weights {
        *v = rng.random_range(0.0..=1.0);
    }
    let with = |v: &[f64]| Tensor::from_vec(y_hat.shape(), v.to_vec()).unwrap();
    let (_, g) = weighted_mse(&y, &y_hat, &w).map_err(fail)?;
    checked(
        "weighted mse",
        grad_check(y_hat.data(), g.data(), DEFAULT_EPS, tol, |v| {
            weighted_mse(&y, &with(v), &w).unwrap().0
        }),
        &mut worst,
    )?;
    let (_, g) = distill_loss(&y, &teacher, &y_hat, 0.1).map_err(fail)?;
    checked(
        "distill",
        grad_check(y_hat.data(), g.data(), DEFAULT_EPS, tol, |v| {
            distill_loss(&y, &teacher, &with(v), 0.1).unwrap().0
        }),
        &mut worst,
    )?;

    let elapsed = start.elapsed();
    within(elapsed, 30)?;
    Ok(format!(
        "conv, relu, residual, weighted mse, distill; max rel err {worst:.2e}, {:.2}s",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------
// training runs

fn patches(images: &[(String, ImageY)], patch: usize) -> Result<Vec<TrainingPair>, String> {
    let mut data = Vec::new();
    for (id, img) in images {
        let pair = make_pair(format!("{id}|s1_r0"), img, 2).map_err(fail)?;
        data.extend(extract_patches(&pair, patch, patch).map_err(fail)?);
    }
    Ok(data)
}

fn small_corpus() -> Result<Vec<TrainingPair>, String> {
    let images = load_images(corpus().join("train")).map_err(fail)?;
    patches(&images[..4], 32)
}

fn small_config() -> TrainConfig {
    TrainConfig {
        epochs_per_round: 4,
        ail_round_epochs: Some(2),
        batch_size: 4,
        lr_initial: 0.03,
        lr_decay_every: 2,
        optimizer: SgdConfig {
            clip: 0.0003,
            ..SgdConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn criterion_degenerate_ail() -> Outcome {
    let start = Instant::now();
    let data = small_corpus()?;
    let spec = ModelSpec::with_width(8, 8, 3);
    let cfg = small_config();
    let ail = AilConfig {
        iterations: 0,
        ..AilConfig::default()
    };
    let (trad, trad_log) = run_traditional(&spec, &data, &cfg, Hooks::default()).map_err(fail)?;
    let (ones, ones_log) = run_ail(
        &spec,
        &data,
        &cfg,
        &ail,
        ImportanceInit::Ones,
        &TeacherInitConfig::default(),
        None,
        Hooks::default(),
    )
    .map_err(fail)?;
    let bits = |net: &Network| -> Vec<u64> {
        net.param_slices()
            .concat()
            .iter()
            .map(|v| v.to_bits())
            .collect()
    };
    ensure(bits(&trad) == bits(&ones), || {
        "parameters differ".to_string()
    })?;
    let losses = |log: &TrainLog| -> Vec<u64> { log.epochs().map(|e| e.loss.to_bits()).collect() };
    ensure(losses(&trad_log) == losses(&ones_log), || {
        "epoch losses differ".to_string()
    })?;
    let elapsed = start.elapsed();
    within(elapsed, 120)?;
    Ok(format!(
        "{} patches, digest {}, {:.1}s",
        data.len(),
        &trad.digest()[..16],
        elapsed.as_secs_f64()
    ))
}

/// Result of the teacher → students experiment, shared by two criteria.
struct ToyRun {
    store: tempfile::TempDir,
    rounds: u32,
    teacher_psnr: f64,
    traditional_psnr: f64,
    ail_psnr: f64,
    series: Vec<f64>,
    elapsed: Duration,
}

fn toy_config() -> TrainConfig {
    TrainConfig {
        epochs_per_round: 40,
        ail_round_epochs: Some(8),
        batch_size: 4,
        lr_initial: 0.03,
        lr_decay_every: 20,
        optimizer: SgdConfig {
            clip: 0.0003,
            ..SgdConfig::default()
        },
        ..TrainConfig::default()
    }
}

fn toy_run() -> Result<ToyRun, String> {
    let start = Instant::now();
    let images = load_images(corpus().join("train")).map_err(fail)?;
    ensure(images.len() >= 20, || {
        format!("only {} training images", images.len())
    })?;
    let data = patches(&images, 32)?;
    let val = ValidationSet::load(corpus().join("val"), 2).map_err(fail)?;
    let cfg = toy_config();

    let (teacher, _) = run_traditional(
        &ModelSpec::with_width(8, 32, 1),
        &data,
        &cfg,
        Hooks::default(),
    )
    .map_err(fail)?;
    let student = ModelSpec::with_width(8, 8, 2);
    let (trad, _) = run_traditional(&student, &data, &cfg, Hooks::default()).map_err(fail)?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = ImportanceStore::open(dir.path()).map_err(fail)?;
    let ail = AilConfig {
        iterations: 5,
        ..AilConfig::default()
    };
    let hooks = Hooks {
        validation: Some(&val),
        store: Some(&store),
        ..Hooks::default()
    };
    let (ail_net, log) = run_ail(
        &student,
        &data,
        &cfg,
        &ail,
        ImportanceInit::Teacher,
        &TeacherInitConfig::default(),
        Some(&teacher),
        hooks,
    )
    .map_err(fail)?;
    Ok(ToyRun {
        store: dir,
        rounds: ail.iterations,
        teacher_psnr: evaluate(&teacher, &val).map_err(fail)?.mean_psnr,
        traditional_psnr: evaluate(&trad, &val).map_err(fail)?.mean_psnr,
        ail_psnr: evaluate(&ail_net, &val).map_err(fail)?.mean_psnr,
        series: log.psnr_series(),
        elapsed: start.elapsed(),
    })
}

fn criterion_store_monotone(run: &ToyRun) -> Outcome {
    let store = ImportanceStore::open(run.store.path()).map_err(fail)?;
    let rounds = store.rounds().map_err(fail)?;
    ensure(rounds == (0..=run.rounds).collect::<Vec<_>>(), || {
        format!("stored rounds {rounds:?}")
    })?;
    let mut prev = store.load_round(0).map_err(fail)?;
    let mut means = vec![prev.iter().map(|m| m.mean()).sum::<f64>() / prev.len() as f64];
    for &round in &rounds[1..] {
        let next = store.load_round(round).map_err(fail)?;
        ensure(next.len() == prev.len(), || {
            format!("round {round}: {} maps", next.len())
        })?;
        for (a, b) in prev.iter().zip(&next) {
            ensure(a.sample_id == b.sample_id, || {
                format!("round {round}: order changed")
            })?;
            if let Some(i) = (0..a.weights.len()).find(|&i| b.weights[i] < a.weights[i]) {
                return Err(format!(
                    "round {round}, {}: pixel {i} decreased",
                    b.sample_id
                ));
            }
            ensure(a.mean() >= 1.0 || b.mean() > a.mean(), || {
                format!(
                    "round {round}, {}: mean stalled at {} below saturation",
                    b.sample_id,
                    a.mean()
                )
            })?;
        }
        means.push(next.iter().map(|m| m.mean()).sum::<f64>() / next.len() as f64);
        prev = next;
    }
    let means: Vec<String> = means.iter().map(|m| format!("{m:.4}")).collect();
    Ok(format!(
        "{} maps over {} rounds, mean importance {}",
        prev.len(),
        rounds.len(),
        means.join(" → ")
    ))
}

fn criterion_toy_experiment(run: &ToyRun) -> Outcome {
    let steps = run.series.len().saturating_sub(1);
    let rising = run.series.windows(2).filter(|p| p[1] >= p[0]).count();
    let series: Vec<String> = run.series.iter().map(|p| format!("{p:.3}")).collect();
    let detail = format!(
        "teacher {:.4} dB, traditional {:.4} dB, AIL {:.4} dB; rounds {} ({rising}/{steps} non-decreasing); {:.0}s",
        run.teacher_psnr,
        run.traditional_psnr,
        run.ail_psnr,
        series.join(" "),
        run.elapsed.as_secs_f64()
    );
    ensure(steps == run.rounds as usize, || {
        format!("{detail}: expected {} steps", run.rounds)
    })?;
    ensure(run.ail_psnr >= run.traditional_psnr - 0.05, || {
        detail.clone()
    })?;
    ensure(rising + 2 >= steps, || detail.clone())?;
    within(run.elapsed, 30 * 60).map_err(|e| format!("{detail}: {e}"))?;
    Ok(detail)
}

// ---------------------------------------------------------------------------
// teacher importance and metrics

fn criterion_teacher_importance() -> Outcome {
    let cfg = TeacherInitConfig::default();
    let g0 = cfg.importance(0.0);
    ensure(g0 == 1.0, || format!("g(0) = {g0:e}"))?;
    let grid: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
    for p in grid.windows(2) {
        let (a, b) = (cfg.importance(p[0]), cfg.importance(p[1]));
        ensure(b < a, || {
            format!("g({}) = {b:e} is not below g({}) = {a:e}", p[1], p[0])
        })?;
    }
    let expected = (1.0 + (-cfg.mu0 * cfg.alpha0).exp()) / 2.0;
    let mid = cfg.importance(cfg.mu0);
    ensure((mid - expected).abs() <= 1e-12, || {
        format!("g(μ₀) = {mid}, expected {expected}")
    })?;
    Ok(format!(
        "g(0) = 1, strictly decreasing on 1000 points of [0, 1], g(μ₀) = {mid:.15}"
    ))
}

fn criterion_metrics() -> Outcome {
    let mut images = load_images(corpus().join("train")).map_err(fail)?;
    images.extend(load_images(corpus().join("val")).map_err(fail)?);
    let shave = 2;
    let mut worst_psnr: f64 = 0.0;
    let mut worst_ssim: f64 = 0.0;
    for (id, y) in &images {
        let shifted: Vec<f64> = y
            .values()
            .iter()
            .map(|&v| if v <= 0.5 { v + 0.1 } else { v - 0.1 })
            .collect();
        let y_hat = ImageY::new(y.height(), y.width(), shifted).map_err(fail)?;
        let p = psnr(y, &y_hat, shave).map_err(fail)?;
        worst_psnr = worst_psnr.max((p - 20.0).abs());
        ensure((p - 20.0).abs() <= 1e-9, || {
            format!("{id}: PSNR at MSE 0.01 is {p}")
        })?;
        let s = ssim(y, y, shave).map_err(fail)?;
        worst_ssim = worst_ssim.max((s - 1.0).abs());
        ensure((s - 1.0).abs() <= 1e-12, || {
            format!("{id}: SSIM(y, y) = {s}")
        })?;
    }
    Ok(format!(
        "{} images, max |PSNR − 20| = {worst_psnr:.1e}, max |SSIM − 1| = {worst_ssim:.1e}",
        images.len()
    ))
}

// ---------------------------------------------------------------------------
// reproducibility

/// Checkpoint bytes, log lines and stored importance files of one run.
fn run_artifacts(
    scheme: &str,
    data: &[TrainingPair],
    teacher: &Network,
) -> Result<Vec<u8>, String> {
    let spec = ModelSpec::with_width(8, 8, 4);
    let cfg = small_config();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = ImportanceStore::open(dir.path()).map_err(fail)?;
    let hooks = Hooks {
        store: Some(&store),
        config_hash: format!("acceptance-{scheme}"),
        ..Hooks::default()
    };
    let (net, log) = match scheme {
        "traditional" => run_traditional(&spec, data, &cfg, hooks),
        "ail" => run_ail(
            &spec,
            data,
            &cfg,
            &AilConfig {
                iterations: 2,
                ..AilConfig::default()
            },
            ImportanceInit::Teacher,
            &TeacherInitConfig::default(),
            Some(teacher),
            hooks,
        ),
        _ => run_distill(
            &spec,
            data,
            &cfg,
            &DistillConfig::default(),
            Some(teacher),
            hooks,
        ),
    }
    .map_err(fail)?;
    let meta = CheckpointMeta {
        scheme: scheme.to_string(),
        epoch: log.epochs().last().map_or(0, |e| e.epoch),
        config_hash: format!("acceptance-{scheme}"),
        scale: Some(2),
        ..CheckpointMeta::default()
    };
    let mut bytes = Checkpoint::new(net, meta).to_bytes();
    bytes.extend(log.to_jsonl().map_err(fail)?.into_bytes());
    let mut files = Vec::new();
    collect_files(dir.path(), &mut files).map_err(|e| e.to_string())?;
    files.sort();
    for f in files {
        bytes.extend(
            f.strip_prefix(dir.path())
                .unwrap()
                .to_string_lossy()
                .as_bytes(),
        );
        bytes.extend(fs::read(&f).map_err(|e| e.to_string())?);
    }
    Ok(bytes)
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

fn criterion_determinism() -> Outcome {
    let start = Instant::now();
    let data = small_corpus()?;
    let (teacher, _) = run_traditional(
        &ModelSpec::with_width(8, 16, 1),
        &data,
        &small_config(),
        Hooks::default(),
    )
    .map_err(fail)?;
    let mut parts = Vec::new();
    for scheme in ["traditional", "ail", "distill"] {
        let a = run_artifacts(scheme, &data, &teacher)?;
        let b = run_artifacts(scheme, &data, &teacher)?;
        ensure(a == b, || {
            format!("{scheme}: artifacts differ between identical runs")
        })?;
        parts.push(format!("{scheme} {} bytes", a.len()));
    }
    Ok(format!(
        "{}, {:.1}s",
        parts.join(", "),
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .expect("thread pool");
    let failures = pool.install(|| {
        let mut failures = 0;
        let mut report = |n: usize, name: &str, outcome: Outcome| {
            let (status, detail) = match outcome {
                Ok(d) => ("PASS", d),
                Err(d) => {
                    failures += 1;
                    ("FAIL", d)
                }
            };
            println!("criterion {n:>2} {status}  {name}: {detail}");
        };
        report(1, "importance update closed form", criterion_closed_form());
        report(2, "update objective convexity", criterion_convexity());
        report(3, "parameter counts", criterion_parameter_counts());
        report(4, "gradient checks", criterion_gradients());
        report(
            5,
            "ones-initialized AIL without rounds equals traditional",
            criterion_degenerate_ail(),
        );
        let toy = toy_run();
        report(
            6,
            "stored importance is monotone",
            toy.as_ref()
                .map_err(Clone::clone)
                .and_then(criterion_store_monotone),
        );
        report(
            7,
            "AIL student on the toy corpus",
            toy.as_ref()
                .map_err(Clone::clone)
                .and_then(criterion_toy_experiment),
        );
        report(
            8,
            "teacher importance function",
            criterion_teacher_importance(),
        );
        report(9, "metric oracles", criterion_metrics());
        report(10, "reproducible runs", criterion_determinism());
        failures
    });
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
