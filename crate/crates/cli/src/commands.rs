//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use gridfno_core::datagen::{generate_dataset, Dataset, DatasetMeta, N_CHANNELS};
use gridfno_core::evalmetrics::{classify_and_score, median, predict_stability, relative_mse};
use gridfno_core::fno::{
    batch_input, batch_input_flat, DnnBaseline, DnnTrainer, FnoModel, FnoTrainer, TrainRecord,
};
use gridfno_core::powerdyn::{
    find_equilibrium, simulate, ClearAction, ClearStep, FaultScenario, FaultType, SimStatus,
};

use crate::config::LoadedConfig;
use crate::error::{AppError, Result};
use crate::formats::{
    read_checkpoint, read_dataset, read_network, sha256_file, trajectory_csv, write_checkpoint,
    write_dataset, write_manifest, ModelArtifact,
};

fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)
        .map_err(|e| AppError::Config(format!("cannot create {}: {e}", out.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| AppError::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn parse_fault_type(s: &str) -> Result<FaultType> {
    Ok(match s {
        "none" => FaultType::None,
        "slg" => FaultType::Slg,
        "llg" => FaultType::Llg,
        "ll" => FaultType::Ll,
        "3ph" | "three-phase" => FaultType::ThreePhase,
        other => {
            return Err(AppError::Config(format!(
                "unknown fault type {other:?} (expected none|slg|llg|ll|3ph)"
            )))
        }
    })
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub struct SimulateArgs {
    pub fault_type: String,
    pub line_index: Option<usize>,
    pub clear_cycles: u32,
    pub t_end: f64,
    pub out: PathBuf,
}

pub fn cmd_simulate(lc: &LoadedConfig, seed: u64, args: &SimulateArgs) -> Result<i32> {
    let net = read_network(&lc.network_path())?;
    ensure_out_dir(&args.out)?;
    let fault_type = parse_fault_type(&args.fault_type)?;
    let scenario = if fault_type == FaultType::None {
        FaultScenario::none()
    } else {
        let line_index = args
            .line_index
            .or_else(|| lc.cfg.scenario.candidate_lines.first().copied())
            .ok_or_else(|| AppError::Config("no fault line given or configured".into()))?;
        let line = net
            .lines
            .get(line_index)
            .map(|l| (l.i, l.j))
            .ok_or_else(|| {
                AppError::Config(format!(
                    "line index {line_index} out of range ({} lines)",
                    net.lines.len()
                ))
            })?;
        let t_f = lc.cfg.scenario.t_f;
        let t_cl = t_f + args.clear_cycles as f64 / 60.0;
        FaultScenario {
            fault_type,
            line,
            t_f,
            clear_schedule: vec![ClearStep {
                t: t_cl,
                action: ClearAction::RestoreLine,
            }],
            t_cl,
            kappa_override: None,
        }
    };
    let eq = find_equilibrium(&net)?;
    let traj = simulate(&net, &scenario, &eq, args.t_end, lc.cfg.dataset.dt_int)?;
    let csv_path = args.out.join("trajectory.csv");
    write_text(&csv_path, &trajectory_csv(&traj))?;
    write_manifest(&args.out, "simulate", seed, &lc.sha256, &[&csv_path])?;
    if let SimStatus::Diverged { t } = traj.status {
        eprintln!("simulation diverged at t = {t:.4} s; partial trajectory written");
        return Ok(3);
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// gen-dataset
// ---------------------------------------------------------------------------

pub fn cmd_gen_dataset(lc: &LoadedConfig, seed: u64, out: &Path) -> Result<i32> {
    let net = read_network(&lc.network_path())?;
    ensure_out_dir(out)?;
    let eq = find_equilibrium(&net)?;
    let ds = generate_dataset(&net, &lc.cfg.distribution(), &eq, &lc.cfg.gen_config(seed))?;
    let path = out.join("dataset.bin");
    write_dataset(&path, &ds, &lc.sha256)?;
    write_manifest(out, "gen-dataset", seed, &lc.sha256, &[&path])?;
    println!(
        "wrote {} samples ({} stable) to {}",
        ds.samples.len(),
        (ds.stable_fraction() * ds.samples.len() as f64).round() as usize,
        path.display()
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct LogLine<'a> {
    episode: usize,
    lr: f64,
    train_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    test_loss: Option<f64>,
    model: &'a str,
}

fn write_train_log(path: &Path, records: &[TrainRecord], model: &str) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&LogLine {
            episode: r.episode,
            lr: r.lr,
            train_loss: r.train_loss,
            test_loss: r.test_loss,
            model,
        })?);
        out.push('\n');
    }
    write_text(path, &out)
}

pub fn cmd_train(
    lc: &LoadedConfig,
    seed: u64,
    dataset_path: &Path,
    model_kind: &str,
    out: &Path,
) -> Result<i32> {
    let (ds, _) = read_dataset(dataset_path)?;
    if ds.samples.is_empty() {
        return Err(AppError::Config(format!(
            "{}: dataset is empty",
            dataset_path.display()
        )));
    }
    if ds.meta.tau_in != lc.cfg.dataset.tau_in || ds.meta.tau_out != lc.cfg.dataset.tau_out {
        return Err(AppError::Config(format!(
            "dataset window ({}, {}) disagrees with config ({}, {})",
            ds.meta.tau_in, ds.meta.tau_out, lc.cfg.dataset.tau_in, lc.cfg.dataset.tau_out
        )));
    }
    ensure_out_dir(out)?;
    let dataset_sha = sha256_file(dataset_path)?;
    let tc = lc.cfg.train_config(seed);

    let (artifact, history) = match model_kind {
        "fno" => {
            let hyper = lc.cfg.hyper(ds.meta.n_buses).to_core();
            let model = FnoModel::init(hyper, seed)?;
            let mut trainer = FnoTrainer::new(model, tc)?;
            let mut history = Vec::with_capacity(trainer.cfg.episodes);
            for ep in 0..trainer.cfg.episodes {
                let lr = trainer.lr();
                let train_loss = trainer.train_episode(&ds)?;
                let eval_now = trainer.cfg.eval_interval != 0
                    && (ep % trainer.cfg.eval_interval == trainer.cfg.eval_interval - 1
                        || ep + 1 == trainer.cfg.episodes);
                let test_loss = if eval_now { trainer.test_loss(&ds)? } else { None };
                history.push(TrainRecord {
                    episode: ep,
                    lr,
                    train_loss,
                    test_loss,
                });
            }
            (ModelArtifact::Fno(trainer.model), history)
        }
        "dnn" => {
            let d_in = ds.meta.n_buses * N_CHANNELS * ds.meta.tau_in;
            let d_out = ds.meta.tau_out * ds.meta.n_buses * 3;
            let model = DnnBaseline::init(d_in, d_out, seed)?;
            let mut trainer = DnnTrainer::new(model, tc)?;
            let mut history = Vec::with_capacity(trainer.cfg.episodes);
            for ep in 0..trainer.cfg.episodes {
                let lr = trainer.cfg.lr_at(ep);
                let train_loss = trainer.train_episode(&ds)?;
                let eval_now = trainer.cfg.eval_interval != 0
                    && (ep % trainer.cfg.eval_interval == trainer.cfg.eval_interval - 1
                        || ep + 1 == trainer.cfg.episodes);
                let test_loss = if eval_now { trainer.test_loss(&ds)? } else { None };
                history.push(TrainRecord {
                    episode: ep,
                    lr,
                    train_loss,
                    test_loss,
                });
            }
            (ModelArtifact::Dnn(trainer.model), history)
        }
        other => {
            return Err(AppError::Config(format!(
                "unknown model kind {other:?} (expected fno|dnn)"
            )))
        }
    };

    let ckpt_path = out.join(format!("{model_kind}.ckpt"));
    write_checkpoint(&ckpt_path, &artifact, &ds.meta, &lc.sha256, &dataset_sha)?;
    let log_path = out.join(format!("{model_kind}_train_log.jsonl"));
    write_train_log(&log_path, &history, model_kind)?;
    write_manifest(out, "train", seed, &lc.sha256, &[&ckpt_path, &log_path])?;
    if let Some(last) = history.last() {
        println!(
            "trained {model_kind}: final train loss {:.6}{}",
            last.train_loss,
            last.test_loss
                .map(|t| format!(", test loss {t:.6}"))
                .unwrap_or_default()
        );
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// prediction helpers
// ---------------------------------------------------------------------------

/// Normalized predictions for the given samples, flattened per sample as
/// `[tau_out, n_buses, 3]` row-major.
pub fn predict_samples(
    model: &ModelArtifact,
    ds: &Dataset,
    indices: &[usize],
) -> Result<Vec<Vec<f64>>> {
    let m = &ds.meta;
    let (t, n) = (m.tau_out, m.n_buses);
    let mut out = Vec::with_capacity(indices.len());
    match model {
        ModelArtifact::Fno(model) => {
            for part in indices.chunks(16) {
                let x = batch_input(ds, part)?;
                let pred = model.forward(&x)?; // [t, n, 3, B]
                let b = part.len();
                for bi in 0..b {
                    let mut flat = vec![0.0; t * n * 3];
                    for zo in 0..t {
                        for bus in 0..n {
                            for k in 0..3 {
                                flat[(zo * n + bus) * 3 + k] =
                                    pred.data()[((zo * n + bus) * 3 + k) * b + bi];
                            }
                        }
                    }
                    out.push(flat);
                }
            }
        }
        ModelArtifact::Dnn(model) => {
            let x = batch_input_flat(ds, indices)?;
            let pred = model.forward(&x)?; // [B, t*n*3]
            let d = t * n * 3;
            for bi in 0..indices.len() {
                out.push(pred.data()[bi * d..(bi + 1) * d].to_vec());
            }
        }
    }
    Ok(out)
}

/// Decode a normalized `[tau_out, n_buses, 3]` block to physical units
/// (rad, Hz, p.u.).
fn decode_block(meta: &DatasetMeta, block: &[f64]) -> Vec<f64> {
    block
        .iter()
        .enumerate()
        .map(|(i, &v)| meta.decode_channel(i % 3, v))
        .collect()
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

pub fn cmd_predict(
    seed: u64,
    checkpoint: &Path,
    dataset_path: &Path,
    sample: usize,
    out: &Path,
    config_sha: &str,
) -> Result<i32> {
    let ckpt = read_checkpoint(checkpoint)?;
    let (ds, _) = read_dataset(dataset_path)?;
    if sample >= ds.samples.len() {
        return Err(AppError::Config(format!(
            "sample {sample} out of range ({} samples)",
            ds.samples.len()
        )));
    }
    ensure_out_dir(out)?;
    check_meta_compat(&ckpt.meta, &ds.meta)?;
    let pred = predict_samples(&ckpt.model, &ds, &[sample])?.remove(0);
    let phys = decode_block(&ds.meta, &pred);
    let truth = decode_block(
        &ds.meta,
        &ds.samples[sample]
            .target
            .iter()
            .map(|&v| v as f64)
            .collect::<Vec<_>>(),
    );
    let m = &ds.meta;
    let mut csv =
        String::from("t,bus,delta_rad,omega_hz,v_pu,true_delta_rad,true_omega_hz,true_v_pu\n");
    for zo in 0..m.tau_out {
        let t = ds.samples[sample].t_on + (zo as f64 + 1.0) * m.dt;
        for bus in 0..m.n_buses {
            let b = (zo * m.n_buses + bus) * 3;
            csv.push_str(&format!(
                "{:.10},{},{:.12},{:.12},{:.12},{:.12},{:.12},{:.12}\n",
                t,
                bus,
                phys[b],
                phys[b + 1],
                phys[b + 2],
                truth[b],
                truth[b + 1],
                truth[b + 2],
            ));
        }
    }
    let path = out.join("prediction.csv");
    write_text(&path, &csv)?;
    write_manifest(out, "predict", seed, config_sha, &[&path])?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn check_meta_compat(a: &DatasetMeta, b: &DatasetMeta) -> Result<()> {
    if a.n_buses != b.n_buses
        || a.tau_in != b.tau_in
        || a.tau_out != b.tau_out
        || (a.dt - b.dt).abs() > 1e-12
    {
        return Err(AppError::Config(
            "checkpoint and dataset shapes disagree (buses/window/step)".into(),
        ));
    }
    Ok(())
}

/// Re-encode a dataset's frames from its own normalization into `target`'s.
pub fn renormalize(ds: &mut Dataset, target: &DatasetMeta) -> Result<()> {
    check_meta_compat(&ds.meta, target)?;
    let own = ds.meta.clone();
    for s in ds.samples.iter_mut() {
        let ti = own.tau_in;
        for bus in 0..own.n_buses {
            for ch in 0..N_CHANNELS {
                for z in 0..ti {
                    let idx = (bus * N_CHANNELS + ch) * ti + z;
                    let phys = own.decode_channel(ch, s.input3d[idx] as f64);
                    s.input3d[idx] = target.encode_channel(ch, phys) as f32;
                }
            }
        }
        for (i, v) in s.target.iter_mut().enumerate() {
            let ch = i % 3;
            let phys = own.decode_channel(ch, *v as f64);
            *v = target.encode_channel(ch, phys) as f32;
        }
    }
    let mut new_meta = target.clone();
    new_meta.seed = own.seed;
    new_meta.n_train = own.n_train;
    ds.meta = new_meta;
    Ok(())
}

/// Scores for one evaluation set.
#[derive(Serialize)]
pub struct SetScores {
    pub n_cases: usize,
    pub relative_mse: f64,
    pub type1_error: Option<f64>,
    pub type2_error: Option<f64>,
    pub n_stable: usize,
    pub n_unstable: usize,
}

/// Evaluate a model on the given samples: pooled relative mse in physical
/// units plus stability classification over the `[t_f + 4, t_f + 4.5]` s
/// window of the predictions.
pub fn score_set(
    model: &ModelArtifact,
    ds: &Dataset,
    indices: &[usize],
    t_f: f64,
) -> Result<SetScores> {
    if indices.is_empty() {
        return Err(AppError::Config("evaluation set is empty".into()));
    }
    let preds = predict_samples(model, ds, indices)?;
    let m = &ds.meta;
    let mut flat_pred = Vec::new();
    let mut flat_true = Vec::new();
    let mut pred_labels = Vec::new();
    let mut true_labels = Vec::new();
    let (w0, w1) = (t_f + 4.0, t_f + 4.5);
    for (pi, &si) in indices.iter().enumerate() {
        let s = &ds.samples[si];
        let pred = decode_block(m, &preds[pi]);
        let truth = decode_block(
            m,
            &s.target.iter().map(|&v| v as f64).collect::<Vec<_>>(),
        );
        flat_pred.extend_from_slice(&pred);
        flat_true.extend_from_slice(&truth);

        let mut window = Vec::new();
        for zo in 0..m.tau_out {
            let t = s.t_on + (zo as f64 + 1.0) * m.dt;
            if t >= w0 - 1e-9 && t <= w1 + 1e-9 {
                for bus in 0..m.n_buses {
                    window.push(pred[(zo * m.n_buses + bus) * 3 + 1]);
                }
            }
        }
        if window.is_empty() {
            return Err(AppError::Config(format!(
                "sample {si}: predictions do not cover the [{w0:.2}, {w1:.2}] s stability window"
            )));
        }
        pred_labels.push(predict_stability(&window)?);
        true_labels.push(s.stable);
    }
    let rel = relative_mse(&flat_pred, &flat_true)?;
    let scores = classify_and_score(&pred_labels, &true_labels)?;
    Ok(SetScores {
        n_cases: indices.len(),
        relative_mse: rel,
        type1_error: scores.type1,
        type2_error: scores.type2,
        n_stable: scores.n_stable,
        n_unstable: scores.n_unstable,
    })
}

#[derive(Serialize)]
struct CycleScores {
    cycle: u32,
    #[serde(flatten)]
    scores: SetScores,
}

#[derive(Serialize)]
struct EvalReport {
    schema_version: u32,
    model: String,
    test: SetScores,
    per_cycle: Vec<CycleScores>,
}

pub fn cmd_eval(
    lc: &LoadedConfig,
    seed: u64,
    checkpoint: &Path,
    dataset_path: &Path,
    force: bool,
    with_cycles: bool,
    out: &Path,
) -> Result<i32> {
    let ckpt = read_checkpoint(checkpoint)?;
    let (ds, ds_config_sha) = read_dataset(dataset_path)?;
    ensure_out_dir(out)?;
    let dataset_sha = sha256_file(dataset_path)?;
    if !force {
        if ckpt.dataset_sha256 != dataset_sha {
            return Err(AppError::Config(format!(
                "checkpoint was trained on a different dataset (hash {}.. vs {}..); \
                 pass --force to evaluate anyway",
                &ckpt.dataset_sha256[..12.min(ckpt.dataset_sha256.len())],
                &dataset_sha[..12]
            )));
        }
        if ckpt.config_sha256 != lc.sha256 || ds_config_sha != lc.sha256 {
            return Err(AppError::Config(
                "config hash differs from the one recorded in the artifacts; \
                 pass --force to evaluate anyway"
                    .into(),
            ));
        }
    }
    check_meta_compat(&ckpt.meta, &ds.meta)?;

    let n = ds.samples.len();
    let n_train = ds.meta.n_train.min(n);
    let test: Vec<usize> = (n_train..n).collect();
    let test = if test.is_empty() {
        (0..n).collect()
    } else {
        test
    };
    let t_f = lc.cfg.scenario.t_f;
    let main_scores = score_set(&ckpt.model, &ds, &test, t_f)?;

    let mut per_cycle = Vec::new();
    if with_cycles {
        let net = read_network(&lc.network_path())?;
        let eq = find_equilibrium(&net)?;
        for &cycle in &lc.cfg.eval.cycles {
            let mut dist = lc.cfg.distribution();
            dist.t_on_offset_cycles = vec![cycle];
            let mut gen = lc.cfg.gen_config(seed ^ (0x00C1_0000 + cycle as u64));
            gen.n_samples = lc.cfg.eval.n_cases;
            gen.train_fraction = 1.0;
            let mut cds = generate_dataset(&net, &dist, &eq, &gen)?;
            renormalize(&mut cds, &ckpt.meta)?;
            let idx: Vec<usize> = (0..cds.samples.len()).collect();
            let scores = score_set(&ckpt.model, &cds, &idx, t_f)?;
            per_cycle.push(CycleScores { cycle, scores });
        }
    }

    let report = EvalReport {
        schema_version: crate::formats::SCHEMA_VERSION,
        model: match ckpt.model {
            ModelArtifact::Fno(_) => "fno".into(),
            ModelArtifact::Dnn(_) => "dnn".into(),
        },
        test: main_scores,
        per_cycle,
    };
    let path = out.join("eval_report.json");
    write_text(&path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    write_manifest(out, "eval", seed, &lc.sha256, &[&path])?;
    println!(
        "relative mse {:.6}, type1 {:?}, type2 {:?} over {} cases",
        report.test.relative_mse, report.test.type1_error, report.test.type2_error,
        report.test.n_cases
    );
    Ok(0)
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct HorizonTiming {
    horizon_s: f64,
    tau_out: usize,
    simulate_s: f64,
    predict_s: f64,
    speedup: f64,
}

#[derive(Serialize)]
struct BenchReport {
    schema_version: u32,
    reps: usize,
    horizons: Vec<HorizonTiming>,
}

pub fn cmd_bench(lc: &LoadedConfig, seed: u64, out: &Path) -> Result<i32> {
    let net = read_network(&lc.network_path())?;
    ensure_out_dir(out)?;
    let eq = find_equilibrium(&net)?;
    let reps = lc.cfg.bench.reps.max(20);
    let dist = lc.cfg.distribution();
    let (scenario, s0, t_on) =
        gridfno_core::datagen::sample_scenario(&dist, &net, &eq, seed)?;

    let mut horizons = Vec::new();
    for &h in &lc.cfg.bench.horizons {
        let tau_out = (h / lc.cfg.dataset.dt).round().max(1.0) as usize;
        // Integration over a span equal to the prediction horizon.
        let mut sim_times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            let traj = simulate(&net, &scenario, &s0, h, lc.cfg.dataset.dt_int)?;
            std::hint::black_box(traj.len());
            sim_times.push(start.elapsed().as_secs_f64());
        }

        // One-shot surrogate inference for the same horizon: a model of
        // identical shape but with tau_out matching the horizon.
        let mut hyper = lc.cfg.hyper(net.n_buses).to_core();
        hyper.tau_out = tau_out;
        let model = FnoModel::init(hyper, seed)?;
        let mut meta = DatasetMeta::identity(
            lc.cfg.dataset.dt,
            lc.cfg.dataset.dt_int,
            lc.cfg.dataset.tau_in,
            tau_out,
            net.n_buses,
        );
        meta.seed = seed;
        // Encode one real input window (the frame encoding needs a
        // trajectory spanning the whole prediction window).
        let frame_t_end = t_on + (tau_out + 1) as f64 * lc.cfg.dataset.dt;
        let traj = simulate(&net, &scenario, &s0, frame_t_end, lc.cfg.dataset.dt_int)?;
        let frame =
            gridfno_core::datagen::build_frame(&traj, &scenario, &net, t_on, &meta, true)?;
        let one = Dataset {
            meta: meta.clone(),
            samples: vec![frame],
        };
        let x = batch_input(&one, &[0])?;
        let mut pred_times = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            let y = model.forward(&x)?;
            std::hint::black_box(y.data().first().copied());
            pred_times.push(start.elapsed().as_secs_f64());
        }

        let simulate_s = median(&sim_times)?;
        let predict_s = median(&pred_times)?;
        horizons.push(HorizonTiming {
            horizon_s: h,
            tau_out,
            simulate_s,
            predict_s,
            speedup: simulate_s / predict_s,
        });
    }

    let report = BenchReport {
        schema_version: crate::formats::SCHEMA_VERSION,
        reps,
        horizons,
    };
    let path = out.join("bench_report.json");
    write_text(&path, &(serde_json::to_string_pretty(&report)? + "\n"))?;
    write_manifest(out, "bench", seed, &lc.sha256, &[&path])?;
    for ht in &report.horizons {
        println!(
            "horizon {:.2} s: simulate {:.6} s, predict {:.6} s, speedup {:.1}x",
            ht.horizon_s, ht.simulate_s, ht.predict_s, ht.speedup
        );
    }
    Ok(0)
}
