//! The single JSON run configuration shared by all subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gridfno_core::datagen::{GenConfig, ScenarioDistribution};
use gridfno_core::fno::TrainConfig;

use crate::error::{AppError, Result};
use crate::formats::{sha256_hex, HyperJson, SCHEMA_VERSION};

fn default_dt_int() -> f64 {
    1.0 / 600.0
}
fn default_bn_momentum() -> f64 {
    0.1
}
fn default_bn_eps() -> f64 {
    1e-5
}
fn default_lr0() -> f64 {
    0.02
}
fn default_decay_interval() -> usize {
    100
}
fn default_decay_base() -> f64 {
    0.85
}
fn default_eval_interval() -> usize {
    0
}
fn default_cycles() -> Vec<u32> {
    vec![0, 2, 4, 10, 20, 30]
}
fn default_reps() -> usize {
    20
}
fn default_horizons() -> Vec<f64> {
    vec![3.0, 4.5, 6.0]
}

#[derive(Serialize, Deserialize, Clone)]
pub struct ScenarioSection {
    pub delta_perturb: f64,
    pub omega_perturb_hz: f64,
    pub candidate_lines: Vec<usize>,
    /// Relative weights for (SLG, LLG, LL, three-phase).
    pub fault_type_weights: [f64; 4],
    pub clear_cycles_min: u32,
    pub clear_cycles_max: u32,
    pub t_f: f64,
    pub t_on_offset_cycles: Vec<u32>,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct DatasetSection {
    pub n_samples: usize,
    pub train_fraction: f64,
    /// Frame sampling interval (s); must be a multiple of `dt_int`.
    pub dt: f64,
    #[serde(default = "default_dt_int")]
    pub dt_int: f64,
    pub tau_in: usize,
    pub tau_out: usize,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct ModelSection {
    pub n_layers: usize,
    /// Mode truncation in tensor-axis order [time, bus, channel].
    pub kmax: [usize; 3],
    #[serde(default = "default_bn_momentum")]
    pub bn_momentum: f64,
    #[serde(default = "default_bn_eps")]
    pub bn_eps: f64,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct TrainSection {
    pub episodes: usize,
    pub batch_size: usize,
    #[serde(default = "default_lr0")]
    pub lr0: f64,
    #[serde(default = "default_decay_interval")]
    pub decay_interval: usize,
    #[serde(default = "default_decay_base")]
    pub decay_base: f64,
    #[serde(default = "default_eval_interval")]
    pub eval_interval: usize,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct EvalSection {
    /// Post-fault cycle offsets for the per-cycle breakdown.
    #[serde(default = "default_cycles")]
    pub cycles: Vec<u32>,
    /// Test-set size for the per-cycle breakdown regeneration.
    pub n_cases: usize,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct BenchSection {
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<f64>,
}

#[derive(Serialize, Deserialize, Clone)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Network file path, resolved relative to the config file.
    pub network: String,
    pub seed: u64,
    pub scenario: ScenarioSection,
    pub dataset: DatasetSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub bench: BenchSection,
}

/// A parsed config plus its provenance (file hash, base dir).
pub struct LoadedConfig {
    pub cfg: RunConfig,
    pub sha256: String,
    base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| {
            AppError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: RunConfig = serde_json::from_slice(&bytes)
            .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(AppError::Config(format!(
                "{}: unsupported config schema version {} (supported: {SCHEMA_VERSION})",
                path.display(),
                cfg.schema_version
            )));
        }
        let base_dir = path
            .parent()
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(LoadedConfig {
            cfg,
            sha256: sha256_hex(&bytes),
            base_dir,
        })
    }

    pub fn network_path(&self) -> PathBuf {
        let p = Path::new(&self.cfg.network);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

impl RunConfig {
    pub fn distribution(&self) -> ScenarioDistribution {
        ScenarioDistribution {
            delta_perturb: self.scenario.delta_perturb,
            omega_perturb_hz: self.scenario.omega_perturb_hz,
            candidate_lines: self.scenario.candidate_lines.clone(),
            fault_type_weights: self.scenario.fault_type_weights,
            clear_cycles: (self.scenario.clear_cycles_min, self.scenario.clear_cycles_max),
            t_f: self.scenario.t_f,
            t_on_offset_cycles: self.scenario.t_on_offset_cycles.clone(),
        }
    }

    pub fn gen_config(&self, seed: u64) -> GenConfig {
        GenConfig {
            n_samples: self.dataset.n_samples,
            train_fraction: self.dataset.train_fraction,
            seed,
            dt_int: self.dataset.dt_int,
            dt: self.dataset.dt,
            tau_in: self.dataset.tau_in,
            tau_out: self.dataset.tau_out,
        }
    }

    pub fn hyper(&self, n_buses: usize) -> HyperJson {
        HyperJson {
            n_buses,
            tau_in: self.dataset.tau_in,
            tau_out: self.dataset.tau_out,
            n_layers: self.model.n_layers,
            kmax: self.model.kmax,
            bn_eps: self.model.bn_eps,
            bn_momentum: self.model.bn_momentum,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            episodes: self.train.episodes,
            batch_size: self.train.batch_size,
            lr0: self.train.lr0,
            decay_interval: self.train.decay_interval,
            decay_base: self.train.decay_base,
            seed,
            split: self.dataset.train_fraction,
            eval_interval: self.train.eval_interval,
        }
    }
}
