//! Randomized scenario sampling, stability labelling and sample-frame
//! encoding.
//!
//! A dataset sample is a short measurement window before a prediction
//! start time `t_on`, encoded as a 3D tensor `[N x Y x tau_in]` with
//! `Y = 7` channels per bus — angle (rad), frequency deviation (Hz),
//! voltage, active/reactive injection, and two broadcast fault channels
//! `u1`/`u2` that encode fault location and type while the fault is on.
//! The model consumes a 4D expansion `[tau_out x N x Y x (tau_in + 3)]`
//! in which every output step carries a copy of the window plus three
//! appended scalars (normalized timestamp, `u1(t)`, `u2(t)`); the target
//! is `[tau_out x N x 3]` (angle, frequency, voltage).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use core::f64::consts::TAU;

#[allow(unused_imports)] // resolves float math in the no_std build
use num_traits::Float;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::numcore::Tensor;
use crate::powerdyn::{
    simulate, ClearAction, ClearStep, FaultScenario, FaultType, NetworkModel, SimStatus,
    SystemState, Trajectory,
};

/// Number of input channels per bus.
pub const N_CHANNELS: usize = 7;
/// Cycle length in seconds on a 60 Hz grid.
pub const CYCLE: f64 = 1.0 / 60.0;
/// Mean |frequency deviation| (Hz) above which a case is labelled unstable.
pub const STABILITY_THRESHOLD_HZ: f64 = 0.5;
/// Stability window relative to fault onset (s).
pub const STABILITY_WINDOW: (f64, f64) = (4.0, 4.5);

/// Sampling law for random fault scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDistribution {
    /// Half-width of the uniform perturbation added to equilibrium angles (rad).
    pub delta_perturb: f64,
    /// Half-width of the uniform frequency perturbation (Hz).
    pub omega_perturb_hz: f64,
    /// Indices into `net.lines` eligible for a fault.
    pub candidate_lines: Vec<usize>,
    /// Relative weights for (SLG, LLG, LL, ThreePhase).
    pub fault_type_weights: [f64; 4],
    /// Inclusive uniform range of clearing delays in cycles.
    pub clear_cycles: (u32, u32),
    /// Fault onset time (s); must sit on the integrator grid.
    pub t_f: f64,
    /// Candidate offsets of the prediction start `t_on` after `t_f`, in
    /// cycles; drawn uniformly.
    pub t_on_offset_cycles: Vec<u32>,
}

impl ScenarioDistribution {
    pub fn validate(&self, net: &NetworkModel) -> Result<()> {
        if self.candidate_lines.is_empty() {
            return Err(CoreError::EmptyDistribution("no candidate lines".into()));
        }
        for &idx in &self.candidate_lines {
            if idx >= net.lines.len() {
                return Err(CoreError::EmptyDistribution(format!(
                    "candidate line {idx} out of range ({} lines)",
                    net.lines.len()
                )));
            }
        }
        if self.fault_type_weights.iter().any(|&w| w < 0.0)
            || self.fault_type_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(CoreError::EmptyDistribution(
                "fault-type weights must be non-negative with positive sum".into(),
            ));
        }
        if self.clear_cycles.0 == 0 || self.clear_cycles.0 > self.clear_cycles.1 {
            return Err(CoreError::EmptyDistribution(format!(
                "bad clear-cycle range {:?}",
                self.clear_cycles
            )));
        }
        if self.t_on_offset_cycles.is_empty() {
            return Err(CoreError::EmptyDistribution("no t_on offsets".into()));
        }
        if self.delta_perturb < 0.0 || self.omega_perturb_hz < 0.0 || !(self.t_f > 0.0) {
            return Err(CoreError::EmptyDistribution(
                "perturbation ranges must be >= 0 and t_f > 0".into(),
            ));
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    lo + (hi - lo) * u
}

fn uniform_u32(rng: &mut ChaCha8Rng, lo: u32, hi: u32) -> u32 {
    // Inclusive range by rejection sampling (unbiased).
    let span = (hi - lo + 1) as u64;
    let limit = u64::MAX - u64::MAX % span;
    loop {
        let r = rng.next_u64();
        if r < limit {
            return lo + (r % span) as u32;
        }
    }
}

fn weighted_choice(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = uniform(rng, 0.0, total);
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// SplitMix64 — decorrelates per-sample seeds derived from a base seed.
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e3779b97f4a7c15);
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Draw one scenario: fault line and type per the weights, clearing delay
/// uniform over the cycle range, initial state = equilibrium plus the
/// uniform perturbation. Deterministic in the seed. Also returns the
/// prediction start time `t_on`.
pub fn sample_scenario(
    dist: &ScenarioDistribution,
    net: &NetworkModel,
    equilibrium: &SystemState,
    seed: u64,
) -> Result<(FaultScenario, SystemState, f64)> {
    dist.validate(net)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let line_idx =
        dist.candidate_lines[uniform_u32(&mut rng, 0, dist.candidate_lines.len() as u32 - 1) as usize];
    let fault_type = match weighted_choice(&mut rng, &dist.fault_type_weights) {
        0 => FaultType::Slg,
        1 => FaultType::Llg,
        2 => FaultType::Ll,
        _ => FaultType::ThreePhase,
    };
    let cycles = uniform_u32(&mut rng, dist.clear_cycles.0, dist.clear_cycles.1);
    let t_cl = dist.t_f + cycles as f64 * CYCLE;
    let line = (net.lines[line_idx].i, net.lines[line_idx].j);
    let scenario = FaultScenario {
        fault_type,
        line,
        t_f: dist.t_f,
        clear_schedule: vec![ClearStep {
            t: t_cl,
            action: ClearAction::RestoreLine,
        }],
        t_cl,
        kappa_override: None,
    };
    let mut s0 = equilibrium.clone();
    for d in s0.delta.iter_mut() {
        *d += uniform(&mut rng, -dist.delta_perturb, dist.delta_perturb);
    }
    for w in s0.omega.iter_mut() {
        *w += uniform(&mut rng, -dist.omega_perturb_hz, dist.omega_perturb_hz) * TAU;
    }
    let offset = dist.t_on_offset_cycles
        [uniform_u32(&mut rng, 0, dist.t_on_offset_cycles.len() as u32 - 1) as usize];
    let t_on = dist.t_f + offset as f64 * CYCLE;
    Ok((scenario, s0, t_on))
}

/// Fault channels at time `t`: `u1 = (line_index + 1) / n_lines` and
/// `u2 = type_id / 4` while the fault is active (t in `[t_f, t_cl)`),
/// `(0, 0)` otherwise.
pub fn encode_u_channels(scenario: &FaultScenario, net: &NetworkModel, t: f64) -> (f64, f64) {
    if !scenario.fault_active_at(t) || net.lines.is_empty() {
        return (0.0, 0.0);
    }
    let idx = net
        .lines
        .iter()
        .position(|l| {
            (l.i, l.j) == scenario.line || (l.j, l.i) == scenario.line
        })
        .unwrap_or(0);
    let u1 = (idx + 1) as f64 / net.lines.len() as f64;
    let u2 = scenario.fault_type.type_id() as f64 / 4.0;
    (u1, u2)
}

/// Per-channel affine normalization and shape metadata shared by all
/// samples of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetMeta {
    /// Sampling interval of the frames (s).
    pub dt: f64,
    /// Integrator step used to produce the trajectories (s).
    pub dt_int: f64,
    pub tau_in: usize,
    pub tau_out: usize,
    pub n_buses: usize,
    /// Per-channel mean/std of the affine encoding; the fault channels
    /// stay at (0, 1).
    pub channel_mean: [f64; N_CHANNELS],
    pub channel_std: [f64; N_CHANNELS],
    pub seed: u64,
    /// Hash of the generating network (FNV-1a over its canonical bytes).
    pub network_hash: u64,
    /// Number of leading samples that formed the normalization split.
    pub n_train: usize,
}

impl DatasetMeta {
    pub fn identity(dt: f64, dt_int: f64, tau_in: usize, tau_out: usize, n_buses: usize) -> Self {
        DatasetMeta {
            dt,
            dt_int,
            tau_in,
            tau_out,
            n_buses,
            channel_mean: [0.0; N_CHANNELS],
            channel_std: [1.0; N_CHANNELS],
            seed: 0,
            network_hash: 0,
            n_train: 0,
        }
    }

    pub fn encode_channel(&self, c: usize, x: f64) -> f64 {
        (x - self.channel_mean[c]) / self.channel_std[c]
    }

    pub fn decode_channel(&self, c: usize, x: f64) -> f64 {
        x * self.channel_std[c] + self.channel_mean[c]
    }
}

/// FNV-1a hash of a network's canonical byte representation.
pub fn network_hash(net: &NetworkModel) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&(net.n_buses as u64).to_le_bytes());
    for l in &net.lines {
        eat(&(l.i as u64).to_le_bytes());
        eat(&(l.j as u64).to_le_bytes());
        eat(&l.b.to_le_bytes());
        eat(&l.g.to_le_bytes());
    }
    for g in &net.generators {
        for v in [g.m, g.d, g.tdo_prime, g.xd, g.xd_prime, g.efd] {
            eat(&v.to_le_bytes());
        }
    }
    for inj in &net.injections {
        eat(&inj.p.to_le_bytes());
        eat(&inj.q.to_le_bytes());
    }
    for &b in &net.self_susceptance {
        eat(&b.to_le_bytes());
    }
    h
}

/// One encoded sample: normalized measurement window, per-output-step
/// appended scalars, normalized target trajectory and the stability label.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFrame {
    /// `[N x Y x tau_in]`, row-major, normalized.
    pub input3d: Vec<f32>,
    /// `[tau_out x 3]`: per output step (normalized timestamp, u1, u2).
    pub extras: Vec<f32>,
    /// `[tau_out x N x 3]`, normalized (angle, frequency Hz, voltage).
    pub target: Vec<f32>,
    /// Prediction start time (s).
    pub t_on: f64,
    pub stable: bool,
}

impl SampleFrame {
    /// Materialize the 4D expansion `[tau_out x N x Y x (tau_in + 3)]`:
    /// every output step carries a copy of the 3D window with the three
    /// per-step scalars appended along the last axis. Built on demand —
    /// storing it per sample would blow up memory by a factor of
    /// `tau_out`.
    pub fn expanded4d(&self, meta: &DatasetMeta) -> Tensor {
        let (n, ti, to) = (meta.n_buses, meta.tau_in, meta.tau_out);
        let c = ti + 3;
        let mut data = vec![0.0f64; to * n * N_CHANNELS * c];
        for z_out in 0..to {
            for bus in 0..n {
                for y in 0..N_CHANNELS {
                    let dst = ((z_out * n + bus) * N_CHANNELS + y) * c;
                    let src = (bus * N_CHANNELS + y) * ti;
                    for z in 0..ti {
                        data[dst + z] = self.input3d[src + z] as f64;
                    }
                    for k in 0..3 {
                        data[dst + ti + k] = self.extras[z_out * 3 + k] as f64;
                    }
                }
            }
        }
        Tensor::from_vec(&[to, n, N_CHANNELS, c], data).expect("frame shape")
    }

    /// Flattened input window `[N * Y * tau_in]` for the dense baseline.
    pub fn flat_input(&self) -> Tensor {
        let data: Vec<f64> = self.input3d.iter().map(|&v| v as f64).collect();
        Tensor::from_vec(&[data.len()], data).expect("flat shape")
    }

    /// Target as a `[tau_out x N x 3]` f64 tensor (still normalized).
    pub fn target_tensor(&self, meta: &DatasetMeta) -> Tensor {
        let data: Vec<f64> = self.target.iter().map(|&v| v as f64).collect();
        Tensor::from_vec(&[meta.tau_out, meta.n_buses, 3], data).expect("target shape")
    }
}

fn sample_index(traj: &Trajectory, t: f64) -> Result<usize> {
    traj.index_at_time(t, 1e-6).ok_or_else(|| {
        CoreError::InsufficientHorizon(format!(
            "trajectory has no sample at t = {t} (covers up to {:?})",
            traj.times.last()
        ))
    })
}

/// Encode one trajectory into a sample frame, normalized per `meta`.
///
/// The measurement window ends at `t_on` (times `t_on - (tau_in-1-z) dt`);
/// targets are at `t_on + (z_out+1) dt`. The stability label must be
/// supplied by [`label_stability`].
pub fn build_frame(
    traj: &Trajectory,
    scenario: &FaultScenario,
    net: &NetworkModel,
    t_on: f64,
    meta: &DatasetMeta,
    stable: bool,
) -> Result<SampleFrame> {
    let n = meta.n_buses;
    if n != net.n_buses {
        return Err(CoreError::ShapeMismatch(format!(
            "meta says {n} buses, network has {}",
            net.n_buses
        )));
    }
    let (ti, to, dt) = (meta.tau_in, meta.tau_out, meta.dt);
    let mut input3d = vec![0.0f32; n * N_CHANNELS * ti];
    for z in 0..ti {
        let t = t_on - (ti - 1 - z) as f64 * dt;
        let idx = sample_index(traj, t)?;
        let s = &traj.states[idx];
        let (u1, u2) = encode_u_channels(scenario, net, t);
        for bus in 0..n {
            let vals = [
                s.delta[bus],
                s.omega[bus] / TAU,
                s.v[bus],
                net.injections[bus].p,
                net.injections[bus].q,
                u1,
                u2,
            ];
            for (y, &raw) in vals.iter().enumerate() {
                input3d[(bus * N_CHANNELS + y) * ti + z] =
                    meta.encode_channel(y, raw) as f32;
            }
        }
    }
    let mut extras = vec![0.0f32; to * 3];
    let mut target = vec![0.0f32; to * n * 3];
    let horizon = to as f64 * dt;
    for z_out in 0..to {
        let t = t_on + (z_out + 1) as f64 * dt;
        let idx = sample_index(traj, t)?;
        let s = &traj.states[idx];
        let (u1, u2) = encode_u_channels(scenario, net, t);
        extras[z_out * 3] = ((t - t_on) / horizon) as f32;
        extras[z_out * 3 + 1] = u1 as f32;
        extras[z_out * 3 + 2] = u2 as f32;
        for bus in 0..n {
            let vals = [s.delta[bus], s.omega[bus] / TAU, s.v[bus]];
            for (k, &raw) in vals.iter().enumerate() {
                target[(z_out * n + bus) * 3 + k] = meta.encode_channel(k, raw) as f32;
            }
        }
    }
    Ok(SampleFrame {
        input3d,
        extras,
        target,
        t_on,
        stable,
    })
}

/// Stability label: `Ok(true)` (stable) iff the trajectory completed and
/// the mean over buses and over `t in [t_f + 4, t_f + 4.5]` of the
/// absolute frequency deviation (Hz) stays at or below 0.5 Hz. Diverged
/// runs are unstable; a completed trajectory that does not cover the
/// window is an error.
pub fn label_stability(traj: &Trajectory, t_f: f64) -> Result<bool> {
    if let SimStatus::Diverged { .. } = traj.status {
        return Ok(false);
    }
    let (w0, w1) = (t_f + STABILITY_WINDOW.0, t_f + STABILITY_WINDOW.1);
    let last = *traj.times.last().ok_or_else(|| {
        CoreError::InsufficientHorizon("empty trajectory".into())
    })?;
    if last + 1e-9 < w1 {
        return Err(CoreError::InsufficientHorizon(format!(
            "stability window ends at {w1} but trajectory at {last}"
        )));
    }
    let mut acc = 0.0;
    let mut count = 0usize;
    for (i, &t) in traj.times.iter().enumerate() {
        if t >= w0 - 1e-9 && t <= w1 + 1e-9 {
            for &w in &traj.states[i].omega {
                acc += (w / TAU).abs();
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(CoreError::InsufficientHorizon(
            "no samples in the stability window".into(),
        ));
    }
    let n = traj.states[0].delta.len();
    Ok(acc / (count * n) as f64 <= STABILITY_THRESHOLD_HZ)
}

/// A collection of encoded samples with shared metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub meta: DatasetMeta,
    pub samples: Vec<SampleFrame>,
}

impl Dataset {
    /// Fraction of samples labelled stable.
    pub fn stable_fraction(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().filter(|s| s.stable).count() as f64 / self.samples.len() as f64
    }
}

/// Dataset-generation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub n_samples: usize,
    /// Leading fraction of samples used for the normalization statistics.
    pub train_fraction: f64,
    pub seed: u64,
    pub dt_int: f64,
    pub dt: f64,
    pub tau_in: usize,
    pub tau_out: usize,
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(CoreError::EmptyDistribution("n_samples must be > 0".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(CoreError::EmptyDistribution(
                "train_fraction must be in (0, 1]".into(),
            ));
        }
        if !(self.dt_int > 0.0) || !(self.dt > 0.0) {
            return Err(CoreError::EmptyDistribution("dt and dt_int must be > 0".into()));
        }
        let ratio = self.dt / self.dt_int;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(CoreError::EmptyDistribution(format!(
                "dt = {} must be a multiple of dt_int = {}",
                self.dt, self.dt_int
            )));
        }
        if self.tau_in == 0 || self.tau_out == 0 {
            return Err(CoreError::EmptyDistribution(
                "tau_in and tau_out must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Generate a dataset: repeatedly sample scenarios, simulate, label and
/// encode. Scenarios whose trajectories diverge before the required
/// horizon are resampled (with a derived seed) so every stored frame is
/// complete; the stability label still marks such dynamics as unstable
/// when they stay finite. Deterministic in `cfg.seed`.
pub fn generate_dataset(
    net: &NetworkModel,
    dist: &ScenarioDistribution,
    equilibrium: &SystemState,
    cfg: &GenConfig,
) -> Result<Dataset> {
    net.validate()?;
    dist.validate(net)?;
    cfg.validate()?;
    let max_offset = *dist.t_on_offset_cycles.iter().max().expect("validated") as f64;
    let t_on_max = dist.t_f + max_offset * CYCLE;
    let t_end = (dist.t_f + STABILITY_WINDOW.1)
        .max(t_on_max + (cfg.tau_out + 1) as f64 * cfg.dt);
    if t_on_max - (cfg.tau_in - 1) as f64 * cfg.dt < -1e-9 {
        return Err(CoreError::InsufficientHorizon(
            "measurement window starts before t = 0".into(),
        ));
    }

    let mut meta = DatasetMeta::identity(cfg.dt, cfg.dt_int, cfg.tau_in, cfg.tau_out, net.n_buses);
    meta.seed = cfg.seed;
    meta.network_hash = network_hash(net);
    let raw_meta = meta.clone();

    let mut samples = Vec::with_capacity(cfg.n_samples);
    for i in 0..cfg.n_samples {
        let mut frame = None;
        for attempt in 0..64u64 {
            let seed = mix_seed(cfg.seed, (i as u64) << 8 | attempt);
            let (scenario, s0, t_on) = sample_scenario(dist, net, equilibrium, seed)?;
            let traj = simulate(net, &scenario, &s0, t_end, cfg.dt_int)?;
            let stable = label_stability(&traj, scenario.t_f)?;
            match build_frame(&traj, &scenario, net, t_on, &raw_meta, stable) {
                Ok(f) => {
                    frame = Some(f);
                    break;
                }
                Err(CoreError::InsufficientHorizon(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        let Some(f) = frame else {
            return Err(CoreError::EmptyDistribution(format!(
                "sample {i}: every resampled scenario diverged before the horizon"
            )));
        };
        samples.push(f);
    }

    // Normalization statistics from the leading train split, channels
    // 0..5 only (the fault channels keep their bounded raw encoding).
    let n_train = ((cfg.n_samples as f64 * cfg.train_fraction).round() as usize)
        .clamp(1, cfg.n_samples);
    meta.n_train = n_train;
    let ti = cfg.tau_in;
    for c in 0..5 {
        let mut mean = 0.0;
        let mut count = 0usize;
        for s in &samples[..n_train] {
            for bus in 0..net.n_buses {
                for z in 0..ti {
                    mean += s.input3d[(bus * N_CHANNELS + c) * ti + z] as f64;
                    count += 1;
                }
            }
        }
        mean /= count as f64;
        let mut var = 0.0;
        for s in &samples[..n_train] {
            for bus in 0..net.n_buses {
                for z in 0..ti {
                    let d = s.input3d[(bus * N_CHANNELS + c) * ti + z] as f64 - mean;
                    var += d * d;
                }
            }
        }
        var /= count as f64;
        meta.channel_mean[c] = mean;
        meta.channel_std[c] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
    }

    // Re-encode all frames with the frozen statistics.
    for s in samples.iter_mut() {
        for bus in 0..net.n_buses {
            for c in 0..5 {
                for z in 0..ti {
                    let p = (bus * N_CHANNELS + c) * ti + z;
                    s.input3d[p] = meta.encode_channel(c, s.input3d[p] as f64) as f32;
                }
            }
        }
        for v in s.target.chunks_mut(3) {
            for (c, x) in v.iter_mut().enumerate() {
                *x = meta.encode_channel(c, *x as f64) as f32;
            }
        }
    }

    Ok(Dataset { meta, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::powerdyn::{GeneratorParams, Injection, Line};

    fn test_net() -> NetworkModel {
        let gp = GeneratorParams {
            m: 0.1,
            d: 0.05,
            tdo_prime: 5.0,
            xd: 1.0,
            xd_prime: 0.3,
            efd: 1.0,
        };
        let mut net = NetworkModel {
            n_buses: 3,
            lines: alloc::vec![
                Line { i: 0, j: 1, b: 5.0, g: 0.0 },
                Line { i: 1, j: 2, b: 4.0, g: 0.0 },
                Line { i: 0, j: 2, b: 3.0, g: 0.0 },
            ],
            generators: alloc::vec![gp; 3],
            injections: alloc::vec![Injection { p: 0.0, q: 0.0 }; 3],
            self_susceptance: alloc::vec![-6.0; 3],
        };
        // Field voltages consistent with V = 1 at the uniform equilibrium.
        let (b, _) = net.admittance_matrices();
        for i in 0..3 {
            let dx = 0.7;
            let coupling: f64 = (0..3).filter(|&j| j != i).map(|j| b[i * 3 + j]).sum();
            net.generators[i].efd = (1.0 - dx * b[i * 3 + i]) - dx * coupling;
        }
        net
    }

    fn test_dist() -> ScenarioDistribution {
        ScenarioDistribution {
            delta_perturb: 0.1,
            omega_perturb_hz: 0.05,
            candidate_lines: alloc::vec![0, 1, 2],
            fault_type_weights: [1.0, 1.0, 1.0, 1.0],
            clear_cycles: (1, 30),
            t_f: 1.0,
            t_on_offset_cycles: alloc::vec![6],
        }
    }

    fn flat_equilibrium() -> SystemState {
        SystemState::new(alloc::vec![0.0; 3], alloc::vec![0.0; 3], alloc::vec![1.0; 3])
    }

    #[test]
    fn degenerate_distribution_yields_unique_scenario() {
        let net = test_net();
        let dist = ScenarioDistribution {
            delta_perturb: 0.0,
            omega_perturb_hz: 0.0,
            candidate_lines: alloc::vec![1],
            fault_type_weights: [0.0, 0.0, 0.0, 1.0],
            clear_cycles: (12, 12),
            t_f: 1.0,
            t_on_offset_cycles: alloc::vec![6],
        };
        let eq = flat_equilibrium();
        let (sc, s0, t_on) = sample_scenario(&dist, &net, &eq, 99).unwrap();
        assert_eq!(sc.fault_type, FaultType::ThreePhase);
        assert_eq!(sc.line, (1, 2));
        assert!((sc.t_cl - (1.0 + 12.0 * CYCLE)).abs() < 1e-12);
        assert_eq!(s0, eq);
        assert!((t_on - (1.0 + 6.0 * CYCLE)).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_scenario() {
        let net = test_net();
        let dist = test_dist();
        let eq = flat_equilibrium();
        let a = sample_scenario(&dist, &net, &eq, 1234).unwrap();
        let b = sample_scenario(&dist, &net, &eq, 1234).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn clear_time_histogram_is_uniform() {
        let net = test_net();
        let dist = test_dist();
        let eq = flat_equilibrium();
        let mut counts = [0usize; 30];
        let n = 10_000;
        for seed in 0..n {
            let (sc, _, _) = sample_scenario(&dist, &net, &eq, seed).unwrap();
            let cycles = ((sc.t_cl - sc.t_f) / CYCLE).round() as usize;
            assert!((1..=30).contains(&cycles));
            counts[cycles - 1] += 1;
        }
        // Chi-square goodness of fit against uniform; critical value for
        // 29 degrees of freedom at p = 0.01 is 49.588.
        let expect = n as f64 / 30.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expect;
                d * d / expect
            })
            .sum();
        assert!(chi2 < 49.588, "chi2 = {chi2}");
    }

    #[test]
    fn u_channels_follow_fault_window() {
        let net = test_net();
        let sc = FaultScenario {
            fault_type: FaultType::ThreePhase,
            line: (net.lines[1].i, net.lines[1].j),
            t_f: 1.0,
            clear_schedule: alloc::vec![ClearStep {
                t: 1.2,
                action: ClearAction::RestoreLine,
            }],
            t_cl: 1.2,
            kappa_override: None,
        };
        assert_eq!(encode_u_channels(&sc, &net, 0.5), (0.0, 0.0));
        // Line index 1 of 3 lines, three-phase type id 4.
        let (u1, u2) = encode_u_channels(&sc, &net, 1.1);
        assert!((u1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(u2, 1.0);
        assert_eq!(encode_u_channels(&sc, &net, 1.3), (0.0, 0.0));
    }

    #[test]
    fn u_encoding_direct_example() {
        // Fault on line index 4 of 10: u1 = 0.5; three-phase: u2 = 1.0.
        let mut net = test_net();
        net.n_buses = 11;
        net.lines = (0..10)
            .map(|k| Line {
                i: k,
                j: k + 1,
                b: 1.0,
                g: 0.0,
            })
            .collect();
        net.generators = alloc::vec![net.generators[0].clone(); 11];
        net.injections = alloc::vec![Injection { p: 0.0, q: 0.0 }; 11];
        net.self_susceptance = alloc::vec![-5.0; 11];
        let sc = FaultScenario {
            fault_type: FaultType::ThreePhase,
            line: (4, 5),
            t_f: 1.0,
            clear_schedule: alloc::vec![ClearStep {
                t: 1.5,
                action: ClearAction::RestoreLine,
            }],
            t_cl: 1.5,
            kappa_override: None,
        };
        assert_eq!(encode_u_channels(&sc, &net, 1.25), (0.5, 1.0));
    }

    #[test]
    fn stability_labels_by_threshold() {
        // Constant trajectories at given frequency deviations.
        let make = |omega_hz: alloc::vec::Vec<f64>| {
            let n = omega_hz.len();
            let times: alloc::vec::Vec<f64> = (0..=600).map(|k| k as f64 * 0.01).collect();
            let states = times
                .iter()
                .map(|_| {
                    SystemState::new(
                        alloc::vec![0.0; n],
                        omega_hz.iter().map(|h| h * TAU).collect(),
                        alloc::vec![1.0; n],
                    )
                })
                .collect();
            Trajectory {
                stage_ids: alloc::vec![0; times.len()],
                states,
                times,
                status: SimStatus::Completed,
            }
        };
        assert!(label_stability(&make(alloc::vec![0.0]), 1.0).unwrap());
        assert!(!label_stability(&make(alloc::vec![0.6]), 1.0).unwrap());
        // Mean over buses: (0.6 + 0.0) / 2 = 0.3 -> stable.
        assert!(label_stability(&make(alloc::vec![0.6, 0.0]), 1.0).unwrap());
    }

    #[test]
    fn sinusoid_average_below_threshold_is_stable() {
        // |omega| = a |sin(2 pi t)| has mean 2a/pi; pick a so the mean is
        // 0.49 Hz, just under the threshold.
        let a_hz = 0.49 * core::f64::consts::PI / 2.0;
        let times: alloc::vec::Vec<f64> = (0..=5500).map(|k| k as f64 * 0.001).collect();
        let states: alloc::vec::Vec<SystemState> = times
            .iter()
            .map(|&t| {
                SystemState::new(
                    alloc::vec![0.0],
                    alloc::vec![a_hz * (TAU * t).sin() * TAU],
                    alloc::vec![1.0],
                )
            })
            .collect();
        let traj = Trajectory {
            stage_ids: alloc::vec![0; times.len()],
            states,
            times,
            status: SimStatus::Completed,
        };
        // Hand integral: mean of |a sin| over the [5.0, 5.5] half-period
        // window is exactly 2a/pi = 0.49.
        assert!(label_stability(&traj, 1.0).unwrap());
    }

    #[test]
    fn diverged_trajectory_is_unstable() {
        let traj = Trajectory {
            times: alloc::vec![0.0],
            states: alloc::vec![SystemState::new(
                alloc::vec![0.0],
                alloc::vec![0.0],
                alloc::vec![1.0]
            )],
            stage_ids: alloc::vec![0],
            status: SimStatus::Diverged { t: 0.0 },
        };
        assert!(!label_stability(&traj, 1.0).unwrap());
    }

    #[test]
    fn short_trajectory_is_an_error() {
        let traj = Trajectory {
            times: alloc::vec![0.0, 1.0],
            states: alloc::vec![
                SystemState::new(alloc::vec![0.0], alloc::vec![0.0], alloc::vec![1.0]);
                2
            ],
            stage_ids: alloc::vec![0, 0],
            status: SimStatus::Completed,
        };
        assert!(matches!(
            label_stability(&traj, 1.0),
            Err(CoreError::InsufficientHorizon(_))
        ));
    }

    fn small_cfg(n_samples: usize) -> GenConfig {
        GenConfig {
            n_samples,
            train_fraction: 0.8,
            seed: 7,
            dt_int: 1.0 / 600.0,
            dt: 0.03,
            tau_in: 5,
            tau_out: 10,
        }
    }

    #[test]
    fn generated_dataset_shapes_and_determinism() {
        let net = test_net();
        let dist = test_dist();
        let eq = flat_equilibrium();
        let cfg = small_cfg(4);
        let ds = generate_dataset(&net, &dist, &eq, &cfg).unwrap();
        assert_eq!(ds.samples.len(), 4);
        for s in &ds.samples {
            assert_eq!(s.input3d.len(), 3 * N_CHANNELS * 5);
            assert_eq!(s.extras.len(), 10 * 3);
            assert_eq!(s.target.len(), 10 * 3 * 3);
        }
        let ds2 = generate_dataset(&net, &dist, &eq, &cfg).unwrap();
        assert_eq!(ds, ds2);
        let exp = ds.samples[0].expanded4d(&ds.meta);
        assert_eq!(exp.shape(), &[10, 3, N_CHANNELS, 8]);
    }

    #[test]
    fn expanded_slices_differ_only_in_appended_scalars_when_no_fault_active() {
        let net = test_net();
        let mut dist = test_dist();
        // t_on late enough that every frame timestamp is after clearing.
        dist.clear_cycles = (1, 1);
        dist.t_on_offset_cycles = alloc::vec![2];
        let eq = flat_equilibrium();
        let ds = generate_dataset(&net, &dist, &eq, &small_cfg(1)).unwrap();
        let meta = &ds.meta;
        let exp = ds.samples[0].expanded4d(meta);
        let c = meta.tau_in + 3;
        let slice_len = meta.n_buses * N_CHANNELS * c;
        let d = exp.data();
        for z_out in 1..meta.tau_out {
            for p in 0..slice_len {
                let (a, b) = (d[p], d[z_out * slice_len + p]);
                if p % c < meta.tau_in {
                    assert_eq!(a, b, "window copy differs at z_out {z_out}");
                } else if p % c == meta.tau_in {
                    assert!(a != b, "timestamps must differ");
                } else {
                    assert_eq!(a, b, "fault scalars should both be zero");
                }
            }
        }
    }

    #[test]
    fn normalization_round_trips_within_f32_ulp() {
        let net = test_net();
        let dist = test_dist();
        let eq = flat_equilibrium();
        let cfg = small_cfg(3);
        let ds = generate_dataset(&net, &dist, &eq, &cfg).unwrap();
        // Re-simulate the first sample's scenario and compare decoded
        // targets against the raw trajectory.
        let seed = mix_seed(cfg.seed, 0);
        let (sc, s0, t_on) = sample_scenario(&dist, &net, &eq, seed).unwrap();
        let t_end = (dist.t_f + STABILITY_WINDOW.1)
            .max(t_on + (cfg.tau_out + 1) as f64 * cfg.dt);
        let traj = simulate(&net, &sc, &s0, t_end, cfg.dt_int).unwrap();
        let s = &ds.samples[0];
        assert_eq!(s.t_on, t_on);
        for z_out in 0..cfg.tau_out {
            let t = t_on + (z_out + 1) as f64 * cfg.dt;
            let idx = traj.index_at_time(t, 1e-6).unwrap();
            for bus in 0..net.n_buses {
                let raw = [
                    traj.states[idx].delta[bus],
                    traj.states[idx].omega[bus] / TAU,
                    traj.states[idx].v[bus],
                ];
                for k in 0..3 {
                    let enc = s.target[(z_out * net.n_buses + bus) * 3 + k];
                    let dec = ds.meta.decode_channel(k, enc as f64) as f32;
                    let want = raw[k] as f32;
                    let ulp = (want.abs().max(1e-3) * f32::EPSILON) * 4.0;
                    assert!(
                        (dec - want).abs() <= ulp.max(2.0 * f32::EPSILON),
                        "ch {k}: {dec} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn fault_channels_match_scenario_window() {
        let net = test_net();
        let mut dist = test_dist();
        dist.clear_cycles = (25, 25);
        dist.t_on_offset_cycles = alloc::vec![10];
        let eq = flat_equilibrium();
        let ds = generate_dataset(&net, &dist, &eq, &small_cfg(2)).unwrap();
        for (i, s) in ds.samples.iter().enumerate() {
            let seed = mix_seed(ds.meta.seed, (i as u64) << 8);
            let (sc, _, t_on) = sample_scenario(&dist, &net, &eq, seed).unwrap();
            for z_out in 0..ds.meta.tau_out {
                let t = t_on + (z_out + 1) as f64 * ds.meta.dt;
                let active = t >= sc.t_f && t < sc.t_cl;
                let u2 = s.extras[z_out * 3 + 2];
                assert_eq!(u2 > 0.0, active, "sample {i}, z_out {z_out}");
            }
        }
    }

    #[test]
    fn invalid_distributions_rejected() {
        let net = test_net();
        let mut d = test_dist();
        d.candidate_lines.clear();
        assert!(d.validate(&net).is_err());
        let mut d = test_dist();
        d.fault_type_weights = [0.0; 4];
        assert!(d.validate(&net).is_err());
        let mut d = test_dist();
        d.clear_cycles = (0, 5);
        assert!(d.validate(&net).is_err());
        let mut d = test_dist();
        d.clear_cycles = (8, 3);
        assert!(d.validate(&net).is_err());
    }
}
