//! On-disk formats.
//!
//! Binary artifacts (datasets, checkpoints) share one container layout:
//! a single UTF-8 JSON header line, the little-endian payload, and a
//! trailing SHA-256 digest of everything before it. Network definitions
//! and reports are plain JSON; trajectories and predictions are CSV.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gridfno_core::datagen::{Dataset, DatasetMeta, SampleFrame, N_CHANNELS};
use gridfno_core::fno::{DnnBaseline, FnoHyper, FnoLayer, FnoModel};
use gridfno_core::numcore::{ComplexTensor, Tensor};
use gridfno_core::powerdyn::{
    GeneratorParams, Injection, Line, NetworkModel, Trajectory,
};

use crate::error::{AppError, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

// ---------------------------------------------------------------------------
// Container.
// ---------------------------------------------------------------------------

/// Write header line + payload + SHA-256 trailer.
pub fn write_container(path: &Path, header: &serde_json::Value, payload: &[u8]) -> Result<()> {
    let mut bytes = serde_json::to_vec(header)?;
    bytes.push(b'\n');
    bytes.extend_from_slice(payload);
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(&digest);
    fs::write(path, &bytes)
        .map_err(|e| AppError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Read and verify a container; returns (header, payload).
pub fn read_container(path: &Path) -> Result<(serde_json::Value, Vec<u8>)> {
    let bytes = fs::read(path)
        .map_err(|e| AppError::Config(format!("cannot read {}: {e}", path.display())))?;
    if bytes.len() < 32 {
        return Err(AppError::Config(format!(
            "{}: truncated container ({} bytes)",
            path.display(),
            bytes.len()
        )));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != trailer {
        return Err(AppError::Config(format!(
            "{}: checksum mismatch (file corrupted)",
            path.display()
        )));
    }
    let nl = body
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| AppError::Config(format!("{}: missing header line", path.display())))?;
    let header: serde_json::Value = serde_json::from_slice(&body[..nl]).map_err(|e| {
        AppError::Config(format!("{}: malformed header: {e}", path.display()))
    })?;
    Ok((header, body[nl + 1..].to_vec()))
}

fn expect_header(header: &serde_json::Value, kind: &str, path: &Path) -> Result<()> {
    let k = header.get("kind").and_then(|v| v.as_str()).unwrap_or("");
    if k != kind {
        return Err(AppError::Config(format!(
            "{}: expected a {kind} file, found kind {k:?}",
            path.display()
        )));
    }
    let sv = header.get("schema_version").and_then(|v| v.as_u64());
    if sv != Some(SCHEMA_VERSION as u64) {
        return Err(AppError::Config(format!(
            "{}: unsupported schema version {sv:?} (supported: {SCHEMA_VERSION})",
            path.display()
        )));
    }
    Ok(())
}

fn f32s_to_le(data: &[f32], out: &mut Vec<u8>) {
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn f64s_to_le(data: &[f64], out: &mut Vec<u8>) {
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

struct LeReader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> LeReader<'a> {
    fn new(buf: &'a [u8], path: &'a Path) -> Self {
        LeReader { buf, pos: 0, path }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(AppError::Config(format!(
                "{}: truncated payload (need {} bytes at offset {}, have {})",
                self.path.display(),
                n,
                self.pos,
                self.buf.len()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(4 * n)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(AppError::Config(format!(
                "{}: {} trailing payload bytes",
                self.path.display(),
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Network file.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LineJson {
    i: usize,
    j: usize,
    b: f64,
    #[serde(default)]
    g: f64,
}

#[derive(Serialize, Deserialize)]
struct GeneratorJson {
    m: f64,
    d: f64,
    tdo_prime: f64,
    xd: f64,
    xd_prime: f64,
    efd: f64,
}

#[derive(Serialize, Deserialize)]
struct InjectionJson {
    p: f64,
    #[serde(default)]
    q: f64,
}

#[derive(Serialize, Deserialize)]
struct NetworkJson {
    schema_version: u32,
    n_buses: usize,
    lines: Vec<LineJson>,
    generators: Vec<GeneratorJson>,
    injections: Vec<InjectionJson>,
    self_susceptance: Vec<f64>,
}

pub fn read_network(path: &Path) -> Result<NetworkModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("cannot read network file {}: {e}", path.display())))?;
    let nj: NetworkJson = serde_json::from_str(&text)
        .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    if nj.schema_version != SCHEMA_VERSION {
        return Err(AppError::Config(format!(
            "{}: unsupported network schema version {}",
            path.display(),
            nj.schema_version
        )));
    }
    let net = NetworkModel {
        n_buses: nj.n_buses,
        lines: nj
            .lines
            .into_iter()
            .map(|l| Line { i: l.i, j: l.j, b: l.b, g: l.g })
            .collect(),
        generators: nj
            .generators
            .into_iter()
            .map(|g| GeneratorParams {
                m: g.m,
                d: g.d,
                tdo_prime: g.tdo_prime,
                xd: g.xd,
                xd_prime: g.xd_prime,
                efd: g.efd,
            })
            .collect(),
        injections: nj
            .injections
            .into_iter()
            .map(|i| Injection { p: i.p, q: i.q })
            .collect(),
        self_susceptance: nj.self_susceptance,
    };
    net.validate()?;
    Ok(net)
}

pub fn write_network(path: &Path, net: &NetworkModel) -> Result<()> {
    let nj = NetworkJson {
        schema_version: SCHEMA_VERSION,
        n_buses: net.n_buses,
        lines: net
            .lines
            .iter()
            .map(|l| LineJson { i: l.i, j: l.j, b: l.b, g: l.g })
            .collect(),
        generators: net
            .generators
            .iter()
            .map(|g| GeneratorJson {
                m: g.m,
                d: g.d,
                tdo_prime: g.tdo_prime,
                xd: g.xd,
                xd_prime: g.xd_prime,
                efd: g.efd,
            })
            .collect(),
        injections: net
            .injections
            .iter()
            .map(|i| InjectionJson { p: i.p, q: i.q })
            .collect(),
        self_susceptance: net.self_susceptance.clone(),
    };
    fs::write(path, serde_json::to_string_pretty(&nj)? + "\n")
        .map_err(|e| AppError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Dataset meta (JSON mirror of the core type).
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize, Clone)]
pub struct MetaJson {
    pub dt: f64,
    pub dt_int: f64,
    pub tau_in: usize,
    pub tau_out: usize,
    pub n_buses: usize,
    pub channel_mean: Vec<f64>,
    pub channel_std: Vec<f64>,
    pub seed: u64,
    pub network_hash: u64,
    pub n_train: usize,
}

impl MetaJson {
    pub fn from_core(m: &DatasetMeta) -> Self {
        MetaJson {
            dt: m.dt,
            dt_int: m.dt_int,
            tau_in: m.tau_in,
            tau_out: m.tau_out,
            n_buses: m.n_buses,
            channel_mean: m.channel_mean.to_vec(),
            channel_std: m.channel_std.to_vec(),
            seed: m.seed,
            network_hash: m.network_hash,
            n_train: m.n_train,
        }
    }

    pub fn to_core(&self) -> Result<DatasetMeta> {
        let mean: [f64; N_CHANNELS] = self
            .channel_mean
            .clone()
            .try_into()
            .map_err(|_| AppError::Config("channel_mean must have 7 entries".into()))?;
        let std: [f64; N_CHANNELS] = self
            .channel_std
            .clone()
            .try_into()
            .map_err(|_| AppError::Config("channel_std must have 7 entries".into()))?;
        Ok(DatasetMeta {
            dt: self.dt,
            dt_int: self.dt_int,
            tau_in: self.tau_in,
            tau_out: self.tau_out,
            n_buses: self.n_buses,
            channel_mean: mean,
            channel_std: std,
            seed: self.seed,
            network_hash: self.network_hash,
            n_train: self.n_train,
        })
    }
}

// ---------------------------------------------------------------------------
// Dataset file.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    kind: String,
    schema_version: u32,
    dtype: String,
    meta: MetaJson,
    n_samples: usize,
    t_on: Vec<f64>,
    stable: Vec<bool>,
    config_sha256: String,
}

pub fn write_dataset(path: &Path, ds: &Dataset, config_sha256: &str) -> Result<()> {
    let header = DatasetHeader {
        kind: "dataset".into(),
        schema_version: SCHEMA_VERSION,
        dtype: "f32".into(),
        meta: MetaJson::from_core(&ds.meta),
        n_samples: ds.samples.len(),
        t_on: ds.samples.iter().map(|s| s.t_on).collect(),
        stable: ds.samples.iter().map(|s| s.stable).collect(),
        config_sha256: config_sha256.into(),
    };
    let mut payload = Vec::new();
    for s in &ds.samples {
        f32s_to_le(&s.input3d, &mut payload);
        f32s_to_le(&s.extras, &mut payload);
        f32s_to_le(&s.target, &mut payload);
    }
    write_container(path, &serde_json::to_value(&header)?, &payload)
}

pub fn read_dataset(path: &Path) -> Result<(Dataset, String)> {
    let (hv, payload) = read_container(path)?;
    expect_header(&hv, "dataset", path)?;
    let header: DatasetHeader = serde_json::from_value(hv)
        .map_err(|e| AppError::Config(format!("{}: bad dataset header: {e}", path.display())))?;
    let meta = header.meta.to_core()?;
    if header.t_on.len() != header.n_samples || header.stable.len() != header.n_samples {
        return Err(AppError::Config(format!(
            "{}: header sample annotations disagree with n_samples",
            path.display()
        )));
    }
    let in_len = meta.n_buses * N_CHANNELS * meta.tau_in;
    let ex_len = meta.tau_out * 3;
    let tg_len = meta.tau_out * meta.n_buses * 3;
    let mut r = LeReader::new(&payload, path);
    let mut samples = Vec::with_capacity(header.n_samples);
    for i in 0..header.n_samples {
        samples.push(SampleFrame {
            input3d: r.f32s(in_len)?,
            extras: r.f32s(ex_len)?,
            target: r.f32s(tg_len)?,
            t_on: header.t_on[i],
            stable: header.stable[i],
        });
    }
    r.finish()?;
    Ok((Dataset { meta, samples }, header.config_sha256))
}

// ---------------------------------------------------------------------------
// Checkpoints.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize, Clone)]
pub struct HyperJson {
    pub n_buses: usize,
    pub tau_in: usize,
    pub tau_out: usize,
    pub n_layers: usize,
    /// Tensor-axis order: [time, bus, channel].
    pub kmax: [usize; 3],
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl HyperJson {
    pub fn from_core(h: &FnoHyper) -> Self {
        HyperJson {
            n_buses: h.n_buses,
            tau_in: h.tau_in,
            tau_out: h.tau_out,
            n_layers: h.n_layers,
            kmax: h.kmax,
            bn_eps: h.bn_eps,
            bn_momentum: h.bn_momentum,
        }
    }

    pub fn to_core(&self) -> FnoHyper {
        FnoHyper {
            n_buses: self.n_buses,
            tau_in: self.tau_in,
            tau_out: self.tau_out,
            n_layers: self.n_layers,
            kmax: self.kmax,
            bn_eps: self.bn_eps,
            bn_momentum: self.bn_momentum,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    kind: String,
    schema_version: u32,
    dtype: String,
    model: String,
    meta: MetaJson,
    config_sha256: String,
    dataset_sha256: String,
    fno: Option<HyperJson>,
    dnn: Option<(usize, usize)>,
}

/// A trained model plus the dataset normalization it was fitted with.
pub enum ModelArtifact {
    Fno(FnoModel),
    Dnn(DnnBaseline),
}

pub fn write_checkpoint(
    path: &Path,
    model: &ModelArtifact,
    meta: &DatasetMeta,
    config_sha256: &str,
    dataset_sha256: &str,
) -> Result<()> {
    let mut payload = Vec::new();
    let header = match model {
        ModelArtifact::Fno(m) => {
            f64s_to_le(m.encoder.data(), &mut payload);
            for layer in &m.layers {
                f64s_to_le(layer.r.re(), &mut payload);
                f64s_to_le(layer.r.im(), &mut payload);
                f64s_to_le(layer.w.data(), &mut payload);
                f64s_to_le(layer.gamma.data(), &mut payload);
                f64s_to_le(layer.beta.data(), &mut payload);
                f64s_to_le(&layer.running_mean, &mut payload);
                f64s_to_le(&layer.running_var, &mut payload);
            }
            f64s_to_le(m.decoder.data(), &mut payload);
            CheckpointHeader {
                kind: "checkpoint".into(),
                schema_version: SCHEMA_VERSION,
                dtype: "f64".into(),
                model: "fno".into(),
                meta: MetaJson::from_core(meta),
                config_sha256: config_sha256.into(),
                dataset_sha256: dataset_sha256.into(),
                fno: Some(HyperJson::from_core(&m.hyper)),
                dnn: None,
            }
        }
        ModelArtifact::Dnn(m) => {
            for (w, b) in &m.layers {
                f64s_to_le(w.data(), &mut payload);
                f64s_to_le(b.data(), &mut payload);
            }
            let input_dim = m.layers.first().map(|(w, _)| w.shape()[0]).unwrap_or(0);
            let output_dim = m.layers.last().map(|(w, _)| w.shape()[1]).unwrap_or(0);
            CheckpointHeader {
                kind: "checkpoint".into(),
                schema_version: SCHEMA_VERSION,
                dtype: "f64".into(),
                model: "dnn".into(),
                meta: MetaJson::from_core(meta),
                config_sha256: config_sha256.into(),
                dataset_sha256: dataset_sha256.into(),
                fno: None,
                dnn: Some((input_dim, output_dim)),
            }
        }
    };
    write_container(path, &serde_json::to_value(&header)?, &payload)
}

pub struct Checkpoint {
    pub model: ModelArtifact,
    pub meta: DatasetMeta,
    pub config_sha256: String,
    pub dataset_sha256: String,
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let (hv, payload) = read_container(path)?;
    expect_header(&hv, "checkpoint", path)?;
    let header: CheckpointHeader = serde_json::from_value(hv)
        .map_err(|e| AppError::Config(format!("{}: bad checkpoint header: {e}", path.display())))?;
    let meta = header.meta.to_core()?;
    let mut r = LeReader::new(&payload, path);
    let model = match header.model.as_str() {
        "fno" => {
            let hyper = header
                .fno
                .as_ref()
                .ok_or_else(|| AppError::Config(format!("{}: missing fno hyper", path.display())))?
                .to_core();
            hyper.validate()?;
            let c = hyper.channels();
            let modes = hyper.modes()?;
            let wshape =
                gridfno_core::numcore::autodiff::spectral_weight_shape(&modes, c);
            let wlen: usize = wshape.iter().product();
            let encoder = Tensor::from_vec(&[c, c], r.f64s(c * c)?)?;
            let mut layers = Vec::with_capacity(hyper.n_layers);
            for _ in 0..hyper.n_layers {
                let re = r.f64s(wlen)?;
                let im = r.f64s(wlen)?;
                layers.push(FnoLayer {
                    r: ComplexTensor::from_parts(&wshape, re, im)?,
                    w: Tensor::from_vec(&[c, c], r.f64s(c * c)?)?,
                    gamma: Tensor::from_vec(&[c], r.f64s(c)?)?,
                    beta: Tensor::from_vec(&[c], r.f64s(c)?)?,
                    running_mean: r.f64s(c)?,
                    running_var: r.f64s(c)?,
                });
            }
            let decoder = Tensor::from_vec(&[c, 1], r.f64s(c)?)?;
            ModelArtifact::Fno(FnoModel {
                hyper,
                encoder,
                layers,
                decoder,
            })
        }
        "dnn" => {
            let (input_dim, output_dim) = header
                .dnn
                .ok_or_else(|| AppError::Config(format!("{}: missing dnn dims", path.display())))?;
            let n_layers = gridfno_core::fno::DNN_LAYERS;
            let mut layers = Vec::with_capacity(n_layers);
            for l in 0..n_layers {
                let (fi, fo) = (
                    input_dim,
                    if l + 1 == n_layers { output_dim } else { input_dim },
                );
                let w = Tensor::from_vec(&[fi, fo], r.f64s(fi * fo)?)?;
                let b = Tensor::from_vec(&[fo], r.f64s(fo)?)?;
                layers.push((w, b));
            }
            ModelArtifact::Dnn(DnnBaseline { layers })
        }
        other => {
            return Err(AppError::Config(format!(
                "{}: unknown model kind {other:?}",
                path.display()
            )))
        }
    };
    r.finish()?;
    Ok(Checkpoint {
        model,
        meta,
        config_sha256: header.config_sha256,
        dataset_sha256: header.dataset_sha256,
    })
}

// ---------------------------------------------------------------------------
// Trajectory CSV.
// ---------------------------------------------------------------------------

/// `t,stage,bus,delta_rad,omega_hz,v_pu`, one row per (time, bus).
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from("t,stage,bus,delta_rad,omega_hz,v_pu\n");
    let tau = std::f64::consts::TAU;
    for k in 0..traj.len() {
        let s = &traj.states[k];
        for bus in 0..s.delta.len() {
            out.push_str(&format!(
                "{:.10},{},{},{:.12},{:.12},{:.12}\n",
                traj.times[k],
                traj.stage_ids[k],
                bus,
                s.delta[bus],
                s.omega[bus] / tau,
                s.v[bus],
            ));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Manifests.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub artifacts: Vec<(String, String)>,
}

/// Write `<name>.manifest.json` next to the artifacts, recording their
/// hashes.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    seed: u64,
    config_sha256: &str,
    artifact_paths: &[&Path],
) -> Result<()> {
    let mut artifacts = Vec::new();
    for p in artifact_paths {
        artifacts.push((
            p.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            sha256_file(p)?,
        ));
    }
    let m = Manifest {
        schema_version: SCHEMA_VERSION,
        command: command.into(),
        seed,
        config_sha256: config_sha256.into(),
        artifacts,
    };
    let path = dir.join(format!("{command}.manifest.json"));
    fs::write(&path, serde_json::to_string_pretty(&m)? + "\n")
        .map_err(|e| AppError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}
