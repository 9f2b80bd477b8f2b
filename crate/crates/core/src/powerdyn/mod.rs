//! Network model and staged transient simulation.
//!
//! The electrical network is a set of buses joined by lines with
//! susceptance/conductance; each bus carries a synchronous generator with
//! flux-decay voltage dynamics. A fault scenario scales the faulted line's
//! admittance during the fault-on window and applies a schedule of clearing
//! actions, partitioning time into stages; within each stage the dynamics
//! are smooth and integrated with fixed-step RK4.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;


#[allow(unused_imports)] // resolves float math in the no_std build
use num_traits::Float;

use crate::error::{CoreError, Result};
use crate::numcore::linalg::solve_dense;

/// Largest state magnitude tolerated before a run is declared diverged.
pub const DIVERGENCE_CAP: f64 = 1e6;

/// Default integrator step: 10 sub-steps per 60 Hz cycle.
pub const DEFAULT_DT_INT: f64 = 1.0 / 600.0;

/// A transmission line between buses `i` and `j` with susceptance `b` and
/// conductance `g` (per unit).
#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub i: usize,
    pub j: usize,
    pub b: f64,
    pub g: f64,
}

/// Synchronous-generator constants at one bus.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    /// Inertia constant M (s^2).
    pub m: f64,
    /// Damping D (p.u.).
    pub d: f64,
    /// Transient open-circuit time constant T'_do (s).
    pub tdo_prime: f64,
    /// Direct-axis synchronous reactance x_d (p.u.).
    pub xd: f64,
    /// Direct-axis transient reactance x'_d (p.u.).
    pub xd_prime: f64,
    /// Field voltage E_fd (p.u.).
    pub efd: f64,
}

/// Power injections at one bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Injection {
    pub p: f64,
    pub q: f64,
}

/// Buses, lines and generator data; the physics of the swing/flux-decay
/// equations.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub n_buses: usize,
    pub lines: Vec<Line>,
    pub generators: Vec<GeneratorParams>,
    pub injections: Vec<Injection>,
    /// Self-susceptance B_ii per bus (enters only the voltage dynamics).
    pub self_susceptance: Vec<f64>,
}

impl NetworkModel {
    /// Check the structural invariants: at least one bus, per-bus parameter
    /// vectors of matching length, distinct valid line endpoints, and
    /// physical generator constants (M > 0, T'_do > 0, x_d > x'_d > 0).
    pub fn validate(&self) -> Result<()> {
        if self.n_buses == 0 {
            return Err(CoreError::InvalidModel("n_buses must be >= 1".into()));
        }
        if self.generators.len() != self.n_buses
            || self.injections.len() != self.n_buses
            || self.self_susceptance.len() != self.n_buses
        {
            return Err(CoreError::InvalidModel(format!(
                "per-bus data lengths {}/{}/{} do not match n_buses = {}",
                self.generators.len(),
                self.injections.len(),
                self.self_susceptance.len(),
                self.n_buses
            )));
        }
        for (idx, line) in self.lines.iter().enumerate() {
            if line.i >= self.n_buses || line.j >= self.n_buses || line.i == line.j {
                return Err(CoreError::InvalidModel(format!(
                    "line {idx} connects buses ({}, {}) in a {}-bus network",
                    line.i, line.j, self.n_buses
                )));
            }
        }
        for (bus, g) in self.generators.iter().enumerate() {
            if !(g.m > 0.0) {
                return Err(CoreError::InvalidModel(format!("bus {bus}: M must be > 0")));
            }
            if !(g.tdo_prime > 0.0) {
                return Err(CoreError::InvalidModel(format!(
                    "bus {bus}: T'_do must be > 0"
                )));
            }
            if !(g.xd > g.xd_prime && g.xd_prime > 0.0) {
                return Err(CoreError::InvalidModel(format!(
                    "bus {bus}: need x_d > x'_d > 0"
                )));
            }
        }
        Ok(())
    }

    /// Dense symmetric susceptance and conductance matrices (row-major
    /// `n x n`). Off-diagonals come from `lines` (summed over parallel
    /// lines); the B diagonal holds the self-susceptance, the G diagonal
    /// is zero.
    pub fn admittance_matrices(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_buses;
        let mut b = vec![0.0; n * n];
        let mut g = vec![0.0; n * n];
        for line in &self.lines {
            b[line.i * n + line.j] += line.b;
            b[line.j * n + line.i] += line.b;
            g[line.i * n + line.j] += line.g;
            g[line.j * n + line.i] += line.g;
        }
        for (i, &bii) in self.self_susceptance.iter().enumerate() {
            b[i * n + i] = bii;
        }
        (b, g)
    }

    fn line_indices(&self, i: usize, j: usize) -> Vec<usize> {
        self.lines
            .iter()
            .enumerate()
            .filter(|(_, l)| (l.i == i && l.j == j) || (l.i == j && l.j == i))
            .map(|(idx, _)| idx)
            .collect()
    }
}

/// Per-bus rotor angle (rad, unwrapped), frequency deviation (rad/s) and
/// voltage magnitude (p.u.).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub delta: Vec<f64>,
    pub omega: Vec<f64>,
    pub v: Vec<f64>,
}

impl SystemState {
    pub fn new(delta: Vec<f64>, omega: Vec<f64>, v: Vec<f64>) -> Self {
        SystemState { delta, omega, v }
    }

    pub fn n_buses(&self) -> usize {
        self.delta.len()
    }

    /// Index of the first bus carrying a non-finite entry, if any.
    fn first_non_finite(&self) -> Option<usize> {
        for (bus, ((d, w), v)) in self
            .delta
            .iter()
            .zip(&self.omega)
            .zip(&self.v)
            .enumerate()
        {
            if !(d.is_finite() && w.is_finite() && v.is_finite()) {
                return Some(bus);
            }
        }
        None
    }

    fn max_abs(&self) -> f64 {
        self.delta
            .iter()
            .chain(&self.omega)
            .chain(&self.v)
            .fold(0.0f64, |m, &x| m.max(x.abs()))
    }
}

/// Fault categories with their default admittance scale factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultType {
    None,
    /// Single line to ground.
    Slg,
    /// Double line to ground.
    Llg,
    /// Line to line.
    Ll,
    ThreePhase,
}

impl FaultType {
    /// Factor applied to the faulted line's (B, G) while the fault is on.
    /// The mapping is a modeling choice: a three-phase fault removes the
    /// line entirely, milder faults leave a fraction of the admittance.
    pub fn kappa(self) -> f64 {
        match self {
            FaultType::None => 1.0,
            FaultType::Slg => 0.5,
            FaultType::Llg => 0.2,
            FaultType::Ll => 0.3,
            FaultType::ThreePhase => 0.0,
        }
    }

    /// Small integer id used by the dataset fault-type channel.
    pub fn type_id(self) -> u8 {
        match self {
            FaultType::None => 0,
            FaultType::Slg => 1,
            FaultType::Llg => 2,
            FaultType::Ll => 3,
            FaultType::ThreePhase => 4,
        }
    }
}

/// What a scheduled clearing step does to the faulted line, relative to
/// its pre-fault admittance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClearAction {
    /// Set the line to `factor` times its pre-fault (B, G).
    ScaleAdmittance(f64),
    /// Restore the pre-fault admittance.
    RestoreLine,
    /// Remove the line.
    TripLine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClearStep {
    pub t: f64,
    pub action: ClearAction,
}

/// Fault type, location and clearing schedule. Stage indices: 0 is
/// pre-fault; stage 1 starts at `t_f` with the faulted line scaled by the
/// fault-type factor; each schedule entry at time `t` opens the next
/// stage by applying its action; the stage opened by the last entry (at
/// `t_cl`) is the post-fault system.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultScenario {
    pub fault_type: FaultType,
    /// Bus pair of the faulted line.
    pub line: (usize, usize),
    /// Fault onset time (s).
    pub t_f: f64,
    pub clear_schedule: Vec<ClearStep>,
    /// Final clearing time (s); must equal the last schedule entry's time.
    pub t_cl: f64,
    /// Overrides the fault-type admittance factor when set.
    pub kappa_override: Option<f64>,
}

impl FaultScenario {
    /// A scenario with no fault at all.
    pub fn none() -> Self {
        FaultScenario {
            fault_type: FaultType::None,
            line: (0, 0),
            t_f: 0.0,
            clear_schedule: Vec::new(),
            t_cl: 0.0,
            kappa_override: None,
        }
    }

    pub fn validate(&self, net: &NetworkModel) -> Result<()> {
        if self.fault_type == FaultType::None {
            if !self.clear_schedule.is_empty() {
                return Err(CoreError::InvalidModel(
                    "a no-fault scenario cannot have clearing steps".into(),
                ));
            }
            return Ok(());
        }
        if net.line_indices(self.line.0, self.line.1).is_empty() {
            return Err(CoreError::InvalidModel(format!(
                "faulted line ({}, {}) not in network",
                self.line.0, self.line.1
            )));
        }
        if self.clear_schedule.is_empty() {
            return Err(CoreError::InvalidModel(
                "fault scenario needs at least one clearing step".into(),
            ));
        }
        let mut prev = self.t_f;
        for step in &self.clear_schedule {
            if !(step.t > prev) {
                return Err(CoreError::InvalidModel(format!(
                    "clearing times must increase strictly after t_f: {} after {prev}",
                    step.t
                )));
            }
            prev = step.t;
        }
        if (prev - self.t_cl).abs() > 1e-12 {
            return Err(CoreError::InvalidModel(format!(
                "last clearing step at {prev} does not match t_cl = {}",
                self.t_cl
            )));
        }
        Ok(())
    }

    /// Number of stages: pre-fault, fault-on, and one per clearing step.
    pub fn n_stages(&self) -> usize {
        if self.fault_type == FaultType::None {
            1
        } else {
            self.clear_schedule.len() + 2
        }
    }

    /// Stage index active at time `t`.
    pub fn stage_at(&self, t: f64) -> usize {
        if self.fault_type == FaultType::None || t < self.t_f {
            return 0;
        }
        1 + self.clear_schedule.iter().filter(|s| s.t <= t).count()
    }

    /// Admittance factor during the fault-on stage.
    pub fn kappa(&self) -> f64 {
        self.kappa_override.unwrap_or_else(|| self.fault_type.kappa())
    }

    /// Stage-boundary times in increasing order.
    pub fn boundaries(&self) -> Vec<f64> {
        if self.fault_type == FaultType::None {
            return Vec::new();
        }
        let mut b = vec![self.t_f];
        b.extend(self.clear_schedule.iter().map(|s| s.t));
        b
    }

    /// True while the fault is on (between onset and final clearing) —
    /// the window during which the dataset's fault channels are active.
    pub fn fault_active_at(&self, t: f64) -> bool {
        self.fault_type != FaultType::None && t >= self.t_f && t < self.t_cl
    }
}

/// Network as seen in a given stage: the faulted line's admittance is
/// scaled by the fault factor during the fault-on stage and follows the
/// clearing schedule afterwards. Stage 0 returns the input unchanged.
pub fn apply_stage(
    net: &NetworkModel,
    scenario: &FaultScenario,
    stage: usize,
) -> Result<NetworkModel> {
    let n_stages = scenario.n_stages();
    if stage >= n_stages {
        return Err(CoreError::UnknownStage { stage, n_stages });
    }
    let mut out = net.clone();
    if stage == 0 || scenario.fault_type == FaultType::None {
        return Ok(out);
    }
    let factor = if stage == 1 {
        scenario.kappa()
    } else {
        match scenario.clear_schedule[stage - 2].action {
            ClearAction::ScaleAdmittance(f) => f,
            ClearAction::RestoreLine => 1.0,
            ClearAction::TripLine => 0.0,
        }
    };
    for idx in net.line_indices(scenario.line.0, scenario.line.1) {
        out.lines[idx].b = net.lines[idx].b * factor;
        out.lines[idx].g = net.lines[idx].g * factor;
    }
    Ok(out)
}

/// Precomputed dense form of a network for the integrator inner loop.
struct DenseNet {
    n: usize,
    b: Vec<f64>,
    g: Vec<f64>,
    gens: Vec<GeneratorParams>,
    p: Vec<f64>,
}

impl DenseNet {
    fn new(net: &NetworkModel) -> Self {
        let (b, g) = net.admittance_matrices();
        DenseNet {
            n: net.n_buses,
            b,
            g,
            gens: net.generators.clone(),
            p: net.injections.iter().map(|inj| inj.p).collect(),
        }
    }

    /// Right side of the swing/flux-decay equations.
    fn rhs(&self, s: &SystemState) -> SystemState {
        let n = self.n;
        let mut ddelta = vec![0.0; n];
        let mut domega = vec![0.0; n];
        let mut dv = vec![0.0; n];
        for i in 0..n {
            let gen = &self.gens[i];
            let mut p_elec = 0.0;
            let mut v_coupling = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let dij = s.delta[i] - s.delta[j];
                let (sin_d, cos_d) = dij.sin_cos();
                let bij = self.b[i * n + j];
                let gij = self.g[i * n + j];
                p_elec += s.v[i] * s.v[j] * (bij * sin_d + gij * cos_d);
                v_coupling += s.v[j] * (bij * cos_d + gij * sin_d);
            }
            ddelta[i] = s.omega[i];
            domega[i] = (self.p[i] - gen.d * s.omega[i] - p_elec) / gen.m;
            let dx = gen.xd - gen.xd_prime;
            dv[i] = (gen.efd - (1.0 - dx * self.b[i * n + i]) * s.v[i]
                + dx * v_coupling)
                / gen.tdo_prime;
        }
        SystemState::new(ddelta, domega, dv)
    }

    /// Right side of the reduced (constant-voltage, lossless, linearized
    /// coupling) model. The source model omits the inertia constant here;
    /// it is kept on the left side for consistency with the full model.
    fn dc_rhs(&self, s: &SystemState) -> SystemState {
        let n = self.n;
        let mut ddelta = vec![0.0; n];
        let mut domega = vec![0.0; n];
        for i in 0..n {
            let mut coupling = 0.0;
            for j in 0..n {
                if j == i {
                    continue;
                }
                coupling += self.b[i * n + j] * (s.delta[i] - s.delta[j]);
            }
            ddelta[i] = s.omega[i];
            domega[i] =
                (self.p[i] - self.gens[i].d * s.omega[i] - coupling) / self.gens[i].m;
        }
        SystemState::new(ddelta, domega, vec![0.0; n])
    }
}

fn check_state(state: &SystemState, net: &NetworkModel) -> Result<()> {
    if state.n_buses() != net.n_buses
        || state.omega.len() != net.n_buses
        || state.v.len() != net.n_buses
    {
        return Err(CoreError::ShapeMismatch(format!(
            "state for {} buses on a {}-bus network",
            state.n_buses(),
            net.n_buses
        )));
    }
    if let Some(bus) = state.first_non_finite() {
        return Err(CoreError::NumericalBlowUp { bus });
    }
    Ok(())
}

/// Time derivative of the full swing/flux-decay dynamics.
pub fn swing_rhs(state: &SystemState, net: &NetworkModel) -> Result<SystemState> {
    check_state(state, net)?;
    Ok(DenseNet::new(net).rhs(state))
}

/// Time derivative of the reduced model: constant voltages, lossless
/// linearized angle coupling. The inertia constant divides the right side
/// (the source form drops it; see module docs).
pub fn dc_swing_rhs(state: &SystemState, net: &NetworkModel) -> Result<SystemState> {
    check_state(state, net)?;
    Ok(DenseNet::new(net).dc_rhs(state))
}

/// Outcome of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub enum SimStatus {
    Completed,
    /// The state left the admissible region; the trajectory is truncated
    /// at `t`.
    Diverged { t: f64 },
}

/// Dense time-indexed solution: one state and stage id per time point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    pub stage_ids: Vec<usize>,
    pub status: SimStatus,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the stored time closest to `t`, if within `tol`.
    pub fn index_at_time(&self, t: f64, tol: f64) -> Option<usize> {
        let i = self.times.partition_point(|&x| x < t);
        let mut best: Option<usize> = None;
        for cand in [i.wrapping_sub(1), i] {
            if let Some(&tc) = self.times.get(cand) {
                if (tc - t).abs() <= tol
                    && best.is_none_or(|b| (tc - t).abs() < (self.times[b] - t).abs())
                {
                    best = Some(cand);
                }
            }
        }
        best
    }
}

fn rk4_step(net: &DenseNet, s: &SystemState, h: f64) -> SystemState {
    let k1 = net.rhs(s);
    let k2 = net.rhs(&add_scaled(s, &k1, h / 2.0));
    let k3 = net.rhs(&add_scaled(s, &k2, h / 2.0));
    let k4 = net.rhs(&add_scaled(s, &k3, h));
    let n = s.n_buses();
    let mut out = s.clone();
    for i in 0..n {
        out.delta[i] +=
            h / 6.0 * (k1.delta[i] + 2.0 * k2.delta[i] + 2.0 * k3.delta[i] + k4.delta[i]);
        out.omega[i] +=
            h / 6.0 * (k1.omega[i] + 2.0 * k2.omega[i] + 2.0 * k3.omega[i] + k4.omega[i]);
        out.v[i] += h / 6.0 * (k1.v[i] + 2.0 * k2.v[i] + 2.0 * k3.v[i] + k4.v[i]);
    }
    out
}

fn add_scaled(s: &SystemState, d: &SystemState, h: f64) -> SystemState {
    let n = s.n_buses();
    let mut out = s.clone();
    for i in 0..n {
        out.delta[i] += h * d.delta[i];
        out.omega[i] += h * d.omega[i];
        out.v[i] += h * d.v[i];
    }
    out
}

/// Integrate the staged dynamics with fixed-step RK4.
///
/// Every stage boundary lands exactly on a step boundary (the last step of
/// a stage is shortened as needed); the state is continuous across
/// boundaries — only the network parameters jump. A state whose magnitude
/// exceeds [`DIVERGENCE_CAP`] (or turns non-finite) truncates the run with
/// [`SimStatus::Diverged`]; the partial trajectory is kept.
pub fn simulate(
    net: &NetworkModel,
    scenario: &FaultScenario,
    s0: &SystemState,
    t_end: f64,
    dt_int: f64,
) -> Result<Trajectory> {
    net.validate()?;
    scenario.validate(net)?;
    check_state(s0, net)?;
    if !(dt_int > 0.0) || !(t_end > 0.0) {
        return Err(CoreError::InvalidModel(format!(
            "need dt_int > 0 and t_end > 0, got {dt_int} and {t_end}"
        )));
    }

    // Segment [0, t_end] at the stage boundaries that fall inside it.
    let mut cuts = vec![0.0];
    for b in scenario.boundaries() {
        if b > 0.0 && b < t_end {
            cuts.push(b);
        }
    }
    cuts.push(t_end);

    let mut stage_nets = Vec::with_capacity(scenario.n_stages());
    for stage in 0..scenario.n_stages() {
        stage_nets.push(DenseNet::new(&apply_stage(net, scenario, stage)?));
    }

    let mut times = vec![0.0];
    let mut states = vec![s0.clone()];
    let mut stage_ids = vec![scenario.stage_at(0.0)];
    let mut status = SimStatus::Completed;

    'segments: for seg in cuts.windows(2) {
        let (t0, t1) = (seg[0], seg[1]);
        // Stage is constant on (t0, t1); sample just past the left edge.
        let stage = scenario.stage_at(t0 + 0.25 * dt_int.min(t1 - t0));
        let dnet = &stage_nets[stage];
        let n_steps = ((t1 - t0) / dt_int - 1e-9).floor() as usize + 1;
        let mut state = states.last().expect("non-empty").clone();
        for k in 0..n_steps {
            let t_next = if k + 1 == n_steps {
                t1
            } else {
                t0 + (k + 1) as f64 * dt_int
            };
            let h = if k + 1 == n_steps {
                t1 - (t0 + k as f64 * dt_int)
            } else {
                dt_int
            };
            debug_assert!(h > 0.0 && h <= dt_int * (1.0 + 1e-9));
            state = rk4_step(dnet, &state, h);
            if state.first_non_finite().is_some() {
                status = SimStatus::Diverged {
                    t: *times.last().expect("non-empty"),
                };
                break 'segments;
            }
            times.push(t_next);
            stage_ids.push(scenario.stage_at(t_next));
            let diverged = state.max_abs() > DIVERGENCE_CAP;
            states.push(state.clone());
            if diverged {
                status = SimStatus::Diverged { t: t_next };
                break 'segments;
            }
        }
    }

    Ok(Trajectory {
        times,
        states,
        stage_ids,
        status,
    })
}

/// Equilibrium search: finds (δ*, 0, V*) with ‖swing_rhs‖∞ < 1e-12 by
/// damped least-squares (Levenberg–Marquardt) on the algebraic residual.
/// The first bus angle is pinned at 0 as the rotation gauge.
pub fn find_equilibrium(net: &NetworkModel) -> Result<SystemState> {
    net.validate()?;
    let n = net.n_buses;
    let dnet = DenseNet::new(net);
    // Unknowns: delta[1..n] then v[0..n].
    let m = (n - 1) + n;
    let unpack = |x: &[f64]| {
        let mut delta = vec![0.0; n];
        delta[1..].copy_from_slice(&x[..n - 1]);
        let v = x[n - 1..].to_vec();
        SystemState::new(delta, vec![0.0; n], v)
    };
    let residual = |x: &[f64]| -> Vec<f64> {
        let d = dnet.rhs(&unpack(x));
        d.omega.iter().chain(&d.v).copied().collect()
    };
    let mut x = vec![0.0; m];
    // Flat start: delta = 0, V = 1.
    for xv in x[n - 1..].iter_mut() {
        *xv = 1.0;
    }
    let mut lambda = 1e-3;
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let inf_norm = |r: &[f64]| r.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut r = residual(&x);
    for _ in 0..200 {
        if inf_norm(&r) < 1e-12 {
            return Ok(unpack(&x));
        }
        // Finite-difference Jacobian (2n residuals x m unknowns).
        let rows = 2 * n;
        let mut jac = vec![0.0; rows * m];
        let eps = 1e-7;
        for c in 0..m {
            let mut xp = x.clone();
            xp[c] += eps;
            let rp = residual(&xp);
            for row in 0..rows {
                jac[row * m + c] = (rp[row] - r[row]) / eps;
            }
        }
        // Normal equations with damping: (J^T J + lambda I) dx = -J^T r.
        let mut improved = false;
        for _ in 0..20 {
            let mut a = vec![0.0; m * m];
            let mut b = vec![0.0; m];
            for i in 0..m {
                for j in 0..m {
                    let mut acc = 0.0;
                    for row in 0..rows {
                        acc += jac[row * m + i] * jac[row * m + j];
                    }
                    a[i * m + j] = acc;
                }
                a[i * m + i] += lambda;
                let mut acc = 0.0;
                for row in 0..rows {
                    acc += jac[row * m + i] * r[row];
                }
                b[i] = -acc;
            }
            let Some(dx) = solve_dense(&mut a, &mut b, m) else {
                lambda *= 10.0;
                continue;
            };
            let xn: Vec<f64> = x.iter().zip(&dx).map(|(xv, dv)| xv + dv).collect();
            let rn = residual(&xn);
            if cost(&rn) < cost(&r) {
                x = xn;
                r = rn;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 3.0;
        }
        if !improved {
            break;
        }
    }
    if inf_norm(&r) < 1e-12 {
        Ok(unpack(&x))
    } else {
        Err(CoreError::NoEquilibrium)
    }
}

#[cfg(test)]
mod tests;
