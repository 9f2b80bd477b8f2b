//! Regenerates the bundled example networks in `assets/`.
//!
//! Injections and field voltages are synthesized so that a chosen
//! operating point `(delta, 0, v)` is an exact equilibrium of the swing
//! and flux-decay equations; the result is verified against the library's
//! equilibrium solver before writing.
//!
//! Run from the repository root: `cargo run -p gridfno --example synth_networks`

use std::path::Path;

use gridfno::formats::write_network;
use gridfno_core::powerdyn::{
    find_equilibrium, swing_rhs, GeneratorParams, Injection, Line, NetworkModel, SystemState,
};

/// Fill in injections and field voltages that make `(delta, 0, v)` an
/// exact equilibrium.
fn balance(net: &mut NetworkModel, delta: &[f64], v: &[f64]) {
    let n = net.n_buses;
    let (b, g) = net.admittance_matrices();
    for i in 0..n {
        let mut p_elec = 0.0;
        let mut v_coupling = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let dij = delta[i] - delta[j];
            p_elec += v[i] * v[j] * (b[i * n + j] * dij.sin() + g[i * n + j] * dij.cos());
            v_coupling += v[j] * (b[i * n + j] * dij.cos() + g[i * n + j] * dij.sin());
        }
        net.injections[i].p = p_elec;
        let dx = net.generators[i].xd - net.generators[i].xd_prime;
        net.generators[i].efd = (1.0 - dx * b[i * n + i]) * v[i] - dx * v_coupling;
    }
}

fn check(net: &NetworkModel, delta: &[f64], v: &[f64], name: &str) {
    let s = SystemState::new(delta.to_vec(), vec![0.0; net.n_buses], v.to_vec());
    let d = swing_rhs(&s, net).expect("rhs");
    let resid = d
        .omega
        .iter()
        .chain(&d.v)
        .fold(0.0f64, |a, &x| a.max(x.abs()));
    assert!(resid < 1e-10, "{name}: designed point is not an equilibrium ({resid:.2e})");
    let eq = find_equilibrium(net).expect("solver equilibrium");
    let solver_resid = {
        let d = swing_rhs(&eq, net).expect("rhs");
        d.omega
            .iter()
            .chain(&d.v)
            .fold(0.0f64, |a, &x| a.max(x.abs()))
    };
    assert!(solver_resid < 1e-7, "{name}: solver residual {solver_resid:.2e}");
    println!("{name}: design residual {resid:.2e}, solver residual {solver_resid:.2e}");
}

/// Single machine against a stiff large machine over one tie line.
fn smib() -> NetworkModel {
    let delta = [0.35, 0.0];
    let v = [1.0, 1.0];
    let mut net = NetworkModel {
        n_buses: 2,
        lines: vec![Line { i: 0, j: 1, b: 4.0, g: 0.2 }],
        generators: vec![
            GeneratorParams { m: 0.05, d: 0.05, tdo_prime: 5.0, xd: 1.0, xd_prime: 0.3, efd: 1.0 },
            GeneratorParams { m: 5.0, d: 2.0, tdo_prime: 8.0, xd: 0.6, xd_prime: 0.2, efd: 1.0 },
        ],
        injections: vec![Injection { p: 0.0, q: 0.0 }; 2],
        self_susceptance: vec![-5.0, -5.0],
    };
    balance(&mut net, &delta, &v);
    check(&net, &delta, &v, "smib");
    net
}

/// Nine buses, three heavy machines on buses 0..2 feeding a six-bus ring
/// through step-up branches.
fn ninebus() -> NetworkModel {
    let delta = [0.55, 0.47, 0.4, 0.06, 0.0, 0.03, -0.04, 0.01, -0.06];
    let v = [1.02, 1.01, 1.0, 0.99, 0.98, 1.0, 0.97, 0.99, 0.98];
    let lines = vec![
        Line { i: 0, j: 3, b: 7.0, g: 0.3 },
        Line { i: 1, j: 5, b: 6.5, g: 0.3 },
        Line { i: 2, j: 7, b: 6.0, g: 0.3 },
        Line { i: 3, j: 4, b: 4.0, g: 0.2 },
        Line { i: 4, j: 5, b: 4.5, g: 0.2 },
        Line { i: 5, j: 6, b: 3.5, g: 0.15 },
        Line { i: 6, j: 7, b: 4.0, g: 0.2 },
        Line { i: 7, j: 8, b: 3.5, g: 0.15 },
        Line { i: 8, j: 3, b: 4.0, g: 0.2 },
    ];
    let gen = |m: f64, d: f64| GeneratorParams {
        m,
        d,
        tdo_prime: 10.0,
        xd: 0.32,
        xd_prime: 0.3,
        efd: 1.0,
    };
    // Lightly damped machines with enough inertia to stay in the first
    // swing: a close-in bolted fault leaves a large, slowly decaying
    // inter-machine oscillation that still dominates the frequency
    // response seconds after clearing, while milder shunt faults on the
    // ring ring down quickly.
    let mut generators = vec![gen(0.05, 0.001), gen(0.04, 0.001), gen(0.03, 0.001)];
    for _ in 3..9 {
        // Load buses: light equivalent machines with moderate damping.
        generators.push(GeneratorParams {
            m: 0.01,
            d: 0.005,
            tdo_prime: 8.0,
            xd: 0.27,
            xd_prime: 0.25,
            efd: 1.0,
        });
    }
    let mut self_susceptance = vec![0.0; 9];
    for (i, s) in self_susceptance.iter_mut().enumerate() {
        let incident: f64 = lines
            .iter()
            .filter(|l| l.i == i || l.j == i)
            .map(|l| l.b)
            .sum();
        *s = -(incident + 1.0);
    }
    let mut net = NetworkModel {
        n_buses: 9,
        lines,
        generators,
        injections: vec![Injection { p: 0.0, q: 0.0 }; 9],
        self_susceptance,
    };
    balance(&mut net, &delta, &v);
    check(&net, &delta, &v, "ninebus");
    net
}

fn main() {
    let dir = Path::new("assets");
    std::fs::create_dir_all(dir).expect("create assets dir");
    write_network(&dir.join("smib_network.json"), &smib()).expect("write smib");
    write_network(&dir.join("ninebus_network.json"), &ninebus()).expect("write ninebus");
    println!("wrote assets/smib_network.json and assets/ninebus_network.json");
}
