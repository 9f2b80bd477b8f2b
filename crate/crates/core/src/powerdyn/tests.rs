use super::*;

use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u = rng.next_u64() as f64 / u64::MAX as f64;
    lo + (hi - lo) * u
}

fn gen_params() -> GeneratorParams {
    GeneratorParams {
        m: 0.1,
        d: 0.05,
        tdo_prime: 5.0,
        xd: 1.0,
        xd_prime: 0.3,
        efd: 1.0,
    }
}

/// Build a network whose injections and field voltages are chosen so that
/// `(delta, 0, v)` is an exact equilibrium of the full dynamics.
fn synth_net(lines: Vec<Line>, delta: &[f64], v: &[f64], bii: &[f64]) -> NetworkModel {
    let n = delta.len();
    let mut net = NetworkModel {
        n_buses: n,
        lines,
        generators: vec![gen_params(); n],
        injections: vec![Injection { p: 0.0, q: 0.0 }; n],
        self_susceptance: bii.to_vec(),
    };
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
    net
}

fn three_bus_lines() -> Vec<Line> {
    vec![
        Line {
            i: 0,
            j: 1,
            b: 5.0,
            g: 0.4,
        },
        Line {
            i: 1,
            j: 2,
            b: 4.0,
            g: 0.2,
        },
        Line {
            i: 0,
            j: 2,
            b: 3.0,
            g: 0.1,
        },
    ]
}

#[test]
fn equilibrium_state_has_zero_derivative() {
    let delta = [0.0, 0.15, -0.1];
    let v = [1.0, 1.02, 0.98];
    let net = synth_net(three_bus_lines(), &delta, &v, &[-8.0, -9.0, -7.0]);
    let s = SystemState::new(delta.to_vec(), vec![0.0; 3], v.to_vec());
    let d = swing_rhs(&s, &net).unwrap();
    for i in 0..3 {
        assert!(d.delta[i].abs() < 1e-12);
        assert!(d.omega[i].abs() < 1e-12, "omega dot {}", d.omega[i]);
        assert!(d.v[i].abs() < 1e-12, "v dot {}", d.v[i]);
    }
}

#[test]
fn aligned_lossless_two_bus_decouples() {
    // delta = (0, 0), V = (1, 1), G = 0: the coupling terms vanish and
    // omega_dot_i = (P_i - D_i omega_i) / M_i.
    let mut net = NetworkModel {
        n_buses: 2,
        lines: vec![Line {
            i: 0,
            j: 1,
            b: 5.0,
            g: 0.0,
        }],
        generators: vec![gen_params(); 2],
        injections: vec![Injection { p: 0.3, q: 0.0 }, Injection { p: -0.2, q: 0.0 }],
        self_susceptance: vec![0.0; 2],
    };
    net.generators[1].d = 0.02;
    let s = SystemState::new(vec![0.0; 2], vec![0.5, -0.25], vec![1.0; 2]);
    let d = swing_rhs(&s, &net).unwrap();
    for i in 0..2 {
        let gen = &net.generators[i];
        let expect = (net.injections[i].p - gen.d * s.omega[i]) / gen.m;
        assert!((d.omega[i] - expect).abs() < 1e-14);
    }
}

#[test]
fn swing_rhs_matches_term_by_term_oracle() {
    // Independent straight-line evaluation of the dynamics, written
    // directly from the per-bus sums.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let net = NetworkModel {
        n_buses: 3,
        lines: three_bus_lines(),
        generators: vec![
            GeneratorParams {
                m: 0.12,
                d: 0.03,
                tdo_prime: 6.0,
                xd: 1.2,
                xd_prime: 0.35,
                efd: 1.1,
            },
            gen_params(),
            GeneratorParams {
                m: 0.08,
                d: 0.07,
                tdo_prime: 4.0,
                xd: 0.9,
                xd_prime: 0.25,
                efd: 0.95,
            },
        ],
        injections: vec![
            Injection { p: 0.5, q: 0.1 },
            Injection { p: -0.3, q: 0.0 },
            Injection { p: -0.1, q: -0.05 },
        ],
        self_susceptance: vec![-8.0, -9.5, -7.2],
    };
    for _ in 0..10 {
        let s = SystemState::new(
            (0..3).map(|_| uniform(&mut rng, -1.0, 1.0)).collect(),
            (0..3).map(|_| uniform(&mut rng, -5.0, 5.0)).collect(),
            (0..3).map(|_| uniform(&mut rng, 0.8, 1.2)).collect(),
        );
        let d = swing_rhs(&s, &net).unwrap();
        let (b, g) = net.admittance_matrices();
        for i in 0..3 {
            let gen = &net.generators[i];
            let mut sum_sin = 0.0;
            let mut sum_cos = 0.0;
            let mut sum_v = 0.0;
            for j in 0..3 {
                if j == i {
                    continue;
                }
                let dij = s.delta[i] - s.delta[j];
                sum_sin += s.v[i] * s.v[j] * b[i * 3 + j] * dij.sin();
                sum_cos += s.v[i] * s.v[j] * g[i * 3 + j] * dij.cos();
                sum_v += s.v[j] * (b[i * 3 + j] * dij.cos() + g[i * 3 + j] * dij.sin());
            }
            let w_dot =
                (net.injections[i].p - gen.d * s.omega[i] - sum_sin - sum_cos) / gen.m;
            let dx = gen.xd - gen.xd_prime;
            let v_dot =
                (gen.efd - (1.0 - dx * b[i * 3 + i]) * s.v[i] + dx * sum_v) / gen.tdo_prime;
            assert!((d.delta[i] - s.omega[i]).abs() < 1e-13);
            assert!((d.omega[i] - w_dot).abs() < 1e-10);
            assert!((d.v[i] - v_dot).abs() < 1e-12);
        }
    }
}

#[test]
fn swing_rhs_flags_non_finite_state() {
    let net = synth_net(three_bus_lines(), &[0.0; 3], &[1.0; 3], &[0.0; 3]);
    let mut s = SystemState::new(vec![0.0; 3], vec![0.0; 3], vec![1.0; 3]);
    s.omega[2] = f64::NAN;
    assert_eq!(
        swing_rhs(&s, &net),
        Err(CoreError::NumericalBlowUp { bus: 2 })
    );
}

#[test]
fn dc_uniform_angles_balanced_injections_are_stationary() {
    let mut net = synth_net(three_bus_lines(), &[0.0; 3], &[1.0; 3], &[0.0; 3]);
    for inj in net.injections.iter_mut() {
        inj.p = 0.0;
    }
    let s = SystemState::new(vec![0.7; 3], vec![0.0; 3], vec![1.0; 3]);
    let d = dc_swing_rhs(&s, &net).unwrap();
    assert!(d.delta.iter().chain(&d.omega).all(|&x| x == 0.0));
}

#[test]
fn dc_smib_eigenvalues_match_quadratic_roots() {
    // Machine at bus 1 against a fixed bus 0 (huge inertia): the 2x2
    // state matrix of (delta_1, omega_1) has eigenvalues
    // (-D +/- sqrt(D^2 - 4 M B)) / (2 M).
    let (m, d, b) = (0.2, 0.1, 5.0);
    let mut net = synth_net(
        vec![Line {
            i: 0,
            j: 1,
            b,
            g: 0.0,
        }],
        &[0.0, 0.0],
        &[1.0, 1.0],
        &[0.0, 0.0],
    );
    net.generators[0].m = 1e12;
    net.generators[0].d = 0.0;
    net.generators[1].m = m;
    net.generators[1].d = d;
    for inj in net.injections.iter_mut() {
        inj.p = 0.0;
    }
    // State matrix by finite differences of the reduced dynamics.
    let eps = 1e-6;
    let base = SystemState::new(vec![0.0; 2], vec![0.0; 2], vec![1.0; 2]);
    let col = |ddelta: f64, domega: f64| {
        let mut s = base.clone();
        s.delta[1] += ddelta;
        s.omega[1] += domega;
        let der = dc_swing_rhs(&s, &net).unwrap();
        [der.delta[1] / eps, der.omega[1] / eps]
    };
    let c1 = col(eps, 0.0);
    let c2 = col(0.0, eps);
    let a = [[c1[0], c2[0]], [c1[1], c2[1]]];
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = tr * tr - 4.0 * det;
    // Closed form.
    let disc_cf = d * d - 4.0 * m * b;
    assert!(disc < 0.0 && disc_cf < 0.0);
    let (re, im) = (tr / 2.0, (-disc).sqrt() / 2.0);
    let (re_cf, im_cf) = (-d / (2.0 * m), (-disc_cf).sqrt() / (2.0 * m));
    assert!((re - re_cf).abs() < 1e-4 * im_cf.abs().max(1.0), "{re} vs {re_cf}");
    assert!((im - im_cf).abs() < 1e-4 * im_cf.abs(), "{im} vs {im_cf}");
}

#[test]
fn dc_matches_affine_oracle() {
    // The reduced dynamics are affine: xdot = A x + b with x = (delta, omega).
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = synth_net(three_bus_lines(), &[0.1, -0.2, 0.05], &[1.0; 3], &[0.0; 3]);
    let n = 3;
    let (bm, _) = net.admittance_matrices();
    for _ in 0..10 {
        let s = SystemState::new(
            (0..n).map(|_| uniform(&mut rng, -2.0, 2.0)).collect(),
            (0..n).map(|_| uniform(&mut rng, -3.0, 3.0)).collect(),
            vec![1.0; n],
        );
        let der = dc_swing_rhs(&s, &net).unwrap();
        // Explicit A, b assembly.
        let mut expect_w = vec![0.0; n];
        for i in 0..n {
            let mut acc = net.injections[i].p - net.generators[i].d * s.omega[i];
            for j in 0..n {
                if j != i {
                    acc -= bm[i * n + j] * (s.delta[i] - s.delta[j]);
                }
            }
            expect_w[i] = acc / net.generators[i].m;
        }
        for i in 0..n {
            assert!((der.delta[i] - s.omega[i]).abs() < 1e-14);
            assert!((der.omega[i] - expect_w[i]).abs() < 1e-11);
        }
    }
}

fn basic_scenario(fault_type: FaultType) -> FaultScenario {
    FaultScenario {
        fault_type,
        line: (0, 1),
        t_f: 1.0,
        clear_schedule: vec![ClearStep {
            t: 1.2,
            action: ClearAction::RestoreLine,
        }],
        t_cl: 1.2,
        kappa_override: None,
    }
}

#[test]
fn stage_zero_is_identity() {
    let net = synth_net(three_bus_lines(), &[0.0; 3], &[1.0; 3], &[-5.0; 3]);
    let out = apply_stage(&net, &basic_scenario(FaultType::Slg), 0).unwrap();
    assert_eq!(out, net);
}

#[test]
fn three_phase_fault_zeroes_the_line() {
    let net = synth_net(three_bus_lines(), &[0.0; 3], &[1.0; 3], &[-5.0; 3]);
    let out = apply_stage(&net, &basic_scenario(FaultType::ThreePhase), 1).unwrap();
    assert_eq!(out.lines[0].b, 0.0);
    assert_eq!(out.lines[0].g, 0.0);
    assert_eq!(out.lines[1..], net.lines[1..]);
}

#[test]
fn slg_fault_halves_the_line_only() {
    let net = synth_net(three_bus_lines(), &[0.0; 3], &[1.0; 3], &[-5.0; 3]);
    let out = apply_stage(&net, &basic_scenario(FaultType::Slg), 1).unwrap();
    // Hand-built expectation: only line (0,1) changes, scaled by 0.5.
    let (b, g) = out.admittance_matrices();
    let (b0, g0) = net.admittance_matrices();
    let n = 3;
    for i in 0..n {
        for j in 0..n {
            let (eb, eg) = if (i, j) == (0, 1) || (i, j) == (1, 0) {
                (0.5 * b0[i * n + j], 0.5 * g0[i * n + j])
            } else {
                (b0[i * n + j], g0[i * n + j])
            };
            assert_eq!(b[i * n + j], eb, "B[{i}][{j}]");
            assert_eq!(g[i * n + j], eg, "G[{i}][{j}]");
        }
    }
}

#[test]
fn restore_stage_matches_pre_fault() {
    let net = synth_net(three_bus_lines(), &[0.0; 3], &[1.0; 3], &[-5.0; 3]);
    let out = apply_stage(&net, &basic_scenario(FaultType::Llg), 2).unwrap();
    assert_eq!(out, net);
}

#[test]
fn unknown_stage_is_rejected() {
    let net = synth_net(three_bus_lines(), &[0.0; 3], &[1.0; 3], &[-5.0; 3]);
    assert_eq!(
        apply_stage(&net, &basic_scenario(FaultType::Slg), 3),
        Err(CoreError::UnknownStage {
            stage: 3,
            n_stages: 3
        })
    );
}

#[test]
fn kappa_table() {
    assert_eq!(FaultType::ThreePhase.kappa(), 0.0);
    assert_eq!(FaultType::Ll.kappa(), 0.3);
    assert_eq!(FaultType::Llg.kappa(), 0.2);
    assert_eq!(FaultType::Slg.kappa(), 0.5);
}

#[test]
fn scenario_validation_rejects_bad_schedules() {
    let net = synth_net(three_bus_lines(), &[0.0; 3], &[1.0; 3], &[-5.0; 3]);
    let mut sc = basic_scenario(FaultType::Slg);
    sc.t_cl = 1.3; // does not match the last schedule entry
    assert!(sc.validate(&net).is_err());
    let mut sc = basic_scenario(FaultType::Slg);
    sc.clear_schedule[0].t = 0.5; // before t_f
    sc.t_cl = 0.5;
    assert!(sc.validate(&net).is_err());
    let mut sc = basic_scenario(FaultType::Slg);
    sc.line = (0, 2);
    assert!(sc.validate(&net).is_ok());
    sc.line = (1, 1);
    assert!(sc.validate(&net).is_err());
}

#[test]
fn no_fault_from_equilibrium_stays_put() {
    let delta = [0.0, 0.12, -0.08];
    let v = [1.0, 1.01, 0.99];
    let net = synth_net(three_bus_lines(), &delta, &v, &[-8.0, -9.0, -7.0]);
    let s0 = SystemState::new(delta.to_vec(), vec![0.0; 3], v.to_vec());
    let traj = simulate(&net, &FaultScenario::none(), &s0, 5.0, DEFAULT_DT_INT).unwrap();
    assert_eq!(traj.status, SimStatus::Completed);
    let mut max_dev = 0.0f64;
    for s in &traj.states {
        for i in 0..3 {
            max_dev = max_dev
                .max((s.delta[i] - delta[i]).abs())
                .max(s.omega[i].abs())
                .max((s.v[i] - v[i]).abs());
        }
    }
    assert!(max_dev < 1e-9, "drift {max_dev}");
}

#[test]
fn stage_boundaries_land_on_step_times() {
    let net = synth_net(three_bus_lines(), &[0.0; 3], &[1.0; 3], &[-8.0; 3]);
    let s0 = find_equilibrium(&net).unwrap();
    let mut sc = basic_scenario(FaultType::ThreePhase);
    // Boundaries deliberately off the dt grid.
    sc.t_f = 0.505;
    sc.clear_schedule[0].t = 0.7007;
    sc.t_cl = 0.7007;
    let traj = simulate(&net, &sc, &s0, 1.0, DEFAULT_DT_INT).unwrap();
    assert!(traj.index_at_time(0.505, 1e-12).is_some());
    assert!(traj.index_at_time(0.7007, 1e-12).is_some());
    // Stage ids switch exactly at the boundaries.
    let i_f = traj.index_at_time(0.505, 1e-12).unwrap();
    assert_eq!(traj.stage_ids[i_f - 1], 0);
    assert_eq!(traj.stage_ids[i_f], 1);
    let i_cl = traj.index_at_time(0.7007, 1e-12).unwrap();
    assert_eq!(traj.stage_ids[i_cl - 1], 1);
    assert_eq!(traj.stage_ids[i_cl], 2);
}

#[test]
fn simulation_is_deterministic() {
    let net = synth_net(three_bus_lines(), &[0.1, -0.05, 0.2], &[1.0; 3], &[-8.0; 3]);
    let s0 = SystemState::new(vec![0.1, -0.05, 0.2], vec![0.3, 0.0, -0.1], vec![1.0; 3]);
    let sc = basic_scenario(FaultType::Llg);
    let a = simulate(&net, &sc, &s0, 2.0, DEFAULT_DT_INT).unwrap();
    let b = simulate(&net, &sc, &s0, 2.0, DEFAULT_DT_INT).unwrap();
    assert_eq!(a, b);
}

#[test]
fn divergence_truncates_with_partial_trajectory() {
    // An isolated unstable machine: constant acceleration with no damping
    // grows without bound; crank the power to force the cap quickly.
    let mut net = synth_net(
        vec![Line {
            i: 0,
            j: 1,
            b: 0.0,
            g: 0.0,
        }],
        &[0.0; 2],
        &[1.0; 2],
        &[0.0; 2],
    );
    net.injections[0].p = 1e5;
    net.generators[0].d = 0.0;
    let s0 = SystemState::new(vec![0.0; 2], vec![0.0; 2], vec![1.0; 2]);
    let traj = simulate(&net, &FaultScenario::none(), &s0, 10.0, 1.0 / 60.0).unwrap();
    match traj.status {
        SimStatus::Diverged { t } => {
            assert!(t < 10.0);
            assert_eq!(traj.times.last().copied().unwrap(), t);
            assert!(traj.len() > 1);
        }
        SimStatus::Completed => panic!("expected divergence"),
    }
}

#[test]
fn translation_symmetry_of_both_models() {
    let net = synth_net(three_bus_lines(), &[0.1, -0.2, 0.3], &[1.0; 3], &[-6.0; 3]);
    let s = SystemState::new(vec![0.1, -0.2, 0.3], vec![0.5, -0.1, 0.0], vec![1.0; 3]);
    let mut shifted = s.clone();
    for d in shifted.delta.iter_mut() {
        *d += 1.234;
    }
    let (a, b) = (
        swing_rhs(&s, &net).unwrap(),
        swing_rhs(&shifted, &net).unwrap(),
    );
    for i in 0..3 {
        assert!((a.omega[i] - b.omega[i]).abs() < 1e-12);
        assert!((a.v[i] - b.v[i]).abs() < 1e-12);
    }
    let (a, b) = (
        dc_swing_rhs(&s, &net).unwrap(),
        dc_swing_rhs(&shifted, &net).unwrap(),
    );
    for i in 0..3 {
        assert!((a.omega[i] - b.omega[i]).abs() < 1e-12);
    }
}

#[test]
fn two_bus_equilibrium_matches_arcsin() {
    // Lossless 2-bus with P = (p, -p): delta_0 - delta_1 = arcsin(p / (b V0 V1)).
    let (p, b) = (0.6, 2.0);
    let theta = (p / b).asin();
    // Field voltages consistent with V = (1, 1) at the known solution.
    let net = synth_net(
        vec![Line {
            i: 0,
            j: 1,
            b,
            g: 0.0,
        }],
        &[0.0, -theta],
        &[1.0, 1.0],
        &[-4.0, -4.0],
    );
    assert!((net.injections[0].p - p).abs() < 1e-12);
    let eq = find_equilibrium(&net).unwrap();
    assert!(((eq.delta[0] - eq.delta[1]) - theta).abs() < 1e-6);
    assert!((eq.v[0] - 1.0).abs() < 1e-6 && (eq.v[1] - 1.0).abs() < 1e-6);
}

#[test]
fn zero_injection_equilibrium_is_uniform() {
    let net = synth_net(three_bus_lines_lossless(), &[0.0; 3], &[1.0; 3], &[-5.0; 3]);
    let eq = find_equilibrium(&net).unwrap();
    for i in 0..3 {
        assert!(eq.delta[i].abs() < 1e-7);
        assert_eq!(eq.omega[i], 0.0);
    }
}

fn three_bus_lines_lossless() -> Vec<Line> {
    three_bus_lines()
        .into_iter()
        .map(|mut l| {
            l.g = 0.0;
            l
        })
        .collect()
}

#[test]
fn random_five_bus_equilibrium_residual_is_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..3 {
        let lines = vec![
            Line { i: 0, j: 1, b: uniform(&mut rng, 3.0, 6.0), g: 0.1 },
            Line { i: 1, j: 2, b: uniform(&mut rng, 3.0, 6.0), g: 0.1 },
            Line { i: 2, j: 3, b: uniform(&mut rng, 3.0, 6.0), g: 0.1 },
            Line { i: 3, j: 4, b: uniform(&mut rng, 3.0, 6.0), g: 0.1 },
            Line { i: 4, j: 0, b: uniform(&mut rng, 3.0, 6.0), g: 0.1 },
        ];
        let delta: Vec<f64> = (0..5).map(|_| uniform(&mut rng, -0.2, 0.2)).collect();
        let v: Vec<f64> = (0..5).map(|_| uniform(&mut rng, 0.95, 1.05)).collect();
        let net = synth_net(lines, &delta, &v, &[-6.0; 5]);
        let eq = find_equilibrium(&net).unwrap();
        let d = swing_rhs(&eq, &net).unwrap();
        let res = d
            .omega
            .iter()
            .chain(&d.v)
            .fold(0.0f64, |m, &x| m.max(x.abs()));
        assert!(res < 1e-8, "trial {trial}: residual {res}");
    }
}

#[test]
fn dc_energy_conserved_without_damping() {
    // E = 1/2 sum M w^2 + 1/4 sum_ij B_ij (d_i - d_j)^2 - sum P_i d_i is a
    // first integral of the undamped reduced model.
    let mut net = synth_net(three_bus_lines_lossless(), &[0.0; 3], &[1.0; 3], &[0.0; 3]);
    for g in net.generators.iter_mut() {
        g.d = 0.0;
    }
    net.injections = vec![
        Injection { p: 0.2, q: 0.0 },
        Injection { p: -0.15, q: 0.0 },
        Injection { p: -0.05, q: 0.0 },
    ];
    let (bm, _) = net.admittance_matrices();
    let energy = |s: &SystemState| {
        let mut e = 0.0;
        for i in 0..3 {
            e += 0.5 * net.generators[i].m * s.omega[i] * s.omega[i];
            e -= net.injections[i].p * s.delta[i];
            for j in 0..3 {
                if j != i {
                    let d = s.delta[i] - s.delta[j];
                    e += 0.25 * bm[i * 3 + j] * d * d;
                }
            }
        }
        e
    };
    // RK4 on the reduced model.
    let dt = DEFAULT_DT_INT;
    let mut s = SystemState::new(vec![0.05, -0.02, 0.0], vec![0.0; 3], vec![1.0; 3]);
    let e0 = energy(&s);
    let mut max_drift = 0.0f64;
    for _ in 0..(5.0 / dt) as usize {
        let k1 = dc_swing_rhs(&s, &net).unwrap();
        let k2 = dc_swing_rhs(&add_scaled(&s, &k1, dt / 2.0), &net).unwrap();
        let k3 = dc_swing_rhs(&add_scaled(&s, &k2, dt / 2.0), &net).unwrap();
        let k4 = dc_swing_rhs(&add_scaled(&s, &k3, dt), &net).unwrap();
        for i in 0..3 {
            s.delta[i] += dt / 6.0
                * (k1.delta[i] + 2.0 * k2.delta[i] + 2.0 * k3.delta[i] + k4.delta[i]);
            s.omega[i] += dt / 6.0
                * (k1.omega[i] + 2.0 * k2.omega[i] + 2.0 * k3.omega[i] + k4.omega[i]);
        }
        max_drift = max_drift.max((energy(&s) - e0).abs());
    }
    let scale = e0.abs().max(1.0);
    assert!(max_drift / scale < 1e-6, "energy drift {max_drift}");
}

#[test]
fn validate_rejects_bad_models() {
    let mut net = synth_net(three_bus_lines(), &[0.0; 3], &[1.0; 3], &[0.0; 3]);
    assert!(net.validate().is_ok());
    net.generators[0].m = 0.0;
    assert!(net.validate().is_err());
    let mut net = synth_net(three_bus_lines(), &[0.0; 3], &[1.0; 3], &[0.0; 3]);
    net.generators[1].xd_prime = net.generators[1].xd;
    assert!(net.validate().is_err());
    let mut net = synth_net(three_bus_lines(), &[0.0; 3], &[1.0; 3], &[0.0; 3]);
    net.lines[0].j = 7;
    assert!(net.validate().is_err());
}
