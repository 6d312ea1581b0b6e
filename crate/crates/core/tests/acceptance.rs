//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. The two
//! training criteria take several minutes; set `BGAP_ACCEPTANCE_QUICK=1` to
//! skip them during development (they are then reported as SKIP and the run
//! does not count as a full pass).

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use bgap::analysis::{classify_stance, dominant_frequency, phase_percentages, phase_shift};
use bgap::bridge::{max_amplitude, step_bridge, stiffness_for_frequency, BridgeParams, BridgeState};
use bgap::config::RunConfig;
use bgap::env::{Command, Env, EnvConfig, EvalScene, Scene, TerminationReason, ACT_DIM};
use bgap::eval::{evaluate, run_episode, PolicyController, RandomController};
use bgap::ppo::train::run_training;
use bgap::ppo::{compute_gae, ppo_loss, ActorCritic, Minibatch, PpoHyper, Trainer};
use bgap::quadruped::{FootTimer, FootTimers, JointState, QuadrupedModel};
use bgap::rewards::{
    compute_reward, FootContacts, GaitSpec, HeightReference, HeightStyle, RewardConfig, RewardInputs,
};
use bgap::simcore::{quat_from_euler, TrunkState, Vec3, CONTROL_DT, GRAVITY, PHYSICS_DT};

/// Smoke run for the tracking criterion: default gait, nos style, 8 envs.
/// Only training-side knobs differ from the defaults: forward commands
/// around the tracked speed, no entropy bonus and a loose gradient clip.
const SMOKE_NOS: &str = r#"
seed = 1
[ppo]
num_envs = 8
total_steps = 2000000
grad_clip_norm = 100.0
entropy_coef = 0.0
[env.commands]
min = [0.3, 0.0, 0.0]
max = [0.7, 0.0, 0.0]
zero_fraction = 0.0
"#;

/// The same run in the eb style, for the oscillation-adaptation criterion.
const SMOKE_EB: &str = r#"
seed = 2
[env]
style = "eb"
[ppo]
num_envs = 8
total_steps = 2000000
grad_clip_norm = 100.0
entropy_coef = 0.0
[env.commands]
min = [0.3, 0.0, 0.0]
max = [0.7, 0.0, 0.0]
zero_fraction = 0.0
"#;

struct Outcome {
    pass: Option<bool>,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: String) -> Self {
        Self {
            pass: Some(pass),
            detail,
        }
    }

    fn skip(why: &str) -> Self {
        Self {
            pass: None,
            detail: why.to_string(),
        }
    }
}

fn within(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("{s:.2} s of {limit_s} s"))
}

// 1
fn bridge_eigenfrequency() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut notes = Vec::new();
    for f in [2.0, 0.75, 7.5] {
        let m = 10_000.0;
        let mut params = BridgeParams::oscillating(f, 0.5 * max_amplitude(f));
        params.mass_mb = m;
        params.stiffness_k = stiffness_for_frequency(m, f);
        let mut s = BridgeState::with_phase(params, 0.0);
        // Upward zero crossings, linearly interpolated.
        let mut crossings = Vec::new();
        let steps = (10.0 / PHYSICS_DT).round() as usize;
        for i in 0..steps {
            let next = step_bridge(&s, PHYSICS_DT);
            if s.displacement_zb < 0.0 && next.displacement_zb >= 0.0 {
                let frac = -s.displacement_zb / (next.displacement_zb - s.displacement_zb);
                crossings.push((i as f64 + frac) * PHYSICS_DT);
            }
            s = next;
        }
        let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
        let rel = (period * f - 1.0).abs();
        worst = worst.max(rel);
        notes.push(format!("{f} Hz: T={period:.5} s"));
    }
    let (fast, time) = within(t0.elapsed(), 1.0);
    Outcome::check(
        worst < 0.01 && fast,
        format!("{}; worst rel. error {worst:.2e}; {time}", notes.join(", ")),
    )
}

// 2
fn acceleration_constraint() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..100 {
        let f = rng.random_range(0.75..=7.5);
        let a = max_amplitude(f);
        let mut s = BridgeState::with_phase(BridgeParams::oscillating(f, a), rng.random_range(0.0..2.0 * PI));
        let steps = (2.0 / f / PHYSICS_DT).ceil() as usize;
        let mut peak: f64 = 0.0;
        for _ in 0..steps {
            let next = step_bridge(&s, PHYSICS_DT);
            // Measured from the velocity change over one step.
            peak = peak.max(((next.velocity - s.velocity) / PHYSICS_DT).abs());
            s = next;
        }
        lo = lo.min(peak);
        hi = hi.max(peak);
    }
    let (fast, time) = within(t0.elapsed(), 10.0);
    Outcome::check(
        lo >= 9.71 && hi <= 9.91 && fast,
        format!("peak |z''| over 100 frequencies in [{lo:.4}, {hi:.4}] m/s^2; {time}"),
    )
}

// 3
struct RewardCase {
    roll: f64,
    pitch: f64,
    yaw: f64,
    vel: [f64; 3],
    omega: [f64; 3],
    command: [f64; 3],
    com_z: f64,
    q_offsets: [(usize, f64); 2],
    outside_expected: usize,
    qdd: f64,
    tau: f64,
    action: f64,
    prev_action: f64,
    collisions: u32,
    contacts: [bool; 4],
    last_air: [f64; 4],
    style: HeightStyle,
    gait: GaitSpec,
    bridge: (f64, f64, f64),
}

fn reward_case_oracle(c: &RewardCase, model: &QuadrupedModel) -> ([f64; 13], RewardInputsOwned) {
    let (sy, cy) = c.yaw.sin_cos();
    let vx = cy * c.vel[0] + sy * c.vel[1];
    let vy = -sy * c.vel[0] + cy * c.vel[1];
    let xy = 2.0 * (-((vx - c.command[0]).powi(2) + (vy - c.command[1]).powi(2)) / 0.25).exp();
    let yaw = 1.0 * (-(c.omega[2] - c.command[2]).powi(2) / 0.25).exp();
    let zv = -2.0 * c.vel[2].powi(2);
    let prv = -0.05 * (c.omega[0].powi(2) + c.omega[1].powi(2));
    let prp = -0.2 * (c.roll.powi(2) + c.pitch.powi(2));
    let lim = -10.0 * c.outside_expected as f64;
    let acc = -2.5e-7 * 12.0 * c.qdd.powi(2);
    let tq = -2.0e-4 * 12.0 * c.tau.powi(2);
    let ar = -0.01 * 12.0 * (c.action - c.prev_action).powi(2);
    let col = -1.0 * c.collisions as f64;
    let air: f64 = -(0..4).filter(|&f| c.contacts[f]).map(|f| c.last_air[f] - 0.5).sum::<f64>();
    let air = 0.1 * air;
    let (amp, f, zb) = c.bridge;
    let (b0, k) = if amp > 0.0 {
        (1.05 - amp, 10_000.0 * (2.0 * PI * f).powi(2))
    } else {
        (1.05, 10_000.0 * (2.0 * PI * f).powi(2))
    };
    let h = match c.style {
        HeightStyle::Nos => c.com_z - b0,
        HeightStyle::Eb => c.com_z - b0 - zb,
        HeightStyle::Eg => c.com_z - b0 + GRAVITY * model.trunk_mass / k - amp / 2.0,
    };
    let height = -30.0 * (h - 0.325).powi(2);
    // Contacts are listed FL, FR, RL, RR.
    let [fl, fr, rl, rr] = c.contacts.map(i32::from);
    let all_same = i32::from(fl == fr && fr == rl && rl == rr);
    let sym = match c.gait {
        GaitSpec::Default => -(i32::from(fr + fl == 0) + i32::from(rr + rl == 0)),
        GaitSpec::Trot => -(i32::from(fr != rl) + i32::from(fl != rr) + all_same),
        GaitSpec::Pace => -(i32::from(fr != rr) + i32::from(fl != rl) + all_same),
        GaitSpec::Bound => -(i32::from(fr != fl) + i32::from(rr != rl) + all_same),
        GaitSpec::Pronk => -(1 - all_same),
        GaitSpec::Free => 0,
    };
    let sym = 0.5 * sym as f64;

    let mut q = model.nominal_pose;
    for (j, v) in c.q_offsets {
        q[j] = v;
    }
    let mut joints = JointState::at_pose(q);
    joints.qdd = [c.qdd; 12];
    joints.tau = [c.tau; 12];
    let mut trunk = TrunkState::at_rest(Vec3::new(0.3, -0.2, c.com_z));
    trunk.orientation = quat_from_euler(c.roll, c.pitch, c.yaw);
    trunk.linear_velocity = Vec3::from(c.vel);
    trunk.angular_velocity = Vec3::from(c.omega);
    let mut timers = FootTimers::default();
    for f in 0..4 {
        timers.0[f] = FootTimer {
            contact: c.contacts[f],
            last_air_duration: c.last_air[f],
            time_since_contact_change: 0.04,
        };
    }
    let height_ref = HeightReference {
        b0,
        z_b: zb,
        amplitude: amp,
        stiffness: k,
    };
    (
        [xy, yaw, zv, prv, prp, lim, acc, tq, ar, col, air, height, sym],
        RewardInputsOwned {
            trunk,
            joints,
            timers,
            height_ref,
        },
    )
}

struct RewardInputsOwned {
    trunk: TrunkState,
    joints: JointState,
    timers: FootTimers,
    height_ref: HeightReference,
}

fn reward_exactness() -> Outcome {
    let t0 = Instant::now();
    let model = QuadrupedModel::go2();
    let (lo2, hi2) = model.joint_limits[2];
    let (_, hi4) = model.joint_limits[4];
    let cases = [
        RewardCase {
            roll: 0.0,
            pitch: 0.0,
            yaw: 0.0,
            vel: [0.0, 0.0, 0.2],
            omega: [0.0; 3],
            command: [1.0, 0.0, 0.0],
            com_z: 1.375,
            q_offsets: [(0, model.nominal_pose[0]), (1, model.nominal_pose[1])],
            outside_expected: 0,
            qdd: 0.0,
            tau: (1000.0f64 / 12.0).sqrt(),
            action: 0.0,
            prev_action: 0.0,
            collisions: 0,
            contacts: [true; 4],
            last_air: [0.0; 4],
            style: HeightStyle::Nos,
            gait: GaitSpec::Trot,
            bridge: (0.0, 2.0, 0.0),
        },
        RewardCase {
            roll: 0.1,
            pitch: -0.2,
            yaw: 0.7,
            vel: [0.4, -0.3, -0.05],
            omega: [0.3, -0.6, 0.9],
            command: [0.5, 0.1, 0.4],
            com_z: 1.30,
            q_offsets: [(2, lo2 + 0.01), (4, hi4 - 0.01)],
            outside_expected: 2,
            qdd: 30.0,
            tau: 7.5,
            action: 0.6,
            prev_action: -0.2,
            collisions: 1,
            contacts: [true, false, false, true],
            last_air: [0.2, 0.4, 0.0, 0.7],
            style: HeightStyle::Eb,
            gait: GaitSpec::Pace,
            bridge: (0.05, 2.0, -0.05),
        },
        RewardCase {
            roll: -0.3,
            pitch: 0.25,
            yaw: -2.0,
            vel: [-0.2, 0.6, 0.1],
            omega: [-1.0, 0.2, -0.5],
            command: [-0.3, 0.5, -0.5],
            com_z: 1.21,
            q_offsets: [(2, hi2 - 0.005), (7, model.nominal_pose[7] + 0.05)],
            outside_expected: 1,
            qdd: -120.0,
            tau: -20.0,
            action: -1.0,
            prev_action: 1.0,
            collisions: 3,
            contacts: [false, false, true, true],
            last_air: [0.1, 0.1, 0.9, 0.3],
            style: HeightStyle::Eg,
            gait: GaitSpec::Default,
            bridge: (0.1, 1.5, 0.02),
        },
    ];
    let cfg = RewardConfig::default();
    let mut worst: f64 = 0.0;
    let mut problems = Vec::new();
    for (i, c) in cases.iter().enumerate() {
        let (expected, owned) = reward_case_oracle(c, &model);
        let action = [c.action; ACT_DIM];
        let prev = [c.prev_action; ACT_DIM];
        let contacts = FootContacts::from_array(c.contacts);
        let inputs = RewardInputs {
            trunk: &owned.trunk,
            joints: &owned.joints,
            joint_limits: &model.joint_limits,
            action: &action,
            prev_action: &prev,
            command: Command::new(c.command[0], c.command[1], c.command[2]),
            contacts,
            timers: &owned.timers,
            n_collisions: c.collisions,
            height_ref: owned.height_ref,
            robot_mass: model.trunk_mass,
        };
        let r = compute_reward(&inputs, c.gait, c.style, &cfg, 1.0).expect("finite reward");
        for (j, (got, want)) in r.terms().iter().zip(expected).enumerate() {
            let e = (got - want).abs();
            worst = worst.max(e);
            if e > 1e-9 {
                problems.push(format!("case {i} term {j}: {got} vs {want}"));
            }
        }
        let e = (r.total - expected.iter().sum::<f64>()).abs();
        worst = worst.max(e);
        if e > 1e-9 {
            problems.push(format!("case {i} total"));
        }
    }
    // Symmetry rows against an independent brute force over all contact states.
    let mut mismatches = 0;
    for bits in 0..16u8 {
        let g: [bool; 4] = std::array::from_fn(|i| bits >> i & 1 == 1);
        let [fl, fr, rl, rr] = g.map(u8::from);
        let diff = |a: u8, b: u8| u8::from(a != b) as f64;
        let uniform = if fl + fr + rl + rr == 0 || fl + fr + rl + rr == 4 { 1.0 } else { 0.0 };
        for gait in GaitSpec::ALL {
            let want = match gait {
                GaitSpec::Default => -f64::from(u8::from(fl == 0 && fr == 0) + u8::from(rl == 0 && rr == 0)),
                GaitSpec::Trot => -(diff(fr, rl) + diff(fl, rr) + uniform),
                GaitSpec::Pace => -(diff(fr, rr) + diff(fl, rl) + uniform),
                GaitSpec::Bound => -(diff(fr, fl) + diff(rr, rl) + uniform),
                GaitSpec::Pronk => uniform - 1.0,
                GaitSpec::Free => 0.0,
            };
            if bgap::rewards::symmetry_penalty(gait, FootContacts::from_array(g)) != want {
                mismatches += 1;
            }
        }
    }
    let (fast, time) = within(t0.elapsed(), 1.0);
    Outcome::check(
        problems.is_empty() && mismatches == 0 && fast,
        format!(
            "3 cases x 13 terms, max abs error {worst:.1e}; symmetry 96/96 {}; {time}{}",
            if mismatches == 0 { "exact" } else { "MISMATCH" },
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

// 4
fn gae_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=32);
        let gamma = rng.random_range(0.8..=1.0);
        let lambda = rng.random_range(0.0..=1.0);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.2)).collect();
        let boot = rng.random_range(-5.0..5.0);
        let (adv, ret) = compute_gae(&r, &v, &d, boot, gamma, lambda).expect("lengths match");
        for t in 0..n {
            // Direct discounted sum of TD errors up to the first episode end.
            let mut a = 0.0;
            let mut w = 1.0;
            for k in t..n {
                let next_v = if k + 1 < n { v[k + 1] } else { boot };
                let delta = r[k] + if d[k] { 0.0 } else { gamma * next_v } - v[k];
                a += w * delta;
                if d[k] {
                    break;
                }
                w *= gamma * lambda;
            }
            worst = worst.max((adv[t] - a).abs()).max((ret[t] - (a + v[t])).abs());
        }
    }
    let (fast, time) = within(t0.elapsed(), 5.0);
    Outcome::check(worst < 1e-9 && fast, format!("1000 sequences, max abs error {worst:.2e}; {time}"))
}

// 5
fn gradient_check() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let h = 1e-4;
    for point in 0..100 {
        let init_log_std = rng.random_range(-1.5..0.0);
        let mut p: ActorCritic<f64> = ActorCritic::new(4, 2, &[8], init_log_std, &mut rng);
        for s in p.slices_mut() {
            for x in s.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *x += 0.3 * z;
            }
        }
        for l in p.log_std.iter_mut() {
            *l = rng.random_range(-2.0..0.5);
        }
        let b = 16;
        let hyper = PpoHyper {
            clip_value_loss: point % 2 == 1,
            ..PpoHyper::default()
        };
        let normal = |rng: &mut ChaCha8Rng, r, c| {
            Array2::from_shape_fn((r, c), |_| {
                let z: f64 = StandardNormal.sample(rng);
                z
            })
        };
        let obs = normal(&mut rng, b, 4);
        // Actions drawn from the policy itself, as in a rollout.
        let (mean, _) = p.policy_forward(obs.view());
        let sigma: Vec<f64> = p.log_std.iter().map(|l| l.exp()).collect();
        let noise = normal(&mut rng, b, 2);
        let actions = Array2::from_shape_fn((b, 2), |(i, k)| mean[[i, k]] + sigma[k] * noise[[i, k]]);
        let own_lp = p.log_prob_of(obs.view(), actions.view());
        // Samples are drawn away from the clip boundaries so that the
        // difference stencil never straddles a kink.
        let away = |x: f64, edges: &[f64]| edges.iter().all(|e| (x - e).abs() > 0.02);
        let ratio_edges = [(1.0 + hyper.clip).ln(), (1.0 - hyper.clip).ln()];
        let old_lp: Array1<f64> = own_lp.mapv(|x| loop {
            let log_ratio = rng.random_range(-0.5..0.5);
            if away(log_ratio, &ratio_edges) {
                break x - log_ratio;
            }
        });
        let own_v = p.values(obs.view());
        let ret: Array1<f64> = (0..b).map(|_| rng.random_range(-2.0..2.0)).collect();
        let old_v: Array1<f64> = own_v
            .iter()
            .zip(&ret)
            .map(|(&v, &r)| loop {
                let o = v + rng.random_range(-0.5..0.5);
                // Kinks of the clipped value loss: |v - o| = clip and equal branches.
                let edges = [o - hyper.clip, o + hyper.clip, 2.0 * o - r];
                if away(v, &edges) && away(r, &[o]) {
                    break o;
                }
            })
            .collect();
        let adv: Array1<f64> = (0..b).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mb = Minibatch {
            obs: obs.view(),
            actions: actions.view(),
            old_log_probs: old_lp.view(),
            old_values: old_v.view(),
            advantages: adv.view(),
            returns: ret.view(),
        };
        let (_, g) = ppo_loss(&p, &mb, &hyper, true);
        let g = g.expect("gradient requested");
        let analytic: Vec<Vec<f64>> = g.slices().iter().map(|s| s.to_vec()).collect();
        for (t, ga) in analytic.iter().enumerate() {
            for i in 0..ga.len() {
                let at = |dx: f64| {
                    let mut q = p.clone();
                    q.slices_mut()[t][i] += dx;
                    ppo_loss(&q, &mb, &hyper, false).0.total
                };
                // Fourth-order central difference.
                let fd = (at(-2.0 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2.0 * h)) / (12.0 * h);
                let rel = (fd - ga[i]).abs() / fd.abs().max(ga[i].abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    let (fast, time) = within(t0.elapsed(), 30.0);
    Outcome::check(
        worst < 1e-4 && fast,
        format!("100 points, obs 4 / act 2 / hidden 8, max rel. error {worst:.2e}; {time}"),
    )
}

// 6
fn stance_classifier() -> Outcome {
    // Independent formulation as contact sets over (FL, FR, RL, RR).
    const FL: u8 = 1;
    const FR: u8 = 2;
    const RL: u8 = 4;
    const RR: u8 = 8;
    let mut bad = Vec::new();
    for mask in 0..16u8 {
        let g = FootContacts::from_array([mask & FL != 0, mask & FR != 0, mask & RL != 0, mask & RR != 0]);
        let l = classify_stance(g);
        let want = (
            mask & (FL | FR) != 0 && mask & (RL | RR) != 0,
            mask == FL | RR || mask == FR | RL,
            mask == FL | RL || mask == FR | RR,
            mask == FL | FR || mask == RL | RR,
            mask == 15,
            mask == 0,
        );
        let got = (l.default_ok, l.trot, l.pace, l.bound, l.pronk_ground, l.pronk_air);
        if got != want {
            bad.push(mask);
        }
    }
    let trot_a = FootContacts::from_array([true, false, false, true]);
    let trot_b = FootContacts::from_array([false, true, true, false]);
    let stand = FootContacts::from_array([true; 4]);
    let mut seq_ok = true;
    let p = phase_percentages(&[trot_a, trot_b, trot_a, stand]).expect("non-empty");
    seq_ok &= (p.trot - 75.0).abs() < 1e-9 && (p.pronk_ground - 25.0).abs() < 1e-9;
    let alternating: Vec<FootContacts> = (0..50).map(|i| if i % 2 == 0 { trot_a } else { trot_b }).collect();
    let p = phase_percentages(&alternating).expect("non-empty");
    seq_ok &= (p.trot - 100.0).abs() < 1e-9 && p.pace == 0.0 && p.bound == 0.0;
    let p = phase_percentages(&[stand; 7]).expect("non-empty");
    seq_ok &= (p.default - 100.0).abs() < 1e-9 && (p.pronk_ground - 100.0).abs() < 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_sum: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..100);
        let seq: Vec<FootContacts> =
            (0..n).map(|_| FootContacts::from_array(std::array::from_fn(|_| rng.random_bool(0.5)))).collect();
        let p = phase_percentages(&seq).expect("non-empty");
        worst_sum = worst_sum.max((p.trot + p.pace + p.bound + p.other - 100.0).abs());
    }
    Outcome::check(
        bad.is_empty() && seq_ok && worst_sum < 1e-9,
        format!(
            "truth table {}/16, synthetic sequences {}, max |sum - 100| {worst_sum:.1e}",
            16 - bad.len(),
            if seq_ok { "exact" } else { "WRONG" }
        ),
    )
}

// 7
fn phase_shift_estimator() -> Outcome {
    let rate = 50.0;
    let t: Vec<f64> = (0..500).map(|i| i as f64 / rate).collect();
    let bridge: Vec<f64> = t.iter().map(|t| (2.0 * PI * 2.0 * t).sin()).collect();
    let com: Vec<f64> = t.iter().map(|t| (2.0 * PI * 2.0 * t - 0.3 * PI).sin()).collect();
    let phi = phase_shift(&com, &bridge, 2.0, rate).expect("same length").expect("bridge moves");
    // Noise at SNR 10 (power ratio).
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let sigma = (0.5f64 / 10.0).sqrt();
    let noisy: Vec<f64> = com
        .iter()
        .map(|c| {
            let z: f64 = StandardNormal.sample(&mut rng);
            c + sigma * z
        })
        .collect();
    let phi_noisy = phase_shift(&noisy, &bridge, 2.0, rate).expect("same length").expect("bridge moves");
    let e = (phi - 0.3 * PI).abs() / PI;
    let en = (phi_noisy - 0.3 * PI).abs() / PI;
    Outcome::check(
        e < 0.02 && en < 0.05,
        format!("recovered {:.4}π (error {e:.4}π), with SNR-10 noise {:.4}π", phi / PI, phi_noisy / PI),
    )
}

// 8
fn standing_stability() -> Outcome {
    let t0 = Instant::now();
    let cfg = EnvConfig::default().deterministic();
    let mut env = Env::new(cfg, Scene::Training, 8, 0).expect("valid config");
    env.reset();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut survived = 0.0;
    let mut end = None;
    let steps = (20.0 / CONTROL_DT).round() as usize;
    for _ in 0..steps {
        let r = env.step(&[0.0; ACT_DIM]).expect("finite");
        let h = env.trunk().position.z - r.info.surface_height;
        lo = lo.min(h);
        hi = hi.max(h);
        survived = r.info.time;
        if r.done {
            end = r.info.reason;
            break;
        }
    }
    let ok_end = matches!(end, None | Some(TerminationReason::TimeLimit));
    let ok_h = (lo - 0.325).abs() <= 0.02 && (hi - 0.325).abs() <= 0.02;
    let (fast, time) = within(t0.elapsed(), 5.0);
    Outcome::check(
        ok_end && survived >= 20.0 - 1e-9 && ok_h && fast,
        format!("survived {survived:.2} s, height in [{lo:.4}, {hi:.4}] m; {time}"),
    )
}

fn train(cfg_text: &str) -> (RunConfig, Trainer, Vec<bgap::ppo::MetricsRow>) {
    let cfg = RunConfig::parse(cfg_text).expect("smoke config parses");
    let mut t = Trainer::new(cfg.train_config()).expect("trainer");
    let mut rows = Vec::new();
    while !t.is_finished() {
        rows.push(t.step().expect("training step"));
    }
    (cfg, t, rows)
}

fn random_baseline(env_cfg: &EnvConfig, episodes: usize) -> f64 {
    let mut env = Env::new(env_cfg.clone(), Scene::Training, 99, 0).expect("env");
    env.set_curriculum_scale(1.0);
    let mut ctrl = RandomController::new(99);
    let total: f64 = (0..episodes)
        .map(|_| run_episode(&mut env, &mut ctrl, None).expect("episode").return_no_gait_terms)
        .sum();
    total / episodes as f64
}

// 9
fn smoke_training() -> Outcome {
    let t0 = Instant::now();
    let (cfg, trainer, rows) = train(SMOKE_NOS);
    let tail = &rows[rows.len() - (rows.len() / 10).max(1)..];
    let trained = tail.iter().map(|r| r.mean_return_no_gait_terms).sum::<f64>() / tail.len() as f64;
    let baseline = random_baseline(&cfg.env, 50);
    let mut policy = PolicyController {
        params: trainer.params().clone(),
    };
    let eps = evaluate(&cfg.env, EvalScene::pass(2.0, 0.0, 0.5), &mut policy, 4, 9, false).expect("eval");
    let err = eps.iter().map(|e| e.mean_abs_vx_error).sum::<f64>() / eps.len() as f64;
    let ratio_ok = trained > 0.0 && trained >= 3.0 * baseline.abs();
    let (fast, time) = within(t0.elapsed(), 1800.0);
    Outcome::check(
        ratio_ok && err < 0.2 && fast,
        format!(
            "{} steps; last-10% return {trained:.1} vs random {baseline:.1} (needs >= {:.1}); \
             |vx - 0.5| = {err:.3} m/s on rigid ground; {time}",
            trainer.global_step(),
            3.0 * baseline.abs()
        ),
    )
}

/// Dominant CoM height frequency, and whether the record is long enough for
/// its frequency resolution (1/T) to separate the 2.0 ± 0.1 Hz band.
fn com_dominant(records: &[bgap::analysis::TrajectoryRecord]) -> (Option<f64>, bool) {
    let z: Vec<f64> = records.iter().map(|r| r.com[2]).collect();
    let span = z.len() as f64 * CONTROL_DT;
    (dominant_frequency(&z, 1.0 / CONTROL_DT), span >= 1.0 / 0.2)
}

// 10
fn oscillation_adaptation() -> Outcome {
    let t0 = Instant::now();
    let (cfg, trainer, _) = train(SMOKE_EB);
    let mut scene = EvalScene::pass(2.0, 0.05, 0.5);
    // Start on the span so the whole episode sees the oscillation.
    scene.start_x = 1.0;
    let mut policy = PolicyController {
        params: trainer.params().clone(),
    };
    let trained = evaluate(&cfg.env, scene, &mut policy, 1, 10, true).expect("eval");
    let f_trained = com_dominant(&trained[0].records);
    let random = evaluate(&cfg.env, scene, &mut RandomController::new(10), 1, 10, true).expect("eval");
    let f_random = com_dominant(&random[0].records);
    // Informational: the freshly initialised network, acting on its mean.
    let fresh = Trainer::new(cfg.train_config()).expect("trainer");
    let mut fresh = PolicyController {
        params: fresh.params().clone(),
    };
    let untrained = evaluate(&cfg.env, scene, &mut fresh, 1, 10, true).expect("eval");
    let f_untrained = com_dominant(&untrained[0].records);
    let hit = |(f, resolved): (Option<f64>, bool)| resolved && f.is_some_and(|f| (f - 2.0).abs() <= 0.1);
    let show = |(f, resolved): (Option<f64>, bool), steps: u64| {
        let f = f.map(|f| format!("{f:.3} Hz")).unwrap_or_else(|| "none".into());
        let note = if resolved { "" } else { ", too short to resolve" };
        format!("{f} over {:.2} s{note}", steps as f64 * CONTROL_DT)
    };
    Outcome::check(
        hit(f_trained) && !hit(f_random),
        format!(
            "trained: {}; random actions: {} (initial network, informational: {}); {:.0} s",
            show(f_trained, trained[0].steps),
            show(f_random, random[0].steps),
            show(f_untrained, untrained[0].steps),
            t0.elapsed().as_secs_f64()
        ),
    )
}

// 11
fn determinism() -> Outcome {
    let t0 = Instant::now();
    let mut cfg = RunConfig::default();
    cfg.seed = 11;
    cfg.ppo.total_steps = 10_000;
    let text = cfg.to_toml().expect("serializes");
    let mut files = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().expect("tempdir");
        let out = run_training(cfg.train_config(), &text, dir.path(), false).expect("training");
        files.push((std::fs::read(&out.metrics).expect("metrics"), out.rows.len()));
    }
    let same = files[0].0 == files[1].0 && !files[0].0.is_empty();
    Outcome::check(
        same,
        format!(
            "two 10k-step runs, {} metrics rows each, files {}; {:.1} s",
            files[0].1,
            if same { "byte-identical" } else { "DIFFER" },
            t0.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let quick = std::env::var("BGAP_ACCEPTANCE_QUICK").is_ok_and(|v| v == "1");
    type Criterion = (&'static str, fn() -> Outcome, bool);
    let criteria: [Criterion; 11] = [
        ("bridge eigenfrequency", bridge_eigenfrequency, false),
        ("acceleration constraint", acceleration_constraint, false),
        ("reward exactness", reward_exactness, false),
        ("GAE oracle", gae_oracle, false),
        ("gradient check", gradient_check, false),
        ("stance classifier and phase percentages", stance_classifier, false),
        ("phase-shift estimator", phase_shift_estimator, false),
        ("standing stability", standing_stability, false),
        ("smoke training", smoke_training, true),
        ("oscillation adaptation", oscillation_adaptation, true),
        ("determinism", determinism, false),
    ];
    let mut failed = 0;
    let mut skipped = 0;
    for (i, (name, run, slow)) in criteria.iter().enumerate() {
        let o = if *slow && quick {
            Outcome::skip("BGAP_ACCEPTANCE_QUICK=1")
        } else {
            run()
        };
        let tag = match o.pass {
            Some(true) => "PASS",
            Some(false) => {
                failed += 1;
                "FAIL"
            }
            None => {
                skipped += 1;
                "SKIP"
            }
        };
        println!("[{tag}] {:>2}. {name}: {}", i + 1, o.detail);
    }
    println!(
        "acceptance: {} passed, {failed} failed, {skipped} skipped",
        criteria.len() - failed - skipped
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
