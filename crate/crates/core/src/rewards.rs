//! Locomotion reward: generic tracking and regularization terms, the
//! base-height variable for the three training styles and the gait symmetry
//! penalties.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bridge::BridgeState;
use crate::env::Command;
use crate::error::{Error, Result};
use crate::quadruped::{FootTimers, JointState, JointVec, NOMINAL_HEIGHT, NUM_JOINTS};
use crate::simcore::{TrunkState, GRAVITY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaitSpec {
    Default,
    Trot,
    Pace,
    Bound,
    Pronk,
    Free,
}

impl GaitSpec {
    pub const ALL: [GaitSpec; 6] = [
        GaitSpec::Default,
        GaitSpec::Trot,
        GaitSpec::Pace,
        GaitSpec::Bound,
        GaitSpec::Pronk,
        GaitSpec::Free,
    ];
    /// The five gaits of the experiment matrix (pronk omitted).
    pub const MATRIX: [GaitSpec; 5] = [
        GaitSpec::Default,
        GaitSpec::Trot,
        GaitSpec::Pace,
        GaitSpec::Bound,
        GaitSpec::Free,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GaitSpec::Default => "default",
            GaitSpec::Trot => "trot",
            GaitSpec::Pace => "pace",
            GaitSpec::Bound => "bound",
            GaitSpec::Pronk => "pronk",
            GaitSpec::Free => "free",
        }
    }
}

impl fmt::Display for GaitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GaitSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        GaitSpec::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| {
                format!("unknown gait `{s}` (expected default, trot, pace, bound, pronk or free)")
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeightStyle {
    /// Rigid bridge.
    Nos,
    /// Height held relative to the moving bridge surface.
    Eb,
    /// Height held relative to the world.
    Eg,
}

impl HeightStyle {
    pub const ALL: [HeightStyle; 3] = [HeightStyle::Nos, HeightStyle::Eb, HeightStyle::Eg];

    pub fn name(self) -> &'static str {
        match self {
            HeightStyle::Nos => "nos",
            HeightStyle::Eb => "eb",
            HeightStyle::Eg => "eg",
        }
    }

    pub fn oscillating(self) -> bool {
        !matches!(self, HeightStyle::Nos)
    }
}

impl fmt::Display for HeightStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeightStyle {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        HeightStyle::ALL
            .into_iter()
            .find(|h| h.name() == s)
            .ok_or_else(|| format!("unknown style `{s}` (expected nos, eb or eg)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FootContacts {
    pub fl: bool,
    pub fr: bool,
    pub rl: bool,
    pub rr: bool,
}

impl FootContacts {
    /// From flags in leg order FL, FR, RL, RR.
    pub fn from_array(g: [bool; 4]) -> Self {
        Self {
            fl: g[0],
            fr: g[1],
            rl: g[2],
            rr: g[3],
        }
    }

    pub fn to_array(self) -> [bool; 4] {
        [self.fl, self.fr, self.rl, self.rr]
    }

    pub fn all_equal(self) -> bool {
        self.fr == self.fl && self.fl == self.rr && self.rr == self.rl
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardCoefficients {
    pub xy_tracking: f64,
    pub yaw_tracking: f64,
    pub z_velocity: f64,
    pub pitchroll_velocity: f64,
    pub pitchroll_position: f64,
    pub joint_limits: f64,
    pub joint_accel: f64,
    pub joint_torque: f64,
    pub action_rate: f64,
    pub collisions: f64,
    pub air_time: f64,
    pub height: f64,
    pub symmetry: f64,
}

impl Default for RewardCoefficients {
    fn default() -> Self {
        Self {
            xy_tracking: 2.0,
            yaw_tracking: 1.0,
            z_velocity: 2.0,
            pitchroll_velocity: 0.05,
            pitchroll_position: 0.2,
            joint_limits: 10.0,
            joint_accel: 2.5e-7,
            joint_torque: 2.0e-4,
            action_rate: 0.01,
            collisions: 1.0,
            air_time: 0.1,
            height: 30.0,
            symmetry: 0.5,
        }
    }
}

impl RewardCoefficients {
    pub fn validate(&self) -> std::result::Result<(), String> {
        let all = [
            self.xy_tracking,
            self.yaw_tracking,
            self.z_velocity,
            self.pitchroll_velocity,
            self.pitchroll_position,
            self.joint_limits,
            self.joint_accel,
            self.joint_torque,
            self.action_rate,
            self.collisions,
            self.air_time,
            self.height,
            self.symmetry,
        ];
        if all.iter().all(|c| c.is_finite() && *c >= 0.0) {
            Ok(())
        } else {
            Err("reward coefficients must be finite and non-negative".into())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub coefficients: RewardCoefficients,
    /// Fraction of training over which the penalty scale ramps from 0 to 1.
    pub curriculum_fraction: f64,
    /// Treat the amplitude in the equidistant-ground height as peak-to-peak.
    pub eg_amplitude_peak_to_peak: bool,
    pub nominal_height: f64,
    /// Denominator of the exponential tracking kernels.
    pub tracking_sigma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            coefficients: RewardCoefficients::default(),
            curriculum_fraction: 1.0 / 3.0,
            eg_amplitude_peak_to_peak: false,
            nominal_height: NOMINAL_HEIGHT,
            tracking_sigma: 0.25,
        }
    }
}

/// Weighted per-term contributions for one control step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardBreakdown {
    pub xy_tracking: f64,
    pub yaw_tracking: f64,
    pub z_velocity: f64,
    pub pitchroll_velocity: f64,
    pub pitchroll_position: f64,
    pub joint_limits: f64,
    pub joint_accel: f64,
    pub joint_torque: f64,
    pub action_rate: f64,
    pub collisions: f64,
    pub air_time: f64,
    pub height: f64,
    pub symmetry: f64,
    pub total: f64,
}

impl RewardBreakdown {
    pub const TERM_NAMES: [&'static str; 13] = [
        "xy_tracking",
        "yaw_tracking",
        "z_velocity",
        "pitchroll_velocity",
        "pitchroll_position",
        "joint_limits",
        "joint_accel",
        "joint_torque",
        "action_rate",
        "collisions",
        "air_time",
        "height",
        "symmetry",
    ];

    pub fn terms(&self) -> [f64; 13] {
        [
            self.xy_tracking,
            self.yaw_tracking,
            self.z_velocity,
            self.pitchroll_velocity,
            self.pitchroll_position,
            self.joint_limits,
            self.joint_accel,
            self.joint_torque,
            self.action_rate,
            self.collisions,
            self.air_time,
            self.height,
            self.symmetry,
        ]
    }

    pub fn from_terms(t: [f64; 13]) -> Self {
        let mut b = Self {
            xy_tracking: t[0],
            yaw_tracking: t[1],
            z_velocity: t[2],
            pitchroll_velocity: t[3],
            pitchroll_position: t[4],
            joint_limits: t[5],
            joint_accel: t[6],
            joint_torque: t[7],
            action_rate: t[8],
            collisions: t[9],
            air_time: t[10],
            height: t[11],
            symmetry: t[12],
            total: 0.0,
        };
        b.total = t.iter().sum();
        b
    }

    /// Total without the gait-specific symmetry term.
    pub fn total_without_gait_terms(&self) -> f64 {
        self.total - self.symmetry
    }
}

/// Quantities entering the base-height variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightReference {
    /// Equilibrium surface height b0, m.
    pub b0: f64,
    /// Instantaneous displacement z_b, m.
    pub z_b: f64,
    pub amplitude: f64,
    pub stiffness: f64,
}

impl HeightReference {
    /// Reference under a point on or off the oscillating span.
    pub fn from_bridge(bridge: &BridgeState, on_span: bool) -> Self {
        let p = &bridge.params;
        if p.rigid || !on_span {
            Self {
                b0: p.peak_height,
                z_b: 0.0,
                amplitude: 0.0,
                stiffness: p.stiffness_k,
            }
        } else {
            Self {
                b0: p.equilibrium_height(),
                z_b: bridge.displacement_zb,
                amplitude: p.amplitude,
                stiffness: p.stiffness_k,
            }
        }
    }
}

/// Base-height variable h(t) for the given style.
pub fn height_variable(
    style: HeightStyle,
    com_z: f64,
    reference: &HeightReference,
    robot_mass: f64,
    amplitude_peak_to_peak: bool,
) -> f64 {
    match style {
        HeightStyle::Nos => com_z - reference.b0,
        HeightStyle::Eb => com_z - reference.b0 - reference.z_b,
        HeightStyle::Eg => {
            let a = if amplitude_peak_to_peak {
                2.0 * reference.amplitude
            } else {
                reference.amplitude
            };
            com_z - reference.b0 + GRAVITY * robot_mass / reference.stiffness - a / 2.0
        }
    }
}

fn ind(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Gait symmetry penalty (unweighted, ≤ 0).
pub fn symmetry_penalty(gait: GaitSpec, g: FootContacts) -> f64 {
    let all = g.all_equal();
    match gait {
        GaitSpec::Default => -(ind(!g.fr && !g.fl) + ind(!g.rr && !g.rl)),
        GaitSpec::Trot => -(ind(g.fr != g.rl) + ind(g.fl != g.rr) + ind(all)),
        GaitSpec::Pace => -(ind(g.fr != g.rr) + ind(g.fl != g.rl) + ind(all)),
        GaitSpec::Bound => -(ind(g.fr != g.fl) + ind(g.rr != g.rl) + ind(all)),
        GaitSpec::Pronk => -ind(!all),
        GaitSpec::Free => 0.0,
    }
}

/// Air-time term −Σ_f g_f (g_f^T − 0.5), unweighted.
pub fn air_time_penalty(timers: &FootTimers) -> f64 {
    -timers
        .0
        .iter()
        .filter(|t| t.contact)
        .map(|t| t.last_air_duration - 0.5)
        .sum::<f64>()
}

/// Number of joints outside the central 90% of their range.
pub fn joints_outside_soft_limits(q: &JointVec, limits: &[(f64, f64); NUM_JOINTS]) -> usize {
    q.iter()
        .zip(limits.iter())
        .filter(|(q, (lo, hi))| {
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            (**q - mid).abs() > 0.9 * half
        })
        .count()
}

/// Linear 0 → 1 ramp of the penalty scale over `fraction` of training.
pub fn curriculum_scale(global_step: u64, total_steps: u64, fraction: f64) -> f64 {
    if fraction <= 0.0 || total_steps == 0 {
        return 1.0;
    }
    let ramp = fraction * total_steps as f64;
    (global_step as f64 / ramp).clamp(0.0, 1.0)
}

/// Everything the reward reads for one control step.
#[derive(Debug, Clone, Copy)]
pub struct RewardInputs<'a> {
    pub trunk: &'a TrunkState,
    pub joints: &'a JointState,
    pub joint_limits: &'a [(f64, f64); NUM_JOINTS],
    pub action: &'a JointVec,
    pub prev_action: &'a JointVec,
    pub command: Command,
    pub contacts: FootContacts,
    pub timers: &'a FootTimers,
    pub n_collisions: u32,
    pub height_ref: HeightReference,
    pub robot_mass: f64,
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

pub fn compute_reward(
    inp: &RewardInputs<'_>,
    gait: GaitSpec,
    style: HeightStyle,
    cfg: &RewardConfig,
    curriculum_scale: f64,
) -> Result<RewardBreakdown> {
    let c = &cfg.coefficients;
    let s = curriculum_scale;
    let trunk = inp.trunk;
    let (roll, pitch, yaw) = trunk.euler();

    // Horizontal velocity in the yaw-aligned frame.
    let (sy, cy) = yaw.sin_cos();
    let v = trunk.linear_velocity;
    let vx = cy * v.x + sy * v.y;
    let vy = -sy * v.x + cy * v.y;
    let w = trunk.angular_velocity;

    let ex = vx - inp.command.vx;
    let ey = vy - inp.command.vy;
    let xy = (-(ex * ex + ey * ey) / cfg.tracking_sigma).exp();
    let ew = w.z - inp.command.wyaw;
    let yaw_term = (-(ew * ew) / cfg.tracking_sigma).exp();

    let h = height_variable(
        style,
        trunk.position.z,
        &inp.height_ref,
        inp.robot_mass,
        cfg.eg_amplitude_peak_to_peak,
    );
    let dh = h - cfg.nominal_height;
    let action_diff: Vec<f64> = inp
        .action
        .iter()
        .zip(inp.prev_action.iter())
        .map(|(a, b)| a - b)
        .collect();

    let b = RewardBreakdown::from_terms([
        c.xy_tracking * xy,
        c.yaw_tracking * yaw_term,
        -s * c.z_velocity * v.z * v.z,
        -s * c.pitchroll_velocity * (w.x * w.x + w.y * w.y),
        -s * c.pitchroll_position * (roll * roll + pitch * pitch),
        -s * c.joint_limits * joints_outside_soft_limits(&inp.joints.q, inp.joint_limits) as f64,
        -s * c.joint_accel * sq_norm(&inp.joints.qdd),
        -s * c.joint_torque * sq_norm(&inp.joints.tau),
        -s * c.action_rate * sq_norm(&action_diff),
        -s * c.collisions * inp.n_collisions as f64,
        s * c.air_time * air_time_penalty(inp.timers),
        -s * c.height * dh * dh,
        s * c.symmetry * symmetry_penalty(gait, inp.contacts),
    ]);
    if b.total.is_finite() {
        Ok(b)
    } else {
        Err(Error::NonFinite("reward"))
    }
}
