//! Locomotion MDP: 50 Hz observation/action interface over the trunk, legs
//! and bridge, with command sampling, pushes, sensor noise, domain
//! randomization and termination. [`VecEnv`] steps a batch of independent
//! instances.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::bridge::{
    step_bridge, surface_height_at, BridgeExtent, BridgeParams, BridgeRanges, BridgeState,
};
use crate::error::{ConfigError, Error, Result};
use crate::quadruped::{
    feet_world, knees_world, randomize_model, resolve_leg_dynamics, self_collision_count,
    FootTimers, JointState, JointVec, ModelConfig, ModelRanges, QuadrupedModel, NUM_JOINTS,
    NUM_LEGS,
};
use crate::rewards::{
    compute_reward, FootContacts, GaitSpec, HeightReference, HeightStyle, RewardBreakdown,
    RewardConfig, RewardInputs,
};
use crate::simcore::{step_trunk, MaterialParams, TrunkState, Vec3, CONTROL_DT, PHYSICS_DT};

pub const OBS_DIM: usize = 48;
pub const ACT_DIM: usize = NUM_JOINTS;
/// Bumped whenever the observation layout changes.
pub const OBS_LAYOUT_VERSION: u32 = 1;
/// Joint offset, rad, produced by a unit action.
pub const ACTION_SCALE: f64 = 0.25;

/// Velocity command in the yaw-aligned trunk frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    pub vx: f64,
    pub vy: f64,
    pub wyaw: f64,
}

impl Command {
    pub const fn new(vx: f64, vy: f64, wyaw: f64) -> Self {
        Self { vx, vy, wyaw }
    }

    pub fn clamped(self) -> Self {
        Self::new(
            self.vx.clamp(-1.0, 1.0),
            self.vy.clamp(-1.0, 1.0),
            self.wyaw.clamp(-1.0, 1.0),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.vx == 0.0 && self.vy == 0.0 && self.wyaw == 0.0
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.vx, self.vy, self.wyaw]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommandConfig {
    /// Per-axis bound, each component drawn from U[-max, max].
    pub max: [f64; 3],
    /// Lower bounds replacing `-max`, for one-sided command ranges.
    pub min: Option<[f64; 3]>,
    pub zero_fraction: f64,
    pub resample_min_s: f64,
    pub resample_max_s: f64,
}

impl Default for CommandConfig {
    fn default() -> Self {
        Self {
            max: [1.0; 3],
            min: None,
            zero_fraction: 0.1,
            resample_min_s: 5.0,
            resample_max_s: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PushConfig {
    pub enabled: bool,
    pub interval_min_s: f64,
    pub interval_max_s: f64,
    pub max_speed: f64,
}

impl Default for PushConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            interval_min_s: 5.0,
            interval_max_s: 10.0,
            max_speed: 0.5,
        }
    }
}

/// Standard deviations in physical units; each sample is clipped at 3σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub lin_vel: f64,
    pub ang_vel: f64,
    pub gravity: f64,
    pub joint_pos: f64,
    pub joint_vel: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            lin_vel: 0.1,
            ang_vel: 0.2,
            gravity: 0.05,
            joint_pos: 0.01,
            joint_vel: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub style: HeightStyle,
    pub gait: GaitSpec,
    pub bridge: BridgeRanges,
    pub model: ModelConfig,
    pub randomization: ModelRanges,
    pub material: MaterialParams,
    pub commands: CommandConfig,
    pub push: PushConfig,
    pub noise: NoiseConfig,
    pub rewards: RewardConfig,
    pub episode_length_s: f64,
    /// Uniform joint noise at reset, rad.
    pub init_joint_noise: f64,
    /// Uniform horizontal position noise at reset, m.
    pub init_xy_noise: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            style: HeightStyle::Nos,
            gait: GaitSpec::Default,
            bridge: BridgeRanges::default(),
            model: ModelConfig::default(),
            randomization: ModelRanges::default(),
            material: MaterialParams::default(),
            commands: CommandConfig::default(),
            push: PushConfig::default(),
            noise: NoiseConfig::default(),
            rewards: RewardConfig::default(),
            episode_length_s: 20.0,
            init_joint_noise: 0.05,
            init_xy_noise: 0.05,
        }
    }
}

fn check(ok: bool, msg: &str) -> std::result::Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid(msg.to_string()))
    }
}

impl EnvConfig {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        self.bridge.validate().map_err(ConfigError::Invalid)?;
        self.rewards.coefficients.validate().map_err(ConfigError::Invalid)?;
        self.model.build().map_err(ConfigError::Invalid)?;
        let c = &self.commands;
        check(c.max.iter().all(|m| (0.0..=1.0).contains(m)), "command bounds must lie in [0, 1]")?;
        if let Some(min) = c.min {
            check(
                min.iter().zip(&c.max).all(|(lo, hi)| *lo >= -1.0 && lo <= hi),
                "command minimum must lie in [-1, max]",
            )?;
        }
        check((0.0..=1.0).contains(&c.zero_fraction), "zero_fraction must lie in [0, 1]")?;
        check(
            c.resample_min_s > 0.0 && c.resample_min_s <= c.resample_max_s,
            "command resample interval invalid",
        )?;
        let p = &self.push;
        check(
            p.interval_min_s > 0.0 && p.interval_min_s <= p.interval_max_s && p.max_speed >= 0.0,
            "push schedule invalid",
        )?;
        let n = &self.noise;
        check(
            [n.lin_vel, n.ang_vel, n.gravity, n.joint_pos, n.joint_vel]
                .iter()
                .all(|s| *s >= 0.0 && s.is_finite()),
            "noise levels must be non-negative",
        )?;
        let r = &self.randomization;
        check(
            r.mass_scale[0] > 0.0
                && r.mass_scale[0] <= r.mass_scale[1]
                && r.inertia_scale[0] > 0.0
                && r.inertia_scale[0] <= r.inertia_scale[1]
                && r.gain_scale[0] > 0.0
                && r.gain_scale[0] <= r.gain_scale[1]
                && r.com_offset >= 0.0
                && r.max_delay_steps < crate::simcore::CONTROL_DECIMATION,
            "randomization ranges invalid",
        )?;
        check(self.episode_length_s >= CONTROL_DT, "episode_length_s too short")?;
        check(
            self.init_joint_noise >= 0.0 && self.init_xy_noise >= 0.0,
            "reset noise must be non-negative",
        )?;
        Ok(())
    }

    pub fn episode_steps(&self) -> u64 {
        (self.episode_length_s / CONTROL_DT).round() as u64
    }

    /// Settings with all stochastic disturbances switched off.
    pub fn deterministic(mut self) -> Self {
        self.randomization = ModelRanges::none();
        self.push.enabled = false;
        self.noise.enabled = false;
        self.init_joint_noise = 0.0;
        self.init_xy_noise = 0.0;
        self
    }
}

/// Evaluation-time controller: constant forward speed, proportional
/// corrections of lateral offset and heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedOperator {
    pub target_vx: f64,
    pub lateral_gain: f64,
    pub yaw_gain: f64,
}

impl Default for ScriptedOperator {
    fn default() -> Self {
        Self {
            target_vx: 0.5,
            lateral_gain: 0.5,
            yaw_gain: 1.0,
        }
    }
}

impl ScriptedOperator {
    pub fn command(&self, trunk: &TrunkState) -> Command {
        let (_, _, yaw) = trunk.euler();
        Command::new(
            self.target_vx,
            -self.lateral_gain * trunk.position.y,
            -self.yaw_gain * yaw,
        )
        .clamped()
    }
}

pub fn scripted_operator(trunk: &TrunkState, target_vx: f64) -> Command {
    ScriptedOperator {
        target_vx,
        ..ScriptedOperator::default()
    }
    .command(trunk)
}

/// Finite-bridge evaluation scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalScene {
    pub frequency: f64,
    pub amplitude: f64,
    pub start_x: f64,
    /// Either the scripted operator or a fixed command.
    pub operator: Option<ScriptedOperator>,
    pub command: Command,
}

impl EvalScene {
    pub fn pass(frequency: f64, amplitude: f64, target_vx: f64) -> Self {
        Self {
            frequency,
            amplitude,
            start_x: -1.0,
            operator: Some(ScriptedOperator {
                target_vx,
                ..ScriptedOperator::default()
            }),
            command: Command::new(target_vx, 0.0, 0.0),
        }
    }

    pub fn bridge(&self) -> BridgeParams {
        BridgeParams::oscillating(self.frequency, self.amplitude).with_extent(BridgeExtent::Finite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scene {
    /// Unbounded randomized bridge, sampled commands and pushes.
    Training,
    Evaluation(EvalScene),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminationReason {
    Orientation,
    Height,
    OffBridge,
    Diverged,
    /// Crossed the far end of the evaluation bridge.
    PassComplete,
    TimeLimit,
}

impl TerminationReason {
    pub fn name(self) -> &'static str {
        match self {
            TerminationReason::Orientation => "orientation",
            TerminationReason::Height => "height",
            TerminationReason::OffBridge => "off-bridge",
            TerminationReason::Diverged => "diverged",
            TerminationReason::PassComplete => "pass-complete",
            TerminationReason::TimeLimit => "time-limit",
        }
    }

    /// Truncations end the episode without making the final state terminal.
    pub fn is_truncation(self) -> bool {
        matches!(self, TerminationReason::TimeLimit | TerminationReason::PassComplete)
    }
}

/// Observation layout, in order: trunk linear velocity (trunk frame, ×2),
/// angular velocity (×0.25), projected gravity, command (vx, vy ×2, yaw
/// rate ×0.25), q − q_nominal, q̇ (×0.05), previous action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Default for Observation {
    fn default() -> Self {
        Self([0.0; OBS_DIM])
    }
}

const LIN_VEL_SCALE: f64 = 2.0;
const ANG_VEL_SCALE: f64 = 0.25;
const JOINT_VEL_SCALE: f64 = 0.05;

impl Observation {
    pub const SEGMENTS: [(&'static str, usize); 7] = [
        ("lin_vel", 3),
        ("ang_vel", 3),
        ("gravity", 3),
        ("command", 3),
        ("joint_pos", 12),
        ("joint_vel", 12),
        ("last_action", 12),
    ];

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Per-channel bound on |noisy − clean| in observation units.
    pub fn noise_bound(noise: &NoiseConfig) -> [f64; OBS_DIM] {
        let mut b = [0.0; OBS_DIM];
        if !noise.enabled {
            return b;
        }
        b[0..3].fill(3.0 * noise.lin_vel * LIN_VEL_SCALE);
        b[3..6].fill(3.0 * noise.ang_vel * ANG_VEL_SCALE);
        b[6..9].fill(3.0 * noise.gravity);
        b[12..24].fill(3.0 * noise.joint_pos);
        b[24..36].fill(3.0 * noise.joint_vel * JOINT_VEL_SCALE);
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub reason: Option<TerminationReason>,
    /// Horizontal velocity change applied this step.
    pub push: Option<Vec3>,
    pub contacts: FootContacts,
    /// Mean normal force over the control step, N, FL/FR/RL/RR.
    pub normal_forces: [f64; NUM_LEGS],
    pub bridge: BridgeState,
    pub surface_height: f64,
    pub command: Command,
    pub clean_observation: Observation,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: RewardBreakdown,
    pub done: bool,
    pub info: StepInfo,
}

impl StepResult {
    pub fn truncated(&self) -> bool {
        self.info.reason.is_some_and(|r| r.is_truncation())
    }

    pub fn terminated(&self) -> bool {
        self.done && !self.truncated()
    }
}

/// Command with each axis ~ U[min, max] (min defaults to -max), zeroed with
/// probability `zero_fraction`.
pub fn sample_command<R: Rng + ?Sized>(rng: &mut R, cfg: &CommandConfig) -> Command {
    let lo = cfg.min.unwrap_or(cfg.max.map(|m| -m));
    let draw = |rng: &mut R, i: usize| {
        if lo[i] < cfg.max[i] {
            rng.random_range(lo[i]..=cfg.max[i])
        } else {
            lo[i]
        }
    };
    let c = Command::new(draw(rng, 0), draw(rng, 1), draw(rng, 2));
    if rng.random_bool(cfg.zero_fraction) {
        Command::default()
    } else {
        c
    }
}

/// Adds a horizontal velocity impulse of magnitude U[0, max_speed] in a
/// uniformly random direction. Returns the new state and the impulse.
pub fn apply_push<R: Rng + ?Sized>(
    state: &TrunkState,
    rng: &mut R,
    max_speed: f64,
) -> (TrunkState, Vec3) {
    let speed = if max_speed > 0.0 { rng.random_range(0.0..=max_speed) } else { 0.0 };
    let angle = rng.random_range(0.0..2.0 * PI);
    let dv = Vec3::new(speed * angle.cos(), speed * angle.sin(), 0.0);
    let mut s = *state;
    s.linear_velocity += dv;
    (s, dv)
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Termination check given trunk state, local surface height and scene.
pub fn check_termination(
    trunk: &TrunkState,
    surface_height: f64,
    scene: &Scene,
    bridge: &BridgeParams,
    step: u64,
    episode_steps: u64,
) -> Option<TerminationReason> {
    if !trunk.is_finite() {
        return Some(TerminationReason::Diverged);
    }
    let (roll, pitch, _) = trunk.euler();
    let limit = 60f64.to_radians();
    if roll.abs() > limit || pitch.abs() > limit {
        return Some(TerminationReason::Orientation);
    }
    if trunk.position.z - surface_height < 0.10 {
        return Some(TerminationReason::Height);
    }
    if let Scene::Evaluation(_) = scene {
        if trunk.position.y.abs() > 0.5 * bridge.width {
            return Some(TerminationReason::OffBridge);
        }
        if trunk.position.x > bridge.length + 1.0 {
            return Some(TerminationReason::PassComplete);
        }
    }
    if step >= episode_steps {
        return Some(TerminationReason::TimeLimit);
    }
    None
}

/// One simulated robot on one bridge.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: EnvConfig,
    scene: Scene,
    base_model: QuadrupedModel,
    model: QuadrupedModel,
    rng: ChaCha8Rng,
    trunk: TrunkState,
    joints: JointState,
    bridge: BridgeState,
    timers: FootTimers,
    command: Command,
    next_command_time: f64,
    next_push_time: f64,
    /// Joint targets from the previous and current control step.
    prev_target: JointVec,
    target: JointVec,
    last_action: JointVec,
    step_count: u64,
    curriculum_scale: f64,
}

impl Env {
    /// Creates an instance whose randomness comes from `(seed, stream)`.
    pub fn new(cfg: EnvConfig, scene: Scene, seed: u64, stream: u64) -> Result<Self> {
        cfg.validate()?;
        let base_model = cfg.model.build().map_err(ConfigError::Invalid)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let nominal = base_model.nominal_pose;
        let mut env = Self {
            scene,
            model: base_model.clone(),
            base_model,
            rng,
            trunk: TrunkState::at_rest(Vec3::zeros()),
            joints: JointState::at_pose(nominal),
            bridge: BridgeState::rigid(),
            timers: FootTimers::standing(),
            command: Command::default(),
            next_command_time: 0.0,
            next_push_time: 0.0,
            prev_target: nominal,
            target: nominal,
            last_action: [0.0; ACT_DIM],
            step_count: 0,
            curriculum_scale: 1.0,
            cfg,
        };
        env.reset();
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn model(&self) -> &QuadrupedModel {
        &self.model
    }

    pub fn trunk(&self) -> &TrunkState {
        &self.trunk
    }

    /// Overrides the trunk state, e.g. to inject a disturbance in tests.
    pub fn set_trunk(&mut self, trunk: TrunkState) {
        self.trunk = trunk;
    }

    pub fn joints(&self) -> &JointState {
        &self.joints
    }

    pub fn bridge(&self) -> &BridgeState {
        &self.bridge
    }

    pub fn command(&self) -> Command {
        self.command
    }

    pub fn set_command(&mut self, command: Command) {
        self.command = command;
    }

    pub fn time(&self) -> f64 {
        self.step_count as f64 * CONTROL_DT
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn set_curriculum_scale(&mut self, s: f64) {
        self.curriculum_scale = s.clamp(0.0, 1.0);
    }

    pub fn surface_height(&self) -> f64 {
        surface_height_at(&self.bridge, self.trunk.position.x).0
    }

    /// Starts a new episode drawing from the instance's random stream.
    pub fn reset(&mut self) -> Observation {
        let rng = &mut self.rng;
        let (bridge, start_x) = match self.scene {
            Scene::Training => {
                self.model = randomize_model(&self.base_model, rng, &self.cfg.randomization);
                let b = self.cfg.bridge.sample(rng, self.cfg.style.oscillating());
                (b, 0.0)
            }
            Scene::Evaluation(ev) => {
                self.model = self.base_model.clone();
                let phase = rng.random_range(0.0..2.0 * PI);
                (BridgeState::with_phase(ev.bridge(), phase), ev.start_x)
            }
        };
        self.bridge = bridge;

        let jn = self.cfg.init_joint_noise;
        let mut q = self.model.nominal_pose;
        for qi in q.iter_mut() {
            *qi += uniform(rng, -jn, jn);
        }
        self.model.clamp_to_limits(&mut q);
        let xn = self.cfg.init_xy_noise;
        let x = start_x + uniform(rng, -xn, xn);
        let y = uniform(rng, -xn, xn);

        // Lowest foot 5 mm above the surface.
        let (h, _) = surface_height_at(&self.bridge, x);
        let probe = TrunkState::at_rest(Vec3::new(x, y, 0.0));
        let lowest = feet_world(&self.model, &probe, &q)
            .iter()
            .map(|p| p.z)
            .fold(f64::INFINITY, f64::min);
        self.trunk = TrunkState::at_rest(Vec3::new(x, y, h - lowest + 0.005));
        self.joints = JointState::at_pose(q);
        self.timers = FootTimers::standing();
        self.prev_target = q;
        self.target = q;
        self.last_action = [0.0; ACT_DIM];
        self.step_count = 0;

        let c = &self.cfg.commands;
        match self.scene {
            Scene::Training => {
                self.command = sample_command(rng, c);
            }
            Scene::Evaluation(ev) => {
                self.command = match ev.operator {
                    Some(op) => op.command(&self.trunk),
                    None => ev.command,
                };
            }
        }
        self.next_command_time = uniform(rng, c.resample_min_s, c.resample_max_s);
        self.next_push_time = uniform(rng, self.cfg.push.interval_min_s, self.cfg.push.interval_max_s);
        self.observe().1
    }

    fn clean_observation(&self) -> Observation {
        let mut o = [0.0; OBS_DIM];
        let v = self.trunk.body_linear_velocity();
        let w = self.trunk.angular_velocity;
        let g = self.trunk.projected_gravity();
        for i in 0..3 {
            o[i] = v[i] * LIN_VEL_SCALE;
            o[3 + i] = w[i] * ANG_VEL_SCALE;
            o[6 + i] = g[i];
        }
        o[9] = self.command.vx * LIN_VEL_SCALE;
        o[10] = self.command.vy * LIN_VEL_SCALE;
        o[11] = self.command.wyaw * ANG_VEL_SCALE;
        for j in 0..NUM_JOINTS {
            o[12 + j] = self.joints.q[j] - self.model.nominal_pose[j];
            o[24 + j] = self.joints.qd[j] * JOINT_VEL_SCALE;
            o[36 + j] = self.last_action[j];
        }
        Observation(o)
    }

    /// Clean and noise-injected observation of the current state.
    fn observe(&mut self) -> (Observation, Observation) {
        let clean = self.clean_observation();
        let n = self.cfg.noise;
        if !n.enabled {
            return (clean, clean);
        }
        let mut noisy = clean;
        let sigma = |i: usize| match i {
            0..=2 => n.lin_vel * LIN_VEL_SCALE,
            3..=5 => n.ang_vel * ANG_VEL_SCALE,
            6..=8 => n.gravity,
            12..=23 => n.joint_pos,
            24..=35 => n.joint_vel * JOINT_VEL_SCALE,
            _ => 0.0,
        };
        for (i, v) in noisy.0.iter_mut().enumerate() {
            let s = sigma(i);
            if s > 0.0 {
                let e: f64 = Normal::new(0.0, s).expect("finite sigma").sample(&mut self.rng);
                *v += e.clamp(-3.0 * s, 3.0 * s);
            }
        }
        (clean, noisy)
    }

    /// Advances one control step with a normalized action in [-1, 1]^12.
    pub fn step(&mut self, action: &JointVec) -> Result<StepResult> {
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("action"));
        }
        let action: JointVec = action.map(|a| a.clamp(-1.0, 1.0));
        self.prev_target = self.target;
        self.target =
            std::array::from_fn(|j| self.model.nominal_pose[j] + ACTION_SCALE * action[j]);

        let qd_start = self.joints.qd;
        let mut forces = [0.0; NUM_LEGS];
        let mut contacts = [false; NUM_LEGS];
        let mut diverged = false;
        let delay = self.model.action_delay_steps;
        for sub in 0..crate::simcore::CONTROL_DECIMATION {
            let target = if sub < delay { self.prev_target } else { self.target };
            let bridge = self.bridge;
            let ground = move |x: f64, _y: f64| surface_height_at(&bridge, x);
            let out = resolve_leg_dynamics(
                &self.model,
                &self.trunk,
                &mut self.joints,
                &target,
                &ground,
                &self.cfg.material,
                PHYSICS_DT,
            );
            match step_trunk(
                &self.trunk,
                self.model.trunk_mass,
                &self.model.trunk_inertia,
                &out.net_force,
                &out.net_torque,
                PHYSICS_DT,
            ) {
                Ok(t) => self.trunk = t,
                Err(_) => {
                    diverged = true;
                    break;
                }
            }
            self.bridge = step_bridge(&self.bridge, PHYSICS_DT);
            contacts = out.contacts.map(|c| c.in_contact);
            for (f, c) in forces.iter_mut().zip(out.contacts.iter()) {
                *f += c.normal_force / crate::simcore::CONTROL_DECIMATION as f64;
            }
            self.timers.update(contacts, PHYSICS_DT);
        }
        self.step_count += 1;
        for j in 0..NUM_JOINTS {
            self.joints.qdd[j] = (self.joints.qd[j] - qd_start[j]) / CONTROL_DT;
        }

        let foot_contacts = FootContacts::from_array(contacts);
        if diverged || !self.joints.q.iter().all(|q| q.is_finite()) {
            let info = StepInfo {
                reason: Some(TerminationReason::Diverged),
                push: None,
                contacts: foot_contacts,
                normal_forces: forces,
                bridge: self.bridge,
                surface_height: self.bridge.params.peak_height,
                command: self.command,
                clean_observation: Observation::default(),
                time: self.time(),
            };
            return Ok(StepResult {
                observation: Observation::default(),
                reward: RewardBreakdown::default(),
                done: true,
                info,
            });
        }

        let t = self.time();
        let rng = &mut self.rng;
        match self.scene {
            Scene::Training => {
                if t >= self.next_command_time {
                    let c = &self.cfg.commands;
                    self.command = sample_command(rng, c);
                    self.next_command_time = t + uniform(rng, c.resample_min_s, c.resample_max_s);
                }
            }
            Scene::Evaluation(ev) => {
                if let Some(op) = ev.operator {
                    self.command = op.command(&self.trunk);
                }
            }
        }
        let mut push = None;
        if self.cfg.push.enabled && matches!(self.scene, Scene::Training) && t >= self.next_push_time
        {
            let p = &self.cfg.push;
            let (trunk, dv) = apply_push(&self.trunk, rng, p.max_speed);
            self.trunk = trunk;
            push = Some(dv);
            self.next_push_time = t + uniform(rng, p.interval_min_s, p.interval_max_s);
        }

        let x = self.trunk.position.x;
        let (surface, _) = surface_height_at(&self.bridge, x);
        let knee_clearance = knees_world(&self.model, &self.trunk, &self.joints.q)
            .map(|k| k.z - surface_height_at(&self.bridge, k.x).0);
        let feet = feet_world(&self.model, &self.trunk, &self.joints.q);
        let inputs = RewardInputs {
            trunk: &self.trunk,
            joints: &self.joints,
            joint_limits: &self.model.joint_limits,
            action: &action,
            prev_action: &self.last_action,
            command: self.command,
            contacts: foot_contacts,
            timers: &self.timers,
            n_collisions: self_collision_count(&feet, &knee_clearance),
            height_ref: HeightReference::from_bridge(&self.bridge, self.bridge.on_span(x)),
            robot_mass: self.model.trunk_mass,
        };
        let reward = compute_reward(
            &inputs,
            self.cfg.gait,
            self.cfg.style,
            &self.cfg.rewards,
            self.curriculum_scale,
        );
        self.last_action = action;

        let mut reason = check_termination(
            &self.trunk,
            surface,
            &self.scene,
            &self.bridge.params,
            self.step_count,
            self.cfg.episode_steps(),
        );
        let reward = match reward {
            Ok(r) => r,
            Err(_) => {
                reason = Some(TerminationReason::Diverged);
                RewardBreakdown::default()
            }
        };
        let (clean, noisy) = self.observe();
        Ok(StepResult {
            observation: noisy,
            reward,
            done: reason.is_some(),
            info: StepInfo {
                reason,
                push,
                contacts: foot_contacts,
                normal_forces: forces,
                bridge: self.bridge,
                surface_height: surface,
                command: self.command,
                clean_observation: clean,
                time: t,
            },
        })
    }
}

/// Result of one batched step. When the episode ended, `result.observation`
/// already belongs to the fresh episode and the last one is kept in
/// `final_observation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VecStep {
    pub result: StepResult,
    pub final_observation: Option<Observation>,
}

/// Batch of independent environments with automatic reset. Instance `i`
/// draws from stream `2i` of the shared seed, so results do not depend on
/// the number of worker threads.
#[derive(Debug, Clone)]
pub struct VecEnv {
    envs: Vec<Env>,
    workers: usize,
}

impl VecEnv {
    pub fn new(cfg: &EnvConfig, scene: Scene, num_envs: usize, seed: u64) -> Result<Self> {
        if num_envs == 0 {
            return Err(ConfigError::Invalid("num_envs must be positive".into()).into());
        }
        let envs = (0..num_envs)
            .map(|i| Env::new(cfg.clone(), scene, seed, 2 * i as u64))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { envs, workers: 1 })
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[Env] {
        &self.envs
    }

    pub fn envs_mut(&mut self) -> &mut [Env] {
        &mut self.envs
    }

    pub fn observations(&mut self) -> Vec<Observation> {
        self.envs.iter_mut().map(|e| e.observe().1).collect()
    }

    pub fn set_curriculum_scale(&mut self, s: f64) {
        for e in &mut self.envs {
            e.set_curriculum_scale(s);
        }
    }

    pub fn step(&mut self, actions: &[JointVec]) -> Result<Vec<VecStep>> {
        if actions.len() != self.envs.len() {
            return Err(Error::LengthMismatch(format!(
                "{} actions for {} environments",
                actions.len(),
                self.envs.len()
            )));
        }
        fn run(env: &mut Env, a: &JointVec) -> Result<VecStep> {
            let mut result = env.step(a)?;
            let mut final_observation = None;
            if result.done {
                final_observation = Some(result.observation);
                result.observation = env.reset();
            }
            Ok(VecStep {
                result,
                final_observation,
            })
        }
        if self.workers <= 1 || self.envs.len() == 1 {
            return self.envs.iter_mut().zip(actions).map(|(e, a)| run(e, a)).collect();
        }
        let chunk = self.envs.len().div_ceil(self.workers);
        let parts: Vec<Result<Vec<VecStep>>> = std::thread::scope(|s| {
            let handles: Vec<_> = self
                .envs
                .chunks_mut(chunk)
                .zip(actions.chunks(chunk))
                .map(|(es, acts)| {
                    s.spawn(move || es.iter_mut().zip(acts).map(|(e, a)| run(e, a)).collect())
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("environment worker panicked"))
                .collect()
        });
        let mut out = Vec::with_capacity(self.envs.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}
