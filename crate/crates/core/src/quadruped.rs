//! Reduced-order quadruped: a rigid trunk with four massless 3-DoF legs.
//!
//! Legs are position servos. Each joint follows the unloaded equilibrium of its
//! PD law (a first-order lag toward the target, rate limited) and yields only
//! when the load from the ground exceeds the actuator torque limit. Feet couple
//! to the trunk through the penalty contact in [`crate::simcore`]; the joint
//! torques reported for a loaded leg are the Jacobian-transpose image of its
//! ground reaction.
//!
//! Leg order everywhere is FL, FR, RL, RR; joint order within a leg is hip
//! abduction (about x), hip flexion (about y), knee (about y).

use nalgebra::Matrix3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::simcore::{contact_force, ContactPoint, Foot, MaterialParams, TrunkState, Vec3};

pub const NUM_LEGS: usize = 4;
pub const NUM_JOINTS: usize = 12;
pub type JointVec = [f64; NUM_JOINTS];

/// Trunk height of the nominal standing pose, m.
pub const NOMINAL_HEIGHT: f64 = 0.325;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkLengths {
    pub hip_offset: f64,
    pub thigh: f64,
    pub calf: f64,
}

impl Default for LinkLengths {
    fn default() -> Self {
        Self {
            hip_offset: 0.095,
            thigh: 0.213,
            calf: 0.213,
        }
    }
}

/// +1 for left legs, -1 for right legs.
pub fn leg_side(leg: usize) -> f64 {
    if Foot::ALL[leg].is_left() {
        1.0
    } else {
        -1.0
    }
}

/// Foot position relative to the hip, trunk frame.
pub fn leg_forward_kinematics(links: &LinkLengths, side: f64, q: [f64; 3]) -> Vec3 {
    let [a, h, k] = q;
    let (sh, ch) = h.sin_cos();
    let (shk, chk) = (h + k).sin_cos();
    let x = -links.thigh * sh - links.calf * shk;
    let z = -links.thigh * ch - links.calf * chk;
    rotate_x(a, Vec3::new(x, side * links.hip_offset, z))
}

/// Knee position relative to the hip, trunk frame.
pub fn knee_position(links: &LinkLengths, side: f64, q: [f64; 3]) -> Vec3 {
    let [a, h, _] = q;
    let (sh, ch) = h.sin_cos();
    rotate_x(a, Vec3::new(-links.thigh * sh, side * links.hip_offset, -links.thigh * ch))
}

fn rotate_x(a: f64, v: Vec3) -> Vec3 {
    let (s, c) = a.sin_cos();
    Vec3::new(v.x, c * v.y - s * v.z, s * v.y + c * v.z)
}

/// Analytic ∂foot/∂q for one leg.
pub fn leg_jacobian(links: &LinkLengths, side: f64, q: [f64; 3]) -> Matrix3<f64> {
    let [a, h, k] = q;
    let (sa, ca) = a.sin_cos();
    let (sh, ch) = h.sin_cos();
    let (shk, chk) = (h + k).sin_cos();
    let (l1, l2) = (links.thigh, links.calf);
    let y = side * links.hip_offset;
    let z = -l1 * ch - l2 * chk;

    // d/da of Rx(a)·(x, y, z)
    let col_a = Vec3::new(0.0, -sa * y - ca * z, ca * y - sa * z);
    let dxh = -l1 * ch - l2 * chk;
    let dzh = l1 * sh + l2 * shk;
    let dxk = -l2 * chk;
    let dzk = l2 * shk;
    let col_h = Vec3::new(dxh, -sa * dzh, ca * dzh);
    let col_k = Vec3::new(dxk, -sa * dzk, ca * dzk);
    Matrix3::from_columns(&[col_a, col_h, col_k])
}

/// Joint angles placing the foot at `target` (relative to the hip), knee bent backwards.
pub fn leg_inverse_kinematics(
    links: &LinkLengths,
    side: f64,
    target: &Vec3,
    leg: usize,
) -> Result<[f64; 3], SimError> {
    let d = side * links.hip_offset;
    let yz2 = target.y * target.y + target.z * target.z;
    if yz2 < d * d {
        return Err(SimError::OutOfReach { leg });
    }
    let zs = -(yz2 - d * d).sqrt();
    let a = target.z.atan2(target.y) - zs.atan2(d);
    let a = wrap_angle(a);

    let (l1, l2) = (links.thigh, links.calf);
    let x = target.x;
    let r2 = x * x + zs * zs;
    let cos_k = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(-1.0..=1.0).contains(&cos_k) {
        return Err(SimError::OutOfReach { leg });
    }
    let k = -cos_k.acos();
    let alpha = (-x).atan2(-zs);
    let h = alpha - (l2 * k.sin()).atan2(l1 + l2 * k.cos());
    Ok([a, h, k])
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadrupedModel {
    pub trunk_mass: f64,
    /// Diagonal body-frame inertia, kg·m².
    pub trunk_inertia: Vec3,
    /// CoM shift from the geometric trunk origin, trunk frame.
    pub com_offset: Vec3,
    /// Hip abduction axes relative to the geometric trunk origin.
    pub hip_positions: [Vec3; NUM_LEGS],
    pub links: LinkLengths,
    pub joint_limits: [(f64, f64); NUM_JOINTS],
    pub torque_limit: f64,
    pub kp: f64,
    pub kd: f64,
    /// Joint speed limit of the servo, rad/s.
    pub servo_rate_limit: f64,
    /// Actuation delay in physics steps.
    pub action_delay_steps: usize,
    pub nominal_height: f64,
    pub nominal_pose: JointVec,
}

/// Configurable physical description; the nominal pose is derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub trunk_mass: f64,
    /// Box used for the diagonal inertia (length, width, height), m.
    pub trunk_box: [f64; 3],
    pub hip_x: f64,
    pub hip_y: f64,
    pub links: LinkLengths,
    pub torque_limit: f64,
    pub kp: f64,
    pub kd: f64,
    pub servo_rate_limit: f64,
    pub nominal_height: f64,
    pub abduction_limits: [f64; 2],
    pub front_hip_limits: [f64; 2],
    pub rear_hip_limits: [f64; 2],
    pub knee_limits: [f64; 2],
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            trunk_mass: 15.0,
            trunk_box: [0.37, 0.28, 0.12],
            hip_x: 0.1934,
            hip_y: 0.0465,
            links: LinkLengths::default(),
            torque_limit: 23.7,
            kp: 25.0,
            kd: 0.5,
            servo_rate_limit: 2.0 * std::f64::consts::PI * 4.0,
            nominal_height: NOMINAL_HEIGHT,
            abduction_limits: [-1.0472, 1.0472],
            front_hip_limits: [-1.5708, 3.4907],
            rear_hip_limits: [-0.5236, 4.5379],
            knee_limits: [-2.7227, -0.83776],
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> Result<QuadrupedModel, String> {
        if self.trunk_mass <= 0.0 || self.trunk_box.iter().any(|d| *d <= 0.0) {
            return Err("trunk mass and box dimensions must be positive".into());
        }
        if self.kp <= 0.0 || self.kd <= 0.0 || self.torque_limit <= 0.0 {
            return Err("kp, kd and torque_limit must be positive".into());
        }
        let [lx, ly, lz] = self.trunk_box;
        let m = self.trunk_mass;
        let inertia = Vec3::new(
            m / 12.0 * (ly * ly + lz * lz),
            m / 12.0 * (lx * lx + lz * lz),
            m / 12.0 * (lx * lx + ly * ly),
        );
        let hip_positions = Foot::ALL.map(|f| {
            let sx = if f.is_front() { 1.0 } else { -1.0 };
            let sy = if f.is_left() { 1.0 } else { -1.0 };
            Vec3::new(sx * self.hip_x, sy * self.hip_y, 0.0)
        });
        let mut joint_limits = [(0.0, 0.0); NUM_JOINTS];
        for (leg, foot) in Foot::ALL.iter().enumerate() {
            let hip = if foot.is_front() {
                self.front_hip_limits
            } else {
                self.rear_hip_limits
            };
            joint_limits[3 * leg] = (self.abduction_limits[0], self.abduction_limits[1]);
            joint_limits[3 * leg + 1] = (hip[0], hip[1]);
            joint_limits[3 * leg + 2] = (self.knee_limits[0], self.knee_limits[1]);
        }

        let mut nominal_pose = [0.0; NUM_JOINTS];
        for leg in 0..NUM_LEGS {
            let side = leg_side(leg);
            let target = Vec3::new(0.0, side * self.links.hip_offset, -self.nominal_height);
            let q = leg_inverse_kinematics(&self.links, side, &target, leg)
                .map_err(|e| format!("nominal pose unreachable: {e}"))?;
            nominal_pose[3 * leg..3 * leg + 3].copy_from_slice(&q);
        }
        for (j, (&q, &(lo, hi))) in nominal_pose.iter().zip(joint_limits.iter()).enumerate() {
            if !(lo < q && q < hi) {
                return Err(format!("nominal joint {j} = {q} outside limits [{lo}, {hi}]"));
            }
        }

        Ok(QuadrupedModel {
            trunk_mass: m,
            trunk_inertia: inertia,
            com_offset: Vec3::zeros(),
            hip_positions,
            links: self.links,
            joint_limits,
            torque_limit: self.torque_limit,
            kp: self.kp,
            kd: self.kd,
            servo_rate_limit: self.servo_rate_limit,
            action_delay_steps: 0,
            nominal_height: self.nominal_height,
            nominal_pose,
        })
    }
}

impl QuadrupedModel {
    /// Go2-class defaults.
    pub fn go2() -> Self {
        ModelConfig::default()
            .build()
            .expect("default model config is valid")
    }

    pub fn leg_q(q: &JointVec, leg: usize) -> [f64; 3] {
        [q[3 * leg], q[3 * leg + 1], q[3 * leg + 2]]
    }

    /// Foot positions in the trunk frame (origin at the hip plane centre).
    pub fn forward_kinematics(&self, q: &JointVec) -> [Vec3; NUM_LEGS] {
        std::array::from_fn(|leg| {
            self.hip_positions[leg]
                + leg_forward_kinematics(&self.links, leg_side(leg), Self::leg_q(q, leg))
        })
    }

    pub fn knee_positions(&self, q: &JointVec) -> [Vec3; NUM_LEGS] {
        std::array::from_fn(|leg| {
            self.hip_positions[leg] + knee_position(&self.links, leg_side(leg), Self::leg_q(q, leg))
        })
    }

    pub fn leg_jacobian(&self, q: &JointVec, leg: usize) -> Matrix3<f64> {
        leg_jacobian(&self.links, leg_side(leg), Self::leg_q(q, leg))
    }

    /// Joint angles placing each foot at the given trunk-frame position.
    pub fn inverse_kinematics(&self, feet: &[Vec3; NUM_LEGS]) -> Result<JointVec, SimError> {
        let mut q = [0.0; NUM_JOINTS];
        for leg in 0..NUM_LEGS {
            let rel = feet[leg] - self.hip_positions[leg];
            let ql = leg_inverse_kinematics(&self.links, leg_side(leg), &rel, leg)?;
            q[3 * leg..3 * leg + 3].copy_from_slice(&ql);
        }
        Ok(q)
    }

    /// Trunk-frame vector from the CoM to a trunk-frame point.
    pub fn from_com(&self, p: &Vec3) -> Vec3 {
        p - self.com_offset
    }

    pub fn clamp_to_limits(&self, q: &mut JointVec) {
        for (v, &(lo, hi)) in q.iter_mut().zip(self.joint_limits.iter()) {
            *v = v.clamp(lo, hi);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointState {
    pub q: JointVec,
    pub qd: JointVec,
    /// Finite difference of `qd` at the control rate.
    pub qdd: JointVec,
    pub tau: JointVec,
}

impl JointState {
    pub fn at_pose(q: JointVec) -> Self {
        Self {
            q,
            qd: [0.0; NUM_JOINTS],
            qdd: [0.0; NUM_JOINTS],
            tau: [0.0; NUM_JOINTS],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FootTimer {
    pub time_since_contact_change: f64,
    /// Duration of the most recent completed air phase, s.
    pub last_air_duration: f64,
    pub contact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FootTimers(pub [FootTimer; NUM_LEGS]);

impl FootTimers {
    pub fn standing() -> Self {
        Self([FootTimer {
            contact: true,
            ..FootTimer::default()
        }; NUM_LEGS])
    }

    /// Advances all timers by one control step with the new contact flags.
    pub fn update(&mut self, contacts: [bool; NUM_LEGS], dt: f64) {
        for (t, &c) in self.0.iter_mut().zip(contacts.iter()) {
            t.time_since_contact_change += dt;
            if c != t.contact {
                if c {
                    t.last_air_duration = t.time_since_contact_change;
                }
                t.time_since_contact_change = 0.0;
                t.contact = c;
            }
        }
    }
}

/// τ = clamp(kp (q* - q) - kd q̇, ±limit)
pub fn pd_torques(q: &JointVec, qd: &JointVec, q_target: &JointVec, model: &QuadrupedModel) -> JointVec {
    std::array::from_fn(|i| {
        (model.kp * (q_target[i] - q[i]) - model.kd * qd[i])
            .clamp(-model.torque_limit, model.torque_limit)
    })
}

/// Result of one physics step of the legs.
#[derive(Debug, Clone, Copy)]
pub struct LegDynamics {
    /// Sum of ground reaction forces, world frame. Gravity is not included.
    pub net_force: Vec3,
    /// Moment of the ground reactions about the CoM, body frame.
    pub net_torque: Vec3,
    pub contacts: [ContactPoint; NUM_LEGS],
}

/// Ground under a world (x, y) point: (surface height, surface vertical velocity).
pub trait Ground {
    fn surface(&self, x: f64, y: f64) -> (f64, f64);
}

impl<F: Fn(f64, f64) -> (f64, f64)> Ground for F {
    fn surface(&self, x: f64, y: f64) -> (f64, f64) {
        self(x, y)
    }
}

/// Flat rigid ground at a fixed height.
#[derive(Debug, Clone, Copy)]
pub struct FlatGround(pub f64);

impl Ground for FlatGround {
    fn surface(&self, _x: f64, _y: f64) -> (f64, f64) {
        (self.0, 0.0)
    }
}

/// Advances the joint servos by `dt`, computes the foot contacts and the
/// resulting wrench on the trunk. Joint torques in `joints.tau` are updated.
pub fn resolve_leg_dynamics<G: Ground + ?Sized>(
    model: &QuadrupedModel,
    trunk: &TrunkState,
    joints: &mut JointState,
    q_target: &JointVec,
    ground: &G,
    mat: &MaterialParams,
    dt: f64,
) -> LegDynamics {
    let rot = trunk.orientation.to_rotation_matrix();
    let omega_world = rot * trunk.angular_velocity;
    let gain = model.kp / model.kd;
    let rate = model.servo_rate_limit;

    let mut net_force = Vec3::zeros();
    let mut net_torque = Vec3::zeros();
    let mut contacts = [ContactPoint::separated(Foot::FL, Vec3::zeros()); NUM_LEGS];

    for leg in 0..NUM_LEGS {
        let idx = 3 * leg;
        let side = leg_side(leg);
        let ql = QuadrupedModel::leg_q(&joints.q, leg);
        let mut qd = [0.0; 3];
        for j in 0..3 {
            qd[j] = (gain * (q_target[idx + j] - ql[j])).clamp(-rate, rate);
        }

        let jac = leg_jacobian(&model.links, side, ql);
        let foot_body = model.from_com(
            &(model.hip_positions[leg] + leg_forward_kinematics(&model.links, side, ql)),
        );
        let r_world = rot * foot_body;
        let foot_pos = trunk.position + r_world;
        let foot_vel = trunk.linear_velocity
            + omega_world.cross(&r_world)
            + rot * (jac * Vec3::new(qd[0], qd[1], qd[2]));
        let (h, vs) = ground.surface(foot_pos.x, foot_pos.y);
        let contact = contact_force(Foot::ALL[leg], &foot_pos, &foot_vel, h, vs, mat);

        let mut tau = [0.0; 3];
        let pd_free: [f64; 3] = std::array::from_fn(|j| {
            model.kp * (q_target[idx + j] - ql[j]) - model.kd * qd[j]
        });
        if contact.in_contact {
            let f_body = rot.transpose() * contact.force();
            let tau_ext = jac.transpose() * f_body;
            for j in 0..3 {
                let need = pd_free[j] - tau_ext[j];
                let supplied = need.clamp(-model.torque_limit, model.torque_limit);
                tau[j] = supplied;
                // The joint yields when the actuator cannot hold the load.
                qd[j] = (qd[j] - (need - supplied) / model.kd).clamp(-rate, rate);
            }
            net_force += contact.force();
            net_torque += foot_body.cross(&f_body);
        } else {
            for j in 0..3 {
                tau[j] = pd_free[j].clamp(-model.torque_limit, model.torque_limit);
            }
        }

        for j in 0..3 {
            let (lo, hi) = model.joint_limits[idx + j];
            let next = joints.q[idx + j] + qd[j] * dt;
            if next < lo || next > hi {
                joints.q[idx + j] = next.clamp(lo, hi);
                joints.qd[idx + j] = 0.0;
            } else {
                joints.q[idx + j] = next;
                joints.qd[idx + j] = qd[j];
            }
            joints.tau[idx + j] = tau[j];
        }
        contacts[leg] = contact;
    }

    LegDynamics {
        net_force,
        net_torque,
        contacts,
    }
}

/// World-frame foot positions for the given trunk pose and joint angles.
pub fn feet_world(model: &QuadrupedModel, trunk: &TrunkState, q: &JointVec) -> [Vec3; NUM_LEGS] {
    let feet = model.forward_kinematics(q);
    feet.map(|p| trunk.position + trunk.orientation * model.from_com(&p))
}

pub fn knees_world(model: &QuadrupedModel, trunk: &TrunkState, q: &JointVec) -> [Vec3; NUM_LEGS] {
    let knees = model.knee_positions(q);
    knees.map(|p| trunk.position + trunk.orientation * model.from_com(&p))
}

/// Minimum foot separation below which two feet count as colliding, m.
pub const FOOT_COLLISION_DISTANCE: f64 = 0.06;

/// Self-collision proxy: feet pairs closer than 6 cm plus knees below the ground.
/// `knee_clearance` is each knee's height above the surface beneath it.
pub fn self_collision_count(feet: &[Vec3; NUM_LEGS], knee_clearance: &[f64; NUM_LEGS]) -> u32 {
    let mut n = 0;
    for i in 0..NUM_LEGS {
        for j in i + 1..NUM_LEGS {
            if (feet[i] - feet[j]).norm() < FOOT_COLLISION_DISTANCE {
                n += 1;
            }
        }
    }
    n + knee_clearance.iter().filter(|c| **c < 0.0).count() as u32
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelRanges {
    pub mass_scale: [f64; 2],
    pub inertia_scale: [f64; 2],
    /// Per-axis CoM shift bound, m.
    pub com_offset: f64,
    pub gain_scale: [f64; 2],
    pub max_delay_steps: usize,
}

impl Default for ModelRanges {
    fn default() -> Self {
        Self {
            mass_scale: [0.8, 1.2],
            inertia_scale: [0.8, 1.2],
            com_offset: 0.03,
            gain_scale: [0.9, 1.1],
            max_delay_steps: 2,
        }
    }
}

impl ModelRanges {
    pub fn none() -> Self {
        Self {
            mass_scale: [1.0, 1.0],
            inertia_scale: [1.0, 1.0],
            com_offset: 0.0,
            gain_scale: [1.0, 1.0],
            max_delay_steps: 0,
        }
    }
}

fn scale<R: Rng + ?Sized>(rng: &mut R, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..=range[1])
    } else {
        range[0]
    }
}

/// Samples a physically perturbed copy of `model`.
pub fn randomize_model<R: Rng + ?Sized>(
    model: &QuadrupedModel,
    rng: &mut R,
    ranges: &ModelRanges,
) -> QuadrupedModel {
    let mut m = model.clone();
    m.trunk_mass *= scale(rng, ranges.mass_scale);
    for i in 0..3 {
        m.trunk_inertia[i] *= scale(rng, ranges.inertia_scale);
    }
    for i in 0..3 {
        m.com_offset[i] += scale(rng, [-ranges.com_offset, ranges.com_offset]);
    }
    let g = scale(rng, ranges.gain_scale);
    m.kp *= g;
    m.kd *= scale(rng, ranges.gain_scale);
    m.action_delay_steps = rng.random_range(0..=ranges.max_delay_steps);
    m
}
