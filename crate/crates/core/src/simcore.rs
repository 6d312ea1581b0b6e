//! Trunk rigid-body dynamics, point-foot contact and the fixed-step integrator.
//!
//! The trunk is a single rigid body with a diagonal body-frame inertia. Forces
//! arrive in the world frame, torques in the body frame. Integration is
//! semi-implicit: velocities are advanced from the current forces first and the
//! pose is then advanced with the new velocities.

use nalgebra::{UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::SimError;

pub type Vec3 = Vector3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.81;
/// Default physics step, s.
pub const PHYSICS_DT: f64 = 0.002;
/// Physics sub-steps per control step (50 Hz control).
pub const CONTROL_DECIMATION: usize = 10;
/// Control step, s.
pub const CONTROL_DT: f64 = PHYSICS_DT * CONTROL_DECIMATION as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Foot {
    FL,
    FR,
    RL,
    RR,
}

impl Foot {
    pub const ALL: [Foot; 4] = [Foot::FL, Foot::FR, Foot::RL, Foot::RR];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_front(self) -> bool {
        matches!(self, Foot::FL | Foot::FR)
    }

    pub fn is_left(self) -> bool {
        matches!(self, Foot::FL | Foot::RL)
    }

    pub fn label(self) -> &'static str {
        match self {
            Foot::FL => "FL",
            Foot::FR => "FR",
            Foot::RL => "RL",
            Foot::RR => "RR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrunkState {
    /// CoM position, world frame.
    pub position: Vec3,
    /// Rotation world <- body.
    pub orientation: Quat,
    /// World frame.
    pub linear_velocity: Vec3,
    /// Body frame.
    pub angular_velocity: Vec3,
}

impl TrunkState {
    pub fn at_rest(position: Vec3) -> Self {
        Self {
            position,
            orientation: Quat::identity(),
            linear_velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
        }
    }

    pub fn is_finite(&self) -> bool {
        let q = self.orientation.quaternion();
        self.position.iter().all(|v| v.is_finite())
            && self.linear_velocity.iter().all(|v| v.is_finite())
            && self.angular_velocity.iter().all(|v| v.is_finite())
            && q.coords.iter().all(|v| v.is_finite())
    }

    /// Linear velocity expressed in the trunk frame.
    pub fn body_linear_velocity(&self) -> Vec3 {
        self.orientation.inverse_transform_vector(&self.linear_velocity)
    }

    /// Angular velocity expressed in the world frame.
    pub fn world_angular_velocity(&self) -> Vec3 {
        self.orientation.transform_vector(&self.angular_velocity)
    }

    /// Gravity direction (unit, pointing down) seen from the trunk frame.
    pub fn projected_gravity(&self) -> Vec3 {
        self.orientation
            .inverse_transform_vector(&Vec3::new(0.0, 0.0, -1.0))
    }

    /// (roll, pitch, yaw) by the ZYX convention.
    pub fn euler(&self) -> (f64, f64, f64) {
        euler_angles(&self.orientation)
    }

    /// Kinetic plus gravitational potential energy (potential zero at z = 0).
    pub fn mechanical_energy(&self, mass: f64, inertia: &Vec3) -> f64 {
        let w = self.angular_velocity;
        let rot = 0.5 * (inertia.x * w.x * w.x + inertia.y * w.y * w.y + inertia.z * w.z * w.z);
        0.5 * mass * self.linear_velocity.norm_squared() + rot + mass * GRAVITY * self.position.z
    }

    /// Mechanical energy of a ballistic trunk with the stored velocity, which
    /// lags the position by half a step under semi-implicit Euler, moved forward
    /// to the position's time.
    pub fn free_flight_energy(&self, mass: f64, inertia: &Vec3, dt: f64) -> f64 {
        let synced = Self {
            linear_velocity: self.linear_velocity - Vec3::new(0.0, 0.0, 0.5 * GRAVITY * dt),
            ..*self
        };
        synced.mechanical_energy(mass, inertia)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    pub foot: Foot,
    pub world_position: Vec3,
    pub penetration_depth: f64,
    pub normal_force: f64,
    pub tangential_force: Vec3,
    pub in_contact: bool,
}

impl ContactPoint {
    pub fn separated(foot: Foot, world_position: Vec3) -> Self {
        Self {
            foot,
            world_position,
            penetration_depth: 0.0,
            normal_force: 0.0,
            tangential_force: Vec3::zeros(),
            in_contact: false,
        }
    }

    /// Total force the ground applies to the foot, world frame.
    pub fn force(&self) -> Vec3 {
        self.tangential_force + Vec3::new(0.0, 0.0, self.normal_force)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialParams {
    pub friction_mu: f64,
    /// N/m
    pub normal_stiffness: f64,
    /// N·s/m
    pub normal_damping: f64,
    /// N·s/m
    pub tangential_damping: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            friction_mu: 0.8,
            normal_stiffness: 1.0e4,
            normal_damping: 100.0,
            tangential_damping: 100.0,
        }
    }
}

/// Advances the trunk by one step of semi-implicit Euler.
///
/// `net_force` excludes gravity, which is added here. Orientation is advanced
/// by the exponential map of the body-frame rotation and renormalized.
pub fn step_trunk(
    state: &TrunkState,
    mass: f64,
    inertia: &Vec3,
    net_force: &Vec3,
    net_torque: &Vec3,
    dt: f64,
) -> Result<TrunkState, SimError> {
    let inputs_finite = net_force.iter().chain(net_torque.iter()).all(|v| v.is_finite())
        && mass.is_finite()
        && dt.is_finite();
    if !inputs_finite || !state.is_finite() {
        return Err(SimError::NonFinite {
            snapshot: Box::new(*state),
        });
    }

    let gravity = Vec3::new(0.0, 0.0, -GRAVITY);
    let linear_velocity = state.linear_velocity + (net_force / mass + gravity) * dt;

    // Euler's rigid-body equation with diagonal inertia, body frame.
    let w = state.angular_velocity;
    let iw = inertia.component_mul(&w);
    let gyro = w.cross(&iw);
    let angular_accel = (net_torque - gyro).component_div(inertia);
    let angular_velocity = w + angular_accel * dt;

    let position = state.position + linear_velocity * dt;
    let delta = Quat::from_scaled_axis(angular_velocity * dt);
    let mut orientation = state.orientation * delta;
    orientation.renormalize();

    let next = TrunkState {
        position,
        orientation,
        linear_velocity,
        angular_velocity,
    };
    if next.is_finite() {
        Ok(next)
    } else {
        Err(SimError::NonFinite {
            snapshot: Box::new(*state),
        })
    }
}

/// Penalty spring-damper contact between a point foot and a horizontal surface
/// moving vertically with `surface_velocity`.
pub fn contact_force(
    foot: Foot,
    foot_world_pos: &Vec3,
    foot_world_vel: &Vec3,
    surface_height: f64,
    surface_velocity: f64,
    mat: &MaterialParams,
) -> ContactPoint {
    let depth = surface_height - foot_world_pos.z;
    if depth <= 0.0 {
        return ContactPoint::separated(foot, *foot_world_pos);
    }
    let normal_force = (mat.normal_stiffness * depth
        + mat.normal_damping * (surface_velocity - foot_world_vel.z))
        .max(0.0);
    if normal_force <= 0.0 {
        return ContactPoint {
            penetration_depth: depth,
            ..ContactPoint::separated(foot, *foot_world_pos)
        };
    }
    let raw = Vec3::new(
        -mat.tangential_damping * foot_world_vel.x,
        -mat.tangential_damping * foot_world_vel.y,
        0.0,
    );
    ContactPoint {
        foot,
        world_position: *foot_world_pos,
        penetration_depth: depth,
        normal_force,
        tangential_force: clamp_to_friction_cone(raw, mat.friction_mu * normal_force),
        in_contact: true,
    }
}

/// Radially projects a tangential force onto the disc of radius `limit`.
pub fn clamp_to_friction_cone(force: Vec3, limit: f64) -> Vec3 {
    let norm = force.norm();
    if norm > limit && norm > 0.0 {
        force * (limit / norm)
    } else {
        force
    }
}

/// ZYX (yaw-pitch-roll) Euler angles of a unit quaternion, returned as
/// `(roll, pitch, yaw)`. Pitch is clamped near the gimbal singularity.
pub fn euler_angles(orientation: &Quat) -> (f64, f64, f64) {
    let q = orientation.quaternion();
    let (w, x, y, z) = (q.w, q.i, q.j, q.k);
    let sinr_cosp = 2.0 * (w * x + y * z);
    let cosr_cosp = 1.0 - 2.0 * (x * x + y * y);
    let roll = sinr_cosp.atan2(cosr_cosp);

    let limit = std::f64::consts::FRAC_PI_2 - 1e-6;
    let sinp = (2.0 * (w * y - z * x)).clamp(-1.0, 1.0);
    let pitch = sinp.asin().clamp(-limit, limit);

    let siny_cosp = 2.0 * (w * z + x * y);
    let cosy_cosp = 1.0 - 2.0 * (y * y + z * z);
    let yaw = siny_cosp.atan2(cosy_cosp);
    (roll, pitch, yaw)
}

/// Inverse of [`euler_angles`].
pub fn quat_from_euler(roll: f64, pitch: f64, yaw: f64) -> Quat {
    Quat::from_euler_angles(roll, pitch, yaw)
}
