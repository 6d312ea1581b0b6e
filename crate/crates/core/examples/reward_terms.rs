//! Per-term reward breakdown while standing, for each gait.

use bgap::env::{Command, Env, EnvConfig, Scene, ACT_DIM};
use bgap::rewards::GaitSpec;

const NAMES: [&str; 13] = [
    "xy_tracking", "yaw_tracking", "z_velocity", "pitchroll_vel", "pitchroll_pos", "joint_limits",
    "joint_accel", "joint_torque", "action_rate", "collisions", "air_time", "height", "symmetry",
];

fn main() {
    for gait in GaitSpec::ALL {
        let mut cfg = EnvConfig::default().deterministic();
        cfg.gait = gait;
        let mut env = Env::new(cfg, Scene::Training, 3, 0).unwrap();
        env.reset();
        env.set_command(Command::new(0.5, 0.0, 0.0));
        let mut r = env.step(&[0.0; ACT_DIM]).unwrap();
        for _ in 0..49 {
            r = env.step(&[0.0; ACT_DIM]).unwrap();
        }
        println!("{} (total {:.4}):", gait.name(), r.reward.total);
        for (n, v) in NAMES.iter().zip(r.reward.terms()) {
            if v != 0.0 {
                println!("  {n:<14} {v:+.5}");
            }
        }
    }
}
