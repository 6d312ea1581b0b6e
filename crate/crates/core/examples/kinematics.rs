//! Leg kinematics of the default model: nominal stance, IK round trip, Jacobian.

use bgap::quadruped::{QuadrupedModel, NOMINAL_HEIGHT};

const LEGS: [&str; 4] = ["FL", "FR", "RL", "RR"];

fn main() {
    let model = QuadrupedModel::go2();
    let feet = model.forward_kinematics(&model.nominal_pose);
    println!("nominal stance (trunk frame), target foot height -{NOMINAL_HEIGHT}");
    for (name, p) in LEGS.iter().zip(&feet) {
        println!("  {name}: ({:+.4}, {:+.4}, {:+.4})", p.x, p.y, p.z);
    }

    // Lift every foot by 5 cm and solve back for the joints.
    let mut lifted = feet;
    for p in &mut lifted {
        p.z += 0.05;
    }
    let q = model.inverse_kinematics(&lifted).expect("reachable");
    let back = model.forward_kinematics(&q);
    let err = back.iter().zip(&lifted).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("IK round trip after a 5 cm lift: max foot error {err:.2e} m");

    let j = model.leg_jacobian(&model.nominal_pose, 0);
    println!("FL Jacobian at the nominal pose:{j:.4}");
}
