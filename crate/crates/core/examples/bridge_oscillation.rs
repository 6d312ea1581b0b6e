//! Oscillating bridge: stiffness, admissible amplitude and one period of motion.

use bgap::bridge::{max_amplitude, step_bridge, stiffness_for_frequency, BridgeParams, BridgeState, DEFAULT_MODAL_MASS};
use bgap::simcore::PHYSICS_DT;

fn main() {
    println!("{:>6} {:>14} {:>10}", "f [Hz]", "k [N/m]", "A_max [m]");
    for f in [0.75, 1.0, 2.0, 3.5, 5.0, 7.5] {
        let k = stiffness_for_frequency(DEFAULT_MODAL_MASS, f);
        println!("{f:>6.2} {k:>14.1} {:>10.4}", max_amplitude(f));
    }

    let f = 2.0;
    let mut s = BridgeState::with_phase(BridgeParams::oscillating(f, 0.05), 0.0);
    println!("\nf = {f} Hz, A = 0.05 m, one period sampled at 20 Hz");
    println!("{:>6} {:>10} {:>10} {:>10}", "t", "z_b", "v", "a");
    let steps = (1.0 / f / PHYSICS_DT).round() as usize;
    for i in 0..=steps {
        if i % 25 == 0 {
            let t = i as f64 * PHYSICS_DT;
            println!("{t:>6.3} {:>10.5} {:>10.5} {:>10.4}", s.displacement_zb, s.velocity, s.acceleration());
        }
        s = step_bridge(&s, PHYSICS_DT);
    }
}
