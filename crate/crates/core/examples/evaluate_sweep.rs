//! Return sweep over commanded speed and bridge settings with scripted controllers.

use bgap::env::EnvConfig;
use bgap::eval::{parse_range, return_sweep, RandomController, ZeroController};

fn main() {
    let cfg = EnvConfig::default();
    let velocities = parse_range("0.2:1.0:0.4").unwrap();
    let settings = [(2.0, 0.0), (2.0, 0.05), (4.0, 0.02)];

    println!("zero action");
    for row in return_sweep(&cfg, &mut ZeroController, &velocities, &settings, 2, 0).unwrap() {
        println!("  {row:?}");
    }
    println!("uniform random action");
    let mut random = RandomController::new(1);
    for row in return_sweep(&cfg, &mut random, &velocities, &settings, 2, 0).unwrap() {
        println!("  {row:?}");
    }
}
