//! Gait statistics of a synthetic 4 Hz trot on a 2 Hz bridge.

use std::f64::consts::PI;

use bgap::analysis::{
    contacts_of, force_stats, footfall_intervals, phase_percentages, phase_shift, power_estimate,
    step_frequency, times_of, PowerMode, TrajectoryRecord,
};

fn main() {
    let dt = 0.02;
    let records: Vec<TrajectoryRecord> = (0..500)
        .map(|i| {
            let t = i as f64 * dt;
            let diag = (t * 4.0).fract() < 0.5;
            let contacts = [diag, !diag, !diag, diag];
            TrajectoryRecord {
                time: t,
                contacts,
                normal_forces: contacts.map(|c| if c { 75.0 + 10.0 * (9.0 * t).sin() } else { 0.0 }),
                bridge_z: 0.05 * (2.0 * PI * 2.0 * t).sin(),
                com: [0.5 * t, 0.0, 1.375 + 0.03 * (2.0 * PI * 2.0 * t - 0.4 * PI).sin()],
                tau: [2.0 * (8.0 * PI * t).sin(); 12],
                qd: [1.5 * (8.0 * PI * t).cos(); 12],
                ..Default::default()
            }
        })
        .collect();

    let contacts = contacts_of(&records);
    let times = times_of(&records);
    let p = phase_percentages(&contacts).unwrap();
    println!("stance phases [%]: {p:?}");
    println!("step frequency: {:.3} Hz", step_frequency(&times, &contacts).unwrap());
    let runs = footfall_intervals(&times, &contacts, dt).unwrap();
    println!("FL stance intervals: {} (first {:?})", runs[0].len(), runs[0].first());

    let z: Vec<f64> = records.iter().map(|r| r.com[2]).collect();
    let zb: Vec<f64> = records.iter().map(|r| r.bridge_z).collect();
    let phi = phase_shift(&z, &zb, 2.0, 1.0 / dt).unwrap().unwrap();
    println!("CoM lag behind bridge: {:.3}π rad", phi / PI);

    let tau: Vec<_> = records.iter().map(|r| r.tau).collect();
    let qd: Vec<_> = records.iter().map(|r| r.qd).collect();
    for mode in [PowerMode::Absolute, PowerMode::Positive] {
        println!("power ({mode:?}): {:.2} W", power_estimate(&tau, &qd, mode).unwrap().unwrap());
    }
    let forces: Vec<_> = records.iter().map(|r| r.normal_forces).collect();
    let stats = force_stats(&contacts, &forces).unwrap();
    println!("stance force, pooled: {:?}", stats.stance_pooled);
}
