//! Short PPO run on a small network, printing the metrics rows.
//!
//! `cargo run --release --example train_small -- [total_steps]`

use bgap::config::RunConfig;
use bgap::ppo::Trainer;

fn main() {
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20_000);
    let mut cfg = RunConfig::default();
    cfg.ppo.num_envs = 8;
    cfg.ppo.hidden = vec![64, 64];
    cfg.ppo.total_steps = steps;
    let mut t = Trainer::new(cfg.train_config()).expect("valid config");
    println!("{:>9} {:>9} {:>9} {:>7} {:>8} {:>8}", "step", "return", "no-gait", "length", "entropy", "kl");
    while !t.is_finished() {
        let r = t.step().expect("update");
        println!(
            "{:>9} {:>9.2} {:>9.2} {:>7.1} {:>8.3} {:>8.5}",
            r.global_step, r.mean_return, r.mean_return_no_gait_terms, r.episode_length, r.entropy, r.approx_kl
        );
    }
}
