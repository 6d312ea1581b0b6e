//! Checkpoint bytes: write, read back, and restore a policy and RNG state.

use bgap::checkpoint::Checkpoint;
use bgap::config::RunConfig;
use bgap::ppo::train::policy_from_checkpoint;
use bgap::ppo::Trainer;

fn main() {
    let mut cfg = RunConfig::default();
    cfg.ppo.num_envs = 2;
    cfg.ppo.hidden = vec![32];
    cfg.ppo.total_steps = 256;
    let text = cfg.to_toml().unwrap();
    let mut t = Trainer::new(cfg.train_config()).unwrap();
    while !t.is_finished() {
        t.step().unwrap();
    }

    let ckpt = t.checkpoint(&text);
    let bytes = ckpt.to_bytes();
    println!("{} bytes, step {}, {} tensors", bytes.len(), ckpt.global_step, ckpt.tensors.len());
    for tensor in &ckpt.tensors {
        println!("  {:<24} {:?}", tensor.name, tensor.shape);
    }

    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back.to_bytes(), bytes);
    let policy = policy_from_checkpoint(&back).unwrap();
    println!("restored policy equals trained one: {}", &policy == t.params());
    println!("embedded config parses: {}", RunConfig::parse(&back.config_text).is_ok());
}
