//! Zero action on rigid ground and on an oscillating bridge.

use bgap::env::{Env, EnvConfig, EvalScene, Scene, ACT_DIM};

fn run(label: &str, mut env: Env) {
    env.reset();
    let mut min_h = f64::INFINITY;
    let mut max_h = f64::NEG_INFINITY;
    let mut steps = 0;
    for _ in 0..500 {
        let r = env.step(&[0.0; ACT_DIM]).expect("finite state");
        let h = env.trunk().position.z - r.info.surface_height;
        min_h = min_h.min(h);
        max_h = max_h.max(h);
        steps += 1;
        if r.done {
            println!("{label}: ended after {steps} steps ({:?})", r.info.reason);
            break;
        }
    }
    println!("{label}: {steps} steps, height above surface in [{min_h:.4}, {max_h:.4}] m");
}

fn main() {
    let cfg = EnvConfig::default().deterministic();
    run("rigid ground", Env::new(cfg.clone(), Scene::Training, 0, 0).unwrap());

    let mut scene = EvalScene::pass(2.0, 0.05, 0.0);
    scene.start_x = 5.0;
    run("bridge 2 Hz, 5 cm", Env::new(cfg, Scene::Evaluation(scene), 0, 0).unwrap());
}
