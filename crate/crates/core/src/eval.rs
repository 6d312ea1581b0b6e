//! Running controllers in evaluation scenes: single episodes with optional
//! trajectory logging, batches of passes and return-versus-speed sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{MeanStd, TrajectoryRecord};
use crate::env::{Env, EnvConfig, EvalScene, Observation, Scene, TerminationReason, ACT_DIM};
use crate::error::Result;
use crate::ppo::train::obs_matrix;
use crate::ppo::ActorCritic;
use crate::quadruped::JointVec;

/// Maps observations to normalized actions.
pub trait Controller {
    fn act(&mut self, obs: &Observation) -> JointVec;
}

/// Deterministic policy: the Gaussian mean.
#[derive(Debug, Clone)]
pub struct PolicyController {
    pub params: ActorCritic<f32>,
}

impl Controller for PolicyController {
    fn act(&mut self, obs: &Observation) -> JointVec {
        let (mean, _) = self.params.policy_forward(obs_matrix::<f32>(std::slice::from_ref(obs)).view());
        std::array::from_fn(|j| mean[[0, j]] as f64)
    }
}

/// Holds the nominal pose.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroController;

impl Controller for ZeroController {
    fn act(&mut self, _obs: &Observation) -> JointVec {
        [0.0; ACT_DIM]
    }
}

/// Uniform actions in [-1, 1].
#[derive(Debug, Clone)]
pub struct RandomController {
    rng: ChaCha8Rng,
}

impl RandomController {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Controller for RandomController {
    fn act(&mut self, _obs: &Observation) -> JointVec {
        std::array::from_fn(|_| self.rng.random_range(-1.0..=1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub total_return: f64,
    pub return_no_gait_terms: f64,
    pub steps: u64,
    pub reason: Option<TerminationReason>,
    /// Mean |forward body velocity − commanded vx| over the episode.
    pub mean_abs_vx_error: f64,
    /// Filled only when logging was requested.
    pub records: Vec<TrajectoryRecord>,
}

/// Runs one episode from a fresh reset. `log_as` tags logged records with an
/// episode number; `None` skips logging.
pub fn run_episode(env: &mut Env, ctrl: &mut dyn Controller, log_as: Option<u32>) -> Result<EpisodeOutcome> {
    let mut obs = env.reset();
    let mut out = EpisodeOutcome {
        total_return: 0.0,
        return_no_gait_terms: 0.0,
        steps: 0,
        reason: None,
        mean_abs_vx_error: 0.0,
        records: Vec::new(),
    };
    let mut err_sum = 0.0;
    loop {
        let action = ctrl.act(&obs);
        let r = env.step(&action)?;
        out.steps += 1;
        out.total_return += r.reward.total;
        out.return_no_gait_terms += r.reward.total_without_gait_terms();
        err_sum += (env.trunk().body_linear_velocity().x - r.info.command.vx).abs();
        if let Some(ep) = log_as {
            out.records
                .push(TrajectoryRecord::from_step(ep, &r, env.trunk(), env.joints(), &action));
        }
        obs = r.observation;
        if r.done {
            out.reason = r.info.reason;
            break;
        }
    }
    out.mean_abs_vx_error = err_sum / out.steps as f64;
    Ok(out)
}

/// `episodes` passes in `scene`, each with its own random stream.
pub fn evaluate(
    cfg: &EnvConfig,
    scene: EvalScene,
    ctrl: &mut dyn Controller,
    episodes: usize,
    seed: u64,
    log: bool,
) -> Result<Vec<EpisodeOutcome>> {
    let mut out = Vec::with_capacity(episodes);
    for ep in 0..episodes {
        let mut env = Env::new(cfg.clone(), Scene::Evaluation(scene), seed, 2 * ep as u64)?;
        out.push(run_episode(&mut env, ctrl, log.then_some(ep as u32))?);
    }
    Ok(out)
}

/// One (speed, bridge setting) cell of a return sweep.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub vx: f64,
    pub frequency: f64,
    pub amplitude: f64,
    pub episodes: usize,
    /// Mean return without the gait-specific terms.
    pub mean_return: f64,
    pub stderr: f64,
    pub mean_length: f64,
}

/// Mean return (gait terms excluded) per commanded speed and bridge
/// setting with the scripted operator. Zero episodes yields no rows.
pub fn return_sweep(
    cfg: &EnvConfig,
    ctrl: &mut dyn Controller,
    velocities: &[f64],
    settings: &[(f64, f64)],
    episodes: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    if episodes == 0 {
        return Ok(rows);
    }
    for &(frequency, amplitude) in settings {
        for &vx in velocities {
            let scene = EvalScene::pass(frequency, amplitude, vx);
            let eps = evaluate(cfg, scene, ctrl, episodes, seed, false)?;
            let stats = MeanStd::of(eps.iter().map(|e| e.return_no_gait_terms)).expect("non-empty");
            rows.push(SweepRow {
                vx,
                frequency,
                amplitude,
                episodes,
                mean_return: stats.mean,
                stderr: stats.stderr(),
                mean_length: eps.iter().map(|e| e.steps as f64).sum::<f64>() / episodes as f64,
            });
        }
    }
    Ok(rows)
}

/// Parses `start:stop:step` (inclusive, tolerant to rounding).
pub fn parse_range(spec: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, s] = parts.as_slice() else {
        return Err(format!("expected start:stop:step, got `{spec}`"));
    };
    let p = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("`{x}` is not a number"));
    let (a, b, s) = (p(a)?, p(b)?, p(s)?);
    if !(s > 0.0) || b < a {
        return Err(format!("range `{spec}` needs step > 0 and stop ≥ start"));
    }
    let n = ((b - a) / s + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| a + i as f64 * s).map(|x| (x * 1e9).round() / 1e9).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        let v = parse_range("0.1:1.0:0.1").unwrap();
        assert_eq!(v.len(), 10);
        assert_eq!(v[9], 1.0);
        assert!(parse_range("1:0:0.1").is_err());
        assert!(parse_range("1:2").is_err());
    }

    #[test]
    fn zero_controller_stands_on_idle_bridge() {
        let cfg = EnvConfig::default().deterministic();
        let scene = EvalScene::pass(2.0, 0.0, 0.0);
        let eps = evaluate(&cfg, scene, &mut ZeroController, 1, 3, true).unwrap();
        assert_eq!(eps[0].reason, Some(TerminationReason::TimeLimit));
        assert_eq!(eps[0].records.len() as u64, eps[0].steps);
    }

    #[test]
    fn sweep_shapes() {
        let cfg = EnvConfig::default().deterministic();
        assert!(return_sweep(&cfg, &mut ZeroController, &[0.5], &[(2.0, 0.05)], 0, 1)
            .unwrap()
            .is_empty());
        let mut rc = RandomController::new(1);
        let rows = return_sweep(&cfg, &mut rc, &[0.3, 0.6], &[(2.0, 0.0)], 2, 1).unwrap();
        assert_eq!(rows.len(), 2);
        let mut rc = RandomController::new(1);
        let again = return_sweep(&cfg, &mut rc, &[0.3, 0.6], &[(2.0, 0.0)], 2, 1).unwrap();
        assert_eq!(rows, again);
    }
}
