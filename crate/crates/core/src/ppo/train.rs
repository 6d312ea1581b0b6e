//! Training loop: rollouts over a [`VecEnv`], PPO updates, metrics and
//! checkpoints.

use std::collections::VecDeque;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::nn::{Adam, Real};
use super::{ppo_update, ActorCritic, PpoHyper, RolloutBatch, UpdateStats};
use crate::checkpoint::{Checkpoint, RngState, Tensor};
use crate::env::{EnvConfig, Observation, Scene, VecEnv, ACT_DIM, OBS_DIM};
use crate::error::{CheckpointError, Error, Result};
use crate::quadruped::JointVec;
use crate::rewards::curriculum_scale;

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainConfig {
    pub env: EnvConfig,
    pub ppo: PpoHyper,
    pub seed: u64,
}

/// One metrics CSV row, written after every update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub global_step: u64,
    /// Means over the last 100 completed episodes (NaN before the first).
    pub mean_return: f64,
    pub mean_return_no_gait_terms: f64,
    pub episode_length: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub lr: f64,
    pub curriculum_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub total_return: f64,
    pub return_no_gait_terms: f64,
    pub length: u64,
}

const RECENT_EPISODES: usize = 100;

pub fn obs_matrix<T: Real>(obs: &[Observation]) -> Array2<T> {
    Array2::from_shape_fn((obs.len(), OBS_DIM), |(i, j)| T::of(obs[i].0[j]))
}

fn env_seed(seed: u64, global_step: u64) -> u64 {
    seed ^ global_step.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub struct Trainer {
    cfg: TrainConfig,
    params: ActorCritic<f32>,
    adam: Adam<f32>,
    rng: ChaCha8Rng,
    envs: VecEnv,
    obs: Vec<Observation>,
    global_step: u64,
    updates: u64,
    aborted_updates: u64,
    running: Vec<EpisodeSummary>,
    recent: VecDeque<EpisodeSummary>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.ppo.validate()?;
        cfg.env.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        let params = ActorCritic::new(OBS_DIM, ACT_DIM, &cfg.ppo.hidden, cfg.ppo.init_log_std, &mut rng);
        Self::assemble(cfg, params, rng, 0, None)
    }

    fn assemble(
        cfg: TrainConfig,
        params: ActorCritic<f32>,
        rng: ChaCha8Rng,
        global_step: u64,
        adam: Option<Adam<f32>>,
    ) -> Result<Self> {
        let n = cfg.ppo.num_envs;
        let mut envs = VecEnv::new(&cfg.env, Scene::Training, n, env_seed(cfg.seed, global_step))?
            .with_workers(cfg.ppo.workers);
        let obs = envs.observations();
        let shapes: Vec<usize> = params.slices().iter().map(|s| s.len()).collect();
        let adam = adam.unwrap_or_else(|| Adam::new(&shapes, cfg.ppo.adam_eps));
        let updates = global_step / cfg.ppo.batch_size() as u64;
        let empty = EpisodeSummary {
            total_return: 0.0,
            return_no_gait_terms: 0.0,
            length: 0,
        };
        Ok(Self {
            params,
            adam,
            rng,
            envs,
            obs,
            global_step,
            updates,
            aborted_updates: 0,
            running: vec![empty; n],
            recent: VecDeque::with_capacity(RECENT_EPISODES),
            cfg,
        })
    }

    /// Resumes from a checkpoint written by [`Trainer::checkpoint`].
    pub fn from_checkpoint(cfg: TrainConfig, ckpt: &Checkpoint) -> Result<Self> {
        cfg.ppo.validate()?;
        cfg.env.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params: ActorCritic<f32> =
            ActorCritic::new(OBS_DIM, ACT_DIM, &cfg.ppo.hidden, cfg.ppo.init_log_std, &mut rng);
        let layout = params_layout(&params);
        load_tensors(&mut params.slices_mut(), &layout, "", ckpt)?;
        let shapes: Vec<usize> = params.slices().iter().map(|s| s.len()).collect();
        let mut adam = Adam::new(&shapes, cfg.ppo.adam_eps);
        {
            let m: Vec<&mut [f32]> = adam.m.iter_mut().map(|v| v.as_mut_slice()).collect();
            load_tensors(&mut { m }, &layout, "adam.m.", ckpt)?;
            let v: Vec<&mut [f32]> = adam.v.iter_mut().map(|v| v.as_mut_slice()).collect();
            load_tensors(&mut { v }, &layout, "adam.v.", ckpt)?;
        }
        let updates = ckpt.global_step / cfg.ppo.batch_size() as u64;
        adam.step = updates * (cfg.ppo.epochs * cfg.ppo.minibatches) as u64;
        Self::assemble(cfg, params, ckpt.rng.restore(), ckpt.global_step, Some(adam))
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ActorCritic<f32> {
        &self.params
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn aborted_updates(&self) -> u64 {
        self.aborted_updates
    }

    pub fn recent_episodes(&self) -> impl Iterator<Item = &EpisodeSummary> {
        self.recent.iter()
    }

    pub fn is_finished(&self) -> bool {
        self.global_step >= self.cfg.ppo.total_steps
    }

    pub fn curriculum_scale(&self) -> f64 {
        curriculum_scale(
            self.global_step,
            self.cfg.ppo.total_steps,
            self.cfg.env.rewards.curriculum_fraction,
        )
    }

    pub fn collect_rollout(&mut self) -> Result<RolloutBatch<f32>> {
        let n = self.envs.len();
        let len = self.cfg.ppo.rollout_len;
        let gamma = self.cfg.ppo.gamma;
        let mut batch = RolloutBatch {
            num_envs: n,
            len,
            obs: Array2::zeros((n * len, OBS_DIM)),
            actions: Array2::zeros((n * len, ACT_DIM)),
            log_probs: ndarray::Array1::zeros(n * len),
            values: ndarray::Array1::zeros(n * len),
            rewards: vec![0.0; n * len],
            dones: vec![false; n * len],
            bootstrap: vec![0.0; n],
        };
        self.envs.set_curriculum_scale(self.curriculum_scale());
        for t in 0..len {
            let obs = obs_matrix::<f32>(&self.obs);
            let (actions, log_probs) = self.params.sample_actions(obs.view(), &mut self.rng);
            let values = self.params.values(obs.view());
            let env_actions: Vec<JointVec> = actions
                .rows()
                .into_iter()
                .map(|r| std::array::from_fn(|j| r[j] as f64))
                .collect();
            let steps = self.envs.step(&env_actions)?;

            let truncated: Vec<usize> = (0..n)
                .filter(|&e| steps[e].final_observation.is_some() && steps[e].result.truncated())
                .collect();
            let mut final_values = vec![0.0; n];
            if !truncated.is_empty() {
                let finals: Vec<Observation> = truncated
                    .iter()
                    .map(|&e| steps[e].final_observation.expect("truncated step keeps its final state"))
                    .collect();
                let v = self.params.values(obs_matrix::<f32>(&finals).view());
                for (k, &e) in truncated.iter().enumerate() {
                    final_values[e] = v[k] as f64;
                }
            }

            for (e, s) in steps.iter().enumerate() {
                let row = e * len + t;
                batch.obs.row_mut(row).assign(&obs.row(e));
                batch.actions.row_mut(row).assign(&actions.row(e));
                batch.log_probs[row] = log_probs[e];
                batch.values[row] = values[e];
                let r = &s.result.reward;
                let learn = if self.cfg.ppo.only_positive_rewards {
                    r.total.max(0.0)
                } else {
                    r.total
                };
                batch.rewards[row] = learn + gamma * final_values[e];
                batch.dones[row] = s.result.done;

                let ep = &mut self.running[e];
                ep.total_return += r.total;
                ep.return_no_gait_terms += r.total_without_gait_terms();
                ep.length += 1;
                if s.result.done {
                    if self.recent.len() == RECENT_EPISODES {
                        self.recent.pop_front();
                    }
                    self.recent.push_back(*ep);
                    *ep = EpisodeSummary {
                        total_return: 0.0,
                        return_no_gait_terms: 0.0,
                        length: 0,
                    };
                }
                self.obs[e] = s.result.observation;
            }
        }
        let v = self.params.values(obs_matrix::<f32>(&self.obs).view());
        for e in 0..n {
            batch.bootstrap[e] = v[e] as f64;
        }
        self.global_step += (n * len) as u64;
        Ok(batch)
    }

    /// One rollout followed by one PPO update.
    pub fn step(&mut self) -> Result<MetricsRow> {
        let lr = self.cfg.ppo.lr_at(self.global_step);
        let scale = self.curriculum_scale();
        let batch = self.collect_rollout()?;
        let stats: UpdateStats =
            ppo_update(&mut self.params, &mut self.adam, &batch, &self.cfg.ppo, lr, &mut self.rng)?;
        if stats.aborted {
            self.aborted_updates += 1;
            eprintln!(
                "warning: non-finite loss at step {}, update skipped",
                self.global_step
            );
        }
        self.updates += 1;
        let k = self.recent.len() as f64;
        let mean = |f: fn(&EpisodeSummary) -> f64| {
            if k == 0.0 {
                f64::NAN
            } else {
                self.recent.iter().map(f).sum::<f64>() / k
            }
        };
        Ok(MetricsRow {
            global_step: self.global_step,
            mean_return: mean(|e| e.total_return),
            mean_return_no_gait_terms: mean(|e| e.return_no_gait_terms),
            episode_length: mean(|e| e.length as f64),
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
            approx_kl: stats.approx_kl,
            lr,
            curriculum_scale: scale,
        })
    }

    pub fn checkpoint(&self, config_text: &str) -> Checkpoint {
        let layout = params_layout(&self.params);
        let mut tensors = Vec::new();
        for ((name, shape), data) in layout.iter().zip(self.params.slices()) {
            tensors.push(Tensor {
                name: name.clone(),
                shape: shape.clone(),
                data: data.to_vec(),
            });
        }
        for (prefix, moments) in [("adam.m.", &self.adam.m), ("adam.v.", &self.adam.v)] {
            for ((name, shape), data) in layout.iter().zip(moments.iter()) {
                tensors.push(Tensor {
                    name: format!("{prefix}{name}"),
                    shape: shape.clone(),
                    data: data.clone(),
                });
            }
        }
        Checkpoint {
            config_text: config_text.to_string(),
            global_step: self.global_step,
            rng: RngState::capture(&self.rng),
            tensors,
        }
    }
}

fn params_layout(p: &ActorCritic<f32>) -> Vec<(String, Vec<usize>)> {
    p.tensor_layout()
}

fn load_tensors(
    dst: &mut [&mut [f32]],
    layout: &[(String, Vec<usize>)],
    prefix: &str,
    ckpt: &Checkpoint,
) -> Result<(), CheckpointError> {
    for (d, (name, shape)) in dst.iter_mut().zip(layout) {
        let src = ckpt.expect(&format!("{prefix}{name}"), shape)?;
        d.copy_from_slice(src);
    }
    Ok(())
}

/// Rebuilds the actor-critic stored in a checkpoint, inferring hidden sizes
/// from the tensor shapes.
pub fn policy_from_checkpoint(ckpt: &Checkpoint) -> Result<ActorCritic<f32>, CheckpointError> {
    let mut hidden = Vec::new();
    let mut l = 0;
    while let Ok(t) = ckpt.tensor(&format!("policy.{l}.weight")) {
        if t.shape.len() != 2 {
            return Err(CheckpointError::Malformed(format!("policy.{l}.weight is not a matrix")));
        }
        if l == 0 && t.shape[0] != OBS_DIM {
            return Err(CheckpointError::Shape {
                name: t.name.clone(),
                found: t.shape.clone(),
                expected: vec![OBS_DIM, t.shape[1]],
            });
        }
        hidden.push(t.shape[1]);
        l += 1;
    }
    if hidden.pop().is_none() {
        return Err(CheckpointError::MissingTensor("policy.0.weight".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut p: ActorCritic<f32> = ActorCritic::new(OBS_DIM, ACT_DIM, &hidden, -1.0, &mut rng);
    let layout = p.tensor_layout();
    load_tensors(&mut p.slices_mut(), &layout, "", ckpt)?;
    Ok(p)
}

/// Files produced by [`run_training`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutputs {
    pub metrics: PathBuf,
    pub checkpoints: Vec<PathBuf>,
    pub latest: PathBuf,
    pub rows: Vec<MetricsRow>,
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const LATEST_CHECKPOINT: &str = "latest.bgap";

pub fn checkpoint_name(step: u64) -> String {
    format!("ckpt_{step:012}.bgap")
}

/// Trains to `total_steps`, writing `metrics.csv`, periodic checkpoints and
/// `latest.bgap` into `out_dir`. Resumes from `latest.bgap` when `resume`
/// is set and the file exists.
pub fn run_training(cfg: TrainConfig, config_text: &str, out_dir: &Path, resume: bool) -> Result<TrainOutputs> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let latest = out_dir.join(LATEST_CHECKPOINT);
    let metrics = out_dir.join(METRICS_FILE);
    let mut trainer = if resume && latest.exists() {
        Trainer::from_checkpoint(cfg, &Checkpoint::load(&latest)?)?
    } else {
        Trainer::new(cfg)?
    };
    let fresh = trainer.global_step() == 0;
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(!fresh)
        .truncate(fresh)
        .open(&metrics)
        .map_err(|e| Error::io(&metrics, e))?;
    let mut writer = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);

    let mut checkpoints = Vec::new();
    let save = |t: &Trainer, checkpoints: &mut Vec<PathBuf>| -> Result<()> {
        let c = t.checkpoint(config_text);
        let p = out_dir.join(checkpoint_name(t.global_step()));
        c.save(&p)?;
        c.save(&latest)?;
        checkpoints.push(p);
        Ok(())
    };
    if fresh {
        save(&trainer, &mut checkpoints)?;
        if trainer.is_finished() {
            // Header only, so the file is still a valid table.
            writer.write_record(METRICS_HEADER)?;
        }
    }
    let every = trainer.config().ppo.checkpoint_every;
    let mut rows = Vec::new();
    while !trainer.is_finished() {
        let row = trainer.step()?;
        writer.serialize(row)?;
        writer.flush().map_err(|e| Error::io(&metrics, e))?;
        rows.push(row);
        if trainer.is_finished() || (every > 0 && trainer.updates() % every == 0) {
            save(&trainer, &mut checkpoints)?;
        }
    }
    writer.flush().map_err(|e| Error::io(&metrics, e))?;
    let mut f = writer.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    f.flush().map_err(|e| Error::io(&metrics, e))?;
    Ok(TrainOutputs {
        metrics,
        checkpoints,
        latest,
        rows,
    })
}

pub const METRICS_HEADER: [&str; 11] = [
    "global_step",
    "mean_return",
    "mean_return_no_gait_terms",
    "episode_length",
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "approx_kl",
    "lr",
    "curriculum_scale",
];

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}
