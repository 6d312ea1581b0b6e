//! Command-line front end: `train`, `matrix`, `eval` and `analyze`.
//!
//! Exit codes: 0 ok, 2 usage or configuration error, 3 data or shape error,
//! 4 simulation divergence. Wall-clock timestamps only ever go to the
//! `run.log` sidecar so that all other outputs are reproducible.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    contacts_of, dominant_frequency, footfall_intervals, force_stats, interval_rate, load_trajectory,
    phase_percentages, phase_shift, power_estimate, sample_interval, save_trajectory, split_episodes,
    step_frequency, times_of, ForceStats, MeanStd, PhasePercentages, PowerMode, TrajectoryRecord,
};
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::env::{Command, EvalScene};
use crate::error::{Error, Result};
use crate::eval::{evaluate, parse_range, return_sweep, EpisodeOutcome, PolicyController};
use crate::ppo::train::{policy_from_checkpoint, run_training, LATEST_CHECKPOINT};
use crate::rewards::{GaitSpec, HeightStyle};
use crate::simcore::Foot;

/// Environment variable consulted when `--seed` is absent.
pub const SEED_ENV: &str = "BGAP_SEED";
pub const RUN_LOG: &str = "run.log";
pub const CONFIG_SNAPSHOT: &str = "config.toml";
pub const MANIFEST: &str = "manifest.csv";

#[derive(Debug, Parser)]
#[command(name = "bgap", version, about = "Quadruped gaits on an oscillating bridge")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Train one policy.
    Train(TrainArgs),
    /// Train every gait × style cell in sequence.
    Matrix(MatrixArgs),
    /// Run evaluation passes over the finite bridge.
    Eval(EvalArgs),
    /// Analyse logged trajectories.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gait: Option<GaitSpec>,
    #[arg(long)]
    pub style: Option<HeightStyle>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub total_steps: Option<u64>,
    /// Continue from `latest.bgap` in the output directory if present.
    #[arg(long)]
    pub resume: bool,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub total_steps: Option<u64>,
    /// Add the pronk gait as a sixth row.
    #[arg(long)]
    pub include_pronk: bool,
    /// Cells trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long = "freq")]
    pub frequency: Option<f64>,
    #[arg(long = "amp")]
    pub amplitude: Option<f64>,
    #[arg(long)]
    pub vx: Option<f64>,
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Trajectory CSV covering every episode.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Steer with the scripted operator instead of a fixed command.
    #[arg(long)]
    pub scripted_operator: bool,
    /// Speed sweep, `vx=start:stop:step`.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Results table; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnalyzeKind {
    Footfall,
    Phases,
    Com,
    PhaseShift,
    Forces,
    Power,
    Returns,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PowerArg {
    Abs,
    Positive,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(value_enum)]
    pub kind: AnalyzeKind,
    #[arg(long, num_args = 1.., required = true)]
    pub traj: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Bridge frequency for `phase-shift`; estimated from the log when absent.
    #[arg(long)]
    pub frequency: Option<f64>,
    #[arg(long, value_enum, default_value_t = PowerArg::Abs)]
    pub power_mode: PowerArg,
    /// Also write SVG plots where available.
    #[arg(long)]
    pub svg: bool,
}

/// Parses `args` and runs the command. Help and version requests print and
/// return `Ok`.
pub fn run<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(Error::Usage(e.to_string()));
        }
    };
    match cli.command {
        Cmd::Train(a) => cmd_train(&a).map(|_| ()),
        Cmd::Matrix(a) => cmd_matrix(&a).map(|_| ()),
        Cmd::Eval(a) => cmd_eval(&a),
        Cmd::Analyze(a) => cmd_analyze(&a),
    }
}

/// `--seed`, else `BGAP_SEED`, else the config value.
pub fn resolve_seed(flag: Option<u64>, config: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(config),
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn unix_time() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn append_run_log(dir: &Path, line: &str) -> Result<()> {
    use std::io::Write;
    let path = dir.join(RUN_LOG);
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(|e| Error::io(&path, e))?;
    writeln!(f, "{} {line}", unix_time()).map_err(|e| Error::io(&path, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Trains one cell; returns the output directory.
pub fn cmd_train(a: &TrainArgs) -> Result<PathBuf> {
    let mut cfg = load_config(a.config.as_deref())?;
    if let Some(g) = a.gait {
        cfg.env.gait = g;
    }
    if let Some(s) = a.style {
        cfg.env.style = s;
    }
    if let Some(n) = a.total_steps {
        cfg.ppo.total_steps = n;
    }
    if let Some(o) = &a.out {
        cfg.out_dir = o.clone();
    }
    cfg.seed = resolve_seed(a.seed, cfg.seed)?;
    cfg.validate()?;
    train_cell(&cfg, a.resume)?;
    Ok(cfg.out_dir)
}

fn train_cell(cfg: &RunConfig, resume: bool) -> Result<()> {
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let text = cfg.to_toml()?;
    write_file(&out.join(CONFIG_SNAPSHOT), &text)?;
    append_run_log(
        out,
        &format!(
            "train start gait={} style={} seed={} total_steps={}",
            cfg.env.gait, cfg.env.style, cfg.seed, cfg.ppo.total_steps
        ),
    )?;
    let res = run_training(cfg.train_config(), &text, out, resume);
    match &res {
        Ok(o) => append_run_log(out, &format!("train done rows={}", o.rows.len()))?,
        Err(e) => append_run_log(out, &format!("train failed: {e}"))?,
    }
    res.map(|_| ())
}

/// The gait × style cells of the matrix in launch order.
pub fn matrix_cells(include_pronk: bool) -> Vec<(GaitSpec, HeightStyle)> {
    let gaits: Vec<GaitSpec> = if include_pronk {
        GaitSpec::ALL.to_vec()
    } else {
        GaitSpec::MATRIX.to_vec()
    };
    gaits
        .into_iter()
        .flat_map(|g| HeightStyle::ALL.map(|s| (g, s)))
        .collect()
}

fn cell_complete(dir: &Path, total_steps: u64) -> bool {
    Checkpoint::load(&dir.join(LATEST_CHECKPOINT))
        .map(|c| c.global_step >= total_steps)
        .unwrap_or(false)
}

/// Trains all cells, skipping finished ones; returns the manifest path.
pub fn cmd_matrix(a: &MatrixArgs) -> Result<PathBuf> {
    let mut base = load_config(a.config.as_deref())?;
    if let Some(n) = a.total_steps {
        base.ppo.total_steps = n;
    }
    base.seed = resolve_seed(a.seed, base.seed)?;
    base.validate()?;
    if a.jobs == 0 {
        return Err(Error::Usage("--jobs must be at least 1".into()));
    }
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let cells: Vec<RunConfig> = matrix_cells(a.include_pronk)
        .into_iter()
        .enumerate()
        .map(|(i, (g, s))| {
            let mut c = base.clone();
            c.env.gait = g;
            c.env.style = s;
            c.seed = base.seed.wrapping_add(i as u64);
            c.out_dir = a.out.join(format!("{g}_{s}"));
            c
        })
        .collect();
    append_run_log(&a.out, &format!("matrix start cells={} jobs={}", cells.len(), a.jobs))?;

    let next = AtomicUsize::new(0);
    let status: Mutex<Vec<Option<&'static str>>> = Mutex::new(vec![None; cells.len()]);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::SeqCst);
        let Some(cell) = cells.get(i) else { break };
        let st = if cell_complete(&cell.out_dir, cell.ppo.total_steps) {
            Ok("skipped")
        } else {
            train_cell(cell, true).map(|_| "trained")
        };
        match st {
            Ok(s) => status.lock().expect("status lock")[i] = Some(s),
            Err(e) => {
                status.lock().expect("status lock")[i] = Some("failed");
                first_error.lock().expect("error lock").get_or_insert(e);
            }
        }
    };
    std::thread::scope(|scope| {
        for _ in 1..a.jobs.min(cells.len()) {
            scope.spawn(worker);
        }
        worker();
    });

    let status = status.into_inner().expect("status lock");
    let mut text = String::from("gait,style,seed,dir,status\n");
    for (c, s) in cells.iter().zip(&status) {
        let dir = c.out_dir.file_name().map(|d| d.to_string_lossy().into_owned()).unwrap_or_default();
        let _ = writeln!(text, "{},{},{},{},{}", c.env.gait, c.env.style, c.seed, dir, s.unwrap_or("pending"));
    }
    let manifest = a.out.join(MANIFEST);
    write_file(&manifest, &text)?;
    append_run_log(&a.out, "matrix done")?;
    match first_error.into_inner().expect("error lock") {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

fn format_f64(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let cfg = if ckpt.config_text.trim().is_empty() {
        RunConfig::default()
    } else {
        RunConfig::parse(&ckpt.config_text)?
    };
    let params = policy_from_checkpoint(&ckpt)?;
    let mut ctrl = PolicyController { params };
    let seed = resolve_seed(a.seed, cfg.seed)?;
    let frequency = a.frequency.unwrap_or(cfg.eval.frequency);
    let amplitude = a.amplitude.unwrap_or(cfg.eval.amplitude);
    let episodes = a.episodes.unwrap_or(cfg.eval.episodes);
    if !(frequency > 0.0) || !(amplitude >= 0.0) {
        return Err(Error::Usage("--freq must be positive and --amp non-negative".into()));
    }

    let text = if let Some(spec) = &a.sweep {
        let range = spec
            .strip_prefix("vx=")
            .ok_or_else(|| Error::Usage(format!("--sweep expects vx=start:stop:step, got `{spec}`")))?;
        let velocities = parse_range(range).map_err(Error::Usage)?;
        let rows = return_sweep(&cfg.env, &mut ctrl, &velocities, &[(frequency, amplitude)], episodes, seed)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &rows {
            w.serialize(r)?;
        }
        if rows.is_empty() {
            w.write_record(["vx", "frequency", "amplitude", "episodes", "mean_return", "stderr", "mean_length"])?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Data(e.to_string()))?)
            .map_err(|e| Error::Data(e.to_string()))?
    } else {
        let vx = a.vx.unwrap_or(cfg.eval.vx);
        let mut scene = EvalScene::pass(frequency, amplitude, vx);
        if !a.scripted_operator {
            scene.operator = None;
            scene.command = Command::new(vx, 0.0, 0.0).clamped();
        }
        let eps = evaluate(&cfg.env, scene, &mut ctrl, episodes, seed, a.log.is_some())?;
        if let Some(log) = &a.log {
            let all: Vec<TrajectoryRecord> = eps.iter().flat_map(|e| e.records.iter().cloned()).collect();
            if let Some(dir) = log.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            save_trajectory(log, &all)?;
        }
        episode_table(&eps)
    };
    match &a.out {
        Some(p) => write_file(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn episode_table(eps: &[EpisodeOutcome]) -> String {
    let mut t = String::from("episode,steps,return,return_no_gait_terms,mean_abs_vx_error,end\n");
    for (i, e) in eps.iter().enumerate() {
        let _ = writeln!(
            t,
            "{i},{},{},{},{},{}",
            e.steps,
            e.total_return,
            e.return_no_gait_terms,
            e.mean_abs_vx_error,
            e.reason.map(|r| r.name()).unwrap_or("")
        );
    }
    t
}

struct Log {
    name: String,
    records: Vec<TrajectoryRecord>,
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<()> {
    let logs = a
        .traj
        .iter()
        .map(|p| {
            Ok(Log {
                name: p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                records: load_trajectory(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let out = |name: &str| a.out.join(name);
    match a.kind {
        AnalyzeKind::Footfall => {
            let mut iv = String::from("file,episode,foot,touchdown,liftoff\n");
            let mut series = String::from("file,episode,time,FL,FR,RL,RR\n");
            let mut freq = String::from("file,episode,step_frequency_hz,FL_rate,FR_rate,RL_rate,RR_rate\n");
            for log in &logs {
                for ep in split_episodes(&log.records) {
                    let id = ep[0].episode;
                    let (times, g) = (times_of(ep), contacts_of(ep));
                    let runs = footfall_intervals(&times, &g, sample_interval(ep))?;
                    for (foot, r) in Foot::ALL.iter().zip(&runs) {
                        for (td, lo) in r {
                            let _ = writeln!(iv, "{},{id},{},{td},{lo}", log.name, foot.label());
                        }
                    }
                    for r in ep {
                        let c = r.contacts.map(u8::from);
                        let _ = writeln!(series, "{},{id},{},{},{},{},{}", log.name, r.time, c[0], c[1], c[2], c[3]);
                    }
                    let rates = runs.each_ref().map(|r| interval_rate(r));
                    let _ = writeln!(
                        freq,
                        "{},{id},{},{},{},{},{}",
                        log.name,
                        step_frequency(&times, &g)?,
                        rates[0],
                        rates[1],
                        rates[2],
                        rates[3]
                    );
                    if a.svg {
                        write_file(&out(&format!("footfall_{}_{id}.svg", stem(&log.name))), &footfall_svg(&runs, &times))?;
                    }
                }
            }
            write_file(&out("footfall_intervals.csv"), &iv)?;
            write_file(&out("footfall_series.csv"), &series)?;
            write_file(&out("step_frequency.csv"), &freq)
        }
        AnalyzeKind::Phases => {
            let mut t = format!("file,episode,steps,{}\n", PhasePercentages::COLUMNS.join(","));
            for log in &logs {
                for ep in split_episodes(&log.records) {
                    if let Some(p) = phase_percentages(&contacts_of(ep)) {
                        let vals: Vec<String> = p.values().iter().map(|v| v.to_string()).collect();
                        let _ = writeln!(t, "{},{},{},{}", log.name, ep[0].episode, ep.len(), vals.join(","));
                    }
                }
            }
            write_file(&out("phases.csv"), &t)?;
            write_file(
                &out("phases_notes.txt"),
                "The `default` column counts steps where neither both front nor both rear feet are airborne.\n\
                 This definition is inferred from the default-gait penalty, not taken from a published table.\n",
            )
        }
        AnalyzeKind::Com => {
            let mut t = String::from("file,episode,time,com_x,com_z,bridge_z,surface_height\n");
            for log in &logs {
                for r in &log.records {
                    let _ = writeln!(
                        t,
                        "{},{},{},{},{},{},{}",
                        log.name, r.episode, r.time, r.com[0], r.com[2], r.bridge_z, r.surface_height
                    );
                }
                if a.svg {
                    for ep in split_episodes(&log.records) {
                        write_file(&out(&format!("com_{}_{}.svg", stem(&log.name), ep[0].episode)), &com_svg(ep))?;
                    }
                }
            }
            write_file(&out("com.csv"), &t)
        }
        AnalyzeKind::PhaseShift => {
            let mut t = String::from("file,episode,frequency_hz,phase_rad,phase_over_pi,com_dominant_hz\n");
            for log in &logs {
                for ep in split_episodes(&log.records) {
                    let rate = 1.0 / sample_interval(ep);
                    let z: Vec<f64> = ep.iter().map(|r| r.com[2]).collect();
                    let b: Vec<f64> = ep.iter().map(|r| r.bridge_z).collect();
                    let f = a.frequency.or_else(|| dominant_frequency(&b, rate));
                    let phi = match f {
                        Some(f) => phase_shift(&z, &b, f, rate)?,
                        None => None,
                    };
                    let _ = writeln!(
                        t,
                        "{},{},{},{},{},{}",
                        log.name,
                        ep[0].episode,
                        format_f64(f),
                        format_f64(phi),
                        format_f64(phi.map(|p| p / std::f64::consts::PI)),
                        format_f64(dominant_frequency(&z, rate))
                    );
                }
            }
            write_file(&out("phase_shift.csv"), &t)
        }
        AnalyzeKind::Forces => {
            let mut t = String::from("file,scope,foot,mean,std,count\n");
            for log in &logs {
                let forces: Vec<[f64; 4]> = log.records.iter().map(|r| r.normal_forces).collect();
                let s = force_stats(&contacts_of(&log.records), &forces)?;
                force_rows(&mut t, &log.name, &s);
            }
            write_file(&out("forces.csv"), &t)
        }
        AnalyzeKind::Power => {
            let mode = match a.power_mode {
                PowerArg::Abs => PowerMode::Absolute,
                PowerArg::Positive => PowerMode::Positive,
            };
            let label = match mode {
                PowerMode::Absolute => "abs",
                PowerMode::Positive => "positive",
            };
            let mut t = String::from("file,episode,mode,mean_watts\n");
            for log in &logs {
                for ep in split_episodes(&log.records) {
                    let tau: Vec<_> = ep.iter().map(|r| r.tau).collect();
                    let qd: Vec<_> = ep.iter().map(|r| r.qd).collect();
                    let p = power_estimate(&tau, &qd, mode)?;
                    let _ = writeln!(t, "{},{},{label},{}", log.name, ep[0].episode, format_f64(p));
                }
            }
            write_file(&out("power.csv"), &t)
        }
        AnalyzeKind::Returns => {
            let mut t = String::from("file,episode,steps,cmd_vx,return,return_no_gait_terms\n");
            let mut all = Vec::new();
            for log in &logs {
                for ep in split_episodes(&log.records) {
                    let total: f64 = ep.iter().map(|r| r.reward().total).sum();
                    let ng: f64 = ep.iter().map(|r| r.reward().total_without_gait_terms()).sum();
                    let vx = ep.iter().map(|r| r.command[0]).sum::<f64>() / ep.len() as f64;
                    all.push(ng);
                    let _ = writeln!(t, "{},{},{},{vx},{total},{ng}", log.name, ep[0].episode, ep.len());
                }
            }
            let mut s = String::from("episodes,mean_return_no_gait_terms,stderr\n");
            if let Some(m) = MeanStd::of(all) {
                let _ = writeln!(s, "{},{},{}", m.count, m.mean, m.stderr());
            }
            write_file(&out("returns.csv"), &t)?;
            write_file(&out("returns_summary.csv"), &s)
        }
    }
}

fn stem(name: &str) -> &str {
    name.rsplit_once('.').map(|(s, _)| s).unwrap_or(name)
}

fn force_rows(t: &mut String, file: &str, s: &ForceStats) {
    let mut row = |scope: &str, foot: &str, m: &Option<MeanStd>| {
        let (mean, std, n) = match m {
            Some(m) => (m.mean.to_string(), m.std.to_string(), m.count),
            None => (String::new(), String::new(), 0),
        };
        let _ = writeln!(t, "{file},{scope},{foot},{mean},{std},{n}");
    };
    for (scope, per, pooled) in [("stance", &s.stance, &s.stance_pooled), ("all", &s.all, &s.all_pooled)] {
        for (foot, m) in Foot::ALL.iter().zip(per) {
            row(scope, foot.label(), m);
        }
        row(scope, "pooled", pooled);
    }
}

fn footfall_svg(runs: &[Vec<(f64, f64)>; 4], times: &[f64]) -> String {
    let (t0, t1) = (times.first().copied().unwrap_or(0.0), times.last().copied().unwrap_or(1.0));
    let span = (t1 - t0).max(1e-9);
    let (w, row_h, left) = (800.0, 30.0, 40.0);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n",
        w + left,
        row_h * 4.0 + 10.0
    );
    for (i, (foot, r)) in Foot::ALL.iter().zip(runs).enumerate() {
        let y = 5.0 + i as f64 * row_h;
        let _ = writeln!(s, "<text x=\"2\" y=\"{}\" font-size=\"12\">{}</text>", y + 18.0, foot.label());
        for (a, b) in r {
            let x = left + (a - t0) / span * w;
            let bw = ((b - a) / span * w).max(0.5);
            let _ = writeln!(s, "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bw:.2}\" height=\"{}\" fill=\"black\"/>", row_h - 8.0);
        }
    }
    s.push_str("</svg>\n");
    s
}

fn com_svg(ep: &[TrajectoryRecord]) -> String {
    let (w, h) = (800.0, 300.0);
    let t0 = ep[0].time;
    let span = (ep[ep.len() - 1].time - t0).max(1e-9);
    let series = [
        ("black", ep.iter().map(|r| r.com[2]).collect::<Vec<_>>()),
        ("gray", ep.iter().map(|r| r.surface_height).collect()),
    ];
    let lo = series.iter().flat_map(|s| s.1.iter()).copied().fold(f64::INFINITY, f64::min);
    let hi = series.iter().flat_map(|s| s.1.iter()).copied().fold(f64::NEG_INFINITY, f64::max);
    let range = (hi - lo).max(1e-9);
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n");
    for (color, ys) in &series {
        let pts: Vec<String> = ep
            .iter()
            .zip(ys)
            .map(|(r, y)| format!("{:.2},{:.2}", (r.time - t0) / span * w, h - (y - lo) / range * h))
            .collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"/>", pts.join(" "));
    }
    s.push_str("</svg>\n");
    s
}
