//! Post-hoc gait analysis over logged trajectories: stance classification,
//! footfall intervals, step frequency, CoM/bridge phase shift, foot-force
//! statistics, power and spectra.

use std::f64::consts::PI;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::env::{Command, StepResult};
use crate::error::{Error, Result};
use crate::quadruped::{JointState, JointVec, NUM_JOINTS, NUM_LEGS};
use crate::rewards::{FootContacts, RewardBreakdown};
use crate::simcore::{Foot, TrunkState};

const JOINT_NAMES: [&str; 3] = ["abd", "hip", "knee"];
const NUM_TERMS: usize = RewardBreakdown::TERM_NAMES.len();

/// One logged control step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub episode: u32,
    pub time: f64,
    pub command: [f64; 3],
    pub com: [f64; 3],
    pub velocity: [f64; 3],
    /// Roll, pitch, yaw.
    pub euler: [f64; 3],
    pub q: JointVec,
    pub qd: JointVec,
    pub tau: JointVec,
    pub contacts: [bool; NUM_LEGS],
    pub normal_forces: [f64; NUM_LEGS],
    pub bridge_z: f64,
    pub surface_height: f64,
    pub rewards: [f64; NUM_TERMS],
    pub action: JointVec,
}

impl TrajectoryRecord {
    /// Record of the state reached by `result`.
    pub fn from_step(
        episode: u32,
        result: &StepResult,
        trunk: &TrunkState,
        joints: &JointState,
        action: &JointVec,
    ) -> Self {
        let (roll, pitch, yaw) = trunk.euler();
        let info = &result.info;
        Self {
            episode,
            time: info.time,
            command: info.command.to_array(),
            com: trunk.position.into(),
            velocity: trunk.linear_velocity.into(),
            euler: [roll, pitch, yaw],
            q: joints.q,
            qd: joints.qd,
            tau: joints.tau,
            contacts: info.contacts.to_array(),
            normal_forces: info.normal_forces,
            bridge_z: info.bridge.displacement_zb,
            surface_height: info.surface_height,
            rewards: result.reward.terms(),
            action: action.map(|a| a.clamp(-1.0, 1.0)),
        }
    }

    pub fn foot_contacts(&self) -> FootContacts {
        FootContacts::from_array(self.contacts)
    }

    pub fn command(&self) -> Command {
        Command::new(self.command[0], self.command[1], self.command[2])
    }

    pub fn reward(&self) -> RewardBreakdown {
        RewardBreakdown::from_terms(self.rewards)
    }

    /// Column names in file order.
    pub fn header() -> Vec<String> {
        let mut h: Vec<String> = ["episode", "time", "cmd_vx", "cmd_vy", "cmd_wyaw"]
            .map(String::from)
            .to_vec();
        h.extend(["com_x", "com_y", "com_z"].map(String::from));
        h.extend(["vel_x", "vel_y", "vel_z"].map(String::from));
        h.extend(["roll", "pitch", "yaw"].map(String::from));
        for prefix in ["q", "qd", "tau"] {
            h.extend(joint_columns(prefix));
        }
        h.extend(Foot::ALL.map(|f| format!("contact_{}", f.label())));
        h.extend(Foot::ALL.map(|f| format!("force_{}", f.label())));
        h.extend(["bridge_z", "surface_height"].map(String::from));
        h.extend(RewardBreakdown::TERM_NAMES.map(|n| format!("reward_{n}")));
        h.extend(joint_columns("action"));
        h
    }

    fn to_fields(&self) -> Vec<String> {
        let mut nums = vec![self.time];
        nums.extend(self.command);
        nums.extend(self.com);
        nums.extend(self.velocity);
        nums.extend(self.euler);
        nums.extend(self.q);
        nums.extend(self.qd);
        nums.extend(self.tau);
        let mut v = vec![self.episode.to_string()];
        v.extend(nums.iter().map(f64::to_string));
        v.extend(self.contacts.map(|c| u8::from(c).to_string()));
        let mut tail: Vec<f64> = self.normal_forces.to_vec();
        tail.extend([self.bridge_z, self.surface_height]);
        tail.extend(self.rewards);
        tail.extend(self.action);
        v.extend(tail.iter().map(f64::to_string));
        v
    }

    fn from_fields(row: &csv::StringRecord, line: usize) -> Result<Self> {
        let expected = Self::header().len();
        if row.len() != expected {
            return Err(Error::Data(format!(
                "trajectory row {line} has {} columns, expected {expected}",
                row.len()
            )));
        }
        let mut cur = Cursor { row, col: 0, line };
        let episode = cur.field()?;
        let episode: u32 = episode
            .parse()
            .map_err(|_| cur.err("episode must be a non-negative integer"))?;
        let time = cur.num()?;
        let command = cur.nums()?;
        let com = cur.nums()?;
        let velocity = cur.nums()?;
        let euler = cur.nums()?;
        let q = cur.nums()?;
        let qd = cur.nums()?;
        let tau = cur.nums()?;
        let mut contacts = [false; NUM_LEGS];
        for c in &mut contacts {
            *c = match cur.field()? {
                "0" => false,
                "1" => true,
                _ => return Err(cur.err("contact flag must be 0 or 1")),
            };
        }
        Ok(Self {
            episode,
            time,
            command,
            com,
            velocity,
            euler,
            q,
            qd,
            tau,
            contacts,
            normal_forces: cur.nums()?,
            bridge_z: cur.num()?,
            surface_height: cur.num()?,
            rewards: cur.nums()?,
            action: cur.nums()?,
        })
    }
}

struct Cursor<'a> {
    row: &'a csv::StringRecord,
    col: usize,
    line: usize,
}

impl Cursor<'_> {
    fn err(&self, what: &str) -> Error {
        Error::Data(format!("trajectory row {}, column {}: {what}", self.line, self.col))
    }

    fn field(&mut self) -> Result<&str> {
        let s = self.row.get(self.col).ok_or_else(|| self.err("missing"))?;
        self.col += 1;
        Ok(s.trim())
    }

    fn num(&mut self) -> Result<f64> {
        let s = self.field()?;
        s.parse().map_err(|_| self.err("not a number"))
    }

    fn nums<const N: usize>(&mut self) -> Result<[f64; N]> {
        let mut a = [0.0; N];
        for x in &mut a {
            *x = self.num()?;
        }
        Ok(a)
    }
}

fn joint_columns(prefix: &str) -> Vec<String> {
    let mut v = Vec::with_capacity(NUM_JOINTS);
    for foot in Foot::ALL {
        for j in JOINT_NAMES {
            v.push(format!("{prefix}_{}_{j}", foot.label()));
        }
    }
    v
}

pub fn write_trajectory<W: std::io::Write>(out: W, records: &[TrajectoryRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TrajectoryRecord::header())?;
    for r in records {
        w.write_record(r.to_fields())?;
    }
    w.flush().map_err(|e| Error::io("<trajectory>", e))
}

pub fn read_trajectory<R: std::io::Read>(input: R) -> Result<Vec<TrajectoryRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    let expected = TrajectoryRecord::header();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Data("trajectory header does not match the expected columns".into()));
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        out.push(TrajectoryRecord::from_fields(&row?, i + 2)?);
    }
    Ok(out)
}

pub fn save_trajectory(path: &Path, records: &[TrajectoryRecord]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trajectory(std::io::BufWriter::new(f), records)
}

pub fn load_trajectory(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trajectory(std::io::BufReader::new(f))
}

/// Splits a log into its episodes, keeping file order.
pub fn split_episodes(records: &[TrajectoryRecord]) -> Vec<&[TrajectoryRecord]> {
    records
        .chunk_by(|a, b| a.episode == b.episode)
        .collect()
}

/// Characteristic stance patterns present at one control step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StanceLabel {
    /// Never both front or both rear feet airborne.
    pub default_ok: bool,
    pub trot: bool,
    pub pace: bool,
    pub bound: bool,
    pub pronk_ground: bool,
    pub pronk_air: bool,
}

pub fn classify_stance(g: FootContacts) -> StanceLabel {
    StanceLabel {
        default_ok: !(!g.fr && !g.fl) && !(!g.rr && !g.rl),
        trot: g.fr == g.rl && g.fl == g.rr && g.fr != g.fl,
        pace: g.fr == g.rr && g.fl == g.rl && g.fr != g.fl,
        bound: g.fr == g.fl && g.rr == g.rl && g.fr != g.rr,
        pronk_ground: g.fr && g.fl && g.rr && g.rl,
        pronk_air: !(g.fr || g.fl || g.rr || g.rl),
    }
}

/// Share of control steps per stance label, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhasePercentages {
    pub default: f64,
    pub trot: f64,
    pub pace: f64,
    pub bound: f64,
    pub pronk_ground: f64,
    pub pronk_air: f64,
    /// Steps matching none of trot, pace or bound.
    pub other: f64,
}

impl PhasePercentages {
    pub const COLUMNS: [&'static str; 7] =
        ["default", "trot", "pace", "bound", "pronk_ground", "pronk_air", "other"];

    pub fn values(&self) -> [f64; 7] {
        [
            self.default,
            self.trot,
            self.pace,
            self.bound,
            self.pronk_ground,
            self.pronk_air,
            self.other,
        ]
    }
}

/// `None` for an empty sequence.
pub fn phase_percentages(contacts: &[FootContacts]) -> Option<PhasePercentages> {
    if contacts.is_empty() {
        return None;
    }
    let mut counts = [0usize; 7];
    for &g in contacts {
        let l = classify_stance(g);
        let flags = [
            l.default_ok,
            l.trot,
            l.pace,
            l.bound,
            l.pronk_ground,
            l.pronk_air,
            !(l.trot || l.pace || l.bound),
        ];
        for (c, f) in counts.iter_mut().zip(flags) {
            *c += usize::from(f);
        }
    }
    let pct = counts.map(|c| 100.0 * c as f64 / contacts.len() as f64);
    Some(PhasePercentages {
        default: pct[0],
        trot: pct[1],
        pace: pct[2],
        bound: pct[3],
        pronk_ground: pct[4],
        pronk_air: pct[5],
        other: pct[6],
    })
}

/// Contact runs per foot in FL, FR, RL, RR order as (touchdown, liftoff).
/// A run covering samples i..=j spans `[t_i, t_j + dt)`.
pub fn footfall_intervals(
    times: &[f64],
    contacts: &[FootContacts],
    dt: f64,
) -> Result<[Vec<(f64, f64)>; NUM_LEGS]> {
    if times.len() != contacts.len() {
        return Err(Error::LengthMismatch(format!(
            "{} times vs {} contact samples",
            times.len(),
            contacts.len()
        )));
    }
    let mut out: [Vec<(f64, f64)>; NUM_LEGS] = Default::default();
    for (leg, runs) in out.iter_mut().enumerate() {
        let mut start = None;
        for (i, g) in contacts.iter().enumerate() {
            let c = g.to_array()[leg];
            match (c, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    runs.push((times[s], times[i - 1] + dt));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            runs.push((times[s], times[times.len() - 1] + dt));
        }
    }
    Ok(out)
}

/// Touchdown rate of one foot's intervals, Hz; 0 with fewer than two.
pub fn interval_rate(intervals: &[(f64, f64)]) -> f64 {
    match (intervals.first(), intervals.last()) {
        (Some(a), Some(b)) if intervals.len() >= 2 && b.0 > a.0 => {
            (intervals.len() - 1) as f64 / (b.0 - a.0)
        }
        _ => 0.0,
    }
}

/// Mean touchdown rate per foot, averaged over the four feet. Touchdowns are
/// air→contact transitions; a foot with fewer than two contributes 0.
pub fn step_frequency(times: &[f64], contacts: &[FootContacts]) -> Result<f64> {
    if times.len() != contacts.len() {
        return Err(Error::LengthMismatch(format!(
            "{} times vs {} contact samples",
            times.len(),
            contacts.len()
        )));
    }
    let mut total = 0.0;
    for leg in 0..NUM_LEGS {
        let touchdowns: Vec<f64> = (1..contacts.len())
            .filter(|&i| contacts[i].to_array()[leg] && !contacts[i - 1].to_array()[leg])
            .map(|i| times[i])
            .collect();
        if let (Some(a), Some(b)) = (touchdowns.first(), touchdowns.last()) {
            if touchdowns.len() >= 2 && b > a {
                total += (touchdowns.len() - 1) as f64 / (b - a);
            }
        }
    }
    Ok(total / NUM_LEGS as f64)
}

fn demeaned(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

/// Unbiased cross-correlation `mean_i b[i]·c[i+lag]`.
fn cross_correlation(b: &[f64], c: &[f64], lag: isize) -> f64 {
    let n = b.len() as isize;
    let (lo, hi) = ((-lag).max(0), (n - lag).min(n));
    if hi <= lo {
        return 0.0;
    }
    let s: f64 = (lo..hi).map(|i| b[i as usize] * c[(i + lag) as usize]).sum();
    s / (hi - lo) as f64
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI { w + 2.0 * PI } else { w }
}

/// Phase lag of `com_z` behind `bridge_z` at `frequency`, radians in (−π, π].
///
/// The cross-correlation peak is searched within half a period of lag and
/// refined by fitting a sinusoid through the peak and its two neighbours.
/// `None` when the bridge does not move or the series are too short.
pub fn phase_shift(com_z: &[f64], bridge_z: &[f64], frequency: f64, rate: f64) -> Result<Option<f64>> {
    if com_z.len() != bridge_z.len() {
        return Err(Error::LengthMismatch(format!(
            "{} CoM samples vs {} bridge samples",
            com_z.len(),
            bridge_z.len()
        )));
    }
    if !(frequency > 0.0 && rate > 0.0) {
        return Err(Error::Usage("phase shift needs positive frequency and sample rate".into()));
    }
    let n = com_z.len();
    let h = 1.0 / rate;
    let omega = 2.0 * PI * frequency;
    let max_lag = ((0.5 / frequency) * rate).ceil() as isize;
    if n < 3 || (n as isize) < 2 * max_lag + 2 {
        return Ok(None);
    }
    let b = demeaned(bridge_z);
    let c = demeaned(com_z);
    let var = b.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if var.sqrt() < 1e-9 {
        return Ok(None);
    }
    let (k0, _) = (-max_lag..=max_lag)
        .map(|k| (k, cross_correlation(&b, &c, k)))
        .fold((0, f64::NEG_INFINITY), |best, x| if x.1 > best.1 { x } else { best });
    let theta = omega * h;
    let c0 = cross_correlation(&b, &c, k0);
    let cp = cross_correlation(&b, &c, k0 + 1);
    let cm = cross_correlation(&b, &c, k0 - 1);
    let delta = if theta.sin().abs() > 1e-12 {
        (-(cp - cm) / (2.0 * theta.sin())).atan2(c0)
    } else {
        0.0
    };
    Ok(Some(wrap_angle(omega * k0 as f64 * h - delta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerMode {
    /// Σ|τ·q̇|.
    #[default]
    Absolute,
    /// Σ max(τ·q̇, 0); negative work earns nothing.
    Positive,
}

/// Mean joint power over the samples, W. `None` when empty.
pub fn power_estimate(tau: &[JointVec], qd: &[JointVec], mode: PowerMode) -> Result<Option<f64>> {
    if tau.len() != qd.len() {
        return Err(Error::LengthMismatch(format!(
            "{} torque rows vs {} velocity rows",
            tau.len(),
            qd.len()
        )));
    }
    if tau.is_empty() {
        return Ok(None);
    }
    let total: f64 = tau
        .iter()
        .zip(qd)
        .map(|(t, v)| {
            t.iter()
                .zip(v)
                .map(|(a, b)| match mode {
                    PowerMode::Absolute => (a * b).abs(),
                    PowerMode::Positive => (a * b).max(0.0),
                })
                .sum::<f64>()
        })
        .sum();
    Ok(Some(total / tau.len() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub count: usize,
}

impl MeanStd {
    pub fn of(xs: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = xs.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
            count: v.len(),
        })
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.std * (self.count as f64 / (self.count - 1) as f64).sqrt()
                / (self.count as f64).sqrt()
        }
    }
}

/// Foot normal-force statistics, per foot (FL, FR, RL, RR) and pooled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceStats {
    /// Samples where the foot is in contact.
    pub stance: [Option<MeanStd>; NUM_LEGS],
    pub stance_pooled: Option<MeanStd>,
    pub all: [Option<MeanStd>; NUM_LEGS],
    pub all_pooled: Option<MeanStd>,
}

pub fn force_stats(contacts: &[FootContacts], forces: &[[f64; NUM_LEGS]]) -> Result<ForceStats> {
    if contacts.len() != forces.len() {
        return Err(Error::LengthMismatch(format!(
            "{} contact samples vs {} force samples",
            contacts.len(),
            forces.len()
        )));
    }
    let per_leg = |leg: usize, stance_only: bool| {
        MeanStd::of(
            contacts
                .iter()
                .zip(forces)
                .filter(move |(g, _)| !stance_only || g.to_array()[leg])
                .map(move |(_, f)| f[leg]),
        )
    };
    let pooled = |stance_only: bool| {
        MeanStd::of(contacts.iter().zip(forces).flat_map(move |(g, f)| {
            let g = g.to_array();
            (0..NUM_LEGS).filter(move |&l| !stance_only || g[l]).map(move |l| f[l])
        }))
    };
    Ok(ForceStats {
        stance: std::array::from_fn(|l| per_leg(l, true)),
        stance_pooled: pooled(true),
        all: std::array::from_fn(|l| per_leg(l, false)),
        all_pooled: pooled(false),
    })
}

/// Frequency of the largest non-DC spectral peak of a Hann-windowed,
/// mean-removed series, Hz, refined by parabolic interpolation.
/// `None` for fewer than 4 samples or a constant series.
pub fn dominant_frequency(x: &[f64], rate: f64) -> Option<f64> {
    let spec = amplitude_spectrum(x, rate)?;
    let mags: Vec<f64> = spec.iter().map(|p| p.1).collect();
    let (k, &peak) = mags
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if peak <= 1e-12 {
        return None;
    }
    let df = spec[1].0 - spec[0].0;
    // The DC bin is excluded from the search, so it may exceed the peak.
    let shift = if k >= 2 && k + 1 < mags.len() {
        let (a, b, c) = (mags[k - 1], mags[k], mags[k + 1]);
        let den = a - 2.0 * b + c;
        if den < -1e-15 { (0.5 * (a - c) / den).clamp(-0.5, 0.5) } else { 0.0 }
    } else {
        0.0
    };
    Some((k as f64 + shift) * df)
}

/// One-sided amplitude spectrum `(frequency Hz, magnitude)` of the
/// mean-removed, Hann-windowed series.
pub fn amplitude_spectrum(x: &[f64], rate: f64) -> Option<Vec<(f64, f64)>> {
    let n = x.len();
    if n < 4 || rate <= 0.0 {
        return None;
    }
    let d = demeaned(x);
    let mut buf: Vec<Complex<f64>> = d
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let w = 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos();
            Complex::new(v * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Some(
        buf.iter()
            .take(n / 2 + 1)
            .enumerate()
            .map(|(k, c)| (k as f64 * rate / n as f64, 2.0 * c.norm() / n as f64))
            .collect(),
    )
}

pub fn contacts_of(records: &[TrajectoryRecord]) -> Vec<FootContacts> {
    records.iter().map(TrajectoryRecord::foot_contacts).collect()
}

pub fn times_of(records: &[TrajectoryRecord]) -> Vec<f64> {
    records.iter().map(|r| r.time).collect()
}

/// Sample spacing of a log, taken from its first two records.
pub fn sample_interval(records: &[TrajectoryRecord]) -> f64 {
    match records {
        [a, b, ..] if b.time > a.time => b.time - a.time,
        _ => crate::simcore::CONTROL_DT,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fc(g: [u8; 4]) -> FootContacts {
        FootContacts::from_array(g.map(|x| x == 1))
    }

    #[test]
    fn stance_examples() {
        let l = classify_stance(fc([1, 0, 0, 1]));
        assert!(l.trot && l.default_ok && !l.pace && !l.bound && !l.pronk_ground);
        let l = classify_stance(fc([1, 1, 1, 1]));
        assert!(l.pronk_ground && l.default_ok && !l.trot);
        // FL, FR on the ground, rears in the air
        let l = classify_stance(fc([1, 1, 0, 0]));
        assert!(l.bound && !l.default_ok);
    }

    #[test]
    fn percentages_count_steps() {
        let trot_a = fc([1, 0, 0, 1]);
        let trot_b = fc([0, 1, 1, 0]);
        let p = phase_percentages(&[trot_a, trot_b, trot_a, fc([1, 1, 1, 1])]).unwrap();
        assert_eq!(p.trot, 75.0);
        assert_eq!(p.pronk_ground, 25.0);
        assert_eq!(p.other, 25.0);
        assert!(phase_percentages(&[]).is_none());
    }

    #[test]
    fn footfall_runs() {
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.02).collect();
        let mut g = vec![fc([1, 1, 1, 1]); 50];
        let iv = footfall_intervals(&times, &g, 0.02).unwrap();
        assert_eq!(iv[0].len(), 1);
        assert!((iv[0][0].1 - 1.0).abs() < 1e-12);
        for s in &mut g[20..25] {
            s.fl = false;
        }
        let iv = footfall_intervals(&times, &g, 0.02).unwrap();
        assert_eq!(iv[0].len(), 2);
        assert!((iv[0][1].0 - iv[0][0].1 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn phase_shift_recovers_lag() {
        let rate = 50.0;
        let t: Vec<f64> = (0..500).map(|i| i as f64 / rate).collect();
        let b: Vec<f64> = t.iter().map(|t| (4.0 * PI * t).sin()).collect();
        let c: Vec<f64> = t.iter().map(|t| (4.0 * PI * t - 0.3 * PI).sin()).collect();
        let phi = phase_shift(&c, &b, 2.0, rate).unwrap().unwrap();
        assert!((phi - 0.3 * PI).abs() < 0.02 * PI, "{phi}");
        let back = phase_shift(&b, &c, 2.0, rate).unwrap().unwrap();
        assert!((back + phi).abs() < 1e-3);
        assert!(phase_shift(&b, &vec![0.2; 500], 2.0, rate).unwrap().is_none());
    }

    #[test]
    fn power_and_forces() {
        let mut tau = [0.0; NUM_JOINTS];
        let mut qd = [0.0; NUM_JOINTS];
        tau[..2].copy_from_slice(&[2.0, -1.0]);
        qd[..2].copy_from_slice(&[3.0, 4.0]);
        assert_eq!(power_estimate(&[tau], &[qd], PowerMode::Absolute).unwrap(), Some(10.0));
        assert_eq!(power_estimate(&[tau], &[qd], PowerMode::Positive).unwrap(), Some(6.0));
        assert_eq!(power_estimate(&[], &[], PowerMode::Absolute).unwrap(), None);

        let g = [fc([1, 1, 1, 1]), fc([0, 0, 0, 0])];
        let f = [[80.0; 4], [0.0; 4]];
        let s = force_stats(&g, &f).unwrap();
        assert_eq!(s.stance[0].unwrap().mean, 80.0);
        assert_eq!(s.all_pooled.unwrap().mean, 40.0);
        let s = force_stats(&g[1..], &f[1..]).unwrap();
        assert!(s.stance_pooled.is_none());
    }

    #[test]
    fn spectrum_peak() {
        let rate = 50.0;
        let x: Vec<f64> = (0..1000).map(|i| (2.0 * PI * 2.0 * i as f64 / rate).sin() + 3.0).collect();
        let f = dominant_frequency(&x, rate).unwrap();
        assert!((f - 2.0).abs() < 0.02, "{f}");
        assert!(dominant_frequency(&[1.0; 100], rate).is_none());
    }

    #[test]
    fn csv_round_trip() {
        let r = TrajectoryRecord {
            episode: 3,
            time: 0.04,
            com: [1.0, -0.5, 1.375],
            contacts: [true, false, false, true],
            normal_forces: [60.0, 0.0, 0.0, 61.5],
            rewards: [0.1; NUM_TERMS],
            q: [0.25; NUM_JOINTS],
            ..Default::default()
        };
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &[r.clone(), r.clone()]).unwrap();
        let back = read_trajectory(&buf[..]).unwrap();
        assert_eq!(back, vec![r.clone(), r]);
        let text = String::from_utf8(buf).unwrap();
        let bad = text.replacen(",1,0,0,1,", ",1,0,2,1,", 1);
        assert!(read_trajectory(bad.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn power_is_time_reversal_invariant(rows in prop::collection::vec(prop::array::uniform12(-10.0f64..10.0), 1..20)) {
            let qd: Vec<JointVec> = rows.iter().map(|r| r.map(|x| x * 0.5 - 1.0)).collect();
            let a = power_estimate(&rows, &qd, PowerMode::Absolute).unwrap().unwrap();
            let mut rr = rows.clone();
            rr.reverse();
            let mut qr = qd.clone();
            qr.reverse();
            let b = power_estimate(&rr, &qr, PowerMode::Absolute).unwrap().unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() < 1e-9 * (1.0 + a));
        }

        #[test]
        fn gait_rows_sum_to_hundred(seq in prop::collection::vec(prop::array::uniform4(any::<bool>()), 1..64)) {
            let g: Vec<FootContacts> = seq.into_iter().map(FootContacts::from_array).collect();
            let p = phase_percentages(&g).unwrap();
            prop_assert!((p.trot + p.pace + p.bound + p.other - 100.0).abs() < 1e-9);
        }
    }
}
