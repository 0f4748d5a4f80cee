//! Offline pre-motion library: randomized task sampling, trajectory storage
//! and nearest-entry selection.
//!
//! A library directory holds `index.yaml`, one binary file per trajectory and
//! `rejects.yaml` listing the tasks that produced no feasible motion.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{evaluate, ConstraintReport, ObstacleSpec};
use crate::error::{Error, Result};
use crate::fitness::energy_of_samples;
use crate::grf_profile::{DesignVector, JumpTask, PairForce};
use crate::leg_kinematics::JointState;
use crate::planner::{plan_task, PlannerConfig};
use crate::srb_model::{MotionType, PlaneAxis, PlanarState, RobotParams};
use crate::trajectory::{Sample, Trajectory};

pub const MAGIC: &[u8; 16] = b"QUADJUMP-TRAJ\0\0\0";
pub const FORMAT_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.yaml";
pub const REJECTS_FILE: &str = "rejects.yaml";

const HEADER_INTS: usize = 6;
const HEADER_FLOATS: usize = 29;
const SAMPLE_FLOATS: usize = 33;
const PREFIX_LEN: usize = 16 + 4 * HEADER_INTS + 8 * HEADER_FLOATS;

/// Serializes a trajectory to the binary layout, checksum included.
pub fn encode_trajectory(traj: &Trajectory) -> Vec<u8> {
    let mut out = Vec::with_capacity(PREFIX_LEN + traj.samples.len() * SAMPLE_FLOATS * 8 + 4);
    out.extend_from_slice(MAGIC);
    let obstacle = traj.task.obstacle;
    for v in [
        FORMAT_VERSION,
        traj.samples.len() as u32,
        traj.task.motion.code() as u32,
        traj.certificate,
        obstacle.is_some() as u32,
        0,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut header = Vec::with_capacity(HEADER_FLOATS);
    header.extend(traj.task.start_state.to_array());
    header.extend(traj.task.target_pos);
    header.push(traj.task.target_angle);
    let o = obstacle.unwrap_or(ObstacleSpec::window(0.0, 0.0, 0.0, 0.0));
    header.extend([o.crossing_coord, o.ground_top_z, o.aerial_bottom_z, o.expansion_margin]);
    header.extend(traj.design.to_array());
    header.extend(traj.phase_times);
    header.push(traj.energy);
    debug_assert_eq!(header.len(), HEADER_FLOATS);
    for v in header {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for s in &traj.samples {
        for v in sample_record(s) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

fn sample_record(s: &Sample) -> [f64; SAMPLE_FLOATS] {
    let mut r = [0.0; SAMPLE_FLOATS];
    r[0] = s.t;
    r[1..7].copy_from_slice(&s.state.to_array());
    for k in 0..2 {
        r[7 + 2 * k..9 + 2 * k].copy_from_slice(&s.forces[k].as_array());
        r[11 + k] = if s.contact[k] { 1.0 } else { 0.0 };
        let j = &s.joints[k];
        let base = 13 + 9 * k;
        r[base..base + 3].copy_from_slice(&j.q);
        r[base + 3..base + 6].copy_from_slice(&j.qdot);
        r[base + 6..base + 9].copy_from_slice(&j.tau);
    }
    r[31] = s.residual;
    r[32] = s.reach_deficit;
    r
}

fn sample_from_record(r: &[f64]) -> Sample {
    let triple = |a: &[f64]| [a[0], a[1], a[2]];
    let mut s = Sample {
        t: r[0],
        state: PlanarState::from_array([r[1], r[2], r[3], r[4], r[5], r[6]]),
        residual: r[31],
        reach_deficit: r[32],
        ..Default::default()
    };
    for k in 0..2 {
        s.forces[k] = PairForce {
            f_t: r[7 + 2 * k],
            f_z: r[8 + 2 * k],
        };
        s.contact[k] = r[11 + k] != 0.0;
        let base = 13 + 9 * k;
        s.joints[k] = JointState {
            q: triple(&r[base..]),
            qdot: triple(&r[base + 3..]),
            tau: triple(&r[base + 6..]),
        };
    }
    s
}

/// Parses bytes written by [`encode_trajectory`]; `path` only labels errors.
pub fn decode_trajectory(bytes: &[u8], path: &Path) -> Result<Trajectory> {
    let bad = |reason: &str| Error::corrupt(path, reason);
    if bytes.len() < PREFIX_LEN + 4 {
        return Err(bad("file too short"));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(bad("checksum mismatch"));
    }
    if &body[..16] != MAGIC {
        return Err(bad("bad magic"));
    }
    let int = |k: usize| {
        let at = 16 + 4 * k;
        u32::from_le_bytes(body[at..at + 4].try_into().expect("4 bytes"))
    };
    if int(0) != FORMAT_VERSION {
        return Err(bad(&format!("unsupported version {}", int(0))));
    }
    let count = int(1) as usize;
    let motion = MotionType::from_code(int(2) as u8).ok_or_else(|| bad("unknown motion code"))?;
    let certificate = int(3);
    let has_obstacle = int(4) != 0;
    if body.len() != PREFIX_LEN + count * SAMPLE_FLOATS * 8 {
        return Err(bad("length does not match sample count"));
    }
    let floats: Vec<f64> = body[16 + 4 * HEADER_INTS..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let (h, records) = floats.split_at(HEADER_FLOATS);
    let start = PlanarState::from_array(h[0..6].try_into().expect("6 floats"));
    let obstacle = has_obstacle.then(|| ObstacleSpec::window(h[9], h[10], h[11], h[12]));
    let design = DesignVector::from_array(h[13..25].try_into().expect("12 floats"));
    let task = JumpTask {
        motion,
        start_state: start,
        target_pos: [h[6], h[7]],
        target_angle: h[8],
        obstacle,
    };
    let samples: Vec<Sample> = records.chunks_exact(SAMPLE_FLOATS).map(sample_from_record).collect();
    if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(bad("sample times not increasing"));
    }
    Ok(Trajectory {
        task,
        design,
        phase_times: [h[25], h[26], h[27]],
        samples,
        energy: h[28],
        certificate,
    })
}

/// Writes `traj` to `path` and returns the payload checksum.
pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<u32> {
    let bytes = encode_trajectory(traj);
    let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    fs::write(path, &bytes).map_err(|e| Error::storage(path, e))?;
    Ok(crc)
}

pub fn load_trajectory(path: &Path) -> Result<Trajectory> {
    let bytes = fs::read(path).map_err(|e| Error::storage(path, e))?;
    decode_trajectory(&bytes, path)
}

/// Checks a loaded trajectory against the constraints and its stored energy.
pub fn validate_trajectory(traj: &Trajectory, params: &RobotParams) -> Result<ConstraintReport> {
    let report = evaluate(traj, &traj.task, params)?;
    if !report.all_satisfied() {
        return Err(Error::InvalidInput(format!(
            "stored trajectory violates level {:?}",
            report.worst_level()
        )));
    }
    let e = energy_of_samples(&traj.samples);
    if (e - traj.energy).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "stored energy {} differs from recomputed {e}",
            traj.energy
        )));
    }
    Ok(report)
}

/// World displacement `(x, y, z)` of the CoM target relative to the start.
pub fn world_displacement(task: &JumpTask) -> [f64; 3] {
    let dt = task.target_pos[0] - task.start_state.pos_t;
    let dz = task.target_pos[1] - task.start_state.pos_z;
    match task.motion.plane_axis() {
        PlaneAxis::Pitch => [dt, 0.0, dz],
        PlaneAxis::Roll => [0.0, dt, dz],
        PlaneAxis::Yaw => [0.0, 0.0, dz],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub target_pos: [f64; 3],
    pub target_rot: f64,
    pub motion: MotionType,
    pub energy_j: f64,
    /// Obstacle and margin the trajectory was planned around.
    pub feasible_box: Option<ObstacleSpec>,
    pub file: String,
    pub checksum: u32,
}

impl IndexEntry {
    fn for_trajectory(traj: &Trajectory, file: String, checksum: u32) -> Self {
        Self {
            target_pos: world_displacement(&traj.task),
            target_rot: traj.task.target_angle - traj.task.start_state.angle,
            motion: traj.task.motion,
            energy_j: traj.energy,
            feasible_box: traj.task.obstacle,
            file,
            checksum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LibraryIndex {
    pub entries: Vec<IndexEntry>,
}

impl LibraryIndex {
    pub fn new(mut entries: Vec<IndexEntry>) -> Self {
        entries.sort_by(|a, b| a.energy_j.total_cmp(&b.energy_j).then_with(|| a.file.cmp(&b.file)));
        Self { entries }
    }

    pub fn is_sorted(&self) -> bool {
        self.entries.windows(2).all(|w| w[0].energy_j <= w[1].energy_j)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.is_sorted() {
            return Err(Error::InvalidInput("index is not sorted by energy".into()));
        }
        let mut files: Vec<&str> = self.entries.iter().map(|e| e.file.as_str()).collect();
        files.sort_unstable();
        if files.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate trajectory file names".into()));
        }
        Ok(())
    }

    pub fn to_yaml(&self) -> Result<String> {
        self.validate()?;
        Ok(serde_yaml::to_string(self)?)
    }

    pub fn from_yaml(text: &str) -> Result<Self> {
        let index: Self = serde_yaml::from_str(text)?;
        index.validate()?;
        Ok(index)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(INDEX_FILE);
        fs::write(&path, self.to_yaml()?).map_err(|e| Error::storage(path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(INDEX_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::storage(path, e))?;
        Self::from_yaml(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Query {
    pub position: [f64; 3],
    #[serde(default)]
    pub rotation: f64,
    #[serde(default)]
    pub obstacle: Option<ObstacleSpec>,
    #[serde(default)]
    pub motion: Option<MotionType>,
}

impl Query {
    pub fn new(position: [f64; 3], rotation: f64) -> Self {
        Self {
            position,
            rotation,
            obstacle: None,
            motion: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.position.iter().all(|v| v.is_finite()) || !self.rotation.is_finite() {
            return Err(Error::InvalidInput("query values must be finite".into()));
        }
        Ok(())
    }
}

/// Distances closer than this count as ties.
pub const TIE_TOL: f64 = 1e-9;
/// Metres per radian in the selection distance.
pub const DEFAULT_ROTATION_WEIGHT: f64 = 0.1;

/// Whether a trajectory planned around `planned` also clears `wanted`.
pub fn box_covers(planned: &ObstacleSpec, wanted: &ObstacleSpec) -> bool {
    (planned.crossing_coord - wanted.crossing_coord).abs() <= planned.expansion_margin
        && planned.ground_top_z >= wanted.ground_top_z
        && planned.aerial_bottom_z <= wanted.aerial_bottom_z
}

pub fn distance(entry: &IndexEntry, q: &Query, rotation_weight: f64) -> f64 {
    let dp: f64 = entry
        .target_pos
        .iter()
        .zip(&q.position)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    let dr = rotation_weight * (entry.target_rot - q.rotation);
    (dp + dr * dr).sqrt()
}

pub fn matches(entry: &IndexEntry, q: &Query) -> bool {
    if q.motion.is_some_and(|m| m != entry.motion) {
        return false;
    }
    match (&q.obstacle, &entry.feasible_box) {
        (None, _) => true,
        (Some(want), Some(have)) => box_covers(have, want),
        (Some(_), None) => false,
    }
}

/// Position in `index` of the nearest matching entry; distance ties go to the
/// lower energy.
pub fn select_index(index: &LibraryIndex, q: &Query, rotation_weight: f64) -> Result<usize> {
    q.validate()?;
    let candidates: Vec<(usize, f64)> = index
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| matches(e, q))
        .map(|(i, e)| (i, distance(e, q, rotation_weight)))
        .collect();
    let best = candidates
        .iter()
        .map(|&(_, d)| d)
        .min_by(f64::total_cmp)
        .ok_or(Error::NoMatch)?;
    candidates
        .into_iter()
        .filter(|&(_, d)| d <= best + TIE_TOL)
        .min_by(|a, b| {
            let (ea, eb) = (index.entries[a.0].energy_j, index.entries[b.0].energy_j);
            ea.total_cmp(&eb).then(a.0.cmp(&b.0))
        })
        .map(|(i, _)| i)
        .ok_or(Error::NoMatch)
}

/// An index together with the directory holding its trajectory files.
#[derive(Debug, Clone)]
pub struct Library {
    pub dir: PathBuf,
    pub index: LibraryIndex,
    pub rotation_weight: f64,
}

impl Library {
    pub fn open(dir: &Path) -> Result<Self> {
        Ok(Self {
            dir: dir.to_path_buf(),
            index: LibraryIndex::load(dir)?,
            rotation_weight: DEFAULT_ROTATION_WEIGHT,
        })
    }

    pub fn path_of(&self, entry: &IndexEntry) -> PathBuf {
        self.dir.join(&entry.file)
    }

    /// Loads an entry's trajectory, checking it against the index checksum.
    pub fn load(&self, entry: &IndexEntry) -> Result<Trajectory> {
        let path = self.path_of(entry);
        let bytes = fs::read(&path).map_err(|e| Error::storage(&path, e))?;
        let traj = decode_trajectory(&bytes, &path)?;
        let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
        if crc != entry.checksum {
            return Err(Error::corrupt(path, "checksum differs from index"));
        }
        Ok(traj)
    }

    pub fn select(&self, q: &Query) -> Result<(&IndexEntry, Trajectory)> {
        let i = select_index(&self.index, q, self.rotation_weight)?;
        let entry = &self.index.entries[i];
        Ok((entry, self.load(entry)?))
    }

    /// Loads and re-validates every stored trajectory.
    pub fn verify(&self, params: &RobotParams) -> Result<()> {
        for entry in &self.index.entries {
            validate_trajectory(&self.load(entry)?, params)?;
        }
        Ok(())
    }
}

/// Randomized task generation for library builds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSampler {
    pub count: usize,
    pub seed: u64,
    pub motions: Vec<MotionType>,
    /// In-plane jump distance range, m.
    pub distance: [f64; 2],
    /// Landing height change range, m.
    pub height: [f64; 2],
    /// Yaw range for spins, rad.
    pub yaw: [f64; 2],
    pub ground_probability: f64,
    pub window_probability: f64,
    pub obstacle_height: [f64; 2],
    /// Window opening height range, m.
    pub window_gap: [f64; 2],
    pub margin: f64,
}

impl Default for TaskSampler {
    fn default() -> Self {
        Self {
            count: 20,
            seed: 0,
            motions: vec![
                MotionType::Front,
                MotionType::Rear,
                MotionType::Left,
                MotionType::Right,
                MotionType::YawSpin,
            ],
            distance: [0.1, 0.35],
            height: [0.0, 0.08],
            yaw: [-1.2, 1.2],
            ground_probability: 0.3,
            window_probability: 0.15,
            obstacle_height: [0.05, 0.35],
            window_gap: [0.3, 0.4],
            margin: 0.02,
        }
    }
}

impl TaskSampler {
    pub fn validate(&self) -> Result<()> {
        if self.count > 0 && self.motions.is_empty() {
            return Err(Error::Config("task sampler needs at least one motion type".into()));
        }
        for (name, [lo, hi]) in [
            ("distance", self.distance),
            ("height", self.height),
            ("yaw", self.yaw),
            ("obstacle_height", self.obstacle_height),
            ("window_gap", self.window_gap),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("bad {name} range [{lo}, {hi}]")));
            }
        }
        if self.window_gap[0] <= 0.0 {
            return Err(Error::Config("window gap must be positive".into()));
        }
        let p = self.ground_probability + self.window_probability;
        if self.ground_probability < 0.0 || self.window_probability < 0.0 || p > 1.0 {
            return Err(Error::Config("obstacle probabilities must lie in [0, 1] and sum to at most 1".into()));
        }
        Ok(())
    }

    /// Task `i`, independent of how many others are drawn.
    pub fn task(&self, i: usize) -> JumpTask {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(i as u64).to_le_bytes());
        key[16..24].copy_from_slice(b"tasks\0\0\0");
        let mut rng = ChaCha8Rng::from_seed(key);
        let mut uniform = |[lo, hi]: [f64; 2]| if hi > lo { rng.gen_range(lo..hi) } else { lo };
        let motion = self.motions[i % self.motions.len()];
        let dz = uniform(self.height);
        if motion == MotionType::YawSpin {
            let yaw = uniform(self.yaw);
            return JumpTask::from_displacement(motion, [0.0, dz], yaw);
        }
        let sign = match motion {
            MotionType::Rear | MotionType::Right | MotionType::BackFlip | MotionType::RightFlip => -1.0,
            _ => 1.0,
        };
        let dt = sign * uniform(self.distance);
        let mut task = JumpTask::standard(motion, [dt, dz]);
        let roll = uniform([0.0, 1.0]);
        let crossing = task.start_state.pos_t + 0.5 * dt;
        if roll < self.ground_probability {
            let h = uniform(self.obstacle_height);
            task = task.with_obstacle(ObstacleSpec::ground(crossing, h, self.margin));
        } else if roll < self.ground_probability + self.window_probability {
            let h = uniform(self.obstacle_height);
            let gap = uniform(self.window_gap);
            task = task.with_obstacle(ObstacleSpec::window(crossing, h, h + gap, self.margin));
        }
        task
    }

    pub fn tasks(&self) -> Vec<JumpTask> {
        (0..self.count).map(|i| self.task(i)).collect()
    }
}

/// A sampled task without a feasible plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reject {
    pub task_index: usize,
    pub task: JumpTask,
    pub worst_level: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutcome {
    pub index: LibraryIndex,
    pub rejects: Vec<Reject>,
}

pub fn trajectory_file_name(i: usize) -> String {
    format!("traj_{i:05}.bin")
}

/// Plans every sampled task on the current rayon pool, stores the feasible
/// ones under `out_dir` and writes the index and rejects log.
pub fn build_library(
    sampler: &TaskSampler,
    planner: &PlannerConfig,
    params: &RobotParams,
    out_dir: &Path,
) -> Result<BuildOutcome> {
    sampler.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::storage(out_dir, e))?;
    let results: Vec<Result<std::result::Result<IndexEntry, Reject>>> = (0..sampler.count)
        .into_par_iter()
        .map(|i| {
            let task = sampler.task(i);
            let cfg = PlannerConfig {
                seed: planner.seed.wrapping_add(i as u64),
                ..planner.clone()
            };
            let reject = |worst_level, reason: String| Reject {
                task_index: i,
                task,
                worst_level,
                reason,
            };
            let plan = match plan_task(&task, params, &cfg) {
                Ok(p) => p,
                Err(e) => return Ok(Err(reject(None, e.to_string()))),
            };
            match (plan.feasible(), plan.trajectory) {
                (true, Some(traj)) => {
                    let file = trajectory_file_name(i);
                    let crc = save_trajectory(&traj, &out_dir.join(&file))?;
                    Ok(Ok(IndexEntry::for_trajectory(&traj, file, crc)))
                }
                _ => Ok(Err(reject(
                    plan.fitness.worst_level,
                    "no feasible trajectory within the generation budget".into(),
                ))),
            }
        })
        .collect();
    let mut entries = Vec::new();
    let mut rejects = Vec::new();
    for r in results {
        match r? {
            Ok(e) => entries.push(e),
            Err(rej) => rejects.push(rej),
        }
    }
    let index = LibraryIndex::new(entries);
    index.save(out_dir)?;
    let path = out_dir.join(REJECTS_FILE);
    fs::write(&path, serde_yaml::to_string(&rejects)?).map_err(|e| Error::storage(path, e))?;
    Ok(BuildOutcome { index, rejects })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(pos: [f64; 3], rot: f64, energy: f64, file: &str) -> IndexEntry {
        IndexEntry {
            target_pos: pos,
            target_rot: rot,
            motion: MotionType::Front,
            energy_j: energy,
            feasible_box: None,
            file: file.into(),
            checksum: 0,
        }
    }

    #[test]
    fn nearest_entry_wins() {
        let idx = LibraryIndex::new(vec![
            entry([0.3, 0.0, 0.0], 0.0, 5.0, "a"),
            entry([0.0, 0.3, 0.0], 0.0, 4.0, "b"),
        ]);
        let i = select_index(&idx, &Query::new([0.25, 0.0, 0.0], 0.0), 0.1).unwrap();
        assert_eq!(idx.entries[i].file, "a");
    }

    #[test]
    fn ties_go_to_lower_energy() {
        let idx = LibraryIndex::new(vec![
            entry([0.3, 0.0, 0.0], 0.0, 12.0, "hi"),
            entry([0.1, 0.0, 0.0], 0.0, 8.0, "lo"),
        ]);
        let i = select_index(&idx, &Query::new([0.2, 0.0, 0.0], 0.0), 0.1).unwrap();
        assert_eq!(idx.entries[i].file, "lo");
    }

    #[test]
    fn filters_and_empty_set() {
        let idx = LibraryIndex::new(vec![entry([0.3, 0.0, 0.0], 0.0, 5.0, "a")]);
        let mut q = Query::new([0.3, 0.0, 0.0], 0.0);
        q.motion = Some(MotionType::Left);
        assert!(matches!(select_index(&idx, &q, 0.1), Err(Error::NoMatch)));
        q.motion = None;
        q.obstacle = Some(ObstacleSpec::ground(0.15, 0.1, 0.02));
        assert!(matches!(select_index(&idx, &q, 0.1), Err(Error::NoMatch)));
        assert!(matches!(select_index(&LibraryIndex::default(), &Query::new([0.0; 3], 0.0), 0.1), Err(Error::NoMatch)));
    }

    #[test]
    fn box_coverage() {
        let planned = ObstacleSpec::window(0.15, 0.2, 0.5, 0.02);
        assert!(box_covers(&planned, &ObstacleSpec::window(0.16, 0.1, 0.6, 0.0)));
        assert!(!box_covers(&planned, &ObstacleSpec::ground(0.15, 0.25, 0.0)));
        assert!(!box_covers(&planned, &ObstacleSpec::window(0.2, 0.1, 0.6, 0.0)));
    }

    #[test]
    fn index_yaml_round_trip_and_order() {
        let idx = LibraryIndex::new(vec![
            entry([0.3, 0.0, 0.0], 0.1, 9.0, "b"),
            entry([0.2, 0.0, 0.05], 0.0, 3.0, "a"),
        ]);
        assert!(idx.is_sorted());
        let text = idx.to_yaml().unwrap();
        for key in ["target_pos", "target_rot", "motion", "energy_j", "feasible_box", "file", "checksum"] {
            assert!(text.contains(key), "{key}");
        }
        assert_eq!(LibraryIndex::from_yaml(&text).unwrap(), idx);
        let unsorted = LibraryIndex {
            entries: idx.entries.iter().rev().cloned().collect(),
        };
        assert!(unsorted.to_yaml().is_err());
    }

    #[test]
    fn empty_index_is_valid() {
        let text = LibraryIndex::default().to_yaml().unwrap();
        assert!(LibraryIndex::from_yaml(&text).unwrap().entries.is_empty());
    }

    #[test]
    fn sampler_is_keyed_by_index() {
        let s = TaskSampler {
            ground_probability: 0.5,
            window_probability: 0.5,
            ..Default::default()
        };
        let all = s.tasks();
        assert_eq!(all.len(), 20);
        assert_eq!(all[7], s.task(7));
        for t in &all {
            t.validate().unwrap();
            if let Some(o) = t.obstacle {
                o.validate().unwrap();
                assert!((0.05..=0.35).contains(&o.ground_top_z));
            }
        }
        assert!(all.iter().any(|t| t.motion == MotionType::YawSpin));
    }
}
