//! Replays planned jumps through the joint-level control pipeline on the
//! single-rigid-body model: 1 kHz reference interpolation, PD with
//! feed-forward torque, low-pass filtered landing targets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grf_profile::{ContactPhase, PairForce};
use crate::leg_kinematics::foot_force_from_torques;
use crate::srb_model::{integrate_step, Pair, PlanarState, PlanarWrench, RobotParams};
use crate::trajectory::{JumpPlan, Trajectory};

/// Diagonal joint gains, ordered abduction, hip, knee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdGains {
    pub kp: [f64; 3],
    pub kd: [f64; 3],
}

impl PdGains {
    pub const LANDING: PdGains = PdGains {
        kp: [25.0, 45.0, 45.0],
        kd: [1.5, 2.5, 2.5],
    };
    pub const STANCE: PdGains = PdGains {
        kp: [80.0; 3],
        kd: [2.0; 3],
    };
    pub const ZERO: PdGains = PdGains {
        kp: [0.0; 3],
        kd: [0.0; 3],
    };

    pub fn validate(&self) -> Result<()> {
        if self.kp.iter().chain(&self.kd).all(|g| g.is_finite() && *g >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!("PD gains must be finite and non-negative: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutConfig {
    pub dt: f64,
    pub stance: PdGains,
    pub landing: PdGains,
    /// Landing filter time constant, s.
    pub filter_time_constant: f64,
    /// Largest final angle error still counted as upright, rad.
    pub upright_tolerance: f64,
    /// Largest final CoM position error counted as a success, m.
    pub position_tolerance: f64,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            stance: PdGains::STANCE,
            landing: PdGains::LANDING,
            filter_time_constant: 0.02,
            upright_tolerance: 0.2,
            position_tolerance: 0.05,
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        self.stance.validate()?;
        self.landing.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("rollout step {} must be positive", self.dt)));
        }
        if !(self.filter_time_constant > 0.0) {
            return Err(Error::Config("filter time constant must be positive".into()));
        }
        Ok(())
    }
}

/// Joint references of both pairs at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Reference {
    pub t: f64,
    pub state: PlanarState,
    pub q: [[f64; 3]; 2],
    pub qdot: [[f64; 3]; 2],
    pub tau: [[f64; 3]; 2],
    pub forces: [PairForce; 2],
}

fn lerp(a: f64, b: f64, s: f64) -> f64 {
    a + (b - a) * s
}

fn lerp3(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [lerp(a[0], b[0], s), lerp(a[1], b[1], s), lerp(a[2], b[2], s)]
}

/// Linear interpolation of the stored samples at `t`, clamped to the ends.
pub fn interpolate(traj: &Trajectory, t: f64) -> Reference {
    let samples = &traj.samples;
    let i = samples.partition_point(|s| s.t <= t);
    let (a, b) = match i {
        0 => (&samples[0], &samples[0]),
        i if i >= samples.len() => (&samples[samples.len() - 1], &samples[samples.len() - 1]),
        i => (&samples[i - 1], &samples[i]),
    };
    let s = if b.t > a.t { ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0) } else { 0.0 };
    let (sa, sb) = (a.state.to_array(), b.state.to_array());
    let mut state = [0.0; 6];
    for k in 0..6 {
        state[k] = lerp(sa[k], sb[k], s);
    }
    let mut r = Reference {
        t,
        state: PlanarState::from_array(state),
        ..Default::default()
    };
    for k in 0..2 {
        r.q[k] = lerp3(a.joints[k].q, b.joints[k].q, s);
        r.qdot[k] = lerp3(a.joints[k].qdot, b.joints[k].qdot, s);
        r.tau[k] = lerp3(a.joints[k].tau, b.joints[k].tau, s);
        r.forces[k] = PairForce {
            f_t: lerp(a.forces[k].f_t, b.forces[k].f_t, s),
            f_z: lerp(a.forces[k].f_z, b.forces[k].f_z, s),
        };
    }
    r
}

/// References every `1 / rate_hz` seconds over `[0, T3]`, ending exactly at
/// `T3`.
pub fn reference_stream(traj: &Trajectory, rate_hz: f64) -> Result<Vec<Reference>> {
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::InvalidInput(format!("rate {rate_hz} must be positive")));
    }
    if traj.samples.is_empty() {
        return Err(Error::InvalidInput("trajectory has no samples".into()));
    }
    let end = traj.duration();
    let step = 1.0 / rate_hz;
    let mut out: Vec<Reference> = (0..)
        .map(|k| k as f64 * step)
        .take_while(|&t| t < end - 1e-12)
        .map(|t| interpolate(traj, t))
        .collect();
    out.push(interpolate(traj, end));
    Ok(out)
}

/// `tau_ref + kp (q_ref - q) + kd (qdot_ref - qdot)`, clamped to `tau_max`.
pub fn pd_command(
    q: [f64; 3],
    qdot: [f64; 3],
    q_ref: [f64; 3],
    qdot_ref: [f64; 3],
    tau_ref: [f64; 3],
    gains: &PdGains,
    tau_max: f64,
) -> [f64; 3] {
    let mut tau = [0.0; 3];
    for j in 0..3 {
        let raw = tau_ref[j] + gains.kp[j] * (q_ref[j] - q[j]) + gains.kd[j] * (qdot_ref[j] - qdot[j]);
        tau[j] = raw.clamp(-tau_max, tau_max);
    }
    tau
}

/// First-order low-pass blend `q (1 - alpha) + q_ref alpha`.
pub fn landing_filter(q: f64, q_ref: f64, alpha: f64) -> f64 {
    q * (1.0 - alpha) + q_ref * alpha
}

/// `exp(-ts / time_constant)`.
pub fn filter_alpha(ts: f64, time_constant: f64) -> f64 {
    (-ts / time_constant).exp()
}

/// One simulated control tick.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RolloutRow {
    pub t: f64,
    pub state: PlanarState,
    pub q: [[f64; 3]; 2],
    pub tau_cmd: [[f64; 3]; 2],
    pub forces: [PairForce; 2],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutReport {
    pub rows: Vec<RolloutRow>,
    /// CoM position error per tick, m.
    pub com_error: Vec<f64>,
    /// Largest joint angle error per tick, rad.
    pub joint_error: Vec<f64>,
    pub apex_height: f64,
    pub planned_apex: f64,
    /// `(t, z, angle)` error at touchdown.
    pub final_pose_error: [f64; 3],
    pub max_tau_cmd: f64,
    pub success: bool,
    pub failure: Option<String>,
}

impl RolloutReport {
    pub fn max_com_error(&self) -> f64 {
        self.com_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_joint_error(&self) -> f64 {
        self.joint_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(
            "t,pos_t,pos_z,angle,vel_t,vel_z,angvel,\
             q_front_hip,q_front_knee,q_rear_hip,q_rear_knee,\
             tau_front_hip,tau_front_knee,tau_rear_hip,tau_rear_knee,\
             f_front_t,f_front_z,f_rear_t,f_rear_z\n",
        );
        for r in &self.rows {
            let mut cols = vec![r.t];
            cols.extend(r.state.to_array());
            for k in 0..2 {
                cols.extend([r.q[k][1], r.q[k][2]]);
            }
            for k in 0..2 {
                cols.extend([r.tau_cmd[k][1], r.tau_cmd[k][2]]);
            }
            for k in 0..2 {
                cols.extend(r.forces[k].as_array());
            }
            let line: Vec<String> = cols.iter().map(|v| format!("{v:.9}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

fn active_pairs(phase: ContactPhase) -> [bool; 2] {
    match phase {
        ContactPhase::FourFeet => [true, true],
        ContactPhase::TwoFeet(p) => {
            let mut a = [false; 2];
            a[p.index()] = true;
            a
        }
        ContactPhase::Flight => [false, false],
    }
}

/// Simulates the jump at `cfg.dt` up to touchdown.
///
/// Commanded torques are motor torques, so the planned feed-forward enters
/// as `-J^T f`. Stance feet stay on their contact points and the ground
/// pushes back with `-J^-T tau_cmd`. Swing joints follow their
/// low-pass filtered targets exactly. A non-finite state or a singular
/// stance leg ends the run with a failure report.
pub fn rollout(traj: &Trajectory, cfg: &RolloutConfig, params: &RobotParams) -> Result<RolloutReport> {
    cfg.validate()?;
    let plan = traj.rebuild_plan(params)?;
    let end = traj.duration();
    let steps = (end / cfg.dt).ceil() as usize;
    let alpha = filter_alpha(cfg.dt, cfg.filter_time_constant);
    let mut report = RolloutReport::default();
    let mut state = traj.task.start_state;
    let mut swing_q: [Option<[f64; 3]>; 2] = [None; 2];
    let mut apex = f64::NEG_INFINITY;
    let mut planned_apex = f64::NEG_INFINITY;

    for i in 0..=steps {
        let t = (i as f64 * cfg.dt).min(end);
        let planned = plan.profile.state_at(t)?;
        report.com_error.push((state.pos_t - planned.pos_t).hypot(state.pos_z - planned.pos_z));
        let phase = plan.contact_phase(t);
        if phase == ContactPhase::Flight {
            apex = apex.max(state.pos_z);
            planned_apex = planned_apex.max(planned.pos_z);
        }
        let refs = interpolate(traj, t);
        let active = active_pairs(phase);
        let mut row = RolloutRow {
            t,
            state,
            ..Default::default()
        };
        let mut joint_err: f64 = 0.0;
        for pair in Pair::BOTH {
            let k = pair.index();
            let (q, qdot, gains) = if active[k] {
                let (q2, _) = plan.stance_angles(&state, pair);
                let Ok(qd2) = plan.stance_rates(&state, pair, q2) else {
                    return Ok(fail(report, format!("singular stance leg at t = {t:.4}")));
                };
                ([0.0, q2[0], q2[1]], [0.0, qd2[0], qd2[1]], &cfg.stance)
            } else {
                let prev = swing_q[k].unwrap_or(refs.q[k]);
                let mut q = [0.0; 3];
                let mut qdot = [0.0; 3];
                for j in 0..3 {
                    q[j] = landing_filter(prev[j], refs.q[k][j], alpha);
                    qdot[j] = (q[j] - prev[j]) / cfg.dt;
                }
                swing_q[k] = Some(q);
                (q, qdot, &cfg.landing)
            };
            let tau_ff = refs.tau[k].map(|v| -v);
            let tau = pd_command(q, qdot, refs.q[k], refs.qdot[k], tau_ff, gains, params.joint_torque_max);
            for j in 0..3 {
                joint_err = joint_err.max((q[j] - refs.q[k][j]).abs());
                report.max_tau_cmd = report.max_tau_cmd.max(tau[j].abs());
            }
            row.q[k] = q;
            row.tau_cmd[k] = tau;
            if active[k] {
                let Ok(leg) = foot_force_from_torques([-tau[1], -tau[2]], [q[1], q[2]], params) else {
                    return Ok(fail(report, format!("singular stance leg at t = {t:.4}")));
                };
                row.forces[k] = plan.pair_force(&state, leg);
            }
        }
        report.joint_error.push(joint_err);
        report.rows.push(row);
        if i == steps {
            break;
        }
        let h = ((i + 1) as f64 * cfg.dt).min(end) - t;
        let w = plan.wrench_of(&state, row.forces, active);
        state = integrate_step(&state, &w, h, params, traj.task.motion)?;
        if !state.is_finite() {
            return Ok(fail(report, format!("state diverged at t = {t:.4}")));
        }
    }

    let target = plan.profile.state_at(end)?;
    report.final_pose_error = [
        state.pos_t - target.pos_t,
        state.pos_z - target.pos_z,
        state.angle - target.angle,
    ];
    report.apex_height = apex;
    report.planned_apex = planned_apex;
    let [et, ez, ea] = report.final_pose_error;
    report.success = ea.abs() <= cfg.upright_tolerance
        && et.hypot(ez) <= cfg.position_tolerance
        && report.max_tau_cmd <= params.joint_torque_max;
    if !report.success {
        report.failure = Some(format!("touchdown pose error {:?} outside tolerance", report.final_pose_error));
    }
    Ok(report)
}

fn fail(mut report: RolloutReport, reason: String) -> RolloutReport {
    report.success = false;
    report.failure = Some(reason);
    report
}

/// CoM path from integrating the planned wrench open-loop.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Replay {
    pub states: Vec<PlanarState>,
    /// Largest CoM position distance to the plan, m.
    pub max_error: f64,
}

/// Integrates the plan's own wrench profile with step `dt`, bypassing the
/// joint controller.
pub fn replay_forces(traj: &Trajectory, params: &RobotParams, dt: f64) -> Result<Replay> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidInput(format!("step {dt} must be positive")));
    }
    let plan: JumpPlan = traj.rebuild_plan(params)?;
    let end = traj.duration();
    let steps = (end / dt).ceil() as usize;
    let mut state = traj.task.start_state;
    let mut out = Replay {
        states: vec![state],
        max_error: 0.0,
    };
    let bounds = plan.phase_times();
    for i in 0..steps {
        let t = i as f64 * dt;
        let next = ((i + 1) as f64 * dt).min(end);
        // split steps at phase boundaries so no step spans a force jump, and
        // hold each piece at its midpoint force
        let mut at = t;
        for b in bounds.iter().copied().filter(|&b| b > t && b < next).chain([next]) {
            let w: PlanarWrench = plan.profile.eval(0.5 * (at + b))?;
            state = integrate_step(&state, &w, b - at, params, traj.task.motion)?;
            at = b;
        }
        let planned = plan.profile.state_at(next)?;
        let err = (state.pos_t - planned.pos_t).hypot(state.pos_z - planned.pos_z);
        out.max_error = out.max_error.max(err);
        out.states.push(state);
    }
    Ok(out)
}
