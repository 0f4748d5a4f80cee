//! Two-link planar leg kinematics for the simplified two-leg model.
//!
//! Joint angles are measured in the body frame from the leg's reference
//! direction (straight down): a link at absolute angle `a` points along
//! `(-sin a, -cos a)`. The knee-backward branch has `q_knee < 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::srb_model::{rotate, rotate_inv, Pair, PlaneAxis, PlanarState, RobotParams};

/// Joint angles, rates and torques of one leg, `[hip roll, hip pitch, knee]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointState {
    pub q: [f64; 3],
    pub qdot: [f64; 3],
    pub tau: [f64; 3],
}

/// World positions `(t, z)` of one leg's hip, knee and foot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LegPoints {
    pub hip: [f64; 2],
    pub knee: [f64; 2],
    pub foot: [f64; 2],
}

impl LegPoints {
    /// `[hip, knee, foot]`.
    pub fn joints(&self) -> [[f64; 2]; 3] {
        [self.hip, self.knee, self.foot]
    }
}

/// Link positions of both legs, indexed by [`Pair::index`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkPositions {
    pub legs: [LegPoints; 2],
}

fn direction(angle: f64) -> [f64; 2] {
    [-angle.sin(), -angle.cos()]
}

/// Hip position in the body frame for `pair` in `plane`.
pub fn hip_in_body(pair: Pair, plane: PlaneAxis, params: &RobotParams) -> [f64; 2] {
    [pair.sign() * params.hip_offset(plane), 0.0]
}

/// Reachable hip-to-foot distances after the workspace margin.
pub fn reach_limits(params: &RobotParams) -> (f64, f64) {
    let (l1, l2) = (params.thigh(), params.shank());
    let eps = params.workspace_margin;
    ((l1 - l2).abs() + eps, l1 + l2 - eps)
}

/// Foot position relative to the hip, body frame, for `(q_pitch, q_knee)`.
pub fn foot_in_hip(q: [f64; 2], params: &RobotParams) -> [f64; 2] {
    let a = direction(q[0]);
    let b = direction(q[0] + q[1]);
    [
        params.thigh() * a[0] + params.shank() * b[0],
        params.thigh() * a[1] + params.shank() * b[1],
    ]
}

fn solve_ik(v: [f64; 2], params: &RobotParams) -> [f64; 2] {
    let (l1, l2) = (params.thigh(), params.shank());
    let d2 = v[0] * v[0] + v[1] * v[1];
    let cos_knee = ((d2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let knee = -cos_knee.acos();
    // angle of a vector in the (-sin, -cos) parameterization
    let heading = |x: f64, z: f64| (-x).atan2(-z);
    let thigh_frame = [-l2 * knee.sin(), -l1 - l2 * knee.cos()];
    let pitch = heading(v[0], v[1]) - heading(thigh_frame[0], thigh_frame[1]);
    [wrap_angle(pitch), knee]
}

fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut a = a;
    while a > PI {
        a -= 2.0 * PI;
    }
    while a < -PI {
        a += 2.0 * PI;
    }
    a
}

/// Knee-backward two-link inverse kinematics. `foot_rel_hip` is in the body
/// frame.
pub fn inverse_kinematics(foot_rel_hip: [f64; 2], params: &RobotParams) -> Result<[f64; 2]> {
    let (q, deficit) = inverse_kinematics_clamped(foot_rel_hip, params);
    if deficit > 0.0 {
        return Err(Error::Reach { deficit });
    }
    Ok(q)
}

/// Inverse kinematics that projects unreachable targets onto the workspace
/// boundary and reports how far outside they were.
pub fn inverse_kinematics_clamped(foot_rel_hip: [f64; 2], params: &RobotParams) -> ([f64; 2], f64) {
    let (lo, hi) = reach_limits(params);
    let d = foot_rel_hip[0].hypot(foot_rel_hip[1]);
    if !d.is_finite() {
        return (solve_ik([0.0, -hi], params), f64::INFINITY);
    }
    let (target, deficit) = if d > hi {
        let s = hi / d;
        ([foot_rel_hip[0] * s, foot_rel_hip[1] * s], d - hi)
    } else if d < lo {
        let dir = if d > 0.0 {
            [foot_rel_hip[0] / d, foot_rel_hip[1] / d]
        } else {
            [0.0, -1.0]
        };
        ([dir[0] * lo, dir[1] * lo], lo - d)
    } else {
        (foot_rel_hip, 0.0)
    };
    (solve_ik(target, params), deficit)
}

/// Hip, knee and foot of one leg in the world frame.
pub fn leg_points(hip_world: [f64; 2], body_angle: f64, q: [f64; 2], params: &RobotParams) -> LegPoints {
    let thigh = direction(body_angle + q[0]);
    let shank = direction(body_angle + q[0] + q[1]);
    let knee = [
        hip_world[0] + params.thigh() * thigh[0],
        hip_world[1] + params.thigh() * thigh[1],
    ];
    let foot = [
        knee[0] + params.shank() * shank[0],
        knee[1] + params.shank() * shank[1],
    ];
    LegPoints {
        hip: hip_world,
        knee,
        foot,
    }
}

/// World hip position of `pair` for the body pose in `pose`.
pub fn hip_in_world(pose: &PlanarState, pair: Pair, plane: PlaneAxis, params: &RobotParams) -> [f64; 2] {
    let h = rotate(pose.angle, hip_in_body(pair, plane, params));
    [pose.pos_t + h[0], pose.pos_z + h[1]]
}

/// Link positions of both legs. `q[k]` holds `(q_pitch, q_knee)` of the leg
/// at pair index `k`.
pub fn forward_kinematics(
    q: &[[f64; 2]; 2],
    pose: &PlanarState,
    plane: PlaneAxis,
    params: &RobotParams,
) -> LinkPositions {
    let mut out = LinkPositions::default();
    for pair in Pair::BOTH {
        let k = pair.index();
        let hip = hip_in_world(pose, pair, plane, params);
        out.legs[k] = leg_points(hip, pose.angle, q[k], params);
    }
    out
}

/// `d(foot_in_hip) / d(q_pitch, q_knee)`, body frame, row-major.
pub fn leg_jacobian(q: [f64; 2], params: &RobotParams) -> [[f64; 2]; 2] {
    let (l1, l2) = (params.thigh(), params.shank());
    let (s1, c1) = q[0].sin_cos();
    let (s12, c12) = (q[0] + q[1]).sin_cos();
    [[-l1 * c1 - l2 * c12, -l2 * c12], [l1 * s1 + l2 * s12, l2 * s12]]
}

pub fn jacobian_det(j: &[[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// Jacobian determinant below which a leg counts as singular.
pub const SINGULAR_DET: f64 = 1e-9;

/// `tau = J^T f` for a force the ground exerts on the foot (body frame).
pub fn joint_torques(f_foot: [f64; 2], q: [f64; 2], params: &RobotParams) -> [f64; 2] {
    let j = leg_jacobian(q, params);
    [
        j[0][0] * f_foot[0] + j[1][0] * f_foot[1],
        j[0][1] * f_foot[0] + j[1][1] * f_foot[1],
    ]
}

/// Foot force (body frame) that a joint torque pair balances, `J^-T tau`.
pub fn foot_force_from_torques(tau: [f64; 2], q: [f64; 2], params: &RobotParams) -> Result<[f64; 2]> {
    let j = leg_jacobian(q, params);
    let det = jacobian_det(&j);
    if det.abs() < SINGULAR_DET {
        return Err(Error::Singular { det });
    }
    // solve J^T f = tau
    Ok([
        (j[1][1] * tau[0] - j[1][0] * tau[1]) / det,
        (-j[0][1] * tau[0] + j[0][0] * tau[1]) / det,
    ])
}

fn solve_jacobian(q: [f64; 2], rhs: [f64; 2], params: &RobotParams) -> Result<[f64; 2]> {
    let j = leg_jacobian(q, params);
    let det = jacobian_det(&j);
    if det.abs() < SINGULAR_DET {
        return Err(Error::Singular { det });
    }
    Ok([
        (j[1][1] * rhs[0] - j[0][1] * rhs[1]) / det,
        (-j[1][0] * rhs[0] + j[0][0] * rhs[1]) / det,
    ])
}

/// Joint rates of a stance leg whose foot is pinned at `foot_world` while
/// the body moves with `state`.
pub fn joint_velocities(
    state: &PlanarState,
    foot_world: [f64; 2],
    q: [f64; 2],
    params: &RobotParams,
) -> Result<[f64; 2]> {
    // w = R^T (foot - com) is the foot in the body frame; its rate is
    // angvel * S w - R^T v with S = [[0, -1], [1, 0]].
    let w = rotate_inv(
        state.angle,
        [foot_world[0] - state.pos_t, foot_world[1] - state.pos_z],
    );
    let v = rotate_inv(state.angle, [state.vel_t, state.vel_z]);
    let rate = [-state.angvel * w[1] - v[0], state.angvel * w[0] - v[1]];
    solve_jacobian(q, rate, params)
}

/// Joint rates producing the body-frame foot velocity `foot_rate`.
pub fn joint_velocities_for(foot_rate: [f64; 2], q: [f64; 2], params: &RobotParams) -> Result<[f64; 2]> {
    solve_jacobian(q, foot_rate, params)
}

/// Quintic rest-to-rest blend from `q0` at `t0` to `q1` at `t1`, returning
/// the angle and rate at `t`.
pub fn quintic_blend(q0: f64, q1: f64, t0: f64, t1: f64, t: f64) -> (f64, f64) {
    let span = t1 - t0;
    if span <= 0.0 {
        return (q1, 0.0);
    }
    let s = ((t - t0) / span).clamp(0.0, 1.0);
    let s2 = s * s;
    let shape = s2 * s * (10.0 - 15.0 * s + 6.0 * s2);
    let rate = 30.0 * s2 * (1.0 - s) * (1.0 - s) / span;
    (q0 + (q1 - q0) * shape, (q1 - q0) * rate)
}
