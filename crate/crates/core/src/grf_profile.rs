//! Phase-wise polynomial contact wrenches.
//!
//! The net planar wrench is linear in time on the four-feet phase, quadratic
//! on the two-feet phase (its constant term pinned to the four-feet value at
//! `T1`) and zero in flight. Twelve free coefficients remain, fixed by the
//! boundary states at `T1` and at liftoff `T2`.

use serde::{Deserialize, Serialize};

use crate::constraints::ObstacleSpec;
use crate::error::{Error, Result};
use crate::srb_model::{
    ballistic_under, inverse_ballistic, moment_of, ContactPattern, MotionType, Pair, PlaneAxis,
    PlanarState, PlanarWrench, RobotParams,
};

/// CoM height of the default crouched start posture, m.
pub const DEFAULT_START_HEIGHT: f64 = 0.22;

/// The twelve optimization variables: cumulative phase end times, the state
/// at the end of the four-feet phase and the rates at the end of flight.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DesignVector {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub mid_state: PlanarState,
    pub terminal_rates: [f64; 3],
}

impl DesignVector {
    pub const DIM: usize = 12;

    pub fn to_array(&self) -> [f64; 12] {
        let m = self.mid_state.to_array();
        let r = self.terminal_rates;
        [
            self.t1, self.t2, self.t3, m[0], m[1], m[2], m[3], m[4], m[5], r[0], r[1], r[2],
        ]
    }

    pub fn from_array(a: &[f64; 12]) -> Self {
        Self {
            t1: a[0],
            t2: a[1],
            t3: a[2],
            mid_state: PlanarState::from_array([a[3], a[4], a[5], a[6], a[7], a[8]]),
            terminal_rates: [a[9], a[10], a[11]],
        }
    }

    /// Maps an optimizer vector whose first three entries are phase
    /// durations onto cumulative phase end times.
    pub fn from_gaps(g: &[f64]) -> Self {
        assert_eq!(g.len(), Self::DIM, "design vectors have 12 entries");
        let mut a = [0.0; 12];
        a.copy_from_slice(g);
        a[1] += a[0];
        a[2] += a[1];
        Self::from_array(&a)
    }

    pub fn to_gaps(&self) -> [f64; 12] {
        let mut a = self.to_array();
        a[2] -= a[1];
        a[1] -= a[0];
        a
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// A jumping task: motion, start state, desired pose at the end of flight and
/// optional obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpTask {
    pub motion: MotionType,
    pub start_state: PlanarState,
    /// `(pos_t, pos_z)` at `T3`.
    pub target_pos: [f64; 2],
    pub target_angle: f64,
    #[serde(default)]
    pub obstacle: Option<ObstacleSpec>,
}

impl JumpTask {
    /// Task starting from rest in the default crouch at the origin, moving by
    /// `displacement = (dt, dz)` and ending at `target_angle`.
    pub fn from_displacement(motion: MotionType, displacement: [f64; 2], target_angle: f64) -> Self {
        let start_state = PlanarState::at_rest(0.0, DEFAULT_START_HEIGHT, 0.0);
        Self {
            motion,
            start_state,
            target_pos: [displacement[0], DEFAULT_START_HEIGHT + displacement[1]],
            target_angle,
            obstacle: None,
        }
    }

    /// The task's canonical flip or jump: flips rotate by their signed 2*pi.
    pub fn standard(motion: MotionType, displacement: [f64; 2]) -> Self {
        Self::from_displacement(motion, displacement, motion.flip_angle().unwrap_or(0.0))
    }

    pub fn with_obstacle(mut self, obstacle: ObstacleSpec) -> Self {
        self.obstacle = Some(obstacle);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.start_state.is_finite()
            && self.target_pos.iter().all(|v| v.is_finite())
            && self.target_angle.is_finite();
        if !finite {
            return Err(Error::InvalidInput("task values must be finite".into()));
        }
        if self.start_state.pos_z <= 0.0 || self.target_pos[1] <= 0.0 {
            return Err(Error::InvalidInput("CoM heights must be positive".into()));
        }
        if self.motion.is_flip()
            && (self.target_angle.abs() - std::f64::consts::TAU).abs() > 1e-9
        {
            return Err(Error::InvalidInput(format!(
                "{} tasks must rotate by 2*pi, got {}",
                self.motion, self.target_angle
            )));
        }
        if self.motion == MotionType::YawSpin
            && (self.start_state.vel_t != 0.0 || self.target_pos[0] != self.start_state.pos_t)
        {
            return Err(Error::InvalidInput(
                "yaw spins have no in-plane translation".into(),
            ));
        }
        if let Some(o) = &self.obstacle {
            o.validate()?;
        }
        Ok(())
    }

    /// Desired state at `T3` with the given terminal rates.
    pub fn terminal_state(&self, rates: [f64; 3]) -> PlanarState {
        PlanarState {
            pos_t: self.target_pos[0],
            pos_z: self.target_pos[1],
            angle: self.target_angle,
            vel_t: rates[0],
            vel_z: rates[1],
            angvel: rates[2],
        }
    }
}

/// Contact configuration at an instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactPhase {
    FourFeet,
    TwoFeet(Pair),
    Flight,
}

/// Mass properties and gravity of the plane a profile lives in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneDynamics {
    pub mass: f64,
    pub inertia: f64,
    pub gravity: f64,
    pub plane: PlaneAxis,
}

impl PlaneDynamics {
    pub fn new(params: &RobotParams, motion: MotionType) -> Self {
        let plane = motion.plane_axis();
        Self {
            mass: params.mass,
            inertia: params.inertia_about(plane),
            gravity: params.gravity,
            plane,
        }
    }

    fn scale(&self, k: usize) -> f64 {
        if k == 2 {
            self.inertia
        } else {
            self.mass
        }
    }

    fn offset(&self, k: usize) -> f64 {
        if k == 1 {
            self.gravity
        } else {
            0.0
        }
    }
}

/// Piecewise polynomial wrench together with the boundary states it was
/// solved for. Component order is `[force_t, force_z, moment]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrenchProfile {
    /// `(slope, intercept)` of `w(t) = slope * t + intercept` on `[0, T1]`.
    pub phase1_coeffs: [[f64; 2]; 3],
    /// `(c2, c1, c0)` of `w = c2 s^2 + c1 s + c0`, `s = t - T1`, on `(T1, T2]`.
    pub phase2_coeffs: [[f64; 3]; 3],
    pub phase_times: [f64; 3],
    /// States at `0`, `T1` and `T2`.
    pub boundary: [PlanarState; 3],
    pub dynamics: PlaneDynamics,
}

fn component(w: &PlanarWrench, k: usize) -> f64 {
    match k {
        0 => w.force_t,
        1 => w.force_z,
        _ => w.moment,
    }
}

fn wrench_from(c: [f64; 3]) -> PlanarWrench {
    PlanarWrench::new(c[0], c[1], c[2])
}

/// `(alpha, beta)` of the acceleration `alpha * t + beta` carrying
/// `(p0, v0)` to `(p1, v1)` in time `h`.
fn solve_linear_segment(p0: f64, v0: f64, p1: f64, v1: f64, h: f64) -> (f64, f64) {
    let dv = v1 - v0;
    let dp = p1 - p0 - v0 * h;
    let alpha = 6.0 * dv / (h * h) - 12.0 * dp / (h * h * h);
    let beta = 6.0 * dp / (h * h) - 2.0 * dv / h;
    (alpha, beta)
}

/// `(c2, c1)` of the acceleration `c2 s^2 + c1 s + c0` carrying `(p0, v0)`
/// to `(p1, v1)` in time `h` for a pinned `c0`.
fn solve_quadratic_segment(p0: f64, v0: f64, p1: f64, v1: f64, c0: f64, h: f64) -> (f64, f64) {
    let dv = v1 - v0 - c0 * h;
    let dp = p1 - p0 - v0 * h - 0.5 * c0 * h * h;
    let h2 = h * h;
    let h3 = h2 * h;
    let c2 = 12.0 * dv / h3 - 36.0 * dp / (h3 * h);
    let c1 = 24.0 * dp / h3 - 6.0 * dv / h2;
    (c2, c1)
}

/// Solves the twelve wrench coefficients for a design vector.
pub fn solve_coefficients(
    d: &DesignVector,
    task: &JumpTask,
    params: &RobotParams,
) -> Result<WrenchProfile> {
    if !d.is_finite() {
        return Err(Error::InvalidInput("non-finite design vector".into()));
    }
    let spin = task.motion.contact_pattern() == ContactPattern::FourToFlight;
    if !(d.t1 > 0.0) {
        return Err(Error::DegenerateDuration(format!("T1 = {} must be > 0", d.t1)));
    }
    if spin {
        if d.t2 < d.t1 {
            return Err(Error::DegenerateDuration("T2 before T1".into()));
        }
    } else if !(d.t2 > d.t1) {
        return Err(Error::DegenerateDuration(format!(
            "two-feet phase has zero length (T1 = {}, T2 = {})",
            d.t1, d.t2
        )));
    }
    if !(d.t3 > d.t2) {
        return Err(Error::DegenerateDuration(format!(
            "flight phase has zero length (T2 = {}, T3 = {})",
            d.t2, d.t3
        )));
    }
    let dynamics = PlaneDynamics::new(params, task.motion);
    let start = task.start_state;
    let target = task.terminal_state(d.terminal_rates);

    // For a spin the four-feet phase ends at liftoff, so T1 = T2.
    let t2 = if spin { d.t1 } else { d.t2 };
    let mut liftoff = inverse_ballistic(&target, d.t3 - t2, params)?;
    if spin {
        liftoff.pos_t = start.pos_t;
        liftoff.vel_t = 0.0;
    }
    let mid = if spin { liftoff } else { d.mid_state };

    let mut phase1 = [[0.0; 2]; 3];
    let mut phase2 = [[0.0; 3]; 3];
    let p0 = start.position();
    let v0 = start.rates();
    let p1 = mid.position();
    let v1 = mid.rates();
    let p2 = liftoff.position();
    let v2 = liftoff.rates();
    for k in 0..3 {
        if spin && k == 0 {
            continue;
        }
        let (scale, offset) = (dynamics.scale(k), dynamics.offset(k));
        let (alpha, beta) = solve_linear_segment(p0[k], v0[k], p1[k], v1[k], d.t1);
        phase1[k] = [scale * alpha, scale * (beta + offset)];
        let c0_acc = alpha * d.t1 + beta;
        let c0 = scale * (c0_acc + offset);
        if spin {
            phase2[k] = [0.0, 0.0, c0];
            continue;
        }
        let (c2, c1) = solve_quadratic_segment(p1[k], v1[k], p2[k], v2[k], c0_acc, t2 - d.t1);
        phase2[k] = [scale * c2, scale * c1, c0];
    }
    let all_finite = phase1.iter().flatten().chain(phase2.iter().flatten()).all(|v| v.is_finite());
    if !all_finite {
        return Err(Error::Numeric("wrench coefficients are not finite".into()));
    }
    Ok(WrenchProfile {
        phase1_coeffs: phase1,
        phase2_coeffs: phase2,
        phase_times: [d.t1, t2, d.t3],
        boundary: [start, mid, liftoff],
        dynamics,
    })
}

impl WrenchProfile {
    pub fn t1(&self) -> f64 {
        self.phase_times[0]
    }

    pub fn t2(&self) -> f64 {
        self.phase_times[1]
    }

    pub fn t3(&self) -> f64 {
        self.phase_times[2]
    }

    pub fn has_two_feet_phase(&self) -> bool {
        self.t2() > self.t1()
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.t3()) {
            return Err(Error::OutOfRange { t, end: self.t3() });
        }
        Ok(())
    }

    fn phase1_at(&self, t: f64) -> [f64; 3] {
        self.phase1_coeffs.map(|[a, b]| a * t + b)
    }

    fn phase2_at(&self, s: f64) -> [f64; 3] {
        self.phase2_coeffs.map(|[c2, c1, c0]| (c2 * s + c1) * s + c0)
    }

    /// Phase-1 wrench evaluated at `T1`, identical to the phase-2 constant terms.
    pub fn phase1_end(&self) -> PlanarWrench {
        wrench_from(self.phase1_at(self.t1()))
    }

    pub fn phase2_start(&self) -> PlanarWrench {
        wrench_from(self.phase2_at(0.0))
    }

    /// Net contact wrench at `t`.
    pub fn eval(&self, t: f64) -> Result<PlanarWrench> {
        self.check_range(t)?;
        Ok(if t <= self.t1() {
            wrench_from(self.phase1_at(t))
        } else if t <= self.t2() {
            wrench_from(self.phase2_at(t - self.t1()))
        } else {
            PlanarWrench::ZERO
        })
    }

    /// Exact planar state at `t` from integrating the polynomial dynamics.
    pub fn state_at(&self, t: f64) -> Result<PlanarState> {
        self.check_range(t)?;
        let dyn_ = &self.dynamics;
        if t > self.t2() {
            return ballistic_under(&self.boundary[2], t - self.t2(), dyn_.gravity);
        }
        let mut pos = [0.0; 3];
        let mut vel = [0.0; 3];
        if t <= self.t1() {
            let s0 = &self.boundary[0];
            let (p0, v0) = (s0.position(), s0.rates());
            for k in 0..3 {
                let [a, b] = self.phase1_coeffs[k];
                let alpha = a / dyn_.scale(k);
                let beta = b / dyn_.scale(k) - dyn_.offset(k);
                vel[k] = v0[k] + 0.5 * alpha * t * t + beta * t;
                pos[k] = p0[k] + v0[k] * t + alpha * t * t * t / 6.0 + 0.5 * beta * t * t;
            }
        } else {
            let s1 = &self.boundary[1];
            let (p1, v1) = (s1.position(), s1.rates());
            let s = t - self.t1();
            for k in 0..3 {
                let [c2, c1, c0] = self.phase2_coeffs[k];
                let c2 = c2 / dyn_.scale(k);
                let c1 = c1 / dyn_.scale(k);
                let c0 = c0 / dyn_.scale(k) - dyn_.offset(k);
                let s2 = s * s;
                vel[k] = v1[k] + c2 * s2 * s / 3.0 + 0.5 * c1 * s2 + c0 * s;
                pos[k] = p1[k] + v1[k] * s + c2 * s2 * s2 / 12.0 + c1 * s2 * s / 6.0 + 0.5 * c0 * s2;
            }
        }
        if dyn_.plane == PlaneAxis::Yaw {
            pos[0] = self.boundary[0].pos_t;
            vel[0] = 0.0;
        }
        Ok(PlanarState {
            pos_t: pos[0],
            pos_z: pos[1],
            angle: pos[2],
            vel_t: vel[0],
            vel_z: vel[1],
            angvel: vel[2],
        })
    }

    /// Which feet touch the ground at `t` for the given contact pattern.
    pub fn contact_phase(&self, t: f64, pattern: ContactPattern) -> ContactPhase {
        if t <= self.t1() {
            ContactPhase::FourFeet
        } else if t <= self.t2() {
            match pattern {
                ContactPattern::FourThenTwo { stance } => ContactPhase::TwoFeet(stance),
                ContactPattern::FourToFlight => ContactPhase::Flight,
            }
        } else {
            ContactPhase::Flight
        }
    }
}

/// Free-function form of [`WrenchProfile::eval`].
pub fn eval_wrench(p: &WrenchProfile, t: f64) -> Result<PlanarWrench> {
    p.eval(t)
}

/// Planar force carried by one contact pair, world frame, ground on feet.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairForce {
    pub f_t: f64,
    pub f_z: f64,
}

impl PairForce {
    pub fn as_array(&self) -> [f64; 2] {
        [self.f_t, self.f_z]
    }
}

/// Contact forces of the two pairs at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FootForces {
    /// Indexed by [`Pair::index`].
    pub forces: [PairForce; 2],
    pub active: [bool; 2],
    /// World positions of the contact points.
    pub feet: [[f64; 2]; 2],
    /// `|moment - moment realized by the contact forces|`, N*m.
    pub realizability_residual: f64,
}

impl FootForces {
    pub fn pair(&self, pair: Pair) -> PairForce {
        self.forces[pair.index()]
    }

    /// Net wrench the active contacts exert about the CoM at `com`.
    pub fn recompose(&self, com: [f64; 2]) -> PlanarWrench {
        let mut w = PlanarWrench::ZERO;
        for k in 0..2 {
            if !self.active[k] {
                continue;
            }
            let f = self.forces[k].as_array();
            let d = [self.feet[k][0] - com[0], self.feet[k][1] - com[1]];
            w.force_t += f[0];
            w.force_z += f[1];
            w.moment += moment_of(d, f);
        }
        w
    }
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut x = [0.0; 3];
    for (col, xc) in x.iter_mut().enumerate() {
        let mut mc = m;
        for row in 0..3 {
            mc[row][col] = b[row];
        }
        *xc = det(&mc) / d;
    }
    Some(x)
}

/// Splits a planar wrench over the contacts active in `phase`.
///
/// Four feet: least-norm pair forces reproducing the wrench exactly. Two
/// feet: the single pair carries the whole force and the moment it cannot
/// produce is reported as the realizability residual.
pub fn distribute_forces(
    w: &PlanarWrench,
    com: &PlanarState,
    feet: [[f64; 2]; 2],
    phase: ContactPhase,
) -> Result<FootForces> {
    let offset = |k: usize| [feet[k][0] - com.pos_t, feet[k][1] - com.pos_z];
    let mut out = FootForces {
        feet,
        ..Default::default()
    };
    match phase {
        ContactPhase::Flight => {}
        ContactPhase::TwoFeet(pair) => {
            let k = pair.index();
            let f = PairForce {
                f_t: w.force_t,
                f_z: w.force_z,
            };
            out.forces[k] = f;
            out.active[k] = true;
            out.realizability_residual = (w.moment - moment_of(offset(k), f.as_array())).abs();
        }
        ContactPhase::FourFeet => {
            let (df, dr) = (offset(0), offset(1));
            let sep = (df[0] - dr[0]).hypot(df[1] - dr[1]);
            if sep < 1e-9 {
                return Err(Error::Geometry("coincident contact points".into()));
            }
            // rows of A: net force_t, net force_z, net moment; unknowns (ftF, fzF, ftR, fzR)
            let a = [
                [1.0, 0.0, 1.0, 0.0],
                [0.0, 1.0, 0.0, 1.0],
                [df[1], -df[0], dr[1], -dr[0]],
            ];
            let mut aat = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    aat[i][j] = (0..4).map(|c| a[i][c] * a[j][c]).sum();
                }
            }
            let lambda = solve3(aat, [w.force_t, w.force_z, w.moment])
                .ok_or_else(|| Error::Geometry("singular contact geometry".into()))?;
            let f: Vec<f64> = (0..4)
                .map(|c| (0..3).map(|i| a[i][c] * lambda[i]).sum())
                .collect();
            out.forces = [
                PairForce { f_t: f[0], f_z: f[1] },
                PairForce { f_t: f[2], f_z: f[3] },
            ];
            out.active = [true, true];
        }
    }
    Ok(out)
}

/// Yaw-spin split: every foot carries a quarter of the vertical force and a
/// tangential force on a circle of `radius` producing the yaw moment. The
/// returned pair forces are `(tangential, vertical)` totals per pair.
pub fn distribute_spin_forces(w: &PlanarWrench, radius: f64) -> Result<FootForces> {
    if radius <= 0.0 {
        return Err(Error::Geometry("spin radius must be positive".into()));
    }
    let f = PairForce {
        f_t: w.moment / (2.0 * radius),
        f_z: 0.5 * w.force_z,
    };
    Ok(FootForces {
        forces: [f, f],
        active: [true, true],
        feet: [[radius, 0.0], [-radius, 0.0]],
        realizability_residual: 0.0,
    })
}

/// Value of a single component of a wrench, `0 = force_t`, `1 = force_z`,
/// `2 = moment`.
pub fn wrench_component(w: &PlanarWrench, k: usize) -> f64 {
    component(w, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params() -> RobotParams {
        RobotParams::default()
    }

    fn hop_design() -> (DesignVector, JumpTask) {
        let task = JumpTask::from_displacement(MotionType::Front, [0.0, 0.0], 0.0);
        let d = DesignVector {
            t1: 0.15,
            t2: 0.25,
            t3: 0.55,
            mid_state: PlanarState {
                pos_z: 0.24,
                vel_z: 0.4,
                ..Default::default()
            },
            terminal_rates: [0.0, -1.4, 0.0],
        };
        (d, task)
    }

    #[test]
    fn vertical_hop_has_no_in_plane_terms() {
        let (d, task) = hop_design();
        let p = solve_coefficients(&d, &task, &params()).unwrap();
        for k in [0, 2] {
            assert!(p.phase1_coeffs[k].iter().all(|&c| c.abs() < 1e-9));
            assert!(p.phase2_coeffs[k].iter().all(|&c| c.abs() < 1e-9));
        }
        assert!(p.phase1_coeffs[1][1] > 0.0);
    }

    #[test]
    fn wrench_branches() {
        let (d, task) = hop_design();
        let p = solve_coefficients(&d, &task, &params()).unwrap();
        assert_eq!(p.eval(d.t2 + 1e-9).unwrap(), PlanarWrench::ZERO);
        let at0 = p.eval(0.0).unwrap();
        assert_eq!(at0.force_z, p.phase1_coeffs[1][1]);
        let left = p.phase1_end();
        let right = p.phase2_start();
        assert_abs_diff_eq!(left.force_z, right.force_z, epsilon = 1e-9);
        assert!(p.eval(-1e-6).is_err());
        assert!(matches!(p.eval(d.t3 + 1e-6), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn closed_form_state_hits_boundaries() {
        let task = JumpTask::standard(MotionType::BackFlip, [-0.05, 0.0]);
        let d = DesignVector {
            t1: 0.2,
            t2: 0.32,
            t3: 0.72,
            mid_state: PlanarState::from_array([-0.06, 0.26, -0.5, -0.3, 1.2, -6.0]),
            terminal_rates: [-0.1, -1.8, -14.0],
        };
        let p = solve_coefficients(&d, &task, &params()).unwrap();
        let at1 = p.state_at(d.t1).unwrap();
        let at2 = p.state_at(d.t2).unwrap();
        let at3 = p.state_at(d.t3).unwrap();
        for (a, b) in at1.to_array().iter().zip(d.mid_state.to_array()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
        for (a, b) in at2.to_array().iter().zip(p.boundary[2].to_array()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(at3.angle, -std::f64::consts::TAU, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_durations_rejected() {
        let (mut d, task) = hop_design();
        d.t2 = d.t1;
        assert!(matches!(
            solve_coefficients(&d, &task, &params()),
            Err(Error::DegenerateDuration(_))
        ));
        let (mut d, _) = hop_design();
        d.t1 = 0.0;
        assert!(solve_coefficients(&d, &task, &params()).is_err());
        let (mut d, _) = hop_design();
        d.t1 = f64::NAN;
        assert!(solve_coefficients(&d, &task, &params()).is_err());
    }

    #[test]
    fn spin_allows_equal_phase_times() {
        let task = JumpTask::from_displacement(MotionType::YawSpin, [0.0, 0.0], std::f64::consts::PI);
        let d = DesignVector {
            t1: 0.2,
            t2: 0.2,
            t3: 0.6,
            terminal_rates: [0.0, -1.9, 8.0],
            ..Default::default()
        };
        let p = solve_coefficients(&d, &task, &params()).unwrap();
        assert!(!p.has_two_feet_phase());
        assert_eq!(p.phase1_coeffs[0], [0.0, 0.0]);
        let end = p.state_at(d.t3).unwrap();
        assert_abs_diff_eq!(end.angle, std::f64::consts::PI, epsilon = 1e-10);
        assert_eq!(end.pos_t, 0.0);
    }

    #[test]
    fn symmetric_four_feet_split() {
        let com = PlanarState::at_rest(0.0, 0.22, 0.0);
        let feet = [[0.19, 0.0], [-0.19, 0.0]];
        let f = distribute_forces(&PlanarWrench::new(0.0, 100.0, 0.0), &com, feet, ContactPhase::FourFeet)
            .unwrap();
        for pf in f.forces {
            assert_abs_diff_eq!(pf.f_t, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(pf.f_z, 50.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn off_center_moment_split() {
        // feet level with the CoM, 0.19 m ahead and behind
        let com = PlanarState::at_rest(0.0, 0.0, 0.0);
        let feet = [[0.19, 0.0], [-0.19, 0.0]];
        let f = distribute_forces(&PlanarWrench::new(0.0, 100.0, 5.0), &com, feet, ContactPhase::FourFeet)
            .unwrap();
        let (front, rear) = (f.pair(Pair::Front), f.pair(Pair::Rear));
        assert_abs_diff_eq!(rear.f_z - front.f_z, 5.0 / 0.19, epsilon = 1e-9);
        assert_abs_diff_eq!(rear.f_z - 50.0, 50.0 - front.f_z, epsilon = 1e-9);
        assert_abs_diff_eq!(front.f_t, 0.0, epsilon = 1e-12);
        // brute-force least norm: scan the one-dimensional null space
        let null_dir = {
            // null space of A for d = (+-0.19, 0): (1, 0, -1, 0)
            [1.0, 0.0, -1.0, 0.0]
        };
        let base = [front.f_t, front.f_z, rear.f_t, rear.f_z];
        let norm = |s: f64| -> f64 { (0..4).map(|i| (base[i] + s * null_dir[i]).powi(2)).sum() };
        for s in [-1.0, -0.1, -1e-3, 1e-3, 0.1, 1.0] {
            assert!(norm(s) > norm(0.0));
        }
    }

    #[test]
    fn two_feet_residual() {
        // CoM relative to the foot is (0.19, -0.29)
        let com = PlanarState::at_rest(0.19, -0.29, 0.0);
        let feet = [[0.0, 0.0], [-5.0, 0.0]];
        let w = PlanarWrench::new(10.0, 60.0, 14.3);
        let f = distribute_forces(&w, &com, feet, ContactPhase::TwoFeet(Pair::Front)).unwrap();
        assert_abs_diff_eq!(f.realizability_residual, 0.0, epsilon = 1e-12);
        assert!(!f.active[1]);
        let off = distribute_forces(
            &PlanarWrench::new(10.0, 60.0, 15.3),
            &com,
            feet,
            ContactPhase::TwoFeet(Pair::Front),
        )
        .unwrap();
        assert_abs_diff_eq!(off.realizability_residual, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_feet_rejected() {
        let com = PlanarState::at_rest(0.0, 0.22, 0.0);
        let feet = [[0.1, 0.0], [0.1, 0.0]];
        assert!(matches!(
            distribute_forces(&PlanarWrench::new(0.0, 100.0, 0.0), &com, feet, ContactPhase::FourFeet),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn gap_mapping_round_trip() {
        let g = [0.1, 0.05, 0.3, 1., 2., 3., 4., 5., 6., 7., 8., 9.];
        let d = DesignVector::from_gaps(&g);
        assert_abs_diff_eq!(d.t2, 0.15, epsilon = 1e-15);
        assert_abs_diff_eq!(d.t3, 0.45, epsilon = 1e-15);
        let back = d.to_gaps();
        for (a, b) in back.iter().zip(g) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }
}
