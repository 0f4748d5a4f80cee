//! Whole-body jump plans: the continuous plan built from a design vector and
//! its time-sampled form.

use crate::error::Result;
use crate::grf_profile::{
    distribute_forces, distribute_spin_forces, solve_coefficients, ContactPhase, DesignVector,
    FootForces, JumpTask, PairForce, WrenchProfile,
};
use crate::leg_kinematics::{
    hip_in_world, inverse_kinematics_clamped, joint_torques, joint_velocities,
    joint_velocities_for, leg_points, quintic_blend, JointState, LinkPositions,
};
use crate::srb_model::{
    rotate, rotate_inv, ContactPattern, Pair, PlaneAxis, PlanarState, PlanarWrench, RobotParams,
};

/// Default planning sample period (200 Hz).
pub const SAMPLE_DT: f64 = 0.005;

/// Joint rate reported when a stance leg sits on a singular configuration.
const SINGULAR_RATE: f64 = 1e6;

/// Everything known about the jump at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sample {
    pub t: f64,
    pub state: PlanarState,
    /// Per pair, world frame. Zero when the pair is off the ground.
    pub forces: [PairForce; 2],
    /// Whether each pair is on the ground.
    pub contact: [bool; 2],
    /// One representative leg per pair; the mirrored leg is identical.
    pub joints: [JointState; 2],
    /// Two-feet moment mismatch, N*m.
    pub residual: f64,
    /// Largest distance by which a foot target lay outside the leg workspace.
    pub reach_deficit: f64,
}

/// Continuous jump plan for one design vector.
#[derive(Debug, Clone)]
pub struct JumpPlan {
    pub task: JumpTask,
    pub design: DesignVector,
    pub profile: WrenchProfile,
    pub params: RobotParams,
    pattern: ContactPattern,
    plane: PlaneAxis,
    feet: [[f64; 2]; 2],
    liftoff_time: [f64; 2],
    liftoff_q: [[f64; 2]; 2],
    landing_q: [[f64; 2]; 2],
    landing_deficit: f64,
}

impl JumpPlan {
    pub fn new(design: &DesignVector, task: &JumpTask, params: &RobotParams) -> Result<Self> {
        task.validate()?;
        let profile = solve_coefficients(design, task, params)?;
        let pattern = task.motion.contact_pattern();
        let plane = task.motion.plane_axis();
        let start = &task.start_state;

        let mut feet = [[0.0; 2]; 2];
        for pair in Pair::BOTH {
            let hip = hip_in_world(start, pair, plane, params);
            feet[pair.index()] = [hip[0], 0.0];
        }
        let liftoff_time = match pattern {
            ContactPattern::FourThenTwo { stance } => {
                let mut t = [profile.t1(); 2];
                t[stance.index()] = profile.t2();
                t
            }
            ContactPattern::FourToFlight => [profile.t1(); 2],
        };
        let mut plan = Self {
            task: *task,
            design: *design,
            profile,
            params: params.clone(),
            pattern,
            plane,
            feet,
            liftoff_time,
            liftoff_q: [[0.0; 2]; 2],
            landing_q: [[0.0; 2]; 2],
            landing_deficit: 0.0,
        };
        for pair in Pair::BOTH {
            let k = pair.index();
            let state = plan.profile.state_at(liftoff_time[k])?;
            plan.liftoff_q[k] = plan.stance_angles(&state, pair).0;
        }
        let end = plan.profile.state_at(plan.profile.t3())?;
        for pair in Pair::BOTH {
            let k = pair.index();
            let (q, deficit) = plan.landing_angles(&end, pair);
            plan.landing_q[k] = q;
            plan.landing_deficit = plan.landing_deficit.max(deficit);
        }
        Ok(plan)
    }

    pub fn plane(&self) -> PlaneAxis {
        self.plane
    }

    pub fn pattern(&self) -> ContactPattern {
        self.pattern
    }

    pub fn phase_times(&self) -> [f64; 3] {
        self.profile.phase_times
    }

    /// World contact point of each pair while it is on the ground.
    pub fn stance_feet(&self) -> [[f64; 2]; 2] {
        self.feet
    }

    fn spin_radius(&self) -> f64 {
        self.params.hip_offset(PlaneAxis::Yaw)
    }

    /// Foot target relative to the hip in the leg's chain frame.
    fn stance_target(&self, state: &PlanarState, pair: Pair) -> [f64; 2] {
        if self.plane == PlaneAxis::Yaw {
            let turned = state.angle - self.task.start_state.angle;
            [-self.spin_radius() * turned, -state.pos_z]
        } else {
            let hip = hip_in_world(state, pair, self.plane, &self.params);
            let foot = self.feet[pair.index()];
            rotate_inv(state.angle, [foot[0] - hip[0], foot[1] - hip[1]])
        }
    }

    /// Leg angles of a stance pair with its foot on the contact point, and
    /// the distance by which the foot lies out of reach.
    pub fn stance_angles(&self, state: &PlanarState, pair: Pair) -> ([f64; 2], f64) {
        inverse_kinematics_clamped(self.stance_target(state, pair), &self.params)
    }

    /// Joint rates of a stance pair at angles `q`.
    pub fn stance_rates(&self, state: &PlanarState, pair: Pair, q: [f64; 2]) -> Result<[f64; 2]> {
        if self.plane == PlaneAxis::Yaw {
            let rate = [-self.spin_radius() * state.angvel, -state.vel_z];
            joint_velocities_for(rate, q, &self.params)
        } else {
            joint_velocities(state, self.feet[pair.index()], q, &self.params)
        }
    }

    /// Force of one leg in its chain frame for a pair force in the world.
    pub fn leg_force(&self, state: &PlanarState, f: PairForce) -> [f64; 2] {
        let half = [0.5 * f.f_t, 0.5 * f.f_z];
        if self.plane == PlaneAxis::Yaw {
            half
        } else {
            rotate_inv(state.angle, half)
        }
    }

    /// Inverse of [`JumpPlan::leg_force`].
    pub fn pair_force(&self, state: &PlanarState, leg: [f64; 2]) -> PairForce {
        let f = if self.plane == PlaneAxis::Yaw {
            leg
        } else {
            rotate(state.angle, leg)
        };
        PairForce {
            f_t: 2.0 * f[0],
            f_z: 2.0 * f[1],
        }
    }

    /// Body wrench produced by the pairs marked active.
    pub fn wrench_of(&self, state: &PlanarState, forces: [PairForce; 2], active: [bool; 2]) -> PlanarWrench {
        if self.plane == PlaneAxis::Yaw {
            let mut w = PlanarWrench::ZERO;
            for k in (0..2).filter(|&k| active[k]) {
                w.force_z += forces[k].f_z;
                w.moment += self.spin_radius() * forces[k].f_t;
            }
            return w;
        }
        FootForces {
            forces,
            active,
            feet: self.feet,
            ..Default::default()
        }
        .recompose([state.pos_t, state.pos_z])
    }

    fn landing_angles(&self, state: &PlanarState, pair: Pair) -> ([f64; 2], f64) {
        let target = if self.plane == PlaneAxis::Yaw {
            [0.0, -state.pos_z]
        } else {
            let hip = hip_in_world(state, pair, self.plane, &self.params);
            rotate_inv(state.angle, [0.0, -hip[1]])
        };
        inverse_kinematics_clamped(target, &self.params)
    }

    fn in_contact(&self, phase: ContactPhase, pair: Pair) -> bool {
        match phase {
            ContactPhase::FourFeet => true,
            ContactPhase::TwoFeet(p) => p == pair,
            ContactPhase::Flight => false,
        }
    }

    /// Contact configuration at `t`.
    pub fn contact_phase(&self, t: f64) -> ContactPhase {
        self.profile.contact_phase(t, self.pattern)
    }

    fn foot_forces(&self, t: f64, state: &PlanarState, phase: ContactPhase) -> Result<FootForces> {
        let w = self.profile.eval(t)?;
        if self.plane == PlaneAxis::Yaw {
            if phase == ContactPhase::Flight {
                return Ok(FootForces::default());
            }
            return distribute_spin_forces(&w, self.spin_radius());
        }
        distribute_forces(&w, state, self.feet, phase)
    }

    /// Leg angles at `t` without forces or rates.
    fn leg_angles(&self, t: f64, state: &PlanarState, phase: ContactPhase) -> ([[f64; 2]; 2], f64) {
        let mut q = [[0.0; 2]; 2];
        let mut deficit: f64 = 0.0;
        for pair in Pair::BOTH {
            let k = pair.index();
            if self.in_contact(phase, pair) {
                let (qk, d) = self.stance_angles(state, pair);
                q[k] = qk;
                deficit = deficit.max(d);
            } else {
                for (j, qj) in q[k].iter_mut().enumerate() {
                    *qj = quintic_blend(
                        self.liftoff_q[k][j],
                        self.landing_q[k][j],
                        self.liftoff_time[k],
                        self.profile.t3(),
                        t,
                    )
                    .0;
                }
            }
        }
        (q, deficit)
    }

    /// Full snapshot at `t`.
    pub fn sample(&self, t: f64) -> Result<Sample> {
        let state = self.profile.state_at(t)?;
        let phase = self.contact_phase(t);
        let forces = self.foot_forces(t, &state, phase)?;
        let mut out = Sample {
            t,
            state,
            residual: forces.realizability_residual,
            ..Default::default()
        };
        for pair in Pair::BOTH {
            let k = pair.index();
            let joint = &mut out.joints[k];
            if self.in_contact(phase, pair) {
                let (q, deficit) = self.stance_angles(&state, pair);
                out.reach_deficit = out.reach_deficit.max(deficit);
                out.contact[k] = true;
                out.forces[k] = forces.forces[k];
                let qdot = self.stance_rates(&state, pair, q).unwrap_or([SINGULAR_RATE; 2]);
                let tau = joint_torques(self.leg_force(&state, forces.forces[k]), q, &self.params);
                joint.q = [0.0, q[0], q[1]];
                joint.qdot = [0.0, qdot[0], qdot[1]];
                joint.tau = [0.0, tau[0], tau[1]];
            } else {
                let t0 = self.liftoff_time[k];
                let t1 = self.profile.t3();
                for j in 0..2 {
                    let (q, qd) = quintic_blend(self.liftoff_q[k][j], self.landing_q[k][j], t0, t1, t);
                    joint.q[j + 1] = q;
                    joint.qdot[j + 1] = qd;
                }
            }
        }
        if t >= self.profile.t3() {
            out.reach_deficit = out.reach_deficit.max(self.landing_deficit);
        }
        Ok(out)
    }

    /// World positions of every joint at `t`.
    pub fn links_at(&self, t: f64) -> Result<LinkPositions> {
        let state = self.profile.state_at(t)?;
        let (q, _) = self.leg_angles(t, &state, self.contact_phase(t));
        Ok(self.links_for(&state, &q))
    }

    /// Link positions for a body state and `(q_pitch, q_knee)` per pair.
    pub fn links_for(&self, state: &PlanarState, q: &[[f64; 2]; 2]) -> LinkPositions {
        link_positions(state, q, self.plane, &self.params)
    }

    /// Sample times on a uniform grid of period `dt`, with the phase
    /// boundaries inserted.
    pub fn sample_times(&self, dt: f64) -> Vec<f64> {
        let [t1, t2, t3] = self.profile.phase_times;
        let mut times: Vec<f64> = (0..)
            .map(|k| k as f64 * dt)
            .take_while(|&t| t < t3 - 1e-9)
            .collect();
        for b in [t1, t2] {
            if times.iter().all(|&t| (t - b).abs() > 1e-9) {
                times.push(b);
            }
        }
        times.push(t3);
        times.sort_by(f64::total_cmp);
        times
    }

    pub fn sample_all(&self, dt: f64) -> Result<Vec<Sample>> {
        self.sample_times(dt).into_iter().map(|t| self.sample(t)).collect()
    }

    /// Sampled trajectory with its energy; the feasibility certificate is
    /// left empty.
    pub fn to_trajectory(&self, dt: f64) -> Result<Trajectory> {
        let samples = self.sample_all(dt)?;
        let energy = crate::fitness::energy_of_samples(&samples);
        Ok(Trajectory {
            task: self.task,
            design: self.design,
            phase_times: self.phase_times(),
            samples,
            energy,
            certificate: 0,
        })
    }
}

/// Link positions for a body state and leg angles in `plane`.
pub fn link_positions(
    state: &PlanarState,
    q: &[[f64; 2]; 2],
    plane: PlaneAxis,
    params: &RobotParams,
) -> LinkPositions {
    let mut out = LinkPositions::default();
    for pair in Pair::BOTH {
        let k = pair.index();
        out.legs[k] = if plane == PlaneAxis::Yaw {
            let hip = [pair.sign() * params.hip_offset(plane), state.pos_z];
            leg_points(hip, 0.0, q[k], params)
        } else {
            let hip = hip_in_world(state, pair, plane, params);
            leg_points(hip, state.angle, q[k], params)
        };
    }
    out
}

/// Time-sampled jump, the unit stored in the motion library.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub task: JumpTask,
    pub design: DesignVector,
    pub phase_times: [f64; 3],
    pub samples: Vec<Sample>,
    /// Joules.
    pub energy: f64,
    /// CRC32 of the constraint report the trajectory was accepted with.
    pub certificate: u32,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.phase_times[2]
    }

    pub fn rebuild_plan(&self, params: &RobotParams) -> Result<JumpPlan> {
        JumpPlan::new(&self.design, &self.task, params)
    }

    pub fn final_state(&self) -> PlanarState {
        self.samples.last().map(|s| s.state).unwrap_or_default()
    }

    /// Samples strictly inside the flight phase or at its end.
    pub fn flight_samples(&self) -> impl Iterator<Item = &Sample> {
        let t2 = self.phase_times[1];
        self.samples.iter().filter(move |s| s.t > t2)
    }
}
