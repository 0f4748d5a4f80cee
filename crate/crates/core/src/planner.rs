//! Single-task planning: design-space bounds for a task and the DE run that
//! searches them.

use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintReport;
use crate::de_optimizer::{optimize_parallel, DeConfig, DeResult, EarlyStop};
use crate::error::{Error, Result};
use crate::fitness::{evaluate_design, FitnessConfig, FitnessValue};
use crate::grf_profile::{DesignVector, JumpTask};
use crate::grf_profile::{distribute_forces, solve_coefficients, ContactPhase, PlaneDynamics};
use crate::leg_kinematics::hip_in_world;
use crate::srb_model::{moment_of, ContactPattern, Pair, PlaneAxis, PlanarState, PlanarWrench, RobotParams};
use crate::trajectory::{JumpPlan, Trajectory};

/// Maps optimizer vectors onto design vectors.
///
/// The optimizer works on `[d1, d2, d3, p(T1), a_t, a_z, f, p(T2)]`:
/// phase durations instead of end times, and in place of the rates at `T1`
/// the CoM acceleration reached at the end of the four-feet phase. The
/// angular entry `f` is the normal force left on the pair that lifts off at
/// `T1`, which fixes the moment there; motions without a two-feet phase use
/// the angular acceleration instead. The last three entries are the takeoff
/// pose, from which the ballistic flight gives the landing rates. For a fixed
/// start state and phase times these quantities and the rates determine each
/// other, so both forms describe the same design.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    task: JumpTask,
    params: RobotParams,
    start: PlanarState,
    target: PlanarState,
    dynamics: PlaneDynamics,
    feet: [[f64; 2]; 2],
    lifting: Option<Pair>,
}

impl SearchSpace {
    pub fn new(task: &JumpTask, params: &RobotParams) -> Self {
        let plane = task.motion.plane_axis();
        let mut feet = [[0.0; 2]; 2];
        for pair in Pair::BOTH {
            let hip = hip_in_world(&task.start_state, pair, plane, params);
            feet[pair.index()] = [hip[0], 0.0];
        }
        let lifting = match task.motion.contact_pattern() {
            ContactPattern::FourThenTwo { stance } => Some(stance.other()),
            ContactPattern::FourToFlight => None,
        };
        Self {
            task: *task,
            params: params.clone(),
            start: task.start_state,
            target: task.terminal_state([0.0; 3]),
            dynamics: PlaneDynamics::new(params, task.motion),
            feet,
            lifting,
        }
    }

    /// Normal force on the lifting pair at `T1` as an affine function
    /// `f0 + slope * moment` of the moment.
    fn lifting_force_map(&self, p1: [f64; 3], force: [f64; 2], pair: Pair) -> Option<(f64, f64)> {
        let com = PlanarState::at_rest(p1[0], p1[1], p1[2]);
        let split = |moment: f64| {
            distribute_forces(
                &PlanarWrench::new(force[0], force[1], moment),
                &com,
                self.feet,
                ContactPhase::FourFeet,
            )
            .ok()
            .map(|f| f.pair(pair).f_z)
        };
        let f0 = split(0.0)?;
        let slope = split(1.0)? - f0;
        (slope != 0.0).then_some((f0, slope))
    }

    fn force_at(&self, accel: [f64; 2]) -> [f64; 2] {
        let dyn_ = &self.dynamics;
        [dyn_.mass * accel[0], dyn_.mass * (accel[1] + dyn_.gravity)]
    }

    fn angular_accel(&self, p1: [f64; 3], accel: [f64; 2], coord: f64) -> f64 {
        let Some(pair) = self.lifting else {
            return coord;
        };
        match self.lifting_force_map(p1, self.force_at(accel), pair) {
            Some((f0, slope)) => (coord - f0) / slope / self.dynamics.inertia,
            None => f64::NAN,
        }
    }

    fn angular_coord(&self, p1: [f64; 3], accel: [f64; 3]) -> f64 {
        let Some(pair) = self.lifting else {
            return accel[2];
        };
        match self.lifting_force_map(p1, self.force_at([accel[0], accel[1]]), pair) {
            Some((f0, slope)) => f0 + slope * accel[2] * self.dynamics.inertia,
            None => f64::NAN,
        }
    }

    pub fn decode(&self, x: &[f64]) -> DesignVector {
        let mut d = DesignVector::from_gaps(x);
        let h = d.t1;
        let p0 = self.start.position();
        let v0 = self.start.rates();
        let p1 = d.mid_state.position();
        let accel = [x[6], x[7], self.angular_accel(p1, [x[6], x[7]], x[8])];
        let mut m = d.mid_state.to_array();
        for k in 0..3 {
            let dp = p1[k] - p0[k] - v0[k] * h;
            m[3 + k] = v0[k] + (accel[k] + 6.0 * dp / (h * h)) * h / 4.0;
        }
        d.mid_state = PlanarState::from_array(m);
        let tf = self.flight_time(&d);
        let g = self.dynamics.gravity;
        let p3 = self.target.position();
        let with_angle = |angle: f64| {
            let mut d = d;
            d.terminal_rates = [
                (p3[0] - x[9]) / tf,
                (p3[1] - x[10] + 0.5 * g * tf * tf) / tf - g * tf,
                (p3[2] - angle) / tf,
            ];
            d
        };
        let Some(pair) = self.lifting else {
            return with_angle(x[11]);
        };
        // the takeoff residual is affine in the takeoff angle
        let stance = pair.other();
        let (Some(r0), Some(r1)) = (
            self.takeoff_residual(&with_angle(0.0), stance),
            self.takeoff_residual(&with_angle(1.0), stance),
        ) else {
            return with_angle(f64::NAN);
        };
        if r1 == r0 {
            return with_angle(f64::NAN);
        }
        with_angle((x[11] - r0) / (r1 - r0))
    }

    /// Signed moment the stance pair cannot produce at `T2`.
    fn takeoff_residual(&self, d: &DesignVector, stance: Pair) -> Option<f64> {
        let profile = solve_coefficients(d, &self.task, &self.params).ok()?;
        let w = profile.eval(d.t2).ok()?;
        let com = profile.state_at(d.t2).ok()?;
        let foot = self.feet[stance.index()];
        let lever = [foot[0] - com.pos_t, foot[1] - com.pos_z];
        Some(w.moment - moment_of(lever, [w.force_t, w.force_z]))
    }

    fn flight_time(&self, d: &DesignVector) -> f64 {
        if self.dynamics.plane == PlaneAxis::Yaw {
            d.t3 - d.t1
        } else {
            d.t3 - d.t2
        }
    }

    pub fn encode(&self, d: &DesignVector) -> [f64; 12] {
        let mut x = d.to_gaps();
        let h = d.t1;
        let p0 = self.start.position();
        let v0 = self.start.rates();
        let p1 = d.mid_state.position();
        let v1 = d.mid_state.rates();
        let mut accel = [0.0; 3];
        for k in 0..3 {
            let dp = p1[k] - p0[k] - v0[k] * h;
            accel[k] = 4.0 * (v1[k] - v0[k]) / h - 6.0 * dp / (h * h);
        }
        x[6] = accel[0];
        x[7] = accel[1];
        x[8] = self.angular_coord(p1, accel);
        let tf = self.flight_time(d);
        let g = self.dynamics.gravity;
        let p3 = self.target.position();
        let v3 = d.terminal_rates;
        x[9] = p3[0] - v3[0] * tf;
        x[11] = match self.lifting {
            Some(pair) => self.takeoff_residual(d, pair.other()).unwrap_or(f64::NAN),
            None => p3[2] - v3[2] * tf,
        };
        x[10] = p3[1] - (v3[1] + g * tf) * tf + 0.5 * g * tf * tf;
        x
    }
}

/// Box bounds of the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignBounds {
    pub four_feet: [f64; 2],
    pub two_feet: [f64; 2],
    pub flight: [f64; 2],
    /// Flight duration for flips.
    pub flip_flight: [f64; 2],
    /// Half-widths of the `T1` position and angle ranges around the start,
    /// widened toward the target.
    pub mid_slack: [f64; 2],
    pub mid_height: [f64; 2],
    /// Half-width of the horizontal acceleration at `T1`.
    pub accel_slack: f64,
    /// Normal force range of the lifting pair at `T1`, N.
    pub lifting_force: [f64; 2],
    /// Half-width of the angular acceleration at `T1` for spins.
    pub spin_accel_slack: f64,
    /// Net vertical acceleration at `T1`.
    pub accel_z: [f64; 2],
    pub takeoff_height: [f64; 2],
    /// Half-widths of the takeoff position and angle ranges, widened toward
    /// the target.
    pub takeoff_slack: [f64; 2],
    /// Half-width of the signed stance moment residual at `T2`, N*m.
    pub takeoff_residual: f64,
}

impl Default for DesignBounds {
    fn default() -> Self {
        Self {
            four_feet: [0.1, 0.35],
            two_feet: [0.08, 0.22],
            flight: [0.12, 0.3],
            flip_flight: [0.3, 0.6],
            mid_slack: [0.06, 0.5],
            mid_height: [0.18, 0.34],
            accel_slack: 0.2,
            lifting_force: [1.0, 1.5],
            spin_accel_slack: 80.0,
            accel_z: [-9.0, 15.0],
            takeoff_height: [0.25, 0.36],
            takeoff_slack: [0.03, 0.6],
            takeoff_residual: 0.4,
        }
    }
}

fn toward(center: f64, reach: f64, slack: f64) -> [f64; 2] {
    [center + reach.min(0.0) - slack, center + reach.max(0.0) + slack]
}

impl DesignBounds {
    /// Lower and upper optimizer bounds for `task`.
    pub fn for_task(&self, task: &JumpTask) -> (Vec<f64>, Vec<f64>) {
        let s = &task.start_state;
        let dx = task.target_pos[0] - s.pos_t;
        let turn = task.target_angle - s.angle;
        let [pt, ang] = self.mid_slack;
        let mut rows = vec![
            self.four_feet,
            self.two_feet,
            if task.motion.is_flip() {
                self.flip_flight
            } else {
                self.flight
            },
            toward(s.pos_t, 0.3 * dx, pt),
            self.mid_height,
            toward(s.angle, 0.3 * turn.clamp(-1.0, 1.0), ang),
            [-self.accel_slack, self.accel_slack],
            self.accel_z,
            self.lifting_force,
            toward(s.pos_t, 0.6 * dx, self.takeoff_slack[0]),
            self.takeoff_height,
            toward(s.angle, 0.4 * turn, self.takeoff_slack[1]),
        ];
        if task.motion.contact_pattern() != ContactPattern::FourToFlight {
            rows[11] = [-self.takeoff_residual, self.takeoff_residual];
        }
        if task.motion.plane_axis() == PlaneAxis::Yaw {
            // no translation in a spin and no separate two-feet phase
            rows[1] = [0.0, 1e-3];
            rows[8] = toward(0.0, 20.0 * turn, self.spin_accel_slack);
            for r in [3, 6, 9] {
                rows[r] = [-1e-3, 1e-3];
            }
        }
        rows.into_iter().map(|[lo, hi]| (lo, hi)).unzip()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub population: usize,
    pub max_generations: usize,
    pub scale_factor: f64,
    pub crossover_rate: f64,
    pub seed: u64,
    /// Stop after this many generations without improvement once feasible.
    pub patience: Option<usize>,
    pub bounds: DesignBounds,
    pub fitness: FitnessConfig,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let de = DeConfig::default();
        Self {
            population: de.population,
            max_generations: de.max_generations,
            scale_factor: de.scale_factor,
            crossover_rate: de.crossover_rate,
            seed: de.seed,
            patience: None,
            bounds: DesignBounds::default(),
            fitness: FitnessConfig::default(),
        }
    }
}

impl PlannerConfig {
    pub fn de_config(&self, task: &JumpTask) -> DeConfig {
        let (lower, upper) = self.bounds.for_task(task);
        DeConfig {
            population: self.population,
            max_generations: self.max_generations,
            scale_factor: self.scale_factor,
            crossover_rate: self.crossover_rate,
            seed: self.seed,
            lower,
            upper,
            early_stop: self.patience.map(|patience| EarlyStop {
                target: self.fitness.beta,
                patience,
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlanResult {
    pub design: DesignVector,
    pub fitness: FitnessValue,
    pub report: ConstraintReport,
    pub de: DeResult,
    /// The best design sampled, with the certificate of its report.
    pub trajectory: Option<Trajectory>,
    pub beta: f64,
}

impl PlanResult {
    pub fn feasible(&self) -> bool {
        self.report.all_satisfied()
    }

    /// First generation whose best member satisfied every constraint.
    pub fn first_feasible_generation(&self) -> Option<usize> {
        self.de.history.iter().position(|&v| v < self.beta)
    }
}

/// Runs DE for one task on the current rayon pool.
pub fn plan_task(task: &JumpTask, params: &RobotParams, cfg: &PlannerConfig) -> Result<PlanResult> {
    task.validate()?;
    params.validate()?;
    let de_cfg = cfg.de_config(task);
    let space = SearchSpace::new(task, params);
    let objective = |x: &[f64]| {
        let d = space.decode(x);
        evaluate_design(&d, task, params, &cfg.fitness)
            .map(|(f, _)| f.value)
            .unwrap_or_else(|| crate::fitness::sentinel_value(cfg.fitness.beta))
    };
    let de = optimize_parallel(&de_cfg, objective)?;
    let design = space.decode(&de.best_vector);
    let (fitness, report, trajectory) = match evaluate_design(&design, task, params, &cfg.fitness) {
        Some((f, r)) => {
            let plan = JumpPlan::new(&design, task, params)?;
            let mut traj = plan.to_trajectory(cfg.fitness.sample_dt)?;
            traj.certificate = r.certificate();
            (f, r, Some(traj))
        }
        None => (FitnessValue::sentinel(cfg.fitness.beta), ConstraintReport::default(), None),
    };
    Ok(PlanResult {
        design,
        fitness,
        report,
        de,
        trajectory,
        beta: cfg.fitness.beta,
    })
}

/// Like [`plan_task`] but fails unless the result satisfies every constraint.
pub fn plan_feasible(task: &JumpTask, params: &RobotParams, cfg: &PlannerConfig) -> Result<PlanResult> {
    let r = plan_task(task, params, cfg)?;
    if !r.feasible() || r.trajectory.is_none() {
        return Err(Error::Numeric(format!(
            "no feasible trajectory found (worst level {:?})",
            r.fitness.worst_level
        )));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srb_model::MotionType;

    #[test]
    fn bounds_are_ordered_and_cover_start() {
        let b = DesignBounds::default();
        for motion in MotionType::ALL {
            let task = JumpTask::standard(motion, if motion == MotionType::YawSpin { [0.0, 0.0] } else { [0.3, 0.0] });
            let (lo, hi) = b.for_task(&task);
            assert_eq!(lo.len(), DesignVector::DIM);
            assert!(lo.iter().zip(&hi).all(|(l, h)| l < h), "{motion}");
            let s = task.start_state.to_array();
            for k in [0, 2] {
                assert!(lo[3 + k] <= s[k] && s[k] <= hi[3 + k]);
            }
        }
    }

    #[test]
    fn search_space_round_trip() {
        let task = JumpTask::standard(MotionType::BackFlip, [0.1, 0.0]);
        let space = SearchSpace::new(&task, &RobotParams::default());
        let d = DesignVector {
            t1: 0.21,
            t2: 0.33,
            t3: 0.71,
            mid_state: PlanarState::from_array([0.02, 0.25, -0.4, 0.3, 0.7, -3.0]),
            terminal_rates: [0.4, -1.0, -6.0],
        };
        let back = space.decode(&space.encode(&d));
        for (a, b) in back.to_array().iter().zip(d.to_array()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn end_acceleration_matches_profile() {
        let task = JumpTask::standard(MotionType::Front, [0.3, 0.0]);
        let params = RobotParams::default();
        let space = SearchSpace::new(&task, &params);
        let x = [0.2, 0.1, 0.3, 0.02, 0.27, -0.2, 1.5, 3.0, 1.2, 1.0, -1.0, 0.5];
        let d = space.decode(&x);
        let profile = crate::grf_profile::solve_coefficients(&d, &task, &params).unwrap();
        let w = profile.phase1_end();
        assert!((w.force_t / params.mass - 1.5).abs() < 1e-9);
        assert!((w.force_z / params.mass - params.gravity - 3.0).abs() < 1e-9);
        let state = profile.state_at(d.t1).unwrap();
        let forces = distribute_forces(
            &w,
            &state,
            JumpPlan::new(&d, &task, &params).unwrap().stance_feet(),
            ContactPhase::FourFeet,
        )
        .unwrap();
        assert!((forces.pair(Pair::Front).f_z - 1.2).abs() < 1e-9);
    }

    #[test]
    fn takeoff_residual_is_a_coordinate() {
        let task = JumpTask::standard(MotionType::Front, [0.3, 0.0]);
        let params = RobotParams::default();
        let space = SearchSpace::new(&task, &params);
        let x = [0.2, 0.12, 0.2, -0.02, 0.28, -0.1, 0.1, 2.0, 1.1, 0.1, 0.3, 0.3];
        let d = space.decode(&x);
        let plan = JumpPlan::new(&d, &task, &params).unwrap();
        let s = plan.sample(d.t2).unwrap();
        assert!((s.residual - 0.3).abs() < 1e-9, "{}", s.residual);
    }

    #[test]
    fn flips_fly_longer() {
        let b = DesignBounds::default();
        let (lo_jump, hi_jump) = b.for_task(&JumpTask::standard(MotionType::Front, [0.3, 0.0]));
        let (lo_flip, _) = b.for_task(&JumpTask::standard(MotionType::BackFlip, [0.0, 0.0]));
        assert!(lo_flip[2] >= hi_jump[2]);
        assert_eq!(lo_jump[11], -b.takeoff_residual);
    }
}
