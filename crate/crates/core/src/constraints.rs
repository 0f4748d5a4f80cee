//! Kino-dynamic constraint evaluation with per-level violation magnitudes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::srb_model::{Pair, PlaneAxis, RobotParams};
use crate::trajectory::{JumpPlan, Sample, Trajectory, SAMPLE_DT};

/// Number of constraint levels.
pub const LEVELS: usize = 8;
/// Largest number of sub-constraints in any level.
pub const J_MAX: usize = 3;
/// Sub-constraints used by each level.
pub const LEVEL_SIZES: [usize; LEVELS] = [2, 2, 3, 3, 3, 2, 3, 1];
/// Upper clamp on a single violation magnitude.
pub const MAX_MAGNITUDE: f64 = 100.0;
/// Time tolerance of crossing-instant bisection, s.
pub const CROSSING_TOL: f64 = 1e-6;

pub const LEVEL_NAMES: [&str; LEVELS] = [
    "contact force",
    "friction cone",
    "joint angle",
    "joint velocity",
    "joint torque",
    "joint height",
    "obstacle window",
    "two-feet moment",
];

/// A vertical obstacle plane: ground block up to `ground_top_z`, aerial block
/// from `aerial_bottom_z` up. Joints crossing the plane must pass through the
/// window shrunk by `expansion_margin` on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub crossing_coord: f64,
    pub ground_top_z: f64,
    #[serde(default = "no_aerial")]
    pub aerial_bottom_z: f64,
    #[serde(default)]
    pub expansion_margin: f64,
}

fn no_aerial() -> f64 {
    f64::INFINITY
}

impl ObstacleSpec {
    pub fn window(crossing_coord: f64, ground_top_z: f64, aerial_bottom_z: f64, margin: f64) -> Self {
        Self {
            crossing_coord,
            ground_top_z,
            aerial_bottom_z,
            expansion_margin: margin,
        }
    }

    /// Ground block only.
    pub fn ground(crossing_coord: f64, height: f64, margin: f64) -> Self {
        Self::window(crossing_coord, height, f64::INFINITY, margin)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.crossing_coord.is_finite() || !self.ground_top_z.is_finite() {
            return Err(Error::InvalidInput("obstacle coordinates must be finite".into()));
        }
        if self.aerial_bottom_z.is_nan() || self.aerial_bottom_z <= self.ground_top_z {
            return Err(Error::InvalidInput(format!(
                "obstacle window needs aerial bottom {} above ground top {}",
                self.aerial_bottom_z, self.ground_top_z
            )));
        }
        if !(self.expansion_margin >= 0.0) {
            return Err(Error::InvalidInput("obstacle margin must be non-negative".into()));
        }
        Ok(())
    }

    /// Admissible height interval after shrinking by the margin.
    pub fn shrunk(&self) -> (f64, f64) {
        (
            self.ground_top_z + self.expansion_margin,
            self.aerial_bottom_z - self.expansion_margin,
        )
    }

    /// Normalized window violation of a joint at height `z`.
    pub fn violation(&self, z: f64) -> f64 {
        let (lo, hi) = self.shrunk();
        if z <= lo {
            excess(lo - z, lo)
        } else if z >= hi {
            excess(z - hi, hi)
        } else {
            0.0
        }
    }

    pub fn contains(&self, z: f64) -> bool {
        let (lo, hi) = self.shrunk();
        lo < z && z < hi
    }
}

/// Violation magnitudes by level and sub-constraint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub levels: [[f64; J_MAX]; LEVELS],
}

impl ConstraintReport {
    /// Raises `(i, j)` to at least `magnitude` after clamping.
    pub fn record(&mut self, i: usize, j: usize, magnitude: f64) {
        let m = clamp_magnitude(magnitude);
        let slot = &mut self.levels[i][j];
        if m > *slot {
            *slot = m;
        }
    }

    pub fn magnitude(&self, i: usize, j: usize) -> f64 {
        self.levels[i][j]
    }

    /// Highest level with a nonzero magnitude.
    pub fn worst_level(&self) -> Option<usize> {
        (0..LEVELS).rev().find(|&i| self.levels[i].iter().any(|&m| m > 0.0))
    }

    pub fn all_satisfied(&self) -> bool {
        self.worst_level().is_none()
    }

    /// `(i, j, magnitude)` for every violated sub-constraint.
    pub fn violations(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..LEVELS).flat_map(move |i| {
            (0..LEVEL_SIZES[i]).filter_map(move |j| {
                let m = self.levels[i][j];
                (m > 0.0).then_some((i, j, m))
            })
        })
    }

    /// CRC32 over the magnitudes, used as a feasibility certificate.
    pub fn certificate(&self) -> u32 {
        let mut h = crc32fast::Hasher::new();
        for level in &self.levels {
            for m in level {
                h.update(&m.to_le_bytes());
            }
        }
        h.finalize()
    }
}

fn clamp_magnitude(m: f64) -> f64 {
    if m.is_nan() {
        MAX_MAGNITUDE
    } else {
        m.clamp(0.0, MAX_MAGNITUDE)
    }
}

/// Excess normalized by the size of its limit.
fn excess(amount: f64, limit: f64) -> f64 {
    amount / limit.abs().max(1e-3)
}

/// Level-0 magnitude for the normal force of one contact point.
pub fn normal_force_violation(f_z: f64, params: &RobotParams) -> f64 {
    if f_z < params.fz_min {
        excess(params.fz_min - f_z, params.fz_min)
    } else {
        0.0
    }
}

/// Level-1 magnitude for the force of one contact point. Below `fz_min` the
/// ratio is taken against `fz_min` so the measure stays continuous.
pub fn friction_violation(f_t: f64, f_z: f64, params: &RobotParams) -> f64 {
    let cone = f_t.abs() - params.friction_mu * f_z;
    if cone > 0.0 {
        cone / (params.friction_mu * f_z.max(params.fz_min).max(1e-3))
    } else {
        0.0
    }
}

fn range_violation(x: f64, lo: f64, hi: f64) -> f64 {
    if x > hi {
        excess(x - hi, hi)
    } else if x < lo {
        excess(lo - x, lo)
    } else {
        0.0
    }
}

fn bound_violation(x: f64, limit: f64) -> f64 {
    if x.abs() > limit {
        excess(x.abs() - limit, limit)
    } else {
        0.0
    }
}

/// A joint passing through the obstacle plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub t: f64,
    pub pair: Pair,
    /// 0 = hip, 1 = knee, 2 = foot.
    pub joint: usize,
    pub z: f64,
}

/// Every instant a hip, knee or foot crosses `obstacle.crossing_coord`,
/// located by scanning `times` for sign changes and bisecting.
pub fn find_crossings(plan: &JumpPlan, obstacle: &ObstacleSpec, times: &[f64]) -> Result<Vec<Crossing>> {
    let c = obstacle.crossing_coord;
    let coord = |t: f64, k: usize, j: usize| -> Result<[f64; 2]> {
        Ok(plan.links_at(t)?.legs[k].joints()[j])
    };
    let mut out = Vec::new();
    let links: Vec<_> = times.iter().map(|&t| plan.links_at(t)).collect::<Result<_>>()?;
    for pair in Pair::BOTH {
        let k = pair.index();
        for j in 0..3 {
            let g: Vec<f64> = links.iter().map(|l| l.legs[k].joints()[j][0] - c).collect();
            for i in 0..times.len() {
                if g[i] == 0.0 {
                    out.push(Crossing {
                        t: times[i],
                        pair,
                        joint: j,
                        z: links[i].legs[k].joints()[j][1],
                    });
                    continue;
                }
                if i + 1 == times.len() || g[i + 1] == 0.0 || g[i].signum() == g[i + 1].signum() {
                    continue;
                }
                let (mut a, mut b) = (times[i], times[i + 1]);
                let mut ga = g[i];
                while b - a > CROSSING_TOL {
                    let m = 0.5 * (a + b);
                    let gm = coord(m, k, j)?[0] - c;
                    if gm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if gm.signum() == ga.signum() {
                        a = m;
                        ga = gm;
                    } else {
                        b = m;
                    }
                }
                let t = 0.5 * (a + b);
                out.push(Crossing {
                    t,
                    pair,
                    joint: j,
                    z: coord(t, k, j)?[1],
                });
            }
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

/// Evaluates every sampled constraint (levels 0-5 and 7) over `samples`.
pub fn evaluate_samples(samples: &[Sample], plan: &JumpPlan) -> ConstraintReport {
    let params = &plan.params;
    let plane = plan.plane();
    let mut r = ConstraintReport::default();
    for s in samples {
        for pair in Pair::BOTH {
            let k = pair.index();
            let joint = &s.joints[k];
            if s.contact[k] {
                let f = s.forces[k];
                r.record(0, k, normal_force_violation(f.f_z, params));
                r.record(1, k, friction_violation(f.f_t, f.f_z, params));
            }
            for j in 0..3 {
                r.record(
                    2,
                    j,
                    range_violation(joint.q[j], params.joint_angle_min[j], params.joint_angle_max[j]),
                );
                r.record(3, j, bound_violation(joint.qdot[j], params.joint_vel_max));
                r.record(4, j, bound_violation(joint.tau[j], params.joint_torque_max));
            }
            let q = [[s.joints[0].q[1], s.joints[0].q[2]], [s.joints[1].q[1], s.joints[1].q[2]]];
            let links = crate::trajectory::link_positions(&s.state, &q, plane, params);
            let leg = links.legs[k];
            for (j, p) in [leg.hip, leg.knee].into_iter().enumerate() {
                if p[1] < params.z_min_clearance {
                    r.record(5, j, excess(params.z_min_clearance - p[1], params.z_min_clearance));
                }
            }
        }
        // an unreachable foot target counts against the knee
        r.record(2, 2, s.reach_deficit);
        if s.residual > params.moment_residual_max {
            r.record(
                7,
                0,
                excess(s.residual - params.moment_residual_max, params.moment_residual_max),
            );
        }
    }
    r
}

/// Level-6 magnitudes from obstacle crossings.
pub fn evaluate_obstacle(plan: &JumpPlan, times: &[f64], report: &mut ConstraintReport) -> Result<()> {
    let Some(obstacle) = plan.task.obstacle else {
        return Ok(());
    };
    if plan.plane() == PlaneAxis::Yaw {
        return Ok(());
    }
    for c in find_crossings(plan, &obstacle, times)? {
        report.record(6, c.joint, obstacle.violation(c.z));
    }
    Ok(())
}

/// Full evaluation of a plan sampled every `dt` seconds.
pub fn evaluate_plan(plan: &JumpPlan, dt: f64) -> Result<ConstraintReport> {
    let times = plan.sample_times(dt);
    let samples: Vec<Sample> = times.iter().map(|&t| plan.sample(t)).collect::<Result<_>>()?;
    let mut r = evaluate_samples(&samples, plan);
    evaluate_obstacle(plan, &times, &mut r)?;
    Ok(r)
}

/// Evaluates a stored trajectory for `task`.
pub fn evaluate(traj: &Trajectory, task: &crate::grf_profile::JumpTask, params: &RobotParams) -> Result<ConstraintReport> {
    let plan = JumpPlan::new(&traj.design, task, params)?;
    let mut r = evaluate_samples(&traj.samples, &plan);
    let times: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    evaluate_obstacle(&plan, &times, &mut r)?;
    Ok(r)
}

/// Evaluation at the default planning rate.
pub fn evaluate_default(plan: &JumpPlan) -> Result<ConstraintReport> {
    evaluate_plan(plan, SAMPLE_DT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn force_and_friction_examples() {
        let p = RobotParams::default();
        assert_abs_diff_eq!(normal_force_violation(0.5, &p), 0.5, epsilon = 1e-15);
        assert_eq!(normal_force_violation(1.5, &p), 0.0);
        assert_abs_diff_eq!(friction_violation(0.8, 1.0, &p), 0.1 / 0.7, epsilon = 1e-12);
        assert_eq!(friction_violation(-0.5, 1.0, &p), 0.0);
        assert_abs_diff_eq!(friction_violation(1.0, 0.0, &p), 1.0 / 0.7, epsilon = 1e-12);
        assert!(friction_violation(1.0, -1.0, &p) > friction_violation(1.0, 0.0, &p));
    }

    #[test]
    fn window_example() {
        let o = ObstacleSpec::window(0.3, 0.05, 0.30, 0.02);
        assert_abs_diff_eq!(o.violation(0.29), (0.29 - 0.28) / 0.28, epsilon = 1e-12);
        assert_abs_diff_eq!(o.violation(0.06), (0.07 - 0.06) / 0.07, epsilon = 1e-12);
        assert_eq!(o.violation(0.2), 0.0);
        assert!(ObstacleSpec::window(0.3, 0.3, 0.2, 0.0).validate().is_err());
        assert!(ObstacleSpec::window(0.3, 0.1, 0.2, -0.1).validate().is_err());
        assert!(ObstacleSpec::ground(0.3, 0.1, 0.0).validate().is_ok());
    }

    #[test]
    fn report_clamps_and_tracks_worst() {
        let mut r = ConstraintReport::default();
        assert!(r.all_satisfied());
        r.record(2, 1, 1e9);
        r.record(0, 0, 0.3);
        r.record(0, 0, 0.1);
        r.record(5, 0, f64::NAN);
        assert_eq!(r.magnitude(2, 1), MAX_MAGNITUDE);
        assert_eq!(r.magnitude(0, 0), 0.3);
        assert_eq!(r.worst_level(), Some(5));
        assert_eq!(r.violations().count(), 3);
        r.record(1, 0, -4.0);
        assert_eq!(r.magnitude(1, 0), 0.0);
    }

    #[test]
    fn certificate_tracks_content() {
        let mut r = ConstraintReport::default();
        let a = r.certificate();
        r.record(3, 2, 0.5);
        assert_ne!(a, r.certificate());
        assert_eq!(r.certificate(), r.clone().certificate());
    }

    #[test]
    fn level_sizes_fit() {
        assert!(LEVEL_SIZES.iter().all(|n| (1..=J_MAX).contains(n)));
        assert_eq!(LEVEL_SIZES.iter().copied().max(), Some(J_MAX));
    }
}
