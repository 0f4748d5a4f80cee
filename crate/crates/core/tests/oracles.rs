use std::f64::consts::FRAC_PI_2;

use approx::assert_abs_diff_eq;

use quadjump::constraints::{friction_violation, normal_force_violation, ConstraintReport};
use quadjump::fitness::{level_of_value, penalty, Aggregation, BETA};
use quadjump::leg_kinematics::{foot_in_hip, joint_torques, leg_jacobian};
use quadjump::rollout_controller::{filter_alpha, landing_filter, pd_command, PdGains};
use quadjump::srb_model::*;

#[test]
fn robot_table() {
    let p = RobotParams::default();
    assert_eq!(p.mass, 10.4);
    assert_eq!(p.inertia_diag, [0.07, 0.26, 0.242]);
    assert_eq!(p.link_lengths, [0.072, 0.211, 0.2]);
    assert_eq!(p.friction_mu, 0.7);
    assert_eq!(p.fz_min, 1.0);
    assert_eq!(p.z_min_clearance, 0.05);
    assert_eq!(p.joint_torque_max, 24.0);
    assert_eq!(BETA, 1e3);
}

#[test]
fn right_angle_knee() {
    let p = RobotParams::default();
    let q = [0.0, -FRAC_PI_2];
    let foot = foot_in_hip(q, &p);
    assert_abs_diff_eq!(foot[0], 0.2, epsilon = 1e-12);
    assert_abs_diff_eq!(foot[1], -0.211, epsilon = 1e-12);
    let j = leg_jacobian(q, &p);
    let want = [[-0.211, 0.0], [-0.2, -0.2]];
    for r in 0..2 {
        for c in 0..2 {
            assert_abs_diff_eq!(j[r][c], want[r][c], epsilon = 1e-12);
        }
    }
    // 60 N straight up on the foot
    let tau = joint_torques([0.0, 60.0], q, &p);
    assert_abs_diff_eq!(tau[0], -12.0, epsilon = 1e-9);
    assert_abs_diff_eq!(tau[1], -12.0, epsilon = 1e-9);
    assert_eq!(joint_torques([0.0, 0.0], q, &p), [0.0, 0.0]);
}

#[test]
fn pd_law() {
    let g = PdGains::STANCE;
    let tau = pd_command([0.0; 3], [0.0; 3], [0.1; 3], [0.5; 3], [1.0; 3], &g, 24.0);
    for t in tau {
        assert_abs_diff_eq!(t, 10.0, epsilon = 1e-12);
    }
    let sat = pd_command([0.0; 3], [0.0; 3], [1.0; 3], [0.0; 3], [0.0; 3], &g, 24.0);
    assert_eq!(sat, [24.0; 3]);
}

#[test]
fn landing_filter_constant() {
    let a = filter_alpha(1e-3, 0.02);
    assert_abs_diff_eq!(a, 0.951_229_424_500_714, epsilon = 1e-15);
    assert_abs_diff_eq!(landing_filter(0.0, 1.0, a), a, epsilon = 1e-15);
    assert_eq!(landing_filter(0.3, 0.3, a), 0.3);
}

#[test]
fn ballistic_arc() {
    let p = RobotParams::default();
    let s = PlanarState::from_array([0.0, 0.3, 0.0, 1.0, 2.0, 3.0]);
    let e = ballistic_map(&s, 0.2, &p).unwrap();
    assert_abs_diff_eq!(e.pos_z, 0.5038, epsilon = 1e-12);
    assert_abs_diff_eq!(e.pos_t, 0.2, epsilon = 1e-12);
    assert_abs_diff_eq!(e.angle, 0.6, epsilon = 1e-12);
    assert_abs_diff_eq!(e.vel_z, 2.0 - 1.962, epsilon = 1e-12);
    assert!(ballistic_map(&s, -0.1, &p).is_err());
}

#[test]
fn weight_support_and_pitch_moment() {
    let p = RobotParams::default();
    let w = PlanarWrench::new(0.0, p.mass * p.gravity, 0.26);
    let a = planar_accel(&w, &p, MotionType::Front).unwrap();
    assert_abs_diff_eq!(a[1], 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(a[2], 1.0, epsilon = 1e-12);
    let roll = planar_accel(&PlanarWrench::new(0.0, 0.0, 0.07), &p, MotionType::Left).unwrap();
    assert_abs_diff_eq!(roll[2], 1.0, epsilon = 1e-12);
}

#[test]
fn penalty_values() {
    let mut r = ConstraintReport::default();
    r.record(2, 1, 0.5);
    let v = penalty(&r, BETA, Aggregation::Sum).unwrap();
    assert_abs_diff_eq!(v, 1.0005e10, epsilon = 1e-3);
    assert_eq!(level_of_value(v, BETA), Some(2));

    let mut r = ConstraintReport::default();
    r.record(0, 0, 1.0);
    r.record(1, 0, 1.0);
    assert_abs_diff_eq!(penalty(&r, BETA, Aggregation::Sum).unwrap(), 1_002_001.0, epsilon = 1e-6);
    assert_abs_diff_eq!(penalty(&r, BETA, Aggregation::WorstTerm).unwrap(), 1_001_000.0, epsilon = 1e-6);
    assert_eq!(penalty(&ConstraintReport::default(), BETA, Aggregation::Sum), None);
    assert_eq!(level_of_value(12.0, BETA), None);
}

#[test]
fn contact_force_measures() {
    let p = RobotParams::default();
    assert_eq!(normal_force_violation(5.0, &p), 0.0);
    assert_abs_diff_eq!(normal_force_violation(0.5, &p), 0.5, epsilon = 1e-12);
    assert_eq!(friction_violation(6.9, 10.0, &p), 0.0);
    assert_abs_diff_eq!(friction_violation(14.0, 10.0, &p), 1.0, epsilon = 1e-12);
}
