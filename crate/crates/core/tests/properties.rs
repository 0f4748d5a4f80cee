use proptest::prelude::*;

use quadjump::constraints::{ConstraintReport, ObstacleSpec, LEVELS, LEVEL_SIZES, MAX_MAGNITUDE};
use quadjump::de_optimizer::{optimize, DeConfig};
use quadjump::fitness::{score, FitnessConfig};
use quadjump::grf_profile::{solve_coefficients, DesignVector, JumpTask};
use quadjump::leg_kinematics::*;
use quadjump::motion_library::{decode_trajectory, distance, encode_trajectory, select_index, IndexEntry, LibraryIndex, Query};
use quadjump::planner::{DesignBounds, SearchSpace};
use quadjump::rollout_controller::{pd_command, PdGains};
use quadjump::srb_model::*;
use quadjump::trajectory::JumpPlan;

fn params() -> RobotParams {
    RobotParams::default()
}

fn task_for(motion: MotionType) -> JumpTask {
    match motion {
        MotionType::YawSpin => JumpTask::from_displacement(motion, [0.0, 0.02], 0.7),
        MotionType::Rear | MotionType::Right | MotionType::BackFlip | MotionType::RightFlip => {
            JumpTask::standard(motion, [-0.2, 0.0])
        }
        _ => JumpTask::standard(motion, [0.25, 0.0]),
    }
}

fn motion() -> impl Strategy<Value = MotionType> {
    prop::sample::select(MotionType::ALL.to_vec())
}

/// A point of the unit cube mapped into the search box of `task`.
fn in_box(task: &JumpTask, unit: &[f64]) -> Vec<f64> {
    let (lo, hi) = DesignBounds::default().for_task(task);
    lo.iter().zip(&hi).zip(unit).map(|((l, h), u)| l + u * (h - l)).collect()
}

fn unit12() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0..1.0f64, 12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn jacobian_matches_finite_differences(a in -1.5..1.5f64, b in -2.4..-0.2f64) {
        let p = params();
        let j = leg_jacobian([a, b], &p);
        let h = 1e-6;
        for col in 0..2 {
            let mut qp = [a, b];
            let mut qm = [a, b];
            qp[col] += h;
            qm[col] -= h;
            let (fp, fm) = (foot_in_hip(qp, &p), foot_in_hip(qm, &p));
            for row in 0..2 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                prop_assert!((fd - j[row][col]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn ik_inverts_fk(a in -1.2..1.2f64, b in -2.4..-0.2f64) {
        let p = params();
        let foot = foot_in_hip([a, b], &p);
        let q = inverse_kinematics(foot, &p).unwrap();
        let back = foot_in_hip(q, &p);
        prop_assert!((back[0] - foot[0]).abs() < 1e-9 && (back[1] - foot[1]).abs() < 1e-9);
        prop_assert!(q[1] <= 0.0);
    }

    #[test]
    fn virtual_work(a in -1.5..1.5f64, b in -2.4..-0.2f64, fx in -200.0..200.0f64, fz in -200.0..200.0f64,
                    qa in -10.0..10.0f64, qb in -10.0..10.0f64) {
        let p = params();
        let tau = joint_torques([fx, fz], [a, b], &p);
        let j = leg_jacobian([a, b], &p);
        let v = [j[0][0] * qa + j[0][1] * qb, j[1][0] * qa + j[1][1] * qb];
        let lhs = tau[0] * qa + tau[1] * qb;
        let rhs = fx * v[0] + fz * v[1];
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        let f = foot_force_from_torques(tau, [a, b], &p).unwrap();
        prop_assert!((f[0] - fx).abs() < 1e-7 && (f[1] - fz).abs() < 1e-7);
    }

    #[test]
    fn ballistic_round_trip(z in 0.2..0.4f64, vt in -2.0..2.0f64, vz in -1.0..3.0f64, w in -15.0..15.0f64, t in 0.05..0.6f64) {
        let p = params();
        let s = PlanarState::from_array([0.1, z, 0.3, vt, vz, w]);
        let e = ballistic_map(&s, t, &p).unwrap();
        prop_assert_eq!(e.angvel, s.angvel);
        prop_assert_eq!(e.vel_t, s.vel_t);
        let back = inverse_ballistic(&e, t, &p).unwrap();
        for (x, y) in back.to_array().iter().zip(s.to_array()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn search_space_round_trip(m in motion(), u in unit12()) {
        let task = task_for(m);
        let space = SearchSpace::new(&task, &params());
        let x = in_box(&task, &u);
        let d = space.decode(&x);
        prop_assume!(d.is_finite());
        let back = space.encode(&d);
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()), "{:?} vs {:?}", back, x);
        }
    }

    #[test]
    fn coefficients_meet_boundaries(m in motion(), u in unit12()) {
        let task = task_for(m);
        let p = params();
        let d = SearchSpace::new(&task, &p).decode(&in_box(&task, &u));
        let Ok(prof) = solve_coefficients(&d, &task, &p) else { return Ok(()) };
        let end = prof.state_at(d.t3).unwrap();
        let target = task.terminal_state(d.terminal_rates);
        for (k, (a, b)) in end.to_array().iter().zip(target.to_array()).enumerate() {
            // spins do not move along the in-plane axis
            if m == MotionType::YawSpin && k % 3 == 0 {
                continue;
            }
            prop_assert!((a - b).abs() < 1e-6 * b.abs().max(1.0));
        }
        let start = prof.state_at(0.0).unwrap();
        for (a, b) in start.to_array().iter().zip(task.start_state.to_array()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn higher_level_always_dominates(
        lo in 0..LEVELS - 1, gap in 1..LEVELS, mags in prop::collection::vec(0.0..=MAX_MAGNITUDE, 2 * 3),
        energy in 0.0..1e3f64,
    ) {
        let hi = (lo + gap).min(LEVELS - 1);
        prop_assume!(hi > lo);
        let cfg = FitnessConfig::default();
        // worst level `lo` with every sub-constraint at or below it saturated
        let mut a = ConstraintReport::default();
        for i in 0..=lo {
            for j in 0..LEVEL_SIZES[i] {
                a.record(i, j, MAX_MAGNITUDE);
            }
        }
        let mut b = ConstraintReport::default();
        let j = (mags[0] * 7.0) as usize % LEVEL_SIZES[hi];
        b.record(hi, j, mags[1].max(1e-12));
        let (fa, fb) = (score(&a, energy, &cfg), score(&b, energy, &cfg));
        prop_assert!(fb.value > fa.value);
        prop_assert!(!fa.in_energy_mode && !fb.in_energy_mode);
        prop_assert!(score(&ConstraintReport::default(), energy, &cfg).value < cfg.beta.max(energy + 1.0));
    }

    #[test]
    fn pd_output_is_clamped(e in -5.0..5.0f64, ed in -50.0..50.0f64, ff in -40.0..40.0f64) {
        let tau = pd_command([0.0; 3], [0.0; 3], [e; 3], [ed; 3], [ff; 3], &PdGains::STANCE, 24.0);
        prop_assert!(tau.iter().all(|t| t.abs() <= 24.0));
    }

    #[test]
    fn selector_is_argmin(
        keys in prop::collection::vec((-0.4..0.4f64, -0.4..0.4f64, 0.0..0.1f64, -1.0..1.0f64, 1.0..30.0f64), 1..25),
        q in (-0.5..0.5f64, -0.5..0.5f64, -0.05..0.15f64, -1.2..1.2f64),
    ) {
        let entries: Vec<IndexEntry> = keys
            .iter()
            .enumerate()
            .map(|(i, &(x, y, z, r, e))| IndexEntry {
                target_pos: [x, y, z],
                target_rot: r,
                motion: MotionType::Front,
                energy_j: e,
                feasible_box: None,
                file: format!("t{i}"),
                checksum: 0,
            })
            .collect();
        let index = LibraryIndex::new(entries);
        prop_assert!(index.is_sorted());
        let query = Query::new([q.0, q.1, q.2], q.3);
        let got = select_index(&index, &query, 0.1).unwrap();
        let best = index.entries.iter().map(|e| distance(e, &query, 0.1)).fold(f64::INFINITY, f64::min);
        prop_assert!(distance(&index.entries[got], &query, 0.1) <= best + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn trajectory_bytes_round_trip(m in motion(), u in unit12()) {
        let task = task_for(m);
        let p = params();
        let d = SearchSpace::new(&task, &p).decode(&in_box(&task, &u));
        let Ok(plan) = JumpPlan::new(&d, &task, &p) else { return Ok(()) };
        let Ok(traj) = plan.to_trajectory(0.005) else { return Ok(()) };
        let bytes = encode_trajectory(&traj);
        let back = decode_trajectory(&bytes, std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &traj);
        prop_assert_eq!(encode_trajectory(&back), bytes);
    }

    #[test]
    fn window_obstacle_round_trips_through_task(c in 0.05..0.3f64, g in 0.0..0.2f64, gap in 0.2..0.4f64) {
        let o = ObstacleSpec::window(c, g, g + gap, 0.02);
        let task = JumpTask::standard(MotionType::Front, [0.3, 0.0]).with_obstacle(o);
        let text = toml::to_string(&task).unwrap();
        let back: JumpTask = toml::from_str(&text).unwrap();
        prop_assert_eq!(back, task);
    }

    #[test]
    fn de_never_leaves_the_box(seed in 0u64..1000) {
        let cfg = DeConfig { population: 8, max_generations: 15, seed, ..DeConfig::with_bounds(vec![-1.0, 2.0], vec![1.0, 3.0]) };
        let r = optimize(&cfg, |x| (x[0] - 0.3).powi(2) + x[1]).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r.best_vector[0]) && (2.0..=3.0).contains(&r.best_vector[1]));
        prop_assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn design_gap_mapping_is_a_bijection_on_samples() {
    let d = DesignVector {
        t1: 0.2,
        t2: 0.35,
        t3: 0.6,
        mid_state: PlanarState::from_array([0.01, 0.27, 0.1, 0.3, 0.6, -0.5]),
        terminal_rates: [1.0, -1.2, 0.4],
    };
    let back = DesignVector::from_gaps(&d.to_gaps());
    for (a, b) in back.to_array().iter().zip(d.to_array()) {
        assert!((a - b).abs() < 1e-12);
    }
}
