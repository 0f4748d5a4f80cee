//! Planar single-rigid-body model.
//!
//! Every motion is reduced to one plane: an in-plane translation `t`, the
//! height `z` and a rotation `angle` about the plane's normal axis. The sign
//! conventions are shared by all planes:
//!
//! ```text
//! world = R(angle) * body,   R(a) (t, z) = (t cos a + z sin a, -t sin a + z cos a)
//! moment = d_z * f_t - d_t * f_z,   d = contact point - CoM
//! ```
//!
//! For the pitch plane `t` is the forward axis and the angle is pitch about
//! +y (nose down positive). For the roll plane `t` points to the robot's
//! right and the angle is roll about +x. Both reduce to the formulas above.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Body axis the planar rotation is taken about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneAxis {
    Pitch,
    Roll,
    Yaw,
}

/// One of the two contact pairs of the planar model: the pair on the +t side
/// (front legs in the pitch plane, right legs in the roll plane) or the pair
/// on the -t side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pair {
    Front,
    Rear,
}

impl Pair {
    pub const BOTH: [Pair; 2] = [Pair::Front, Pair::Rear];

    pub fn index(self) -> usize {
        match self {
            Pair::Front => 0,
            Pair::Rear => 1,
        }
    }

    /// Sign of the pair's hip offset along `t`.
    pub fn sign(self) -> f64 {
        match self {
            Pair::Front => 1.0,
            Pair::Rear => -1.0,
        }
    }

    pub fn other(self) -> Pair {
        match self {
            Pair::Front => Pair::Rear,
            Pair::Rear => Pair::Front,
        }
    }
}

/// Contact schedule before the flight phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContactPattern {
    /// Four feet, then only `stance` stays on the ground, then flight.
    FourThenTwo { stance: Pair },
    /// Four feet straight into flight.
    FourToFlight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionType {
    Front,
    Rear,
    Left,
    Right,
    YawSpin,
    FrontFlip,
    BackFlip,
    LeftFlip,
    RightFlip,
}

impl MotionType {
    pub const ALL: [MotionType; 9] = [
        MotionType::Front,
        MotionType::Rear,
        MotionType::Left,
        MotionType::Right,
        MotionType::YawSpin,
        MotionType::FrontFlip,
        MotionType::BackFlip,
        MotionType::LeftFlip,
        MotionType::RightFlip,
    ];

    pub fn plane_axis(self) -> PlaneAxis {
        match self {
            MotionType::Front | MotionType::Rear | MotionType::FrontFlip | MotionType::BackFlip => {
                PlaneAxis::Pitch
            }
            MotionType::Left | MotionType::Right | MotionType::LeftFlip | MotionType::RightFlip => {
                PlaneAxis::Roll
            }
            MotionType::YawSpin => PlaneAxis::Yaw,
        }
    }

    /// The pair left on the ground during the two-feet phase is the one on
    /// the side the body travels or rotates away from.
    pub fn contact_pattern(self) -> ContactPattern {
        let stance = match self {
            MotionType::YawSpin => return ContactPattern::FourToFlight,
            MotionType::Front | MotionType::Right => Pair::Rear,
            MotionType::Rear | MotionType::Left => Pair::Front,
            MotionType::BackFlip | MotionType::LeftFlip => Pair::Rear,
            MotionType::FrontFlip | MotionType::RightFlip => Pair::Front,
        };
        ContactPattern::FourThenTwo { stance }
    }

    pub fn is_flip(self) -> bool {
        matches!(
            self,
            MotionType::FrontFlip | MotionType::BackFlip | MotionType::LeftFlip | MotionType::RightFlip
        )
    }

    /// Net rotation a flip must complete, signed per the plane convention.
    pub fn flip_angle(self) -> Option<f64> {
        use std::f64::consts::TAU;
        match self {
            MotionType::FrontFlip | MotionType::RightFlip => Some(TAU),
            MotionType::BackFlip | MotionType::LeftFlip => Some(-TAU),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionType::Front => "front",
            MotionType::Rear => "rear",
            MotionType::Left => "left",
            MotionType::Right => "right",
            MotionType::YawSpin => "yaw_spin",
            MotionType::FrontFlip => "front_flip",
            MotionType::BackFlip => "back_flip",
            MotionType::LeftFlip => "left_flip",
            MotionType::RightFlip => "right_flip",
        }
    }

    pub fn code(self) -> u8 {
        MotionType::ALL.iter().position(|m| *m == self).unwrap() as u8
    }

    pub fn from_code(code: u8) -> Option<MotionType> {
        MotionType::ALL.get(code as usize).copied()
    }
}

impl std::str::FromStr for MotionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MotionType::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s || m.name().replace('_', "-") == s)
            .ok_or_else(|| Error::Config(format!("unknown motion type '{s}'")))
    }
}

impl std::fmt::Display for MotionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Robot constants and hardware limits. Joint arrays are ordered
/// `[hip roll, hip pitch, knee]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotParams {
    pub mass: f64,
    pub inertia_diag: [f64; 3],
    /// `[L0 hip offset, L1 thigh, L2 shank]`.
    pub link_lengths: [f64; 3],
    /// Distance from the CoM to the hip joints along the body's long axis.
    pub hip_offset_pitch: f64,
    /// Lateral distance from the CoM to the hip roll joints; the roll-plane
    /// hip sits `L0` further out.
    pub hip_offset_roll: f64,
    pub joint_angle_min: [f64; 3],
    pub joint_angle_max: [f64; 3],
    pub joint_vel_max: f64,
    pub joint_torque_max: f64,
    pub friction_mu: f64,
    pub fz_min: f64,
    pub z_min_clearance: f64,
    pub gravity: f64,
    /// Maximum two-feet moment mismatch accepted as realizable, N*m.
    pub moment_residual_max: f64,
    /// Margin kept from the leg workspace boundary, m.
    pub workspace_margin: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            mass: 10.4,
            inertia_diag: [0.07, 0.26, 0.242],
            link_lengths: [0.072, 0.211, 0.2],
            hip_offset_pitch: 0.19,
            hip_offset_roll: 0.049,
            joint_angle_min: [-1.0, -4.0, -2.6],
            joint_angle_max: [1.0, 4.0, 2.6],
            joint_vel_max: 40.0,
            joint_torque_max: 24.0,
            friction_mu: 0.7,
            fz_min: 1.0,
            z_min_clearance: 0.05,
            gravity: 9.81,
            moment_residual_max: 0.5,
            workspace_margin: 1e-3,
        }
    }
}

impl RobotParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        let finite = [
            self.mass,
            self.hip_offset_pitch,
            self.hip_offset_roll,
            self.joint_vel_max,
            self.joint_torque_max,
            self.friction_mu,
            self.fz_min,
            self.z_min_clearance,
            self.gravity,
            self.moment_residual_max,
            self.workspace_margin,
        ]
        .iter()
        .chain(&self.inertia_diag)
        .chain(&self.link_lengths)
        .chain(&self.joint_angle_min)
        .chain(&self.joint_angle_max)
        .all(|v| v.is_finite());
        if !finite {
            return bad("all parameters must be finite");
        }
        if self.mass <= 0.0 {
            return bad("mass must be positive");
        }
        if self.inertia_diag.iter().any(|&i| i <= 0.0) {
            return bad("inertia entries must be positive");
        }
        if self.link_lengths.iter().any(|&l| l <= 0.0) {
            return bad("link lengths must be positive");
        }
        if self
            .joint_angle_min
            .iter()
            .zip(&self.joint_angle_max)
            .any(|(lo, hi)| lo >= hi)
        {
            return bad("joint_angle_min must be below joint_angle_max");
        }
        if self.friction_mu <= 0.0 {
            return bad("friction_mu must be positive");
        }
        if self.fz_min < 0.0 {
            return bad("fz_min must be non-negative");
        }
        if self.joint_vel_max <= 0.0 || self.joint_torque_max <= 0.0 {
            return bad("joint velocity and torque limits must be positive");
        }
        if self.gravity < 0.0 || self.moment_residual_max <= 0.0 || self.workspace_margin < 0.0 {
            return bad("gravity, residual limit and workspace margin out of range");
        }
        Ok(())
    }

    /// Inertia about the rotation axis of `plane`.
    pub fn inertia_about(&self, plane: PlaneAxis) -> f64 {
        match plane {
            PlaneAxis::Roll => self.inertia_diag[0],
            PlaneAxis::Pitch => self.inertia_diag[1],
            PlaneAxis::Yaw => self.inertia_diag[2],
        }
    }

    pub fn thigh(&self) -> f64 {
        self.link_lengths[1]
    }

    pub fn shank(&self) -> f64 {
        self.link_lengths[2]
    }

    /// Hip distance from the CoM along `t` for a planar motion.
    pub fn hip_offset(&self, plane: PlaneAxis) -> f64 {
        match plane {
            PlaneAxis::Pitch => self.hip_offset_pitch,
            PlaneAxis::Roll => self.hip_offset_roll + self.link_lengths[0],
            // horizontal radius of the feet about the vertical axis
            PlaneAxis::Yaw => self
                .hip_offset_pitch
                .hypot(self.hip_offset_roll + self.link_lengths[0]),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let params: RobotParams = toml::from_str(text)?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::storage(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("robot parameters serialize")
    }
}

/// Reduced planar state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarState {
    pub pos_t: f64,
    pub pos_z: f64,
    pub angle: f64,
    pub vel_t: f64,
    pub vel_z: f64,
    pub angvel: f64,
}

impl PlanarState {
    pub fn at_rest(pos_t: f64, pos_z: f64, angle: f64) -> Self {
        Self {
            pos_t,
            pos_z,
            angle,
            ..Default::default()
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.pos_t,
            self.pos_z,
            self.angle,
            self.vel_t,
            self.vel_z,
            self.angvel,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            pos_t: a[0],
            pos_z: a[1],
            angle: a[2],
            vel_t: a[3],
            vel_z: a[4],
            angvel: a[5],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn position(&self) -> [f64; 3] {
        [self.pos_t, self.pos_z, self.angle]
    }

    pub fn rates(&self) -> [f64; 3] {
        [self.vel_t, self.vel_z, self.angvel]
    }
}

/// Net contact wrench at the CoM (gravity excluded).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarWrench {
    pub force_t: f64,
    pub force_z: f64,
    pub moment: f64,
}

impl PlanarWrench {
    pub const ZERO: PlanarWrench = PlanarWrench {
        force_t: 0.0,
        force_z: 0.0,
        moment: 0.0,
    };

    pub fn new(force_t: f64, force_z: f64, moment: f64) -> Self {
        Self {
            force_t,
            force_z,
            moment,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.force_t.is_finite() && self.force_z.is_finite() && self.moment.is_finite()
    }
}

/// Rotate a body-frame planar vector into the world frame.
pub fn rotate(angle: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = angle.sin_cos();
    [v[0] * c + v[1] * s, -v[0] * s + v[1] * c]
}

/// Rotate a world-frame planar vector into the body frame.
pub fn rotate_inv(angle: f64, v: [f64; 2]) -> [f64; 2] {
    rotate(-angle, v)
}

/// Moment about the CoM of force `f` applied at offset `d` (contact - CoM).
pub fn moment_of(d: [f64; 2], f: [f64; 2]) -> f64 {
    d[1] * f[0] - d[0] * f[1]
}

/// Linear and angular accelerations produced by `w` under gravity.
pub fn planar_accel(w: &PlanarWrench, params: &RobotParams, motion: MotionType) -> Result<[f64; 3]> {
    if !w.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite wrench {w:?}")));
    }
    let plane = motion.plane_axis();
    let accel_t = if plane == PlaneAxis::Yaw {
        0.0
    } else {
        w.force_t / params.mass
    };
    Ok([
        accel_t,
        w.force_z / params.mass - params.gravity,
        w.moment / params.inertia_about(plane),
    ])
}

/// Discrete update scheme for [`integrate_step_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Rates first, then positions from the updated rates.
    #[default]
    SemiImplicit,
    /// Positions from the old rates, `x(k+1) = x(k) + dt * xdot(k)`.
    Explicit,
}

pub fn integrate_step(
    s: &PlanarState,
    w: &PlanarWrench,
    dt: f64,
    params: &RobotParams,
    motion: MotionType,
) -> Result<PlanarState> {
    integrate_step_with(Integrator::SemiImplicit, s, w, dt, params, motion)
}

pub fn integrate_step_with(
    scheme: Integrator,
    s: &PlanarState,
    w: &PlanarWrench,
    dt: f64,
    params: &RobotParams,
    motion: MotionType,
) -> Result<PlanarState> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("step size must be >= 0, got {dt}")));
    }
    if !s.is_finite() {
        return Err(Error::InvalidInput("non-finite state".into()));
    }
    let [at, az, aa] = planar_accel(w, params, motion)?;
    if dt == 0.0 {
        return Ok(*s);
    }
    let mut next = *s;
    next.vel_t += at * dt;
    next.vel_z += az * dt;
    next.angvel += aa * dt;
    let (vt, vz, va) = match scheme {
        Integrator::SemiImplicit => (next.vel_t, next.vel_z, next.angvel),
        Integrator::Explicit => (s.vel_t, s.vel_z, s.angvel),
    };
    next.pos_t += vt * dt;
    next.pos_z += vz * dt;
    next.angle += va * dt;
    Ok(next)
}

fn check_flight_time(t_flight: f64) -> Result<()> {
    if !(t_flight >= 0.0) || !t_flight.is_finite() {
        return Err(Error::InvalidInput(format!(
            "flight time must be finite and >= 0, got {t_flight}"
        )));
    }
    Ok(())
}

/// Closed-form projectile propagation with constant angular velocity.
pub fn ballistic_map(s: &PlanarState, t_flight: f64, params: &RobotParams) -> Result<PlanarState> {
    ballistic_under(s, t_flight, params.gravity)
}

/// [`ballistic_map`] for an explicit gravitational acceleration.
pub fn ballistic_under(s: &PlanarState, t_flight: f64, g: f64) -> Result<PlanarState> {
    check_flight_time(t_flight)?;
    Ok(PlanarState {
        pos_t: s.pos_t + s.vel_t * t_flight,
        pos_z: s.pos_z + s.vel_z * t_flight - 0.5 * g * t_flight * t_flight,
        angle: s.angle + s.angvel * t_flight,
        vel_t: s.vel_t,
        vel_z: s.vel_z - g * t_flight,
        angvel: s.angvel,
    })
}

/// Liftoff state whose ballistic flight of `t_flight` ends in `target`.
pub fn inverse_ballistic(
    target: &PlanarState,
    t_flight: f64,
    params: &RobotParams,
) -> Result<PlanarState> {
    check_flight_time(t_flight)?;
    let g = params.gravity;
    let vel_z = target.vel_z + g * t_flight;
    Ok(PlanarState {
        pos_t: target.pos_t - target.vel_t * t_flight,
        pos_z: target.pos_z - vel_z * t_flight + 0.5 * g * t_flight * t_flight,
        angle: target.angle - target.angvel * t_flight,
        vel_t: target.vel_t,
        vel_z,
        angvel: target.angvel,
    })
}
