//! Python bindings for the quadjump planner.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use quadjump::config::{Config, TaskSpec};
use quadjump::constraints::ObstacleSpec;
use quadjump::de_optimizer::{optimize, DeConfig};
use quadjump::grf_profile::JumpTask;
use quadjump::motion_library::{self, Query};
use quadjump::planner::{plan_task, PlannerConfig};
use quadjump::rollout_controller::{replay_forces, rollout, RolloutConfig};
use quadjump::srb_model::{MotionType, RobotParams};
use quadjump::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Storage { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse_motion(name: &str) -> PyResult<MotionType> {
    name.parse().map_err(to_py)
}

fn config(toml: Option<&str>) -> PyResult<Config> {
    toml.map_or_else(|| Ok(Config::default()), |t| Config::from_toml_str(t).map_err(to_py))
}

/// Robot constants. Defaults are the Mini Cheetah-sized model.
#[pyclass(name = "RobotParams", module = "quadjump_py", from_py_object)]
#[derive(Clone)]
struct PyRobotParams {
    inner: RobotParams,
}

#[pymethods]
impl PyRobotParams {
    #[new]
    #[pyo3(signature = (toml = None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(t) => RobotParams::from_toml_str(t).map_err(to_py)?,
            None => RobotParams::default(),
        };
        Ok(Self { inner })
    }

    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }

    #[getter]
    fn inertia_diag(&self) -> [f64; 3] {
        self.inner.inertia_diag
    }

    #[getter]
    fn link_lengths(&self) -> [f64; 3] {
        self.inner.link_lengths
    }

    #[getter]
    fn friction_mu(&self) -> f64 {
        self.inner.friction_mu
    }

    #[getter]
    fn joint_torque_max(&self) -> f64 {
        self.inner.joint_torque_max
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    fn __repr__(&self) -> String {
        format!("RobotParams(mass={}, mu={})", self.inner.mass, self.inner.friction_mu)
    }
}

/// A jump from the default crouch by `(dx, dz)`, optionally through a window
/// given as `(crossing, ground_top, aerial_bottom, margin)`.
#[pyclass(name = "JumpTask", module = "quadjump_py", from_py_object)]
#[derive(Clone)]
struct PyJumpTask {
    inner: JumpTask,
}

#[pymethods]
impl PyJumpTask {
    #[new]
    #[pyo3(signature = (motion, dx = 0.0, dz = 0.0, target_angle = None, window = None))]
    fn new(
        motion: &str,
        dx: f64,
        dz: f64,
        target_angle: Option<f64>,
        window: Option<(f64, f64, f64, f64)>,
    ) -> PyResult<Self> {
        let spec = TaskSpec {
            motion: parse_motion(motion)?,
            displacement: [dx, dz],
            target_angle,
            obstacle: window.map(|(c, g, a, m)| ObstacleSpec::window(c, g, a, m)),
        };
        Ok(Self {
            inner: spec.to_task().map_err(to_py)?,
        })
    }

    #[getter]
    fn motion(&self) -> &'static str {
        self.inner.motion.name()
    }

    #[getter]
    fn target_pos(&self) -> [f64; 2] {
        self.inner.target_pos
    }

    #[getter]
    fn target_angle(&self) -> f64 {
        self.inner.target_angle
    }

    fn __repr__(&self) -> String {
        format!(
            "JumpTask({}, target=({:.3}, {:.3}), angle={:.3})",
            self.inner.motion, self.inner.target_pos[0], self.inner.target_pos[1], self.inner.target_angle
        )
    }
}

/// A sampled jump trajectory.
#[pyclass(name = "Trajectory", module = "quadjump_py", from_py_object)]
#[derive(Clone)]
struct PyTrajectory {
    inner: quadjump::trajectory::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: motion_library::load_trajectory(&path).map_err(to_py)?,
        })
    }

    /// Writes the binary file and returns its CRC32.
    fn save(&self, path: PathBuf) -> PyResult<u32> {
        motion_library::save_trajectory(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn energy(&self) -> f64 {
        self.inner.energy
    }

    #[getter]
    fn phase_times(&self) -> [f64; 3] {
        self.inner.phase_times
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.t).collect()
    }

    /// Rows of `(pos_t, pos_z, angle, vel_t, vel_z, angvel)`.
    fn states(&self) -> Vec<[f64; 6]> {
        self.inner.samples.iter().map(|s| s.state.to_array()).collect()
    }

    /// Re-checks every constraint; raises if one is violated.
    #[pyo3(signature = (params = None))]
    fn validate(&self, params: Option<PyRobotParams>) -> PyResult<()> {
        let p = params.map_or_else(RobotParams::default, |p| p.inner);
        motion_library::validate_trajectory(&self.inner, &p).map(|_| ()).map_err(to_py)
    }

    /// Largest CoM distance to the plan when its forces are integrated with
    /// step `dt`.
    #[pyo3(signature = (dt = 1e-3))]
    fn replay_error(&self, dt: f64) -> PyResult<f64> {
        Ok(replay_forces(&self.inner, &RobotParams::default(), dt).map_err(to_py)?.max_error)
    }

    /// Joint-level rollout; returns a dict summary.
    #[pyo3(signature = (config_toml = None))]
    fn rollout<'py>(&self, py: Python<'py>, config_toml: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
        let cfg = config(config_toml)?;
        let rc: RolloutConfig = cfg.rollout;
        let r = rollout(&self.inner, &rc, &cfg.robot).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("success", r.success)?;
        d.set_item("failure", r.failure.clone())?;
        d.set_item("max_com_error", r.max_com_error())?;
        d.set_item("apex_height", r.apex_height)?;
        d.set_item("planned_apex", r.planned_apex)?;
        d.set_item("max_tau_cmd", r.max_tau_cmd)?;
        d.set_item("csv", r.csv())?;
        Ok(d)
    }
}

/// Outcome of one planning run.
#[pyclass(name = "PlanResult", module = "quadjump_py", get_all)]
struct PyPlanResult {
    feasible: bool,
    worst_level: Option<usize>,
    energy: f64,
    phase_times: [f64; 3],
    design: [f64; 12],
    history: Vec<f64>,
    first_feasible_generation: Option<usize>,
    trajectory: Option<PyTrajectory>,
}

/// Runs the optimizer for one task. `config_toml` uses the command-line
/// configuration format; `seed` overrides its planner seed.
#[pyfunction]
#[pyo3(signature = (task, seed = 0, config_toml = None))]
fn plan(py: Python<'_>, task: &PyJumpTask, seed: u64, config_toml: Option<&str>) -> PyResult<PyPlanResult> {
    let cfg = config(config_toml)?;
    let pc = PlannerConfig {
        seed,
        ..cfg.planner.clone()
    };
    let t = task.inner;
    let r = py.detach(|| plan_task(&t, &cfg.robot, &pc)).map_err(to_py)?;
    Ok(PyPlanResult {
        feasible: r.feasible(),
        worst_level: r.fitness.worst_level,
        energy: r.fitness.energy_joules,
        phase_times: [r.design.t1, r.design.t2, r.design.t3],
        design: r.design.to_array(),
        first_feasible_generation: r.first_feasible_generation(),
        history: r.de.history.clone(),
        trajectory: r.trajectory.filter(|_| r.report.all_satisfied()).map(|inner| PyTrajectory { inner }),
    })
}

/// Builds a library of `count` sampled tasks under `out_dir`; returns the
/// number stored.
#[pyfunction]
#[pyo3(signature = (out_dir, count = 20, seed = 0, config_toml = None))]
fn build_library(py: Python<'_>, out_dir: PathBuf, count: usize, seed: u64, config_toml: Option<&str>) -> PyResult<usize> {
    let mut cfg = config(config_toml)?;
    cfg.library.count = count;
    cfg.library.seed = seed;
    cfg.planner.seed = seed;
    let outcome = py
        .detach(|| motion_library::build_library(&cfg.library, &cfg.planner, &cfg.robot, &out_dir))
        .map_err(to_py)?;
    Ok(outcome.index.entries.len())
}

/// A stored motion library.
#[pyclass(name = "Library", module = "quadjump_py")]
struct PyLibrary {
    inner: motion_library::Library,
}

#[pymethods]
impl PyLibrary {
    #[new]
    fn new(dir: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: motion_library::Library::open(&dir).map_err(to_py)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.index.entries.len()
    }

    /// Entry files in energy order.
    fn files(&self) -> Vec<String> {
        self.inner.index.entries.iter().map(|e| e.file.clone()).collect()
    }

    /// Nearest entry to a world displacement `(x, y, z)` and rotation.
    /// Returns `(file, energy, trajectory)`.
    #[pyo3(signature = (position, rotation = 0.0, motion = None))]
    fn select(&self, position: [f64; 3], rotation: f64, motion: Option<&str>) -> PyResult<(String, f64, PyTrajectory)> {
        let mut q = Query::new(position, rotation);
        q.motion = motion.map(parse_motion).transpose()?;
        let (entry, traj) = self.inner.select(&q).map_err(to_py)?;
        Ok((entry.file.clone(), entry.energy_j, PyTrajectory { inner: traj }))
    }

    /// Loads and re-validates every entry.
    fn verify(&self) -> PyResult<()> {
        self.inner.verify(&RobotParams::default()).map_err(to_py)
    }
}

/// Minimizes a Python callable over a box with differential evolution.
/// Returns `(best_vector, best_value, history)`.
#[pyfunction]
#[pyo3(signature = (func, lower, upper, population = 60, max_generations = 500, seed = 0))]
fn de_minimize(
    func: Py<PyAny>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    population: usize,
    max_generations: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, f64, Vec<f64>)> {
    let cfg = DeConfig {
        population,
        max_generations,
        seed,
        ..DeConfig::with_bounds(lower, upper)
    };
    let objective = |x: &[f64]| {
        Python::attach(|py| {
            func.call1(py, (x.to_vec(),))
                .and_then(|v| v.extract::<f64>(py))
                .unwrap_or(f64::NAN)
        })
    };
    let r = optimize(&cfg, objective).map_err(to_py)?;
    Ok((r.best_vector, r.best_fitness, r.history))
}

/// The default configuration as TOML.
#[pyfunction]
fn default_config() -> String {
    Config::default().to_toml_string()
}

#[pymodule]
fn quadjump_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRobotParams>()?;
    m.add_class::<PyJumpTask>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyPlanResult>()?;
    m.add_class::<PyLibrary>()?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(build_library, m)?)?;
    m.add_function(wrap_pyfunction!(de_minimize, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
