//! TOML configuration files for the command-line tool.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constraints::ObstacleSpec;
use crate::error::{Error, Result};
use crate::grf_profile::JumpTask;
use crate::motion_library::{TaskSampler, DEFAULT_ROTATION_WEIGHT};
use crate::planner::PlannerConfig;
use crate::rollout_controller::RolloutConfig;
use crate::srb_model::{MotionType, RobotParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    /// Metres per radian in the selection distance.
    pub rotation_weight: f64,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            rotation_weight: DEFAULT_ROTATION_WEIGHT,
        }
    }
}

/// Everything a run needs besides the task. Missing sections and keys take
/// their defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub robot: RobotParams,
    pub planner: PlannerConfig,
    pub library: TaskSampler,
    pub rollout: RolloutConfig,
    pub select: SelectConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::storage(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.robot.validate()?;
        self.library.validate()?;
        self.rollout.validate()?;
        if !(self.select.rotation_weight >= 0.0 && self.select.rotation_weight.is_finite()) {
            return Err(Error::Config("rotation weight must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// A task file: motion, displacement from the default crouch and optional
/// obstacle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub motion: MotionType,
    /// `(dt, dz)` in the motion's plane, m.
    #[serde(default)]
    pub displacement: [f64; 2],
    /// Final angle; flips default to their full turn, everything else to 0.
    #[serde(default)]
    pub target_angle: Option<f64>,
    #[serde(default)]
    pub obstacle: Option<ObstacleSpec>,
}

impl TaskSpec {
    pub fn new(motion: MotionType, displacement: [f64; 2]) -> Self {
        Self {
            motion,
            displacement,
            target_angle: None,
            obstacle: None,
        }
    }

    pub fn to_task(&self) -> Result<JumpTask> {
        let mut task = JumpTask::standard(self.motion, self.displacement);
        if let Some(a) = self.target_angle {
            task.target_angle = a;
        }
        task.obstacle = self.obstacle;
        task.validate()?;
        Ok(task)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: TaskSpec = toml::from_str(text)?;
        spec.to_task()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::storage(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("task serializes")
    }
}
