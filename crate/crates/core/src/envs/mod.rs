//! Desk-scale continuous-control environments behind one interface.

mod pendulum;
mod pointmaze;

use serde::{Deserialize, Serialize};

pub use pendulum::{wrap_angle, Pendulum};
pub use pointmaze::{PointMaze, Wall};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub act_dim: usize,
    /// Actions live in `[-act_bound, act_bound]` on every axis.
    pub act_bound: f64,
    pub max_episode_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_obs: Vec<f64>,
    pub reward: f64,
    /// Episode over, by termination or truncation.
    pub done: bool,
    /// Episode cut by the time limit rather than a terminal state.
    pub truncated: bool,
}

impl StepResult {
    /// Genuine termination, the only case where bootstrapping stops.
    pub fn terminated(&self) -> bool {
        self.done && !self.truncated
    }
}

pub trait Environment: Send {
    fn spec(&self) -> EnvSpec;

    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Actions are clipped to the box; stepping a finished episode is an error.
    fn step(&mut self, action: &[f64]) -> Result<StepResult>;

    /// Current state in the low-dimensional space used for coverage counting.
    fn coverage_point(&self) -> Vec<f64>;

    fn coverage_bounds(&self) -> Vec<(f64, f64)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Pendulum,
    Pointmaze,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::Pointmaze => "pointmaze",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum" => Ok(EnvKind::Pendulum),
            "pointmaze" => Ok(EnvKind::Pointmaze),
            other => Err(Error::UnknownName {
                kind: "environment",
                name: other.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for EnvKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Builds an environment; `walls` applies to the maze only.
pub fn make_env(kind: EnvKind, walls: &[Wall]) -> Result<Box<dyn Environment>> {
    Ok(match kind {
        EnvKind::Pendulum => Box::new(Pendulum::new()),
        EnvKind::Pointmaze => Box::new(PointMaze::new(walls.to_vec())?),
    })
}

pub(crate) fn clip(x: f64, bound: f64) -> f64 {
    x.clamp(-bound, bound)
}
