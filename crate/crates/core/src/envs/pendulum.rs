use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{clip, EnvSpec, Environment, StepResult};
use crate::error::{check_dim, Error, Result};

pub const GRAVITY: f64 = 10.0;
pub const MASS: f64 = 1.0;
pub const LENGTH: f64 = 1.0;
pub const DT: f64 = 0.05;
pub const MAX_SPEED: f64 = 8.0;
pub const MAX_TORQUE: f64 = 2.0;
pub const MAX_STEPS: usize = 200;

/// Maps an angle to `(-π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let y = theta.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Torque-limited pendulum swing-up; `θ = 0` is upright.
#[derive(Debug, Clone)]
pub struct Pendulum {
    theta: f64,
    theta_dot: f64,
    steps: usize,
    done: bool,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

impl Pendulum {
    /// Starts finished; call `reset` first.
    pub fn new() -> Self {
        Pendulum {
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
            done: true,
        }
    }

    /// A live episode at the given state.
    pub fn with_state(theta: f64, theta_dot: f64) -> Self {
        Pendulum {
            theta,
            theta_dot,
            steps: 0,
            done: false,
        }
    }

    pub fn state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> EnvSpec {
        EnvSpec {
            obs_dim: 3,
            act_dim: 1,
            act_bound: MAX_TORQUE,
            max_episode_steps: MAX_STEPS,
        }
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.theta = rng.gen_range(-PI..=PI);
        self.theta_dot = rng.gen_range(-1.0..=1.0);
        self.steps = 0;
        self.done = false;
        self.obs()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeOver);
        }
        check_dim("pendulum action", 1, action.len())?;
        let u = clip(action[0], MAX_TORQUE);
        let th = wrap_angle(self.theta);
        let reward = -(th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u);

        let accel = 3.0 * GRAVITY / (2.0 * LENGTH) * self.theta.sin() + 3.0 / (MASS * LENGTH * LENGTH) * u;
        self.theta_dot = (self.theta_dot + accel * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta += self.theta_dot * DT;
        self.steps += 1;

        let truncated = self.steps >= MAX_STEPS;
        self.done = truncated;
        Ok(StepResult {
            next_obs: self.obs(),
            reward,
            done: truncated,
            truncated,
        })
    }

    fn coverage_point(&self) -> Vec<f64> {
        vec![wrap_angle(self.theta), self.theta_dot]
    }

    fn coverage_bounds(&self) -> Vec<(f64, f64)> {
        vec![(-PI, PI), (-MAX_SPEED, MAX_SPEED)]
    }
}
