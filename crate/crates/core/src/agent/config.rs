use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Shared skill-conditioned actor trained against all styled critics.
    Ccep,
    /// One independent actor per style (no cooperation).
    CcepSeparate,
    Td3,
    Ddpg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Ccep,
        Algorithm::CcepSeparate,
        Algorithm::Td3,
        Algorithm::Ddpg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ccep => "ccep",
            Algorithm::CcepSeparate => "ccep-separate",
            Algorithm::Td3 => "td3",
            Algorithm::Ddpg => "ddpg",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "algorithm",
                name: s.to_string(),
            })
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Number of distinct styled value estimators (Q1, Q2, max, min).
pub const MAX_STYLES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcepConfig {
    pub algorithm: Algorithm,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub tau: f64,
    /// Critic updates per actor/target update.
    pub policy_delay: usize,
    /// Target-smoothing noise std, as a fraction of the action bound.
    pub target_noise: f64,
    /// Target-smoothing clip, as a fraction of the action bound.
    pub noise_clip: f64,
    /// Behavior noise std, as a fraction of the action bound.
    pub exploration_noise: f64,
    pub warmup_steps: usize,
    pub buffer_capacity: usize,
    pub num_styles: usize,
    /// Negate the second critic's output; `None` picks the algorithm's default.
    pub opposite_targets: Option<bool>,
    pub hidden_sizes: Vec<usize>,
    pub total_steps: usize,
    pub seed: u64,
}

impl Default for CcepConfig {
    fn default() -> Self {
        CcepConfig {
            algorithm: Algorithm::Ccep,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            batch_size: 256,
            gamma: 0.99,
            tau: 5e-3,
            policy_delay: 2,
            target_noise: 0.2,
            noise_clip: 0.5,
            exploration_noise: 0.1,
            warmup_steps: 25_000,
            buffer_capacity: 1_000_000,
            num_styles: 4,
            opposite_targets: None,
            hidden_sizes: vec![256, 256],
            total_steps: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActorLayout {
    Centralized,
    Separate,
}

/// What an [`Algorithm`] actually switches on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variant {
    pub styles: usize,
    pub negate_second: bool,
    pub twin: bool,
    pub smoothing: bool,
    pub policy_delay: usize,
    pub layout: ActorLayout,
}

impl CcepConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr_actor", self.lr_actor),
            ("lr_critic", self.lr_critic),
            ("tau", self.tau),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be > 0, got {v}")));
            }
        }
        let non_negative = [
            ("target_noise", self.target_noise),
            ("noise_clip", self.noise_clip),
            ("exploration_noise", self.exploration_noise),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if self.tau > 1.0 {
            return Err(Error::config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.policy_delay == 0 {
            return Err(Error::config(
                "batch_size, buffer_capacity and policy_delay must be at least 1",
            ));
        }
        if self.hidden_sizes.contains(&0) {
            return Err(Error::config("hidden layer widths must be at least 1"));
        }
        if !(1..=MAX_STYLES).contains(&self.num_styles) {
            return Err(Error::config(format!(
                "num_styles must lie in 1..={MAX_STYLES}, got {}",
                self.num_styles
            )));
        }
        if self.algorithm == Algorithm::Ddpg && self.opposite_targets == Some(true) {
            return Err(Error::config("ddpg has a single critic; opposite_targets does not apply"));
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        let d = self.policy_delay;
        match self.algorithm {
            Algorithm::Ccep | Algorithm::CcepSeparate => Variant {
                styles: self.num_styles,
                negate_second: self.opposite_targets.unwrap_or(true),
                twin: true,
                smoothing: true,
                policy_delay: d,
                layout: if self.algorithm == Algorithm::Ccep {
                    ActorLayout::Centralized
                } else {
                    ActorLayout::Separate
                },
            },
            Algorithm::Td3 => Variant {
                styles: 1,
                negate_second: self.opposite_targets.unwrap_or(false),
                twin: true,
                smoothing: true,
                policy_delay: d,
                layout: ActorLayout::Centralized,
            },
            Algorithm::Ddpg => Variant {
                styles: 1,
                negate_second: false,
                twin: false,
                smoothing: false,
                policy_delay: 1,
                layout: ActorLayout::Centralized,
            },
        }
    }
}
