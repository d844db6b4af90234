use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{Algorithm, CcepConfig, EvalProtocol};
use crate::envs::{make_env, EnvKind, Environment, PointMaze, Wall};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::EvalMode;

/// Environment variable that overrides the configured output root.
pub const OUT_DIR_ENV: &str = "CCEP_OUT_DIR";

/// Everything a `train` or `bench` invocation needs, as one flat JSON object.
///
/// Unset keys take their defaults; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub tau: f64,
    pub policy_delay: usize,
    pub target_noise: f64,
    pub noise_clip: f64,
    pub exploration_noise: f64,
    pub warmup_steps: usize,
    pub buffer_capacity: usize,
    pub num_styles: usize,
    pub opposite_targets: Option<bool>,
    pub hidden_sizes: Vec<usize>,
    pub total_steps: usize,
    /// Seed of a single `train` run.
    pub seed: u64,
    /// Seeds of a `bench` run.
    pub seeds: Vec<u64>,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub eval_mode: EvalMode,
    pub grid_resolution: usize,
    /// Maze layout; ignored by the pendulum.
    pub walls: Vec<Wall>,
    pub out_dir: PathBuf,
    /// Write actor snapshots at every evaluation.
    pub snapshots: bool,
    /// How independent seeds are scheduled.
    pub execution: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        let c = CcepConfig::default();
        let p = EvalProtocol::default();
        RunConfig {
            env: EnvKind::Pendulum,
            algorithm: c.algorithm,
            lr_actor: c.lr_actor,
            lr_critic: c.lr_critic,
            batch_size: c.batch_size,
            gamma: c.gamma,
            tau: c.tau,
            policy_delay: c.policy_delay,
            target_noise: c.target_noise,
            noise_clip: c.noise_clip,
            exploration_noise: c.exploration_noise,
            warmup_steps: c.warmup_steps,
            buffer_capacity: c.buffer_capacity,
            num_styles: c.num_styles,
            opposite_targets: c.opposite_targets,
            hidden_sizes: c.hidden_sizes,
            total_steps: c.total_steps,
            seed: c.seed,
            seeds: (0..10).collect(),
            eval_interval: p.interval,
            eval_episodes: p.episodes,
            eval_mode: p.mode,
            grid_resolution: p.grid_resolution,
            walls: PointMaze::default_walls(),
            out_dir: PathBuf::from("runs"),
            snapshots: false,
            execution: Execution::default(),
        }
    }
}

impl RunConfig {
    /// Agent settings for one seed.
    pub fn agent_config(&self, seed: u64) -> CcepConfig {
        CcepConfig {
            algorithm: self.algorithm,
            lr_actor: self.lr_actor,
            lr_critic: self.lr_critic,
            batch_size: self.batch_size,
            gamma: self.gamma,
            tau: self.tau,
            policy_delay: self.policy_delay,
            target_noise: self.target_noise,
            noise_clip: self.noise_clip,
            exploration_noise: self.exploration_noise,
            warmup_steps: self.warmup_steps,
            buffer_capacity: self.buffer_capacity,
            num_styles: self.num_styles,
            opposite_targets: self.opposite_targets,
            hidden_sizes: self.hidden_sizes.clone(),
            total_steps: self.total_steps,
            seed,
        }
    }

    pub fn protocol(&self) -> EvalProtocol {
        EvalProtocol {
            interval: self.eval_interval,
            episodes: self.eval_episodes,
            mode: self.eval_mode,
            grid_resolution: self.grid_resolution,
        }
    }

    pub fn make_env(&self) -> Result<Box<dyn Environment>> {
        make_env(self.env, &self.walls)
    }

    pub fn validate(&self) -> Result<()> {
        self.agent_config(self.seed).validate()?;
        if self.eval_interval == 0 {
            return Err(Error::config("eval_interval must be > 0"));
        }
        if self.eval_episodes == 0 {
            return Err(Error::config("eval_episodes must be > 0"));
        }
        if self.grid_resolution == 0 {
            return Err(Error::config("grid_resolution must be > 0"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must list at least one seed"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("seeds must be distinct"));
        }
        if self.env == EnvKind::Pointmaze {
            PointMaze::new(self.walls.clone())?;
        }
        Ok(())
    }

    /// Parses and validates a JSON config; an empty file means all defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let text = if text.trim().is_empty() { "{}" } else { text };
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Malformed {
            what: "config".into(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Output root: explicit override, then `CCEP_OUT_DIR`, then `out_dir`.
    pub fn output_root(&self, cli_override: Option<&Path>) -> PathBuf {
        if let Some(p) = cli_override {
            return p.to_path_buf();
        }
        match std::env::var_os(OUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.out_dir.clone(),
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_json(&text).map_err(|e| match e {
        Error::Malformed { reason, .. } => Error::Malformed {
            what: path.display().to_string(),
            reason,
        },
        other => other,
    })
}

pub fn save_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    std::fs::write(path, cfg.to_json() + "\n").map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_table_defaults() {
        for text in ["", "{}", r#"{"env": "pendulum"}"#] {
            let cfg = RunConfig::from_json(text).unwrap();
            assert_eq!(cfg.env, EnvKind::Pendulum);
            assert_eq!(cfg.gamma, 0.99);
            assert_eq!(cfg.tau, 0.005);
            assert_eq!(cfg.batch_size, 256);
            assert_eq!(cfg.policy_delay, 2);
            assert_eq!(cfg.lr_actor, 3e-4);
            assert_eq!(cfg.num_styles, 4);
            assert_eq!(cfg.hidden_sizes, vec![256, 256]);
            assert_eq!(cfg.eval_interval, 5000);
            assert_eq!(cfg.eval_episodes, 10);
            assert_eq!(cfg.grid_resolution, 20);
        }
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_json(r#"{"gamma": 1.5}"#).is_err());
        assert!(RunConfig::from_json(r#"{"eval_interval": 0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"seeds": []}"#).is_err());
        assert!(RunConfig::from_json(r#"{"seeds": [1, 1]}"#).is_err());
        assert!(RunConfig::from_json(r#"{"algo": "td3"}"#).is_err());
        assert!(RunConfig::from_json(r#"{"algorithm": "sac"}"#).is_err());
        assert!(RunConfig::from_json("{").is_err());
        assert!(RunConfig::from_json(r#"{"algorithm": "ddpg", "opposite_targets": true}"#).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        let cfg = RunConfig {
            env: EnvKind::Pointmaze,
            algorithm: Algorithm::CcepSeparate,
            gamma: 0.95,
            tau: 0.1 + 0.2,
            seeds: vec![3, 1, 2],
            opposite_targets: Some(false),
            walls: vec![Wall::from([0.0, 0.5, 0.4, 0.5])],
            eval_mode: EvalMode::PerStyle,
            ..RunConfig::default()
        };
        save_config(&cfg, &path).unwrap();
        assert_eq!(load_config(&path).unwrap(), cfg);
    }

    #[test]
    fn malformed_file_names_its_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, "{ nope").unwrap();
        let msg = load_config(&path).unwrap_err().to_string();
        assert!(msg.contains("bad.json"), "{msg}");
        assert!(load_config(&dir.path().join("missing.json")).is_err());
    }
}
