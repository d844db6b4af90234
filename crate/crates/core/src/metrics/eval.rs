use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Actor;
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

const MIXTURE_STREAM: u64 = 0x6d69_7874;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalMode {
    /// `episodes / K` episodes (at least one) with each style held fixed.
    PerStyle,
    /// One uniformly drawn style per episode.
    #[default]
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Mean return of the episodes run under each style; NaN if none were.
    pub per_style: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation across episodes.
    pub std: f64,
    pub episodes: usize,
}

/// Undiscounted return of one noiseless episode under style `z`.
pub fn rollout(actor: &Actor, env: &mut dyn Environment, z: usize, reset_seed: u64) -> Result<f64> {
    let mut obs = env.reset(reset_seed);
    let mut total = 0.0;
    loop {
        let a = actor.act(&obs, z)?;
        let step = env.step(&a)?;
        total += step.reward;
        if step.done {
            return Ok(total);
        }
        obs = step.next_obs;
    }
}

/// Noiseless policy rollouts. Episode `i` always resets with the same derived
/// seed, so a fixed `seed` reproduces the report exactly.
pub fn evaluate(
    actor: &Actor,
    env: &mut dyn Environment,
    episodes: usize,
    mode: EvalMode,
    seed: u64,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::config("evaluation needs at least one episode"));
    }
    let k = actor.styles();
    let plan: Vec<usize> = match mode {
        EvalMode::PerStyle => {
            let per = (episodes / k).max(1);
            (0..k).flat_map(|z| std::iter::repeat_n(z, per)).collect()
        }
        EvalMode::Mixture => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, MIXTURE_STREAM));
            (0..episodes).map(|_| rng.gen_range(0..k)).collect()
        }
    };

    let mut returns = Vec::with_capacity(plan.len());
    for (i, &z) in plan.iter().enumerate() {
        returns.push(rollout(actor, env, z, derive_seed(seed, i as u64))?);
    }

    let mut per_style = vec![f64::NAN; k];
    for (z, slot) in per_style.iter_mut().enumerate() {
        let rs: Vec<f64> = plan.iter().zip(&returns).filter(|(&p, _)| p == z).map(|(_, &r)| r).collect();
        if !rs.is_empty() {
            *slot = rs.iter().sum::<f64>() / rs.len() as f64;
        }
    }
    let (mean, std) = mean_std(&returns);
    Ok(EvalReport {
        per_style,
        mean,
        std,
        episodes: returns.len(),
    })
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::ActorLayout;
    use crate::envs::{EnvSpec, Pendulum, StepResult};

    /// Reward 1 per step for ten steps.
    struct Constant {
        t: usize,
    }

    impl Environment for Constant {
        fn spec(&self) -> EnvSpec {
            EnvSpec { obs_dim: 1, act_dim: 1, act_bound: 1.0, max_episode_steps: 10 }
        }
        fn reset(&mut self, _seed: u64) -> Vec<f64> {
            self.t = 0;
            vec![0.0]
        }
        fn step(&mut self, _a: &[f64]) -> Result<StepResult> {
            self.t += 1;
            Ok(StepResult { next_obs: vec![0.0], reward: 1.0, done: self.t == 10, truncated: self.t == 10 })
        }
        fn coverage_point(&self) -> Vec<f64> {
            vec![0.0]
        }
        fn coverage_bounds(&self) -> Vec<(f64, f64)> {
            vec![(0.0, 1.0)]
        }
    }

    fn actor(k: usize, obs: usize, bound: f64) -> Actor {
        Actor::new(ActorLayout::Centralized, k, obs, 1, bound, &[8], |j| j as u64).unwrap()
    }

    #[test]
    fn constant_reward_episode() {
        let r = evaluate(&actor(1, 1, 1.0), &mut Constant { t: 0 }, 1, EvalMode::Mixture, 0).unwrap();
        assert_eq!((r.mean, r.std, r.episodes), (10.0, 0.0, 1));
        assert_eq!(r.per_style, vec![10.0]);
    }

    #[test]
    fn single_style_modes_coincide() {
        let a = actor(1, 3, 2.0);
        let m = evaluate(&a, &mut Pendulum::new(), 4, EvalMode::Mixture, 9).unwrap();
        let p = evaluate(&a, &mut Pendulum::new(), 4, EvalMode::PerStyle, 9).unwrap();
        assert_eq!(m, p);
    }

    #[test]
    fn repeatable_and_style_complete() {
        let a = actor(4, 3, 2.0);
        let r1 = evaluate(&a, &mut Pendulum::new(), 8, EvalMode::PerStyle, 1).unwrap();
        let r2 = evaluate(&a, &mut Pendulum::new(), 8, EvalMode::PerStyle, 1).unwrap();
        assert_eq!(format!("{r1:?}"), format!("{r2:?}"));
        assert_eq!(r1.episodes, 8);
        assert!(r1.per_style.iter().all(|x| x.is_finite()));
        assert!(r1.std >= 0.0);
    }

    #[test]
    fn per_style_runs_at_least_one_episode_each() {
        let a = actor(4, 3, 2.0);
        let r = evaluate(&a, &mut Pendulum::new(), 2, EvalMode::PerStyle, 1).unwrap();
        assert_eq!(r.episodes, 4);
    }

    #[test]
    fn zero_episodes_rejected() {
        assert!(evaluate(&actor(1, 1, 1.0), &mut Constant { t: 0 }, 0, EvalMode::Mixture, 0).is_err());
    }

    #[test]
    fn mean_std_by_hand() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
    }
}
