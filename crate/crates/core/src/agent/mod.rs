//! Twin critics with opposite targets, the four styled estimators, the
//! skill-conditioned actor, and the `ccep` / `ccep-separate` / `td3` / `ddpg`
//! training procedures.

mod actor;
mod config;
mod critic;
mod train;
mod update;

use rand::Rng;

pub use actor::{one_hot, select_action, Actor};
pub use config::{ActorLayout, Algorithm, CcepConfig, Variant, MAX_STYLES};
pub use critic::{CriticEnsemble, CriticId, Style};
pub use train::{train, EvalProtocol, TrainObserver, Trained};
pub use update::{
    controversy, critic_losses, critic_update, mean_abs_gap, policy_gradient, policy_update, styles_for,
    td_from_parts, td_target, update_targets, CriticLosses, UpdateSettings,
};

use crate::envs::EnvSpec;
use crate::error::Result;
use crate::replay::Batch;
use crate::seed::derive_seed;

pub(crate) const CRITIC_STREAM: u64 = 10;
pub(crate) const ACTOR_STREAM: u64 = 20;

/// Networks, optimizers and settings for one training run.
#[derive(Debug, Clone)]
pub struct Agent {
    pub config: CcepConfig,
    pub variant: Variant,
    pub spec: EnvSpec,
    pub critics: CriticEnsemble,
    pub actor: Actor,
    pub settings: UpdateSettings,
    updates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub losses: CriticLosses,
    /// Present on steps that also updated the actor.
    pub policy_objective: Option<f64>,
}

impl Agent {
    pub fn new(config: &CcepConfig, spec: EnvSpec) -> Result<Self> {
        config.validate()?;
        let variant = config.variant();
        let seed = config.seed;
        let critics = CriticEnsemble::new(
            spec.obs_dim,
            spec.act_dim,
            &config.hidden_sizes,
            variant.negate_second,
            variant.twin,
            (derive_seed(seed, CRITIC_STREAM), derive_seed(seed, CRITIC_STREAM + 1)),
        )?;
        let actor = Actor::new(
            variant.layout,
            variant.styles,
            spec.obs_dim,
            spec.act_dim,
            spec.act_bound,
            &config.hidden_sizes,
            |j| derive_seed(seed, ACTOR_STREAM + j as u64),
        )?;
        Ok(Agent {
            settings: UpdateSettings::new(config, &variant, spec.act_bound),
            config: config.clone(),
            variant,
            spec,
            critics,
            actor,
            updates: 0,
        })
    }

    pub fn num_updates(&self) -> usize {
        self.updates
    }

    /// Critic step every call; actor and target step every `policy_delay` calls.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<UpdateStats> {
        let targets = td_target(&self.critics, &self.actor, batch, rng, &self.settings)?;
        let losses = critic_update(&mut self.critics, batch, &targets, &self.settings)?;
        self.updates += 1;
        let policy_objective = if self.updates % self.settings.policy_delay == 0 {
            let j = policy_update(&mut self.actor, &self.critics, &batch.s, &self.settings)?;
            update_targets(&mut self.critics, &mut self.actor, self.settings.tau)?;
            Some(j)
        } else {
            None
        };
        Ok(UpdateStats {
            losses,
            policy_objective,
        })
    }
}
