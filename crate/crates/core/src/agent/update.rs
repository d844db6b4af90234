//! One gradient step of each kind: TD targets, critic regression, the
//! multi-style policy gradient, and the controversy measurement.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::actor::Actor;
use super::config::{ActorLayout, CcepConfig, Variant};
use super::critic::{CriticEnsemble, CriticId, Style};
use crate::error::{check_dim, Error, Result};
use crate::numerics::{adam_step, soft_update, Gradients, Matrix};
use crate::replay::Batch;

/// Hyperparameters an update step needs, with noise already in action units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateSettings {
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    /// Target-smoothing std (absolute).
    pub target_noise: f64,
    /// Target-smoothing clip (absolute).
    pub noise_clip: f64,
    pub act_bound: f64,
    pub smoothing: bool,
    pub policy_delay: usize,
}

impl UpdateSettings {
    pub fn new(cfg: &CcepConfig, variant: &Variant, act_bound: f64) -> Self {
        UpdateSettings {
            gamma: cfg.gamma,
            tau: cfg.tau,
            lr_actor: cfg.lr_actor,
            lr_critic: cfg.lr_critic,
            target_noise: cfg.target_noise * act_bound,
            noise_clip: cfg.noise_clip * act_bound,
            act_bound,
            smoothing: variant.smoothing,
            policy_delay: variant.policy_delay,
        }
    }
}

/// `y = r + γ (1 − done) min_i Q'_i(s', a')` with smoothed target actions.
pub fn td_target<R: Rng + ?Sized>(
    critics: &CriticEnsemble,
    actor: &Actor,
    batch: &Batch,
    rng: &mut R,
    settings: &UpdateSettings,
) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut next_a = actor.act_batch(&batch.s_next, &batch.z_next, true)?;
    if settings.smoothing {
        let normal = Normal::new(0.0, settings.target_noise).map_err(|e| Error::config(e.to_string()))?;
        let (c, b) = (settings.noise_clip, settings.act_bound);
        for v in next_a.data_mut() {
            let eps = normal.sample(rng).clamp(-c, c);
            *v = (*v + eps).clamp(-b, b);
        }
    }
    let sa = batch.s_next.hcat(&next_a)?;
    let (q1, _) = critics.q_batch(CriticId::First, &sa, true)?;
    let q_next = if critics.is_twin() {
        let (q2, _) = critics.q_batch(CriticId::Second, &sa, true)?;
        q1.iter().zip(&q2).map(|(a, b)| a.min(*b)).collect()
    } else {
        q1
    };
    Ok(td_from_parts(&batch.r, &batch.done, &q_next, settings.gamma))
}

/// `y_i = r_i + γ (1 − done_i) q_next_i`.
pub fn td_from_parts(r: &[f64], done: &[bool], q_next: &[f64], gamma: f64) -> Vec<f64> {
    r.iter()
        .zip(done)
        .zip(q_next)
        .map(|((&r, &d), &q)| if d { r } else { r + gamma * q })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticLosses {
    pub first: f64,
    /// `None` for a single-critic ensemble.
    pub second: Option<f64>,
}

/// Mean-squared error of post-negation critic outputs against `targets`.
pub fn critic_losses(critics: &CriticEnsemble, s: &Matrix, a: &Matrix, targets: &[f64]) -> Result<CriticLosses> {
    let sa = s.hcat(a)?;
    let mse = |q: &[f64]| q.iter().zip(targets).map(|(q, y)| (q - y) * (q - y)).sum::<f64>() / q.len() as f64;
    let first = mse(&critics.q_batch(CriticId::First, &sa, false)?.0);
    let second = if critics.is_twin() {
        Some(mse(&critics.q_batch(CriticId::Second, &sa, false)?.0))
    } else {
        None
    };
    Ok(CriticLosses { first, second })
}

/// One Adam step per critic on the batch MSE; returns the pre-step losses.
pub fn critic_update(
    critics: &mut CriticEnsemble,
    batch: &Batch,
    targets: &[f64],
    settings: &UpdateSettings,
) -> Result<CriticLosses> {
    check_dim("td targets", batch.len(), targets.len())?;
    let sa = batch.s.hcat(&batch.a)?;
    let n = batch.len() as f64;
    let ids: &[CriticId] = if critics.is_twin() {
        &[CriticId::First, CriticId::Second]
    } else {
        &[CriticId::First]
    };
    let mut losses = CriticLosses {
        first: 0.0,
        second: None,
    };
    for &id in ids {
        let (q, cache) = critics.q_batch(id, &sa, false)?;
        let sign = critics.sign(id);
        let mut loss = 0.0;
        let mut grad = Matrix::zeros(q.len(), 1);
        for (r, (q, y)) in q.iter().zip(targets).enumerate() {
            let diff = q - y;
            loss += diff * diff;
            // d(mean sq err)/d(raw output), through the output sign
            grad.set(r, 0, sign * 2.0 * diff / n);
        }
        loss /= n;
        let net = critics.net(id, false);
        let g = net.param_gradient_batch(&cache, &grad)?;
        match id {
            CriticId::First => {
                adam_step(&mut critics.net1, &g, &mut critics.opt1, settings.lr_critic)?;
                losses.first = loss;
            }
            CriticId::Second => {
                adam_step(&mut critics.net2, &g, &mut critics.opt2, settings.lr_critic)?;
                losses.second = Some(loss);
            }
        }
    }
    Ok(losses)
}

/// Styles `0..k` trained by an actor with `k` skills.
pub fn styles_for(k: usize) -> Result<Vec<Style>> {
    (0..k).map(Style::from_index).collect()
}

/// Objective `(N·K)⁻¹ Σ_{s, j} Q^j(s, π(s, j))` and its gradient with respect
/// to every actor network. For `Separate` actors each network's share is
/// normalized by `N` alone, since it only sees its own style.
pub fn policy_gradient(actor: &Actor, critics: &CriticEnsemble, states: &Matrix) -> Result<(f64, Vec<Gradients>)> {
    if states.rows() == 0 {
        return Err(Error::EmptyBuffer);
    }
    let styles = styles_for(actor.styles())?;
    if styles.iter().any(|s| s.needs_second()) {
        critics.require_twin()?;
    }
    let n = states.rows();
    let k = styles.len();
    let mut grads: Vec<Gradients> = actor.nets.iter().map(Gradients::zeros_like).collect();
    let mut objective = 0.0;
    let obs_dim = actor.obs_dim();

    for (j, &style) in styles.iter().enumerate() {
        let (net_idx, input) = actor.style_inputs(states, j)?;
        let net = &actor.nets[net_idx];
        let (acts, actor_cache) = net.forward_batch(&input)?;
        let sa = states.hcat(&acts)?;

        let (q1, c1) = critics.q_batch(CriticId::First, &sa, false)?;
        let second = if style.needs_second() {
            Some(critics.q_batch(CriticId::Second, &sa, false)?)
        } else {
            None
        };

        // gradient weight per term; separate nets each average over N only
        let w = match actor.layout() {
            ActorLayout::Centralized => 1.0 / (n * k) as f64,
            ActorLayout::Separate => 1.0 / n as f64,
        };
        let obj_w = 1.0 / (n * k) as f64;
        let mut g1 = Matrix::zeros(n, 1);
        let mut g2 = Matrix::zeros(n, 1);
        let (mut any1, mut any2) = (false, false);
        let sign2 = critics.sign(CriticId::Second);
        for r in 0..n {
            let q2r = second.as_ref().map_or(q1[r], |(q2, _)| q2[r]);
            match style.select(q1[r], q2r) {
                CriticId::First => {
                    objective += obj_w * q1[r];
                    g1.set(r, 0, w);
                    any1 = true;
                }
                CriticId::Second => {
                    objective += obj_w * q2r;
                    g2.set(r, 0, w * sign2);
                    any2 = true;
                }
            }
        }

        let mut d_action = Matrix::zeros(n, actor.act_dim());
        if any1 {
            let dx = critics.net1.input_gradient_batch(&c1, &g1)?;
            accumulate_action_grad(&mut d_action, &dx, obs_dim);
        }
        if any2 {
            let (_, c2) = second.as_ref().expect("selected second critic");
            let dx = critics.net2.input_gradient_batch(c2, &g2)?;
            accumulate_action_grad(&mut d_action, &dx, obs_dim);
        }
        let g = net.param_gradient_batch(&actor_cache, &d_action)?;
        grads[net_idx].add_assign(&g);
    }
    Ok((objective, grads))
}

fn accumulate_action_grad(out: &mut Matrix, d_input: &Matrix, obs_dim: usize) {
    for r in 0..out.rows() {
        for (o, d) in out.row_mut(r).iter_mut().zip(&d_input.row(r)[obs_dim..]) {
            *o += d;
        }
    }
}

/// One Adam ascent step on the multi-style objective; returns its pre-step value.
pub fn policy_update(
    actor: &mut Actor,
    critics: &CriticEnsemble,
    states: &Matrix,
    settings: &UpdateSettings,
) -> Result<f64> {
    let (objective, grads) = policy_gradient(actor, critics, states)?;
    for ((net, opt), mut g) in actor.nets.iter_mut().zip(actor.opts.iter_mut()).zip(grads) {
        g.scale(-1.0);
        adam_step(net, &g, opt, settings.lr_actor)?;
    }
    Ok(objective)
}

/// Polyak-averages every target network toward its online network.
pub fn update_targets(critics: &mut CriticEnsemble, actor: &mut Actor, tau: f64) -> Result<()> {
    soft_update(&mut critics.target1, &critics.net1, tau)?;
    if critics.is_twin() {
        soft_update(&mut critics.target2, &critics.net2, tau)?;
    }
    for (t, n) in actor.targets.iter_mut().zip(&actor.nets) {
        soft_update(t, n, tau)?;
    }
    Ok(())
}

/// Mean `|Q1(s, π(s, z)) − Q2(s, π(s, z))|` over rows, post-negation.
/// A single-critic ensemble has no disagreement and reports 0.
pub fn controversy(critics: &CriticEnsemble, states: &Matrix, zs: &[usize], actor: &Actor) -> Result<f64> {
    if states.rows() == 0 {
        return Err(Error::EmptyBuffer);
    }
    if !critics.is_twin() {
        return Ok(0.0);
    }
    let acts = actor.act_batch(states, zs, false)?;
    let sa = states.hcat(&acts)?;
    let (q1, _) = critics.q_batch(CriticId::First, &sa, false)?;
    let (q2, _) = critics.q_batch(CriticId::Second, &sa, false)?;
    Ok(mean_abs_gap(&q1, &q2))
}

pub fn mean_abs_gap(q1: &[f64], q2: &[f64]) -> f64 {
    q1.iter().zip(q2).map(|(a, b)| (a - b).abs()).sum::<f64>() / q1.len() as f64
}
