use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{controversy, select_action, Agent, CcepConfig};
use crate::envs::Environment;
use crate::error::{check_dim, Error, Result};
use crate::metrics::{evaluate, CoverageGrid, EvalMode, MetricRow, RunResult};
use crate::numerics::Matrix;
use crate::replay::{ReplayBuffer, Transition};
use crate::seed::derive_seed;

const BEHAVIOR_STREAM: u64 = 1;
const UPDATE_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;
const CONTROVERSY_STREAM: u64 = 4;

/// When and how a run is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalProtocol {
    pub interval: usize,
    pub episodes: usize,
    pub mode: EvalMode,
    pub grid_resolution: usize,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            interval: 5000,
            episodes: 10,
            mode: EvalMode::Mixture,
            grid_resolution: 20,
        }
    }
}

/// Hook invoked after every evaluation.
pub trait TrainObserver {
    fn on_eval(&mut self, _row: &MetricRow, _agent: &Agent) -> Result<()> {
        Ok(())
    }
}

impl TrainObserver for () {}

#[derive(Debug, Clone)]
pub struct Trained {
    pub result: RunResult,
    pub agent: Agent,
    pub buffer: ReplayBuffer,
}

/// Runs one seed end to end.
///
/// Every step draws a fresh skill; the stored `z_next` is the skill actually
/// drawn for the following step. The first `warmup_steps` actions are uniform
/// in the action box and trigger no updates. Evaluation happens at step 0 and
/// every `protocol.interval` steps on `eval_env`, using streams separate from
/// training so evaluating never perturbs the run.
pub fn train(
    config: &CcepConfig,
    env: &mut dyn Environment,
    eval_env: &mut dyn Environment,
    protocol: &EvalProtocol,
    observer: &mut dyn TrainObserver,
) -> Result<Trained> {
    if protocol.interval == 0 || protocol.episodes == 0 {
        return Err(Error::config("eval interval and episode count must be positive"));
    }
    let spec = env.spec();
    if eval_env.spec() != spec {
        return Err(Error::config("training and evaluation environments differ"));
    }
    let mut agent = Agent::new(config, spec)?;
    let k = agent.actor.styles();
    let bound = spec.act_bound;
    let behavior_std = config.exploration_noise * bound;
    let seed = config.seed;

    let mut act_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, BEHAVIOR_STREAM));
    let mut update_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, UPDATE_STREAM));
    let mut buffer = ReplayBuffer::new(config.buffer_capacity)?;
    let mut grid = CoverageGrid::new(env.coverage_bounds(), protocol.grid_resolution)?;
    let mut style_grids = vec![grid.clone(); k];

    let mut obs = env.reset(act_rng.gen());
    check_dim("observation", spec.obs_dim, obs.len())?;
    grid.record_visit(&env.coverage_point())?;
    let mut z = act_rng.gen_range(0..k);

    let mut rows = Vec::new();
    let mut record = |t: usize, agent: &Agent, buffer: &ReplayBuffer, obs: &[f64], grid: &CoverageGrid| -> Result<()> {
        let row = metric_row(t, agent, buffer, obs, grid, eval_env, protocol, seed)?;
        observer.on_eval(&row, agent)?;
        rows.push(row);
        Ok(())
    };
    record(0, &agent, &buffer, &obs, &grid)?;

    for t in 1..=config.total_steps {
        let warm = t <= config.warmup_steps;
        let action: Vec<f64> = if warm {
            (0..spec.act_dim).map(|_| act_rng.gen_range(-bound..=bound)).collect()
        } else {
            select_action(&agent.actor, &obs, z, behavior_std, &mut act_rng, bound)?
        };
        let step = env.step(&action)?;
        let point = env.coverage_point();
        grid.record_visit(&point)?;
        if !warm {
            style_grids[z].record_visit(&point)?;
        }
        let z_next = act_rng.gen_range(0..k);
        let terminated = step.terminated();
        let episode_over = step.done;
        buffer.push(Transition {
            s: std::mem::take(&mut obs),
            z,
            a: action,
            r: step.reward,
            s_next: step.next_obs.clone(),
            z_next,
            done: terminated,
        })?;
        obs = if episode_over {
            let o = env.reset(act_rng.gen());
            grid.record_visit(&env.coverage_point())?;
            o
        } else {
            step.next_obs
        };
        z = z_next;

        if !warm {
            let batch = buffer.sample_batch(config.batch_size, &mut update_rng)?;
            agent.update(&batch, &mut update_rng)?;
        }
        if t % protocol.interval == 0 {
            record(t, &agent, &buffer, &obs, &grid)?;
        }
    }

    Ok(Trained {
        result: RunResult {
            rows,
            coverage_grid: grid,
            style_grids,
            updates: agent.num_updates(),
            buffer_len: buffer.len(),
        },
        agent,
        buffer,
    })
}

#[allow(clippy::too_many_arguments)]
fn metric_row(
    t: usize,
    agent: &Agent,
    buffer: &ReplayBuffer,
    obs: &[f64],
    grid: &CoverageGrid,
    eval_env: &mut dyn Environment,
    protocol: &EvalProtocol,
    seed: u64,
) -> Result<MetricRow> {
    let eval_seed = derive_seed(derive_seed(seed, EVAL_STREAM), t as u64);
    let report = evaluate(&agent.actor, eval_env, protocol.episodes, protocol.mode, eval_seed)?;
    let style_returns = match protocol.mode {
        EvalMode::PerStyle => report.per_style.clone(),
        EvalMode::Mixture => {
            evaluate(&agent.actor, eval_env, protocol.episodes, EvalMode::PerStyle, eval_seed)?.per_style
        }
    };

    let k = agent.actor.styles();
    let (states, zs) = if buffer.is_empty() {
        // nothing stored yet: probe the current state under every style
        let rows: Vec<&[f64]> = (0..k).map(|_| obs).collect();
        (Matrix::from_rows(&rows)?, (0..k).collect::<Vec<_>>())
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(seed, CONTROVERSY_STREAM), t as u64));
        let batch = buffer.sample_batch(agent.config.batch_size, &mut rng)?;
        (batch.s, batch.z)
    };
    let controversy = controversy(&agent.critics, &states, &zs, &agent.actor)?;

    Ok(MetricRow {
        step: t,
        return_mean: report.mean,
        return_std: report.std,
        style_returns,
        controversy,
        coverage: grid.coverage(),
    })
}
