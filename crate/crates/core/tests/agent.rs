use ccep_core::agent::{
    controversy, critic_losses, critic_update, mean_abs_gap, policy_gradient, policy_update, td_from_parts, td_target,
    train, Actor, ActorLayout, Agent, Algorithm, CcepConfig, CriticEnsemble, EvalProtocol, UpdateSettings,
};
use ccep_core::envs::{make_env, EnvKind, EnvSpec, PointMaze};
use ccep_core::numerics::{soft_update, Matrix, NetConfig, NetworkParams};
use ccep_core::replay::{Batch, Transition};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OBS: usize = 3;
const ACT: usize = 1;
const BOUND: f64 = 2.0;

fn spec() -> EnvSpec {
    EnvSpec {
        obs_dim: OBS,
        act_dim: ACT,
        act_bound: BOUND,
        max_episode_steps: 200,
    }
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Batch {
    let ts: Vec<Transition> = (0..n)
        .map(|_| Transition {
            s: (0..OBS).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            z: rng.gen_range(0..k),
            a: (0..ACT).map(|_| rng.gen_range(-BOUND..BOUND)).collect(),
            r: rng.gen_range(-1.0..0.0),
            s_next: (0..OBS).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            z_next: rng.gen_range(0..k),
            done: rng.gen_bool(0.1),
        })
        .collect();
    Batch::from_transitions(&ts).unwrap()
}

fn small_config(algorithm: Algorithm) -> CcepConfig {
    CcepConfig {
        algorithm,
        hidden_sizes: vec![8, 8],
        batch_size: 16,
        warmup_steps: 50,
        buffer_capacity: 10_000,
        total_steps: 400,
        ..CcepConfig::default()
    }
}

// -- styled critics ---------------------------------------------------------

proptest! {
    #[test]
    fn styled_q_ordering(seed in any::<u64>(), s in prop::collection::vec(-3.0..3.0f64, OBS), a in -2.0..2.0f64, negate in any::<bool>()) {
        let critics = CriticEnsemble::new(OBS, ACT, &[6, 6], negate, true, (seed, seed.wrapping_add(1))).unwrap();
        let q: Vec<f64> = (0..4).map(|j| critics.styled_q(j, &s, &[a]).unwrap()).collect();
        prop_assert!(q[3] <= q[0] && q[3] <= q[1]);
        prop_assert!(q[0] <= q[2] && q[1] <= q[2]);
        prop_assert_eq!(q[2], q[0].max(q[1]));
        prop_assert_eq!(q[3], q[0].min(q[1]));
    }

    #[test]
    fn negation_is_exact(seed in any::<u64>(), s in prop::collection::vec(-3.0..3.0f64, OBS), a in -2.0..2.0f64) {
        let mut critics = CriticEnsemble::new(OBS, ACT, &[5], true, true, (seed, seed ^ 7)).unwrap();
        let negated = critics.critic_raw(2, &s, &[a], false).unwrap();
        let mut input = s.clone();
        input.push(a);
        let raw = critics.net2.forward(&input).unwrap().0[0];
        prop_assert_eq!(negated.to_bits(), (-raw).to_bits());
        critics.set_negate_second(false);
        prop_assert_eq!(critics.critic_raw(2, &s, &[a], false).unwrap().to_bits(), raw.to_bits());
    }

    #[test]
    fn soft_update_drift_bounded(seed in any::<u64>(), tau in 0.0..=1.0f64) {
        let cfg = NetConfig::linear_head(4, &[5], 2).unwrap();
        let source = NetworkParams::init(&cfg, seed).unwrap();
        let mut target = NetworkParams::init(&cfg, seed.wrapping_add(1)).unwrap();
        let before = target.clone();
        let gap = source.values().zip(before.values()).map(|(s, t)| (s - t).abs()).fold(0.0, f64::max);
        soft_update(&mut target, &source, tau).unwrap();
        for (new, old) in target.values().zip(before.values()) {
            prop_assert!((new - old).abs() <= tau * gap * (1.0 + 1e-12) + 1e-300);
        }
    }
}

// -- targets and controversy ------------------------------------------------

#[test]
fn td_target_arithmetic() {
    let y = td_from_parts(&[1.0, 1.0], &[false, true], &[2.0, 2.0], 0.99);
    assert!((y[0] - 2.98).abs() < 1e-12);
    assert_eq!(y[1], 1.0);
}

#[test]
fn td_target_reproducible_without_smoothing_noise() {
    let cfg = CcepConfig {
        target_noise: 0.0,
        ..small_config(Algorithm::Ccep)
    };
    let agent = Agent::new(&cfg, spec()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batch = random_batch(&mut rng, 32, 4);
    let a = td_target(&agent.critics, &agent.actor, &batch, &mut ChaCha8Rng::seed_from_u64(5), &agent.settings).unwrap();
    let b = td_target(&agent.critics, &agent.actor, &batch, &mut ChaCha8Rng::seed_from_u64(99), &agent.settings).unwrap();
    assert_eq!(a, b);
    for (i, y) in a.iter().enumerate() {
        if batch.done[i] {
            assert_eq!(*y, batch.r[i]);
        }
    }
}

#[test]
fn td_target_uses_min_of_target_critics() {
    let cfg = small_config(Algorithm::Ccep);
    let mut agent = Agent::new(&cfg, spec()).unwrap();
    // online nets drift away; the target must not notice
    for v in agent.critics.net1.values_mut() {
        *v += 1.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let batch = random_batch(&mut rng, 8, 4);
    let settings = UpdateSettings {
        smoothing: false,
        ..agent.settings
    };
    let y = td_target(&agent.critics, &agent.actor, &batch, &mut rng, &settings).unwrap();
    for i in 0..batch.len() {
        let s = batch.s_next.row(i);
        let mut input = s.to_vec();
        input.extend(ccep_core::agent::one_hot(batch.z_next[i], 4).unwrap());
        let a = agent.actor.targets[0].forward(&input).unwrap().0;
        let q1 = agent.critics.critic_raw(1, s, &a, true).unwrap();
        let q2 = agent.critics.critic_raw(2, s, &a, true).unwrap();
        let oracle = if batch.done[i] { batch.r[i] } else { batch.r[i] + 0.99 * q1.min(q2) };
        assert!((y[i] - oracle).abs() < 1e-12, "{} vs {}", y[i], oracle);
    }
}

#[test]
fn controversy_cases() {
    assert_eq!(mean_abs_gap(&[1.0, 2.0], &[0.0, 4.0]), 1.5);
    let cfg = NetConfig::linear_head(OBS + ACT, &[4], 1).unwrap();
    let net = NetworkParams::init(&cfg, 3).unwrap();
    let critics = CriticEnsemble::from_nets(net.clone(), net, false, true, OBS).unwrap();
    let actor = Actor::new(ActorLayout::Centralized, 2, OBS, ACT, BOUND, &[4], |j| j as u64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let batch = random_batch(&mut rng, 10, 2);
    assert_eq!(controversy(&critics, &batch.s, &batch.z, &actor).unwrap(), 0.0);
    let apart = CriticEnsemble::new(OBS, ACT, &[4], true, true, (1, 2)).unwrap();
    assert!(controversy(&apart, &batch.s, &batch.z, &actor).unwrap() > 0.0);
}

// -- critic update ----------------------------------------------------------

#[test]
fn critic_step_decreases_loss_for_linear_critic() {
    for negate in [false, true] {
        let mut critics = CriticEnsemble::new(OBS, ACT, &[], negate, true, (10, 11)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let batch = random_batch(&mut rng, 64, 1);
        let targets: Vec<f64> = (0..64).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let settings = UpdateSettings {
            lr_critic: 1e-3,
            ..Agent::new(&small_config(Algorithm::Td3), spec()).unwrap().settings
        };
        let before = critic_losses(&critics, &batch.s, &batch.a, &targets).unwrap();
        let reported = critic_update(&mut critics, &batch, &targets, &settings).unwrap();
        let after = critic_losses(&critics, &batch.s, &batch.a, &targets).unwrap();
        assert_eq!(reported, before);
        assert!(after.first < before.first);
        assert!(after.second.unwrap() < before.second.unwrap());
        assert!(before.first >= 0.0 && before.second.unwrap() >= 0.0);
    }
}

#[test]
fn perfect_fit_leaves_critic_unchanged() {
    let mut critics = CriticEnsemble::new(OBS, ACT, &[6], true, false, (1, 2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let batch = random_batch(&mut rng, 16, 1);
    let sa = batch.s.hcat(&batch.a).unwrap();
    let (y, _) = critics.q_batch(ccep_core::agent::CriticId::First, &sa, false).unwrap();
    let before = critics.net1.clone();
    let settings = Agent::new(&small_config(Algorithm::Ddpg), spec()).unwrap().settings;
    let losses = critic_update(&mut critics, &batch, &y, &settings).unwrap();
    assert_eq!(losses.first, 0.0);
    assert_eq!(critics.net1, before);
}

// -- policy gradient --------------------------------------------------------

fn objective_oracle(actor: &Actor, critics: &CriticEnsemble, states: &Matrix) -> f64 {
    let k = actor.styles();
    let mut total = 0.0;
    for r in 0..states.rows() {
        let s = states.row(r);
        for j in 0..k {
            let a = actor.act(s, j).unwrap();
            total += critics.styled_q(j, s, &a).unwrap();
        }
    }
    total / (states.rows() * k) as f64
}

// per-net objective for the separate layout: (1/N) Σ_s Q^j(s, π_j(s))
fn separate_oracle(actor: &Actor, critics: &CriticEnsemble, states: &Matrix, j: usize) -> f64 {
    let mut total = 0.0;
    for r in 0..states.rows() {
        let s = states.row(r);
        total += critics.styled_q(j, s, &actor.act(s, j).unwrap()).unwrap();
    }
    total / states.rows() as f64
}

fn vector_rel_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

#[test]
fn policy_gradient_matches_finite_differences() {
    let h = 1e-6;
    for seed in 0..5u64 {
        let critics = CriticEnsemble::new(OBS, ACT, &[6], true, true, (seed + 100, seed + 200)).unwrap();
        let mut actor = Actor::new(ActorLayout::Centralized, 4, OBS, ACT, BOUND, &[5], |_| seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let states = random_batch(&mut rng, 6, 4).s;
        let (objective, grads) = policy_gradient(&actor, &critics, &states).unwrap();
        assert!((objective - objective_oracle(&actor, &critics, &states)).abs() < 1e-12);
        let analytic: Vec<f64> = grads[0].values().copied().collect();
        let mut numeric = Vec::with_capacity(analytic.len());
        for p in 0..actor.nets[0].num_params() {
            let orig = actor.nets[0].param(p);
            actor.nets[0].set_param(p, orig + h);
            let up = objective_oracle(&actor, &critics, &states);
            actor.nets[0].set_param(p, orig - h);
            let down = objective_oracle(&actor, &critics, &states);
            actor.nets[0].set_param(p, orig);
            numeric.push((up - down) / (2.0 * h));
        }
        let err = vector_rel_error(&analytic, &numeric);
        assert!(err < 1e-3, "seed {seed}: relative error {err}");
    }
}

#[test]
fn separate_actor_gradients_follow_own_style() {
    let h = 1e-6;
    let critics = CriticEnsemble::new(OBS, ACT, &[6], true, true, (31, 32)).unwrap();
    let mut actor = Actor::new(ActorLayout::Separate, 4, OBS, ACT, BOUND, &[5], |j| 40 + j as u64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let states = random_batch(&mut rng, 6, 4).s;
    let (_, grads) = policy_gradient(&actor, &critics, &states).unwrap();
    assert_eq!(grads.len(), 4);
    for j in 0..4 {
        let analytic: Vec<f64> = grads[j].values().copied().collect();
        let mut numeric = Vec::new();
        for p in 0..actor.nets[j].num_params() {
            let orig = actor.nets[j].param(p);
            actor.nets[j].set_param(p, orig + h);
            let up = separate_oracle(&actor, &critics, &states, j);
            actor.nets[j].set_param(p, orig - h);
            let down = separate_oracle(&actor, &critics, &states, j);
            actor.nets[j].set_param(p, orig);
            numeric.push((up - down) / (2.0 * h));
        }
        let err = vector_rel_error(&analytic, &numeric);
        assert!(err < 1e-3, "net {j}: relative error {err}");
    }
}

#[test]
fn constant_critic_leaves_actor_unchanged() {
    // zero every weight reading the action columns
    let cfg = NetConfig::linear_head(OBS + ACT, &[4], 1).unwrap();
    let mut nets = [NetworkParams::init(&cfg, 1).unwrap(), NetworkParams::init(&cfg, 2).unwrap()];
    for net in &mut nets {
        let w = &mut net.layers_mut()[0].weight;
        for r in 0..w.rows() {
            w.set(r, OBS, 0.0);
        }
    }
    let [n1, n2] = nets;
    let critics = CriticEnsemble::from_nets(n1, n2, true, true, OBS).unwrap();
    let mut agent = Agent::new(&small_config(Algorithm::Ccep), spec()).unwrap();
    let before = agent.actor.nets.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let states = random_batch(&mut rng, 16, 4).s;
    let settings = agent.settings;
    policy_update(&mut agent.actor, &critics, &states, &settings).unwrap();
    assert_eq!(agent.actor.nets, before);
}

// -- variants ---------------------------------------------------------------

fn single_style_ccep() -> CcepConfig {
    CcepConfig {
        num_styles: 1,
        opposite_targets: Some(false),
        ..small_config(Algorithm::Ccep)
    }
}

fn assert_agents_identical(a: &Agent, b: &Agent) {
    assert_eq!(a.critics.net1, b.critics.net1);
    assert_eq!(a.critics.net2, b.critics.net2);
    assert_eq!(a.critics.target1, b.critics.target1);
    assert_eq!(a.critics.target2, b.critics.target2);
    assert_eq!(a.actor.nets, b.actor.nets);
    assert_eq!(a.actor.targets, b.actor.targets);
}

#[test]
fn single_style_ccep_steps_like_td3() {
    let mut ccep = Agent::new(&single_style_ccep(), spec()).unwrap();
    let mut td3 = Agent::new(&small_config(Algorithm::Td3), spec()).unwrap();
    assert_agents_identical(&ccep, &td3);
    let mut data = ChaCha8Rng::seed_from_u64(12);
    let (mut ra, mut rb) = (ChaCha8Rng::seed_from_u64(13), ChaCha8Rng::seed_from_u64(13));
    for _ in 0..50 {
        let batch = random_batch(&mut data, 16, 1);
        let sa = ccep.update(&batch, &mut ra).unwrap();
        let sb = td3.update(&batch, &mut rb).unwrap();
        assert_eq!(sa, sb);
    }
    assert_agents_identical(&ccep, &td3);
}

#[test]
fn whole_runs_match_for_single_style_ccep_and_td3() {
    let protocol = EvalProtocol {
        interval: 100,
        episodes: 2,
        ..EvalProtocol::default()
    };
    let run = |cfg: &CcepConfig| {
        let mut env = make_env(EnvKind::Pendulum, &[]).unwrap();
        let mut ev = make_env(EnvKind::Pendulum, &[]).unwrap();
        train(cfg, env.as_mut(), ev.as_mut(), &protocol, &mut ()).unwrap()
    };
    let a = run(&single_style_ccep());
    let b = run(&small_config(Algorithm::Td3));
    assert_eq!(a.result.rows, b.result.rows);
    assert_agents_identical(&a.agent, &b.agent);
}

#[test]
fn ddpg_has_one_critic_and_no_delay() {
    let agent = Agent::new(&small_config(Algorithm::Ddpg), spec()).unwrap();
    assert!(!agent.critics.is_twin());
    assert_eq!(agent.settings.policy_delay, 1);
    assert!(!agent.settings.smoothing);
}

#[test]
fn targets_move_only_on_policy_steps() {
    let mut agent = Agent::new(&small_config(Algorithm::Ccep), spec()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 1..=6 {
        let batch = random_batch(&mut rng, 16, 4);
        let t1 = agent.critics.target1.clone();
        let actor_before = agent.actor.nets.clone();
        let stats = agent.update(&batch, &mut rng).unwrap();
        let policy_step = i % 2 == 0;
        assert_eq!(stats.policy_objective.is_some(), policy_step);
        if policy_step {
            // targets soft-update toward the freshly stepped online critic
            assert_ne!(agent.critics.target1, t1);
        } else {
            assert_eq!(agent.critics.target1, t1);
            assert_eq!(agent.actor.nets, actor_before);
        }
    }
}

// -- training loop ----------------------------------------------------------

fn quick_protocol() -> EvalProtocol {
    EvalProtocol {
        interval: 100,
        episodes: 2,
        ..EvalProtocol::default()
    }
}

#[test]
fn warmup_only_run_never_updates() {
    let cfg = CcepConfig {
        total_steps: 300,
        warmup_steps: 300,
        ..small_config(Algorithm::Ccep)
    };
    let mut env = make_env(EnvKind::Pendulum, &[]).unwrap();
    let mut ev = make_env(EnvKind::Pendulum, &[]).unwrap();
    let out = train(&cfg, env.as_mut(), ev.as_mut(), &quick_protocol(), &mut ()).unwrap();
    assert_eq!(out.result.updates, 0);
    assert_eq!(out.result.buffer_len, 300);
    let fresh = Agent::new(&cfg, spec()).unwrap();
    assert_agents_identical(&out.agent, &fresh);
    let steps: Vec<usize> = out.result.rows.iter().map(|r| r.step).collect();
    assert_eq!(steps, vec![0, 100, 200, 300]);
}

#[test]
fn stored_skill_is_the_acting_skill() {
    // no noise, no warmup, and an actor that never steps: every stored action
    // must be π(s, z) for the stored z
    let cfg = CcepConfig {
        warmup_steps: 0,
        exploration_noise: 0.0,
        policy_delay: usize::MAX,
        total_steps: 300,
        ..small_config(Algorithm::Ccep)
    };
    let mut env = make_env(EnvKind::Pointmaze, &PointMaze::default_walls()).unwrap();
    let mut ev = make_env(EnvKind::Pointmaze, &PointMaze::default_walls()).unwrap();
    let out = train(&cfg, env.as_mut(), ev.as_mut(), &quick_protocol(), &mut ()).unwrap();
    let ts: Vec<Transition> = out.buffer.iter_oldest_first().collect();
    assert_eq!(ts.len(), 300);
    let mut seen = [false; 4];
    for (i, t) in ts.iter().enumerate() {
        let bound = 0.05;
        let expected: Vec<f64> = out.agent.actor.act(&t.s, t.z).unwrap().iter().map(|a| a.clamp(-bound, bound)).collect();
        assert_eq!(t.a, expected, "transition {i}");
        seen[t.z] = true;
        if let Some(next) = ts.get(i + 1) {
            assert_eq!(t.z_next, next.z);
        }
    }
    assert!(seen.iter().all(|&s| s));
}

#[test]
fn training_is_deterministic() {
    let cfg = small_config(Algorithm::Ccep);
    let run = || {
        let mut env = make_env(EnvKind::Pendulum, &[]).unwrap();
        let mut ev = make_env(EnvKind::Pendulum, &[]).unwrap();
        train(&cfg, env.as_mut(), ev.as_mut(), &quick_protocol(), &mut ()).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.result.rows, b.result.rows);
    assert_agents_identical(&a.agent, &b.agent);
    assert_eq!(a.result.updates, 350);
    let other = CcepConfig { seed: 1, ..cfg.clone() };
    let mut env = make_env(EnvKind::Pendulum, &[]).unwrap();
    let mut ev = make_env(EnvKind::Pendulum, &[]).unwrap();
    let c = train(&other, env.as_mut(), ev.as_mut(), &quick_protocol(), &mut ()).unwrap();
    assert_ne!(a.result.rows, c.result.rows);
}

#[test]
fn every_algorithm_trains() {
    for algorithm in Algorithm::ALL {
        let cfg = small_config(algorithm);
        for kind in [EnvKind::Pendulum, EnvKind::Pointmaze] {
            let mut env = make_env(kind, &PointMaze::default_walls()).unwrap();
            let mut ev = make_env(kind, &PointMaze::default_walls()).unwrap();
            let out = train(&cfg, env.as_mut(), ev.as_mut(), &quick_protocol(), &mut ()).unwrap();
            let k = cfg.variant().styles;
            assert_eq!(out.result.style_grids.len(), k);
            for row in &out.result.rows {
                assert_eq!(row.style_returns.len(), k);
                assert!(row.controversy >= 0.0);
                assert!((0.0..=1.0).contains(&row.coverage));
            }
            assert!(out.result.rows.windows(2).all(|w| w[0].step < w[1].step));
            assert!(out.result.rows.windows(2).all(|w| w[0].coverage <= w[1].coverage));
        }
    }
}
