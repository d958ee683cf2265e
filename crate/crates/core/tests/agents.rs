//! Hand-built networks pin down the TD3 and DQN update arithmetic.

use hrlnav::agents::{DqnAgent, DqnConfig, EpsilonSchedule, TargetSync, Td3Agent, Td3Config};
use hrlnav::neuralnet::{Activation, Layer, Network};
use hrlnav::replay::Transition;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;

/// Single linear layer `y = x·W + b` with `W` given row-major `in × out`.
fn linear(inputs: usize, outputs: usize, w: &[f64], b: &[f64], act: Activation) -> Network {
    Network::from_layers(vec![Layer {
        weights: Array2::from_shape_vec((inputs, outputs), w.to_vec()).unwrap(),
        bias: Array1::from_vec(b.to_vec()),
        activation: act,
    }])
    .unwrap()
}

fn td3_fixture(config: Td3Config) -> Td3Agent {
    // obs_dim 2. Actor: tanh(x0 * 0.5, -x1 * 0.5). Critic1 = s0 + s1 + 2 u0 + u1,
    // critic2 = 2 s0 - u1 + 0.5.
    let actor = linear(2, 2, &[0.5, 0.0, 0.0, -0.5], &[0.0, 0.0], Activation::Tanh);
    let c1 = linear(4, 1, &[1.0, 1.0, 2.0, 1.0], &[0.0], Activation::Linear);
    let c2 = linear(4, 1, &[2.0, 0.0, 0.0, -1.0], &[0.5], Activation::Linear);
    Td3Agent::from_networks(actor, c1, c2, config).unwrap()
}

fn tr2(obs: [f64; 2], action: [f64; 2], reward: f64, next: [f64; 2], done: bool, steps: u32) -> Transition<[f64; 2]> {
    Transition { obs: obs.to_vec(), action, reward, next_obs: next.to_vec(), done, steps }
}

fn q_by_hand(s: [f64; 2], u: [f64; 2]) -> (f64, f64) {
    (s[0] + s[1] + 2.0 * u[0] + u[1], 2.0 * s[0] - u[1] + 0.5)
}

#[test]
fn td3_clipped_double_q_takes_the_minimum() {
    let cfg = Td3Config { gamma: 0.9, ..Td3Config::default() };
    let agent = td3_fixture(cfg);
    let batch = [
        tr2([0.0, 0.0], [0.0, 0.0], 1.0, [1.0, 2.0], false, 1),
        tr2([0.0, 0.0], [0.0, 0.0], -0.5, [-1.0, 0.3], false, 3),
        tr2([0.0, 0.0], [0.0, 0.0], 2.0, [0.4, -0.4], true, 1),
    ];
    let refs: Vec<&Transition<[f64; 2]>> = batch.iter().collect();
    let noise = vec![[0.1, -0.2], [0.0, 0.5], [-0.3, 0.3]];
    let targets = agent.critic_targets(&refs, &noise).unwrap();
    for (i, t) in batch.iter().enumerate() {
        let s = [t.next_obs[0], t.next_obs[1]];
        let u = [
            ((0.5 * s[0]).tanh() + noise[i][0]).clamp(-1.0, 1.0),
            ((-0.5 * s[1]).tanh() + noise[i][1]).clamp(-1.0, 1.0),
        ];
        let (q1, q2) = q_by_hand(s, u);
        let want = if t.done { t.reward } else { t.reward + 0.9f64.powi(t.steps as i32) * q1.min(q2) };
        assert!((targets[i] - want).abs() < TOL, "row {i}: {} vs {want}", targets[i]);
    }
    // Row 0 picks critic1, row 1 picks critic2: both branches of the min are exercised.
    let (a1, a2) = agent.target_q_pair(&refs, &noise).unwrap();
    assert!(a1[0] < a2[0] && a2[1] < a1[1]);
}

#[test]
fn td3_terminal_transitions_do_not_bootstrap() {
    let agent = td3_fixture(Td3Config::default());
    let t = tr2([0.0, 0.0], [0.0, 0.0], -100.0, [50.0, 50.0], true, 1);
    let y = agent.critic_targets(&[&t], &[[0.0, 0.0]]).unwrap();
    assert_eq!(y, vec![-100.0]);
}

#[test]
fn td3_policy_delay_counter() {
    let cfg = Td3Config { policy_delay: 3, ..Td3Config::default() };
    let mut agent = td3_fixture(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = tr2([0.1, 0.2], [0.3, -0.3], 1.0, [0.2, 0.1], false, 1);
    let mut pattern = Vec::new();
    for _ in 0..9 {
        pattern.push(agent.train_step(&[&t], &mut rng).unwrap().actor.is_some());
    }
    assert_eq!(pattern, [false, false, true, false, false, true, false, false, true]);
    assert_eq!(agent.counters.critic_updates, 9);
    assert_eq!(agent.counters.actor_updates, 3);
    assert!(agent.actor_update(&[&t]).is_err());
}

#[test]
fn td3_soft_update_arithmetic() {
    let tau = 0.25;
    let mut agent = td3_fixture(Td3Config { tau, ..Td3Config::default() });
    let before = [agent.actor_target.params(), agent.critic1_target.params(), agent.critic2_target.params()];
    // Perturb the online networks so online and target differ.
    let shift = |n: &mut Network, k: f64| {
        let p: Vec<f64> = n.params().iter().enumerate().map(|(i, v)| v + k * (i as f64 + 1.0)).collect();
        n.set_params(&p).unwrap();
    };
    shift(&mut agent.actor, 0.1);
    shift(&mut agent.critic1, -0.2);
    shift(&mut agent.critic2, 0.3);
    agent.counters.critic_updates = 2;
    let t = tr2([0.5, -0.5], [0.0, 0.0], 0.0, [0.0, 0.0], false, 1);
    agent.actor_update(&[&t]).unwrap();
    let online = [agent.actor.params(), agent.critic1.params(), agent.critic2.params()];
    let after = [agent.actor_target.params(), agent.critic1_target.params(), agent.critic2_target.params()];
    for k in 0..3 {
        for i in 0..before[k].len() {
            let want = tau * online[k][i] + (1.0 - tau) * before[k][i];
            assert!((after[k][i] - want).abs() < TOL, "net {k} param {i}");
        }
    }
}

#[test]
fn td3_actor_climbs_a_frozen_critic() {
    // Q = 2 u0 - u1 is maximised at the corner (1, -1) of the action box.
    let actor = Network::new(&[2, 16, 2], &[Activation::Relu, Activation::Tanh], 5).unwrap();
    let c = linear(4, 1, &[0.0, 0.0, 2.0, -1.0], &[0.0], Activation::Linear);
    let mut agent = Td3Agent::from_networks(actor, c.clone(), c, Td3Config { actor_lr: 1e-2, policy_delay: 1, ..Td3Config::default() }).unwrap();
    let critic_before = agent.critic1.params();
    let obs: Vec<Transition<[f64; 2]>> = (0..16)
        .map(|i| tr2([i as f64 / 8.0 - 1.0, (i % 4) as f64 / 2.0 - 0.75], [0.0, 0.0], 0.0, [0.0, 0.0], false, 1))
        .collect();
    let refs: Vec<&Transition<[f64; 2]>> = obs.iter().collect();
    for _ in 0..400 {
        agent.counters.critic_updates += 1;
        agent.actor_update(&refs).unwrap();
    }
    assert_eq!(agent.critic1.params(), critic_before);
    for t in &obs {
        let u = agent.policy(&t.obs).unwrap();
        assert!(u[0] > 0.95 && u[1] < -0.95, "{u:?}");
    }
}

fn dqn_fixture(config: DqnConfig) -> DqnAgent {
    // obs_dim 2, 3 actions. Online and target differ so the test notices
    // which one is used for bootstrapping.
    let online = linear(2, 3, &[1.0, 0.0, -1.0, 0.0, 1.0, 2.0], &[0.0, 0.1, 0.0], Activation::Linear);
    let target = linear(2, 3, &[0.5, -1.0, 0.0, 1.0, 0.0, -0.5], &[0.2, 0.0, 0.1], Activation::Linear);
    DqnAgent::from_networks(online, target, config).unwrap()
}

fn tr1(obs: [f64; 2], action: usize, reward: f64, next: [f64; 2], done: bool, steps: u32) -> Transition<usize> {
    Transition { obs: obs.to_vec(), action, reward, next_obs: next.to_vec(), done, steps }
}

#[test]
fn dqn_bellman_targets_by_hand() {
    let agent = dqn_fixture(DqnConfig { gamma: 0.95, ..DqnConfig::default() });
    let batch = [
        tr1([0.0, 0.0], 0, 1.0, [1.0, 2.0], false, 1),
        tr1([0.0, 0.0], 1, 0.5, [-2.0, 1.0], false, 4),
        tr1([0.0, 0.0], 2, -1.0, [3.0, 3.0], true, 7),
    ];
    let refs: Vec<&Transition<usize>> = batch.iter().collect();
    let y = agent.bellman_targets(&refs).unwrap();
    // Target Q at (1, 2): [0.5+2+0.2, -1+0+0, 0-1+0.1] = [2.7, -1.0, -0.9] -> max 2.7.
    // The online net would pick action 2 here, so a double-DQN target would differ.
    assert!((y[0] - (1.0 + 0.95 * 2.7)).abs() < TOL);
    // Target Q at (-2, 1): [-1+1+0.2, 2+0+0, 0-0.5+0.1] = [0.2, 2.0, -0.4] -> max 2.0
    assert!((y[1] - (0.5 + 0.95f64.powi(4) * 2.0)).abs() < TOL);
    assert_eq!(y[2], -1.0);
}

#[test]
fn dqn_argmax_ties_go_to_the_lowest_index() {
    let flat = linear(2, 4, &[0.0; 8], &[0.3, 0.7, 0.7, 0.7], Activation::Linear);
    let agent = DqnAgent::from_networks(flat.clone(), flat, DqnConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..10 {
        assert_eq!(agent.select_action(&[0.4, -0.2], &mut rng, true).unwrap(), 1);
    }
}

/// Upper 1% points of the chi-squared distribution.
fn chi2_crit_99(df: usize) -> f64 {
    match df {
        2 => 9.210,
        3 => 11.345,
        15 => 30.578,
        _ => panic!("no table entry for {df} degrees of freedom"),
    }
}

fn chi2(counts: &[u64], probs: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    counts.iter().zip(probs).map(|(&c, &p)| {
        let e = p * n as f64;
        (c as f64 - e).powi(2) / e
    }).sum()
}

#[test]
fn dqn_epsilon_greedy_frequencies() {
    let draws = 100_000;
    // Greedy action of the fixture at obs (1, 1) is 2 (Q = [1, 1.1, 1]).
    let obs = [1.0, 1.0];
    for (eps, seed) in [(1.0, 11u64), (0.3, 12)] {
        let mut agent = dqn_fixture(DqnConfig::default());
        agent.epsilon_override = Some(eps);
        assert_eq!(agent.q_values(&obs).unwrap(), vec![1.0, 1.1, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = [0u64; 3];
        for _ in 0..draws {
            counts[agent.select_action(&obs, &mut rng, false).unwrap()] += 1;
        }
        let explore = eps / 3.0;
        let probs = [explore, 1.0 - eps + explore, explore];
        let stat = chi2(&counts, &probs);
        assert!(stat < chi2_crit_99(2), "eps {eps}: chi2 {stat} counts {counts:?}");
    }
}

#[test]
fn dqn_epsilon_schedule_is_linear() {
    let s = EpsilonSchedule { start: 1.0, end: 0.1, decay_steps: 10 };
    for k in 0..=12u64 {
        let want = if k >= 10 { 0.1 } else { 1.0 - 0.09 * k as f64 };
        assert!((s.value(k) - want).abs() < TOL);
    }
}

#[test]
fn dqn_hard_target_sync_period() {
    let mut agent = dqn_fixture(DqnConfig { target_sync: TargetSync::Hard { every: 3 }, lr: 0.01, ..DqnConfig::default() });
    let t = tr1([1.0, -1.0], 1, 1.0, [0.0, 1.0], false, 1);
    let initial_target = agent.q_target.params();
    for step in 1..=6 {
        agent.train_step(&[&t]).unwrap();
        if step % 3 == 0 {
            assert_eq!(agent.q_target, agent.q_net, "step {step}");
        } else if step < 3 {
            assert_eq!(agent.q_target.params(), initial_target);
        } else {
            assert_ne!(agent.q_target, agent.q_net);
        }
    }
}

#[test]
fn dqn_gradient_touches_only_the_taken_action() {
    let mut agent = dqn_fixture(DqnConfig { lr: 0.01, ..DqnConfig::default() });
    let t = tr1([1.0, 2.0], 0, 5.0, [0.0, 0.0], true, 1);
    let before = agent.q_net.params();
    let loss = agent.train_step(&[&t]).unwrap();
    // Q(s, 0) = 1, target 5 -> squared error 16.
    assert!((loss - 16.0).abs() < TOL);
    let after = agent.q_net.params();
    // Weights are row-major (2 × 3); bias follows. Columns 1 and 2 are untouched.
    for i in [1, 2, 4, 5, 7, 8] {
        assert_eq!(after[i], before[i], "param {i}");
    }
    for i in [0, 3, 6] {
        assert!(after[i] > before[i], "param {i}");
    }
}
