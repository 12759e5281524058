//! Shared fixtures for the kernel benchmarks.

use rand::Rng;
use smoothie_core::smoothie::{critic_network, mean_network, Critic, SmoothiePolicy};
use smoothie_core::{seeded_rng, DerivNet, Environment, PointMass, ReplayBuffer, SeededRng, TrainerConfig, Transition};

/// Observation width of the point-mass task, used by every fixture.
pub const OBS_DIM: usize = 4;

/// Critic with the default widths on point-mass dimensions.
pub fn default_critic(rng: &mut SeededRng) -> DerivNet {
    let cfg = TrainerConfig::default();
    critic_network(PointMass::default().spec(), cfg.critic_embed, cfg.critic_hidden, rng).expect("valid shape")
}

/// Policy with the default mean network on point-mass dimensions.
pub fn default_policy(rng: &mut SeededRng) -> SmoothiePolicy {
    let cfg = TrainerConfig::default();
    let net = mean_network(PointMass::default().spec(), &cfg.actor_hidden, rng).expect("valid shape");
    SmoothiePolicy::new(net, cfg.log_var_init).expect("finite log-variance")
}

/// `n` uniformly drawn `(state, action)` pairs in `[-1, 1]`.
pub fn random_inputs(n: usize, action_dim: usize, rng: &mut SeededRng) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..n)
        .map(|_| {
            let s = (0..OBS_DIM).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let a = (0..action_dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
            (s, a)
        })
        .collect()
}

/// A buffer of `n` random point-mass transitions.
pub fn filled_buffer(n: usize, seed: u64) -> ReplayBuffer {
    let mut rng = seeded_rng(seed);
    let mut env = PointMass::default();
    let mut buffer = ReplayBuffer::new(n).expect("positive capacity");
    let mut obs = env.reset(&mut rng);
    for _ in 0..n {
        let action: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let step = env.step(&action, &mut rng).expect("valid action");
        buffer
            .push(Transition {
                state: obs,
                action,
                reward: step.reward,
                next_state: step.next_observation.clone(),
                done: step.done,
                behavior_log_density: None,
            })
            .expect("finite transition");
        obs = if step.done { env.reset(&mut rng) } else { step.next_observation };
    }
    buffer
}

/// A fresh critic with its target and optimizer state.
pub fn fresh_critic(rng: &mut SeededRng) -> Critic {
    Critic::new(default_critic(rng)).expect("scalar critic")
}
