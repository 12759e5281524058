//! Deterministic policy gradient baseline with Ornstein-Uhlenbeck exploration.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::TrainerConfig;
use crate::env::{EnvSpec, Environment};
use crate::error::{Error, Result, TrainFailure};
use crate::net::{adam_step, ActionCritic, AdamState, DerivNet};
use crate::replay::{ReplayBuffer, Transition};
use crate::smoothie::{critic_network, mean_network, regress, shift_output_bias, Critic, RegressionLoss};
use crate::train_log::TrainLog;
use crate::trainer::{self, Agent, UpdateStats};
use crate::SeededRng;

/// Zero-mean OU process discretized with unit step:
/// `x <- x - damping * x + stddev * eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct OuNoise {
    pub state: Vec<f64>,
    pub damping: f64,
    pub stddev: f64,
}

impl OuNoise {
    pub fn new(dim: usize, damping: f64, stddev: f64) -> Self {
        Self { state: vec![0.0; dim], damping, stddev }
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn step(&mut self, rng: &mut SeededRng) -> &[f64] {
        for x in &mut self.state {
            let eps: f64 = rng.sample(StandardNormal);
            *x += -self.damping * *x + self.stddev * eps;
        }
        &self.state
    }

    /// Standard deviation of the stationary AR(1) distribution.
    pub fn stationary_std(&self) -> f64 {
        self.stddev / (self.damping * (2.0 - self.damping)).sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct DdpgAgent {
    pub actor: DerivNet,
    pub actor_target: DerivNet,
    pub actor_adam: AdamState,
    pub critic: Critic,
    pub noise: OuNoise,
}

impl DdpgAgent {
    pub fn new(spec: &EnvSpec, cfg: &TrainerConfig, rng: &mut SeededRng) -> Result<Self> {
        let actor = mean_network(spec, &cfg.actor_hidden, rng)?;
        let critic = Critic::new(critic_network(spec, cfg.critic_embed, cfg.critic_hidden, rng)?)?;
        Ok(Self {
            actor_target: actor.clone(),
            actor_adam: AdamState::new(actor.num_params()),
            actor,
            critic,
            noise: OuNoise::new(spec.action_dim, cfg.ou_damping, cfg.ou_stddev),
        })
    }
}

/// `1/B sum_k J_theta mu(s_k)^T dQ/da (s_k, mu(s_k))`, the ascent direction
/// for the actor parameters.
pub fn actor_gradient<C: ActionCritic + ?Sized>(actor: &DerivNet, critic: &C, states: &[&[f64]]) -> Result<Vec<f64>> {
    if states.is_empty() {
        return Err(Error::contract("actor gradient needs at least one state"));
    }
    let b = states.len() as f64;
    let mut grad = vec![0.0; actor.num_params()];
    for s in states {
        let a = actor.forward(s, &[])?;
        let g = critic.action_derivs(s, &a).gradient;
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("critic action gradient is not finite".into()));
        }
        actor.accumulate_param_gradient(s, &[], &g, 1.0 / b, &mut grad)?;
    }
    Ok(grad)
}

/// One ascent step for the actor; returns the gradient norm.
pub fn ddpg_actor_update<C: ActionCritic + ?Sized>(
    actor: &mut DerivNet,
    adam: &mut AdamState,
    critic: &C,
    states: &[&[f64]],
    lr: f64,
) -> Result<f64> {
    let g = actor_gradient(actor, critic, states)?;
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
    adam_step(actor.params_mut(), &neg, lr, adam)?;
    Ok(norm)
}

/// Bellman regression on stored actions with target
/// `r + gamma (1 - done) Q_target(s', mu_target(s'))`.
pub fn ddpg_critic_update(critic: &mut Critic, actor_target: &DerivNet, batch: &[Transition], cfg: &TrainerConfig) -> Result<f64> {
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        let bootstrap = if t.done {
            0.0
        } else {
            let a_next = actor_target.forward(&t.next_state, &[])?;
            cfg.gamma * critic.target.forward(&t.next_state, &a_next)?[0]
        };
        targets.push(t.reward + bootstrap);
    }
    let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
    let actions: Vec<Vec<f64>> = batch.iter().map(|t| t.action.clone()).collect();
    regress(
        critic,
        &states,
        &actions,
        &targets,
        None,
        RegressionLoss::Huber(cfg.huber_clip),
        cfg.critic_lr,
        Some(cfg.q_grad_clip),
    )
}

impl Agent for DdpgAgent {
    fn begin_episode(&mut self) {
        self.noise.reset();
    }

    fn behavior_action(&mut self, obs: &[f64], rng: &mut SeededRng) -> Result<(Vec<f64>, Option<f64>)> {
        let mut a = self.actor.forward(obs, &[])?;
        for (x, n) in a.iter_mut().zip(self.noise.step(rng)) {
            *x += n;
        }
        Ok((a, None))
    }

    fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.actor.forward(obs, &[])
    }

    fn shift_mean(&mut self, obs: &[f64], value: f64) -> Result<()> {
        shift_output_bias(&mut self.actor, obs, value)?;
        shift_output_bias(&mut self.actor_target, obs, value)
    }

    fn update(&mut self, buffer: &ReplayBuffer, cfg: &TrainerConfig, rng: &mut SeededRng) -> Result<UpdateStats> {
        let batch = buffer.sample_batch(cfg.batch_size, rng)?;
        let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
        ddpg_actor_update(&mut self.actor, &mut self.actor_adam, &self.critic.net, &states, cfg.actor_lr)?;
        let batch = buffer.sample_batch(cfg.batch_size, rng)?;
        let td = ddpg_critic_update(&mut self.critic, &self.actor_target, &batch, cfg)?;
        crate::net::polyak_update(self.actor_target.params_mut(), self.actor.params(), cfg.tau)?;
        self.critic.update_target(cfg.tau)?;
        Ok(UpdateStats { kl: 0.0, td_loss: td })
    }

    fn sigma(&self) -> Vec<f64> {
        vec![self.noise.stddev; self.noise.state.len()]
    }
}

/// Trains the baseline on `env`.
pub fn train_ddpg<E: Environment + Clone>(env: &mut E, cfg: &TrainerConfig, rng: &mut SeededRng) -> Result<TrainLog, TrainFailure> {
    let mut agent = match DdpgAgent::new(env.spec(), cfg, rng) {
        Ok(a) => a,
        Err(error) => return Err(TrainFailure { log: TrainLog::default(), error }),
    };
    trainer::run(env, &mut agent, cfg, rng)
}
