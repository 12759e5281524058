//! Smoothie: a Gaussian policy trained from the action gradient and action
//! Hessian of a learned smoothed action-value function
//! `Q~(s, a) = E_{a~ ~ N(a, Sigma)} Q(s, a~)`.
//!
//! With a diagonal covariance `Sigma = diag(exp(phi))` shared across states,
//! the ascent directions for a batch of states are
//!
//! ```text
//! d theta = 1/B sum_k  J_theta mu(s_k)^T g_k               - lambda d/dtheta KL_k
//! d phi   = 1/B sum_k  1/2 diag(H_k) * exp(phi)            - lambda d/dphi   KL_k
//! ```
//!
//! where `g_k`, `H_k` are the critic's action gradient and Hessian at
//! `mu(s_k)`, and `KL_k = KL(pi(s_k) || pi_target(s_k))`. The covariance
//! direction uses `dQ~/dSigma = 1/2 d^2 Q~/da^2`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::TrainerConfig;
use crate::env::{EnvSpec, Environment};
use crate::error::{Error, Result, TrainFailure};
use crate::gauss::{kl_terms, DiagGaussian};
use crate::net::{adam_step, clip_global_norm, huber, polyak_update, ActionCritic, Activation, AdamState, DerivNet, NetShape};
use crate::replay::{phantom_actions, ReplayBuffer, Transition};
use crate::train_log::TrainLog;
use crate::trainer::{self, Agent, UpdateStats};
use crate::SeededRng;

/// Variance clamp applied after every policy update.
pub const VARIANCE_MIN: f64 = 1e-8;
pub const VARIANCE_MAX: f64 = 1e4;

/// Gaussian policy `N(mu_theta(s), diag(exp(phi)))` with lagged target copies.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothiePolicy {
    pub mean_net: DerivNet,
    pub log_var: Vec<f64>,
    pub target_mean_net: DerivNet,
    pub target_log_var: Vec<f64>,
}

impl SmoothiePolicy {
    pub fn new(mean_net: DerivNet, log_var_init: f64) -> Result<Self> {
        if mean_net.action_dim() != 0 {
            return Err(Error::Config("policy mean network must take only the state".into()));
        }
        let d = mean_net.output_dim();
        let log_var = vec![log_var_init; d];
        Ok(Self { target_mean_net: mean_net.clone(), target_log_var: log_var.clone(), mean_net, log_var })
    }

    pub fn action_dim(&self) -> usize {
        self.log_var.len()
    }

    pub fn mean(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.mean_net.forward(state, &[])
    }

    pub fn target_mean(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.target_mean_net.forward(state, &[])
    }

    pub fn variance(&self) -> Vec<f64> {
        self.log_var.iter().map(|p| p.exp()).collect()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.log_var.iter().map(|p| (0.5 * p).exp()).collect()
    }

    pub fn distribution(&self, state: &[f64]) -> Result<DiagGaussian> {
        DiagGaussian::new(self.mean(state)?, self.log_var.clone())
    }

    pub fn target_distribution(&self, state: &[f64]) -> Result<DiagGaussian> {
        DiagGaussian::new(self.target_mean(state)?, self.target_log_var.clone())
    }

    /// Moves online and target parameters toward each other by `tau`.
    pub fn update_targets(&mut self, tau: f64) -> Result<()> {
        polyak_update(self.target_mean_net.params_mut(), self.mean_net.params(), tau)?;
        polyak_update(&mut self.target_log_var, &self.log_var, tau)
    }

    /// Shifts the output bias of the online and target mean networks so the
    /// mean at `state` equals `value` in every dimension.
    pub fn shift_mean(&mut self, state: &[f64], value: f64) -> Result<()> {
        shift_output_bias(&mut self.mean_net, state, value)?;
        shift_output_bias(&mut self.target_mean_net, state, value)
    }

    /// Batch-mean `KL(pi(s) || pi_target(s))`.
    pub fn batch_kl(&self, states: &[&[f64]]) -> Result<f64> {
        let mut total = 0.0;
        for s in states {
            let m = self.mean(s)?;
            let mt = self.target_mean(s)?;
            total += kl_terms(&m, &self.log_var, &mt, &self.target_log_var);
        }
        Ok(total / states.len().max(1) as f64)
    }
}

pub(crate) fn shift_output_bias(net: &mut DerivNet, state: &[f64], value: f64) -> Result<()> {
    let current = net.forward(state, &[])?;
    let last = net.layers().len() - 1;
    if net.layers()[last].activation != Activation::Identity {
        return Err(Error::Config("mean shift needs a linear output layer".into()));
    }
    let (_, bias) = net.layer_params_mut(last);
    for (b, c) in bias.iter_mut().zip(current) {
        *b += value - c;
    }
    Ok(())
}

/// Standard policy-mean network: relu hidden layers, linear output.
pub fn mean_network(spec: &EnvSpec, hidden: &[usize], rng: &mut SeededRng) -> Result<DerivNet> {
    DerivNet::new(&NetShape::mlp(spec.obs_dim, hidden, Activation::Relu, spec.action_dim, Activation::Identity), rng)
}

/// Standard critic: tanh state embedding, action concatenated, one tanh
/// hidden layer, scalar output.
pub fn critic_network(spec: &EnvSpec, embed: usize, hidden: usize, rng: &mut SeededRng) -> Result<DerivNet> {
    DerivNet::new(&NetShape::embed_concat_critic(spec.obs_dim, spec.action_dim, embed, hidden), rng)
}

/// Ascent directions for the policy parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyGradients {
    pub mean_params: Vec<f64>,
    pub log_var: Vec<f64>,
    /// Batch-mean KL to the target policy before the step.
    pub kl: f64,
}

/// Computes the mean and log-variance ascent directions over `states`.
pub fn policy_gradients<C: ActionCritic + ?Sized>(
    policy: &SmoothiePolicy,
    critic: &C,
    states: &[&[f64]],
    lambda: f64,
) -> Result<PolicyGradients> {
    if states.is_empty() {
        return Err(Error::contract("policy gradient needs at least one state"));
    }
    let d = policy.action_dim();
    let b = states.len() as f64;
    let var = policy.variance();
    let target_inv_var: Vec<f64> = policy.target_log_var.iter().map(|p| (-p).exp()).collect();
    let mut mean_grad = vec![0.0; policy.mean_net.num_params()];
    let mut log_var_grad = vec![0.0; d];
    let mut kl = 0.0;
    let mut cot = vec![0.0; d];
    for s in states {
        let mu = policy.mean(s)?;
        let mu_t = policy.target_mean(s)?;
        let derivs = critic.action_derivs(s, &mu);
        if derivs.gradient.len() != d || derivs.hessian.len() != d * d {
            return Err(Error::dims("critic action derivatives", d, derivs.gradient.len()));
        }
        if derivs.gradient.iter().chain(&derivs.hessian).any(|v| !v.is_finite()) {
            return Err(Error::Divergence("critic gradient or Hessian is not finite".into()));
        }
        for i in 0..d {
            cot[i] = derivs.gradient[i] - lambda * (mu[i] - mu_t[i]) * target_inv_var[i];
            let h_ii = derivs.hessian[i * d + i];
            let kl_phi = 0.5 * ((policy.log_var[i] - policy.target_log_var[i]).exp() - 1.0);
            log_var_grad[i] += (0.5 * h_ii * var[i] - lambda * kl_phi) / b;
        }
        policy.mean_net.accumulate_param_gradient(s, &[], &cot, 1.0 / b, &mut mean_grad)?;
        kl += kl_terms(&mu, &policy.log_var, &mu_t, &policy.target_log_var);
    }
    Ok(PolicyGradients { mean_params: mean_grad, log_var: log_var_grad, kl: kl / b })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOptimizer {
    pub mean: AdamState,
    pub log_var: AdamState,
}

impl PolicyOptimizer {
    pub fn new(policy: &SmoothiePolicy) -> Self {
        Self { mean: AdamState::new(policy.mean_net.num_params()), log_var: AdamState::new(policy.action_dim()) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyStep {
    pub kl: f64,
    pub mean_grad_norm: f64,
    pub log_var_grad_norm: f64,
}

/// One ascent step on mean and log-variance parameters.
pub fn policy_update<C: ActionCritic + ?Sized>(
    policy: &mut SmoothiePolicy,
    opt: &mut PolicyOptimizer,
    critic: &C,
    states: &[&[f64]],
    lr: f64,
    lambda: f64,
) -> Result<PolicyStep> {
    let g = policy_gradients(policy, critic, states, lambda)?;
    let neg_mean: Vec<f64> = g.mean_params.iter().map(|v| -v).collect();
    let neg_phi: Vec<f64> = g.log_var.iter().map(|v| -v).collect();
    adam_step(policy.mean_net.params_mut(), &neg_mean, lr, &mut opt.mean)?;
    adam_step(&mut policy.log_var, &neg_phi, lr, &mut opt.log_var)?;
    let (lo, hi) = (VARIANCE_MIN.ln(), VARIANCE_MAX.ln());
    policy.log_var.iter_mut().for_each(|p| *p = p.clamp(lo, hi));
    Ok(PolicyStep {
        kl: g.kl,
        mean_grad_norm: norm(&g.mean_params),
        log_var_grad_norm: norm(&g.log_var),
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scalar critic with a lagged target copy and its optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    pub net: DerivNet,
    pub target: DerivNet,
    pub adam: AdamState,
}

impl Critic {
    pub fn new(net: DerivNet) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::Config(format!("critic must have one output, has {}", net.output_dim())));
        }
        Ok(Self { adam: AdamState::new(net.num_params()), target: net.clone(), net })
    }

    pub fn update_target(&mut self, tau: f64) -> Result<()> {
        polyak_update(self.target.params_mut(), self.net.params(), tau)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum RegressionLoss {
    Huber(f64),
    Squared,
}

/// One optimizer step on `1/B sum_k weight_k * loss(Q(s_k, a_k) - y_k)`,
/// with the parameter gradient norm-clipped at `clip`. Returns the
/// pre-step loss.
pub(crate) fn regress(
    critic: &mut Critic,
    states: &[&[f64]],
    actions: &[Vec<f64>],
    targets: &[f64],
    weights: Option<&[f64]>,
    loss_kind: RegressionLoss,
    lr: f64,
    clip: Option<f64>,
) -> Result<f64> {
    let b = states.len() as f64;
    let mut grad = vec![0.0; critic.net.num_params()];
    let mut loss = 0.0;
    for k in 0..states.len() {
        let q = critic.net.forward(states[k], &actions[k])?[0];
        let w = weights.map_or(1.0, |w| w[k]);
        let r = q - targets[k];
        let (l, dl) = match loss_kind {
            RegressionLoss::Huber(c) => huber(r, c),
            RegressionLoss::Squared => (r * r, 2.0 * r),
        };
        loss += w * l / b;
        critic.net.accumulate_param_gradient(states[k], &actions[k], &[w * dl], 1.0 / b, &mut grad)?;
    }
    if !loss.is_finite() {
        return Err(Error::Divergence(format!("critic loss is {loss}")));
    }
    if let Some(c) = clip {
        clip_global_norm(&mut grad, c);
    }
    adam_step(critic.net.params_mut(), &grad, lr, &mut critic.adam)?;
    Ok(loss)
}

/// Smoothed Bellman regression on phantom actions.
///
/// Each stored `(s, a~, r, s')` becomes the input `(s, a)` with
/// `a ~ N(a~, Sigma)` and target `r + gamma (1 - done) Q~_target(s', mu_target(s'))`.
pub fn critic_update(
    critic: &mut Critic,
    policy: &SmoothiePolicy,
    batch: &[Transition],
    cfg: &TrainerConfig,
    rng: &mut SeededRng,
) -> Result<f64> {
    let var = policy.variance();
    let phantoms = phantom_actions(batch, |_| var.clone(), rng);
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        let bootstrap = if t.done {
            0.0
        } else {
            let a_next = policy.target_mean(&t.next_state)?;
            cfg.gamma * critic.target.forward(&t.next_state, &a_next)?[0]
        };
        targets.push(t.reward + bootstrap);
    }
    // Drawing the phantom from N(a~, Sigma) already supplies the kernel factor
    // of delta, so each sample carries only 1/q(a~|s). Weights are normalized
    // to unit batch mean so the step size does not depend on the density scale.
    let weights = if cfg.importance_weights {
        let mut log_w = Vec::with_capacity(batch.len());
        for t in batch {
            let q = t
                .behavior_log_density
                .ok_or_else(|| Error::contract("importance weights need recorded behavior densities"))?;
            log_w.push(-q);
        }
        let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = log_w.iter().map(|l| (l - top).exp()).collect();
        let mean = w.iter().sum::<f64>() / w.len() as f64;
        Some(w.into_iter().map(|x| x / mean).collect::<Vec<_>>())
    } else {
        None
    };
    let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
    regress(
        critic,
        &states,
        &phantoms,
        &targets,
        weights.as_deref(),
        RegressionLoss::Huber(cfg.huber_clip),
        cfg.critic_lr,
        Some(cfg.q_grad_clip),
    )
}

/// Monte Carlo estimate of `E_{a~ ~ N(a, diag(variance))} Q(s, a~)`.
pub fn smoothed_target_mc<C: ActionCritic + ?Sized>(
    expected: &C,
    state: &[f64],
    action: &[f64],
    variance: &[f64],
    samples: usize,
    rng: &mut SeededRng,
) -> f64 {
    let mut total = 0.0;
    let mut a = action.to_vec();
    for _ in 0..samples {
        for i in 0..a.len() {
            let eps: f64 = rng.sample(StandardNormal);
            a[i] = action[i] + variance[i].sqrt() * eps;
        }
        total += expected.action_value(state, &a);
    }
    total / samples as f64
}

/// Bellman update for an ordinary (unsmoothed) critic of the Gaussian
/// policy: target `r + gamma Q_target(s', a')`, `a' ~ pi_target(s')`.
pub fn expected_critic_update(
    expected: &mut Critic,
    policy: &SmoothiePolicy,
    batch: &[Transition],
    cfg: &TrainerConfig,
    rng: &mut SeededRng,
) -> Result<f64> {
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        let bootstrap = if t.done {
            0.0
        } else {
            let a_next = policy.target_distribution(&t.next_state)?.sample(rng);
            cfg.gamma * expected.target.forward(&t.next_state, &a_next)?[0]
        };
        targets.push(t.reward + bootstrap);
    }
    let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
    let actions: Vec<Vec<f64>> = batch.iter().map(|t| t.action.clone()).collect();
    regress(
        expected,
        &states,
        &actions,
        &targets,
        None,
        RegressionLoss::Huber(cfg.huber_clip),
        cfg.critic_lr,
        Some(cfg.q_grad_clip),
    )
}

/// Fits the smoothed critic to a Monte Carlo smoothing of an expected
/// critic at the stored actions, with `cfg.fit_samples` draws per row.
pub fn fit_smoothed_from_expected<C: ActionCritic + ?Sized>(
    expected: &C,
    smoothed: &mut Critic,
    policy: &SmoothiePolicy,
    batch: &[Transition],
    cfg: &TrainerConfig,
    rng: &mut SeededRng,
) -> Result<f64> {
    if cfg.fit_samples == 0 {
        return Err(Error::contract("fit needs at least one sample"));
    }
    let var = policy.variance();
    let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
    let actions: Vec<Vec<f64>> = batch.iter().map(|t| t.action.clone()).collect();
    let targets: Vec<f64> = batch
        .iter()
        .map(|t| smoothed_target_mc(expected, &t.state, &t.action, &var, cfg.fit_samples, rng))
        .collect();
    regress(smoothed, &states, &actions, &targets, None, RegressionLoss::Squared, cfg.critic_lr, None)
}

/// Policy, smoothed critic and optimizers for one run.
#[derive(Clone, Debug)]
pub struct Smoothie {
    pub policy: SmoothiePolicy,
    pub critic: Critic,
    pub optimizer: PolicyOptimizer,
    pub lambda: f64,
}

impl Smoothie {
    pub fn new(spec: &EnvSpec, cfg: &TrainerConfig, rng: &mut SeededRng) -> Result<Self> {
        let policy = SmoothiePolicy::new(mean_network(spec, &cfg.actor_hidden, rng)?, cfg.log_var_init)?;
        let critic = Critic::new(critic_network(spec, cfg.critic_embed, cfg.critic_hidden, rng)?)?;
        Ok(Self { optimizer: PolicyOptimizer::new(&policy), policy, critic, lambda: cfg.lambda })
    }

    /// Policy step, critic step, then all target networks, each on its own batch.
    pub fn train_step(&mut self, buffer: &ReplayBuffer, cfg: &TrainerConfig, rng: &mut SeededRng) -> Result<(PolicyStep, f64)> {
        let batch = buffer.sample_batch(cfg.batch_size, rng)?;
        let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
        let step = policy_update(&mut self.policy, &mut self.optimizer, &self.critic.net, &states, cfg.actor_lr, self.lambda)?;
        let batch = buffer.sample_batch(cfg.batch_size, rng)?;
        let td = critic_update(&mut self.critic, &self.policy, &batch, cfg, rng)?;
        self.policy.update_targets(cfg.tau)?;
        self.critic.update_target(cfg.tau)?;
        Ok((step, td))
    }
}

impl Agent for Smoothie {
    fn behavior_action(&mut self, obs: &[f64], rng: &mut SeededRng) -> Result<(Vec<f64>, Option<f64>)> {
        let dist = self.policy.distribution(obs)?;
        let a = dist.sample(rng);
        let lp = dist.log_density(&a)?;
        Ok((a, Some(lp)))
    }

    fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.policy.mean(obs)
    }

    fn shift_mean(&mut self, obs: &[f64], value: f64) -> Result<()> {
        self.policy.shift_mean(obs, value)
    }

    fn update(&mut self, buffer: &ReplayBuffer, cfg: &TrainerConfig, rng: &mut SeededRng) -> Result<UpdateStats> {
        let (step, td) = self.train_step(buffer, cfg, rng)?;
        Ok(UpdateStats { kl: step.kl, td_loss: td })
    }

    fn sigma(&self) -> Vec<f64> {
        self.policy.sigma()
    }
}

/// Trains a Smoothie agent on `env`. The KL weight is `cfg.lambda`.
pub fn train<E: Environment + Clone>(env: &mut E, cfg: &TrainerConfig, rng: &mut SeededRng) -> Result<TrainLog, TrainFailure> {
    let mut agent = match Smoothie::new(env.spec(), cfg, rng) {
        Ok(a) => a,
        Err(error) => return Err(TrainFailure { log: TrainLog::default(), error }),
    };
    trainer::run(env, &mut agent, cfg, rng)
}

/// As [`train`], also returning the trained agent.
pub fn train_agent<E: Environment + Clone>(
    env: &mut E,
    cfg: &TrainerConfig,
    rng: &mut SeededRng,
) -> Result<(TrainLog, Smoothie), TrainFailure> {
    let mut agent = match Smoothie::new(env.spec(), cfg, rng) {
        Ok(a) => a,
        Err(error) => return Err(TrainFailure { log: TrainLog::default(), error }),
    };
    let log = trainer::run(env, &mut agent, cfg, rng)?;
    Ok((log, agent))
}
