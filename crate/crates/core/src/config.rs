use crate::error::{Error, Result};

/// Hyperparameters for both learners.
///
/// Defaults follow the fixed rows of the random-search table (discount
/// 0.995, target lag 0.01, batch 128, gradient clip 4.0, Huber clip 1.0) with
/// desk-scale network widths.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainerConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    /// KL penalty weight; only the KL-penalized learner reads it.
    pub lambda: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub total_steps: usize,
    pub reward_scale: f64,
    pub q_grad_clip: f64,
    pub huber_clip: f64,
    /// Initial log-variance `phi` of the policy.
    pub log_var_init: f64,
    /// When set, the policy mean output bias is shifted so the mean action
    /// at the first reset observation equals this value in every dimension.
    pub init_mean: Option<f64>,
    pub actor_hidden: Vec<usize>,
    pub critic_embed: usize,
    pub critic_hidden: usize,
    pub replay_capacity: usize,
    /// Weight critic residuals by `1 / q(a~ | s)` from the recorded behavior
    /// density instead of a unit weight. Phantom sampling supplies the
    /// `N(a | a~, Sigma)` factor.
    pub importance_weights: bool,
    /// Monte Carlo samples for fitting a smoothed critic to an expected one.
    pub fit_samples: usize,
    pub ou_damping: f64,
    pub ou_stddev: f64,
    pub log_every: usize,
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Record wall-clock milliseconds in logs. Off keeps output byte-identical
    /// across repeated runs.
    pub record_wall_clock: bool,
    pub quadrature_order: usize,
    pub fd_step: f64,
    pub fd_step2: f64,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.995,
            lambda: 0.0,
            tau: 0.01,
            batch_size: 128,
            total_steps: 10_000,
            reward_scale: 0.1,
            q_grad_clip: 4.0,
            huber_clip: 1.0,
            log_var_init: -1.0,
            init_mean: None,
            actor_hidden: vec![64, 64],
            critic_embed: 64,
            critic_hidden: 64,
            replay_capacity: 100_000,
            importance_weights: false,
            fit_samples: 8,
            ou_damping: 1e-3,
            ou_stddev: 0.2,
            log_every: 100,
            eval_every: 1000,
            eval_episodes: 10,
            record_wall_clock: false,
            quadrature_order: 64,
            fd_step: 1e-4,
            fd_step2: 3e-3,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("reward_scale", self.reward_scale),
            ("q_grad_clip", self.q_grad_clip),
            ("huber_clip", self.huber_clip),
            ("fd_step", self.fd_step),
            ("fd_step2", self.fd_step2),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if !self.log_var_init.is_finite() {
            return Err(Error::Config("log_var_init must be finite".into()));
        }
        if !(self.ou_damping >= 0.0 && self.ou_damping <= 1.0) || !(self.ou_stddev >= 0.0) {
            return Err(Error::Config("OU damping must lie in [0, 1] and stddev be non-negative".into()));
        }
        let counts = [
            ("batch_size", self.batch_size),
            ("replay_capacity", self.replay_capacity),
            ("fit_samples", self.fit_samples),
            ("log_every", self.log_every),
            ("eval_every", self.eval_every),
            ("eval_episodes", self.eval_episodes),
            ("quadrature_order", self.quadrature_order),
            ("critic_embed", self.critic_embed),
            ("critic_hidden", self.critic_hidden),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.actor_hidden.contains(&0) {
            return Err(Error::Config("actor hidden widths must be positive".into()));
        }
        Ok(())
    }

    /// Desk-scale settings for the two-bump bandit. The mean is a single
    /// affine output, so on the constant observation it is a free scalar.
    /// Critic residuals carry `1 / q` weights: with unit weights the learned
    /// curvature is too flat for the variance to respond.
    pub fn bumps() -> Self {
        Self {
            actor_lr: 2e-3,
            critic_lr: 3e-2,
            reward_scale: 1.0,
            batch_size: 64,
            total_steps: 3000,
            log_var_init: -0.5,
            init_mean: Some(-1.0),
            actor_hidden: Vec::new(),
            critic_embed: 16,
            critic_hidden: 32,
            importance_weights: true,
            ou_stddev: 0.6,
            log_every: 10,
            eval_episodes: 1,
            eval_every: 100,
            ..Self::default()
        }
    }

    /// Desk-scale settings for the point-mass task. A single action moves
    /// the velocity by `dt * a`, so its effect on the return is small; a
    /// short discount, small value scale and mean-reverting OU noise keep the
    /// critic's action gradient above its fitting noise.
    pub fn point_mass() -> Self {
        Self {
            actor_lr: 1e-4,
            critic_lr: 1e-3,
            gamma: 0.95,
            reward_scale: 0.01,
            batch_size: 32,
            total_steps: 3000,
            log_var_init: -3.0,
            actor_hidden: Vec::new(),
            critic_embed: 16,
            critic_hidden: 16,
            importance_weights: true,
            ou_damping: 0.15,
            ou_stddev: 0.2,
            eval_every: 500,
            ..Self::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        TrainerConfig::default().validate().unwrap();
        TrainerConfig::bumps().validate().unwrap();
        TrainerConfig::point_mass().validate().unwrap();
    }

    #[test]
    fn fixed_table_values() {
        let c = TrainerConfig::default();
        assert_eq!(c.gamma, 0.995);
        assert_eq!(c.tau, 0.01);
        assert_eq!(c.batch_size, 128);
        assert_eq!(c.q_grad_clip, 4.0);
        assert_eq!(c.huber_clip, 1.0);
        assert_eq!(c.log_var_init, -1.0);
    }

    #[test]
    fn rejects_out_of_range() {
        let bad = [
            TrainerConfig { gamma: 1.0, ..Default::default() },
            TrainerConfig { tau: 0.0, ..Default::default() },
            TrainerConfig { actor_lr: -1.0, ..Default::default() },
            TrainerConfig { batch_size: 0, ..Default::default() },
            TrainerConfig { lambda: -0.1, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }
}
