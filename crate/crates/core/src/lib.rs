//! Gaussian-smoothed actor-critic learning.
//!
//! The crate trains Gaussian policies `N(mu_theta(s), diag(exp(phi)))` from the
//! action gradient and action Hessian of a learned *smoothed* action-value
//! function, alongside a DDPG baseline that shares the same networks, replay
//! buffer and environments. The [`verify`] module holds independent numerical
//! oracles (quadrature and finite differences) for every identity the
//! algorithm relies on.
//!
//! Module map:
//!
//! - [`gauss`]: diagonal Gaussians, analytic KL, Gauss–Hermite quadrature,
//!   density derivatives.
//! - [`net`]: feed-forward networks with forward-mode action Jacobians and
//!   Hessians, reverse-mode parameter gradients, Adam, Polyak averaging.
//! - [`env`]: the two-bump bandit and a 2-D point-mass task.
//! - [`replay`]: FIFO replay buffer and phantom-action sampling.
//! - [`smoothie`] and [`ddpg`]: the two learners.
//! - [`verify`]: oracle reports.
//! - [`harness`]: config files, seeded runs, random search.

pub mod config;
pub mod ddpg;
pub mod env;
pub mod error;
pub mod gauss;
pub mod harness;
pub mod net;
pub mod replay;
pub mod smoothie;
pub mod train_log;
mod trainer;
pub mod verify;

pub use config::TrainerConfig;
pub use env::{BumpsBandit, EnvSpec, Environment, PointMass, StepResult};
pub use error::{Error, Result, TrainFailure};
pub use gauss::{kl_divergence, DiagGaussian, QuadratureRule};
pub use net::{Activation, ActionCritic, ActionDerivs, AdamState, DerivNet, ForwardTriple};
pub use replay::{ReplayBuffer, Transition};
pub use train_log::{LogRow, TrainLog};

/// Seeded pseudo-random stream used everywhere randomness is consumed.
///
/// ChaCha8 is portable across platforms, which keeps runs byte-identical for a
/// given seed.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds a [`SeededRng`] from an integer seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
