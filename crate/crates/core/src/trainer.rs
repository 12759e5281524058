//! Interaction loop shared by both learners.

use std::time::Instant;

use rand::Rng;

use crate::config::TrainerConfig;
use crate::env::Environment;
use crate::error::{Result, TrainFailure};
use crate::replay::{ReplayBuffer, Transition};
use crate::train_log::{LogRow, TrainLog};
use crate::{seeded_rng, SeededRng};

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct UpdateStats {
    pub kl: f64,
    pub td_loss: f64,
}

pub(crate) trait Agent {
    fn begin_episode(&mut self) {}

    /// Behavior action and, when the learner tracks it, its log-density.
    fn behavior_action(&mut self, obs: &[f64], rng: &mut SeededRng) -> Result<(Vec<f64>, Option<f64>)>;

    fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>>;

    /// Shifts the policy so its mean action at `obs` is `value` everywhere.
    fn shift_mean(&mut self, obs: &[f64], value: f64) -> Result<()>;

    fn update(&mut self, buffer: &ReplayBuffer, cfg: &TrainerConfig, rng: &mut SeededRng) -> Result<UpdateStats>;

    /// Per-dimension standard deviation of the exploration distribution.
    fn sigma(&self) -> Vec<f64>;
}

/// Runs `cfg.total_steps` environment steps with one update per step once
/// the buffer holds a batch.
pub(crate) fn run<E, A>(env: &mut E, agent: &mut A, cfg: &TrainerConfig, rng: &mut SeededRng) -> Result<TrainLog, TrainFailure>
where
    E: Environment + Clone,
    A: Agent,
{
    let mut log = TrainLog::default();
    match run_inner(env, agent, cfg, rng, &mut log) {
        Ok(()) => Ok(log),
        Err(error) => Err(TrainFailure { log, error }),
    }
}

fn run_inner<E, A>(env: &mut E, agent: &mut A, cfg: &TrainerConfig, rng: &mut SeededRng, log: &mut TrainLog) -> Result<()>
where
    E: Environment + Clone,
    A: Agent,
{
    cfg.validate()?;
    let start = Instant::now();
    let eval_seed: u64 = rng.random();
    let mut eval_env = env.clone();
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity)?;

    let mut obs = env.reset(rng);
    let first_obs = obs.clone();
    agent.begin_episode();
    if let Some(m) = cfg.init_mean {
        agent.shift_mean(&first_obs, m)?;
    }

    let mut last = UpdateStats::default();
    let mut latest_eval = evaluate(&mut eval_env, agent, cfg.eval_episodes, eval_seed)?;
    log.evaluations.push((0, latest_eval));

    for i in 0..cfg.total_steps {
        let (action, log_density) = agent.behavior_action(&obs, rng)?;
        let applied = env.spec().clip_action(&action)?;
        let step = env.step(&applied, rng)?;
        buffer.push(Transition {
            state: obs,
            action: applied,
            reward: cfg.reward_scale * step.reward,
            next_state: step.next_observation.clone(),
            done: step.done,
            behavior_log_density: log_density,
        })?;
        if buffer.len() >= cfg.batch_size {
            last = agent.update(&buffer, cfg, rng)?;
            log.updates += 1;
        }
        obs = if step.done {
            agent.begin_episode();
            env.reset(rng)
        } else {
            step.next_observation
        };

        let n = i + 1;
        let final_step = n == cfg.total_steps;
        if n % cfg.eval_every == 0 || final_step {
            latest_eval = evaluate(&mut eval_env, agent, cfg.eval_episodes, eval_seed)?;
            log.evaluations.push((n, latest_eval));
        }
        if n % cfg.log_every == 0 || final_step {
            let sigma = agent.sigma();
            let smin = sigma.iter().copied().fold(f64::INFINITY, f64::min);
            let smax = sigma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let smean = sigma.iter().sum::<f64>() / sigma.len() as f64;
            log.rows.push(LogRow {
                step: n,
                return_mean: latest_eval,
                sigma_min: smin,
                sigma_mean: smean,
                sigma_max: smax,
                kl: last.kl,
                td_loss: last.td_loss,
                ms: if cfg.record_wall_clock { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 },
            });
        }
    }
    log.final_mean_action = agent.mean_action(&first_obs)?;
    Ok(())
}

/// Mean undiscounted return of the deterministic mean policy. Start states
/// come from a fixed seed so successive evaluations are comparable.
fn evaluate<E: Environment, A: Agent>(env: &mut E, agent: &A, episodes: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded_rng(seed);
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut obs = env.reset(&mut rng);
        loop {
            let a = agent.mean_action(&obs)?;
            let step = env.step(&a, &mut rng)?;
            total += step.reward;
            if step.done {
                break;
            }
            obs = step.next_observation;
        }
    }
    Ok(total / episodes as f64)
}
