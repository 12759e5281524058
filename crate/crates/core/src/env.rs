//! Environments sharing one interaction contract.

use rand::Rng;

use crate::error::{Error, Result};
use crate::SeededRng;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub action_dim: usize,
    /// Closed interval per action dimension.
    pub action_bounds: Vec<(f64, f64)>,
    pub horizon: usize,
    pub discount_hint: f64,
}

impl EnvSpec {
    /// Clips an action into the bounds, rejecting non-finite entries.
    pub fn clip_action(&self, action: &[f64]) -> Result<Vec<f64>> {
        if action.len() != self.action_dim {
            return Err(Error::dims("action", self.action_dim, action.len()));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::contract(format!("non-finite action {action:?}")));
        }
        Ok(action
            .iter()
            .zip(&self.action_bounds)
            .map(|(a, (lo, hi))| a.clamp(*lo, *hi))
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub next_observation: Vec<f64>,
    pub done: bool,
}

/// All randomness enters through `reset`; `step` is a deterministic function
/// of the current state and action for the environments in this module.
pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    fn reset(&mut self, rng: &mut SeededRng) -> Vec<f64>;

    /// Applies an action; out-of-bounds actions are clipped first.
    fn step(&mut self, action: &[f64], rng: &mut SeededRng) -> Result<StepResult>;
}

/// Single-state, one-step task whose reward is a mixture of two Gaussian
/// bumps, the second strictly higher.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpsBandit {
    pub centers: [f64; 2],
    pub heights: [f64; 2],
    pub widths: [f64; 2],
    spec: EnvSpec,
}

impl Default for BumpsBandit {
    fn default() -> Self {
        Self::new([-1.0, 1.0], [0.6, 1.0], [0.35, 0.35]).expect("default bumps are valid")
    }
}

impl BumpsBandit {
    pub fn new(centers: [f64; 2], heights: [f64; 2], widths: [f64; 2]) -> Result<Self> {
        if !(heights[0] > 0.0 && heights[1] > heights[0]) {
            return Err(Error::Config(format!("bump heights must satisfy 0 < h1 < h2, got {heights:?}")));
        }
        if widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Config("bump widths must be positive".into()));
        }
        Ok(Self {
            centers,
            heights,
            widths,
            spec: EnvSpec {
                obs_dim: 1,
                action_dim: 1,
                action_bounds: vec![(-10.0, 10.0)],
                horizon: 1,
                discount_hint: 0.0,
            },
        })
    }

    /// The worse mode.
    pub fn local_mode(&self) -> f64 {
        self.centers[0]
    }

    /// Stationary point of the reward nearest the worse mode. The other
    /// bump's tail shifts it slightly off the worse center.
    pub fn local_optimum(&self) -> f64 {
        let mut a = self.centers[0];
        for _ in 0..20 {
            let step = self.reward_derivative(a) / self.reward_second_derivative(a);
            a -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        a
    }

    /// The better mode.
    pub fn global_mode(&self) -> f64 {
        self.centers[1]
    }

    pub fn reward(&self, a: f64) -> f64 {
        (0..2)
            .map(|i| {
                let d = a - self.centers[i];
                self.heights[i] * (-d * d / (2.0 * self.widths[i] * self.widths[i])).exp()
            })
            .sum()
    }

    pub fn reward_derivative(&self, a: f64) -> f64 {
        (0..2)
            .map(|i| {
                let w2 = self.widths[i] * self.widths[i];
                let d = a - self.centers[i];
                -self.heights[i] * d / w2 * (-d * d / (2.0 * w2)).exp()
            })
            .sum()
    }

    pub fn reward_second_derivative(&self, a: f64) -> f64 {
        (0..2)
            .map(|i| {
                let w2 = self.widths[i] * self.widths[i];
                let d = a - self.centers[i];
                self.heights[i] * (d * d / (w2 * w2) - 1.0 / w2) * (-d * d / (2.0 * w2)).exp()
            })
            .sum()
    }

    /// Closed-form Gaussian smoothing of the reward: each bump convolved
    /// with `N(0, variance)` is again a Gaussian bump.
    pub fn smoothed_reward(&self, a: f64, variance: f64) -> f64 {
        (0..2)
            .map(|i| {
                let s2 = self.widths[i] * self.widths[i] + variance;
                let d = a - self.centers[i];
                self.heights[i] * self.widths[i] / s2.sqrt() * (-d * d / (2.0 * s2)).exp()
            })
            .sum()
    }
}

impl Environment for BumpsBandit {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _rng: &mut SeededRng) -> Vec<f64> {
        vec![0.0]
    }

    fn step(&mut self, action: &[f64], _rng: &mut SeededRng) -> Result<StepResult> {
        let a = self.spec.clip_action(action)?;
        Ok(StepResult { reward: self.reward(a[0]), next_observation: vec![0.0], done: true })
    }
}

/// Point mass in the plane with linear drag, driven toward a fixed goal.
///
/// Observation is `[px, py, vx, vy]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PointMass {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub goal: [f64; 2],
    pub drag: f64,
    pub dt: f64,
    t: usize,
    spec: EnvSpec,
}

impl Default for PointMass {
    fn default() -> Self {
        Self::new([0.7, 0.7], 0.5, 0.05, 100)
    }
}

impl PointMass {
    pub fn new(goal: [f64; 2], drag: f64, dt: f64, horizon: usize) -> Self {
        Self {
            position: [0.0; 2],
            velocity: [0.0; 2],
            goal,
            drag,
            dt,
            t: 0,
            spec: EnvSpec {
                obs_dim: 4,
                action_dim: 2,
                action_bounds: vec![(-1.0, 1.0); 2],
                horizon,
                discount_hint: 0.995,
            },
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        vec![self.position[0], self.position[1], self.velocity[0], self.velocity[1]]
    }

    /// Places the mass at an explicit state (tests and evaluation).
    pub fn set_state(&mut self, position: [f64; 2], velocity: [f64; 2]) {
        self.position = position;
        self.velocity = velocity;
        self.t = 0;
    }
}

impl Environment for PointMass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut SeededRng) -> Vec<f64> {
        self.position = [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)];
        self.velocity = [0.0; 2];
        self.t = 0;
        self.observation()
    }

    fn step(&mut self, action: &[f64], _rng: &mut SeededRng) -> Result<StepResult> {
        let a = self.spec.clip_action(action)?;
        let mut reward = 0.0;
        for i in 0..2 {
            self.position[i] += self.velocity[i] * self.dt;
            self.velocity[i] += (a[i] - self.drag * self.velocity[i]) * self.dt;
            let d = self.position[i] - self.goal[i];
            reward -= d * d + 0.01 * a[i] * a[i];
        }
        self.t += 1;
        Ok(StepResult { reward, next_observation: self.observation(), done: self.t >= self.spec.horizon })
    }
}
