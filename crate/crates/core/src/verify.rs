//! Independent numerical oracles.
//!
//! Finite differences here only ever differentiate plain function values
//! (`forward`, quadrature results), never the analytic derivative paths they
//! certify. Shared code with the learners is limited to the quadrature and
//! density primitives in [`crate::gauss`].

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::Rng;

use crate::env::BumpsBandit;
use crate::error::{Error, Result};
use crate::gauss::{density_derivative, gh_quadrature, rule};
use crate::net::{ActionCritic, Activation, DerivNet, NetShape};
use crate::replay::Transition;
use crate::smoothie::SmoothiePolicy;
use crate::train_log::format_sig9;
use crate::{seeded_rng, SeededRng};

/// Central-difference step sizes, scaled by `max(1, |x|)` at the point of use.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdSteps {
    pub first: f64,
    pub second: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        Self { first: 1e-4, second: 3e-3 }
    }
}

fn scaled(h: f64, x: f64) -> f64 {
    h * x.abs().max(1.0)
}

/// Quadrature accuracy guard: the `order` result must agree with the
/// `2 * order` result to this relative tolerance.
const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub max_abs: f64,
    pub max_rel: f64,
    pub tol: f64,
    /// Whether `tol` bounds `max_rel` rather than `max_abs`.
    pub relative: bool,
    pub samples: usize,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, tol: f64, relative: bool) -> Self {
        Self { name: name.into(), max_abs: 0.0, max_rel: 0.0, tol, relative, samples: 0, pass: true }
    }

    /// Records one residual. Non-finite residuals fail the report.
    pub fn record(&mut self, abs: f64, rel: f64) {
        self.samples += 1;
        if abs.is_finite() && rel.is_finite() {
            self.max_abs = self.max_abs.max(abs);
            self.max_rel = self.max_rel.max(rel);
        } else {
            self.max_abs = f64::INFINITY;
            self.max_rel = f64::INFINITY;
        }
        let bound = if self.relative { self.max_rel } else { self.max_abs };
        self.pass = bound <= self.tol;
    }

    /// Records `|got - want|` with relative error floored at unit scale.
    pub fn compare(&mut self, got: f64, want: f64) {
        let abs = (got - want).abs();
        self.record(abs, abs / want.abs().max(got.abs()).max(1.0));
    }

    pub fn merge(&mut self, other: &OracleReport) {
        self.samples += other.samples;
        self.max_abs = self.max_abs.max(other.max_abs);
        self.max_rel = self.max_rel.max(other.max_rel);
        let bound = if self.relative { self.max_rel } else { self.max_abs };
        self.pass = bound <= self.tol;
    }

    /// `name,max_abs,max_rel,tol,pass`.
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.name,
            format_sig9(self.max_abs),
            format_sig9(self.max_rel),
            format_sig9(self.tol),
            self.pass
        )
    }
}

/// Gaussian expectation at `order`, rejected unless it has converged.
fn converged_expect<F: Fn(f64) -> f64>(f: &F, center: f64, variance: f64, order: usize) -> Result<f64> {
    let lo = rule(order)?.expect(f, center, variance)?;
    let hi = rule(2 * order)?.expect(f, center, variance)?;
    if (lo - hi).abs() > CONVERGENCE_TOL * hi.abs().max(1.0) {
        return Err(Error::Oracle(format!(
            "quadrature not converged at center {center}, variance {variance}: {lo} vs {hi}"
        )));
    }
    Ok(lo)
}

/// Smoothed values `E[reward(a + sigma * z)]` on `grid`, `z ~ N(0, 1)`.
pub fn smoothed_landscape<F: Fn(f64) -> f64>(reward: F, sigma: f64, grid: &[f64], order: usize) -> Result<Vec<f64>> {
    if order < 64 {
        return Err(Error::contract("landscape quadrature needs order of at least 64"));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::contract(format!("grid point {x} is not finite")));
    }
    let r = rule(order)?;
    grid.iter().map(|&a| r.expect(&reward, a, sigma * sigma)).collect()
}

/// Compares `dQ~/d(sigma^2)` with `1/2 d^2 Q~/da^2` for the 1-D smoothing of
/// `q`, both by central differences of quadrature values.
pub fn check_theorem1<F: Fn(f64) -> f64>(q: F, a: f64, variance: f64, order: usize, fd: FdSteps) -> Result<OracleReport> {
    let hv = scaled(fd.first, variance);
    let ha = scaled(fd.second, a);
    if variance <= hv {
        return Err(Error::contract(format!("variance {variance} too small for step {hv}")));
    }
    let s = |a: f64, v: f64| converged_expect(&q, a, v, order);
    let lhs = (s(a, variance + hv)? - s(a, variance - hv)?) / (2.0 * hv);
    let rhs = 0.5 * (s(a + ha, variance)? - 2.0 * s(a, variance)? + s(a - ha, variance)?) / (ha * ha);
    let mut report = OracleReport::new("covariance_identity", 1e-4, false);
    let abs = (lhs - rhs).abs();
    let scale = lhs.abs().max(rhs.abs());
    report.record(abs, if scale > 0.0 { abs / scale } else { 0.0 });
    Ok(report)
}

/// Per-coordinate check of the same identity for a 2-D diagonal smoothing.
pub fn check_covariance_identity_2d<F: Fn(f64, f64) -> f64>(
    q: F,
    a: [f64; 2],
    variance: [f64; 2],
    order: usize,
    fd: FdSteps,
) -> Result<OracleReport> {
    let lo = rule(order)?;
    let hi = rule(2 * order)?;
    let s = |a: [f64; 2], v: [f64; 2]| -> Result<f64> {
        let x = lo.expect_2d(&q, a, v)?;
        let y = hi.expect_2d(&q, a, v)?;
        if (x - y).abs() > CONVERGENCE_TOL * y.abs().max(1.0) {
            return Err(Error::Oracle(format!("2-D quadrature not converged at {a:?}, {v:?}")));
        }
        Ok(x)
    };
    let mut report = OracleReport::new("covariance_identity_2d", 1e-4, false);
    for i in 0..2 {
        let hv = scaled(fd.first, variance[i]);
        let ha = scaled(fd.second, a[i]);
        let (mut vp, mut vm, mut ap, mut am) = (variance, variance, a, a);
        vp[i] += hv;
        vm[i] -= hv;
        ap[i] += ha;
        am[i] -= ha;
        let lhs = (s(a, vp)? - s(a, vm)?) / (2.0 * hv);
        let rhs = 0.5 * (s(ap, variance)? - 2.0 * s(a, variance)? + s(am, variance)?) / (ha * ha);
        let abs = (lhs - rhs).abs();
        let scale = lhs.abs().max(rhs.abs());
        report.record(abs, if scale > 0.0 { abs / scale } else { 0.0 });
    }
    Ok(report)
}

/// Covariance-identity residuals at `points` uniform draws of `a` in `[-2, 2]` and
/// `sigma^2` in `[0.1, 1.0]`.
pub fn covariance_identity_suite(env: &BumpsBandit, points: usize, rng: &mut SeededRng, order: usize, fd: FdSteps) -> Result<OracleReport> {
    let mut report = OracleReport::new("covariance_identity_bumps", 1e-4, false);
    for _ in 0..points {
        let a = rng.random_range(-2.0..=2.0);
        let v = rng.random_range(0.1..=1.0);
        report.merge(&check_theorem1(|x| env.reward(x), a, v, order, fd)?);
    }
    Ok(report)
}

/// A small MDP with a fixed Gaussian policy whose smoothed Bellman targets
/// are computable exactly. Actions are 1-D and states are indexed.
pub trait BellmanOracle {
    fn num_states(&self) -> usize;

    /// Policy variance at state `s`.
    fn variance(&self, s: usize) -> f64;

    /// `E_{s'}[ r(s, a~) + gamma (1 - done) Q~(s', mu(s')) ]`.
    fn target(&self, s: usize, a_tilde: f64) -> f64;

    /// Exact smoothed action value by quadrature of the target.
    fn smoothed_q(&self, s: usize, a: f64, order: usize) -> Result<f64> {
        gh_quadrature(|x| self.target(s, x), a, self.variance(s), order)
    }
}

/// The two-bump bandit as a single-state, single-step MDP.
#[derive(Clone, Debug)]
pub struct BanditOracle {
    pub env: BumpsBandit,
    pub variance: f64,
}

impl BellmanOracle for BanditOracle {
    fn num_states(&self) -> usize {
        1
    }

    fn variance(&self, _s: usize) -> f64 {
        self.variance
    }

    fn target(&self, _s: usize, a_tilde: f64) -> f64 {
        self.env.reward(a_tilde)
    }
}

/// Residual of the `k`-th derivative Bellman equation at `(s, a)`:
/// `d^k Q~/da^k` of `candidate` by central differences against
/// `int d^k N(a~ | a, Sigma)/da^k target(s, a~) da~` by quadrature.
pub fn derivative_bellman_residual<O, C>(
    k: u32,
    oracle: &O,
    candidate: C,
    s: usize,
    a: f64,
    order: usize,
    fd: FdSteps,
) -> Result<OracleReport>
where
    O: BellmanOracle + ?Sized,
    C: Fn(usize, f64) -> f64,
{
    if k > 2 {
        return Err(Error::UnsupportedOrder(k));
    }
    let var = oracle.variance(s);
    let weight = |x: f64| -> f64 {
        let dk = density_derivative(k, &[x], &[a], &[var]).expect("validated 1-D inputs");
        let n = density_derivative(0, &[x], &[a], &[var]).expect("validated 1-D inputs");
        dk.as_slice()[0] / n.as_slice()[0]
    };
    if !(var > 0.0) {
        return Err(Error::contract("oracle variance must be positive"));
    }
    let rhs = converged_expect(&|x| weight(x) * oracle.target(s, x), a, var, order)?;
    let lhs = match k {
        0 => candidate(s, a),
        1 => {
            let h = scaled(fd.first, a);
            (candidate(s, a + h) - candidate(s, a - h)) / (2.0 * h)
        }
        _ => {
            let h = scaled(fd.second, a);
            (candidate(s, a + h) - 2.0 * candidate(s, a) + candidate(s, a - h)) / (h * h)
        }
    };
    let mut report = OracleReport::new(format!("derivative_bellman_k{k}"), 1e-5, false);
    report.compare(lhs, rhs);
    Ok(report)
}

/// Derivative Bellman residuals for `k` on every state at each action in
/// `actions`, with the exact smoothed values as the candidate.
pub fn derivative_bellman_suite<O: BellmanOracle + ?Sized>(
    name: &str,
    oracle: &O,
    k: u32,
    actions: &[f64],
    order: usize,
    fd: FdSteps,
) -> Result<OracleReport> {
    let mut report = OracleReport::new(format!("{name}_k{k}"), 1e-5, false);
    let candidate = |s: usize, a: f64| oracle.smoothed_q(s, a, order).expect("finite targets");
    for s in 0..oracle.num_states() {
        for &a in actions {
            report.merge(&derivative_bellman_residual(k, oracle, candidate, s, a, order, fd)?);
        }
    }
    Ok(report)
}

/// Two-state continuing MDP with a fixed Gaussian policy and exact values.
///
/// Observations are one-hot. From state `s` with action `a`, the next state
/// is 1 with probability `sigmoid(2 a + b_s)`, and the reward is
/// `0.5 exp(-(a - c_s)^2 / 2)`.
#[derive(Clone, Debug)]
pub struct TwoStateChain {
    pub means: [f64; 2],
    pub variance: f64,
    pub gamma: f64,
    pub bias: [f64; 2],
    pub reward_centers: [f64; 2],
    values: [f64; 2],
}

impl TwoStateChain {
    pub fn new(order: usize) -> Result<Self> {
        let mut chain = Self {
            means: [-0.5, 0.5],
            variance: 0.25,
            gamma: 0.5,
            bias: [-0.5, 0.5],
            reward_centers: [1.0, -1.0],
            values: [0.0; 2],
        };
        chain.values = chain.solve_values(order)?;
        Ok(chain)
    }

    pub fn reward(&self, s: usize, a: f64) -> f64 {
        let d = a - self.reward_centers[s];
        0.5 * (-0.5 * d * d).exp()
    }

    pub fn prob_next_one(&self, s: usize, a: f64) -> f64 {
        1.0 / (1.0 + (-(2.0 * a + self.bias[s])).exp())
    }

    /// `V(s) = Q~(s, mu(s))` from `(I - gamma P) V = R`, with `R` and `P`
    /// the policy-averaged rewards and transition matrix.
    fn solve_values(&self, order: usize) -> Result<[f64; 2]> {
        let mut r = Vector2::zeros();
        let mut p = Matrix2::zeros();
        for s in 0..2 {
            r[s] = gh_quadrature(|a| self.reward(s, a), self.means[s], self.variance, order)?;
            let p1 = gh_quadrature(|a| self.prob_next_one(s, a), self.means[s], self.variance, order)?;
            p[(s, 0)] = 1.0 - p1;
            p[(s, 1)] = p1;
        }
        let m = Matrix2::identity() - self.gamma * p;
        let v = m.lu().solve(&r).ok_or_else(|| Error::Numerical("singular chain system".into()))?;
        Ok([v[0], v[1]])
    }

    pub fn value(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn observation(s: usize) -> Vec<f64> {
        let mut o = vec![0.0; 2];
        o[s] = 1.0;
        o
    }

    pub fn state_index(obs: &[f64]) -> usize {
        usize::from(obs[1] > obs[0])
    }

    /// Samples the next state for a stored action and returns the unscaled
    /// transition.
    pub fn sample_transition(&self, s: usize, a_tilde: f64, rng: &mut SeededRng) -> Transition {
        let next = usize::from(rng.random::<f64>() < self.prob_next_one(s, a_tilde));
        Transition {
            state: Self::observation(s),
            action: vec![a_tilde],
            reward: self.reward(s, a_tilde),
            next_state: Self::observation(next),
            done: false,
            behavior_log_density: None,
        }
    }

    /// The fixed policy as a linear mean network on one-hot observations.
    pub fn policy(&self) -> Result<SmoothiePolicy> {
        let shape = NetShape::mlp(2, &[], Activation::Identity, 1, Activation::Identity);
        let mut net = DerivNet::zeros(&shape)?;
        net.set_params(&[self.means[0], self.means[1], 0.0])?;
        SmoothiePolicy::new(net, self.variance.ln())
    }
}

impl BellmanOracle for TwoStateChain {
    fn num_states(&self) -> usize {
        2
    }

    fn variance(&self, _s: usize) -> f64 {
        self.variance
    }

    fn target(&self, s: usize, a_tilde: f64) -> f64 {
        let p1 = self.prob_next_one(s, a_tilde);
        self.reward(s, a_tilde) + self.gamma * ((1.0 - p1) * self.values[0] + p1 * self.values[1])
    }
}

/// Rows of `d mu / d theta` at `state`, one per action dimension.
pub fn mean_jacobian(net: &DerivNet, state: &[f64]) -> Result<Vec<Vec<f64>>> {
    let d = net.output_dim();
    (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            net.param_gradient(state, &[], &e)
        })
        .collect()
}

/// `Q~_w(s, a) = w0 . [s, 1] + (a - mu)^T J w1 + 1/2 (a - mu)^T diag(w2 * exp(phi)) (a - mu)`,
/// the critic compatible with the policy's mean and covariance parameters.
#[derive(Clone, Debug)]
pub struct CompatibleCritic<'a> {
    pub policy: &'a SmoothiePolicy,
    pub w0: Vec<f64>,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
}

impl CompatibleCritic<'_> {
    pub fn value(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let mu = self.policy.mean(state)?;
        let jac = mean_jacobian(&self.policy.mean_net, state)?;
        let var = self.policy.variance();
        let mut v = self.w0[state.len()];
        v += state.iter().zip(&self.w0).map(|(s, w)| s * w).sum::<f64>();
        for i in 0..mu.len() {
            let d = action[i] - mu[i];
            let jw: f64 = jac[i].iter().zip(&self.w1).map(|(j, w)| j * w).sum();
            v += d * jw + 0.5 * d * d * self.w2[i] * var[i];
        }
        Ok(v)
    }
}

/// Condition 1 for the compatible critic: its action gradient at the mean is
/// `J w1`, and its action Hessian there is `diag(w2 * exp(phi))`. Both sides
/// by central differences with step 0.5, which are exact on quadratics.
pub fn compatible_critic_check(critic: &CompatibleCritic<'_>, states: &[Vec<f64>]) -> Result<[OracleReport; 2]> {
    let h = 0.5;
    let var = critic.policy.variance();
    let mut grad_report = OracleReport::new("compatible_gradient", 1e-12, true);
    let mut hess_report = OracleReport::new("compatible_hessian", 1e-12, true);
    for s in states {
        let mu = critic.policy.mean(s)?;
        let jac = mean_jacobian(&critic.policy.mean_net, s)?;
        let d = mu.len();
        let at = |offsets: &[(usize, f64)]| -> Result<f64> {
            let mut a = mu.clone();
            for &(i, o) in offsets {
                a[i] += o;
            }
            critic.value(s, &a)
        };
        for i in 0..d {
            let fd = (at(&[(i, h)])? - at(&[(i, -h)])?) / (2.0 * h);
            let want: f64 = jac[i].iter().zip(&critic.w1).map(|(j, w)| j * w).sum();
            grad_report.compare(fd, want);
            for j in 0..d {
                let fd2 = if i == j {
                    (at(&[(i, h)])? - 2.0 * at(&[])? + at(&[(i, -h)])?) / (h * h)
                } else {
                    (at(&[(i, h), (j, h)])? - at(&[(i, h), (j, -h)])? - at(&[(i, -h), (j, h)])?
                        + at(&[(i, -h), (j, -h)])?)
                        / (4.0 * h * h)
                };
                let want = if i == j { critic.w2[i] * var[i] } else { 0.0 };
                hess_report.compare(fd2, want);
            }
        }
    }
    Ok([grad_report, hess_report])
}

/// Compatible weights closest to `reference` in squared action-gradient and
/// action-Hessian-diagonal error over `states`, with a first-order
/// stationarity report for both fits.
pub fn compatible_least_squares<C: ActionCritic + ?Sized>(
    policy: &SmoothiePolicy,
    reference: &C,
    states: &[Vec<f64>],
) -> Result<(Vec<f64>, Vec<f64>, OracleReport)> {
    let d = policy.action_dim();
    let p = policy.mean_net.num_params();
    let rows = states.len() * d;
    let mut jm = DMatrix::zeros(rows, p);
    let mut g = DVector::zeros(rows);
    let mut h_sum = vec![0.0; d];
    for (k, s) in states.iter().enumerate() {
        let mu = policy.mean(s)?;
        let jac = mean_jacobian(&policy.mean_net, s)?;
        let derivs = reference.action_derivs(s, &mu);
        for i in 0..d {
            for (c, v) in jac[i].iter().enumerate() {
                jm[(k * d + i, c)] = *v;
            }
            g[k * d + i] = derivs.gradient[i];
            h_sum[i] += derivs.hessian[i * d + i];
        }
    }
    let w1 = jm
        .clone()
        .svd(true, true)
        .solve(&g, 1e-12)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
    let var = policy.variance();
    let n = states.len() as f64;
    let w2: Vec<f64> = (0..d).map(|i| h_sum[i] / n / var[i]).collect();

    // Gradients of the two squared errors with respect to w1 and w2.
    let mut report = OracleReport::new("compatible_stationarity", 1e-9, true);
    let stationarity = jm.transpose() * (&jm * &w1 - &g);
    let scale = (jm.transpose() * &g).amax().max(1.0);
    report.record(stationarity.amax(), stationarity.amax() / scale);
    for i in 0..d {
        let mut grad = 0.0;
        for s in states {
            let mu = policy.mean(s)?;
            let h_ii = reference.action_derivs(s, &mu).hessian[i * d + i];
            grad += 2.0 * (w2[i] * var[i] - h_ii) * var[i];
        }
        let scale = (h_sum[i] * var[i]).abs().max(1.0);
        report.record(grad.abs(), grad.abs() / scale);
    }
    Ok((w1.iter().copied().collect(), w2, report))
}

/// Action Jacobian and Hessian from forward-mode propagation against central
/// differences of `forward`, at `trials` random inputs in `[-1, 1]`.
pub fn check_grad_hessian_fd(net: &DerivNet, trials: usize, rng: &mut SeededRng, fd: FdSteps) -> Result<[OracleReport; 2]> {
    let mut jac_report = OracleReport::new("action_jacobian_fd", 1e-5, true);
    let mut hess_report = OracleReport::new("action_hessian_fd", 1e-4, true);
    let (ds, da, out) = (net.state_dim(), net.action_dim(), net.output_dim());
    for _ in 0..trials {
        let s: Vec<f64> = (0..ds).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let a: Vec<f64> = (0..da).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let t = net.forward_with_action_derivs(&s, &a)?;
        let f = |offsets: &[(usize, f64)]| -> Result<Vec<f64>> {
            let mut x = a.clone();
            for &(i, o) in offsets {
                x[i] += o;
            }
            net.forward(&s, &x)
        };
        let f0 = f(&[])?;
        for i in 0..da {
            let h = scaled(fd.first, a[i]);
            let (p, m) = (f(&[(i, h)])?, f(&[(i, -h)])?);
            for o in 0..out {
                jac_report.compare((p[o] - m[o]) / (2.0 * h), t.jacobian_row(o)[i]);
            }
            let hi = scaled(fd.second, a[i]);
            for j in 0..da {
                let hj = scaled(fd.second, a[j]);
                let est: Vec<f64> = if i == j {
                    let (p, m) = (f(&[(i, hi)])?, f(&[(i, -hi)])?);
                    (0..out).map(|o| (p[o] - 2.0 * f0[o] + m[o]) / (hi * hi)).collect()
                } else {
                    let pp = f(&[(i, hi), (j, hj)])?;
                    let pm = f(&[(i, hi), (j, -hj)])?;
                    let mp = f(&[(i, -hi), (j, hj)])?;
                    let mm = f(&[(i, -hi), (j, -hj)])?;
                    (0..out).map(|o| (pp[o] - pm[o] - mp[o] + mm[o]) / (4.0 * hi * hj)).collect()
                };
                for o in 0..out {
                    hess_report.compare(est[o], t.hessian_block(o)[i * da + j]);
                }
            }
        }
    }
    Ok([jac_report, hess_report])
}

/// Every oracle at its stated tolerance. Deterministic for a given seed.
pub fn default_suite(seed: u64) -> Result<Vec<OracleReport>> {
    let fd = FdSteps::default();
    let order = 64;
    let mut rng = seeded_rng(seed);
    let env = BumpsBandit::default();
    let mut reports = vec![covariance_identity_suite(&env, 50, &mut rng, order, fd)?];

    let mut t2 = OracleReport::new("covariance_identity_2d", 1e-4, false);
    let q2 = |x: f64, y: f64| env.reward(x) * (1.0 + 0.5 * (-(y - 0.3) * (y - 0.3)).exp());
    for _ in 0..10 {
        let a = [rng.random_range(-2.0..=2.0), rng.random_range(-2.0..=2.0)];
        let v = [rng.random_range(0.1..=1.0), rng.random_range(0.1..=1.0)];
        t2.merge(&check_covariance_identity_2d(q2, a, v, order, fd)?);
    }
    reports.push(t2);

    let grid: Vec<f64> = (0..=20).map(|i| -2.0 + 0.2 * i as f64).collect();
    let bandit = BanditOracle { env: env.clone(), variance: 0.5 };
    let chain = TwoStateChain::new(order)?;
    for k in 0..=2 {
        reports.push(derivative_bellman_suite("bandit_derivative_bellman", &bandit, k, &grid, order, fd)?);
    }
    for k in 0..=2 {
        reports.push(derivative_bellman_suite("chain_derivative_bellman", &chain, k, &grid, order, fd)?);
    }
    let mut consistency = OracleReport::new("chain_value_consistency", 1e-10, false);
    for s in 0..2 {
        consistency.compare(chain.smoothed_q(s, chain.means[s], order)?, chain.value(s));
    }
    reports.push(consistency);

    let policy = SmoothiePolicy::new(
        DerivNet::new(&NetShape::mlp(3, &[8], Activation::Tanh, 2, Activation::Identity), &mut rng)?,
        -0.7,
    )?;
    let p = policy.mean_net.num_params();
    let critic = CompatibleCritic {
        policy: &policy,
        w0: (0..4).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        w1: (0..p).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        w2: (0..2).map(|_| rng.random_range(-1.0..=1.0)).collect(),
    };
    let states: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect()).collect();
    reports.extend(compatible_critic_check(&critic, &states)?);
    let reference = DerivNet::new(&NetShape::embed_concat_critic(3, 2, 8, 8), &mut rng)?;
    reports.push(compatible_least_squares(&policy, &reference, &states)?.2);

    let cfg = crate::TrainerConfig::default();
    let shape = NetShape::embed_concat_critic(4, 2, cfg.critic_embed, cfg.critic_hidden);
    let net = DerivNet::new(&shape, &mut rng)?;
    reports.extend(check_grad_hessian_fd(&net, 100, &mut rng, fd)?);
    Ok(reports)
}
