//! Diagonal Gaussians and Gauss–Hermite quadrature.
//!
//! Covariances are always diagonal and parameterized by per-dimension
//! log-variance, so `Sigma_ii = exp(log_var_i)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A Gaussian with diagonal covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    log_var: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        if mean.len() != log_var.len() {
            return Err(Error::dims("log_var", mean.len(), log_var.len()));
        }
        if mean.is_empty() {
            return Err(Error::contract("gaussian must have at least one dimension"));
        }
        if let Some(lv) = log_var.iter().find(|lv| !(lv.exp() > 0.0 && lv.exp().is_finite())) {
            return Err(Error::contract(format!("variance exp({lv}) is not finite and positive")));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::contract("gaussian mean is not finite"));
        }
        Ok(Self { mean, log_var })
    }

    /// Builds from variances rather than log-variances.
    pub fn from_variance(mean: Vec<f64>, variance: &[f64]) -> Result<Self> {
        Self::new(mean, variance.iter().map(|v| v.ln()).collect())
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], log_var: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn log_var(&self) -> &[f64] {
        &self.log_var
    }

    pub fn variance(&self) -> Vec<f64> {
        self.log_var.iter().map(|lv| lv.exp()).collect()
    }

    pub fn std_dev(&self) -> Vec<f64> {
        self.log_var.iter().map(|lv| (0.5 * lv).exp()).collect()
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::dims("density argument", self.dim(), x.len()));
        }
        let mut acc = 0.0;
        for ((xi, mi), lv) in x.iter().zip(&self.mean).zip(&self.log_var) {
            let d = xi - mi;
            acc += -0.5 * (LN_2PI + lv + d * d * (-lv).exp());
        }
        Ok(acc)
    }

    pub fn density(&self, x: &[f64]) -> Result<f64> {
        self.log_density(x).map(f64::exp)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_var)
            .map(|(m, lv)| {
                let eps: f64 = rng.sample(StandardNormal);
                m + (0.5 * lv).exp() * eps
            })
            .collect()
    }
}

/// `KL(p || q)` for diagonal Gaussians, in closed form.
pub fn kl_divergence(p: &DiagGaussian, q: &DiagGaussian) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::dims("kl_divergence", p.dim(), q.dim()));
    }
    Ok(kl_terms(&p.mean, &p.log_var, &q.mean, &q.log_var))
}

/// Closed-form KL on raw slices; shared by the policy update, which needs it
/// in the inner loop without constructing distributions.
pub(crate) fn kl_terms(mp: &[f64], lp: &[f64], mq: &[f64], lq: &[f64]) -> f64 {
    let mut kl = 0.0;
    for i in 0..mp.len() {
        let d = mp[i] - mq[i];
        kl += 0.5 * ((lp[i] - lq[i]).exp() + d * d * (-lq[i]).exp() - 1.0 + lq[i] - lp[i]);
    }
    kl
}

/// Gauss–Hermite nodes and weights for the weight function `exp(-x^2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Computes an `order`-point rule by Newton iteration on the orthonormal
    /// Hermite recurrence. Exact for polynomials of degree `2 * order - 1`.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::contract("quadrature order must be at least 1"));
        }
        let n = order;
        let nf = n as f64;
        let pim4 = PI.powf(-0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z: f64 = 0.0;
        for i in 0..(n + 1) / 2 {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut converged = false;
            let mut pp = 0.0;
            for _ in 0..100 {
                let (p1, p2) = hermite_orthonormal(n, z, pim4);
                pp = (2.0 * nf).sqrt() * p2;
                let dz = p1 / pp;
                z -= dz;
                if dz.abs() <= 1e-15 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Numerical(format!("Hermite root {i} of order {n} did not converge")));
            }
            // One more evaluation at the converged root for the weight.
            let (_, p2) = hermite_orthonormal(n, z, pim4);
            pp = if p2 != 0.0 { (2.0 * nf).sqrt() * p2 } else { pp };
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            let w = 2.0 / (pp * pp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        // Largest root first; flip to ascending order.
        nodes.reverse();
        weights.reverse();
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(X)]` for `X ~ N(center, variance)`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F, center: f64, variance: f64) -> Result<f64> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::contract(format!("quadrature variance must be positive, got {variance}")));
        }
        let scale = (2.0 * variance).sqrt();
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let fx = f(center + scale * x);
            if !fx.is_finite() {
                return Err(Error::Numerical(format!("integrand is {fx} at {}", center + scale * x)));
            }
            acc += w * fx;
        }
        Ok(acc / PI.sqrt())
    }

    /// Tensor-product expectation over a 2-D diagonal Gaussian.
    pub fn expect_2d<F: FnMut(f64, f64) -> f64>(
        &self,
        mut f: F,
        center: [f64; 2],
        variance: [f64; 2],
    ) -> Result<f64> {
        if variance.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::contract("quadrature variances must be positive"));
        }
        let s0 = (2.0 * variance[0]).sqrt();
        let s1 = (2.0 * variance[1]).sqrt();
        let mut acc = 0.0;
        for (x0, w0) in self.nodes.iter().zip(&self.weights) {
            let mut inner = 0.0;
            for (x1, w1) in self.nodes.iter().zip(&self.weights) {
                let fx = f(center[0] + s0 * x0, center[1] + s1 * x1);
                if !fx.is_finite() {
                    return Err(Error::Numerical("2-D integrand is not finite".into()));
                }
                inner += w1 * fx;
            }
            acc += w0 * inner;
        }
        Ok(acc / PI)
    }
}

/// Returns `(p_n(z), p_{n-1}(z))` of the orthonormal Hermite family.
fn hermite_orthonormal(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

/// Cached rule of the given order.
pub fn rule(order: usize) -> Result<Arc<QuadratureRule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadratureRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().expect("quadrature cache poisoned").get(&order) {
        return Ok(Arc::clone(r));
    }
    let r = Arc::new(QuadratureRule::new(order)?);
    cache
        .lock()
        .expect("quadrature cache poisoned")
        .insert(order, Arc::clone(&r));
    Ok(r)
}

/// `E[f(X)]` for `X ~ N(center, variance)` with an `order`-point rule.
pub fn gh_quadrature<F: FnMut(f64) -> f64>(f: F, center: f64, variance: f64, order: usize) -> Result<f64> {
    rule(order)?.expect(f, center, variance)
}

/// Derivative of `N(x | a, Sigma)` with respect to the mean `a`.
#[derive(Clone, Debug, PartialEq)]
pub enum DensityDerivative {
    Value(f64),
    Gradient(Vec<f64>),
    /// Row-major `d x d`.
    Hessian(Vec<f64>),
}

impl DensityDerivative {
    pub fn as_value(&self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        match self {
            Self::Value(v) => std::slice::from_ref(v),
            Self::Gradient(g) => g,
            Self::Hessian(h) => h,
        }
    }
}

/// `d^k N(x | a, diag(variance)) / d a^k` for `k` in `{0, 1, 2}`.
///
/// `k = 1` gives `N * Sigma^-1 (x - a)`, `k = 2` gives
/// `N * (Sigma^-1 (x - a)(x - a)^T Sigma^-1 - Sigma^-1)`.
pub fn density_derivative(k: u32, x: &[f64], a: &[f64], variance: &[f64]) -> Result<DensityDerivative> {
    if k > 2 {
        return Err(Error::UnsupportedOrder(k));
    }
    let d = a.len();
    if x.len() != d {
        return Err(Error::dims("density_derivative x", d, x.len()));
    }
    if variance.len() != d {
        return Err(Error::dims("density_derivative variance", d, variance.len()));
    }
    if variance.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::contract("density_derivative needs positive variances"));
    }
    let mut log_n = 0.0;
    let mut u = vec![0.0; d];
    for i in 0..d {
        let r = x[i] - a[i];
        log_n += -0.5 * (LN_2PI + variance[i].ln() + r * r / variance[i]);
        u[i] = r / variance[i];
    }
    let n = log_n.exp();
    Ok(match k {
        0 => DensityDerivative::Value(n),
        1 => DensityDerivative::Gradient(u.iter().map(|ui| n * ui).collect()),
        _ => {
            let mut h = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    let diag = if i == j { 1.0 / variance[i] } else { 0.0 };
                    h[i * d + j] = n * (u[i] * u[j] - diag);
                }
            }
            DensityDerivative::Hessian(h)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn g1(mean: f64, log_var: f64) -> DiagGaussian {
        DiagGaussian::new(vec![mean], vec![log_var]).unwrap()
    }

    #[test]
    fn density_values() {
        assert!((g1(0.0, 0.0).density(&[0.0]).unwrap() - 0.398_942_280_4).abs() < 1e-10);
        assert!((g1(0.0, 0.0).density(&[1.0]).unwrap() - 0.241_970_724_5).abs() < 1e-10);
        let g2 = DiagGaussian::standard(2);
        assert!((g2.density(&[0.0, 0.0]).unwrap() - 0.159_154_943_1).abs() < 1e-10);
        let g = DiagGaussian::new(vec![0.3, -1.0], vec![-0.4, 0.7]).unwrap();
        let x = [1.1, 0.2];
        assert!((g.log_density(&x).unwrap().exp() - g.density(&x).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        assert!(matches!(DiagGaussian::new(vec![0.0], vec![0.0, 0.0]), Err(Error::Contract(_))));
        assert!(matches!(DiagGaussian::standard(2).density(&[0.0]), Err(Error::Contract(_))));
        assert!(kl_divergence(&DiagGaussian::standard(1), &DiagGaussian::standard(2)).is_err());
        assert!(DiagGaussian::new(vec![0.0], vec![1e6]).is_err());
    }

    #[test]
    fn degenerate_sample_hits_mean() {
        let g = DiagGaussian::from_variance(vec![0.42], &[1e-30]).unwrap();
        let mut rng = seeded_rng(3);
        for _ in 0..10 {
            assert!((g.sample(&mut rng)[0] - 0.42).abs() < 1e-10);
        }
    }

    #[test]
    fn sampling_is_deterministic_and_calibrated() {
        let g = g1(0.0, 0.0);
        let mut rng = seeded_rng(11);
        let a: Vec<_> = (0..5).map(|_| g.sample(&mut rng)[0]).collect();
        let mut rng = seeded_rng(11);
        let b: Vec<_> = (0..5).map(|_| g.sample(&mut rng)[0]).collect();
        assert_eq!(a, b);

        let n = 100_000;
        let g = DiagGaussian::new(vec![1.5, -0.5], vec![0.4f64.ln(), 2.0f64.ln()]).unwrap();
        let mut rng = seeded_rng(5);
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let x = g.sample(&mut rng);
            for i in 0..2 {
                sum[i] += x[i];
                sq[i] += x[i] * x[i];
            }
        }
        for i in 0..2 {
            let var = g.variance()[i];
            let mean = sum[i] / n as f64;
            let emp_var = sq[i] / n as f64 - mean * mean;
            assert!((mean - g.mean()[i]).abs() < 3.0 * (var / n as f64).sqrt());
            // Var of the sample variance is 2 var^2 / n for a Gaussian.
            assert!((emp_var - var).abs() < 3.0 * var * (2.0 / n as f64).sqrt());
        }

        let mut rng = seeded_rng(0);
        let std_normal = DiagGaussian::standard(1);
        let mean = (0..n).map(|_| std_normal.sample(&mut rng)[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02);
    }

    #[test]
    fn kl_closed_form_values() {
        assert_eq!(kl_divergence(&g1(0.0, 0.0), &g1(0.0, 0.0)).unwrap(), 0.0);
        assert!((kl_divergence(&g1(1.0, 0.0), &g1(0.0, 0.0)).unwrap() - 0.5).abs() < 1e-15);
        let e = std::f64::consts::E;
        let kl = kl_divergence(&g1(0.0, 1.0), &g1(0.0, 0.0)).unwrap();
        assert!((kl - (e - 2.0) / 2.0).abs() < 1e-12);
        assert!((kl - 0.359_140_9).abs() < 1e-7);
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative(
            mp in prop::collection::vec(-3.0..3.0f64, 3),
            lp in prop::collection::vec(-3.0..3.0f64, 3),
            mq in prop::collection::vec(-3.0..3.0f64, 3),
            lq in prop::collection::vec(-3.0..3.0f64, 3),
        ) {
            let p = DiagGaussian::new(mp.clone(), lp.clone()).unwrap();
            let q = DiagGaussian::new(mq, lq).unwrap();
            let kl = kl_divergence(&p, &q).unwrap();
            prop_assert!(kl >= 0.0);
            if p != q {
                prop_assert!(kl > 0.0);
            }
            prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn quadrature_rule_invariants() {
        for order in [1usize, 2, 3, 4, 7, 16, 32, 64, 100, 128] {
            let r = QuadratureRule::new(order).unwrap();
            let wsum: f64 = r.weights().iter().sum();
            assert!((wsum - PI.sqrt()).abs() < 1e-12, "order {order}: {wsum}");
            for (a, b) in r.nodes().iter().zip(r.nodes().iter().rev()) {
                assert!((a + b).abs() < 1e-12);
            }
            assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn quadrature_moments() {
        assert!((gh_quadrature(|_| 1.0, 3.0, 0.2, 4).unwrap() - 1.0).abs() < 1e-14);
        assert!((gh_quadrature(|x| x * x, 0.0, 1.0, 4).unwrap() - 1.0).abs() < 1e-13);
        assert!((gh_quadrature(|x| x.powi(4), 0.0, 1.0, 4).unwrap() - 3.0).abs() < 1e-12);
        // Degree 2n - 1 = 7 is exact at order 4; E[(X-c)^6] = 15 var^3.
        let v = 0.7;
        let m6 = gh_quadrature(|x| (x - 1.0).powi(6) + (x - 1.0).powi(7), 1.0, v, 4).unwrap();
        assert!((m6 - 15.0 * v * v * v).abs() < 1e-12);
        let r = rule(64).unwrap();
        let ones = r.expect_2d(|_, _| 1.0, [0.1, 0.2], [0.3, 2.0]).unwrap();
        assert!((ones - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quadrature_rejects_bad_input() {
        assert!(QuadratureRule::new(0).is_err());
        assert!(gh_quadrature(|x| x, 0.0, 0.0, 4).is_err());
        assert!(matches!(gh_quadrature(|_| f64::NAN, 0.0, 1.0, 4), Err(Error::Numerical(_))));
    }

    #[test]
    fn quadrature_converges_with_order() {
        // Smooth bounded test function; order doubling beyond 32 is stable.
        let f = |x: f64| (1.3 * x).sin() / (1.0 + 0.1 * x * x) + (-x * x).exp();
        for (c, v) in [(0.0, 1.0), (0.7, 0.4), (-1.2, 2.0)] {
            let a = gh_quadrature(f, c, v, 32).unwrap();
            let b = gh_quadrature(f, c, v, 64).unwrap();
            let d = gh_quadrature(f, c, v, 128).unwrap();
            assert!((b - d).abs() < 1e-8, "{c} {v}: {b} vs {d}");
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn density_derivative_examples() {
        let g = density_derivative(1, &[0.5, -0.2], &[0.5, -0.2], &[1.0, 2.0]).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0]);
        let h = density_derivative(2, &[0.0], &[0.0], &[1.0]).unwrap();
        assert!((h.as_slice()[0] + 0.398_942_3).abs() < 1e-7);
        let g = density_derivative(1, &[1.0], &[0.0], &[1.0]).unwrap();
        assert!((g.as_slice()[0] - 0.241_970_7).abs() < 1e-7);
        assert!(matches!(density_derivative(3, &[0.0], &[0.0], &[1.0]), Err(Error::UnsupportedOrder(3))));
        let n = density_derivative(0, &[0.3], &[0.1], &[0.5]).unwrap().as_value().unwrap();
        let direct = DiagGaussian::from_variance(vec![0.1], &[0.5]).unwrap().density(&[0.3]).unwrap();
        assert!((n - direct).abs() < 1e-15);
    }

    /// Central differences in `a` of the order `k - 1` derivative.
    fn fd_in_mean(k: u32, x: &[f64], a: &[f64], var: &[f64]) -> Vec<f64> {
        let d = a.len();
        let mut out = Vec::new();
        // Row-major over (output index, perturbed coordinate).
        let base_len = density_derivative(k - 1, x, a, var).unwrap().as_slice().len();
        let mut cols = vec![vec![0.0; base_len]; d];
        for j in 0..d {
            let h = 1e-4 * a[j].abs().max(1.0);
            let mut ap = a.to_vec();
            let mut am = a.to_vec();
            ap[j] += h;
            am[j] -= h;
            let fp = density_derivative(k - 1, x, &ap, var).unwrap();
            let fm = density_derivative(k - 1, x, &am, var).unwrap();
            for (i, (p, m)) in fp.as_slice().iter().zip(fm.as_slice()).enumerate() {
                cols[j][i] = (p - m) / (2.0 * h);
            }
        }
        for i in 0..base_len {
            for col in &cols {
                out.push(col[i]);
            }
        }
        out
    }

    #[test]
    fn density_derivatives_match_finite_differences() {
        let mut rng = seeded_rng(21);
        for _ in 0..100 {
            let d = rng.random_range(1..=2usize);
            let a: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let var: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..2.0)).collect();
            let x: Vec<f64> = (0..d).map(|i| a[i] + rng.random_range(-2.0..2.0) * var[i].sqrt()).collect();
            for k in 1..=2 {
                let exact = density_derivative(k, &x, &a, &var).unwrap();
                let fd = fd_in_mean(k, &x, &a, &var);
                let scale = exact.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (e, f) in exact.as_slice().iter().zip(&fd) {
                    assert!((e - f).abs() <= 1e-6 * e.abs().max(scale), "k={k} exact {e} fd {f}");
                }
            }
        }
    }
}
