//! Feed-forward networks that carry action derivatives through the forward
//! pass.
//!
//! Alongside each layer output `O` the forward pass keeps `G = dO/da` and
//! `H = d^2 O/da^2` with respect to the designated action inputs. For an affine
//! map followed by an elementwise activation `f`:
//!
//! ```text
//! z   = W x + b          Gz = W Gx                 Hz = W Hx
//! y_i = f(z_i)           Gy_i = f'(z_i) Gz_i       Hy_i = f''(z_i) Gz_i Gz_i^T + f'(z_i) Hz_i
//! ```
//!
//! Action coordinates enter either with the state (layer 0) or by
//! concatenation at a later layer, where their `G` rows are the identity and
//! their `H` blocks are zero.

use std::io::{BufRead, Read, Write};

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// `(f'(z), f''(z))` given `z` and `y = f(z)`.
    #[inline]
    fn derivs(self, z: f64, y: f64) -> (f64, f64) {
        match self {
            Activation::Tanh => {
                let d1 = 1.0 - y * y;
                (d1, -2.0 * y * d1)
            }
            Activation::Relu => (if z > 0.0 { 1.0 } else { 0.0 }, 0.0),
            Activation::Identity => (1.0, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
}

impl Layer {
    fn param_count(&self) -> usize {
        self.inputs * self.outputs + self.outputs
    }
}

/// A fully connected network over `(state, action)` inputs.
///
/// Parameters live in one flat vector; each layer stores its weight matrix
/// row-major (`outputs x inputs`) followed by its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivNet {
    state_dim: usize,
    action_dim: usize,
    action_layer: usize,
    layers: Vec<Layer>,
    offsets: Vec<usize>,
    params: Vec<f64>,
}

/// Value, action Jacobian and action Hessian of a network output.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTriple {
    pub value: Vec<f64>,
    /// Row-major `outputs x action_dim`.
    pub action_jacobian: Vec<f64>,
    /// `outputs` blocks of row-major `action_dim x action_dim`.
    pub action_hessian: Vec<f64>,
    pub action_dim: usize,
}

impl ForwardTriple {
    pub fn jacobian_row(&self, output: usize) -> &[f64] {
        let d = self.action_dim;
        &self.action_jacobian[output * d..(output + 1) * d]
    }

    pub fn hessian_block(&self, output: usize) -> &[f64] {
        let d2 = self.action_dim * self.action_dim;
        &self.action_hessian[output * d2..(output + 1) * d2]
    }
}

/// Builder-style description of a network.
#[derive(Clone, Debug)]
pub struct NetShape {
    pub state_dim: usize,
    pub action_dim: usize,
    /// Layer whose input has the action appended.
    pub action_layer: usize,
    /// `(width, activation)` per layer, output layer last.
    pub layers: Vec<(usize, Activation)>,
}

impl NetShape {
    /// State-only network, e.g. a policy mean.
    pub fn mlp(state_dim: usize, hidden: &[usize], hidden_act: Activation, out: usize, out_act: Activation) -> Self {
        let mut layers: Vec<_> = hidden.iter().map(|&w| (w, hidden_act)).collect();
        layers.push((out, out_act));
        Self { state_dim, action_dim: 0, action_layer: 0, layers }
    }

    /// Embed the state with one tanh layer, concatenate the action, then one
    /// tanh hidden layer and a linear scalar head.
    pub fn embed_concat_critic(state_dim: usize, action_dim: usize, embed: usize, hidden: usize) -> Self {
        Self {
            state_dim,
            action_dim,
            action_layer: 1,
            layers: vec![
                (embed, Activation::Tanh),
                (hidden, Activation::Tanh),
                (1, Activation::Identity),
            ],
        }
    }
}

impl DerivNet {
    /// Builds a network with weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn new<R: Rng + ?Sized>(shape: &NetShape, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(shape)?;
        for (li, layer) in net.layers.iter().enumerate() {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            let off = net.offsets[li];
            for p in &mut net.params[off..off + layer.param_count()] {
                *p = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    /// Same architecture, all parameters zero.
    pub fn zeros(shape: &NetShape) -> Result<Self> {
        if shape.layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if shape.state_dim + shape.action_dim == 0 {
            return Err(Error::Config("network has no inputs".into()));
        }
        if shape.action_dim > 0 && shape.action_layer >= shape.layers.len() {
            return Err(Error::Config(format!(
                "action layer {} out of range for {} layers",
                shape.action_layer,
                shape.layers.len()
            )));
        }
        if shape.action_dim > 0 && shape.action_layer > 0 && shape.state_dim == 0 {
            return Err(Error::Config("late action injection needs state inputs".into()));
        }
        let action_layer = if shape.action_dim == 0 { 0 } else { shape.action_layer };
        let mut layers = Vec::with_capacity(shape.layers.len());
        let mut width = shape.state_dim;
        for (li, &(out, act)) in shape.layers.iter().enumerate() {
            if out == 0 {
                return Err(Error::Config(format!("layer {li} has zero width")));
            }
            if shape.action_dim > 0 && li >= action_layer && act == Activation::Relu {
                return Err(Error::Config(format!(
                    "layer {li} uses relu on the action Hessian path; use tanh or identity"
                )));
            }
            let inputs = width + if li == action_layer { shape.action_dim } else { 0 };
            layers.push(Layer { inputs, outputs: out, activation: act });
            width = out;
        }
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.param_count();
        }
        Ok(Self {
            state_dim: shape.state_dim,
            action_dim: shape.action_dim,
            action_layer,
            layers,
            offsets,
            params: vec![0.0; total],
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::dims("parameter vector", self.params.len(), params.len()));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Weight matrix (row-major) and bias of one layer.
    pub fn layer_params(&self, layer: usize) -> (&[f64], &[f64]) {
        let l = &self.layers[layer];
        let off = self.offsets[layer];
        let nw = l.inputs * l.outputs;
        (&self.params[off..off + nw], &self.params[off + nw..off + nw + l.outputs])
    }

    pub fn layer_params_mut(&mut self, layer: usize) -> (&mut [f64], &mut [f64]) {
        let l = self.layers[layer];
        let off = self.offsets[layer];
        let nw = l.inputs * l.outputs;
        let (w, rest) = self.params[off..off + l.param_count()].split_at_mut(nw);
        debug_assert_eq!(rest.len(), l.outputs);
        (w, rest)
    }

    /// Layer widths written to checkpoints: state width, action width, then
    /// each layer's output width.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.state_dim, self.action_dim];
        d.extend(self.layers.iter().map(|l| l.outputs));
        d
    }

    fn check_inputs(&self, state: &[f64], action: &[f64]) -> Result<()> {
        if state.len() != self.state_dim {
            return Err(Error::dims("network state input", self.state_dim, state.len()));
        }
        if action.len() != self.action_dim {
            return Err(Error::dims("network action input", self.action_dim, action.len()));
        }
        Ok(())
    }

    /// Input vector of layer `li` given the previous layer output.
    fn layer_input(&self, li: usize, prev: &[f64], action: &[f64], buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(prev);
        if li == self.action_layer {
            buf.extend_from_slice(action);
        }
    }

    /// `z = W x + b`; the single place where pre-activations are summed, so
    /// every forward variant produces bit-identical values.
    #[inline]
    fn affine(&self, li: usize, x: &[f64], z: &mut Vec<f64>) {
        let (w, b) = self.layer_params(li);
        let n = x.len();
        z.clear();
        z.extend(b.iter().enumerate().map(|(i, bi)| {
            let row = &w[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for (wij, xj) in row.iter().zip(x) {
                acc += wij * xj;
            }
            acc + bi
        }));
    }

    pub fn forward(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>> {
        self.check_inputs(state, action)?;
        Ok(self.forward_unchecked(state, action))
    }

    pub(crate) fn forward_unchecked(&self, state: &[f64], action: &[f64]) -> Vec<f64> {
        let mut y = state.to_vec();
        let mut x = Vec::new();
        let mut z = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            self.layer_input(li, &y, action, &mut x);
            self.affine(li, &x, &mut z);
            y.clear();
            y.extend(z.iter().map(|&zi| layer.activation.apply(zi)));
        }
        y
    }

    /// Forward pass propagating action Jacobian and Hessian.
    pub fn forward_with_action_derivs(&self, state: &[f64], action: &[f64]) -> Result<ForwardTriple> {
        self.check_inputs(state, action)?;
        Ok(self.forward_derivs(state, action, true))
    }

    /// Forward pass propagating only the action Jacobian; the Hessian field
    /// is left empty.
    pub fn forward_with_action_jacobian(&self, state: &[f64], action: &[f64]) -> Result<ForwardTriple> {
        self.check_inputs(state, action)?;
        Ok(self.forward_derivs(state, action, false))
    }

    fn forward_derivs(&self, state: &[f64], action: &[f64], hessian: bool) -> ForwardTriple {
        let da = self.action_dim;
        let dd = da * da;
        let mut y = state.to_vec();
        // Derivatives of `y` (rows = units). Empty while no action has entered.
        let mut gy: Vec<f64> = Vec::new();
        let mut hy: Vec<f64> = Vec::new();
        let mut live = false;
        let mut x = Vec::new();
        let mut z = Vec::new();
        let mut gx: Vec<f64> = Vec::new();
        let mut hx: Vec<f64> = Vec::new();
        for (li, layer) in self.layers.iter().enumerate() {
            self.layer_input(li, &y, action, &mut x);
            let n = x.len();
            if li == self.action_layer && da > 0 {
                // Input derivatives: previous rows (zero if not yet live) then identity.
                let prev = n - da;
                gx.clear();
                hx.clear();
                if live {
                    gx.extend_from_slice(&gy);
                    if hessian {
                        hx.extend_from_slice(&hy);
                    }
                } else {
                    gx.resize(prev * da, 0.0);
                    if hessian {
                        hx.resize(prev * dd, 0.0);
                    }
                }
                for r in 0..da {
                    for c in 0..da {
                        gx.push(if r == c { 1.0 } else { 0.0 });
                    }
                }
                if hessian {
                    hx.resize(n * dd, 0.0);
                }
                live = true;
            } else if live {
                std::mem::swap(&mut gx, &mut gy);
                std::mem::swap(&mut hx, &mut hy);
            }
            self.affine(li, &x, &mut z);
            let (w, _) = self.layer_params(li);
            y.clear();
            y.extend(z.iter().map(|&zi| layer.activation.apply(zi)));
            if !live {
                continue;
            }
            let m = layer.outputs;
            gy.clear();
            gy.resize(m * da, 0.0);
            if hessian {
                hy.clear();
                hy.resize(m * dd, 0.0);
            }
            let mut gz = vec![0.0; da];
            let mut hz = vec![0.0; dd];
            for i in 0..m {
                let row = &w[i * n..(i + 1) * n];
                gz.iter_mut().for_each(|v| *v = 0.0);
                for (j, wij) in row.iter().enumerate() {
                    if *wij == 0.0 {
                        continue;
                    }
                    let g = &gx[j * da..(j + 1) * da];
                    for (a, gv) in gz.iter_mut().zip(g) {
                        *a += wij * gv;
                    }
                }
                let (d1, d2) = layer.activation.derivs(z[i], y[i]);
                for (k, gk) in gz.iter().enumerate() {
                    gy[i * da + k] = d1 * gk;
                }
                if hessian {
                    // Upper triangle, mirrored, so the block is exactly symmetric.
                    hz.iter_mut().for_each(|v| *v = 0.0);
                    for (j, wij) in row.iter().enumerate() {
                        if *wij == 0.0 {
                            continue;
                        }
                        let h = &hx[j * dd..(j + 1) * dd];
                        for p in 0..da {
                            for q in p..da {
                                hz[p * da + q] += wij * h[p * da + q];
                            }
                        }
                    }
                    let out = &mut hy[i * dd..(i + 1) * dd];
                    for p in 0..da {
                        for q in p..da {
                            let v = d2 * gz[p] * gz[q] + d1 * hz[p * da + q];
                            out[p * da + q] = v;
                            out[q * da + p] = v;
                        }
                    }
                }
            }
        }
        let m = self.output_dim();
        if !live {
            gy = vec![0.0; m * da];
            hy = vec![0.0; if hessian { m * dd } else { 0 }];
        }
        ForwardTriple { value: y, action_jacobian: gy, action_hessian: if hessian { hy } else { Vec::new() }, action_dim: da }
    }

    /// Gradient of `cotangent . output` with respect to all parameters.
    pub fn param_gradient(&self, state: &[f64], action: &[f64], cotangent: &[f64]) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_param_gradient(state, action, cotangent, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Adds `scale * d(cotangent . output)/d params` into `grad`.
    pub fn accumulate_param_gradient(
        &self,
        state: &[f64],
        action: &[f64],
        cotangent: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        self.check_inputs(state, action)?;
        if cotangent.len() != self.output_dim() {
            return Err(Error::dims("cotangent", self.output_dim(), cotangent.len()));
        }
        if grad.len() != self.params.len() {
            return Err(Error::dims("gradient buffer", self.params.len(), grad.len()));
        }
        // Forward, keeping layer inputs and outputs.
        let nl = self.layers.len();
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(nl);
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(nl);
        let mut outs: Vec<Vec<f64>> = Vec::with_capacity(nl);
        let mut y = state.to_vec();
        for (li, layer) in self.layers.iter().enumerate() {
            let mut x = Vec::new();
            self.layer_input(li, &y, action, &mut x);
            let mut z = Vec::new();
            self.affine(li, &x, &mut z);
            y = z.iter().map(|&zi| layer.activation.apply(zi)).collect();
            inputs.push(x);
            pre.push(z);
            outs.push(y.clone());
        }
        // Backward.
        let mut dy: Vec<f64> = cotangent.iter().map(|c| c * scale).collect();
        for li in (0..nl).rev() {
            let layer = self.layers[li];
            let x = &inputs[li];
            let n = layer.inputs;
            let delta: Vec<f64> = (0..layer.outputs)
                .map(|i| dy[i] * layer.activation.derivs(pre[li][i], outs[li][i]).0)
                .collect();
            let off = self.offsets[li];
            let nw = n * layer.outputs;
            let (w, _) = self.layer_params(li);
            for (i, di) in delta.iter().enumerate() {
                if *di == 0.0 {
                    continue;
                }
                let gw = &mut grad[off + i * n..off + (i + 1) * n];
                for (g, xj) in gw.iter_mut().zip(x) {
                    *g += di * xj;
                }
                grad[off + nw + i] += di;
            }
            if li == 0 {
                break;
            }
            let mut dx = vec![0.0; n];
            for (i, di) in delta.iter().enumerate() {
                if *di == 0.0 {
                    continue;
                }
                for (dxj, wij) in dx.iter_mut().zip(&w[i * n..(i + 1) * n]) {
                    *dxj += di * wij;
                }
            }
            if li == self.action_layer {
                dx.truncate(n - self.action_dim);
            }
            dy = dx;
        }
        Ok(())
    }

    /// Writes `dims=<widths>\n` followed by the parameters as little-endian
    /// `f64`.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let dims: Vec<String> = self.dims().iter().map(|d| d.to_string()).collect();
        writeln!(w, "dims={}", dims.join(","))?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Loads parameters written by [`DerivNet::write_checkpoint`] into a
    /// network of matching architecture.
    pub fn load_checkpoint<R: Read>(&mut self, r: R) -> Result<()> {
        let (dims, params) = read_checkpoint(r)?;
        if dims != self.dims() {
            return Err(Error::contract(format!(
                "checkpoint dims {dims:?} do not match network {:?}",
                self.dims()
            )));
        }
        self.set_params(&params)
    }
}

/// Parses a checkpoint into its header widths and flat parameters.
pub fn read_checkpoint<R: Read>(r: R) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut reader = std::io::BufReader::new(r);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let dims_text = header
        .strip_suffix('\n')
        .and_then(|h| h.strip_prefix("dims="))
        .ok_or_else(|| Error::contract("checkpoint header must be `dims=...`"))?;
    let dims = dims_text
        .split(',')
        .map(|d| d.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::contract(format!("bad checkpoint dims: {e}")))?;
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::contract("checkpoint body is not a whole number of f64 values"));
    }
    let params = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((dims, params))
}

/// Scalar action-value function exposing its action derivatives.
pub trait ActionCritic {
    fn action_value(&self, state: &[f64], action: &[f64]) -> f64;

    /// Value, gradient and (row-major) Hessian with respect to the action.
    fn action_derivs(&self, state: &[f64], action: &[f64]) -> ActionDerivs;
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionDerivs {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl ActionCritic for DerivNet {
    fn action_value(&self, state: &[f64], action: &[f64]) -> f64 {
        debug_assert_eq!(self.output_dim(), 1);
        self.forward_unchecked(state, action)[0]
    }

    fn action_derivs(&self, state: &[f64], action: &[f64]) -> ActionDerivs {
        debug_assert_eq!(self.output_dim(), 1);
        let t = self.forward_derivs(state, action, true);
        ActionDerivs { value: t.value[0], gradient: t.action_jacobian, hessian: t.action_hessian }
    }
}

/// Critic defined by a closure, used for analytic oracles.
pub struct OracleCritic<F>(pub F);

impl<F> ActionCritic for OracleCritic<F>
where
    F: Fn(&[f64], &[f64]) -> ActionDerivs,
{
    fn action_value(&self, state: &[f64], action: &[f64]) -> f64 {
        (self.0)(state, action).value
    }

    fn action_derivs(&self, state: &[f64], action: &[f64]) -> ActionDerivs {
        (self.0)(state, action)
    }
}

/// Adam moment estimates for one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize) -> Self {
        Self { m: vec![0.0; num_params], v: vec![0.0; num_params], step: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One Adam step minimizing the loss whose gradient is `grads`.
pub fn adam_step(params: &mut [f64], grads: &[f64], lr: f64, state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::contract(format!(
            "adam shapes disagree: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if !(lr > 0.0) {
        return Err(Error::contract(format!("learning rate must be positive, got {lr}")));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::Divergence(format!("non-finite gradient {} at parameter {i}", grads[i])));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= lr * mh / (vh.sqrt() + state.eps);
    }
    Ok(())
}

/// `target <- (1 - tau) target + tau online`.
pub fn polyak_update(target: &mut [f64], online: &[f64], tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::contract(format!("tau must lie in [0, 1], got {tau}")));
    }
    if target.len() != online.len() {
        return Err(Error::dims("polyak online", target.len(), online.len()));
    }
    for (t, o) in target.iter_mut().zip(online) {
        *t = (1.0 - tau) * *t + tau * o;
    }
    Ok(())
}

/// Huber loss and its derivative: quadratic for `|r| <= clip`, linear outside.
pub fn huber(residual: f64, clip: f64) -> (f64, f64) {
    debug_assert!(clip > 0.0);
    let a = residual.abs();
    if a <= clip {
        (0.5 * residual * residual, residual)
    } else {
        (clip * (a - 0.5 * clip), clip * residual.signum())
    }
}

/// Scales `grads` in place so its Euclidean norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use proptest::prelude::{prop_assert, proptest};

    fn critic(seed: u64) -> DerivNet {
        DerivNet::new(&NetShape::embed_concat_critic(3, 2, 8, 6), &mut seeded_rng(seed)).unwrap()
    }

    #[test]
    fn identity_layer_copies_input() {
        let shape = NetShape { state_dim: 2, action_dim: 1, action_layer: 0, layers: vec![(3, Activation::Identity)] };
        let mut net = DerivNet::zeros(&shape).unwrap();
        let (w, _) = net.layer_params_mut(0);
        for i in 0..3 {
            w[i * 3 + i] = 1.0;
        }
        assert_eq!(net.forward(&[0.5, -2.0], &[7.0]).unwrap(), vec![0.5, -2.0, 7.0]);
    }

    #[test]
    fn zero_weights_give_activated_bias() {
        let shape = NetShape::mlp(2, &[], Activation::Tanh, 2, Activation::Tanh);
        let mut net = DerivNet::zeros(&shape).unwrap();
        let (_, b) = net.layer_params_mut(0);
        b.copy_from_slice(&[0.3, -1.0]);
        let out = net.forward(&[4.0, 5.0], &[]).unwrap();
        assert_eq!(out, vec![0.3f64.tanh(), (-1.0f64).tanh()]);
    }

    #[test]
    fn affine_layer_derivatives() {
        let shape = NetShape { state_dim: 1, action_dim: 2, action_layer: 0, layers: vec![(1, Activation::Identity)] };
        let net = DerivNet::new(&shape, &mut seeded_rng(1)).unwrap();
        let t = net.forward_with_action_derivs(&[0.4], &[1.0, -1.0]).unwrap();
        let (w, _) = net.layer_params(0);
        assert_eq!(t.action_jacobian, vec![w[1], w[2]]);
        assert!(t.action_hessian.iter().all(|h| *h == 0.0));
    }

    #[test]
    fn scalar_tanh_closed_form() {
        let shape = NetShape { state_dim: 0, action_dim: 1, action_layer: 0, layers: vec![(1, Activation::Tanh)] };
        let mut net = DerivNet::zeros(&shape).unwrap();
        let (wv, bv) = (1.7, -0.3);
        net.set_params(&[wv, bv]).unwrap();
        for a in [-1.0, 0.0, 0.25, 2.0] {
            let tr = net.forward_with_action_derivs(&[], &[a]).unwrap();
            let t = (wv * a + bv).tanh();
            assert!((tr.action_jacobian[0] - wv * (1.0 - t * t)).abs() < 1e-15);
            assert!((tr.action_hessian[0] + 2.0 * wv * wv * t * (1.0 - t * t)).abs() < 1e-14);
        }
    }

    #[test]
    fn relu_on_hessian_path_is_rejected() {
        let shape = NetShape {
            state_dim: 2,
            action_dim: 1,
            action_layer: 1,
            layers: vec![(4, Activation::Relu), (4, Activation::Relu), (1, Activation::Identity)],
        };
        assert!(matches!(DerivNet::zeros(&shape), Err(Error::Config(_))));
        // Relu before the action enters is fine.
        let ok = NetShape { layers: vec![(4, Activation::Relu), (4, Activation::Tanh), (1, Activation::Identity)], ..shape };
        assert!(DerivNet::zeros(&ok).is_ok());
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let net = critic(0);
        assert!(matches!(net.forward(&[0.0; 2], &[0.0; 2]), Err(Error::Contract(_))));
        assert!(net.forward_with_action_derivs(&[0.0; 3], &[0.0]).is_err());
        assert!(net.param_gradient(&[0.0; 3], &[0.0; 2], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn value_is_bit_identical_across_passes() {
        let net = critic(4);
        let mut rng = seeded_rng(9);
        for _ in 0..50 {
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v = net.forward(&s, &a).unwrap();
            let t = net.forward_with_action_derivs(&s, &a).unwrap();
            assert_eq!(v, t.value);
            let j = net.forward_with_action_jacobian(&s, &a).unwrap();
            assert_eq!(v, j.value);
            assert_eq!(t.action_jacobian, j.action_jacobian);
            let h = t.hessian_block(0);
            assert_eq!(h[1], h[2]);
        }
    }

    fn fd_jacobian_hessian(net: &DerivNet, s: &[f64], a: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let d = a.len();
        let f = |a: &[f64]| net.forward(s, a).unwrap()[0];
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        for i in 0..d {
            let hi = 1e-4 * a[i].abs().max(1.0);
            let mut p = a.to_vec();
            let mut m = a.to_vec();
            p[i] += hi;
            m[i] -= hi;
            g[i] = (f(&p) - f(&m)) / (2.0 * hi);
        }
        let f0 = f(a);
        for i in 0..d {
            for j in 0..d {
                let hi = 3e-3 * a[i].abs().max(1.0);
                let hj = 3e-3 * a[j].abs().max(1.0);
                h[i * d + j] = if i == j {
                    let mut p = a.to_vec();
                    let mut m = a.to_vec();
                    p[i] += hi;
                    m[i] -= hi;
                    (f(&p) - 2.0 * f0 + f(&m)) / (hi * hi)
                } else {
                    let e = |si: f64, sj: f64| {
                        let mut x = a.to_vec();
                        x[i] += si * hi;
                        x[j] += sj * hj;
                        f(&x)
                    };
                    (e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0)) / (4.0 * hi * hj)
                };
            }
        }
        (g, h)
    }

    #[test]
    fn action_derivatives_match_finite_differences() {
        let mut rng = seeded_rng(2);
        for seed in 0..5 {
            let net = critic(seed);
            for _ in 0..20 {
                let s: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
                let a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.5..1.5)).collect();
                let t = net.forward_with_action_derivs(&s, &a).unwrap();
                let (g, h) = fd_jacobian_hessian(&net, &s, &a);
                for (x, y) in t.action_jacobian.iter().zip(&g) {
                    assert!((x - y).abs() <= 1e-5 * y.abs().max(1.0), "{x} vs {y}");
                }
                for (x, y) in t.action_hessian.iter().zip(&h) {
                    assert!((x - y).abs() <= 1e-4 * y.abs().max(1.0), "{x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn param_gradient_basics() {
        let net = critic(3);
        let g = net.param_gradient(&[0.1, 0.2, 0.3], &[0.0, 1.0], &[0.0]).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));

        let shape = NetShape { state_dim: 1, action_dim: 0, action_layer: 0, layers: vec![(1, Activation::Identity)] };
        let mut id = DerivNet::zeros(&shape).unwrap();
        id.set_params(&[1.0, 0.0]).unwrap();
        let g = id.param_gradient(&[2.5], &[], &[1.0]).unwrap();
        assert_eq!(g, vec![2.5, 1.0]);
    }

    #[test]
    fn param_gradient_matches_finite_differences() {
        let mut rng = seeded_rng(7);
        let shape = NetShape {
            state_dim: 3,
            action_dim: 2,
            action_layer: 1,
            layers: vec![(5, Activation::Relu), (4, Activation::Tanh), (2, Activation::Identity)],
        };
        let mut net = DerivNet::new(&shape, &mut rng).unwrap();
        let s = [0.3, -0.7, 1.1];
        let a = [0.5, -0.2];
        // Loss 0.5 |out|^2: cotangent is the output itself.
        let out = net.forward(&s, &a).unwrap();
        let g = net.param_gradient(&s, &a, &out).unwrap();
        let loss = |n: &DerivNet| 0.5 * n.forward(&s, &a).unwrap().iter().map(|v| v * v).sum::<f64>();
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let i = rng.random_range(0..net.num_params());
            let h = 1e-5;
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let lp = loss(&net);
            net.params_mut()[i] = orig - h;
            let lm = loss(&net);
            net.params_mut()[i] = orig;
            let fd = (lp - lm) / (2.0 * h);
            worst = worst.max((fd - g[i]).abs() / g[i].abs().max(1e-3));
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn adam_behaviour() {
        let mut p = vec![1.0, -2.0];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], 0.1, &mut st).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);

        // At t = 1 the bias-corrected step is lr * g / (|g| + eps).
        let mut p = vec![0.0, 0.0];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &[0.5, -3.0], 0.01, &mut st).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-9 && (p[1] - 0.01).abs() < 1e-9);

        let mut x = vec![1.0];
        let mut st = AdamState::new(1);
        for _ in 0..200 {
            let g = x[0];
            adam_step(&mut x, &[g], 0.1, &mut st).unwrap();
        }
        assert!(x[0].abs() < 0.01, "{}", x[0]);

        assert!(matches!(adam_step(&mut x, &[f64::NAN], 0.1, &mut st), Err(Error::Divergence(_))));
        assert!(adam_step(&mut x, &[1.0], 0.0, &mut st).is_err());
    }

    #[test]
    fn adam_descends_fixed_quadratic() {
        let target = [1.0, -2.0, 0.5];
        let loss = |p: &[f64]| p.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut p = vec![0.0; 3];
        let mut st = AdamState::new(3);
        let start = loss(&p);
        for _ in 0..100 {
            let g: Vec<f64> = p.iter().zip(&target).map(|(a, b)| 2.0 * (a - b)).collect();
            adam_step(&mut p, &g, 0.05, &mut st).unwrap();
        }
        assert!(loss(&p) < start);
    }

    #[test]
    fn polyak_cases() {
        let online = [1.0, 2.0, 3.0];
        let mut t = vec![0.0; 3];
        polyak_update(&mut t, &online, 1.0).unwrap();
        assert_eq!(t, online);
        let mut t = vec![5.0; 3];
        polyak_update(&mut t, &online, 0.0).unwrap();
        assert_eq!(t, vec![5.0; 3]);
        let mut t = vec![5.0; 3];
        polyak_update(&mut t, &online, 0.01).unwrap();
        for (x, o) in t.iter().zip(&online) {
            assert_eq!(*x, 0.99 * 5.0 + 0.01 * o);
        }
        assert!(polyak_update(&mut t, &online, 1.5).is_err());
        assert!(polyak_update(&mut t, &online[..2], 0.5).is_err());
    }

    #[test]
    fn huber_cases() {
        assert_eq!(huber(0.0, 1.0), (0.0, 0.0));
        assert_eq!(huber(1.0, 1.0).0, 0.5);
        assert_eq!(huber(2.0, 1.0), (1.5, 1.0));
        assert_eq!(huber(-2.0, 1.0), (1.5, -1.0));
        // C1 at the joint.
        let e = 1e-9;
        assert!((huber(1.0 + e, 1.0).1 - huber(1.0 - e, 1.0).1).abs() < 1e-8);
    }

    #[test]
    fn clipping_caps_norm() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g[0] - 0.6).abs() < 1e-15 && (g[1] - 0.8).abs() < 1e-15);
        let mut g = vec![0.1, 0.1];
        clip_global_norm(&mut g, 4.0);
        assert_eq!(g, vec![0.1, 0.1]);
    }

    #[test]
    fn checkpoint_header_and_errors() {
        let net = critic(1);
        let mut buf = Vec::new();
        net.write_checkpoint(&mut buf).unwrap();
        assert!(buf.starts_with(b"dims=3,2,8,6,1\n"));
        let mut other = DerivNet::new(&NetShape::embed_concat_critic(3, 2, 8, 5), &mut seeded_rng(0)).unwrap();
        assert!(other.load_checkpoint(buf.as_slice()).is_err());
        assert!(read_checkpoint(&b"nodims\n"[..]).is_err());
    }

    proptest! {
        #[test]
        fn checkpoint_round_trips_bit_exactly(seed in 0u64..1000, scale in -1e6..1e6f64) {
            let mut net = critic(seed);
            net.params_mut()[0] = scale;
            net.params_mut()[1] = f64::MIN_POSITIVE;
            let mut buf = Vec::new();
            net.write_checkpoint(&mut buf).unwrap();
            let mut back = DerivNet::zeros(&NetShape::embed_concat_critic(3, 2, 8, 6)).unwrap();
            back.load_checkpoint(buf.as_slice()).unwrap();
            let same = back.params().iter().zip(net.params()).all(|(a, b)| a.to_bits() == b.to_bits());
            prop_assert!(same);
        }

        #[test]
        fn hessian_is_symmetric(seed in 0u64..200, a0 in -2.0..2.0f64, a1 in -2.0..2.0f64) {
            let net = critic(seed);
            let t = net.forward_with_action_derivs(&[0.1, -0.4, 0.9], &[a0, a1]).unwrap();
            let h = t.hessian_block(0);
            prop_assert!((h[1] - h[2]).abs() < 1e-10);
        }
    }
}
