//! Dueling feed-forward Q-network with hand-written backpropagation,
//! Double-DQN targets and an Adam optimizer.
//!
//! All parameters of a network live in one flat `Vec<f64>`; gradients and
//! optimizer moments use the same layout, so updates and target syncs are
//! plain slice operations.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OBS_DIM: usize = 7;

/// Layer widths of the dueling network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Architecture {
    pub obs_dim: usize,
    pub trunk: Vec<usize>,
    pub head_hidden: usize,
    pub n_actions: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { obs_dim: OBS_DIM, trunk: vec![128, 128, 64], head_hidden: 32, n_actions: 9 }
    }
}

impl Architecture {
    pub fn with_actions(n_actions: usize) -> Self {
        Self { n_actions, ..Self::default() }
    }

    /// `(fan_in, fan_out)` per layer: trunk, then value head, then advantage head.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        let mut prev = self.obs_dim;
        for &w in &self.trunk {
            shapes.push((prev, w));
            prev = w;
        }
        shapes.push((prev, self.head_hidden));
        shapes.push((self.head_hidden, 1));
        shapes.push((prev, self.head_hidden));
        shapes.push((self.head_hidden, self.n_actions));
        shapes
    }

    pub fn describe(&self) -> String {
        let trunk: Vec<String> =
            std::iter::once(self.obs_dim).chain(self.trunk.iter().copied()).map(|w| w.to_string()).collect();
        format!("{} | V {}-1 | A {}-{}", trunk.join("-"), self.head_hidden, self.head_hidden, self.n_actions)
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerSpan {
    fan_in: usize,
    fan_out: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    arch: Architecture,
    params: Vec<f64>,
}

/// Activations kept from a batched forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    batch: usize,
    input: Vec<f64>,
    trunk: Vec<Vec<f64>>,
    value_hidden: Vec<f64>,
    adv_hidden: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Online network picks the next action, target network evaluates it.
    #[default]
    Double,
    /// Target network both picks and evaluates (plain max).
    VanillaMax,
}

#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: isize,
    csa: isize,
    b: &[f64],
    rsb: isize,
    csb: isize,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: every caller passes buffers sized for the given shapes and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl QNetwork {
    pub fn new(arch: Architecture, seed: u64) -> Self {
        let mut net = Self::zeros(arch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for span in net.spans() {
            let bound = (6.0 / (span.fan_in + span.fan_out) as f64).sqrt();
            for w in &mut net.params[span.w..span.w + span.fan_in * span.fan_out] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        net
    }

    pub fn zeros(arch: Architecture) -> Self {
        let n: usize = arch.layer_shapes().iter().map(|(i, o)| i * o + o).sum();
        Self { arch, params: vec![0.0; n] }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn n_actions(&self) -> usize {
        self.arch.n_actions
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Hard copy of `other`'s parameters (target network sync).
    pub fn copy_from(&mut self, other: &QNetwork) {
        assert_eq!(self.arch, other.arch, "sync between mismatched architectures");
        self.params.copy_from_slice(&other.params);
    }

    fn spans(&self) -> Vec<LayerSpan> {
        let mut off = 0;
        self.arch
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let span = LayerSpan { fan_in, fan_out, w: off, b: off + fan_in * fan_out };
                off += fan_in * fan_out + fan_out;
                span
            })
            .collect()
    }

    fn weights(&self, s: LayerSpan) -> &[f64] {
        &self.params[s.w..s.w + s.fan_in * s.fan_out]
    }

    fn layer_forward(&self, s: LayerSpan, x: &[f64], batch: usize, relu: bool) -> Vec<f64> {
        let mut y = vec![0.0; batch * s.fan_out];
        gemm(batch, s.fan_in, s.fan_out, x, s.fan_in as isize, 1, self.weights(s), 1, s.fan_in as isize, 0.0, &mut y);
        let bias = &self.params[s.b..s.b + s.fan_out];
        for row in y.chunks_exact_mut(s.fan_out) {
            for (v, b) in row.iter_mut().zip(bias) {
                *v += b;
                if relu && *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        y
    }

    /// Batched forward pass over `batch` row-major observations.
    pub fn forward_batch(&self, obs: &[f64], batch: usize) -> ForwardCache {
        assert_eq!(obs.len(), batch * self.arch.obs_dim, "observation batch has wrong length");
        let spans = self.spans();
        let depth = self.arch.trunk.len();
        let mut trunk = Vec::with_capacity(depth);
        let mut x = obs;
        for &s in &spans[..depth] {
            trunk.push(self.layer_forward(s, x, batch, true));
            x = trunk.last().unwrap();
        }
        let features = trunk.last().map(|v| v.as_slice()).unwrap_or(obs);
        let value_hidden = self.layer_forward(spans[depth], features, batch, true);
        let value = self.layer_forward(spans[depth + 1], &value_hidden, batch, false);
        let adv_hidden = self.layer_forward(spans[depth + 2], features, batch, true);
        let adv = self.layer_forward(spans[depth + 3], &adv_hidden, batch, false);
        let na = self.arch.n_actions;
        let mut q = adv;
        for (row, v) in q.chunks_exact_mut(na).zip(&value) {
            let mean = row.iter().sum::<f64>() / na as f64;
            for a in row.iter_mut() {
                *a += v - mean;
            }
        }
        ForwardCache { batch, input: obs.to_vec(), trunk, value_hidden, adv_hidden, q }
    }

    /// Q-values for one observation.
    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.arch.obs_dim {
            return Err(Error::InvalidConfig(format!(
                "observation has {} components, network expects {}",
                obs.len(),
                self.arch.obs_dim
            )));
        }
        if obs.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        Ok(self.forward_batch(obs, 1).q)
    }

    /// Backpropagates `dq` (d loss / d Q, batch x actions) into a flat gradient.
    pub fn backward_from(&self, cache: &ForwardCache, dq: &[f64]) -> Vec<f64> {
        let batch = cache.batch;
        let na = self.arch.n_actions;
        let spans = self.spans();
        let depth = self.arch.trunk.len();
        let mut grad = vec![0.0; self.params.len()];

        let mut d_value = vec![0.0; batch];
        let mut d_adv = vec![0.0; batch * na];
        for b in 0..batch {
            let row = &dq[b * na..(b + 1) * na];
            let total: f64 = row.iter().sum();
            d_value[b] = total;
            let mean = total / na as f64;
            for (d, g) in d_adv[b * na..(b + 1) * na].iter_mut().zip(row) {
                *d = g - mean;
            }
        }

        let features: &[f64] = cache.trunk.last().map(|v| v.as_slice()).unwrap_or(&cache.input);
        let mut d_hv = self.layer_backward(spans[depth + 1], &cache.value_hidden, &d_value, batch, &mut grad, true);
        mask_relu(&mut d_hv, &cache.value_hidden);
        let d_feat_v = self.layer_backward(spans[depth], features, &d_hv, batch, &mut grad, true);
        let mut d_ha = self.layer_backward(spans[depth + 3], &cache.adv_hidden, &d_adv, batch, &mut grad, true);
        mask_relu(&mut d_ha, &cache.adv_hidden);
        let d_feat_a = self.layer_backward(spans[depth + 2], features, &d_ha, batch, &mut grad, true);

        let mut d = d_feat_v;
        for (x, y) in d.iter_mut().zip(&d_feat_a) {
            *x += y;
        }
        for layer in (0..depth).rev() {
            mask_relu(&mut d, &cache.trunk[layer]);
            let input: &[f64] = if layer == 0 { &cache.input } else { &cache.trunk[layer - 1] };
            d = self.layer_backward(spans[layer], input, &d, batch, &mut grad, layer > 0);
        }
        grad
    }

    /// Accumulates weight/bias gradients of one layer and returns d loss / d input.
    fn layer_backward(
        &self,
        s: LayerSpan,
        input: &[f64],
        d_out: &[f64],
        batch: usize,
        grad: &mut [f64],
        want_input_grad: bool,
    ) -> Vec<f64> {
        let (fi, fo) = (s.fan_in, s.fan_out);
        gemm(fo, batch, fi, d_out, 1, fo as isize, input, fi as isize, 1, 1.0, &mut grad[s.w..s.w + fi * fo]);
        for row in d_out.chunks_exact(fo) {
            for (g, d) in grad[s.b..s.b + fo].iter_mut().zip(row) {
                *g += d;
            }
        }
        if !want_input_grad {
            return Vec::new();
        }
        let mut d_in = vec![0.0; batch * fi];
        gemm(batch, fo, fi, d_out, fo as isize, 1, self.weights(s), fi as isize, 1, 0.0, &mut d_in);
        d_in
    }

    /// Gradient of `is_weight * (td_target - Q(obs, action))^2` for one sample.
    pub fn backward(&self, obs: &[f64], action: usize, td_target: f64, is_weight: f64) -> Result<Vec<f64>> {
        let na = self.arch.n_actions;
        if action >= na {
            return Err(Error::ActionOutOfRange { index: action, n_actions: na });
        }
        let cache = self.forward_batch(obs, 1);
        let mut dq = vec![0.0; na];
        dq[action] = -2.0 * is_weight * (td_target - cache.q[action]);
        Ok(self.backward_from(&cache, &dq))
    }

    /// Mean over the batch of the weighted squared TD loss gradient.
    ///
    /// Returns the gradient and the TD errors `target - Q(s, a)`.
    pub fn batch_gradient(
        &self,
        obs: &[f64],
        actions: &[usize],
        targets: &[f64],
        weights: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let batch = actions.len();
        let na = self.arch.n_actions;
        let cache = self.forward_batch(obs, batch);
        let mut dq = vec![0.0; batch * na];
        let mut td = Vec::with_capacity(batch);
        for b in 0..batch {
            let err = targets[b] - cache.q[b * na + actions[b]];
            td.push(err);
            dq[b * na + actions[b]] = -2.0 * weights[b] * err / batch as f64;
        }
        (self.backward_from(&cache, &dq), td)
    }

    pub fn save(&self, mut w: impl Write) -> Result<()> {
        let shapes = self.arch.layer_shapes();
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        w.write_all(&(self.arch.trunk.len() as u32).to_le_bytes())?;
        w.write_all(&(shapes.len() as u32).to_le_bytes())?;
        for (i, o) in shapes {
            w.write_all(&(i as u32).to_le_bytes())?;
            w.write_all(&(o as u32).to_le_bytes())?;
        }
        w.write_all(&(self.params.len() as u64).to_le_bytes())?;
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    /// Loads a checkpoint and checks it against `expected` when given.
    pub fn load(mut r: impl Read, expected: Option<&Architecture>) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::Checkpoint("truncated header".into()))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint("bad magic bytes, not a Q-network checkpoint".into()));
        }
        let read_u32 = |r: &mut dyn Read| -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| Error::Checkpoint("truncated header".into()))?;
            Ok(u32::from_le_bytes(b))
        };
        let version = read_u32(&mut r)?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let depth = read_u32(&mut r)? as usize;
        let n_layers = read_u32(&mut r)? as usize;
        if n_layers != depth + 4 || n_layers > 64 {
            return Err(Error::Checkpoint(format!("inconsistent layer count {n_layers}")));
        }
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            shapes.push((read_u32(&mut r)? as usize, read_u32(&mut r)? as usize));
        }
        let arch = Architecture {
            obs_dim: shapes[0].0,
            trunk: shapes[..depth].iter().map(|s| s.1).collect(),
            head_hidden: shapes[depth].1,
            n_actions: shapes[depth + 3].1,
        };
        if arch.layer_shapes() != shapes {
            return Err(Error::Checkpoint("layer shapes do not form a dueling network".into()));
        }
        if let Some(exp) = expected {
            if exp != &arch {
                return Err(Error::ShapeMismatch { expected: exp.describe(), found: arch.describe() });
            }
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8).map_err(|_| Error::Checkpoint("truncated header".into()))?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut net = Self::zeros(arch);
        if count != net.params.len() {
            return Err(Error::Checkpoint(format!("expected {} parameters, header says {count}", net.params.len())));
        }
        for p in &mut net.params {
            r.read_exact(&mut b8).map_err(|_| Error::Checkpoint("truncated parameter block".into()))?;
            *p = f64::from_le_bytes(b8);
        }
        Ok(net)
    }
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MWSNQNET";
pub const CHECKPOINT_VERSION: u32 = 1;

fn mask_relu(d: &mut [f64], activation: &[f64]) {
    for (g, a) in d.iter_mut().zip(activation) {
        if *a <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Bootstrapped TD targets for a batch of next observations.
pub fn td_targets(
    online: &QNetwork,
    target: &QNetwork,
    rewards: &[f64],
    next_obs: &[f64],
    terminal: &[bool],
    discount: f64,
    mode: TargetMode,
) -> Vec<f64> {
    let batch = rewards.len();
    let na = online.n_actions();
    let q_target = target.forward_batch(next_obs, batch).q;
    let q_online = match mode {
        TargetMode::Double => Some(online.forward_batch(next_obs, batch).q),
        TargetMode::VanillaMax => None,
    };
    (0..batch)
        .map(|b| {
            if terminal[b] {
                return rewards[b];
            }
            let tq = &q_target[b * na..(b + 1) * na];
            let bootstrap = match &q_online {
                Some(q) => tq[argmax(&q[b * na..(b + 1) * na])],
                None => tq.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            };
            rewards[b] + discount * bootstrap
        })
        .collect()
}

pub fn double_dqn_target(
    online: &QNetwork,
    target: &QNetwork,
    reward: f64,
    next_obs: &[f64],
    terminal: bool,
    discount: f64,
    mode: TargetMode,
) -> f64 {
    td_targets(online, target, &[reward], next_obs, &[terminal], discount, mode)[0]
}

/// Combines per-action next-state values the way [`td_targets`] does; used
/// where Q-values come from somewhere other than a network.
pub fn target_from_values(
    q_online_next: &[f64],
    q_target_next: &[f64],
    reward: f64,
    discount: f64,
    mode: TargetMode,
) -> f64 {
    let bootstrap = match mode {
        TargetMode::Double => q_target_next[argmax(q_online_next)],
        TargetMode::VanillaMax => q_target_next.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    };
    reward + discount * bootstrap
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    steps: u64,
}

impl Adam {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Self { config, m: vec![0.0; n_params], v: vec![0.0; n_params], steps: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        assert_eq!(params.len(), grads.len(), "gradient shape mismatch");
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        self.steps += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let t = self.steps as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}
