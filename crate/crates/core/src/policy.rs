//! Actor-critic network with an obstacle-token cross-attention extractor.
//!
//! The ego/goal query attends over embedded obstacle points; the attended
//! feature and the query embedding feed a two-layer head that produces
//! action logits and a state value. Gradients are computed by hand.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Observation;
use crate::error::{Error, Result};
use crate::kinematics::NUM_ACTIONS;

const CHECKPOINT_VERSION: u32 = 1;

/// How a macro-action of `h` primitives is encoded by the action head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkMode {
    /// One categorical over the primitives, repeated `h` times.
    Repeat,
    /// `h` independent categoricals, one per chunk position.
    Factored,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub d_model: usize,
    pub heads: usize,
    pub hidden: usize,
    pub chunk_mode: ChunkMode,
    pub chunk_length: usize,
    /// Scale of the initial action-head weights; small values start near uniform.
    pub policy_init_scale: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            heads: 4,
            hidden: 128,
            chunk_mode: ChunkMode::Repeat,
            chunk_length: 4,
            policy_init_scale: 0.01,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.hidden == 0 || self.chunk_length == 0 {
            return Err(Error::Config("network sizes and chunk length must be positive".into()));
        }
        if self.d_model % self.heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by heads {}",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }

    /// Number of independent categoricals in the action head.
    pub fn groups(&self) -> usize {
        match self.chunk_mode {
            ChunkMode::Repeat => 1,
            ChunkMode::Factored => self.chunk_length,
        }
    }

    pub fn num_logits(&self) -> usize {
        self.groups() * NUM_ACTIONS
    }

    /// Expands per-group choices into the primitive sequence sent to the env.
    pub fn chunk(&self, choices: &[usize]) -> Vec<usize> {
        match self.chunk_mode {
            ChunkMode::Repeat => vec![choices[0]; self.chunk_length],
            ChunkMode::Factored => choices.to_vec(),
        }
    }
}

/// Offsets of each parameter block in the flat parameter vector.
#[derive(Debug, Clone, Copy)]
struct Layout {
    tok_w: usize,
    tok_b: usize,
    qry_w: usize,
    qry_b: usize,
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    bo: usize,
    f1_w: usize,
    f1_b: usize,
    f2_w: usize,
    f2_b: usize,
    pi_w: usize,
    pi_b: usize,
    v_w: usize,
    v_b: usize,
    total: usize,
}

impl Layout {
    fn new(c: &PolicyConfig) -> Self {
        let (d, f, a, q) = (c.d_model, c.hidden, c.num_logits(), Observation::QUERY_DIM);
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let l = Layout {
            tok_w: take(d * 2),
            tok_b: take(d),
            qry_w: take(d * q),
            qry_b: take(d),
            wq: take(d * d),
            wk: take(d * d),
            wv: take(d * d),
            wo: take(d * d),
            bo: take(d),
            f1_w: take(f * 2 * d),
            f1_b: take(f),
            f2_w: take(f * f),
            f2_b: take(f),
            pi_w: take(a * f),
            pi_b: take(a),
            v_w: take(f),
            v_b: take(1),
            total: 0,
        };
        Layout { total: at, ..l }
    }
}

/// Categorical distribution(s) over primitives for one macro-action.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    pub logits: Vec<f64>,
    pub groups: usize,
}

impl ActionDistribution {
    pub fn new(logits: Vec<f64>, groups: usize) -> Self {
        debug_assert_eq!(logits.len(), groups * NUM_ACTIONS);
        Self { logits, groups }
    }

    fn group(&self, g: usize) -> &[f64] {
        &self.logits[g * NUM_ACTIONS..(g + 1) * NUM_ACTIONS]
    }

    /// Log-probabilities of group `g`.
    pub fn log_probs(&self, g: usize) -> [f64; NUM_ACTIONS] {
        let l = self.group(g);
        let m = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + l.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        std::array::from_fn(|i| l[i] - lse)
    }

    pub fn probs(&self, g: usize) -> [f64; NUM_ACTIONS] {
        self.log_probs(g).map(f64::exp)
    }

    pub fn entropy(&self) -> f64 {
        (0..self.groups)
            .map(|g| {
                let lp = self.log_probs(g);
                -lp.iter().map(|l| l.exp() * l).sum::<f64>()
            })
            .sum()
    }

    pub fn argmax(&self) -> Vec<usize> {
        (0..self.groups)
            .map(|g| {
                let l = self.group(g);
                (0..NUM_ACTIONS).fold(0, |best, i| if l[i] > l[best] { i } else { best })
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.groups)
            .map(|g| {
                let p = self.probs(g);
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                for (i, pi) in p.iter().enumerate() {
                    acc += pi;
                    if u < acc {
                        return i;
                    }
                }
                NUM_ACTIONS - 1
            })
            .collect()
    }

    /// Log-probability of the per-group choices (summed over groups) and the entropy.
    pub fn log_prob_and_entropy(&self, choices: &[usize]) -> Result<(f64, f64)> {
        if choices.len() != self.groups {
            return Err(Error::Input(format!(
                "expected {} action choices, got {}",
                self.groups,
                choices.len()
            )));
        }
        let mut lp = 0.0;
        for (g, &a) in choices.iter().enumerate() {
            if a >= NUM_ACTIONS {
                return Err(Error::Input(format!("action index {a} outside 0..{NUM_ACTIONS}")));
            }
            lp += self.log_probs(g)[a];
        }
        Ok((lp, self.entropy()))
    }

    /// Gradient of `w_lp * log_prob(choices) + w_ent * entropy` with respect to the logits.
    pub fn logit_grad(&self, choices: &[usize], w_lp: f64, w_ent: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.logits.len()];
        for g in 0..self.groups {
            let lp = self.log_probs(g);
            let h: f64 = -lp.iter().map(|l| l.exp() * l).sum::<f64>();
            for i in 0..NUM_ACTIONS {
                let p = lp[i].exp();
                let onehot = if choices[g] == i { 1.0 } else { 0.0 };
                out[g * NUM_ACTIONS + i] = w_lp * (onehot - p) - w_ent * p * (lp[i] + h);
            }
        }
        out
    }
}

/// Intermediate activations of one forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    query: [f64; Observation::QUERY_DIM],
    /// Raw coordinates of the unmasked tokens.
    points: Vec<[f64; 2]>,
    /// Slot index of each unmasked token.
    slots: Vec<usize>,
    num_slots: usize,
    /// Token embeddings, `n x d`.
    t: Vec<f64>,
    e: Vec<f64>,
    q: Vec<f64>,
    /// Per-head key-space queries `Wk_h^T q_h`, `heads x d`.
    u: Vec<f64>,
    /// Attention weights over unmasked tokens, `heads x n`.
    a: Vec<f64>,
    /// Per-head attended token averages, `heads x d`.
    c: Vec<f64>,
    o: Vec<f64>,
    z: Vec<f64>,
    h1: Vec<f64>,
    h2: Vec<f64>,
    pub logits: Vec<f64>,
    pub value: f64,
}

fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        out[r] += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dx += W^T dy`.
fn matvec_t(w: &[f64], rows: usize, cols: usize, dy: &[f64], dx: &mut [f64]) {
    for r in 0..rows {
        let g = dy[r];
        if g == 0.0 {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (d, w) in dx.iter_mut().zip(row) {
            *d += g * w;
        }
    }
}

/// `G += dy x^T`.
fn outer(g: &mut [f64], rows: usize, cols: usize, dy: &[f64], x: &[f64]) {
    for r in 0..rows {
        let s = dy[r];
        if s == 0.0 {
            continue;
        }
        let row = &mut g[r * cols..(r + 1) * cols];
        for (gi, xi) in row.iter_mut().zip(x) {
            *gi += s * xi;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub config: PolicyConfig,
    pub seed: u64,
    pub params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    #[serde(flatten)]
    net: PolicyNet,
    #[serde(default)]
    meta: serde_json::Value,
}

impl PolicyNet {
    pub fn new(config: PolicyConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let l = Layout::new(&config);
        let mut params = vec![0.0; l.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (d, f, a, q) = (config.d_model, config.hidden, config.num_logits(), Observation::QUERY_DIM);
        let mut fill = |off: usize, rows: usize, cols: usize, scale: f64| {
            let bound = scale / (cols as f64).sqrt();
            for p in &mut params[off..off + rows * cols] {
                *p = rng.gen_range(-bound..=bound);
            }
        };
        fill(l.tok_w, d, 2, 1.0);
        fill(l.qry_w, d, q, 1.0);
        fill(l.wq, d, d, 1.0);
        fill(l.wk, d, d, 1.0);
        fill(l.wv, d, d, 1.0);
        fill(l.wo, d, d, 1.0);
        fill(l.f1_w, f, 2 * d, 1.0);
        fill(l.f2_w, f, f, 1.0);
        fill(l.pi_w, a, f, config.policy_init_scale);
        fill(l.v_w, 1, f, 1.0);
        Ok(Self { config, seed, params })
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layout(&self) -> Layout {
        Layout::new(&self.config)
    }

    fn check_obs(&self, obs: &Observation) -> Result<()> {
        if obs.tokens.len() != obs.mask.len() {
            return Err(Error::Config(format!(
                "observation has {} tokens but {} mask entries",
                obs.tokens.len(),
                obs.mask.len()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, obs: &Observation) -> Result<(ActionDistribution, f64)> {
        let c = self.forward_cached(obs)?;
        Ok((ActionDistribution::new(c.logits, self.config.groups()), c.value))
    }

    pub fn forward_cached(&self, obs: &Observation) -> Result<ForwardCache> {
        self.check_obs(obs)?;
        let l = self.layout();
        let p = &self.params;
        let cfg = &self.config;
        let (d, nh, f) = (cfg.d_model, cfg.heads, cfg.hidden);
        let dh = d / nh;
        let scale = 1.0 / (dh as f64).sqrt();
        let qd = Observation::QUERY_DIM;

        let mut points = Vec::new();
        let mut slots = Vec::new();
        for (i, (tok, m)) in obs.tokens.iter().zip(&obs.mask).enumerate() {
            if *m {
                points.push(*tok);
                slots.push(i);
            }
        }
        let n = points.len();

        let mut t = vec![0.0; n * d];
        for (k, pt) in points.iter().enumerate() {
            let row = &mut t[k * d..(k + 1) * d];
            for j in 0..d {
                let w = &p[l.tok_w + j * 2..l.tok_w + j * 2 + 2];
                row[j] = (w[0] * pt[0] + w[1] * pt[1] + p[l.tok_b + j]).tanh();
            }
        }

        let query = obs.query();
        let mut e = p[l.qry_b..l.qry_b + d].to_vec();
        matvec(&p[l.qry_w..], d, qd, &query, &mut e);
        e.iter_mut().for_each(|x| *x = x.tanh());

        let mut q = vec![0.0; d];
        matvec(&p[l.wq..], d, d, &e, &mut q);

        let mut u = vec![0.0; nh * d];
        let mut a = vec![0.0; nh * n];
        let mut c = vec![0.0; nh * d];
        let mut o = vec![0.0; d];
        for h in 0..nh {
            let uh = &mut u[h * d..(h + 1) * d];
            // Rows h*dh..(h+1)*dh of Wk form the head's key projection.
            for r in 0..dh {
                let qr = q[h * dh + r];
                let row = &p[l.wk + (h * dh + r) * d..l.wk + (h * dh + r + 1) * d];
                for (x, w) in uh.iter_mut().zip(row) {
                    *x += qr * w;
                }
            }
            if n == 0 {
                continue;
            }
            let ah = &mut a[h * n..(h + 1) * n];
            for k in 0..n {
                ah[k] = scale * dot(uh, &t[k * d..(k + 1) * d]);
            }
            let m = ah.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in ah.iter_mut() {
                *x = (*x - m).exp();
                sum += *x;
            }
            for x in ah.iter_mut() {
                *x /= sum;
            }
            let ch = &mut c[h * d..(h + 1) * d];
            for k in 0..n {
                let w = ah[k];
                for (x, tv) in ch.iter_mut().zip(&t[k * d..(k + 1) * d]) {
                    *x += w * tv;
                }
            }
            matvec(&p[l.wv + h * dh * d..], dh, d, ch, &mut o[h * dh..(h + 1) * dh]);
        }

        let mut z = vec![0.0; 2 * d];
        z[..d].copy_from_slice(&e);
        let att = &mut z[d..];
        att.copy_from_slice(&p[l.bo..l.bo + d]);
        matvec(&p[l.wo..], d, d, &o, att);

        let mut h1 = p[l.f1_b..l.f1_b + f].to_vec();
        matvec(&p[l.f1_w..], f, 2 * d, &z, &mut h1);
        h1.iter_mut().for_each(|x| *x = x.tanh());
        let mut h2 = p[l.f2_b..l.f2_b + f].to_vec();
        matvec(&p[l.f2_w..], f, f, &h1, &mut h2);
        h2.iter_mut().for_each(|x| *x = x.tanh());

        let na = cfg.num_logits();
        let mut logits = p[l.pi_b..l.pi_b + na].to_vec();
        matvec(&p[l.pi_w..], na, f, &h2, &mut logits);
        let value = p[l.v_b] + dot(&p[l.v_w..l.v_w + f], &h2);

        Ok(ForwardCache {
            query,
            points,
            slots,
            num_slots: obs.tokens.len(),
            t,
            e,
            q,
            u,
            a,
            c,
            o,
            z,
            h1,
            h2,
            logits,
            value,
        })
    }

    /// Per-head attention weights over all K slots; masked slots are exactly 0.
    pub fn attention_weights(&self, obs: &Observation) -> Result<Vec<Vec<f64>>> {
        let c = self.forward_cached(obs)?;
        let n = c.slots.len();
        Ok((0..self.config.heads)
            .map(|h| {
                let mut w = vec![0.0; c.num_slots];
                for (k, &s) in c.slots.iter().enumerate() {
                    w[s] = c.a[h * n + k];
                }
                w
            })
            .collect())
    }

    /// Accumulates into `grads` the parameter gradient given upstream
    /// gradients on the logits and the value.
    pub fn backward(&self, cache: &ForwardCache, dlogits: &[f64], dvalue: f64, grads: &mut [f64]) {
        let l = self.layout();
        let p = &self.params;
        let cfg = &self.config;
        let (d, nh, f) = (cfg.d_model, cfg.heads, cfg.hidden);
        let dh = d / nh;
        let scale = 1.0 / (dh as f64).sqrt();
        let na = cfg.num_logits();
        let n = cache.points.len();
        let qd = Observation::QUERY_DIM;

        // Heads.
        outer(&mut grads[l.pi_w..], na, f, dlogits, &cache.h2);
        for (g, dl) in grads[l.pi_b..l.pi_b + na].iter_mut().zip(dlogits) {
            *g += dl;
        }
        for (g, h) in grads[l.v_w..l.v_w + f].iter_mut().zip(&cache.h2) {
            *g += dvalue * h;
        }
        grads[l.v_b] += dvalue;
        let mut dh2: Vec<f64> = p[l.v_w..l.v_w + f].iter().map(|w| w * dvalue).collect();
        matvec_t(&p[l.pi_w..], na, f, dlogits, &mut dh2);

        // Fusion layers.
        let dpre2: Vec<f64> = dh2.iter().zip(&cache.h2).map(|(g, h)| g * (1.0 - h * h)).collect();
        outer(&mut grads[l.f2_w..], f, f, &dpre2, &cache.h1);
        for (g, x) in grads[l.f2_b..l.f2_b + f].iter_mut().zip(&dpre2) {
            *g += x;
        }
        let mut dh1 = vec![0.0; f];
        matvec_t(&p[l.f2_w..], f, f, &dpre2, &mut dh1);
        let dpre1: Vec<f64> = dh1.iter().zip(&cache.h1).map(|(g, h)| g * (1.0 - h * h)).collect();
        outer(&mut grads[l.f1_w..], f, 2 * d, &dpre1, &cache.z);
        for (g, x) in grads[l.f1_b..l.f1_b + f].iter_mut().zip(&dpre1) {
            *g += x;
        }
        let mut dz = vec![0.0; 2 * d];
        matvec_t(&p[l.f1_w..], f, 2 * d, &dpre1, &mut dz);
        let (de_direct, datt) = dz.split_at(d);
        let mut de = de_direct.to_vec();

        // Output projection.
        outer(&mut grads[l.wo..], d, d, datt, &cache.o);
        for (g, x) in grads[l.bo..l.bo + d].iter_mut().zip(datt) {
            *g += x;
        }
        let mut d_o = vec![0.0; d];
        matvec_t(&p[l.wo..], d, d, datt, &mut d_o);

        // Attention.
        let mut dt = vec![0.0; n * d];
        let mut dq = vec![0.0; d];
        if n > 0 {
            let mut dc = vec![0.0; d];
            let mut da = vec![0.0; n];
            let mut du = vec![0.0; d];
            for h in 0..nh {
                let doh = &d_o[h * dh..(h + 1) * dh];
                let ch = &cache.c[h * d..(h + 1) * d];
                outer(&mut grads[l.wv + h * dh * d..], dh, d, doh, ch);
                dc.iter_mut().for_each(|x| *x = 0.0);
                matvec_t(&p[l.wv + h * dh * d..], dh, d, doh, &mut dc);

                let ah = &cache.a[h * n..(h + 1) * n];
                let uh = &cache.u[h * d..(h + 1) * d];
                let mut weighted = 0.0;
                for k in 0..n {
                    let tk = &cache.t[k * d..(k + 1) * d];
                    da[k] = dot(&dc, tk);
                    weighted += ah[k] * da[k];
                }
                du.iter_mut().for_each(|x| *x = 0.0);
                for k in 0..n {
                    let ds = ah[k] * (da[k] - weighted) * scale;
                    let tk = &cache.t[k * d..(k + 1) * d];
                    let dtk = &mut dt[k * d..(k + 1) * d];
                    for j in 0..d {
                        dtk[j] += ah[k] * dc[j] + ds * uh[j];
                        du[j] += ds * tk[j];
                    }
                }
                for r in 0..dh {
                    let row = h * dh + r;
                    let qr = cache.q[row];
                    let wrow = &p[l.wk + row * d..l.wk + (row + 1) * d];
                    dq[row] += dot(wrow, &du);
                    let grow = &mut grads[l.wk + row * d..l.wk + (row + 1) * d];
                    for (g, x) in grow.iter_mut().zip(&du) {
                        *g += qr * x;
                    }
                }
            }
        }

        // Query path.
        outer(&mut grads[l.wq..], d, d, &dq, &cache.e);
        matvec_t(&p[l.wq..], d, d, &dq, &mut de);
        let dpre_e: Vec<f64> = de.iter().zip(&cache.e).map(|(g, e)| g * (1.0 - e * e)).collect();
        outer(&mut grads[l.qry_w..], d, qd, &dpre_e, &cache.query);
        for (g, x) in grads[l.qry_b..l.qry_b + d].iter_mut().zip(&dpre_e) {
            *g += x;
        }

        // Token embeddings.
        for k in 0..n {
            let pt = cache.points[k];
            for j in 0..d {
                let tv = cache.t[k * d + j];
                let g = dt[k * d + j] * (1.0 - tv * tv);
                grads[l.tok_w + j * 2] += g * pt[0];
                grads[l.tok_w + j * 2 + 1] += g * pt[1];
                grads[l.tok_b + j] += g;
            }
        }
    }

    /// Gradient of `Σ_i loss_i` over a batch, where `loss_fn` maps each sample's
    /// distribution and value to `(loss, dloss/dlogits, dloss/dvalue)`.
    pub fn gradients<F>(&self, batch: &[Observation], mut loss_fn: F) -> Result<(f64, Vec<f64>)>
    where
        F: FnMut(usize, &ActionDistribution, f64) -> (f64, Vec<f64>, f64),
    {
        let mut grads = vec![0.0; self.params.len()];
        let mut total = 0.0;
        for (i, obs) in batch.iter().enumerate() {
            let cache = self.forward_cached(obs)?;
            let dist = ActionDistribution::new(cache.logits.clone(), self.config.groups());
            let (loss, dlogits, dvalue) = loss_fn(i, &dist, cache.value);
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss {loss} at sample {i}")));
            }
            total += loss;
            self.backward(&cache, &dlogits, dvalue, &mut grads);
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        Ok((total, grads))
    }

    /// Index range of the value-head parameters in `params`.
    pub fn value_head_range(&self) -> std::ops::Range<usize> {
        let l = self.layout();
        l.v_w..l.total
    }

    pub fn save(&self, path: impl AsRef<Path>, meta: serde_json::Value) -> Result<()> {
        let path = path.as_ref();
        let ck = Checkpoint {
            version: CHECKPOINT_VERSION,
            net: self.clone(),
            meta,
        };
        let text = serde_json::to_string(&ck).map_err(|e| Error::Malformed(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint =
            serde_json::from_str(&text).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Malformed(format!(
                "{}: unsupported checkpoint version {}",
                path.display(),
                ck.version
            )));
        }
        ck.net.config.validate()?;
        if ck.net.params.len() != Layout::new(&ck.net.config).total {
            return Err(Error::Malformed(format!(
                "{}: parameter count does not match the network config",
                path.display()
            )));
        }
        Ok(ck.net)
    }
}
