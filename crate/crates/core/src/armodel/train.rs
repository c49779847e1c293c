use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::net::{sigmoid, MaskedNet};
use super::{bit_at, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::zorder::ZKey;

/// Gradients are summed over fixed-size chunks and reduced in chunk order, so
/// results do not depend on the number of worker threads.
const CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Linkage width of the masks.
    pub link: usize,
    pub hidden: usize,
    /// Truncation length used by CDF calls on the trained net.
    pub ell: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 512,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            link: 32,
            hidden: 4,
            ell: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Mean per-tuple cross-entropy (nats) seen during each epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean per-tuple cross-entropy of the final parameters over the whole set.
    pub final_loss: f64,
}

/// Fits a masked net to `keys` of `n` bits by minimising bitwise cross-entropy.
pub fn train(keys: &[ZKey], n: usize, cfg: &TrainConfig) -> Result<(MaskedNet, TrainReport)> {
    if keys.is_empty() {
        return Err(Error::Input("cannot train on an empty key set".into()));
    }
    if cfg.ell > n {
        return Err(Error::Input(format!("truncation length {} exceeds key length {n}", cfg.ell)));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::Input("epochs and batch size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = MaskedNet::init(n, cfg.link, cfg.hidden, &mut rng)?;
    let bits = unpack(keys, n);
    let mut adam = Adam::new(&net);
    let mut order: Vec<usize> = (0..keys.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut shuffle = ChaCha8Rng::seed_from_u64(cfg.seed);
        shuffle.set_stream(epoch as u64 + 1);
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (grads, loss) = batch_gradient(&net, &bits, batch);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch: epoch + 1, loss });
            }
            total += loss;
            adam.step(&mut net, &grads, batch.len(), cfg);
        }
        let mean = total / keys.len() as f64;
        log::debug!("epoch {}: loss {mean:.5}", epoch + 1);
        epoch_losses.push(mean);
    }

    let all: Vec<usize> = (0..keys.len()).collect();
    let final_loss = batch_gradient(&net, &bits, &all).1 / keys.len() as f64;
    if !final_loss.is_finite() {
        return Err(Error::Diverged { epoch: cfg.epochs, loss: final_loss });
    }
    Ok((net, TrainReport { epoch_losses, final_loss }))
}

/// Mean per-tuple cross-entropy of `net` on `keys`.
pub fn cross_entropy(net: &MaskedNet, keys: &[ZKey]) -> f64 {
    if keys.is_empty() {
        return 0.0;
    }
    let bits = unpack(keys, net.key_bits());
    let all: Vec<usize> = (0..keys.len()).collect();
    batch_gradient(net, &bits, &all).1 / keys.len() as f64
}

fn unpack(keys: &[ZKey], n: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(keys.len() * n);
    for &z in keys {
        out.extend((1..=n).map(|pos| bit_at(n, z, pos) as u8 as f32));
    }
    out
}

struct Grads {
    w: [Vec<f32>; 3],
    b: [Vec<f32>; 3],
}

impl Grads {
    fn zeros(net: &MaskedNet) -> Self {
        Self {
            w: net.weights.clone().map(|v| vec![0.0; v.len()]),
            b: net.biases.clone().map(|v| vec![0.0; v.len()]),
        }
    }

    fn add(&mut self, other: &Grads) {
        for l in 0..3 {
            self.w[l].iter_mut().zip(&other.w[l]).for_each(|(a, b)| *a += b);
            self.b[l].iter_mut().zip(&other.b[l]).for_each(|(a, b)| *a += b);
        }
    }
}

/// Summed gradient and summed loss over the rows listed in `batch`.
fn batch_gradient(net: &MaskedNet, bits: &[f32], batch: &[usize]) -> (Grads, f64) {
    let chunks: Vec<&[usize]> = batch.chunks(CHUNK).collect();
    #[cfg(feature = "parallel")]
    let parts: Vec<(Grads, f64)> = {
        use rayon::prelude::*;
        chunks.par_iter().map(|c| chunk_gradient(net, bits, c)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<(Grads, f64)> = chunks.iter().map(|c| chunk_gradient(net, bits, c)).collect();

    let mut iter = parts.into_iter();
    let (mut grads, mut loss) = iter.next().unwrap_or_else(|| (Grads::zeros(net), 0.0));
    for (g, l) in iter {
        grads.add(&g);
        loss += l;
    }
    (grads, loss)
}

fn chunk_gradient(net: &MaskedNet, bits: &[f32], rows: &[usize]) -> (Grads, f64) {
    let n = net.n;
    let nh = n * net.hidden;
    let masks = &net.masks.layers;
    let mut g = Grads::zeros(net);
    let mut h1 = vec![0.0f32; nh];
    let mut h2 = vec![0.0f32; nh];
    let mut logits = vec![0.0f32; n];
    let mut d2 = vec![0.0f32; nh];
    let mut d1 = vec![0.0f32; nh];
    let mut loss = 0.0f64;

    for &row in rows {
        let x = &bits[row * n..(row + 1) * n];
        net.forward_sparse(x, &mut h1, &mut h2, &mut logits);
        d2.iter_mut().for_each(|v| *v = 0.0);
        d1.iter_mut().for_each(|v| *v = 0.0);

        for i in 0..n {
            let p = sigmoid(logits[i]);
            let pc = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            loss -= if x[i] > 0.5 { pc.ln() } else { (1.0 - pc).ln() };
            let delta = (p - x[i] as f64) as f32;
            g.b[2][i] += delta;
            let w = &net.weights[2][i * nh..(i + 1) * nh];
            let gw = &mut g.w[2][i * nh..(i + 1) * nh];
            for c in masks[2].row_ranges[i].clone() {
                gw[c] += delta * h2[c];
                d2[c] += delta * w[c];
            }
        }
        for u in 0..nh {
            if h2[u] <= 0.0 {
                continue;
            }
            let delta = d2[u];
            g.b[1][u] += delta;
            let w = &net.weights[1][u * nh..(u + 1) * nh];
            let gw = &mut g.w[1][u * nh..(u + 1) * nh];
            for c in masks[1].row_ranges[u].clone() {
                gw[c] += delta * h1[c];
                d1[c] += delta * w[c];
            }
        }
        for u in 0..nh {
            if h1[u] <= 0.0 {
                continue;
            }
            let delta = d1[u];
            g.b[0][u] += delta;
            let gw = &mut g.w[0][u * n..(u + 1) * n];
            for c in masks[0].row_ranges[u].clone() {
                gw[c] += delta * x[c];
            }
        }
    }
    (g, loss)
}

struct Adam {
    t: i32,
    m: Grads,
    v: Grads,
}

impl Adam {
    fn new(net: &MaskedNet) -> Self {
        Self { t: 0, m: Grads::zeros(net), v: Grads::zeros(net) }
    }

    fn step(&mut self, net: &mut MaskedNet, grads: &Grads, batch_len: usize, cfg: &TrainConfig) {
        self.t += 1;
        let scale = 1.0 / batch_len as f64;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let lr = cfg.learning_rate * c2.sqrt() / c1;
        let update = |param: &mut f32, g: f32, m: &mut f32, v: &mut f32| {
            let g = g as f64 * scale;
            let mn = cfg.beta1 * *m as f64 + (1.0 - cfg.beta1) * g;
            let vn = cfg.beta2 * *v as f64 + (1.0 - cfg.beta2) * g * g;
            *m = mn as f32;
            *v = vn as f32;
            *param -= (lr * mn / (vn.sqrt() + cfg.eps)) as f32;
        };
        for l in 0..3 {
            let mask = &net.masks.layers[l];
            let cols = mask.cols;
            for (row, range) in mask.row_ranges.iter().enumerate() {
                for c in range.clone() {
                    let idx = row * cols + c;
                    update(&mut net.weights[l][idx], grads.w[l][idx], &mut self.m.w[l][idx], &mut self.v.w[l][idx]);
                }
                update(&mut net.biases[l][row], grads.b[l][row], &mut self.m.b[l][row], &mut self.v.b[l][row]);
            }
        }
    }
}
