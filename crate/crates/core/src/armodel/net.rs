use std::ops::Range;

use super::{BitModel, PrefixWalk, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::zorder::ZKey;

/// Connectivity of one layer: each row may read one contiguous column range.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerMask {
    pub rows: usize,
    pub cols: usize,
    pub row_ranges: Vec<Range<usize>>,
}

impl LayerMask {
    pub fn allows(&self, row: usize, col: usize) -> bool {
        self.row_ranges[row].contains(&col)
    }

    pub fn connections(&self) -> usize {
        self.row_ranges.iter().map(|r| r.len()).sum()
    }
}

/// Masks of the three layers: input -> hidden, hidden -> hidden, hidden -> output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskSet {
    pub link: usize,
    pub layers: [LayerMask; 3],
}

/// Pre-k masks. Hidden units of position `i` read previous-layer positions
/// `i-k..=i`; output `i` reads hidden positions `i-k..i`. Positions are 0-based
/// here. A `link` above `n` is clamped to `n`, which gives ordinary MADE masks.
pub fn build_masks(n: usize, link: usize, hidden: usize) -> Result<MaskSet> {
    if n == 0 || link == 0 || hidden == 0 {
        return Err(Error::Input(format!(
            "mask shape needs n, k, H >= 1 (got n={n}, k={link}, H={hidden})"
        )));
    }
    let k = if link > n {
        log::warn!("link width {link} exceeds key length {n}; clamping to {n}");
        n
    } else {
        link
    };
    let nh = n * hidden;
    let mut l1 = Vec::with_capacity(nh);
    let mut l2 = Vec::with_capacity(nh);
    for i in 0..n {
        let lo = i.saturating_sub(k);
        for _ in 0..hidden {
            l1.push(lo..i + 1);
            l2.push(lo * hidden..(i + 1) * hidden);
        }
    }
    let l3 = (0..n).map(|i| i.saturating_sub(k) * hidden..i * hidden).collect();
    Ok(MaskSet {
        link: k,
        layers: [
            LayerMask { rows: nh, cols: n, row_ranges: l1 },
            LayerMask { rows: nh, cols: nh, row_ranges: l2 },
            LayerMask { rows: n, cols: nh, row_ranges: l3 },
        ],
    })
}

/// Three-layer masked autoregressive net: ReLU hidden layers, sigmoid outputs.
///
/// Weights are stored dense and row-major; entries outside the masks are
/// always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedNet {
    pub(crate) n: usize,
    pub(crate) hidden: usize,
    pub(crate) masks: MaskSet,
    pub(crate) weights: [Vec<f32>; 3],
    pub(crate) biases: [Vec<f32>; 3],
}

impl MaskedNet {
    /// All-zero parameters.
    pub fn zeros(n: usize, link: usize, hidden: usize) -> Result<Self> {
        let masks = build_masks(n, link, hidden)?;
        let weights = [
            vec![0.0; masks.layers[0].rows * masks.layers[0].cols],
            vec![0.0; masks.layers[1].rows * masks.layers[1].cols],
            vec![0.0; masks.layers[2].rows * masks.layers[2].cols],
        ];
        let biases = [
            vec![0.0; masks.layers[0].rows],
            vec![0.0; masks.layers[1].rows],
            vec![0.0; masks.layers[2].rows],
        ];
        Ok(Self { n, hidden, masks, weights, biases })
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per unit, fan-in counted through the mask.
    pub fn init<R: rand::Rng>(n: usize, link: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(n, link, hidden)?;
        for l in 0..3 {
            let mask = net.masks.layers[l].clone();
            for (row, range) in mask.row_ranges.iter().enumerate() {
                let bound = 1.0 / (range.len().max(1) as f32).sqrt();
                for col in range.clone() {
                    net.weights[l][row * mask.cols + col] = rng.random_range(-bound..bound);
                }
                net.biases[l][row] = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    pub fn key_bits(&self) -> usize {
        self.n
    }

    pub fn link(&self) -> usize {
        self.masks.link
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn masks(&self) -> &MaskSet {
        &self.masks
    }

    pub fn weights(&self, layer: usize) -> &[f32] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f32] {
        &self.biases[layer]
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().chain(self.biases.iter()).map(Vec::len).sum()
    }

    /// Zeroes every weight the masks forbid.
    pub(crate) fn apply_masks(&mut self) {
        for l in 0..3 {
            let mask = &self.masks.layers[l];
            for (row, range) in mask.row_ranges.iter().enumerate() {
                let w = &mut self.weights[l][row * mask.cols..(row + 1) * mask.cols];
                for (col, v) in w.iter_mut().enumerate() {
                    if !range.contains(&col) {
                        *v = 0.0;
                    }
                }
            }
        }
    }

    /// Conditional probabilities `p_1..p_ell` for `z` in one dense pass over
    /// full layer matrices.
    pub fn forward_all(&self, z: ZKey, ell: usize) -> Vec<f64> {
        let n = self.n;
        let x: Vec<f32> = (1..=n).map(|pos| super::bit_at(n, z, pos) as u8 as f32).collect();
        let h1 = dense_layer(&self.weights[0], &self.biases[0], &x, true);
        let h2 = dense_layer(&self.weights[1], &self.biases[1], &h1, true);
        let logits = dense_layer(&self.weights[2], &self.biases[2], &h2, false);
        logits.iter().take(ell.min(n)).map(|&l| squash(l)).collect()
    }

    /// Sparse forward pass for training. Fills `h1`, `h2` and `logits`.
    pub(crate) fn forward_sparse(&self, x: &[f32], h1: &mut [f32], h2: &mut [f32], logits: &mut [f32]) {
        masked_layer(&self.weights[0], &self.biases[0], &self.masks.layers[0], x, h1, true);
        masked_layer(&self.weights[1], &self.biases[1], &self.masks.layers[1], h1, h2, true);
        masked_layer(&self.weights[2], &self.biases[2], &self.masks.layers[2], h2, logits, false);
    }

    fn unit(&self, layer: usize, row: usize, input: &[f32]) -> f32 {
        let mask = &self.masks.layers[layer];
        let w = &self.weights[layer][row * mask.cols..(row + 1) * mask.cols];
        let mut s = self.biases[layer][row];
        for col in mask.row_ranges[row].clone() {
            s += w[col] * input[col];
        }
        s
    }

    pub fn prefix_state(&self) -> PrefixState<'_> {
        PrefixState::new(self)
    }
}

fn dense_layer(w: &[f32], b: &[f32], input: &[f32], relu: bool) -> Vec<f32> {
    let cols = input.len();
    b.iter()
        .enumerate()
        .map(|(row, &bias)| {
            let mut s = bias;
            for (wv, xv) in w[row * cols..(row + 1) * cols].iter().zip(input) {
                s += wv * xv;
            }
            if relu {
                s.max(0.0)
            } else {
                s
            }
        })
        .collect()
}

fn masked_layer(w: &[f32], b: &[f32], mask: &LayerMask, input: &[f32], out: &mut [f32], relu: bool) {
    for (row, range) in mask.row_ranges.iter().enumerate() {
        let wr = &w[row * mask.cols..(row + 1) * mask.cols];
        let mut s = b[row];
        for col in range.clone() {
            s += wr[col] * input[col];
        }
        out[row] = if relu { s.max(0.0) } else { s };
    }
}

pub(crate) fn sigmoid(logit: f32) -> f64 {
    1.0 / (1.0 + (-(logit as f64)).exp())
}

fn squash(logit: f32) -> f64 {
    sigmoid(logit).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// Incremental inference along a prefix.
///
/// Fixing bit `j` computes only the hidden units of position `j` and the
/// output of position `j + 1`; earlier activations are reused. Each step reads
/// at most `k + 1` positions per layer, so its cost does not grow with `j`.
#[derive(Clone, Debug)]
pub struct PrefixState<'a> {
    net: &'a MaskedNet,
    len: usize,
    x: Vec<f32>,
    h1: Vec<f32>,
    h2: Vec<f32>,
    next: f64,
}

impl<'a> PrefixState<'a> {
    fn new(net: &'a MaskedNet) -> Self {
        let nh = net.n * net.hidden;
        let mut s = Self {
            net,
            len: 0,
            x: vec![0.0; net.n],
            h1: vec![0.0; nh],
            h2: vec![0.0; nh],
            next: 0.0,
        };
        s.next = squash(net.unit(2, 0, &s.h2));
        s
    }

    /// Fixes the next bit and returns `P(next bit = 1)` for the position after
    /// it, or `None` once the key is complete.
    pub fn extend(&mut self, bit: bool) -> Result<Option<f64>> {
        self.push(bit)?;
        Ok((self.len < self.net.n).then_some(self.next))
    }
}

impl PrefixWalk for PrefixState<'_> {
    fn len(&self) -> usize {
        self.len
    }

    fn prob_one(&self) -> f64 {
        self.next
    }

    fn push(&mut self, bit: bool) -> Result<()> {
        let net = self.net;
        let n = net.n;
        let h = net.hidden;
        let j = self.len;
        if j >= n {
            return Err(Error::PrefixState(format!("prefix already holds all {n} bits")));
        }
        self.x[j] = if bit { 1.0 } else { 0.0 };
        for a in 0..h {
            let u = j * h + a;
            self.h1[u] = net.unit(0, u, &self.x).max(0.0);
        }
        for a in 0..h {
            let u = j * h + a;
            self.h2[u] = net.unit(1, u, &self.h1).max(0.0);
        }
        self.len = j + 1;
        if self.len < n {
            self.next = squash(net.unit(2, self.len, &self.h2));
        }
        Ok(())
    }

    fn clear(&mut self) {
        // Stale activations beyond `len` are never read: every unit of a
        // position is rewritten before anything downstream reads it.
        self.len = 0;
        self.next = squash(self.net.unit(2, 0, &self.h2));
    }
}

impl BitModel for MaskedNet {
    type Walk<'a> = PrefixState<'a>;

    fn key_bits(&self) -> usize {
        self.n
    }

    fn walk(&self) -> PrefixState<'_> {
        self.prefix_state()
    }
}
