//! Autoregressive models over Z-order bits.
//!
//! A model factorises the key distribution as
//! `P(z) = P(z1) * P(z2 | z1) * ... * P(zn | z1..z(n-1))`. One walk down a key's
//! bit path yields both its CDF (mass of all keys ordered before it) and its
//! density (mass of the path itself).

mod io;
mod net;
mod train;

pub use io::{deserialize, load as load_model, save as save_model, serialize, MODEL_MAGIC, MODEL_VERSION};
pub use net::{build_masks, LayerMask, MaskSet, MaskedNet, PrefixState};
pub use train::{cross_entropy, train, TrainConfig, TrainReport};

use crate::error::Result;
use crate::zorder::{BitSpec, ZKey};

/// Emitted probabilities are kept inside this band before logs and products.
pub const PROB_FLOOR: f64 = 1e-6;

/// Conditional bit probabilities along a growing key prefix.
pub trait PrefixWalk {
    /// Number of bits fixed so far.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `P(Z_{len+1} = 1 | prefix)`.
    fn prob_one(&self) -> f64;

    /// Fixes the next bit. Fails once the prefix already has `n` bits.
    fn push(&mut self, bit: bool) -> Result<()>;

    /// Back to the empty prefix.
    fn clear(&mut self);
}

/// Anything that can hand out prefix walks over `n`-bit keys.
pub trait BitModel: Sync {
    type Walk<'a>: PrefixWalk
    where
        Self: 'a;

    fn key_bits(&self) -> usize;

    fn walk(&self) -> Self::Walk<'_>;
}

/// How the per-bit terms of a CDF call are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CdfForm {
    /// Each `z_i * (1 - p_i)` term is scaled by the mass of the shared prefix,
    /// which makes the sum equal the exact rank fraction under exact conditionals.
    #[default]
    Weighted,
    /// Plain `sum z_i * (1 - p_i)`; unbounded and kept only for comparison.
    Unweighted,
}

/// Result of one walk down a key path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathMass {
    /// Mass of keys whose first `ell` bits order strictly before the key's.
    pub cdf: f64,
    /// Mass of keys sharing the key's first `ell` bits.
    pub density: f64,
}

impl PathMass {
    /// Mass of keys whose `ell`-bit prefix orders at or before the key's.
    pub fn cdf_inclusive(&self) -> f64 {
        self.cdf + self.density
    }
}

/// Walks the first `ell` bits of `z` and accumulates CDF and prefix density.
pub fn path_mass<M: BitModel>(model: &M, z: ZKey, ell: usize, form: CdfForm) -> PathMass {
    let n = model.key_bits();
    let ell = ell.min(n);
    let mut walk = model.walk();
    let mut acc = 1.0f64;
    let mut cdf = 0.0f64;
    for pos in 1..=ell {
        let p = walk.prob_one();
        let bit = bit_at(n, z, pos);
        if bit {
            cdf += match form {
                CdfForm::Weighted => (1.0 - p) * acc,
                CdfForm::Unweighted => 1.0 - p,
            };
            acc *= p;
        } else {
            acc *= 1.0 - p;
        }
        if pos < ell {
            // cannot fail: pos < ell <= n
            let _ = walk.push(bit);
        }
    }
    let cdf = match form {
        CdfForm::Weighted => cdf.clamp(0.0, 1.0),
        CdfForm::Unweighted => cdf,
    };
    PathMass { cdf, density: acc }
}

/// Approximate CDF of `z` from its first `ell` bits.
pub fn cdf_call<M: BitModel>(model: &M, z: ZKey, ell: usize) -> f64 {
    path_mass(model, z, ell, CdfForm::Weighted).cdf
}

/// Joint probability of the full key path.
pub fn pdf_call<M: BitModel>(model: &M, z: ZKey) -> f64 {
    path_mass(model, z, model.key_bits(), CdfForm::Weighted).density
}

/// Conditional probabilities `p_1..p_ell` of `z`'s own path, one walk step each.
pub fn walk_probs<M: BitModel>(model: &M, z: ZKey, ell: usize) -> Vec<f64> {
    let n = model.key_bits();
    let mut walk = model.walk();
    let mut out = Vec::with_capacity(ell);
    for pos in 1..=ell.min(n) {
        out.push(walk.prob_one());
        if pos < n {
            let _ = walk.push(bit_at(n, z, pos));
        }
    }
    out
}

/// Bit at position `pos` (1-based from the MSB) of an `n`-bit key.
pub(crate) fn bit_at(n: usize, z: ZKey, pos: usize) -> bool {
    (z.0 >> (n - pos) as u32) & ethnum::U256::ONE == ethnum::U256::ONE
}

/// Convenience: bit layout check shared by callers that pair a model with keys.
pub fn check_model_layout<M: BitModel>(model: &M, spec: &BitSpec) -> Result<()> {
    if model.key_bits() != spec.key_bits() {
        return Err(crate::Error::Input(format!(
            "model expects {}-bit keys, layout has {} bits",
            model.key_bits(),
            spec.key_bits()
        )));
    }
    Ok(())
}
