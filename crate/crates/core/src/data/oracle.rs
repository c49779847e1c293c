use ethnum::U256;

use crate::armodel::{BitModel, PrefixWalk, PROB_FLOOR};
use crate::error::{Error, Result};
use crate::zorder::ZKey;

/// Bit model whose conditionals are exact frequencies of a key multiset.
///
/// `P(next = 1 | prefix)` is the share of keys with that prefix whose next bit
/// is 1, or 0.5 for a prefix no key has. Keys are held sorted, so the keys
/// sharing a prefix form one contiguous run and each step is a binary search.
#[derive(Clone, Debug)]
pub struct ExactOracle {
    n: usize,
    keys: Vec<ZKey>,
}

impl ExactOracle {
    pub fn new(mut keys: Vec<ZKey>, n: usize) -> Result<Self> {
        if n == 0 || n > 256 {
            return Err(Error::Input(format!("key length {n} out of range")));
        }
        if n < 256 {
            if let Some(k) = keys.iter().find(|k| k.0 >> n as u32 != U256::ZERO) {
                return Err(Error::Input(format!("key {k} does not fit in {n} bits")));
            }
        }
        keys.sort_unstable();
        Ok(Self { n, keys })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Keys strictly below `z`.
    pub fn rank(&self, z: ZKey) -> usize {
        self.keys.partition_point(|k| *k < z)
    }

    /// Occurrences of `z`.
    pub fn multiplicity(&self, z: ZKey) -> usize {
        self.keys.partition_point(|k| *k <= z) - self.rank(z)
    }
}

#[derive(Clone, Debug)]
pub struct OracleWalk<'a> {
    oracle: &'a ExactOracle,
    len: usize,
    prefix: U256,
    lo: usize,
    hi: usize,
}

impl OracleWalk<'_> {
    /// First index in the current run whose next bit is 1.
    fn split(&self) -> usize {
        let threshold = self.prefix | (U256::ONE << (self.oracle.n - self.len - 1) as u32);
        self.lo + self.oracle.keys[self.lo..self.hi].partition_point(|k| k.0 < threshold)
    }
}

impl PrefixWalk for OracleWalk<'_> {
    fn len(&self) -> usize {
        self.len
    }

    fn prob_one(&self) -> f64 {
        let count = self.hi - self.lo;
        if count == 0 || self.len >= self.oracle.n {
            return 0.5;
        }
        (self.hi - self.split()) as f64 / count as f64
    }

    fn push(&mut self, bit: bool) -> Result<()> {
        if self.len >= self.oracle.n {
            return Err(Error::PrefixState(format!("prefix already holds all {} bits", self.oracle.n)));
        }
        let split = self.split();
        if bit {
            self.prefix |= U256::ONE << (self.oracle.n - self.len - 1) as u32;
            self.lo = split;
        } else {
            self.hi = split;
        }
        self.len += 1;
        Ok(())
    }

    fn clear(&mut self) {
        self.len = 0;
        self.prefix = U256::ZERO;
        self.lo = 0;
        self.hi = self.oracle.keys.len();
    }
}

impl BitModel for ExactOracle {
    type Walk<'a> = OracleWalk<'a>;

    fn key_bits(&self) -> usize {
        self.n
    }

    fn walk(&self) -> OracleWalk<'_> {
        OracleWalk { oracle: self, len: 0, prefix: U256::ZERO, lo: 0, hi: self.keys.len() }
    }
}

/// One-pass count of ones at each bit position.
#[derive(Clone, Debug, PartialEq)]
pub struct BitFrequencies {
    pub total: u64,
    pub ones: Vec<u64>,
}

impl BitFrequencies {
    pub fn count(keys: &[ZKey], n: usize) -> Self {
        let mut ones = vec![0u64; n];
        for z in keys {
            for (i, c) in ones.iter_mut().enumerate() {
                *c += ((z.0 >> (n - 1 - i) as u32) & U256::ONE).as_u64();
            }
        }
        Self { total: keys.len() as u64, ones }
    }

    /// Per-tuple cross-entropy (nats) of the model that treats bits as
    /// independent coins with these marginals.
    pub fn cross_entropy(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.ones
            .iter()
            .map(|&c| {
                let p = (c as f64 / self.total as f64).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
                let q = c as f64 / self.total as f64;
                -(q * p.ln() + (1.0 - q) * (1.0 - p).ln())
            })
            .sum()
    }
}

/// Cross-entropy baseline a useful model must beat.
pub fn independence_cross_entropy(keys: &[ZKey], n: usize) -> f64 {
    BitFrequencies::count(keys, n).cross_entropy()
}
