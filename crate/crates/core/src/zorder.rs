//! Z-order (Morton) keys over `m` attributes of `b` bits each.
//!
//! Bit position 1 of a key is its most significant bit. Attribute bits are
//! interleaved MSB-first, attribute 1 leading each level, so position
//! `(j - 1) * m + i` holds bit `j` of attribute `i`. Keys live in a 256-bit
//! unsigned integer, which makes Z-order comparison plain integer comparison.
//!
//! BIGMIN / LITMAX follow the classic bit-scan of Tropf and Herzog: one pass
//! over the key bits with the box corners narrowed as the scan descends.

use std::fmt;

use ethnum::U256;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_DIMS: usize = 16;
pub const MAX_BITS: u32 = 64;
pub const MAX_KEY_BITS: usize = 256;

/// Attribute count `m`, bits per attribute `b`; the key length is `n = m * b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitSpec {
    m: usize,
    b: u32,
}

impl BitSpec {
    pub fn new(m: usize, b: u32) -> Result<Self> {
        if m == 0 || m > MAX_DIMS {
            return Err(Error::BitSpec(format!("dimension count {m} not in 1..={MAX_DIMS}")));
        }
        if b == 0 || b > MAX_BITS {
            return Err(Error::BitSpec(format!("bits per attribute {b} not in 1..={MAX_BITS}")));
        }
        if m * b as usize > MAX_KEY_BITS {
            return Err(Error::BitSpec(format!(
                "key length {} exceeds {MAX_KEY_BITS} bits",
                m * b as usize
            )));
        }
        Ok(Self { m, b })
    }

    pub fn dims(&self) -> usize {
        self.m
    }

    pub fn bits_per_dim(&self) -> u32 {
        self.b
    }

    /// Total key length `n`.
    pub fn key_bits(&self) -> usize {
        self.m * self.b as usize
    }

    /// Largest coordinate value an attribute can hold.
    pub fn max_coord(&self) -> u64 {
        if self.b == 64 {
            u64::MAX
        } else {
            (1u64 << self.b) - 1
        }
    }

    /// Number of bytes a key occupies on disk.
    pub fn key_bytes(&self) -> usize {
        self.key_bits().div_ceil(8)
    }

    /// Attribute (0-based) owning key position `pos` (1-based from the MSB).
    pub fn dim_of_position(&self, pos: usize) -> usize {
        (pos - 1) % self.m
    }

    /// Integer bit index (0 = LSB) of key position `pos` (1-based from the MSB).
    pub fn bit_index(&self, pos: usize) -> u32 {
        (self.key_bits() - pos) as u32
    }

    /// One mask per attribute selecting that attribute's key bits.
    pub fn dim_masks(&self) -> Vec<U256> {
        let n = self.key_bits();
        let mut masks = vec![U256::ZERO; self.m];
        for pos in 1..=n {
            masks[self.dim_of_position(pos)] |= U256::ONE << self.bit_index(pos);
        }
        masks
    }

    pub fn max_key(&self) -> ZKey {
        ZKey(low_ones(self.key_bits() as u32))
    }
}

fn low_ones(count: u32) -> U256 {
    if count == 0 {
        U256::ZERO
    } else if count >= 256 {
        U256::MAX
    } else {
        (U256::ONE << count) - U256::ONE
    }
}

/// A Morton code. Only the low `n` bits are meaningful.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ZKey(pub U256);

impl ZKey {
    pub const ZERO: ZKey = ZKey(U256::ZERO);

    pub fn from_u128(v: u128) -> Self {
        ZKey(U256::from(v))
    }

    pub fn as_u256(&self) -> U256 {
        self.0
    }

    /// Bit at key position `pos` (1-based from the MSB).
    pub fn bit(&self, spec: &BitSpec, pos: usize) -> bool {
        (self.0 >> spec.bit_index(pos)) & U256::ONE == U256::ONE
    }

    pub fn with_bit(self, spec: &BitSpec, pos: usize, bit: bool) -> Self {
        let m = U256::ONE << spec.bit_index(pos);
        if bit {
            ZKey(self.0 | m)
        } else {
            ZKey(self.0 & !m)
        }
    }

    pub fn checked_inc(self, spec: &BitSpec) -> Option<Self> {
        if self >= spec.max_key() {
            None
        } else {
            Some(ZKey(self.0 + U256::ONE))
        }
    }

    pub fn checked_dec(self) -> Option<Self> {
        if self.0 == U256::ZERO {
            None
        } else {
            Some(ZKey(self.0 - U256::ONE))
        }
    }

    /// Floor of the mean of two keys.
    pub fn midpoint(a: ZKey, b: ZKey) -> ZKey {
        ZKey((a.0 >> 1u32) + (b.0 >> 1u32) + (a.0 & b.0 & U256::ONE))
    }

    pub fn to_f64(self) -> f64 {
        self.0.as_f64()
    }

    /// Signed distance `self - origin` as a float.
    pub fn delta_f64(self, origin: ZKey) -> f64 {
        if self >= origin {
            (self.0 - origin.0).as_f64()
        } else {
            -(origin.0 - self.0).as_f64()
        }
    }

    /// Little-endian bytes truncated to the key width.
    pub fn to_le_bytes(self, spec: &BitSpec) -> Vec<u8> {
        self.0.to_le_bytes()[..spec.key_bytes()].to_vec()
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Self {
        let mut buf = [0u8; 32];
        buf[..bytes.len()].copy_from_slice(bytes);
        ZKey(U256::from_le_bytes(buf))
    }
}

impl fmt::Debug for ZKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ZKey({})", self.0)
    }
}

impl fmt::Display for ZKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Interleave `coords` into a Morton key.
pub fn encode(coords: &[u64], spec: &BitSpec) -> Result<ZKey> {
    if coords.len() != spec.dims() {
        return Err(Error::Input(format!(
            "expected {} coordinates, got {}",
            spec.dims(),
            coords.len()
        )));
    }
    let max = spec.max_coord();
    for (dim, &c) in coords.iter().enumerate() {
        if c > max {
            return Err(Error::Domain { dim, value: c, bits: spec.bits_per_dim() });
        }
    }
    Ok(encode_unchecked(coords, spec))
}

pub(crate) fn encode_unchecked(coords: &[u64], spec: &BitSpec) -> ZKey {
    let m = spec.dims();
    let b = spec.bits_per_dim();
    let mut z = U256::ZERO;
    for j in 0..b {
        let shift = b - 1 - j;
        for &c in coords {
            z = (z << 1u32) | U256::from((c >> shift) & 1);
        }
    }
    debug_assert!(m == coords.len());
    ZKey(z)
}

pub fn decode(z: ZKey, spec: &BitSpec) -> Vec<u64> {
    let m = spec.dims();
    let n = spec.key_bits();
    let mut coords = vec![0u64; m];
    for pos in 1..=n {
        let bit = z.bit(spec, pos) as u64;
        let d = spec.dim_of_position(pos);
        coords[d] = (coords[d] << 1) | bit;
    }
    coords
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: u64,
    pub hi: u64,
}

/// Conjunctive range predicate: one inclusive interval per attribute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryBox {
    pub dims: Vec<Interval>,
}

impl QueryBox {
    pub fn new(lo: &[u64], hi: &[u64], spec: &BitSpec) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::QueryBox("bound lists differ in length".into()));
        }
        let q = QueryBox {
            dims: lo.iter().zip(hi).map(|(&lo, &hi)| Interval { lo, hi }).collect(),
        };
        q.validate(spec)?;
        Ok(q)
    }

    /// The whole domain.
    pub fn full(spec: &BitSpec) -> Self {
        QueryBox {
            dims: vec![Interval { lo: 0, hi: spec.max_coord() }; spec.dims()],
        }
    }

    /// A single cell.
    pub fn point(coords: &[u64]) -> Self {
        QueryBox {
            dims: coords.iter().map(|&c| Interval { lo: c, hi: c }).collect(),
        }
    }

    /// Builds a box from optional per-dimension bounds; missing ones span the domain.
    pub fn from_partial(bounds: &[Option<(u64, u64)>], spec: &BitSpec) -> Result<Self> {
        let max = spec.max_coord();
        let dims = bounds
            .iter()
            .map(|b| match b {
                Some((lo, hi)) => Interval { lo: *lo, hi: *hi },
                None => Interval { lo: 0, hi: max },
            })
            .collect();
        let q = QueryBox { dims };
        q.validate(spec)?;
        Ok(q)
    }

    pub fn validate(&self, spec: &BitSpec) -> Result<()> {
        if self.dims.len() != spec.dims() {
            return Err(Error::QueryBox(format!(
                "box has {} dimensions, layout has {}",
                self.dims.len(),
                spec.dims()
            )));
        }
        let max = spec.max_coord();
        for (d, iv) in self.dims.iter().enumerate() {
            if iv.lo > iv.hi {
                return Err(Error::QueryBox(format!("dimension {d}: lo {} > hi {}", iv.lo, iv.hi)));
            }
            if iv.hi > max {
                return Err(Error::QueryBox(format!("dimension {d}: hi {} exceeds {max}", iv.hi)));
            }
        }
        Ok(())
    }

    pub fn contains_coords(&self, coords: &[u64]) -> bool {
        self.dims.iter().zip(coords).all(|(iv, &c)| iv.lo <= c && c <= iv.hi)
    }

    pub fn lo(&self) -> Vec<u64> {
        self.dims.iter().map(|iv| iv.lo).collect()
    }

    pub fn hi(&self) -> Vec<u64> {
        self.dims.iter().map(|iv| iv.hi).collect()
    }
}

/// `(zmin, zmax)`: keys of the low and high box corners.
pub fn box_endpoints(q: &QueryBox, spec: &BitSpec) -> (ZKey, ZKey) {
    (encode_unchecked(&q.lo(), spec), encode_unchecked(&q.hi(), spec))
}

/// A query box prepared for Z-space operations.
///
/// Per-attribute masks make containment O(m): the bits of one attribute keep
/// their relative order inside the key, so `z & mask` is monotone in that
/// attribute's coordinate.
#[derive(Clone, Debug)]
pub struct ZRegion {
    spec: BitSpec,
    zmin: ZKey,
    zmax: ZKey,
    masks: Vec<U256>,
}

impl ZRegion {
    pub fn new(q: &QueryBox, spec: &BitSpec) -> Result<Self> {
        q.validate(spec)?;
        let (zmin, zmax) = box_endpoints(q, spec);
        Ok(Self { spec: *spec, zmin, zmax, masks: spec.dim_masks() })
    }

    pub fn spec(&self) -> &BitSpec {
        &self.spec
    }

    pub fn zmin(&self) -> ZKey {
        self.zmin
    }

    pub fn zmax(&self) -> ZKey {
        self.zmax
    }

    pub fn contains(&self, z: ZKey) -> bool {
        self.masks.iter().all(|&mask| {
            let v = z.0 & mask;
            (self.zmin.0 & mask) <= v && v <= (self.zmax.0 & mask)
        })
    }

    /// Bits of `mask`'s attribute strictly below bit index `idx`.
    fn lower_bits(&self, dim: usize, idx: u32) -> U256 {
        self.masks[dim] & low_ones(idx)
    }

    /// Sets bit `idx` and clears the same attribute's lower bits.
    fn load_1000(&self, v: U256, dim: usize, idx: u32) -> U256 {
        (v & !self.lower_bits(dim, idx)) | (U256::ONE << idx)
    }

    /// Clears bit `idx` and sets the same attribute's lower bits.
    fn load_0111(&self, v: U256, dim: usize, idx: u32) -> U256 {
        (v & !(U256::ONE << idx)) | self.lower_bits(dim, idx)
    }

    /// Smallest in-box key `>= z`.
    pub fn next_at_or_after(&self, z: ZKey) -> Option<ZKey> {
        let n = self.spec.key_bits();
        let mut lo = self.zmin.0;
        let mut hi = self.zmax.0;
        let mut best: Option<U256> = None;
        for pos in 1..=n {
            let idx = self.spec.bit_index(pos);
            let dim = self.spec.dim_of_position(pos);
            let zb = (z.0 >> idx) & U256::ONE == U256::ONE;
            let lb = (lo >> idx) & U256::ONE == U256::ONE;
            let hb = (hi >> idx) & U256::ONE == U256::ONE;
            match (zb, lb, hb) {
                (false, false, false) | (true, true, true) => {}
                (false, false, true) => {
                    best = Some(self.load_1000(lo, dim, idx));
                    hi = self.load_0111(hi, dim, idx);
                }
                (false, true, true) => return Some(ZKey(lo)),
                (true, false, false) => return best.map(ZKey),
                (true, false, true) => lo = self.load_1000(lo, dim, idx),
                // lo > hi on this bit cannot happen for a valid box.
                (_, true, false) => unreachable!("box corners out of order"),
            }
        }
        Some(z)
    }

    /// Largest in-box key `<= z`.
    pub fn prev_at_or_before(&self, z: ZKey) -> Option<ZKey> {
        let n = self.spec.key_bits();
        let mut lo = self.zmin.0;
        let mut hi = self.zmax.0;
        let mut best: Option<U256> = None;
        for pos in 1..=n {
            let idx = self.spec.bit_index(pos);
            let dim = self.spec.dim_of_position(pos);
            let zb = (z.0 >> idx) & U256::ONE == U256::ONE;
            let lb = (lo >> idx) & U256::ONE == U256::ONE;
            let hb = (hi >> idx) & U256::ONE == U256::ONE;
            match (zb, lb, hb) {
                (false, false, false) | (true, true, true) => {}
                (false, false, true) => hi = self.load_0111(hi, dim, idx),
                (true, false, true) => {
                    best = Some(self.load_0111(hi, dim, idx));
                    lo = self.load_1000(lo, dim, idx);
                }
                (false, true, true) => return best.map(ZKey),
                (true, false, false) => return Some(ZKey(hi)),
                (_, true, false) => unreachable!("box corners out of order"),
            }
        }
        Some(z)
    }

    /// BIGMIN: smallest in-box key strictly greater than `z`.
    pub fn bigmin(&self, z: ZKey) -> Option<ZKey> {
        if z >= self.zmax {
            return None;
        }
        self.next_at_or_after(ZKey(z.0 + U256::ONE))
    }

    /// LITMAX: largest in-box key strictly less than `z`.
    pub fn litmax(&self, z: ZKey) -> Option<ZKey> {
        if z <= self.zmin {
            return None;
        }
        self.prev_at_or_before(ZKey(z.0 - U256::ONE))
    }

    /// Does the cell fixed by the first `len` bits of `prefix` overlap the box?
    pub fn prefix_intersects(&self, prefix: ZKey, len: usize) -> bool {
        let n = self.spec.key_bits();
        debug_assert!(len <= n);
        let free = low_ones((n - len) as u32);
        let cell_lo = prefix.0 & !free;
        let cell_hi = cell_lo | free;
        self.masks.iter().all(|&mask| {
            (cell_lo & mask) <= (self.zmax.0 & mask) && (cell_hi & mask) >= (self.zmin.0 & mask)
        })
    }

    /// Does the whole cell fixed by the first `len` bits of `prefix` lie in the box?
    pub fn cell_inside(&self, prefix: ZKey, len: usize) -> bool {
        let n = self.spec.key_bits();
        let free = low_ones((n - len) as u32);
        let cell_lo = prefix.0 & !free;
        let cell_hi = cell_lo | free;
        self.masks.iter().all(|&mask| {
            (cell_lo & mask) >= (self.zmin.0 & mask) && (cell_hi & mask) <= (self.zmax.0 & mask)
        })
    }

    /// Intersection test for a one-bit extension of a prefix whose cell is
    /// already known to overlap the box. Only the attribute owning position
    /// `pos` changes, so only that attribute is checked.
    ///
    /// `cell_lo` is the prefix with all free bits zero, including `pos`.
    pub fn extension_intersects(&self, cell_lo: ZKey, pos: usize, bit: bool) -> bool {
        let n = self.spec.key_bits();
        let dim = self.spec.dim_of_position(pos);
        let idx = self.spec.bit_index(pos);
        let mask = self.masks[dim];
        let free = low_ones((n - pos) as u32);
        let lo = if bit { cell_lo.0 | (U256::ONE << idx) } else { cell_lo.0 };
        let hi = lo | free;
        (lo & mask) <= (self.zmax.0 & mask) && (hi & mask) >= (self.zmin.0 & mask)
    }
}

/// Free-function form of [`ZRegion::bigmin`].
pub fn get_bigmin(q: &QueryBox, z: ZKey, spec: &BitSpec) -> Result<Option<ZKey>> {
    Ok(ZRegion::new(q, spec)?.bigmin(z))
}

/// Free-function form of [`ZRegion::litmax`].
pub fn get_litmax(q: &QueryBox, z: ZKey, spec: &BitSpec) -> Result<Option<ZKey>> {
    Ok(ZRegion::new(q, spec)?.litmax(z))
}

pub fn contains(q: &QueryBox, z: ZKey, spec: &BitSpec) -> bool {
    q.contains_coords(&decode(z, spec))
}

pub fn prefix_intersects(prefix: ZKey, len: usize, q: &QueryBox, spec: &BitSpec) -> Result<bool> {
    Ok(ZRegion::new(q, spec)?.prefix_intersects(prefix, len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Naive interleaver: builds the bit string position by position.
    fn reference_interleave(coords: &[u64], m: usize, b: u32) -> u128 {
        let mut bits = Vec::new();
        for j in 1..=b {
            for &c in coords.iter().take(m) {
                bits.push((c >> (b - j)) & 1);
            }
        }
        bits.iter().fold(0u128, |acc, &bit| acc * 2 + bit as u128)
    }

    fn all_boxes(spec: &BitSpec) -> Vec<QueryBox> {
        let side = spec.max_coord() + 1;
        let mut out = Vec::new();
        for x0 in 0..side {
            for x1 in x0..side {
                for y0 in 0..side {
                    for y1 in y0..side {
                        out.push(QueryBox::new(&[x0, y0], &[x1, y1], spec).unwrap());
                    }
                }
            }
        }
        out
    }

    #[test]
    fn encode_small_cases() {
        let spec = BitSpec::new(2, 2).unwrap();
        assert_eq!(encode(&[0, 0], &spec).unwrap(), ZKey::ZERO);
        assert_eq!(encode(&[1, 1], &spec).unwrap(), ZKey::from_u128(3));
        assert_eq!(decode(ZKey::from_u128(3), &spec), vec![1, 1]);
        assert_eq!(decode(ZKey::ZERO, &spec), vec![0, 0]);
    }

    #[test]
    fn encode_matches_reference_interleaver() {
        let spec = BitSpec::new(2, 3).unwrap();
        let expected = reference_interleave(&[5, 2], 2, 3);
        // 5 = 101, 2 = 010 -> 10 01 10
        assert_eq!(expected, 0b100110);
        assert_eq!(encode(&[5, 2], &spec).unwrap(), ZKey::from_u128(expected));

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let m = rng.random_range(1..=4usize);
            let b = rng.random_range(1..=16u32);
            let spec = BitSpec::new(m, b).unwrap();
            let coords: Vec<u64> = (0..m).map(|_| rng.random_range(0..=spec.max_coord())).collect();
            assert_eq!(
                encode(&coords, &spec).unwrap(),
                ZKey::from_u128(reference_interleave(&coords, m, b))
            );
        }
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let spec = BitSpec::new(3, 4).unwrap();
        match encode(&[1, 16, 2], &spec) {
            Err(Error::Domain { dim, value, .. }) => {
                assert_eq!(dim, 1);
                assert_eq!(value, 16);
            }
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn wide_keys_round_trip() {
        let spec = BitSpec::new(4, 64).unwrap();
        let coords = [u64::MAX, 0, 0x0123_4567_89ab_cdef, 1];
        let z = encode(&coords, &spec).unwrap();
        assert_eq!(decode(z, &spec), coords.to_vec());
        assert_eq!(ZKey::from_le_bytes(&z.to_le_bytes(&spec)), z);
    }

    #[test]
    fn box_endpoint_cases() {
        let spec = BitSpec::new(2, 4).unwrap();
        let full = QueryBox::full(&spec);
        assert_eq!(box_endpoints(&full, &spec), (ZKey::ZERO, ZKey::from_u128(255)));
        let p = QueryBox::point(&[3, 9]);
        let z = encode(&[3, 9], &spec).unwrap();
        assert_eq!(box_endpoints(&p, &spec), (z, z));
        // X = 0, 4 <= Y <= 8
        let q = QueryBox::new(&[0, 4], &[0, 8], &spec).unwrap();
        assert_eq!(box_endpoints(&q, &spec), (ZKey::from_u128(16), ZKey::from_u128(64)));
    }

    #[test]
    fn split_query_midpoint_neighbours() {
        // Midpoint 40 of [16, 64] lies outside the box; the in-box keys around
        // it are 21 (below) and 64 (above).
        let spec = BitSpec::new(2, 4).unwrap();
        let q = QueryBox::new(&[0, 4], &[0, 8], &spec).unwrap();
        let r = ZRegion::new(&q, &spec).unwrap();
        let mid = ZKey::midpoint(r.zmin(), r.zmax());
        assert_eq!(mid, ZKey::from_u128(40));
        assert!(!r.contains(mid));
        assert_eq!(r.litmax(mid), Some(ZKey::from_u128(21)));
        assert_eq!(r.bigmin(mid), Some(ZKey::from_u128(64)));
    }

    #[test]
    fn bigmin_litmax_trivial_edges() {
        let spec = BitSpec::new(2, 4).unwrap();
        let q = QueryBox::new(&[2, 3], &[9, 5], &spec).unwrap();
        let r = ZRegion::new(&q, &spec).unwrap();
        assert_eq!(r.bigmin(r.zmax()), None);
        assert_eq!(r.bigmin(r.zmin().checked_dec().unwrap()), Some(r.zmin()));
        assert_eq!(r.litmax(r.zmin()), None);
        assert_eq!(r.litmax(r.zmax().checked_inc(&spec).unwrap()), Some(r.zmax()));
    }

    #[test]
    fn bigmin_litmax_exhaustive_2x4() {
        let spec = BitSpec::new(2, 4).unwrap();
        for q in all_boxes(&spec) {
            let r = ZRegion::new(&q, &spec).unwrap();
            let inside: Vec<bool> =
                (0..256u128).map(|z| q.contains_coords(&decode(ZKey::from_u128(z), &spec))).collect();
            for z in 0..256u128 {
                let key = ZKey::from_u128(z);
                let big = ((z + 1)..256).find(|&c| inside[c as usize]).map(ZKey::from_u128);
                let lit = (0..z).rev().find(|&c| inside[c as usize]).map(ZKey::from_u128);
                assert_eq!(r.bigmin(key), big, "bigmin {q:?} z={z}");
                assert_eq!(r.litmax(key), lit, "litmax {q:?} z={z}");
                assert_eq!(r.contains(key), inside[z as usize]);
            }
        }
    }

    #[test]
    fn bigmin_litmax_random_3d() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let b = rng.random_range(1..=5u32);
            let spec = BitSpec::new(3, b).unwrap();
            let max = spec.max_coord();
            let mut lo = vec![0; 3];
            let mut hi = vec![0; 3];
            for d in 0..3 {
                let a = rng.random_range(0..=max);
                let c = rng.random_range(0..=max);
                lo[d] = a.min(c);
                hi[d] = a.max(c);
            }
            let q = QueryBox::new(&lo, &hi, &spec).unwrap();
            let r = ZRegion::new(&q, &spec).unwrap();
            let total = 1u128 << spec.key_bits();
            let inside: Vec<bool> =
                (0..total).map(|z| q.contains_coords(&decode(ZKey::from_u128(z), &spec))).collect();
            for _ in 0..64 {
                let z = rng.random_range(0..total);
                let big = ((z + 1)..total).find(|&c| inside[c as usize]).map(ZKey::from_u128);
                let lit = (0..z).rev().find(|&c| inside[c as usize]).map(ZKey::from_u128);
                assert_eq!(r.bigmin(ZKey::from_u128(z)), big);
                assert_eq!(r.litmax(ZKey::from_u128(z)), lit);
            }
        }
    }

    #[test]
    fn contains_agrees_with_interval_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = BitSpec::new(3, 10).unwrap();
        for _ in 0..1000 {
            let mut lo = vec![0; 3];
            let mut hi = vec![0; 3];
            for d in 0..3 {
                let a = rng.random_range(0..1024);
                let c = rng.random_range(0..1024);
                lo[d] = a.min(c);
                hi[d] = a.max(c);
            }
            let q = QueryBox::new(&lo, &hi, &spec).unwrap();
            let coords: Vec<u64> = (0..3).map(|_| rng.random_range(0..1024)).collect();
            let z = encode(&coords, &spec).unwrap();
            let r = ZRegion::new(&q, &spec).unwrap();
            assert_eq!(r.contains(z), q.contains_coords(&coords));
            assert_eq!(contains(&q, z, &spec), q.contains_coords(&coords));
        }
        let full = QueryBox::full(&spec);
        let r = ZRegion::new(&full, &spec).unwrap();
        assert!(r.contains(ZKey::from_u128(123_456)));
        assert!(r.contains(r.zmin()));
    }

    #[test]
    fn prefix_intersects_matches_enumeration() {
        let spec = BitSpec::new(2, 3).unwrap();
        for q in all_boxes(&spec) {
            let r = ZRegion::new(&q, &spec).unwrap();
            assert!(r.prefix_intersects(ZKey::ZERO, 0));
            for len in 0..=6usize {
                for prefix in 0..(1u128 << len) {
                    let key = ZKey::from_u128(prefix << (6 - len));
                    let expected = (0..(1u128 << (6 - len))).any(|tail| {
                        let z = ZKey::from_u128((prefix << (6 - len)) | tail);
                        q.contains_coords(&decode(z, &spec))
                    });
                    assert_eq!(r.prefix_intersects(key, len), expected, "{q:?} len={len} p={prefix}");
                }
            }
            // the zmin path always survives
            for len in 0..=6 {
                assert!(r.prefix_intersects(r.zmin(), len));
            }
        }
    }

    #[test]
    fn extension_check_matches_full_check() {
        let spec = BitSpec::new(2, 3).unwrap();
        for q in all_boxes(&spec).into_iter().step_by(7) {
            let r = ZRegion::new(&q, &spec).unwrap();
            for len in 0..6usize {
                for prefix in 0..(1u128 << len) {
                    let cell_lo = ZKey::from_u128(prefix << (6 - len));
                    if !r.prefix_intersects(cell_lo, len) {
                        continue;
                    }
                    for bit in [false, true] {
                        let ext = cell_lo.with_bit(&spec, len + 1, bit);
                        assert_eq!(
                            r.extension_intersects(cell_lo, len + 1, bit),
                            r.prefix_intersects(ext, len + 1)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn cell_inside_matches_enumeration() {
        let spec = BitSpec::new(2, 3).unwrap();
        for q in all_boxes(&spec).into_iter().step_by(5) {
            let r = ZRegion::new(&q, &spec).unwrap();
            for len in 0..=6usize {
                for prefix in 0..(1u128 << len) {
                    let lo = prefix << (6 - len);
                    let all_in = (lo..lo + (1 << (6 - len))).all(|z| r.contains(ZKey::from_u128(z)));
                    assert_eq!(r.cell_inside(ZKey::from_u128(lo), len), all_in);
                }
            }
        }
    }

    #[test]
    fn bitspec_limits() {
        assert!(BitSpec::new(0, 4).is_err());
        assert!(BitSpec::new(17, 4).is_err());
        assert!(BitSpec::new(2, 65).is_err());
        assert!(BitSpec::new(16, 16).is_ok());
        assert!(BitSpec::new(8, 33).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn round_trip(m in 1usize..=6, b in 1u32..=40, seed in any::<u64>()) {
                let spec = BitSpec::new(m, b).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let coords: Vec<u64> = (0..m).map(|_| rng.random_range(0..=spec.max_coord())).collect();
                let z = encode(&coords, &spec).unwrap();
                prop_assert_eq!(decode(z, &spec), coords);
            }

            #[test]
            fn order_isomorphism(a in prop::collection::vec(0u64..256, 3), c in prop::collection::vec(0u64..256, 3)) {
                let spec = BitSpec::new(3, 8).unwrap();
                let za = encode(&a, &spec).unwrap();
                let zc = encode(&c, &spec).unwrap();
                // lexicographic comparison of the interleaved bit strings
                let bits = |v: &[u64]| {
                    let mut s = Vec::new();
                    for j in 1..=8u32 { for x in v { s.push((x >> (8 - j)) & 1); } }
                    s
                };
                prop_assert_eq!(za.cmp(&zc), bits(&a).cmp(&bits(&c)));
            }

            #[test]
            fn prefix_monotone(seed in any::<u64>()) {
                let spec = BitSpec::new(3, 4).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut lo = vec![0; 3];
                let mut hi = vec![0; 3];
                for d in 0..3 {
                    let a = rng.random_range(0..16);
                    let c = rng.random_range(0..16);
                    lo[d] = a.min(c);
                    hi[d] = a.max(c);
                }
                let q = QueryBox::new(&lo, &hi, &spec).unwrap();
                let r = ZRegion::new(&q, &spec).unwrap();
                let key = ZKey::from_u128(rng.random_range(0..4096));
                for len in 0..12 {
                    if !r.prefix_intersects(key, len) {
                        prop_assert!(!r.prefix_intersects(key, len + 1));
                    }
                }
            }
        }
    }
}
