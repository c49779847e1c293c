//! Learned Z-order index: model root, per-bucket linear refinement, leaf pages.
//!
//! The model's CDF picks a bucket, the bucket's piecewise-linear segments turn
//! the key into a CDF band that is guaranteed to contain the key's true rank,
//! and the band maps arithmetically onto fixed-capacity pages.

mod io;
mod segment;

pub use io::{load_index, read_index, save_index, write_index, INDEX_MAGIC, INDEX_VERSION};
pub use segment::{fit_segments, LinearSegment};

use std::ops::RangeInclusive;

use crate::armodel::{cdf_call, BitModel, MaskedNet};
use crate::error::{Error, Result};
use crate::zorder::{QueryBox, ZKey, ZRegion};
use crate::BitSpec;

pub const DEFAULT_FANOUT: usize = 100;
pub const DEFAULT_SUBMODELS_PER_MILLION: f64 = 128.0;
pub const DEFAULT_BERR_FRAC: f64 = 0.1;

/// Slack, in pages, applied to both ends of a CDF band before flooring.
const PAGE_SLACK: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct IndexConfig {
    /// Page capacity `B`.
    pub fanout: usize,
    pub submodels_per_million: f64,
    /// Error bound as a fraction of one page's CDF mass `B / N`.
    pub berr_frac: f64,
    /// Bits read by each CDF call.
    pub ell: usize,
}

impl Default for IndexConfig {
    fn default() -> Self {
        Self {
            fanout: DEFAULT_FANOUT,
            submodels_per_million: DEFAULT_SUBMODELS_PER_MILLION,
            berr_frac: DEFAULT_BERR_FRAC,
            ell: 32,
        }
    }
}

/// A resident tuple: its key and the row it came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Slot {
    pub key: ZKey,
    pub row: u64,
}

/// Page directory entry. Page `p` holds slots `p*B .. min((p+1)*B, N)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LeafPage {
    pub zmin: ZKey,
    pub zmax: ZKey,
}

/// Location of a point-query hit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PointHit {
    pub page: usize,
    pub slot: usize,
    pub row: u64,
}

/// Counters from one range traversal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanStats {
    pub count: u64,
    /// Tuples compared against the box.
    pub scanned: u64,
    /// Gap skips taken through BIGMIN.
    pub jumps: u64,
}

#[derive(Clone, Debug)]
pub struct CardIndex<M = MaskedNet> {
    pub(crate) model: M,
    pub(crate) spec: BitSpec,
    pub(crate) ell: usize,
    pub(crate) fanout: usize,
    pub(crate) b_err: f64,
    pub(crate) buckets: Vec<Vec<LinearSegment>>,
    pub(crate) pages: Vec<LeafPage>,
    pub(crate) slots: Vec<Slot>,
}

/// Submodel count for `rows` tuples at `per_million` per million, at least one.
pub fn submodel_count(rows: usize, per_million: f64) -> usize {
    ((rows as f64 * per_million / 1e6).ceil() as usize).max(1)
}

impl<M: BitModel> CardIndex<M> {
    /// Sorts the tuples, packs pages and fits per-bucket segments against true ranks.
    pub fn build(model: M, spec: BitSpec, mut slots: Vec<Slot>, cfg: &IndexConfig) -> Result<Self> {
        let n_rows = slots.len();
        if cfg.fanout == 0 {
            return Err(Error::Build("page capacity must be at least 1".into()));
        }
        if model.key_bits() != spec.key_bits() {
            return Err(Error::Build(format!(
                "model reads {}-bit keys, layout has {} bits",
                model.key_bits(),
                spec.key_bits()
            )));
        }
        if cfg.ell == 0 || cfg.ell > spec.key_bits() {
            return Err(Error::Build(format!("CDF length {} must be in 1..={}", cfg.ell, spec.key_bits())));
        }
        let b_err = if n_rows == 0 { 0.0 } else { cfg.berr_frac * cfg.fanout as f64 / n_rows as f64 };
        if n_rows > 0 {
            let bound = cfg.fanout as f64 / 2.0 / n_rows as f64;
            if !(b_err >= 0.0) || b_err > bound {
                return Err(Error::Build(format!(
                    "error bound {b_err:e} exceeds half a page of CDF mass; it must be at most {bound:e} (berr-frac <= 0.5)"
                )));
            }
        }
        slots.sort_unstable();

        // true CDF of a key: rank of its first copy
        let mut points: Vec<(ZKey, f64)> = Vec::new();
        for (i, s) in slots.iter().enumerate() {
            if i == 0 || slots[i - 1].key != s.key {
                points.push((s.key, i as f64 / n_rows as f64));
            }
        }
        let n_s = submodel_count(n_rows, cfg.submodels_per_million);
        let cdfs = model_cdfs(&model, points.iter().map(|p| p.0), cfg.ell);
        let mut grouped: Vec<Vec<(ZKey, f64)>> = vec![Vec::new(); n_s];
        for (p, c) in points.iter().zip(cdfs) {
            grouped[bucket_of(c, n_s)].push(*p);
        }
        let buckets = grouped.iter().map(|g| fit_segments(g, b_err)).collect();

        let pages = slots
            .chunks(cfg.fanout)
            .map(|c| LeafPage { zmin: c[0].key, zmax: c[c.len() - 1].key })
            .collect();
        Ok(Self { model, spec, ell: cfg.ell, fanout: cfg.fanout, b_err, buckets, pages, slots })
    }

    /// Build over `keys`, using each key's position as its row id.
    pub fn from_keys(model: M, spec: BitSpec, keys: &[ZKey], cfg: &IndexConfig) -> Result<Self> {
        let slots = keys.iter().enumerate().map(|(i, &key)| Slot { key, row: i as u64 }).collect();
        Self::build(model, spec, slots, cfg)
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn spec(&self) -> &BitSpec {
        &self.spec
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn fanout(&self) -> usize {
        self.fanout
    }

    pub fn b_err(&self) -> f64 {
        self.b_err
    }

    pub fn buckets(&self) -> &[Vec<LinearSegment>] {
        &self.buckets
    }

    pub fn pages(&self) -> &[LeafPage] {
        &self.pages
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn page_slots(&self, page: usize) -> &[Slot] {
        let start = page * self.fanout;
        &self.slots[start..(start + self.fanout).min(self.slots.len())]
    }

    pub fn segment_count(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    /// Model CDF of `z` from its first `ell` bits.
    pub fn model_cdf(&self, z: ZKey) -> f64 {
        cdf_call(&self.model, z, self.ell)
    }

    /// CDF band `[lo, hi]` for `z` from its bucket's segments. For a resident
    /// key the band contains the key's true rank fraction.
    pub fn cdf_band(&self, z: ZKey) -> Option<(f64, f64)> {
        let bucket = &self.buckets[bucket_of(self.model_cdf(z), self.buckets.len())];
        segment::find_segment(bucket, z).map(|s| s.band(z))
    }

    /// Pages whose positions the CDF band can fall in.
    pub fn find_page(&self, cdf_lo: f64, cdf_hi: f64) -> RangeInclusive<usize> {
        if self.pages.is_empty() {
            #[allow(clippy::reversed_empty_ranges)]
            return 1..=0;
        }
        let last = self.pages.len() - 1;
        let per_page = self.slots.len() as f64 / self.fanout as f64;
        let lo = (cdf_lo * per_page - PAGE_SLACK).floor().max(0.0) as usize;
        let hi = (cdf_hi * per_page + PAGE_SLACK).floor().max(0.0) as usize;
        lo.min(last)..=hi.min(last)
    }

    /// First slot holding `z`, searching the predicted band and then one
    /// neighbouring page on each side.
    pub fn point_query(&self, z: ZKey) -> Option<PointHit> {
        self.point_query_traced(z).0
    }

    /// [`point_query`](Self::point_query) plus the number of pages it read.
    pub fn point_query_traced(&self, z: ZKey) -> (Option<PointHit>, usize) {
        let Some(band) = self.band_pages(z) else {
            return (None, 0);
        };
        let mut touched = 0;
        for p in band.clone() {
            touched += 1;
            if let Some(hit) = self.scan_page(p, z) {
                return (Some(hit), touched);
            }
        }
        let (lo, hi) = band.into_inner();
        let neighbours = [lo.checked_sub(1), Some(hi + 1).filter(|&p| p < self.pages.len())];
        for p in neighbours.into_iter().flatten() {
            touched += 1;
            if let Some(hit) = self.scan_page(p, z) {
                return (Some(hit), touched);
            }
        }
        (None, touched)
    }

    fn band_pages(&self, z: ZKey) -> Option<RangeInclusive<usize>> {
        if self.pages.is_empty() {
            return None;
        }
        let (lo, hi) = self.cdf_band(z)?;
        Some(self.find_page(lo, hi))
    }

    fn scan_page(&self, page: usize, z: ZKey) -> Option<PointHit> {
        let s = self.page_slots(page);
        let i = s.partition_point(|slot| slot.key < z);
        (i < s.len() && s[i].key == z).then(|| PointHit { page, slot: page * self.fanout + i, row: s[i].row })
    }

    /// Number of tuples with keys in `[lo, hi]`, by binary search on the slots.
    pub fn count_between(&self, lo: ZKey, hi: ZKey) -> usize {
        if lo > hi {
            return 0;
        }
        let start = self.slots.partition_point(|s| s.key < lo);
        let end = self.slots.partition_point(|s| s.key <= hi);
        end - start
    }

    /// Index of the first slot with key `>= z` (`len()` if none).
    ///
    /// Starts from the model's predicted page and walks the page directory to
    /// the page that must hold the answer.
    pub fn locate(&self, z: ZKey) -> usize {
        if self.pages.is_empty() {
            return 0;
        }
        let last = self.pages.len() - 1;
        let mut p = self.band_pages(z).map(|r| *r.start()).unwrap_or(0);
        // the answer lives in the first page whose zmax reaches z
        let first_reaching = |lo: usize, hi: usize| lo + self.pages[lo..=hi].partition_point(|pg| pg.zmax < z);
        if self.pages[p].zmax < z {
            let (mut lo, mut step) = (p + 1, 1);
            loop {
                if lo > last {
                    return self.slots.len();
                }
                let hi = (lo + step - 1).min(last);
                if self.pages[hi].zmax >= z {
                    p = first_reaching(lo, hi);
                    break;
                }
                lo = hi + 1;
                step *= 2;
            }
        } else if p > 0 && self.pages[p - 1].zmax >= z {
            // pages[hi] always reaches z here
            let (mut hi, mut step) = (p - 1, 1);
            loop {
                let lo = hi.saturating_sub(step);
                if lo == 0 || self.pages[lo].zmax < z {
                    p = first_reaching(lo, hi);
                    break;
                }
                hi = lo;
                step *= 2;
            }
        }
        let s = self.page_slots(p);
        p * self.fanout + s.partition_point(|slot| slot.key < z)
    }

    /// Row ids of all tuples inside `q`, in Z order.
    pub fn range_query(&self, q: &QueryBox) -> Result<Vec<u64>> {
        let mut rows = Vec::new();
        self.scan(&ZRegion::new(q, &self.spec)?, |i| rows.push(self.slots[i].row), |_, _| {});
        Ok(rows)
    }

    /// `(count, tuples scanned)` for `q`.
    pub fn range_count(&self, q: &QueryBox) -> Result<(u64, u64)> {
        let s = self.range_stats(q)?;
        Ok((s.count, s.scanned))
    }

    pub fn range_stats(&self, q: &QueryBox) -> Result<ScanStats> {
        Ok(self.scan(&ZRegion::new(q, &self.spec)?, |_| {}, |_, _| {}))
    }

    /// Walks slots from the first key `>= zmin`. An in-box tuple is reported;
    /// an out-of-box tuple triggers a jump to the first slot at or after its
    /// BIGMIN. Stops past `zmax` or when no in-box key remains.
    pub fn scan(
        &self,
        region: &ZRegion,
        mut on_hit: impl FnMut(usize),
        mut on_jump: impl FnMut(usize, usize),
    ) -> ScanStats {
        let mut stats = ScanStats::default();
        let zmax = region.zmax();
        let mut pos = self.locate(region.zmin());
        while pos < self.slots.len() {
            let key = self.slots[pos].key;
            if key > zmax {
                break;
            }
            stats.scanned += 1;
            if region.contains(key) {
                stats.count += 1;
                on_hit(pos);
                pos += 1;
                continue;
            }
            let Some(next) = region.bigmin(key) else { break };
            let target = self.locate(next);
            stats.jumps += 1;
            on_jump(pos, target);
            pos = target;
        }
        stats
    }

    /// Pages whose key interval `(previous zmax, zmax]` meets the box. A page
    /// starting with a copy of the previous page's last key also owns that key.
    pub fn intersecting_pages(&self, q: &QueryBox) -> Result<usize> {
        let region = ZRegion::new(q, &self.spec)?;
        let mut count = 0;
        for (p, page) in self.pages.iter().enumerate() {
            let lo = match p.checked_sub(1).map(|i| self.pages[i].zmax) {
                None => ZKey::ZERO,
                Some(prev) if prev == page.zmin => page.zmin,
                Some(prev) => ZKey(prev.0 + ethnum::U256::ONE),
            };
            if region.next_at_or_after(lo).is_some_and(|z| z <= page.zmax) {
                count += 1;
            }
        }
        Ok(count)
    }
}

/// Model CDF of every key, in input order.
fn model_cdfs<M: BitModel>(model: &M, keys: impl Iterator<Item = ZKey>, ell: usize) -> Vec<f64> {
    let keys: Vec<ZKey> = keys.collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        keys.par_iter().map(|&z| cdf_call(model, z, ell)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        keys.iter().map(|&z| cdf_call(model, z, ell)).collect()
    }
}

/// Bucket `i` (0-based) takes CDFs in `(i/n_s, (i+1)/n_s]`; zero goes to bucket 0.
fn bucket_of(cdf: f64, n_s: usize) -> usize {
    let b = (cdf * n_s as f64).ceil() as i64 - 1;
    b.clamp(0, n_s as i64 - 1) as usize
}
