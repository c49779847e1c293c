//! Cardinality estimation on top of the index model.
//!
//! A cheap probe bounds the box's mass by CDF differences over Z intervals.
//! Boxes whose probe is small are answered exactly by a range scan; the rest
//! are estimated by progressive sampling along the model's bit chain.

use web_time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::armodel::{path_mass, BitModel, CdfForm, PrefixWalk};
use crate::error::{Error, Result};
use crate::index::CardIndex;
use crate::zorder::{QueryBox, ZKey, ZRegion};

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    /// Probe threshold below which a box is answered by the index.
    pub best: f64,
    /// Walks per progressive-sampling estimate.
    pub samples: usize,
    /// Refinement depth of the probe.
    pub depth: u32,
    /// Intervals with at most this much mass are not split further.
    pub delta0: f64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { best: 1e-2, samples: 2000, depth: 16, delta0: 1e-3, seed: 0 }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.best > 0.0 && self.best < 1.0) {
            return Err(Error::Input(format!("routing threshold must lie in (0, 1), got {}", self.best)));
        }
        if self.samples == 0 {
            return Err(Error::Input("sample count must be at least 1".into()));
        }
        if !(self.delta0 >= 0.0) {
            return Err(Error::Input(format!("pruning precision must be non-negative, got {}", self.delta0)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactIndex,
    ProgressiveSample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub card: f64,
    pub method: Method,
    #[serde(rename = "C0")]
    pub c0: f64,
    /// Tuples scanned on the exact path, 0 when sampled.
    #[serde(rename = "N_scan")]
    pub n_scan: u64,
    pub elapsed_us: f64,
}

/// Model mass of all keys in `[lo, hi]`: inclusive CDF at `hi` minus CDF at `lo`.
pub fn interval_mass<M: BitModel>(model: &M, lo: ZKey, hi: ZKey, ell: usize) -> f64 {
    let upper = path_mass(model, hi, ell, CdfForm::Weighted).cdf_inclusive();
    let lower = path_mass(model, lo, ell, CdfForm::Weighted).cdf;
    (upper - lower).clamp(0.0, 1.0)
}

/// Probe without refinement: the mass between the box's Z endpoints.
pub fn fast_cdf_est_naive<M: BitModel>(model: &M, region: &ZRegion, ell: usize) -> f64 {
    interval_mass(model, region.zmin(), region.zmax(), ell)
}

/// Refined probe over `[lo, hi]`.
///
/// The interval is split at its midpoint. If the midpoint lies in the box both
/// halves are kept; otherwise the out-of-box gap around it is cut away and the
/// pieces `[lo, litmax]` and `[bigmin, hi]` remain. The result is the smaller
/// of the interval's own mass and the sum over its pieces, so it never exceeds
/// the naive probe and never grows with depth.
pub fn fast_cdf_est_refine<M: BitModel>(
    model: &M,
    region: &ZRegion,
    lo: ZKey,
    hi: ZKey,
    depth: u32,
    delta0: f64,
    ell: usize,
) -> f64 {
    let r = Refiner { model, region, ell, delta0 };
    r.run(lo, hi, r.lower(lo), r.upper(hi), depth, &mut Vec::new())
}

/// Outcome of a refined probe.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    /// Refined selectivity bound.
    pub mass: f64,
    /// Disjoint closed Z intervals the bound is made of, in ascending order.
    /// Together they hold every in-box key.
    pub intervals: Vec<(ZKey, ZKey)>,
}

/// [`fast_cdf_est_refine`] that also reports the surviving intervals.
pub fn refine_probe<M: BitModel>(
    model: &M,
    region: &ZRegion,
    lo: ZKey,
    hi: ZKey,
    depth: u32,
    delta0: f64,
    ell: usize,
) -> Probe {
    let r = Refiner { model, region, ell, delta0 };
    let mut intervals = Vec::new();
    let mass = r.run(lo, hi, r.lower(lo), r.upper(hi), depth, &mut intervals);
    Probe { mass, intervals }
}

/// Upper bound on the tuples a range scan touches when its box is covered by
/// `intervals`: the tuples inside them, plus one out-of-box tuple per cut gap
/// compared before a jump and one past the end compared before stopping.
pub fn scan_certificate<M: BitModel>(idx: &CardIndex<M>, intervals: &[(ZKey, ZKey)]) -> u64 {
    let inside: usize = intervals.iter().map(|&(lo, hi)| idx.count_between(lo, hi)).sum();
    (inside + intervals.len()) as u64
}

struct Refiner<'a, M> {
    model: &'a M,
    region: &'a ZRegion,
    ell: usize,
    delta0: f64,
}

impl<M: BitModel> Refiner<'_, M> {
    fn lower(&self, z: ZKey) -> f64 {
        path_mass(self.model, z, self.ell, CdfForm::Weighted).cdf
    }

    fn upper(&self, z: ZKey) -> f64 {
        path_mass(self.model, z, self.ell, CdfForm::Weighted).cdf_inclusive()
    }

    /// `lower_lo` and `upper_hi` are the endpoint masses, shared with the
    /// parent. Appends the chosen intervals to `out`.
    fn run(&self, lo: ZKey, hi: ZKey, lower_lo: f64, upper_hi: f64, depth: u32, out: &mut Vec<(ZKey, ZKey)>) -> f64 {
        let whole = (upper_hi - lower_lo).clamp(0.0, 1.0);
        if depth == 0 || whole <= self.delta0 || lo >= hi {
            out.push((lo, hi));
            return whole;
        }
        let mid = ZKey::midpoint(lo, hi);
        let (left, right) = if self.region.contains(mid) {
            (Some(mid), Some(ZKey(mid.0 + ethnum::U256::ONE)))
        } else {
            (
                self.region.litmax(mid).filter(|z| *z >= lo),
                self.region.bigmin(mid).filter(|z| *z <= hi),
            )
        };
        let mark = out.len();
        let mut pieces = 0.0;
        if let Some(end) = left {
            pieces += self.run(lo, end, lower_lo, self.upper(end), depth - 1, out);
        }
        if let Some(start) = right {
            pieces += self.run(start, hi, self.lower(start), upper_hi, depth - 1, out);
        }
        if pieces < whole {
            pieces
        } else {
            out.truncate(mark);
            out.push((lo, hi));
            whole
        }
    }
}

/// Progressive-sampling estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleEstimate {
    pub card: f64,
    pub std_error: f64,
}

/// Monte-Carlo estimate of the box's row count.
///
/// Each walk draws bits from the model restricted to branches whose cell still
/// meets the box, multiplying its weight by the surviving branch mass. A walk
/// stops early once its cell lies entirely inside the box, since every later
/// step would keep both branches (factor 1). The estimate is the mean weight
/// times `rows`.
pub fn z_progressive_sample<M: BitModel, R: Rng>(
    model: &M,
    region: &ZRegion,
    samples: usize,
    rows: usize,
    rng: &mut R,
) -> SampleEstimate {
    let n = model.key_bits();
    let spec = *region.spec();
    let mut walk = model.walk();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples.max(1) {
        walk.clear();
        let mut weight = 1.0;
        let mut cell = ZKey::ZERO;
        for pos in 1..=n {
            if region.cell_inside(cell, pos - 1) {
                break;
            }
            let p = walk.prob_one();
            let keep0 = region.extension_intersects(cell, pos, false);
            let keep1 = region.extension_intersects(cell, pos, true);
            let m0 = if keep0 { 1.0 - p } else { 0.0 };
            let m1 = if keep1 { p } else { 0.0 };
            let mass = m0 + m1;
            if mass <= 0.0 {
                weight = 0.0;
                break;
            }
            weight *= mass;
            let bit = match (keep0, keep1) {
                (true, true) => rng.random::<f64>() < p,
                (false, _) => true,
                (_, false) => false,
            };
            cell = cell.with_bit(&spec, pos, bit);
            if pos < n {
                // cannot fail: pos < n
                let _ = walk.push(bit);
            }
        }
        sum += weight;
        sum_sq += weight * weight;
    }
    let k = samples.max(1) as f64;
    let mean = sum / k;
    let var = if k > 1.0 { ((sum_sq - k * mean * mean) / (k - 1.0)).max(0.0) } else { 0.0 };
    SampleEstimate { card: mean * rows as f64, std_error: (var / k).sqrt() * rows as f64 }
}

/// Per-query random stream: the global seed picks the key, the query index the stream.
pub fn query_rng(seed: u64, query_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(query_index);
    rng
}

/// Routes `q` by its refined probe: exact index scan when the probe is at
/// most `best`, progressive sampling otherwise.
///
/// The probe is only as good as the model, so before scanning, the tuples
/// the scan can touch are bounded exactly through [`scan_certificate`]. If that
/// bound exceeds `best * N` the query is sampled instead; such results carry
/// a `c0` at or below `best` with the sampling method. A scan that still
/// touches more than `best * N` tuples is reported as [`Error::ScanBound`].
pub fn hybrid_estimate<M: BitModel>(
    idx: &CardIndex<M>,
    q: &QueryBox,
    cfg: &EstimatorConfig,
    query_index: u64,
) -> Result<EstimateResult> {
    let start = Instant::now();
    let region = ZRegion::new(q, idx.spec())?;
    let model = idx.model();
    let probe = refine_probe(model, &region, region.zmin(), region.zmax(), cfg.depth, cfg.delta0, idx.ell());
    let rows = idx.len();
    let bound = cfg.best * rows as f64;
    let exact = probe.mass <= cfg.best && scan_certificate(idx, &probe.intervals) as f64 <= bound;
    let (card, method, n_scan) = if exact {
        let stats = idx.range_stats(q)?;
        if stats.scanned as f64 > bound {
            return Err(Error::ScanBound { scanned: stats.scanned, bound });
        }
        (stats.count as f64, Method::ExactIndex, stats.scanned)
    } else {
        let mut rng = query_rng(cfg.seed, query_index);
        let est = z_progressive_sample(model, &region, cfg.samples, rows, &mut rng);
        (est.card, Method::ProgressiveSample, 0)
    };
    Ok(EstimateResult { card, method, c0: probe.mass, n_scan, elapsed_us: start.elapsed().as_secs_f64() * 1e6 })
}

/// [`hybrid_estimate`] over a batch; query `i` draws from stream `i`, so the
/// results do not depend on how the batch is scheduled.
pub fn estimate_batch<M: BitModel>(
    idx: &CardIndex<M>,
    queries: &[QueryBox],
    cfg: &EstimatorConfig,
) -> Vec<Result<EstimateResult>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        queries.par_iter().enumerate().map(|(i, q)| hybrid_estimate(idx, q, cfg, i as u64)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        queries.iter().enumerate().map(|(i, q)| hybrid_estimate(idx, q, cfg, i as u64)).collect()
    }
}

/// `max(E/T, T/E)` after raising both to at least 1.
pub fn q_error(estimate: f64, truth: f64) -> f64 {
    let e = estimate.max(1.0);
    let t = truth.max(1.0);
    (e / t).max(t / e)
}
